#![allow(dead_code)]

use proptest::prelude::*;
use tfmm_core::{PoolState, PriceVector, WeightVector};

/// Simplex point with every component at least `floor`.
pub fn weights(n: usize, floor: f64) -> impl Strategy<Value = WeightVector> {
    prop::collection::vec(0.0f64..1.0, n).prop_map(move |raw| floored(&raw, floor))
}

pub fn floored(raw: &[f64], floor: f64) -> WeightVector {
    let n = raw.len();
    let total: f64 = raw.iter().sum::<f64>() + 1e-9 * n as f64;
    let scale = 1.0 - n as f64 * floor;
    let w: Vec<f64> = raw
        .iter()
        .map(|x| floor + scale * (x + 1e-9) / total)
        .collect();
    WeightVector::normalized(&w, 1e-6).unwrap()
}

/// Prices with the numéraire at index 0.
pub fn prices(n: usize) -> impl Strategy<Value = PriceVector> {
    prop::collection::vec(-3.0f64..3.0, n - 1).prop_map(|logs| {
        let mut p = vec![1.0];
        p.extend(logs.iter().map(|l| l.exp()));
        PriceVector::new(p, 0).unwrap()
    })
}

pub fn pool(w: &WeightVector, p: &PriceVector, value: f64) -> PoolState {
    PoolState::at_equilibrium(w.clone(), p, value).unwrap()
}

/// Golden-section minimizer of a unimodal function on `[a, b]`.
pub fn golden_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Reserves minimizing `p · R'` subject to `Σ w_i ln R'_i = ln_k`, by nested
/// golden-section search over the free log-reserves (the problem is convex in
/// them). This is the trade a zero-fee arbitrageur chooses.
pub fn brute_force_reserves(w: &[f64], p: &[f64], ln_k: f64, start: &[f64]) -> Vec<f64> {
    let n = w.len();
    let centre: Vec<f64> = start.iter().map(|r| r.ln()).collect();
    let last = |y: &[f64]| (ln_k - (0..n - 1).map(|i| w[i] * y[i]).sum::<f64>()) / w[n - 1];
    let cost = |y: &[f64]| -> f64 {
        (0..n - 1).map(|i| p[i] * y[i].exp()).sum::<f64>() + p[n - 1] * last(y).exp()
    };

    // minimizes over y[depth..n-1] with y[..depth] fixed; returns the argmin
    fn inner(
        y: &mut Vec<f64>,
        depth: usize,
        free: usize,
        centre: &[f64],
        cost: &dyn Fn(&[f64]) -> f64,
    ) {
        if depth == free {
            return;
        }
        let best = golden_min(
            |v| {
                let mut trial = y.clone();
                trial[depth] = v;
                inner(&mut trial, depth + 1, free, centre, cost);
                cost(&trial)
            },
            centre[depth] - 8.0,
            centre[depth] + 8.0,
        );
        y[depth] = best;
        inner(y, depth + 1, free, centre, cost);
    }

    let mut y = centre.clone();
    inner(&mut y, 0, n - 1, &centre, &cost);
    let mut r: Vec<f64> = y[..n - 1].iter().map(|v| v.exp()).collect();
    r.push(last(&y).exp());
    r
}

/// A point strictly between `a` and `b` in every component that still sums
/// to 1: per-component fractions `t`, with the larger signed side scaled down
/// until the moves cancel.
pub fn between(a: &WeightVector, b: &WeightVector, t: &[f64]) -> WeightVector {
    let d: Vec<f64> = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| y - x).collect();
    let up: f64 = d.iter().zip(t).filter(|(d, _)| **d > 0.0).map(|(d, t)| d * t).sum();
    let down: f64 = d.iter().zip(t).filter(|(d, _)| **d < 0.0).map(|(d, t)| -d * t).sum();
    let m: Vec<f64> = a
        .as_slice()
        .iter()
        .zip(&d)
        .zip(t)
        .map(|((x, d), t)| {
            let scale = if *d > 0.0 && up > down {
                down / up
            } else if *d < 0.0 && down > up {
                up / down
            } else {
                1.0
            };
            x + d * t * scale
        })
        .collect();
    WeightVector::new(&m).unwrap()
}
