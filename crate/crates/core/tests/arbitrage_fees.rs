mod common;

use common::{pool, prices, weights};
use proptest::prelude::*;
use tfmm_core::reserves::reserve_update;
use tfmm_core::{arb_to_equilibrium, inside_no_arb_band, FeeParams, PoolState, PriceVector};

/// Profit from paying `amount` of token `i` into the pool (fee on input) and
/// taking out whatever token `j` keeps the invariant.
fn pairwise_profit(pool: &PoolState, p: &PriceVector, fees: &FeeParams, i: usize, j: usize, amount: f64) -> f64 {
    let (r, w) = (pool.reserves(), pool.weights().as_slice());
    let r_i = r[i] + fees.gamma() * amount;
    let r_j = r[j] * (r[i] / r_i).powf(w[i] / w[j]);
    p.as_slice()[j] * (r[j] - r_j) - p.as_slice()[i] * amount
}

/// A pool in equilibrium at `p0`, about to face different prices.
fn displaced(w: &tfmm_core::WeightVector, p0: &PriceVector) -> PoolState {
    pool(w, p0, 1000.0).with_block_index(1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn zero_fee_matches_weight_change_update(
        (w, w2, p) in (2usize..4).prop_flat_map(|n| (weights(n, 0.01), weights(n, 0.01), prices(n))),
    ) {
        let before = pool(&w, &p, 1000.0);
        let expected = reserve_update(&before, &w2, &p).unwrap();
        let shifted = PoolState::new(before.reserves().to_vec(), w2.clone(), 1).unwrap();
        let out = arb_to_equilibrium(&shifted, &p, &FeeParams::zero()).unwrap();
        let got = if out.traded { out.pool_after.reserves().to_vec() } else { shifted.reserves().to_vec() };
        for (a, b) in got.iter().zip(&expected.new_reserves) {
            prop_assert!(((a - b) / b).abs() < 1e-8, "{:?} vs {:?}", got, expected.new_reserves);
        }
    }

    #[test]
    fn band_is_monotone_in_the_fee(
        (w, p0, p1) in (2usize..5).prop_flat_map(|n| (weights(n, 0.01), prices(n), prices(n))),
        f1 in 0.0f64..0.5,
        extra in 0.0f64..0.4,
        shrink in 0.0f64..1.0,
    ) {
        // pull the second price vector toward the first so both sides of the
        // band are exercised
        let raw: Vec<f64> = p0.as_slice().iter().zip(p1.as_slice())
            .map(|(a, b)| a * (shrink * (b / a).ln() * 0.05).exp()).collect();
        let moved = PriceVector::new(raw, 0).unwrap();
        let s = displaced(&w, &p0);
        let (low, high) = (FeeParams::new(f1).unwrap(), FeeParams::new(f1 + extra).unwrap());
        if !arb_to_equilibrium(&s, &moved, &low).unwrap().traded {
            prop_assert!(!arb_to_equilibrium(&s, &moved, &high).unwrap().traded);
            prop_assert!(inside_no_arb_band(&s, &moved, &high).unwrap());
        }
    }

    #[test]
    fn accounting_and_optimality(
        (w, p0, p1) in (2usize..5).prop_flat_map(|n| (weights(n, 0.01), prices(n), prices(n))),
        fee in prop::sample::select(vec![0.0, 0.0005, 0.003, 0.01, 0.05]),
    ) {
        let s = displaced(&w, &p0);
        let fees = FeeParams::new(fee).unwrap();
        let out = arb_to_equilibrium(&s, &p1, &fees).unwrap();
        let v_before = s.value(&p1).unwrap();
        let v_after = out.pool_after.value(&p1).unwrap();
        prop_assert!(out.arb_profit >= 0.0);
        prop_assert!(out.arb_profit <= v_before - v_after + out.fees_accrued + 1e-9 * v_before);
        prop_assert!(out.pool_after.log_invariant() >= s.log_invariant() - 1e-12);

        let after = &out.pool_after;
        // the band condition, with room for rounding
        let shares: Vec<f64> = (0..w.len())
            .map(|i| (p1.as_slice()[i] * after.reserves()[i] / w.get(i)).ln()).collect();
        let spread = shares.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - shares.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(spread <= -fees.gamma().ln() + 1e-9);

        // no pairwise trade of any size is profitable afterwards
        let v = v_after;
        for i in 0..w.len() {
            for j in 0..w.len() {
                if i == j { continue; }
                for e in -8..=0 {
                    let amount = 10f64.powi(e) * after.reserves()[i];
                    prop_assert!(pairwise_profit(after, &p1, &fees, i, j, amount) <= 1e-9 * v);
                }
            }
        }
    }
}
