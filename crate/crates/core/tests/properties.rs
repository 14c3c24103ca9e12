mod common;

use dequant::analysis::{check_partition_inequalities, partition_blocks, snr};
use dequant::calibration::{epsilon_empirical, upper_quantile};
use dequant::constrained::Preset;
use dequant::harness::solve_model;
use dequant::instance::generate_instance;
use dequant::lasso_inf::AdmmOptions;
use dequant::partition::partition;
use dequant::prox::{project_l2_ball, project_linf_ball, project_nonneg, soft_threshold};
use dequant::quantizer::{quantize, representable_levels, QuantizerConfig, Saturation};
use nalgebra::DVector;
use proptest::prelude::*;

fn vector(len: std::ops::Range<usize>) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-10.0..10.0f64, len).prop_map(DVector::from_vec)
}

proptest! {
    #[test]
    fn quantized_values_are_levels(bits in 1u32..8, g in 0.1..10.0f64, t in -30.0..30.0f64) {
        let cfg = QuantizerConfig::new(bits, g).unwrap();
        let r = quantize(&cfg, t).unwrap();
        prop_assert!(representable_levels(&cfg).contains(&r.level));
        let d = cfg.interval();
        match r.saturation {
            Saturation::None => prop_assert!((t - r.level).abs() <= d / 2.0 + 1e-12),
            Saturation::Positive => prop_assert!(t >= cfg.saturation_threshold() - 1e-12),
            Saturation::Negative => prop_assert!(t <= -cfg.saturation_threshold() + 1e-12),
        }
    }

    #[test]
    fn quantizer_is_odd_off_ties(bits in 1u32..8, t in -5.0..5.0f64) {
        let cfg = QuantizerConfig::new(bits, 2.0).unwrap();
        let a = quantize(&cfg, t).unwrap();
        let b = quantize(&cfg, -t).unwrap();
        if t != 0.0 {
            prop_assert_eq!(a.level, -b.level);
        }
    }

    #[test]
    fn ground_truth_meets_its_own_constraints(seed in 0u64..1000, bits in 2u32..6, g in 0.05..1.0f64) {
        let inst = generate_instance(30, 25, 3, 4.0, QuantizerConfig::new(bits, g).unwrap(), seed).unwrap();
        let sys = partition(&inst);
        prop_assert_eq!(sys.m_tilde() + sys.m_bar(), 25);
        prop_assert!(sys.linf_violation(&inst.x_star) <= 1e-12);
        prop_assert!(sys.saturation_violation(&inst.x_star) <= 1e-12);
    }

    #[test]
    fn soft_threshold_shrinks(x in vector(1..20), t in 0.0..5.0f64) {
        let z = soft_threshold(&x, t).unwrap();
        for (a, b) in x.iter().zip(z.iter()) {
            prop_assert!((b.abs() - (a.abs() - t).max(0.0)).abs() <= 1e-12);
            prop_assert!(a * b >= 0.0);
        }
    }

    #[test]
    fn projections_land_in_their_sets(x in vector(1..20), r in 0.0..5.0f64) {
        let p = project_linf_ball(&x, r).unwrap();
        prop_assert!(p.amax() <= r);
        prop_assert_eq!(project_linf_ball(&p, r).unwrap(), p);
        let q = project_l2_ball(&x, r).unwrap();
        prop_assert!(q.norm() <= r * (1.0 + 1e-12));
        prop_assert!((project_l2_ball(&q, r).unwrap() - &q).amax() <= 1e-12);
        prop_assert!(project_nonneg(&x).iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn block_inequality_holds_for_any_vector(h in vector(2..40), l in 1usize..6, s in 0usize..4) {
        let s = s.min(h.len() - 1);
        let t0: Vec<usize> = (0..s).collect();
        let rep = check_partition_inequalities(&h, &DVector::zeros(h.len()), &t0, l);
        prop_assert!(rep.lemma3() >= -1e-9 * h.norm().max(1.0));
        let blocks = partition_blocks(&h, &t0, l);
        prop_assert_eq!(blocks.iter().map(Vec::len).sum::<usize>(), h.len() - s);
    }

    #[test]
    fn snr_is_scale_invariant(
        (x, e) in (2usize..10).prop_flat_map(|n| (vector(n..n + 1), vector(n..n + 1))),
        c in 0.1..100.0f64,
    ) {
        prop_assume!(x.norm() > 1e-3);
        let a = snr(&(&x + &e), &x).unwrap();
        let b = snr(&((&x + &e) * c), &(&x * c)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn quantile_is_a_sample_value(values in prop::collection::vec(-5.0..5.0f64, 1..200), pi in 0.01..0.99f64) {
        let q = upper_quantile(values.clone(), pi);
        prop_assert!(values.contains(&q));
        let above = values.iter().filter(|&&v| v > q).count() as f64;
        prop_assert!(above <= pi * values.len() as f64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn solver_outputs_are_feasible(seed in 0u64..10_000) {
        let (inst, sys) = common::small_instance(20, 14, 3, 3, seed);
        let cal = common::inflated_oracle(&sys, &inst.x_star, 1.0);
        for preset in Preset::ALL {
            let r = solve_model(&sys, preset, &cal, &AdmmOptions::default()).unwrap();
            prop_assert!(r.feasibility.max_violation() <= 1e-6, "{preset}: {:?}", r.feasibility);
        }
    }

    #[test]
    fn smaller_pi_gives_larger_radius(m in 5usize..60, seed in 0u64..100) {
        let loose = epsilon_empirical(0.2, 1.0, m, 4000, seed).unwrap();
        let tight = epsilon_empirical(0.01, 1.0, m, 4000, seed).unwrap();
        prop_assert!(tight >= loose);
    }
}
