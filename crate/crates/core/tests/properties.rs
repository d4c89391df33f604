use std::path::Path;
use std::sync::Arc;

use proptest::prelude::*;

use spca_core::algos::{
    find_gap_index, greedy_corr, greedy_corr_scores, rtpm, rtpm_iterate, top_s_project, CandidateVector, Mode,
    RtpmConfig,
};
use spca_core::experiments::{lower_median, parse_grid, Config, ExperimentRecord, Metric, SampleSize};
use spca_core::linalg::{sin2_angle, threshold_entries, top_r, SymMatrix};
use spca_core::models::{sample_gaussian, CovOperator};

fn vec_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 1..max_len)
}

fn sym_strategy(max_d: usize) -> impl Strategy<Value = SymMatrix> {
    (2..max_d).prop_flat_map(|d| {
        prop::collection::vec(-3.0..3.0f64, d * d)
            .prop_map(move |a| SymMatrix::from_fn(d, |i, j| 0.5 * (a[i * d + j] + a[j * d + i])).unwrap())
    })
}

fn psd_strategy(max_d: usize) -> impl Strategy<Value = SymMatrix> {
    (2..max_d).prop_flat_map(|d| {
        prop::collection::vec(-2.0..2.0f64, d * (d + 1)).prop_map(move |a| {
            SymMatrix::from_fn(d, |i, j| (0..d + 1).map(|k| a[k * d + i] * a[k * d + j]).sum::<f64>()).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn top_r_is_idempotent(v in vec_strategy(30), frac in 0.0..1.0f64) {
        let r = 1 + ((v.len() - 1) as f64 * frac) as usize;
        let once = top_r(&v, r).unwrap();
        prop_assert_eq!(top_r(&once, r).unwrap(), once.clone());
        prop_assert!(once.iter().filter(|x| **x != 0.0).count() <= r);
    }

    #[test]
    fn thresholding_commutes_with_permutation(m in sym_strategy(8), tau in 0.01..2.0f64, seed in any::<u64>()) {
        let d = m.dim();
        let mut perm: Vec<usize> = (0..d).collect();
        // Fisher-Yates driven by the seed
        let mut state = seed;
        for i in (1..d).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let pm = SymMatrix::from_fn(d, |i, j| m.get(perm[i], perm[j])).unwrap();
        let a = threshold_entries(&pm, tau).unwrap();
        let t = threshold_entries(&m, tau).unwrap();
        let b = SymMatrix::from_fn(d, |i, j| t.get(perm[i], perm[j])).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sin2_is_scale_invariant_and_bounded(u in vec_strategy(12), c in 0.1..50.0f64) {
        prop_assume!(u.iter().any(|x| x.abs() > 1e-3));
        let v: Vec<f64> = u.iter().rev().copied().collect();
        let a = sin2_angle(&u, &v).unwrap();
        let scaled: Vec<f64> = u.iter().map(|x| -c * x).collect();
        prop_assert!((a - sin2_angle(&scaled, &v).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(sin2_angle(&u, &u).unwrap() < 1e-12);
    }

    #[test]
    fn truncated_step_is_a_unit_candidate(m in psd_strategy(10), i in 0usize..10, frac in 0.0..1.0f64) {
        let d = m.dim();
        let r = 1 + ((d - 1) as f64 * frac) as usize;
        let op = CovOperator::dense(m);
        let u = CandidateVector::basis(d, i % d, r);
        let next = rtpm_iterate(&op, &u, r).unwrap();
        let n: f64 = next.values().iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((n - 1.0).abs() < 1e-10);
        prop_assert!(next.support().len() <= r);
        let nz: Vec<usize> = (0..d).filter(|&j| next.values()[j] != 0.0).collect();
        prop_assert_eq!(nz.as_slice(), next.support());
    }

    #[test]
    fn power_step_is_linear_in_scale(m in psd_strategy(8), c in 0.1..20.0f64) {
        // scaling Σ by c > 0 leaves every normalized iterate unchanged
        let d = m.dim();
        let scaled = m.scaled(c);
        let (a, b) = (CovOperator::dense(m), CovOperator::dense(scaled));
        let mut u = CandidateVector::basis(d, 0, 3);
        let mut w = u.clone();
        for _ in 0..5 {
            u = rtpm_iterate(&a, &u, 3.min(d)).unwrap();
            w = rtpm_iterate(&b, &w, 3.min(d)).unwrap();
        }
        for (x, y) in u.values().iter().zip(w.values()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn greedy_set_is_the_brute_force_top_s(m in sym_strategy(9), s_frac in 0.0..1.0f64, i in 0usize..9) {
        let d = m.dim();
        let s = 1 + ((d - 1) as f64 * s_frac) as usize;
        let i_star = i % d;
        let out = greedy_corr(&m, s, i_star);
        prop_assume!(out.is_ok());
        let support = out.unwrap().support().to_vec();
        let scores = greedy_corr_scores(&m, i_star).unwrap();
        // every chosen score is at least every unchosen one
        let chosen_min = support.iter().map(|&j| scores[j]).fold(f64::INFINITY, f64::min);
        let other_max = (0..d).filter(|j| !support.contains(j)).map(|j| scores[j]).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(support.len() <= s);
        prop_assert!(support.is_empty() || chosen_min >= other_max || support.len() < s);
    }

    #[test]
    fn proper_projection_keeps_unit_norm(v in vec_strategy(20), frac in 0.0..1.0f64) {
        prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
        let d = v.len();
        let s = 1 + ((d - 1) as f64 * frac) as usize;
        let c = CandidateVector::from_unnormalized(v, d).unwrap();
        let p = top_s_project(&c, s).unwrap();
        let n: f64 = p.values().iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((n - 1.0).abs() < 1e-12);
        prop_assert!(p.support().len() <= s);
    }

    #[test]
    fn gap_index_meets_its_guarantee(mut ev in prop::collection::vec(0.1..10.0f64, 2..8), beta in 0.01..0.9f64) {
        ev.sort_by(|a, b| b.total_cmp(a));
        let k = ev.len() - 1;
        if let Ok(p) = find_gap_index(&ev, k, beta) {
            prop_assert!((1..=k).contains(&p));
            if k == 1 {
                // a single component needs no gap
                prop_assert_eq!(p, 1);
                return Ok(());
            }
            prop_assert!(ev[p] / ev[p - 1] <= 1.0 - beta / k as f64 + 1e-15);
            prop_assert!(ev[p - 1] / ev[0] >= 1.0 - beta - 1e-12);
        }
    }

    #[test]
    fn metric_pairs_are_complementary(value in 0.0..1.0f64) {
        let rec = ExperimentRecord {
            algorithm: "rtpm".into(),
            family: "spiked".into(),
            d: 3,
            s: 1,
            k: 1,
            gamma: None,
            delta: None,
            n: SampleSize::Population,
            seed: 0,
            mode: None,
            r: None,
            t: None,
            metric: Metric::Sin2,
            value,
            wall_ms: 0.0,
            iterations_used: 0,
            flags: vec![],
        };
        let twin = rec.with_metric(Metric::Correlation2, 1.0 - value);
        prop_assert!((twin.value + rec.value - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn lower_median_is_an_element(values in prop::collection::vec(prop::option::of(1usize..1000), 1..15)) {
        let m = lower_median(&values);
        prop_assert!(values.contains(&m));
        let below = values.iter().filter(|x| x.unwrap_or(usize::MAX) < m.unwrap_or(usize::MAX)).count();
        prop_assert!(below <= (values.len() - 1) / 2);
    }

    #[test]
    fn geometric_grids_are_increasing(start in 1usize..100, factor in 2usize..4, steps in 1u32..6) {
        let stop = start * factor.pow(steps);
        let g = parse_grid("n_grid", &format!("{start}:{stop}:x{factor}")).unwrap();
        prop_assert_eq!(g.len(), steps as usize + 1);
        prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn config_text_round_trips(n in 1usize..100000, seed in any::<u64>(), gamma in 0.01..0.99f64) {
        let text = format!("n={n}\nseed={seed}\ngamma={gamma}\nfamily=spiked\n");
        let cfg = Config::parse(&text, Path::new("p")).unwrap();
        let back = Config::parse(&cfg.to_text(), Path::new("p")).unwrap();
        prop_assert_eq!(cfg, back);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rtpm_is_deterministic(m in psd_strategy(7), seed in 0u64..1000, disjoint in any::<bool>()) {
        let data = Arc::new(sample_gaussian(&m, 60, seed).unwrap());
        let mode = if disjoint { Mode::Disjoint } else { Mode::Full };
        let cfg = RtpmConfig::new(2, 6, mode);
        let a = rtpm(&data, &cfg).unwrap();
        let b = rtpm(&data, &cfg).unwrap();
        prop_assert_eq!(a.candidate.values(), b.candidate.values());
        prop_assert_eq!(a.restart, b.restart);
    }
}
