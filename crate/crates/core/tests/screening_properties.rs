use std::sync::atomic::{AtomicUsize, Ordering};

use proptest::prelude::*;

use rss_core::ledger::{EvaluationLedger, EvaluationTag};
use rss_core::models::{Borehole, Model};
use rss_core::param_space::{InputDistribution, ParameterSpace};
use rss_core::screening::{active_set, rank_parameters, run_screening, ScreeningConfig};
use rss_core::Result;

/// `G(x) = sum_i w_i x_i^2 + x_1 x_2` on `U[-1, 1]^d`, inputs optionally permuted.
struct Poly {
    weights: Vec<f64>,
    /// Position in `theta` of original input `i`.
    perm: Vec<usize>,
    scale: f64,
    calls: AtomicUsize,
}

impl Poly {
    fn new(weights: Vec<f64>, perm: Vec<usize>, scale: f64) -> Self {
        Self {
            weights,
            perm,
            scale,
            calls: AtomicUsize::new(0),
        }
    }
}

impl Model for Poly {
    fn name(&self) -> &str {
        "poly"
    }

    fn reference_space(&self) -> ParameterSpace {
        ParameterSpace::new(
            (0..self.weights.len())
                .map(|i| InputDistribution::uniform(format!("x{i}"), -1.0, 1.0).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let x = |i: usize| theta[self.perm[i]];
        let sq: f64 = self.weights.iter().enumerate().map(|(i, w)| w * x(i) * x(i)).sum();
        Ok(self.scale * (sq + x(0) * x(1)))
    }
}

fn permutation(d: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..d).collect::<Vec<usize>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ranks_are_a_permutation(nu in prop::collection::vec(0.0f64..1.0, 1..12)) {
        let mut r = rank_parameters(&nu);
        for w in r.windows(2) {
            prop_assert!(nu[w[0]] >= nu[w[1]] - 1e-8 * nu.iter().cloned().fold(0.0, f64::max));
        }
        r.sort();
        prop_assert_eq!(r, (0..nu.len()).collect::<Vec<_>>());
    }

    #[test]
    fn active_set_follows_relabeling(
        (nu, perm) in prop::collection::vec(0.01f64..1.0, 2..10)
            .prop_flat_map(|nu| { let d = nu.len(); (Just(nu), permutation(d)) }),
        cut in 0.05f64..0.95,
    ) {
        let permuted: Vec<f64> = (0..nu.len()).map(|k| nu[perm[k]]).collect();
        let mut mapped: Vec<usize> = active_set(&permuted, cut).iter().map(|&k| perm[k]).collect();
        mapped.sort();
        prop_assert_eq!(mapped, active_set(&nu, cut));
    }

    #[test]
    fn output_scale_leaves_screening_unchanged(
        weights in prop::collection::vec(0.1f64..3.0, 3..6),
        scale in 1e-3f64..1e3,
        seed in 0u64..1000,
    ) {
        let d = weights.len();
        let id: Vec<usize> = (0..d).collect();
        let cfg = ScreeningConfig::default();
        let base = Poly::new(weights.clone(), id.clone(), 1.0);
        let scaled = Poly::new(weights, id, scale);
        let space = base.reference_space();
        let a = run_screening(&base, &space, &cfg, &mut EvaluationLedger::new(), seed).unwrap();
        let b = run_screening(&scaled, &space, &cfg, &mut EvaluationLedger::new(), seed).unwrap();
        prop_assert_eq!(a.iterations.len(), b.iterations.len());
        prop_assert_eq!(&a.active, &b.active);
        for (x, y) in a.iterations.iter().zip(&b.iterations) {
            prop_assert_eq!(&x.ranks, &y.ranks);
            for (p, q) in x.nu.iter().zip(&y.nu) {
                prop_assert!((p - q).abs() <= 1e-7, "{} vs {}", p, q);
            }
        }
    }

    #[test]
    fn relabeled_inputs_give_the_relabeled_active_set(
        (weights, perm) in prop::collection::vec(0.1f64..3.0, 3..6)
            .prop_flat_map(|w| { let d = w.len(); (Just(w), permutation(d)) }),
        seed in 0u64..1000,
    ) {
        // The metric is exact for this model class only in expectation, so
        // compare on converged metrics from a large batch where sampling
        // noise cannot move an input across the cut.
        let d = weights.len();
        let cfg = ScreeningConfig { n1: 400, s_min: 1, s_max: 1, ..ScreeningConfig::default() };
        let plain = Poly::new(weights.clone(), (0..d).collect(), 1.0);
        let moved = Poly::new(weights, perm.clone(), 1.0);
        let space = plain.reference_space();
        let a = run_screening(&plain, &space, &cfg, &mut EvaluationLedger::new(), seed).unwrap();
        let b = run_screening(&moved, &space, &cfg, &mut EvaluationLedger::new(), seed).unwrap();
        // Input i of `plain` sits at position perm[i] of `moved`.
        let nu_a = &a.last().nu;
        let nu_b = &b.last().nu;
        let margin = nu_a.iter().map(|v| (v / nu_a.iter().cloned().fold(0.0, f64::max) - cfg.tau_screen).abs()).fold(f64::INFINITY, f64::min);
        prop_assume!(margin > 0.05);
        let mut mapped: Vec<usize> = a.active.iter().map(|&i| perm[i]).collect();
        mapped.sort();
        prop_assert_eq!(mapped, b.active.clone());
        for i in 0..d {
            prop_assert!((nu_a[i] - nu_b[perm[i]]).abs() < 0.05);
        }
    }

    #[test]
    fn budget_matches_the_evaluation_count(
        n1 in 1usize..6,
        beta in 0.5f64..2.5,
        s_max in 1usize..6,
        seed in 0u64..100,
    ) {
        let model = Poly::new(vec![1.0, 0.5, 0.2], vec![0, 1, 2], 1.0);
        let space = model.reference_space();
        let cfg = ScreeningConfig { n1, beta, s_min: 1, s_max, ..ScreeningConfig::default() };
        let mut ledger = EvaluationLedger::new();
        let report = run_screening(&model, &space, &cfg, &mut ledger, seed).unwrap();
        let s = report.last().s;
        prop_assert!(s <= s_max);
        let expected = n1 + (s - 1) * cfg.batch_size();
        prop_assert_eq!(report.n_total(), expected);
        prop_assert_eq!(ledger.count(EvaluationTag::ScreeningBase), expected);
        prop_assert_eq!(ledger.len(), expected * (space.dimension() + 1));
        prop_assert_eq!(model.calls.load(Ordering::Relaxed), ledger.len());
    }
}

#[test]
fn screening_resumes_from_an_existing_ledger() {
    let model = Poly::new(vec![1.0, 0.5, 0.2], vec![0, 1, 2], 1.0);
    let space = model.reference_space();
    let cfg = ScreeningConfig::default();
    let mut ledger = EvaluationLedger::new();
    let first = run_screening(&model, &space, &cfg, &mut ledger, 3).unwrap();
    let before = ledger.len();
    let second = run_screening(&model, &space, &cfg, &mut ledger, 4).unwrap();
    assert!(ledger.len() > before);
    assert_eq!(second.iterations[0].n_total, first.n_total() + cfg.n1);
    assert!(!ledger.has_duplicates());
}

const BOREHOLE_4D: [usize; 4] = [0, 1, 3, 5];
const BOREHOLE_5D: [usize; 5] = [0, 1, 3, 5, 6];

#[test]
fn borehole_screening_reduces_to_four_or_five_inputs() {
    let model = Borehole::new();
    let space = model.reference_space();
    for seed in 0..10 {
        let cfg = ScreeningConfig { tau_screen: 0.1, ..ScreeningConfig::default() };
        let report = run_screening(&model, &space, &cfg, &mut EvaluationLedger::new(), seed).unwrap();
        assert!(report.converged, "seed {seed}");
        assert!(report.active == BOREHOLE_4D || report.active == BOREHOLE_5D, "seed {seed}: {:?}", report.active);
    }
}

// L, H_u and H_l each reach about 0.18-0.19 of r_w's metric, so the 0.2
// cut keeps r_w alone.
#[test]
fn borehole_at_the_default_cut_keeps_only_r_w() {
    let model = Borehole::new();
    let space = model.reference_space();
    let report = run_screening(&model, &space, &ScreeningConfig::default(), &mut EvaluationLedger::new(), 42).unwrap();
    assert_eq!(report.active, vec![0]);
    let nu = &report.last().nu;
    for i in [1, 3, 5] {
        let r = nu[i] / nu[0];
        assert!((0.15..0.2).contains(&r), "input {i}: {r}");
    }
}
