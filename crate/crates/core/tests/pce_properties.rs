use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rss_core::ledger::EvaluationLedger;
use rss_core::linalg::{lstsq, Matrix};
use rss_core::models::{Borehole, Model};
use rss_core::param_space::{InputDistribution, ParameterSpace, SamplingScheme};
use rss_core::pce::{fit_pce, hybrid_lar, loo_error, total_sobol, PceConfig};
use rss_core::pipeline::evaluate_points;
use rss_core::screening::{run_screening, ScreeningConfig};

fn refit_loo(x: &Matrix, y: &[f64]) -> f64 {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let den: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let num: f64 = (0..n)
        .map(|i| {
            let keep: Vec<usize> = (0..n).filter(|&k| k != i).collect();
            let rows: Vec<Vec<f64>> = keep.iter().map(|&k| x.row(k).to_vec()).collect();
            let ys: Vec<f64> = keep.iter().map(|&k| y[k]).collect();
            let c = lstsq(&Matrix::from_rows(&rows).unwrap(), &ys).unwrap();
            let pred: f64 = x.row(i).iter().zip(&c).map(|(a, b)| a * b).sum();
            (y[i] - pred).powi(2)
        })
        .sum();
    num / den
}

fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (12usize..=30, 1usize..10).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, p), n),
            prop::collection::vec(-2.0f64..2.0, n),
        )
    })
}

fn unit_square(d: usize) -> ParameterSpace {
    ParameterSpace::new(
        (1..=d)
            .map(|i| InputDistribution::uniform(format!("x{i}"), -1.0, 1.0).unwrap())
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn hat_loo_equals_refit_loo((cols, y) in instance()) {
        let rows: Vec<Vec<f64>> = cols
            .iter()
            .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let c = lstsq(&x, &y).unwrap();
        let hat = loo_error(&x, &y, &c).unwrap();
        let brute = refit_loo(&x, &y);
        prop_assert!((hat - brute).abs() <= 1e-10 * brute.max(1.0), "{} vs {}", hat, brute);
    }

    #[test]
    fn affine_output_transform(a in 0.1f64..10.0, b in -50.0f64..50.0, seed in 0u64..500) {
        let space = unit_square(2);
        let pts = space.sample(40, SamplingScheme::LatinHypercube, seed).points;
        let g: Vec<f64> = pts.iter().map(|p| (p[0] * 2.0).sin() + 0.3 * p[1] * p[0]).collect();
        let h: Vec<f64> = g.iter().map(|v| a * v + b).collect();
        let cfg = PceConfig { p_max: 4 };
        let f = fit_pce(&space, &pts, &g, &cfg).unwrap();
        let t = fit_pce(&space, &pts, &h, &cfg).unwrap();
        prop_assert_eq!(&f.active_terms, &t.active_terms);
        for (k, (cf, ct)) in f.coefficients.iter().zip(&t.coefficients).enumerate() {
            let want = if f.term_index(k).iter().all(|&e| e == 0) { a * cf + b } else { a * cf };
            prop_assert!((ct - want).abs() <= 1e-8 * (1.0 + want.abs()), "{} vs {}", ct, want);
        }
        for (x, y) in total_sobol(&f).unwrap().iter().zip(total_sobol(&t).unwrap()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        prop_assert!((f.diagnostics.loo - t.diagnostics.loo).abs() <= 1e-8 * f.diagnostics.loo.max(1e-12));
    }
}

/// Three true regressors plus `noise_cols` independent uniform columns.
fn noisy_instance(n: usize, noise_cols: usize, seed: u64) -> (Matrix, Matrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| 1.0 + 2.0 * r[0] - r[1] + 0.5 * r[2] + 0.3 * rng.gen_range(-1.0..1.0))
        .collect();
    let base: Vec<Vec<f64>> = x.iter().map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect()).collect();
    let wide: Vec<Vec<f64>> = base
        .iter()
        .map(|r| {
            let mut v = r.clone();
            v.extend((0..noise_cols).map(|_| rng.gen_range(-1.0..1.0)));
            v
        })
        .collect();
    (Matrix::from_rows(&base).unwrap(), Matrix::from_rows(&wide).unwrap(), y)
}

// Picking the path minimum lowers the LOO a little even when the extra
// columns are noise; a large drop means lucky near-interpolating supports.
#[test]
fn pure_noise_regressors_do_not_buy_a_lower_loo() {
    for (n, k) in [(40, 5), (40, 20), (40, 39), (60, 30), (100, 60)] {
        let mut ratios: Vec<f64> = (0..50)
            .map(|seed| {
                let (base, wide, y) = noisy_instance(n, k, seed);
                hybrid_lar(&wide, &y).unwrap().loo / hybrid_lar(&base, &y).unwrap().loo
            })
            .collect();
        ratios.sort_by(f64::total_cmp);
        assert!(ratios[0] > 0.25, "n {n}, {k} noise columns: worst ratio {}", ratios[0]);
        assert!(ratios[25] > 0.6, "n {n}, {k} noise columns: median ratio {}", ratios[25]);
    }
}

#[test]
fn lar_is_deterministic() {
    let (_, wide, y) = noisy_instance(40, 20, 9);
    let a = hybrid_lar(&wide, &y).unwrap();
    let b = hybrid_lar(&wide, &y).unwrap();
    assert_eq!(a.support, b.support);
    assert_eq!(
        a.coefficients.iter().map(|c| c.to_bits()).collect::<Vec<_>>(),
        b.coefficients.iter().map(|c| c.to_bits()).collect::<Vec<_>>()
    );
}

// The tail {T_u, T_l} is ordered the same way by the total Sobol' indices
// of a full-space surrogate and by the converged screening metric.
#[test]
fn borehole_sobol_tail_agrees_with_screening() {
    let model = Borehole::new();
    let space = model.reference_space();
    let pts = space.sample(300, SamplingScheme::LatinHypercube, 11).points;
    let y = evaluate_points(&model, &pts).unwrap();
    let fss = fit_pce(&space, &pts, &y, &PceConfig::default()).unwrap();
    let t = total_sobol(&fss).unwrap();
    let cfg = ScreeningConfig { tau_screen: 0.1, ..ScreeningConfig::default() };
    let report = run_screening(&model, &space, &cfg, &mut EvaluationLedger::new(), 11).unwrap();
    let nu = &report.last().nu;
    let by = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
        idx
    };
    let (ot, on) = (by(&t), by(nu));
    let mut tail_t = ot[5..].to_vec();
    let mut tail_n = on[5..].to_vec();
    tail_t.sort();
    tail_n.sort();
    assert_eq!(tail_t, vec![2, 4]);
    assert_eq!(tail_n, vec![2, 4]);
    assert_eq!(ot[0], 0);
    assert_eq!(on[0], 0);
}
