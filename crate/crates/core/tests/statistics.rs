//! Monte Carlo checks of the noise and envelope helpers.

use fusedlasso::lil::{envelope, verify_paths, LilEnvelope, LilRun};
use fusedlasso::noise::l_plus;
use fusedlasso::simulation::{self, ExperimentSpec};
use fusedlasso::{ConvexLoss, LossModel, NoiseModel};

const R: usize = 200_000;

fn models(tau: f64) -> Vec<NoiseModel> {
    [
        NoiseModel::gaussian(1.0),
        NoiseModel::uniform(2.0),
        NoiseModel::laplace(1.0),
        NoiseModel::cauchy(1.0),
    ]
    .into_iter()
    .map(|m| m.unwrap().centered_at_quantile(tau).unwrap())
    .collect()
}

#[test]
fn quantile_gradient_has_mean_zero() {
    for tau in [0.1, 0.5, 0.8] {
        let loss = LossModel::quantile(tau).unwrap();
        for (j, noise) in models(tau).iter().enumerate() {
            let eps = noise.sample(R, 40 + j as u64);
            let mean = eps.iter().map(|&e| loss.deriv_plus(e)).sum::<f64>() / R as f64;
            // The gradient lies in [tau - 1, tau], so it is 1/2-sub-Gaussian.
            assert!(mean.abs() <= 4.0 * 0.5 / (R as f64).sqrt(), "{:?} tau {tau}: {mean}", noise.kind());
        }
    }
}

#[test]
fn natural_loss_matches_monte_carlo() {
    let tau = 0.3;
    let loss = LossModel::quantile(tau).unwrap();
    for (j, noise) in models(tau).iter().enumerate() {
        let eps = noise.sample(R, 50 + j as u64);
        for k in 0..=8 {
            let t = -2.0 + 0.5 * k as f64;
            let mc = eps.iter().map(|&e| loss.deriv_plus(e - t)).sum::<f64>() / R as f64;
            let exact = l_plus(&loss, noise, t).unwrap();
            assert!((mc - exact).abs() <= 5.0 / (R as f64).sqrt(), "{:?} t {t}: {mc} vs {exact}", noise.kind());
        }
    }
    let g = NoiseModel::gaussian(1.0).unwrap();
    let eps = g.sample(R, 60);
    for t in [-1.5, 0.0, 2.0] {
        let mc = eps.iter().map(|&e| LossModel::Square.deriv_plus(e - t)).sum::<f64>() / R as f64;
        assert!((mc - l_plus(&LossModel::Square, &g, t).unwrap()).abs() <= 5.0 / (R as f64).sqrt());
    }
}

#[test]
fn envelope_shape() {
    let env = LilEnvelope::new(1.0, 0.1).unwrap();
    let mut last = 0.0;
    let mut last_ratio = f64::INFINITY;
    let mut ratio_increasing_from = None;
    for t in 1..=1_000_000u64 {
        let e = envelope(t, &env);
        assert!(e > last, "not increasing at {t}");
        last = e;
        let ratio = e / (t as f64).sqrt();
        if ratio < last_ratio {
            ratio_increasing_from = None;
        } else if ratio_increasing_from.is_none() {
            ratio_increasing_from = Some(t);
        }
        last_ratio = ratio;
    }
    // envelope / sqrt(t) = 4 sqrt(lnln(2t) + ln(1/delta)) increases from t = 1 on.
    assert_eq!(ratio_increasing_from, Some(2));
}

#[test]
fn envelope_frequency_at_larger_delta() {
    let g = NoiseModel::gaussian(1.0).unwrap();
    let env = LilEnvelope::new(1.0, 0.2).unwrap();
    let run = LilRun { horizon: 2000, paths: 2000, seed: 70, envelope_scale: 1.0 };
    let r = verify_paths(&g, &env, &run).unwrap();
    assert!(r.passed, "{} > {} + {}", r.frequency, r.bound, r.slack);
    let loose = verify_paths(&g, &env, &LilRun { envelope_scale: 10.0, ..run }).unwrap();
    assert_eq!(loose.violations, 0);
}

#[test]
fn lambda_sweep_limits() {
    let spec = ExperimentSpec::from_toml(
        r#"
name = "limits"
experiment = "lambda_sweep"
seed = 80
replications = 100
delta = 0.001
signal = { shape = "alternating", segments = 4, length = 64, jump = 1.0 }
noise = { kind = "gaussian", scale = 1.0 }
loss = { kind = "square" }
lambda = { rule = "sqrt_n_over_k" }
lambda_factors = [1e-6, 1e6]
"#,
    )
    .unwrap();
    let r = simulation::run(&spec).unwrap();
    let pts = &r.lambda_sweep.as_ref().unwrap().points;
    // No smoothing: SSE is the noise energy, n sigma^2 = 256 on average.
    assert!((pts[0].mean_sse - 256.0).abs() < 10.0, "{}", pts[0].mean_sse);
    // Constant fit: sum (theta* - 1/2)^2 = 64 plus the variance of the mean.
    assert!((pts[1].mean_sse - 64.0).abs() < 3.0, "{}", pts[1].mean_sse);
}
