mod support;

use std::f64::consts::PI;

use proptest::prelude::*;
use rand_distr::{Distribution, Normal};
use sidewinder::metrics::{fit_sinusoid, joint_correlation_summary, sliding_correlation};
use sidewinder::rng;
use sidewinder::sim::{Trajectory, TrajectorySample};
use support::checks;

fn grid(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|k| k as f64 * dt).collect()
}

#[test]
fn noiseless_cpg_signals_are_recovered_exactly() {
    let worst = checks::sinusoid_exact_error();
    assert!(worst <= 1e-6, "{worst:e}");
}

#[test]
fn amplitude_survives_measurement_noise() {
    let worst = checks::sinusoid_noisy_amplitude_error(100, 0.01);
    assert!(worst < 0.01, "{worst}");
}

#[test]
fn frequency_offsets_inside_the_search_band_are_found() {
    let t = grid(1000, 0.01);
    let w = 2.0 * PI * 0.55;
    let y: Vec<f64> = t.iter().map(|t| 0.7 * (w * t + 1.0).sin()).collect();
    let fit = fit_sinusoid(&t, &y, 0.5).unwrap();
    assert!((fit.omega - w).abs() < 1e-6);
}

#[test]
fn quadrature_signals_are_uncorrelated_over_a_period() {
    let n = 300;
    let window = 100;
    let a: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / window as f64).sin()).collect();
    let b: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / window as f64 + PI / 2.0).sin()).collect();
    let c = sliding_correlation(&a, &b, window).unwrap();
    for (k, v) in c.values.iter().enumerate() {
        // direct summation: Σ sin·cos over a full period vanishes
        let direct: f64 = (k..k + window).map(|i| a[i] * b[i]).sum();
        assert!(direct.abs() < 1e-9);
        assert!(v.abs() < 1e-6, "window {k}: {v}");
    }
}

fn joint_traj(joints: impl Fn(usize, f64) -> f64) -> Trajectory {
    Trajectory {
        sample_period: 0.01,
        joint_count: 3,
        samples: (0..400)
            .map(|k| {
                let t = k as f64 * 0.01;
                TrajectorySample {
                    t,
                    position: [0.0; 3],
                    orientation: [1.0, 0.0, 0.0, 0.0],
                    joints: (0..3).map(|j| joints(j, t)).collect(),
                    references: (0..3).map(|j| (PI * t + j as f64).sin()).collect(),
                }
            })
            .collect(),
    }
}

#[test]
fn joint_summary_orders_min_mean_max() {
    let reference = joint_traj(|j, t| (PI * t + j as f64).sin());
    let exact = joint_correlation_summary(&reference, &reference, 200).unwrap();
    for k in 0..exact.mean.values.len() {
        for s in [&exact.mean, &exact.min, &exact.max] {
            assert!((s.values[k] - 1.0).abs() < 1e-12);
        }
    }
    let broken = joint_traj(|j, t| if j == 1 { 0.0 } else { (PI * t + j as f64).sin() });
    let summary = joint_correlation_summary(&reference, &broken, 200).unwrap();
    for k in 0..summary.mean.values.len() {
        assert!(summary.min.values[k] < summary.mean.values[k]);
        assert!(summary.mean.values[k] <= summary.max.values[k]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refitting_a_fit_does_not_increase_the_residual(
        amp in 0.05f64..1.2,
        f in 0.3f64..0.7,
        phase in -3.0f64..3.0,
        seed in 0u64..1000,
    ) {
        let t = grid(700, 0.01);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut r = rng::stream(seed, &[]);
        let y: Vec<f64> = t.iter().map(|t| amp * (2.0 * PI * f * t + phase).sin() + noise.sample(&mut r)).collect();
        let fit = fit_sinusoid(&t, &y, f).unwrap();
        let rebuilt: Vec<f64> = t.iter().map(|&t| fit.eval(t)).collect();
        let refit = fit_sinusoid(&t, &rebuilt, f).unwrap();
        prop_assert!(refit.residual <= fit.residual + 1e-15);
    }
}
