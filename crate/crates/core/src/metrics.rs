//! Trajectory comparison statistics.
//!
//! Head-position error is measured in the ground plane only. Joint tracking is
//! scored with a trailing-window Pearson correlation against the desired CPG
//! signal, and [`fit_sinusoid`] recovers the amplitude, frequency and phase of
//! an achieved joint signal.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::sim::Trajectory;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right} samples")]
    LengthMismatch { left: usize, right: usize },
    #[error("joint count mismatch: {left} vs {right}")]
    JointMismatch { left: usize, right: usize },
    #[error("window of {window} samples is invalid for {len} samples (need 3 ≤ window ≤ len)")]
    BadWindow { window: usize, len: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub max: f64,
    pub final_value: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                max: f64::NAN,
                final_value: f64::NAN,
            };
        }
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            final_value: values[values.len() - 1],
        }
    }
}

/// A per-sample metric with its summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSeries {
    pub timestamps: Vec<f64>,
    pub values: Vec<f64>,
    pub summary: Summary,
}

impl ErrorSeries {
    pub fn new(timestamps: Vec<f64>, values: Vec<f64>) -> Self {
        let summary = Summary::of(&values);
        Self {
            timestamps,
            values,
            summary,
        }
    }
}

fn check_lengths(a: &Trajectory, b: &Trajectory) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.joint_count != b.joint_count {
        return Err(MetricsError::JointMismatch {
            left: a.joint_count,
            right: b.joint_count,
        });
    }
    Ok(())
}

/// Planar head-position distance at every sample.
pub fn euclidean_error(reference: &Trajectory, candidate: &Trajectory) -> Result<ErrorSeries, MetricsError> {
    check_lengths(reference, candidate)?;
    let values = reference
        .samples
        .iter()
        .zip(&candidate.samples)
        .map(|(r, c)| (r.position[0] - c.position[0]).hypot(r.position[1] - c.position[1]))
        .collect();
    Ok(ErrorSeries::new(reference.times(), values))
}

/// Trailing-window Pearson correlation, one value per sample from index
/// `window - 1` on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationSeries {
    pub start_index: usize,
    pub values: Vec<f64>,
    /// Set where either window had zero variance; the value there is 0.
    pub degenerate: Vec<bool>,
}

impl CorrelationSeries {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

pub fn sliding_correlation(a: &[f64], b: &[f64], window: usize) -> Result<CorrelationSeries, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if window < 3 || window > a.len() {
        return Err(MetricsError::BadWindow { window, len: a.len() });
    }
    let count = a.len() - window + 1;
    let mut values = Vec::with_capacity(count);
    let mut degenerate = Vec::with_capacity(count);
    let n = window as f64;
    for start in 0..count {
        let wa = &a[start..start + window];
        let wb = &b[start..start + window];
        let ma = wa.iter().sum::<f64>() / n;
        let mb = wb.iter().sum::<f64>() / n;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in wa.iter().zip(wb) {
            let (dx, dy) = (x - ma, y - mb);
            sab += dx * dy;
            saa += dx * dx;
            sbb += dy * dy;
        }
        // relative floor so round-off on a constant window is not mistaken for signal
        let scale_a = wa.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
        let scale_b = wb.iter().map(|y| y * y).sum::<f64>().max(f64::MIN_POSITIVE);
        if saa <= 1e-24 * scale_a || sbb <= 1e-24 * scale_b || saa == 0.0 || sbb == 0.0 {
            values.push(0.0);
            degenerate.push(true);
        } else {
            values.push((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0));
            degenerate.push(false);
        }
    }
    Ok(CorrelationSeries {
        start_index: window - 1,
        values,
        degenerate,
    })
}

/// Per-joint correlation of candidate joint angles with the desired signal,
/// plus the pointwise mean, min and max across joints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointCorrelationSummary {
    pub per_joint: Vec<ErrorSeries>,
    pub mean: ErrorSeries,
    pub min: ErrorSeries,
    pub max: ErrorSeries,
}

impl JointCorrelationSummary {
    /// Time average of the mean-across-joints curve.
    pub fn mean_correlation(&self) -> f64 {
        self.mean.summary.mean
    }
}

/// Correlates each candidate joint with the desired CPG signal recorded in
/// `reference`.
pub fn joint_correlation_summary(
    reference: &Trajectory,
    candidate: &Trajectory,
    window: usize,
) -> Result<JointCorrelationSummary, MetricsError> {
    check_lengths(reference, candidate)?;
    let times = reference.times();
    let mut per_joint = Vec::with_capacity(reference.joint_count);
    for j in 0..reference.joint_count {
        let c = sliding_correlation(&candidate.joint_series(j), &reference.reference_series(j), window)?;
        per_joint.push(ErrorSeries::new(times[c.start_index..].to_vec(), c.values));
    }
    if per_joint.is_empty() {
        return Err(MetricsError::InsufficientData("no joints".into()));
    }
    let stamps = per_joint[0].timestamps.clone();
    let len = stamps.len();
    let pointwise = |f: &dyn Fn(&[f64]) -> f64| {
        let values = (0..len)
            .map(|k| {
                let column: Vec<f64> = per_joint.iter().map(|s| s.values[k]).collect();
                f(&column)
            })
            .collect();
        ErrorSeries::new(stamps.clone(), values)
    };
    let mean = pointwise(&|c| c.iter().sum::<f64>() / c.len() as f64);
    let min = pointwise(&|c| c.iter().copied().fold(f64::INFINITY, f64::min));
    let max = pointwise(&|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    Ok(JointCorrelationSummary {
        per_joint,
        mean,
        min,
        max,
    })
}

/// Fitted `y = A·sin(ωt + φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinusoidFit {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    /// Mean squared residual.
    pub residual: f64,
    /// Amplitude below [`FLAT_AMPLITUDE`]; phase and frequency are meaningless.
    pub degenerate: bool,
}

impl SinusoidFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (self.omega * t + self.phase).sin()
    }
}

pub const FLAT_AMPLITUDE: f64 = 1e-6;

/// Relative half-width of the frequency search around the initial guess.
pub const FREQUENCY_SEARCH_SPAN: f64 = 0.2;

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Least-squares `(a, b)` for `y ≈ a·sin(ωt) + b·cos(ωt)` and its mean squared residual.
fn linear_fit(t: &[f64], y: &[f64], omega: f64) -> (f64, f64, f64) {
    let (mut ss, mut cc, mut sc, mut ys, mut yc, mut yy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let (s, c) = (omega * ti).sin_cos();
        ss += s * s;
        cc += c * c;
        sc += s * c;
        ys += yi * s;
        yc += yi * c;
        yy += yi * yi;
    }
    let det = ss * cc - sc * sc;
    if det.abs() <= 1e-12 * (ss * cc).max(f64::MIN_POSITIVE) {
        return (0.0, 0.0, yy / t.len() as f64);
    }
    let a = (ys * cc - yc * sc) / det;
    let b = (yc * ss - ys * sc) / det;
    // expanded form of Σ(y - a·s - b·c)², clamped against round-off
    let residual = yy - 2.0 * (a * ys + b * yc) + a * a * ss + 2.0 * a * b * sc + b * b * cc;
    (a, b, residual.max(0.0) / t.len() as f64)
}

/// Nonlinear least-squares sinusoid fit with the frequency searched within
/// ±20% of `f_init_hz`: a coarse grid scan followed by golden-section
/// refinement, with amplitude and phase solved linearly at each frequency.
pub fn fit_sinusoid(t: &[f64], y: &[f64], f_init_hz: f64) -> Result<SinusoidFit, MetricsError> {
    if t.len() != y.len() {
        return Err(MetricsError::LengthMismatch {
            left: t.len(),
            right: y.len(),
        });
    }
    if !(f_init_hz > 0.0 && f_init_hz.is_finite()) {
        return Err(MetricsError::InsufficientData(format!(
            "initial frequency {f_init_hz} Hz is not positive"
        )));
    }
    let span = match (t.first(), t.last()) {
        (Some(a), Some(b)) if t.len() >= 8 => b - a,
        _ => return Err(MetricsError::InsufficientData(format!("{} samples", t.len()))),
    };
    if span * f_init_hz < 2.0 - 1e-9 {
        return Err(MetricsError::InsufficientData(format!(
            "{span:.3} s covers fewer than two periods at {f_init_hz} Hz"
        )));
    }
    let w0 = 2.0 * PI * f_init_hz;
    let (lo, hi) = (w0 * (1.0 - FREQUENCY_SEARCH_SPAN), w0 * (1.0 + FREQUENCY_SEARCH_SPAN));
    let cost = |w: f64| linear_fit(t, y, w).2;

    const GRID: usize = 48;
    let step = (hi - lo) / GRID as f64;
    let (mut best_k, mut best_cost) = (0, f64::INFINITY);
    for k in 0..=GRID {
        let c = cost(lo + step * k as f64);
        if c < best_cost {
            best_cost = c;
            best_k = k;
        }
    }
    let mut a = (lo + step * best_k as f64 - step).max(lo);
    let mut b = (lo + step * best_k as f64 + step).min(hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    while b - a > 1e-12 * w0 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = cost(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = cost(x2);
        }
    }
    let mut omega = 0.5 * (a + b);
    if best_cost < cost(omega) {
        omega = lo + step * best_k as f64;
    }
    let (ca, cb, residual) = linear_fit(t, y, omega);
    let amplitude = ca.hypot(cb);
    Ok(SinusoidFit {
        amplitude,
        omega,
        phase: wrap_angle(cb.atan2(ca)),
        residual,
        degenerate: amplitude < FLAT_AMPLITUDE,
    })
}
