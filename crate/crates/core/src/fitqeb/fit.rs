//! Weighted fit of the log-model to a figure-of-merit histogram.

use log::{debug, warn};
use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::qeb::{quantum_error_bars, LogModel, QuantumErrorBars};
use crate::error::{QebError, Result};
use crate::figures::ModelVars;
use crate::histstats::FomHistogram;

/// Bins whose relative error exceeds this are left out of the fit.
pub const MAX_RELATIVE_ERROR: f64 = 1.0;
pub const MIN_FIT_POINTS: usize = 6;
const MAX_ITERATIONS: usize = 500;

type Covariance = [[f64; 4]; 4];
type Bounds = [(f64, f64); 4];

/// A histogram bin prepared for fitting: `y = ln μ` with error `σ = Δμ/μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitPoint {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
}

/// Fitted log-model with its uncertainty summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub model: LogModel<f64>,
    pub vars: ModelVars,
    /// Covariance of `(a₂, a₁, m, c)`, scaled by the reduced chi-square.
    pub covariance: [[f64; 4]; 4],
    /// 95% bounds of `(a₂, a₁, m, c)`.
    pub bounds95: [(f64, f64); 4],
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub points_used: usize,
    pub iterations: usize,
}

impl FitParams {
    pub fn error_bars(&self) -> Result<QuantumErrorBars<f64>> {
        quantum_error_bars(&self.model, self.vars)
    }
}

/// Usable bins in the model variable `x = s(f − h)`. Empty bins and bins with
/// relative error above [`MAX_RELATIVE_ERROR`] are dropped; a zero error is
/// replaced by the smallest positive error present (or 1 if there is none).
pub fn fit_points(hist: &FomHistogram, vars: ModelVars) -> Result<Vec<FitPoint>> {
    let mut pts = Vec::new();
    for i in 0..hist.spec.num_bins {
        let d = hist.density[i];
        if !(d > 0.0) {
            continue;
        }
        let rel = hist.error[i] / d;
        if !(rel <= MAX_RELATIVE_ERROR) {
            continue;
        }
        let x = vars.x_of(hist.spec.bin_center(i));
        if !(x > 0.0) {
            return Err(QebError::FitFailed(format!(
                "bin {i} at f = {} maps to x = {x} ≤ 0; the histogram range crosses h = {}",
                hist.spec.bin_center(i),
                vars.h
            )));
        }
        pts.push(FitPoint {
            x,
            y: d.ln(),
            sigma: rel,
        });
    }
    if pts.len() < MIN_FIT_POINTS {
        return Err(QebError::FitFailed(format!(
            "only {} usable bins, need at least {MIN_FIT_POINTS}",
            pts.len()
        )));
    }
    let floor = pts
        .iter()
        .map(|p| p.sigma)
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 1.0 };
    for p in pts.iter_mut() {
        if p.sigma <= 0.0 {
            p.sigma = floor;
        }
    }
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(pts)
}

/// Fits `ln μ(x) = −a₂x² − a₁x + m ln x + c` to the histogram.
pub fn fit_log_model(hist: &FomHistogram, vars: ModelVars) -> Result<FitParams> {
    let pts = fit_points(hist, vars)?;
    fit_points_lm(&pts, vars)
}

/// Levenberg-Marquardt on `(a₂, a₁, u, c)` with `m = u²`.
pub fn fit_points_lm(pts: &[FitPoint], vars: ModelVars) -> Result<FitParams> {
    let mut p = initial_guess(pts);
    debug!("fit initial guess {p:?}");
    let mut chi2 = chi_square(pts, &p);
    let mut mu = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal_equations(pts, &p);
        let mut accepted = false;
        for _ in 0..60 {
            let mut damped = jtj;
            for k in 0..4 {
                damped[(k, k)] += mu * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                mu *= 10.0;
                continue;
            };
            let trial = p + step;
            let c2 = chi_square(pts, &trial);
            if c2.is_finite() && c2 <= chi2 {
                let rel_step = step.component_div(&p.map(|v| v.abs().max(1e-12))).amax();
                let drop = chi2 - c2;
                p = trial;
                chi2 = c2;
                mu = (mu * 0.3).max(1e-15);
                accepted = true;
                if drop <= 1e-14 * chi2.max(1e-300) || rel_step < 1e-13 {
                    converged = true;
                }
                break;
            }
            mu *= 10.0;
        }
        if !accepted || converged {
            // no downhill step at any damping: p is a local minimum
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(QebError::FitFailed(format!(
            "no convergence after {MAX_ITERATIONS} iterations"
        )));
    }

    let model = LogModel::new(p[0], p[1], p[2] * p[2], p[3]);
    let n = pts.len();
    let dof = n.saturating_sub(4).max(1);
    let reduced_chi2 = chi2 / dof as f64;
    let (covariance, bounds95) = uncertainty(pts, &model, reduced_chi2, dof)?;
    Ok(FitParams {
        model,
        vars,
        covariance,
        bounds95,
        chi2,
        reduced_chi2,
        points_used: n,
        iterations,
    })
}

fn model_at(p: &Vector4<f64>, x: f64) -> f64 {
    -p[0] * x * x - p[1] * x + p[2] * p[2] * x.ln() + p[3]
}

fn chi_square(pts: &[FitPoint], p: &Vector4<f64>) -> f64 {
    pts.iter()
        .map(|q| {
            let r = (q.y - model_at(p, q.x)) / q.sigma;
            r * r
        })
        .sum()
}

/// `JᵀJ` and `Jᵀr` of the weighted residuals in `(a₂, a₁, u, c)`.
fn normal_equations(pts: &[FitPoint], p: &Vector4<f64>) -> (Matrix4<f64>, Vector4<f64>) {
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for q in pts {
        let w = 1.0 / q.sigma;
        let g = Vector4::new(-q.x * q.x, -q.x, 2.0 * p[2] * q.x.ln(), 1.0) * w;
        let r = (q.y - model_at(p, q.x)) * w;
        jtj += g * g.transpose();
        jtr += g * r;
    }
    (jtj, jtr)
}

/// Linear-model design row `∂y/∂(a₂, a₁, m, c)`.
fn design_row(x: f64) -> Vector4<f64> {
    Vector4::new(-x * x, -x, x.ln(), 1.0)
}

fn uncertainty(
    pts: &[FitPoint],
    model: &LogModel<f64>,
    reduced_chi2: f64,
    dof: usize,
) -> Result<(Covariance, Bounds)> {
    let mut info = Matrix4::zeros();
    for q in pts {
        let g = design_row(q.x) / q.sigma;
        info += g * g.transpose();
    }
    let cov = info.try_inverse().ok_or_else(|| {
        QebError::FitFailed("parameters are not identifiable from the usable bins".into())
    })? * reduced_chi2;
    let t = StudentsT::new(0.0, 1.0, dof as f64)
        .map_err(|e| QebError::FitFailed(format!("Student t distribution: {e}")))?
        .inverse_cdf(0.975);
    let values = [model.a2, model.a1, model.m, model.c];
    let mut covariance = [[0.0; 4]; 4];
    let mut bounds = [(0.0, 0.0); 4];
    for i in 0..4 {
        for j in 0..4 {
            covariance[i][j] = cov[(i, j)];
        }
        let half = t * cov[(i, i)].max(0.0).sqrt();
        bounds[i] = (values[i] - half, values[i] + half);
    }
    Ok((covariance, bounds))
}

/// Starting point from the histogram's shape: peak position `x₀`, half width
/// `Δ` at relative height `1/e` and the offset `γ` of the `1/e` midpoint,
/// inverted through the error-bar formulas.
fn initial_guess(pts: &[FitPoint]) -> Vector4<f64> {
    let (ip, peak) =
        pts.iter().enumerate().fold(
            (0, &pts[0]),
            |best, (i, q)| if q.y > best.1.y { (i, q) } else { best },
        );
    let x0 = peak.x;
    let level = peak.y - 1.0;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = &pts[ip];
        for i in range {
            let q = &pts[i];
            if q.y <= level {
                let t = (prev.y - level) / (prev.y - q.y);
                return Some(prev.x + t * (q.x - prev.x));
            }
            prev = q;
        }
        None
    };
    let span = pts[pts.len() - 1].x - pts[0].x;
    let right = crossing(&mut (ip + 1..pts.len())).unwrap_or(x0 + span / 4.0);
    let left = crossing(&mut (0..ip).rev()).unwrap_or((x0 - span / 4.0).max(0.5 * x0));
    let delta = (0.5 * (right - left)).max(1e-12);
    let gamma = (0.5 * (left + right) - x0).max(0.0);

    let mut m = 6.0 * gamma * x0.powi(3) / delta.powi(4);
    let mut a2 = 1.0 / (delta * delta) - m / (2.0 * x0 * x0);
    if !(a2 > 0.0) || !m.is_finite() {
        m = 0.0;
        a2 = 1.0 / (delta * delta);
    }
    // keep u away from 0, where ∂/∂u vanishes
    m = m.max(0.5);
    let a1 = m / x0 - 2.0 * a2 * x0;
    let c = peak.y - (-a2 * x0 * x0 - a1 * x0 + m * x0.ln());
    let init = Vector4::new(a2, a1, m.sqrt(), c);
    if init.iter().all(|v| v.is_finite()) {
        init
    } else {
        warn!("histogram shape gave no usable starting point; starting from a unit Gaussian");
        Vector4::new(1.0, 0.0, 1.0, peak.y)
    }
}

/// Unconstrained weighted linear least squares in `(a₂, a₁, m, c)`; the
/// constrained fit agrees with it whenever its `m` is non-negative.
pub fn linear_least_squares(pts: &[FitPoint]) -> Option<LogModel<f64>> {
    let mut info = Matrix4::zeros();
    let mut rhs = Vector4::zeros();
    for q in pts {
        let g = design_row(q.x) / q.sigma;
        info += g * g.transpose();
        rhs += g * (q.y / q.sigma);
    }
    let p = info.lu().solve(&rhs)?;
    Some(LogModel::new(p[0], p[1], p[2], p[3]))
}
