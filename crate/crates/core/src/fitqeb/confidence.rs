//! One-sided confidence regions `{x ≤ x*}` in the model variable, with the
//! tail weight `ε/poly(n)` beyond the threshold and a user-supplied
//! enlargement `δ`.

use serde::Serialize;

use super::fit::FitParams;
use super::qeb::LogModel;
use crate::error::{QebError, Result};
use crate::figures::{FomClass, ModelVars};
use crate::histstats::{FomHistogram, TailSide};

/// `ln poly(n) = ln 2 + (d² − 1)/2 · ln n`.
pub fn ln_poly_n(n: u64, d: usize) -> f64 {
    let n = n.max(1) as f64;
    let d = d as f64;
    std::f64::consts::LN_2 + 0.5 * (d * d - 1.0) * n.ln()
}

/// `poly(n) = 2 n^{(d²−1)/2}`; `+∞` when it overflows, see [`ln_poly_n`].
pub fn poly_n(n: u64, d: usize) -> f64 {
    ln_poly_n(n, d).exp()
}

/// Where the tail weight is computed from.
#[derive(Debug, Clone, Copy)]
pub enum ConfidenceSource<'a> {
    /// The fitted model, integrated numerically.
    Model(&'a FitParams),
    /// The raw histogram, integrated bin by bin.
    Histogram(&'a FomHistogram),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInput {
    pub epsilon: f64,
    /// Total number of measurement outcomes `n`.
    pub n: u64,
    pub dim: usize,
    /// Enlargement `δ ≥ 0`.
    pub delta: f64,
    /// Range width `w` of an observable; required for observables.
    pub w: Option<f64>,
    /// Upper end of the model-variable range; defaults to 1, or `w` for observables.
    pub x_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceReport {
    pub epsilon: f64,
    pub n: u64,
    pub dim: usize,
    pub ln_poly_n: f64,
    pub poly_n: f64,
    /// `ε/poly(n)`, possibly 0 after underflow; see `ln_epsilon_reduced`.
    pub epsilon_reduced: f64,
    pub ln_epsilon_reduced: f64,
    pub source: &'static str,
    /// Threshold in the model variable before enlargement.
    pub x_star: f64,
    pub f_star: f64,
    pub delta_enlargement: f64,
    /// Threshold after shifting by `wδ` in the enlarging direction.
    pub f_reported: f64,
    pub region_lo: f64,
    pub region_hi: f64,
    pub region: String,
}

/// Sign `s` of the region for classes without fit variables.
fn region_vars(class: &FomClass) -> Result<ModelVars> {
    match class {
        FomClass::Fidelity2Mixed => Ok(ModelVars { h: 1.0, s: -1.0 }),
        other => other.model_variables(),
    }
}

/// Computes the confidence threshold and the enlarged region.
pub fn confidence_threshold(
    source: ConfidenceSource<'_>,
    class: FomClass,
    input: &ConfidenceInput,
) -> Result<ConfidenceReport> {
    let ConfidenceInput {
        epsilon,
        n,
        dim,
        delta,
        w,
        x_max,
    } = *input;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(QebError::InvalidConfig(format!(
            "ε must lie in (0, 1), got {epsilon}"
        )));
    }
    if !(delta >= 0.0) {
        return Err(QebError::InvalidConfig(format!(
            "δ must be ≥ 0, got {delta}"
        )));
    }
    if dim < 2 || n == 0 {
        return Err(QebError::InvalidConfig("need n ≥ 1 and d ≥ 2".into()));
    }
    let is_observable = matches!(class, FomClass::Observable { .. });
    let w_factor = match (is_observable, w) {
        (true, Some(w)) if w > 0.0 => w,
        (true, _) => {
            return Err(QebError::InvalidConfig(
                "observable regions need the range width w of the observable".into(),
            ))
        }
        (false, _) => 1.0,
    };
    let lnp = ln_poly_n(n, dim);
    let ln_target = epsilon.ln() - lnp;

    let (vars, x_star, source_name) = match source {
        ConfidenceSource::Model(fit) => {
            let vars = fit.vars;
            let expected = region_vars(&class)?;
            if expected != vars {
                return Err(QebError::InvalidConfig(format!(
                    "fit was made with (h, s) = ({}, {}), the figure needs ({}, {})",
                    vars.h, vars.s, expected.h, expected.s
                )));
            }
            let x_hi = x_max.unwrap_or(if is_observable { w_factor } else { 1.0 });
            (vars, model_threshold(&fit.model, x_hi, ln_target)?, "model")
        }
        ConfidenceSource::Histogram(hist) => {
            let vars = region_vars(&class)?;
            (
                vars,
                histogram_threshold(hist, vars, ln_target)?,
                "histogram",
            )
        }
    };

    let f_star = vars.f_of(x_star);
    let f_reported = vars.f_of(x_star + w_factor * delta);
    let (nat_lo, nat_hi) = class.natural_range();
    let (region_lo, region_hi) = if vars.s < 0.0 {
        (f_reported.max(nat_lo), vars.h.min(nat_hi))
    } else {
        (vars.h.max(nat_lo), f_reported.min(nat_hi))
    };
    let region = format!(
        "{} ∈ [{}, {}]",
        class.label(),
        fmt4(region_lo),
        fmt4(region_hi)
    );
    Ok(ConfidenceReport {
        epsilon,
        n,
        dim,
        ln_poly_n: lnp,
        poly_n: lnp.exp(),
        epsilon_reduced: ln_target.exp(),
        ln_epsilon_reduced: ln_target,
        source: source_name,
        x_star,
        f_star,
        delta_enlargement: delta,
        f_reported,
        region_lo,
        region_hi,
        region,
    })
}

fn fmt4(v: f64) -> String {
    format!("{:.4}", v)
}

/// `ln ∫_a^b exp(y(x) − y_ref) dx` for a model unimodal on `(0, ∞)`.
fn ln_integral(model: &LogModel<f64>, a: f64, b: f64, y_ref: f64) -> f64 {
    if b <= a {
        return f64::NEG_INFINITY;
    }
    let g = |x: f64| {
        let v = model.eval(x) - y_ref;
        if v.is_finite() {
            v.exp()
        } else {
            0.0
        }
    };
    let val = adaptive_simpson(&g, a, b, 1e-12, 40);
    val.ln()
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    // split into panels first so that narrow peaks are not missed, then refine
    // each panel to a share of the tolerance relative to the crude total
    let panels = 64;
    let h = (b - a) / panels as f64;
    let coarse: Vec<_> = (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = lo + h;
            let (flo, fmid, fhi) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            (lo, hi, flo, fmid, fhi, h / 6.0 * (flo + 4.0 * fmid + fhi))
        })
        .collect();
    let total: f64 = coarse.iter().map(|c| c.5).sum();
    let abs_tol = tol * total.max(1e-300) / panels as f64;
    coarse
        .into_iter()
        .map(|(lo, hi, flo, fmid, fhi, whole)| {
            simpson_rec(f, lo, hi, flo, fmid, fhi, whole, abs_tol, depth)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (flm, frm) = (f(0.5 * (a + m)), f(0.5 * (m + b)));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        left + right + diff / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Solves `ln(∫_{x*}^{x_max} μ / ∫_0^{x_max} μ) = ln_target` by bisection.
fn model_threshold(model: &LogModel<f64>, x_max: f64, ln_target: f64) -> Result<f64> {
    let x0 = model.peak()?;
    if !(x_max > 0.0) {
        return Err(QebError::InvalidConfig(format!(
            "x range upper end must be positive, got {x_max}"
        )));
    }
    let y0 = model.eval(x0);
    let ln_total = ln_integral(model, 0.0, x_max, y0);
    if !ln_total.is_finite() {
        return Err(QebError::Saturated {
            edge: "the fitted model has no weight inside the figure's range".into(),
        });
    }
    // ln of the tail weight beyond x, scaled at the tail's own maximum
    let ln_tail = |x: f64| {
        let y_ref = if x < x0 { y0 } else { model.eval(x) };
        y_ref - y0 + ln_integral(model, x, x_max, y_ref) - ln_total
    };
    if ln_target >= 0.0 {
        return Err(QebError::Saturated {
            edge: "ε/poly(n) ≥ 1: the region is empty".into(),
        });
    }
    let (mut lo, mut hi) = (0.0, x_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ln_tail(mid) > ln_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1e-300) {
            break;
        }
    }
    let x_star = 0.5 * (lo + hi);
    if x_max - x_star <= 1e-12 * x_max {
        return Err(QebError::Saturated {
            edge: "threshold reached the end of the figure's range".into(),
        });
    }
    Ok(x_star)
}

/// Threshold from the raw histogram. Saturates when the required tail is
/// lighter than the outermost populated bin, i.e. below the histogram's
/// resolution.
fn histogram_threshold(hist: &FomHistogram, vars: ModelVars, ln_target: f64) -> Result<f64> {
    let spec = &hist.spec;
    let w = spec.bin_width();
    // the tail lies at large x: f < f* for s = −1, f > f* for s = +1
    let side = if vars.s < 0.0 {
        TailSide::AtMost
    } else {
        TailSide::AtLeast
    };
    let outer_bin = if vars.s < 0.0 {
        hist.density.iter().position(|&d| d > 0.0)
    } else {
        hist.density.iter().rposition(|&d| d > 0.0)
    }
    .ok_or_else(|| QebError::Histogram("histogram is empty".into()))?;
    let outer_mass = hist.density[outer_bin] * w / hist.total_mass();
    if ln_target < outer_mass.ln() {
        let edge = if vars.s < 0.0 { spec.f_min } else { spec.f_max };
        return Err(QebError::Saturated {
            edge: format!(
                "required tail weight e^{ln_target:.1} lies below the resolution of the histogram at f = {edge}"
            ),
        });
    }
    let target = ln_target.exp() * hist.total_mass();
    let (mut lo, mut hi) = (spec.f_min, spec.f_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let t = hist.tail_weight(mid, side);
        // AtMost grows with f, AtLeast shrinks
        let move_up = match side {
            TailSide::AtMost => t < target,
            TailSide::AtLeast => t > target,
        };
        if move_up {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(vars.x_of(0.5 * (lo + hi)))
}
