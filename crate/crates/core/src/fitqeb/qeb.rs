//! Quantum error bars `(f0, Δ, γ)` from the parameters of the log-model
//! `ln μ = −a₂x² − a₁x + m ln x + c`, with `x = s·(f − h)`.

use serde::Serialize;

use crate::error::{QebError, Result};
use crate::figures::ModelVars;
use crate::scalar::Real;

/// Parameters of `y(x) = −a₂x² − a₁x + m ln x + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct LogModel<S> {
    pub a2: S,
    pub a1: S,
    pub m: S,
    pub c: S,
}

impl<S: Real> LogModel<S> {
    pub fn new(a2: S, a1: S, m: S, c: S) -> Self {
        LogModel { a2, a1, m, c }
    }

    /// `y(x)`; `−∞` for `x ≤ 0` when `m > 0`.
    pub fn eval(&self, x: S) -> S {
        let log_term = if self.m == S::zero() {
            S::zero()
        } else if x > S::zero() {
            self.m * x.ln()
        } else {
            -S::infinity()
        };
        -self.a2 * x * x - self.a1 * x + log_term + self.c
    }

    /// Positive stationary point of `y`.
    pub fn peak(&self) -> Result<S> {
        let (a2, a1, m) = (self.a2, self.a1, self.m);
        let two = S::of(2.0);
        if a2 <= S::zero() {
            return Err(QebError::InvalidFitParams(format!(
                "a₂ = {a2} must be positive"
            )));
        }
        if m < S::zero() {
            return Err(QebError::InvalidFitParams(format!(
                "m = {m} must be non-negative"
            )));
        }
        let disc = a1 * a1 + S::of(8.0) * a2 * m;
        if disc < S::zero() {
            return Err(QebError::InvalidFitParams(format!(
                "a₁² + 8a₂m = {disc} is negative"
            )));
        }
        // the cancelling form loses digits when m ≪ a₁²/a₂ and a₁ > 0
        let x0 = if a1 > S::zero() {
            two * m / (a1 + disc.sqrt())
        } else {
            (-a1 + disc.sqrt()) / (two * two * a2)
        };
        if !(x0 > S::zero()) {
            return Err(QebError::InvalidFitParams(format!(
                "peak position x₀ = {x0} is not positive"
            )));
        }
        Ok(x0)
    }
}

/// Peak position, width and skew of the fitted distribution of `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantumErrorBars<S> {
    /// Peak position in units of `f`.
    pub f0: S,
    /// Half width at relative height `1/e`.
    pub delta: S,
    /// Skewing factor: to first order in `m`, the shift of the curve's
    /// intercepts at relative height `e^{−ξ}` is `ξγ`.
    pub gamma: S,
    /// `y(x₀)`, the log-density at the peak.
    pub y0: S,
    /// Peak position in the model variable.
    pub x0: S,
}

/// `x₀ = (−a₁ + √(a₁² + 8a₂m))/(4a₂)`, `f0 = h + s·x₀`,
/// `Δ = (a₂ + m/(2x₀²))^{−1/2}`, `γ = mΔ⁴/(6x₀³)`.
pub fn quantum_error_bars<S: Real>(
    model: &LogModel<S>,
    vars: ModelVars,
) -> Result<QuantumErrorBars<S>> {
    let x0 = model.peak()?;
    let two = S::of(2.0);
    let delta = S::one() / (model.a2 + model.m / (two * x0 * x0)).sqrt();
    let d2 = delta * delta;
    let gamma = model.m * d2 * d2 / (S::of(6.0) * x0 * x0 * x0);
    Ok(QuantumErrorBars {
        f0: S::of(vars.h) + S::of(vars.s) * x0,
        delta,
        gamma,
        y0: model.eval(x0),
        x0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vars(h: f64, s: f64) -> ModelVars {
        ModelVars::new(h, s).unwrap()
    }

    #[test]
    fn reference_parameter_sets() {
        let a = quantum_error_bars(
            &LogModel::<f64>::new(722.8, 319.6, 14.09, 0.0),
            vars(0.0, 1.0),
        )
        .unwrap();
        assert!((a.f0 - 0.0377).abs() < 0.5e-4, "{}", a.f0);
        assert!((a.delta - 0.013).abs() < 0.5e-3);
        assert!((a.gamma - 0.0014).abs() < 0.5e-4);

        let b = quantum_error_bars(
            &LogModel::<f64>::new(8511.0, -476.8, 42.53, 0.0),
            vars(1.0, -1.0),
        )
        .unwrap();
        assert!((b.f0 - 0.934).abs() < 0.5e-3);
        assert!((b.delta - 0.0086).abs() < 0.5e-4);
        assert!((b.gamma - 1.4e-4).abs() < 0.5e-5);
    }

    #[test]
    fn gaussian_limit() {
        let q = quantum_error_bars(
            &LogModel::<f64>::new(100.0, -20.0, 0.0, 0.0),
            vars(0.0, 1.0),
        )
        .unwrap();
        assert!((q.x0 - 0.1).abs() < 1e-15);
        assert!((q.delta - 0.1).abs() < 1e-15);
        assert_eq!(q.gamma, 0.0);
    }

    #[test]
    fn invalid_parameters() {
        // a₁² + 8a₂m < 0 needs a₂m < 0; m ≥ 0 is enforced first
        assert!(quantum_error_bars(&LogModel::new(1.0, 1.0, -1.0, 0.0), vars(0.0, 1.0)).is_err());
        // Gaussian centered at negative x
        assert!(quantum_error_bars(&LogModel::new(1.0, 1.0, 0.0, 0.0), vars(0.0, 1.0)).is_err());
        assert!(quantum_error_bars(&LogModel::new(-1.0, 1.0, 1.0, 0.0), vars(0.0, 1.0)).is_err());
    }

    #[test]
    fn f32_matches_f64() {
        let q = quantum_error_bars(
            &LogModel::<f32>::new(722.8, 319.6, 14.09, 0.0),
            vars(0.0, 1.0),
        )
        .unwrap();
        assert!((q.f0 - 0.0376684).abs() < 1e-5);
    }

    /// Root of the stationarity condition `−2a₂x − a₁ + m/x = 0` by bisection.
    fn stationary_point(a2: f64, a1: f64, m: f64) -> f64 {
        let g = |x: f64| -2.0 * a2 * x - a1 + m / x;
        let (mut lo, mut hi) = (1e-300, 1.0);
        while g(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn peak_solves_stationarity(a2 in 1.0f64..1e4, a1 in -500.0f64..500.0, m in 0.01f64..60.0) {
            let q = quantum_error_bars(&LogModel::new(a2, a1, m, 0.0), vars(0.0, 1.0)).unwrap();
            let root = stationary_point(a2, a1, m);
            prop_assert!((q.x0 - root).abs() <= 1e-10 * root.max(1e-300) + 1e-15, "{} vs {}", q.x0, root);
        }
    }

    #[test]
    fn first_order_skew_shift() {
        // with m small, the midpoint of the intercepts at height e^{−ξ} moves
        // from x₀ by ξγ to first order
        let (a2, x_gauss) = (400.0f64, 0.2f64);
        let m = 1e-3 * a2 * x_gauss * x_gauss;
        let a1 = m / x_gauss - 2.0 * a2 * x_gauss;
        let model = LogModel::new(a2, a1, m, 0.0);
        let q = quantum_error_bars(&model, vars(0.0, 1.0)).unwrap();
        let xi = 1.0;
        let level = q.y0 - xi;
        let solve = |mut lo: f64, mut hi: f64| {
            // y − level changes sign on [lo, hi]
            let sign_lo = model.eval(lo) > level;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (model.eval(mid) > level) == sign_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let left = solve(1e-9, q.x0);
        let right = solve(q.x0, 10.0);
        let shift = 0.5 * (left + right) - q.x0;
        assert!(
            (shift / (xi * q.gamma) - 1.0).abs() < 0.05,
            "shift {shift} vs γ {}",
            q.gamma
        );
    }
}
