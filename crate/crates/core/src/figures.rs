//! Figures of merit `f(ρ)` and the `(h, s)` pair mapping each one onto the
//! variable `x = s·(f − h)` of the skewed-Gaussian model.

use log::warn;

use crate::error::{QebError, Result};
use crate::scalar::{
    hermitian_eigenvalues, hermiticity_defect, psd_sqrt, trace_product_hermitian, CMatrix, Real,
};
use crate::statespace::{DensityMatrix, PureState};

/// Whether the observable's supplied extremum is a maximum or a minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FomKind<S: Real> {
    /// `⟨ψ|ρ|ψ⟩`.
    Fidelity2ToPure(PureState<S>),
    /// `F²(ρ, σ)` for a mixed `σ`; histogram-only, the fit model does not apply.
    Fidelity2ToMixed {
        reference: DensityMatrix<S>,
        sqrt_ref: CMatrix<S>,
    },
    /// `½‖ρ − σ‖₁`.
    TraceDistance(DensityMatrix<S>),
    /// `√(1 − F²(ρ, σ))`.
    PurifiedDistance {
        reference: DensityMatrix<S>,
        sqrt_ref: CMatrix<S>,
    },
    /// `tr(Aρ)` with a user-supplied extremum `a`.
    Observable {
        operator: CMatrix<S>,
        extremum: Option<S>,
        direction: Extremum,
    },
}

/// Scalar-free description of a figure of merit: enough to pick the fit
/// model and the confidence-region rule without the reference objects.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FomClass {
    Fidelity2,
    Fidelity2Mixed,
    TraceDistance,
    PurifiedDistance,
    Observable {
        extremum: Option<f64>,
        direction: Extremum,
    },
}

/// `(h, s)` with `x = s·(f − h)` and `f = h + s·x`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelVars {
    pub h: f64,
    pub s: f64,
}

impl ModelVars {
    pub fn new(h: f64, s: f64) -> Result<Self> {
        if s != 1.0 && s != -1.0 {
            return Err(QebError::FigureOfMerit(format!(
                "sign s must be ±1, got {s}"
            )));
        }
        Ok(ModelVars { h, s })
    }

    pub fn x_of(&self, f: f64) -> f64 {
        self.s * (f - self.h)
    }

    pub fn f_of(&self, x: f64) -> f64 {
        self.h + self.s * x
    }
}

impl FomClass {
    /// The `(h, s)` pair selecting the fit-model variant.
    pub fn model_variables(&self) -> Result<ModelVars> {
        match *self {
            FomClass::Fidelity2 => Ok(ModelVars { h: 1.0, s: -1.0 }),
            FomClass::TraceDistance | FomClass::PurifiedDistance => {
                Ok(ModelVars { h: 0.0, s: 1.0 })
            }
            FomClass::Observable {
                extremum: Some(a),
                direction,
            } => Ok(ModelVars {
                h: a,
                s: match direction {
                    Extremum::Max => -1.0,
                    Extremum::Min => 1.0,
                },
            }),
            FomClass::Observable { extremum: None, .. } => Err(QebError::FigureOfMerit(
                "observable figure of merit needs its extremal value a".into(),
            )),
            FomClass::Fidelity2Mixed => Err(QebError::FigureOfMerit(
                "fidelity to a mixed reference state has no fit model".into(),
            )),
        }
    }

    /// Range of values the figure of merit can take, when known a priori.
    pub fn natural_range(&self) -> (f64, f64) {
        match *self {
            FomClass::Fidelity2
            | FomClass::Fidelity2Mixed
            | FomClass::TraceDistance
            | FomClass::PurifiedDistance => (0.0, 1.0),
            FomClass::Observable {
                extremum,
                direction,
            } => match (extremum, direction) {
                (Some(a), Extremum::Max) => (f64::NEG_INFINITY, a),
                (Some(a), Extremum::Min) => (a, f64::INFINITY),
                (None, _) => (f64::NEG_INFINITY, f64::INFINITY),
            },
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FomClass::Fidelity2 => "fidelity²",
            FomClass::Fidelity2Mixed => "fidelity² (mixed reference)",
            FomClass::TraceDistance => "trace distance",
            FomClass::PurifiedDistance => "purified distance",
            FomClass::Observable { .. } => "⟨A⟩",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOfMerit<S: Real> {
    kind: FomKind<S>,
}

impl<S: Real> FigureOfMerit<S> {
    pub fn fidelity2_to_pure(psi: PureState<S>) -> Self {
        FigureOfMerit {
            kind: FomKind::Fidelity2ToPure(psi),
        }
    }

    /// Fidelity to a mixed state; usable for histograms only.
    pub fn fidelity2_to_mixed(reference: DensityMatrix<S>) -> Self {
        warn!("fidelity to a mixed reference state does not follow the fit model; histogram only");
        let sqrt_ref = psd_sqrt(reference.matrix());
        FigureOfMerit {
            kind: FomKind::Fidelity2ToMixed {
                reference,
                sqrt_ref,
            },
        }
    }

    pub fn trace_distance_to(reference: DensityMatrix<S>) -> Self {
        FigureOfMerit {
            kind: FomKind::TraceDistance(reference),
        }
    }

    pub fn purified_distance_to(reference: DensityMatrix<S>) -> Self {
        let sqrt_ref = psd_sqrt(reference.matrix());
        FigureOfMerit {
            kind: FomKind::PurifiedDistance {
                reference,
                sqrt_ref,
            },
        }
    }

    /// Expectation value `tr(Aρ)` of a Hermitian operator.
    pub fn observable(
        operator: CMatrix<S>,
        extremum: Option<S>,
        direction: Extremum,
    ) -> Result<Self> {
        if operator.nrows() != operator.ncols() {
            return Err(QebError::FigureOfMerit("observable must be square".into()));
        }
        if hermiticity_defect(&operator) > S::tol(1e-12) {
            return Err(QebError::FigureOfMerit(
                "observable must be Hermitian".into(),
            ));
        }
        Ok(FigureOfMerit {
            kind: FomKind::Observable {
                operator,
                extremum,
                direction,
            },
        })
    }

    pub fn kind(&self) -> &FomKind<S> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            FomKind::Fidelity2ToPure(psi) => psi.dim(),
            FomKind::Fidelity2ToMixed { reference, .. }
            | FomKind::TraceDistance(reference)
            | FomKind::PurifiedDistance { reference, .. } => reference.dim(),
            FomKind::Observable { operator, .. } => operator.nrows(),
        }
    }

    pub fn class(&self) -> FomClass {
        match &self.kind {
            FomKind::Fidelity2ToPure(_) => FomClass::Fidelity2,
            FomKind::Fidelity2ToMixed { .. } => FomClass::Fidelity2Mixed,
            FomKind::TraceDistance(_) => FomClass::TraceDistance,
            FomKind::PurifiedDistance { .. } => FomClass::PurifiedDistance,
            FomKind::Observable {
                extremum,
                direction,
                ..
            } => FomClass::Observable {
                extremum: extremum.map(|a| a.as_f64()),
                direction: *direction,
            },
        }
    }

    pub fn model_variables(&self) -> Result<ModelVars> {
        self.class().model_variables()
    }

    pub fn evaluate(&self, rho: &DensityMatrix<S>) -> Result<S> {
        if rho.dim() != self.dim() {
            return Err(QebError::DimensionMismatch {
                expected: self.dim(),
                found: rho.dim(),
            });
        }
        Ok(self.evaluate_unchecked(rho.matrix()))
    }

    pub(crate) fn evaluate_unchecked(&self, rho: &CMatrix<S>) -> S {
        match &self.kind {
            FomKind::Fidelity2ToPure(psi) => {
                let v = psi.amplitudes();
                (v.adjoint() * rho * v)[(0, 0)].re
            }
            FomKind::Fidelity2ToMixed { sqrt_ref, .. } => {
                let f = root_fidelity(sqrt_ref, rho);
                f * f
            }
            FomKind::TraceDistance(reference) => trace_distance(rho, reference.matrix()),
            FomKind::PurifiedDistance { sqrt_ref, .. } => {
                let f = root_fidelity(sqrt_ref, rho);
                (S::one() - f * f).max(S::zero()).sqrt()
            }
            FomKind::Observable { operator, .. } => trace_product_hermitian(operator, rho).re,
        }
    }
}

/// `½ Σ |λ_i(ρ − σ)|`.
pub fn trace_distance<S: Real>(rho: &CMatrix<S>, sigma: &CMatrix<S>) -> S {
    let diff = rho - sigma;
    let sum = hermitian_eigenvalues(&diff)
        .into_iter()
        .fold(S::zero(), |a, l| a + l.abs());
    sum * S::of(0.5)
}

/// `F(ρ, σ) = tr √(√σ ρ √σ)` given `√σ`.
fn root_fidelity<S: Real>(sqrt_sigma: &CMatrix<S>, rho: &CMatrix<S>) -> S {
    let m = sqrt_sigma * rho * sqrt_sigma;
    let f = hermitian_eigenvalues(&m)
        .into_iter()
        .fold(S::zero(), |a, l| a + l.max(S::zero()).sqrt());
    f.min(S::one())
}

/// Root fidelity between two states.
pub fn fidelity<S: Real>(rho: &DensityMatrix<S>, sigma: &DensityMatrix<S>) -> S {
    root_fidelity(&psd_sqrt(sigma.matrix()), rho.matrix())
}

/// `√(1 − F²)`.
pub fn purified_distance<S: Real>(rho: &DensityMatrix<S>, sigma: &DensityMatrix<S>) -> S {
    let f = fidelity(rho, sigma);
    (S::one() - f * f).max(S::zero()).sqrt()
}

/// The entanglement witness `W = −I − σX⊗σY + σY⊗σX − σZ⊗σZ` on two qubits.
pub fn two_qubit_witness<S: Real>() -> CMatrix<S> {
    let [x, y, z] = crate::tomodata::pauli_matrices::<S>();
    let mut w = -CMatrix::<S>::identity(4, 4);
    w -= x.kronecker(&y);
    w += y.kronecker(&x);
    w -= z.kronecker(&z);
    w
}

/// Spectral range `(w₋, w₊)` of a Hermitian operator.
pub fn spectral_range<S: Real>(op: &CMatrix<S>) -> (S, S) {
    let ev = hermitian_eigenvalues(op);
    (ev[0], ev[ev.len() - 1])
}
