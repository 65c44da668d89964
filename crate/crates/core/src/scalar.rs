//! Scalar abstraction shared by every numeric module.
//!
//! All state-space, likelihood and figure-of-merit code is written against
//! [`Real`], which is implemented for `f32` and `f64`. Tolerances are quoted
//! for double precision and widened for single precision by [`Real::tol`].

use nalgebra::{Complex, ComplexField, DMatrix, RealField};
use num_traits::ToPrimitive;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Complex matrix over a real scalar.
pub type CMatrix<S> = DMatrix<Complex<S>>;

/// Real scalar usable by the tomography pipeline (`f32` or `f64`).
pub trait Real: RealField + Copy + ToPrimitive + Send + Sync {
    /// Lossy conversion from an `f64` literal.
    fn of(v: f64) -> Self;

    fn as_f64(self) -> f64;

    /// A tolerance stated for `f64`, adapted to this type's precision.
    fn tol(t64: f64) -> Self;

    fn infinity() -> Self;

    fn is_finite_value(self) -> bool;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform on `[0, 1)`.
    fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Real for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    #[inline]
    fn tol(t64: f64) -> Self {
        t64
    }
    #[inline]
    fn infinity() -> Self {
        f64::INFINITY
    }
    #[inline]
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
    #[inline]
    fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }
}

impl Real for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn tol(t64: f64) -> Self {
        // single precision cannot resolve anything tighter than ~1e-5 after
        // a few hundred accumulated products
        t64.max(1e-5) as f32
    }
    #[inline]
    fn infinity() -> Self {
        f32::INFINITY
    }
    #[inline]
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
    #[inline]
    fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }
}

#[inline]
pub(crate) fn cplx<S: Real>(re: S, im: S) -> Complex<S> {
    Complex::new(re, im)
}

/// `tr(A B)` for Hermitian `A`, as `Σ conj(A_ij) B_ij`.
#[inline]
pub(crate) fn trace_product_hermitian<S: Real>(a: &CMatrix<S>, b: &CMatrix<S>) -> Complex<S> {
    a.dotc(b)
}

/// Largest deviation from Hermiticity, `max |A_ij − conj(A_ji)|`.
pub(crate) fn hermiticity_defect<S: Real>(m: &CMatrix<S>) -> S {
    let n = m.nrows();
    let mut worst = S::zero();
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).modulus();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Replace `m` by `(m + m†)/2`.
pub(crate) fn hermitize<S: Real>(m: &mut CMatrix<S>) {
    let n = m.nrows();
    let half = S::of(0.5);
    for i in 0..n {
        m[(i, i)] = Complex::new(m[(i, i)].re, S::zero());
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conj()).scale(half);
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub(crate) fn hermitian_eigenvalues<S: Real>(m: &CMatrix<S>) -> Vec<S> {
    let mut ev: Vec<S> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Hermitian square root of a PSD matrix, clamping tiny negative eigenvalues.
pub(crate) fn psd_sqrt<S: Real>(m: &CMatrix<S>) -> CMatrix<S> {
    let eig = m.clone().symmetric_eigen();
    let roots: Vec<Complex<S>> = eig
        .eigenvalues
        .iter()
        .map(|&l| Complex::new(l.max(S::zero()).sqrt(), S::zero()))
        .collect();
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, r) in roots.iter().enumerate() {
        scaled.column_mut(j).scale_mut(r.re);
    }
    let mut out = scaled * v.adjoint();
    hermitize(&mut out);
    out
}
