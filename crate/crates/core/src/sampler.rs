//! Metropolis-Hastings random walk on the unit sphere of purification
//! coordinates, sampling states from the likelihood-weighted Hilbert-Schmidt
//! measure and histogramming a figure of merit along the way.
//!
//! Walker `k` draws its randomness from a `ChaCha8Rng` seeded with
//! [`walker_seed`]`(base_seed, k)`, so results depend only on the base seed and
//! the walker count, never on thread scheduling.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QebError, Result};
use crate::figures::FigureOfMerit;
use crate::histstats::{
    combine, cross_run_error, FomHistogram, HistogramAccumulator, HistogramSpec,
};
use crate::likelihood::{log_likelihood_unchecked, ZERO_PROBABILITY};
use crate::scalar::{CMatrix, Real};
use crate::statespace::{random_point, rho_from_point_unchecked, StatePoint};
use crate::tomodata::TomographyDataset;

pub const DEFAULT_STEP_SIZE: f64 = 0.01;
pub const DEFAULT_THERM_SWEEPS: u64 = 500;
pub const DEFAULT_SAMPLES: usize = 32768;
pub const DEFAULT_WALKERS: usize = 12;
/// Acceptance ratios outside this window trigger a warning.
pub const ACCEPTANCE_WINDOW: (f64, f64) = (0.2, 0.5);
/// Acceptance ratio the step-size tuner aims for.
pub const TARGET_ACCEPTANCE: f64 = 0.3;
/// The carried λ is recomputed from scratch this often.
const LAMBDA_REFRESH_STEPS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub step_size: f64,
    /// Sweeps discarded before recording.
    pub n_therm: u64,
    /// Steps per recorded sample.
    pub n_sweep: u64,
    /// Recorded samples per walker.
    pub n_samples: usize,
    pub n_walkers: usize,
    pub base_seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig::with_step_size(DEFAULT_STEP_SIZE)
    }
}

impl WalkConfig {
    /// Defaults with the given step size and `n_sweep = ⌈1/η⌉`.
    pub fn with_step_size(step_size: f64) -> Self {
        WalkConfig {
            step_size,
            n_therm: DEFAULT_THERM_SWEEPS,
            n_sweep: default_sweep(step_size),
            n_samples: DEFAULT_SAMPLES,
            n_walkers: DEFAULT_WALKERS,
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(QebError::InvalidConfig(format!(
                "step size must be ≥ 0, got {}",
                self.step_size
            )));
        }
        if self.n_sweep == 0 {
            return Err(QebError::InvalidConfig("n_sweep must be at least 1".into()));
        }
        if self.n_samples == 0 {
            return Err(QebError::InvalidConfig(
                "n_samples must be at least 1".into(),
            ));
        }
        if self.n_walkers == 0 {
            return Err(QebError::InvalidConfig(
                "n_walkers must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn total_samples(&self) -> usize {
        self.n_samples * self.n_walkers
    }
}

pub fn default_sweep(step_size: f64) -> u64 {
    if step_size > 0.0 {
        (1.0 / step_size).ceil().max(1.0) as u64
    } else {
        1
    }
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of walker `index`: `splitmix64(splitmix64(base_seed) ^ index)`.
pub fn walker_seed(base_seed: u64, index: usize) -> u64 {
    splitmix64(splitmix64(base_seed) ^ index as u64)
}

/// Random-walk proposal `(y + η ω)/‖y + η ω‖` with `ω` standard normal.
pub fn propose_jump<S: Real, R: Rng + ?Sized>(
    p: &StatePoint<S>,
    step_size: S,
    rng: &mut R,
) -> StatePoint<S> {
    let raw: Vec<S> = p
        .coords()
        .iter()
        .map(|&y| y + step_size * S::standard_normal(rng))
        .collect();
    StatePoint::from_unnormalized(p.dim(), raw)
}

/// One Metropolis-Hastings step; `lambda_p` must be `λ` at `p`.
/// Returns the new point, its `λ`, and whether the candidate was accepted.
pub fn mh_step<S: Real, R: Rng + ?Sized>(
    p: &StatePoint<S>,
    lambda_p: S,
    data: &TomographyDataset<S>,
    step_size: S,
    rng: &mut R,
) -> (StatePoint<S>, S, bool) {
    let candidate = propose_jump(p, step_size, rng);
    let rho = rho_from_point_unchecked(&candidate);
    let lambda_c = log_likelihood_unchecked(rho.matrix(), data);
    if metropolis_accept(lambda_c.as_f64() - lambda_p.as_f64(), rng) {
        (candidate, lambda_c, true)
    } else {
        (p.clone(), lambda_p, false)
    }
}

#[inline]
fn metropolis_accept<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> bool {
    if !delta.is_finite() {
        // +∞ candidate, or NaN from ∞ − ∞
        return delta == f64::NEG_INFINITY;
    }
    delta <= 0.0 || rng.random::<f64>() < (-0.5 * delta).exp()
}

/// Likelihood specialised for repeated evaluation: each observed effect is
/// reduced to a real linear form on the `d²` real parameters of a Hermitian
/// matrix, and `ρ = TT†` is built in a reused buffer.
struct Kernel<S: Real> {
    dim: usize,
    /// Row-major `K × d²` coefficients.
    forms: Vec<S>,
    counts: Vec<S>,
    rho: Vec<S>,
}

impl<S: Real> Kernel<S> {
    fn new(data: &TomographyDataset<S>) -> Self {
        let d = data.dim();
        let dd = d * d;
        let two = S::one() + S::one();
        let mut forms = Vec::new();
        let mut counts = Vec::new();
        for (e, &n) in data.effects().iter().zip(data.counts()) {
            if n == 0 {
                continue;
            }
            let m = e.matrix();
            let mut row = Vec::with_capacity(dd);
            for i in 0..d {
                row.push(m[(i, i)].re);
            }
            for i in 0..d {
                for j in i + 1..d {
                    row.push(two * m[(i, j)].re);
                    row.push(two * m[(i, j)].im);
                }
            }
            forms.extend(row);
            counts.push(S::of(n as f64));
        }
        Kernel {
            dim: d,
            forms,
            counts,
            rho: vec![S::zero(); dd],
        }
    }

    /// Fills the real parameters of `TT†`: the diagonal, then `(Re, Im)` of
    /// the strict upper triangle.
    fn load(&mut self, coords: &[S]) {
        let d = self.dim;
        let dd = d * d;
        let re = |i: usize, k: usize| coords[k * d + i];
        let im = |i: usize, k: usize| coords[dd + k * d + i];
        for i in 0..d {
            let mut acc = S::zero();
            for k in 0..d {
                acc += re(i, k) * re(i, k) + im(i, k) * im(i, k);
            }
            self.rho[i] = acc;
        }
        let mut idx = d;
        for i in 0..d {
            for j in i + 1..d {
                // ρ_ij = Σ_k T_ik conj(T_jk)
                let mut r = S::zero();
                let mut m = S::zero();
                for k in 0..d {
                    r += re(i, k) * re(j, k) + im(i, k) * im(j, k);
                    m += im(i, k) * re(j, k) - re(i, k) * im(j, k);
                }
                self.rho[idx] = r;
                self.rho[idx + 1] = m;
                idx += 2;
            }
        }
    }

    fn lambda(&mut self, coords: &[S]) -> S {
        self.load(coords);
        let dd = self.dim * self.dim;
        let floor = S::of(ZERO_PROBABILITY);
        let mut acc = S::zero();
        for (row, &n) in self.forms.chunks_exact(dd).zip(&self.counts) {
            let p = row
                .iter()
                .zip(&self.rho)
                .fold(S::zero(), |a, (&c, &r)| a + c * r);
            if p <= floor {
                return S::infinity();
            }
            acc += n * p.ln();
        }
        -(acc + acc)
    }
}

/// Chain state of one walker.
struct Chain<'a, S: Real> {
    data: &'a TomographyDataset<S>,
    kernel: Kernel<S>,
    point: StatePoint<S>,
    candidate: Vec<S>,
    lambda: S,
    step_size: S,
    steps: u64,
    accepted: u64,
    rng: ChaCha8Rng,
}

impl<'a, S: Real> Chain<'a, S> {
    fn new(data: &'a TomographyDataset<S>, step_size: f64, mut rng: ChaCha8Rng) -> Self {
        let mut kernel = Kernel::new(data);
        // a random start has full rank almost surely, so λ is finite
        let point = random_point::<S, _>(data.dim(), &mut rng);
        let lambda = kernel.lambda(point.coords());
        let n = point.coords().len();
        Chain {
            data,
            kernel,
            point,
            candidate: vec![S::zero(); n],
            lambda,
            step_size: S::of(step_size),
            steps: 0,
            accepted: 0,
            rng,
        }
    }

    fn step(&mut self) {
        let mut norm2 = S::zero();
        for (c, &y) in self.candidate.iter_mut().zip(self.point.coords()) {
            *c = y + self.step_size * S::standard_normal(&mut self.rng);
            norm2 += *c * *c;
        }
        let inv = S::one() / norm2.sqrt();
        for c in self.candidate.iter_mut() {
            *c *= inv;
        }
        let lambda_c = self.kernel.lambda(&self.candidate);
        if metropolis_accept(lambda_c.as_f64() - self.lambda.as_f64(), &mut self.rng) {
            self.point = StatePoint::from_unnormalized(self.point.dim(), self.candidate.clone());
            self.lambda = lambda_c;
            self.accepted += 1;
        }
        self.steps += 1;
        if self.steps.is_multiple_of(LAMBDA_REFRESH_STEPS) {
            self.refresh_lambda();
        }
    }

    fn refresh_lambda(&mut self) {
        let rho = rho_from_point_unchecked(&self.point);
        let exact = log_likelihood_unchecked(rho.matrix(), self.data);
        let drift = (exact.as_f64() - self.lambda.as_f64()).abs();
        if drift > 1e-6 * exact.as_f64().abs().max(1.0) {
            debug!("λ drift {drift:e} corrected after {} steps", self.steps);
        }
        self.lambda = exact;
    }

    fn rho(&self) -> CMatrix<S> {
        rho_from_point_unchecked(&self.point).into_matrix()
    }

    fn acceptance(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }

    fn reset_counters(&mut self) {
        self.steps = 0;
        self.accepted = 0;
    }
}

/// Outcome of one walker besides its histogram.
#[derive(Debug, Clone)]
pub struct WalkerReport {
    pub walker_index: usize,
    pub samples: usize,
    /// Acceptance ratio over the recording phase.
    pub acceptance_ratio: f64,
    /// Raw recorded figure-of-merit values, in walk order.
    pub values: Vec<f64>,
    /// Recorded per-sample bin indices.
    pub accumulator: HistogramAccumulator,
}

fn check_inputs<S: Real>(
    data: &TomographyDataset<S>,
    config: &WalkConfig,
    fom_dim: usize,
) -> Result<()> {
    config.validate()?;
    if fom_dim != data.dim() {
        return Err(QebError::DimensionMismatch {
            expected: data.dim(),
            found: fom_dim,
        });
    }
    Ok(())
}

/// Runs walker `walker_index` and histograms the figure of merit.
pub fn run_walker<S: Real>(
    data: &TomographyDataset<S>,
    config: &WalkConfig,
    walker_index: usize,
    fom: &FigureOfMerit<S>,
    spec: &HistogramSpec,
) -> Result<(FomHistogram, WalkerReport)> {
    check_inputs(data, config, fom.dim())?;
    run_walker_with(
        data,
        config,
        walker_index,
        |rho| fom.evaluate_unchecked(rho).as_f64(),
        spec,
    )
}

/// [`run_walker`] with an arbitrary function of `ρ` as the recorded quantity.
pub fn run_walker_with<S: Real, F>(
    data: &TomographyDataset<S>,
    config: &WalkConfig,
    walker_index: usize,
    quantity: F,
    spec: &HistogramSpec,
) -> Result<(FomHistogram, WalkerReport)>
where
    F: Fn(&CMatrix<S>) -> f64,
{
    config.validate()?;
    let rng = ChaCha8Rng::seed_from_u64(walker_seed(config.base_seed, walker_index));
    let mut chain = Chain::new(data, config.step_size, rng);
    for _ in 0..config.n_therm * config.n_sweep {
        chain.step();
    }
    chain.reset_counters();

    let mut acc = HistogramAccumulator::with_capacity(*spec, config.n_samples);
    let mut values = Vec::with_capacity(config.n_samples);
    for _ in 0..config.n_samples {
        for _ in 0..config.n_sweep {
            chain.step();
        }
        let f = quantity(&chain.rho());
        acc.record(f);
        values.push(f);
    }

    let ratio = chain.acceptance();
    let (lo, hi) = ACCEPTANCE_WINDOW;
    if !(lo..=hi).contains(&ratio) {
        warn!(
            "walker {walker_index}: acceptance ratio {ratio:.3} outside [{lo}, {hi}]; consider another step size"
        );
    }
    if acc.off_range_count() > 0 {
        debug!(
            "walker {walker_index}: {} samples outside the histogram range",
            acc.off_range_count()
        );
    }
    let hist = acc.finish();
    Ok((
        hist,
        WalkerReport {
            walker_index,
            samples: values.len(),
            acceptance_ratio: ratio,
            values,
            accumulator: acc,
        },
    ))
}

/// Combined result of all walkers.
#[derive(Debug, Clone)]
pub struct CombinedHistogram {
    pub histogram: FomHistogram,
    pub walkers: Vec<WalkerReport>,
    /// Per-bin standard error of the mean from the spread between walkers;
    /// NaN for a single walker.
    pub cross_walker_error: Vec<f64>,
}

impl CombinedHistogram {
    pub fn total_samples(&self) -> usize {
        self.walkers.iter().map(|w| w.samples).sum()
    }

    pub fn mean_acceptance(&self) -> f64 {
        self.walkers.iter().map(|w| w.acceptance_ratio).sum::<f64>() / self.walkers.len() as f64
    }
}

/// Runs `n_walkers` independent walkers in parallel and averages their
/// histograms in walker-index order.
pub fn run_analysis<S: Real>(
    data: &TomographyDataset<S>,
    config: &WalkConfig,
    fom: &FigureOfMerit<S>,
    spec: &HistogramSpec,
) -> Result<CombinedHistogram> {
    check_inputs(data, config, fom.dim())?;
    run_analysis_with(
        data,
        config,
        |rho: &CMatrix<S>| fom.evaluate_unchecked(rho).as_f64(),
        spec,
    )
}

/// [`run_analysis`] with an arbitrary function of `ρ` as the recorded quantity.
pub fn run_analysis_with<S: Real, F>(
    data: &TomographyDataset<S>,
    config: &WalkConfig,
    quantity: F,
    spec: &HistogramSpec,
) -> Result<CombinedHistogram>
where
    F: Fn(&CMatrix<S>) -> f64 + Sync,
{
    config.validate()?;
    let runs: Vec<Result<(FomHistogram, WalkerReport)>> = (0..config.n_walkers)
        .into_par_iter()
        .map(|k| run_walker_with(data, config, k, &quantity, spec))
        .collect();
    let mut hists = Vec::with_capacity(runs.len());
    let mut walkers = Vec::with_capacity(runs.len());
    for run in runs {
        let (h, r) = run?;
        hists.push(h);
        walkers.push(r);
    }
    let histogram = combine(&hists)?;
    let cross_walker_error = cross_run_error(&hists)?;
    Ok(CombinedHistogram {
        histogram,
        walkers,
        cross_walker_error,
    })
}

/// Adjusts the step size towards [`TARGET_ACCEPTANCE`] with short pilot
/// chains; the pilot steps are discarded.
pub fn tune_step_size<S: Real>(
    data: &TomographyDataset<S>,
    initial: f64,
    seed: u64,
) -> Result<f64> {
    if !(initial > 0.0 && initial.is_finite()) {
        return Err(QebError::InvalidConfig(format!(
            "initial step size must be > 0, got {initial}"
        )));
    }
    const ROUNDS: usize = 16;
    const STEPS: usize = 2000;
    let rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x7475_6e65));
    let mut chain = Chain::new(data, initial, rng);
    let mut eta = initial;
    for round in 0..ROUNDS {
        chain.step_size = S::of(eta);
        chain.reset_counters();
        for _ in 0..STEPS {
            chain.step();
        }
        let a = chain.acceptance();
        debug!("tuning round {round}: η = {eta:.4e}, acceptance {a:.3}");
        // the acceptance ratio falls roughly exponentially in η² near the target
        let factor = if a <= 0.0 {
            0.25
        } else {
            (a / TARGET_ACCEPTANCE).clamp(0.25, 4.0)
        };
        eta *= factor.sqrt();
    }
    Ok(eta)
}

/// Histogram range from a short pilot walk: mean ± 8 standard deviations,
/// clipped to the figure's natural range. The upper edge is nudged past an
/// attainable maximum so that it falls inside the last (right-open) bin.
pub fn pilot_range<S: Real>(
    data: &TomographyDataset<S>,
    config: &WalkConfig,
    fom: &FigureOfMerit<S>,
    pilot_samples: usize,
) -> Result<(f64, f64)> {
    let pilot = WalkConfig {
        n_samples: pilot_samples.max(16),
        n_walkers: 1,
        base_seed: splitmix64(config.base_seed ^ 0x7069_6c6f),
        ..*config
    };
    check_inputs(data, &pilot, fom.dim())?;
    let wide = HistogramSpec::new(-1e300, 1e300, 2)?;
    let (_, report) = run_walker(data, &pilot, 0, fom, &wide)?;
    let n = report.values.len() as f64;
    let mean = report.values.iter().sum::<f64>() / n;
    let sd = (report
        .values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n)
        .sqrt();
    let (nat_lo, nat_hi) = fom.class().natural_range();
    let spread = if sd > 0.0 {
        8.0 * sd
    } else {
        1e-6 * mean.abs().max(1.0)
    };
    let lo = (mean - spread).max(nat_lo);
    let mut hi = mean + spread;
    if hi >= nat_hi {
        hi = nat_hi + 1e-9 * nat_hi.abs().max(1.0);
    }
    Ok((lo, hi))
}
