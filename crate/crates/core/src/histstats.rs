//! Histograms of figure-of-merit samples, normalized into a density estimate
//! of `μ(f)`, with error bars from a binning analysis of each bin's 0/1 series.

use std::io::{Read, Write};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{QebError, Result};

pub const DEFAULT_BINS: usize = 100;
/// Binning levels stop this many doublings short of the series length.
pub const BINNING_RESERVE_LEVELS: u32 = 4;
/// Relative agreement of three consecutive levels that counts as a plateau.
pub const PLATEAU_TOLERANCE: f64 = 0.05;

/// Equal-width bins over `[f_min, f_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub f_min: f64,
    pub f_max: f64,
    pub num_bins: usize,
}

impl HistogramSpec {
    pub fn new(f_min: f64, f_max: f64, num_bins: usize) -> Result<Self> {
        if !(f_min < f_max) || !f_min.is_finite() || !f_max.is_finite() {
            return Err(QebError::Histogram(format!(
                "need f_min < f_max, got [{f_min}, {f_max})"
            )));
        }
        if num_bins < 2 {
            return Err(QebError::Histogram(format!(
                "need at least 2 bins, got {num_bins}"
            )));
        }
        Ok(HistogramSpec {
            f_min,
            f_max,
            num_bins,
        })
    }

    pub fn bin_width(&self) -> f64 {
        (self.f_max - self.f_min) / self.num_bins as f64
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.f_min + (i as f64 + 0.5) * self.bin_width()
    }

    pub fn bin_lower(&self, i: usize) -> f64 {
        self.f_min + i as f64 * self.bin_width()
    }

    /// Left-closed, right-open bins; `f_max` itself is off range.
    pub fn bin_of(&self, value: f64) -> Option<usize> {
        if !(value >= self.f_min && value < self.f_max) {
            return None;
        }
        let k = ((value - self.f_min) / self.bin_width()) as usize;
        Some(k.min(self.num_bins - 1))
    }
}

const OFF_RANGE: u32 = u32::MAX;

/// Single-writer accumulator; keeps the per-sample bin index so that every
/// bin's indicator series can be binning-analysed afterwards.
#[derive(Debug, Clone)]
pub struct HistogramAccumulator {
    spec: HistogramSpec,
    counts: Vec<u64>,
    off_range: u64,
    series: Vec<u32>,
}

impl HistogramAccumulator {
    pub fn new(spec: HistogramSpec) -> Self {
        HistogramAccumulator {
            spec,
            counts: vec![0; spec.num_bins],
            off_range: 0,
            series: Vec::new(),
        }
    }

    pub fn with_capacity(spec: HistogramSpec, samples: usize) -> Self {
        let mut acc = Self::new(spec);
        acc.series.reserve(samples);
        acc
    }

    pub fn record(&mut self, value: f64) {
        match self.spec.bin_of(value) {
            Some(k) => {
                self.counts[k] += 1;
                self.series.push(k as u32);
            }
            None => {
                self.off_range += 1;
                self.series.push(OFF_RANGE);
            }
        }
    }

    pub fn spec(&self) -> &HistogramSpec {
        &self.spec
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn off_range_count(&self) -> u64 {
        self.off_range
    }

    pub fn samples(&self) -> usize {
        self.series.len()
    }

    /// Recorded bin index per sample, `None` for off-range values.
    pub fn bin_series(&self) -> impl Iterator<Item = Option<usize>> + '_ {
        self.series.iter().map(|&k| {
            if k == OFF_RANGE {
                None
            } else {
                Some(k as usize)
            }
        })
    }

    /// The 0/1 time series of one bin.
    pub fn indicator_series(&self, bin: usize) -> Vec<f64> {
        self.series
            .iter()
            .map(|&k| if k as usize == bin { 1.0 } else { 0.0 })
            .collect()
    }

    /// Normalized density with binning-analysis error bars.
    pub fn finish(&self) -> FomHistogram {
        let n = self.series.len();
        let in_range = n as u64 - self.off_range;
        let width = self.spec.bin_width();
        let mut density = vec![0.0; self.spec.num_bins];
        let mut error = vec![0.0; self.spec.num_bins];
        if in_range > 0 {
            let in_frac = in_range as f64 / n as f64;
            for b in 0..self.spec.num_bins {
                let mean = self.counts[b] as f64 / n as f64;
                density[b] = mean / (in_frac * width);
                let err = if self.counts[b] == 0 {
                    0.0
                } else {
                    binning_error(&self.indicator_series(b))
                };
                error[b] = err / (in_frac * width);
            }
        }
        FomHistogram {
            spec: self.spec,
            density,
            error,
            off_range_count: self.off_range,
            samples: n as u64,
        }
    }
}

/// Density estimate of `μ(f)` with per-bin statistical errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FomHistogram {
    pub spec: HistogramSpec,
    pub density: Vec<f64>,
    pub error: Vec<f64>,
    pub off_range_count: u64,
    /// Total recorded samples, in range or not.
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailSide {
    /// Mass at values `≥ f`.
    AtLeast,
    /// Mass at values `≤ f`.
    AtMost,
}

impl FomHistogram {
    /// Histogram of independent values with binomial error bars.
    pub fn from_values(spec: HistogramSpec, values: &[f64]) -> FomHistogram {
        let mut counts = vec![0u64; spec.num_bins];
        let mut off = 0u64;
        for &v in values {
            match spec.bin_of(v) {
                Some(k) => counts[k] += 1,
                None => off += 1,
            }
        }
        let n = values.len() as f64;
        let in_range = n - off as f64;
        let width = spec.bin_width();
        let (density, error) = if in_range > 0.0 {
            counts
                .iter()
                .map(|&c| {
                    let p = c as f64 / in_range;
                    (p / width, (p * (1.0 - p) / in_range).sqrt() / width)
                })
                .unzip()
        } else {
            (vec![0.0; spec.num_bins], vec![0.0; spec.num_bins])
        };
        FomHistogram {
            spec,
            density,
            error,
            off_range_count: off,
            samples: values.len() as u64,
        }
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        (0..self.spec.num_bins)
            .map(|i| self.spec.bin_center(i))
            .collect()
    }

    /// `Σ density · width`; 1 for a normalized histogram with in-range samples.
    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.spec.bin_width()
    }

    pub fn mean(&self) -> f64 {
        let w = self.spec.bin_width();
        (0..self.spec.num_bins)
            .map(|i| self.spec.bin_center(i) * self.density[i] * w)
            .sum::<f64>()
            / self.total_mass()
    }

    /// Center of the highest bin.
    pub fn peak_position(&self) -> f64 {
        let (i, _) =
            self.density
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &d)| {
                    if d > best.1 {
                        (i, d)
                    } else {
                        best
                    }
                });
        self.spec.bin_center(i)
    }

    /// Density mass on one side of `f`, integrating the piecewise-constant
    /// density exactly (the CDF is linear inside each bin).
    pub fn tail_weight(&self, f: f64, side: TailSide) -> f64 {
        let spec = &self.spec;
        let w = spec.bin_width();
        let f = f.clamp(spec.f_min, spec.f_max);
        let pos = (f - spec.f_min) / w;
        let full = (pos.floor() as usize).min(spec.num_bins);
        let frac = pos - full as f64;
        let below: f64 = self.density[..full].iter().sum::<f64>() * w
            + if full < spec.num_bins {
                frac * self.density[full] * w
            } else {
                0.0
            };
        let above: f64 = self.density[full.min(spec.num_bins)..].iter().sum::<f64>() * w
            - if full < spec.num_bins {
                frac * self.density[full] * w
            } else {
                0.0
            };
        match side {
            TailSide::AtMost => below.max(0.0),
            TailSide::AtLeast => above.max(0.0),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["bin_center", "density", "error"])?;
        for i in 0..self.spec.num_bins {
            wtr.write_record([
                self.spec.bin_center(i).to_string(),
                self.density[i].to_string(),
                self.error[i].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the `bin_center,density,error` table; bins must be equally spaced.
    pub fn read_csv<R: Read>(input: R) -> Result<FomHistogram> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut centers = Vec::new();
        let mut density = Vec::new();
        let mut error = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize, name: &str| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| QebError::Schema {
                        context: format!("histogram row {}", line + 1),
                        message: format!("missing column {name}"),
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| QebError::Schema {
                        context: format!("histogram row {}", line + 1),
                        message: format!("column {name}: {e}"),
                    })
            };
            centers.push(parse(0, "bin_center")?);
            density.push(parse(1, "density")?);
            error.push(parse(2, "error")?);
        }
        if centers.len() < 2 {
            return Err(QebError::Histogram(
                "histogram table needs at least 2 rows".into(),
            ));
        }
        let n = centers.len();
        let width = (centers[n - 1] - centers[0]) / (n - 1) as f64;
        for i in 1..n {
            let step = centers[i] - centers[i - 1];
            if (step - width).abs() > 1e-9 * width.abs().max(1.0) {
                return Err(QebError::Histogram(format!(
                    "bin centers are not equally spaced at row {i}"
                )));
            }
        }
        let spec = HistogramSpec::new(centers[0] - width / 2.0, centers[n - 1] + width / 2.0, n)?;
        Ok(FomHistogram {
            spec,
            density,
            error,
            off_range_count: 0,
            samples: 0,
        })
    }
}

/// Per-level standard errors and the plateau estimate of a binning analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningAnalysis {
    /// Standard error of the mean at each level (level 0 = naive iid error).
    pub levels: Vec<f64>,
    pub error: f64,
    pub converged: bool,
}

/// Standard error of the mean of a correlated series by successive pairwise
/// averaging.
pub fn binning_analysis(series: &[f64]) -> BinningAnalysis {
    let n = series.len();
    let min_len = 1usize << BINNING_RESERVE_LEVELS;
    if n < min_len {
        warn!("binning analysis needs at least {min_len} samples, got {n}; using the naive error");
        let e = naive_error(series);
        return BinningAnalysis {
            levels: vec![e],
            error: e,
            converged: false,
        };
    }
    let max_level = n.ilog2() - BINNING_RESERVE_LEVELS;
    let usable = (n >> max_level) << max_level;
    let mut current: Vec<f64> = series[..usable].to_vec();
    let mut levels = Vec::with_capacity(max_level as usize + 1);
    levels.push(naive_error(&current));
    for _ in 0..max_level {
        current = current
            .chunks_exact(2)
            .map(|p| 0.5 * (p[0] + p[1]))
            .collect();
        levels.push(naive_error(&current));
    }
    let naive = levels[0];

    let plateau = levels.windows(3).find_map(|w| {
        let hi = w.iter().cloned().fold(f64::MIN, f64::max);
        let lo = w.iter().cloned().fold(f64::MAX, f64::min);
        if hi == 0.0 {
            Some(0.0)
        } else if lo > 0.0 && hi / lo - 1.0 <= PLATEAU_TOLERANCE {
            Some(w.iter().sum::<f64>() / 3.0)
        } else {
            None
        }
    });
    let (estimate, converged) = match plateau {
        Some(e) => (e, true),
        None => {
            let tail = &levels[levels.len().saturating_sub(3)..];
            (tail.iter().cloned().fold(0.0, f64::max), false)
        }
    };
    BinningAnalysis {
        error: estimate.max(naive),
        levels,
        converged,
    }
}

pub fn binning_error(series: &[f64]) -> f64 {
    binning_analysis(series).error
}

fn naive_error(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn check_same_spec(hists: &[FomHistogram]) -> Result<&HistogramSpec> {
    let first = hists
        .first()
        .ok_or_else(|| QebError::Histogram("nothing to combine".into()))?;
    if let Some((i, _)) = hists.iter().enumerate().find(|(_, h)| h.spec != first.spec) {
        return Err(QebError::Histogram(format!(
            "histogram {i} has a different binning"
        )));
    }
    Ok(&first.spec)
}

/// Per-bin mean of densities with errors `√(Σ eᵢ²)/K`.
pub fn combine(hists: &[FomHistogram]) -> Result<FomHistogram> {
    let spec = *check_same_spec(hists)?;
    let k = hists.len() as f64;
    let mut density = vec![0.0; spec.num_bins];
    let mut error = vec![0.0; spec.num_bins];
    for b in 0..spec.num_bins {
        // fixed-order reduction keeps results bit-reproducible
        density[b] = hists.iter().map(|h| h.density[b]).sum::<f64>() / k;
        error[b] = hists
            .iter()
            .map(|h| h.error[b] * h.error[b])
            .sum::<f64>()
            .sqrt()
            / k;
    }
    Ok(FomHistogram {
        spec,
        density,
        error,
        off_range_count: hists.iter().map(|h| h.off_range_count).sum(),
        samples: hists.iter().map(|h| h.samples).sum(),
    })
}

/// Standard error of the per-bin mean estimated from the spread between
/// independent histograms; a consistency check on the binning errors.
pub fn cross_run_error(hists: &[FomHistogram]) -> Result<Vec<f64>> {
    let spec = *check_same_spec(hists)?;
    let k = hists.len();
    if k < 2 {
        return Ok(vec![f64::NAN; spec.num_bins]);
    }
    Ok((0..spec.num_bins)
        .map(|b| {
            let xs: Vec<f64> = hists.iter().map(|h| h.density[b]).collect();
            naive_error(&xs)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn record_boundaries() {
        let spec = HistogramSpec::new(0.0, 1.0, 10).unwrap();
        let mut acc = HistogramAccumulator::new(spec);
        acc.record(0.0);
        acc.record(1.0);
        for _ in 0..10 {
            acc.record(0.55);
        }
        assert_eq!(acc.counts()[0], 1);
        assert_eq!(acc.counts()[5], 10);
        assert_eq!(acc.off_range_count(), 1);
        assert_eq!(acc.samples(), 12);
    }

    #[test]
    fn spec_validation() {
        assert!(HistogramSpec::new(1.0, 1.0, 10).is_err());
        assert!(HistogramSpec::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn finish_normalizes() {
        let spec = HistogramSpec::new(-1.0, 1.0, 8).unwrap();
        let mut acc = HistogramAccumulator::new(spec);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5000 {
            acc.record(rng.random::<f64>() * 2.4 - 1.2);
        }
        let h = acc.finish();
        assert!((h.total_mass() - 1.0).abs() < 1e-9);
        assert!(h.density.iter().all(|&d| d >= 0.0));
        assert!(h.off_range_count > 0);
    }

    #[test]
    fn binning_constant_series() {
        assert_eq!(binning_error(&vec![1.0; 1024]), 0.0);
        assert_eq!(binning_error(&vec![0.0; 1024]), 0.0);
    }

    #[test]
    fn binning_short_series_falls_back() {
        let s = [0.0, 1.0, 0.0, 1.0, 1.0];
        let a = binning_analysis(&s);
        assert!(!a.converged);
        assert_eq!(a.error, naive_error(&s));
    }

    #[test]
    fn binning_iid_bernoulli() {
        let n = 1 << 16;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s: Vec<f64> = (0..n)
            .map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 })
            .collect();
        let analytic = 0.5 / (n as f64).sqrt();
        let e = binning_error(&s);
        assert!((e / analytic - 1.0).abs() < 0.2, "{e} vs {analytic}");
    }

    /// Two-state Markov chain with flip probability p has lag-1
    /// autocorrelation 1 − 2p and geometric decay, i.e. an AR(1) 0/1 series.
    fn markov_series(n: usize, rho_c: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let flip = (1.0 - rho_c) / 2.0;
        let mut state = rng.random::<bool>();
        (0..n)
            .map(|_| {
                if rng.random::<f64>() < flip {
                    state = !state;
                }
                if state {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    #[test]
    fn binning_correlated_series() {
        let n = 1 << 20;
        let rho_c = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let s = markov_series(n, rho_c, &mut rng);
        let iid = 0.5 / (n as f64).sqrt();
        let analytic = ((1.0 + rho_c) / (1.0 - rho_c)).sqrt() * iid;
        let a = binning_analysis(&s);
        assert!(
            (a.error / analytic - 1.0).abs() < 0.25,
            "{} vs {analytic}",
            a.error
        );
        assert!(a.error >= a.levels[0]);
    }

    fn flat(spec: HistogramSpec, d: f64, e: f64) -> FomHistogram {
        FomHistogram {
            spec,
            density: vec![d; spec.num_bins],
            error: vec![e; spec.num_bins],
            off_range_count: 0,
            samples: 10,
        }
    }

    #[test]
    fn combine_rules() {
        let spec = HistogramSpec::new(0.0, 1.0, 4).unwrap();
        let h = flat(spec, 1.0, 0.1);
        let one = combine(std::slice::from_ref(&h)).unwrap();
        assert_eq!(one.density, h.density);
        assert_eq!(one.error, h.error);

        let two = combine(&[h.clone(), h.clone()]).unwrap();
        assert_eq!(two.density, h.density);
        assert!((two.error[0] - 0.1 / 2f64.sqrt()).abs() < 1e-15);

        let hs = [
            flat(spec, 1.0, 0.3),
            flat(spec, 2.0, 0.3),
            flat(spec, 3.0, 0.3),
        ];
        let c = combine(&hs).unwrap();
        assert!((c.density[2] - 2.0).abs() < 1e-15);
        assert!((c.error[2] - 0.3 / 3f64.sqrt()).abs() < 1e-15);
        let rev: Vec<_> = hs.iter().rev().cloned().collect();
        let c2 = combine(&rev).unwrap();
        for b in 0..4 {
            assert!((c.density[b] - c2.density[b]).abs() < 1e-15);
        }

        let other = flat(HistogramSpec::new(0.0, 2.0, 4).unwrap(), 1.0, 0.1);
        assert!(combine(&[h, other]).is_err());
    }

    fn triangular(num_bins: usize) -> FomHistogram {
        let spec = HistogramSpec::new(0.0, 1.0, num_bins).unwrap();
        // exact bin averages of the density 4·min(f, 1−f)
        let w = spec.bin_width();
        let cdf = |f: f64| {
            if f <= 0.5 {
                2.0 * f * f
            } else {
                1.0 - 2.0 * (1.0 - f) * (1.0 - f)
            }
        };
        let density = (0..num_bins)
            .map(|i| (cdf(spec.bin_lower(i) + w) - cdf(spec.bin_lower(i))) / w)
            .collect();
        FomHistogram {
            spec,
            density,
            error: vec![0.0; num_bins],
            off_range_count: 0,
            samples: 1,
        }
    }

    #[test]
    fn tail_weights() {
        let h = triangular(50);
        assert!((h.tail_weight(0.0, TailSide::AtLeast) - 1.0).abs() < 1e-12);
        assert!(h.tail_weight(1.0, TailSide::AtLeast).abs() < 1e-12);
        assert!((h.tail_weight(0.5, TailSide::AtLeast) - 0.5).abs() < 1e-12);
        // analytic ∫_{0.3}^{1} = 1 − 2·0.3² = 0.82, off by at most the curvature inside one bin
        assert!((h.tail_weight(0.3, TailSide::AtLeast) - 0.82).abs() < 1e-3);
        for f in [0.0, 0.13, 0.5, 0.77, 0.999, 1.0] {
            let sum = h.tail_weight(f, TailSide::AtLeast) + h.tail_weight(f, TailSide::AtMost);
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let h = triangular(7);
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("bin_center,density,error\n"));
        let back = FomHistogram::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.density, h.density);
        assert_eq!(back.error, h.error);
        assert!((back.spec.f_min - h.spec.f_min).abs() < 1e-12);
        assert!((back.spec.f_max - h.spec.f_max).abs() < 1e-12);
        assert_eq!(back.spec.num_bins, 7);
    }
}
