use std::io::Read;

use serde::{Deserialize, Serialize};

use super::OptimError;

pub const DEFAULT_LEVELS: usize = 256;
pub const DEFAULT_HISTOGRAM_BINS: usize = 2048;

const SMOOTHING_EPS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantMode {
    Symmetric,
    Asymmetric,
}

/// Per-tensor 8-bit quantisation: `q = round(x / scale) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    pub scale: f64,
    pub offset: i32,
    pub mode: QuantMode,
    pub bit_width: u8,
}

impl QuantParams {
    pub fn symmetric(scale: f64) -> Self {
        QuantParams { scale, offset: 0, mode: QuantMode::Symmetric, bit_width: 8 }
    }

    /// Inclusive integer code range.
    pub fn code_range(&self) -> (i32, i32) {
        match self.mode {
            QuantMode::Symmetric => (-127, 127),
            QuantMode::Asymmetric => (0, 255),
        }
    }

    /// Real interval covered by the code range.
    pub fn range(&self) -> (f64, f64) {
        let (lo, hi) = self.code_range();
        (f64::from(lo - self.offset) * self.scale, f64::from(hi - self.offset) * self.scale)
    }

    pub fn quantize(&self, x: f64) -> i32 {
        let (lo, hi) = self.code_range();
        let q = (x / self.scale).round() + f64::from(self.offset);
        q.clamp(f64::from(lo), f64::from(hi)) as i32
    }

    pub fn dequantize(&self, q: i32) -> f64 {
        f64::from(q - self.offset) * self.scale
    }
}

pub fn quant_params_minmax(min: f64, max: f64, mode: QuantMode) -> Result<QuantParams, OptimError> {
    let degenerate = OptimError::DegenerateRange { min, max };
    if !(min.is_finite() && max.is_finite()) || min > max {
        return Err(degenerate);
    }
    match mode {
        QuantMode::Symmetric => {
            let m = min.abs().max(max.abs());
            if m == 0.0 {
                return Err(degenerate);
            }
            Ok(QuantParams::symmetric(m / 127.0))
        }
        QuantMode::Asymmetric => {
            let scale = (max - min) / 255.0;
            if scale <= 0.0 {
                return Err(degenerate);
            }
            Ok(QuantParams { scale, offset: (-min / scale).round() as i32, mode, bit_width: 8 })
        }
    }
}

/// Largest `|x - dequantize(quantize(x))|` over `values`; 0 for no values.
pub fn quantize_roundtrip(values: &[f64], params: &QuantParams) -> f64 {
    values
        .iter()
        .map(|&x| (x - params.dequantize(params.quantize(x))).abs())
        .fold(0.0, f64::max)
}

/// Equal-width histogram over a range symmetric around zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<f64>,
}

#[derive(Deserialize)]
struct HistRow {
    bin_edge: f64,
    count: f64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, counts: Vec<f64>) -> Result<Self, OptimError> {
        let bad = |m: &str| Err(OptimError::InvalidHistogram(m.to_string()));
        if !(lo.is_finite() && hi.is_finite() && hi > 0.0) {
            return bad("range must be finite with hi > 0");
        }
        if (lo + hi).abs() > 1e-9 * hi {
            return bad("range must be symmetric around zero");
        }
        if counts.is_empty() || !counts.len().is_multiple_of(2) {
            return bad("bin count must be even and non-zero");
        }
        if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return bad("counts must be finite and non-negative");
        }
        Ok(Histogram { lo, hi, counts })
    }

    /// Bins `values` over `[-max|x|, max|x|]`.
    pub fn from_samples(values: &[f64], bins: usize) -> Result<Self, OptimError> {
        let m = values.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if m == 0.0 || bins == 0 {
            return Err(OptimError::EmptyHistogram);
        }
        let mut counts = vec![0.0; bins];
        let w = 2.0 * m / bins as f64;
        for &x in values {
            let i = (((x + m) / w).floor() as usize).min(bins - 1);
            counts[i] += 1.0;
        }
        Histogram::new(-m, m, counts)
    }

    /// Reads `bin_edge,count` rows, one per bin, with `bin_edge` the lower
    /// edge. Edges must be evenly spaced.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, OptimError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let rows: Vec<HistRow> = rdr.deserialize().collect::<Result<_, _>>()?;
        if rows.len() < 2 {
            return Err(OptimError::InvalidHistogram("need at least two bins".into()));
        }
        let w = rows[1].bin_edge - rows[0].bin_edge;
        let lo = rows[0].bin_edge;
        for (i, r) in rows.iter().enumerate() {
            let expect = lo + w * i as f64;
            if !(w > 0.0) || (r.bin_edge - expect).abs() > 1e-6 * w {
                return Err(OptimError::InvalidHistogram(format!("uneven bin edge at row {}", i + 1)));
            }
        }
        let hi = lo + w * rows.len() as f64;
        Histogram::new(lo, hi, rows.into_iter().map(|r| r.count).collect())
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    /// Counts of |x|: bin `j` covers `[j*w, (j+1)*w)`.
    pub fn folded(&self) -> Vec<f64> {
        let half = self.counts.len() / 2;
        (0..half).map(|j| self.counts[half + j] + self.counts[half - 1 - j]).collect()
    }

    /// Upper edge of the outermost occupied bin on the absolute scale.
    pub fn occupied_max(&self) -> Option<f64> {
        let f = self.folded();
        f.iter().rposition(|&c| c > 0.0).map(|j| (j + 1) as f64 * self.bin_width())
    }

    /// Symmetric min/max parameters for the occupied extent.
    pub fn minmax_params(&self) -> Result<QuantParams, OptimError> {
        let m = self.occupied_max().ok_or(OptimError::EmptyHistogram)?;
        quant_params_minmax(-m, m, QuantMode::Symmetric)
    }
}

fn smooth(dist: &mut [f64]) -> bool {
    let zeros = dist.iter().filter(|&&v| v == 0.0).count();
    let nonzeros = dist.len() - zeros;
    if nonzeros == 0 {
        return false;
    }
    let eps1 = SMOOTHING_EPS * zeros as f64 / nonzeros as f64;
    for v in dist.iter_mut() {
        if *v == 0.0 {
            *v = SMOOTHING_EPS;
        } else {
            *v -= eps1;
        }
    }
    true
}

/// KL divergence between the absolute histogram clipped at bin `i` (outlier
/// mass added to the last kept bin) and its `target`-level requantised,
/// re-expanded copy.
fn kl_divergence_at(abs: &[f64], i: usize, target: usize) -> f64 {
    let mut p: Vec<f64> = abs[..i].to_vec();
    p[i - 1] += abs[i..].iter().sum::<f64>();
    let mut q = vec![0.0; i];
    for j in 0..target {
        let (start, end) = (j * i / target, (j + 1) * i / target);
        let sum: f64 = abs[start..end].iter().sum();
        let nz = p[start..end].iter().filter(|&&v| v != 0.0).count();
        if nz == 0 {
            continue;
        }
        for k in start..end {
            if p[k] != 0.0 {
                q[k] = sum / nz as f64;
            }
        }
    }
    let (ps, qs): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if qs == 0.0 {
        return f64::INFINITY;
    }
    p.iter_mut().for_each(|v| *v /= ps);
    q.iter_mut().for_each(|v| *v /= qs);
    if !smooth(&mut p) || !smooth(&mut q) {
        return f64::INFINITY;
    }
    p.iter().zip(&q).map(|(&a, &b)| a * (a / b).ln()).sum()
}

/// Sweeps clipping thresholds over the folded histogram and keeps the one
/// with the smallest KL divergence after requantising to `levels / 2` bins
/// per sign. The returned threshold never exceeds the occupied extent, so the
/// scale is never larger than the min/max scale.
pub fn kl_calibrate(hist: &Histogram, levels: usize) -> Result<QuantParams, OptimError> {
    if levels < 2 || !levels.is_multiple_of(2) {
        return Err(OptimError::InvalidHistogram(format!("levels must be even and >= 2, got {levels}")));
    }
    if hist.counts.len() < levels {
        return Err(OptimError::TooFewBins { bins: hist.counts.len(), levels });
    }
    let occupied = hist.occupied_max().ok_or(OptimError::EmptyHistogram)?;
    let abs = hist.folded();
    let target = levels / 2;
    let mut best = (target, f64::INFINITY);
    for i in target..=abs.len() {
        let kl = kl_divergence_at(&abs, i, target);
        if kl < best.1 {
            best = (i, kl);
        }
    }
    let threshold = (best.0 as f64 * hist.bin_width()).min(occupied);
    Ok(QuantParams::symmetric(threshold / 127.0))
}
