//! Statistical instruments: Kuiper's circular uniformity test, a binned
//! mutual-information estimator with Miller–Madow correction, and bit error
//! rates.

use std::f64::consts::{LN_2, TAU};

use crate::error::{Error, Result};
use crate::phase_math::Phase;

/// Smallest sample accepted by [`kuiper_uniformity`].
pub const KUIPER_MIN_SAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityReport {
    /// Kuiper's `V_n = D+ + D-`.
    pub statistic: f64,
    /// `V_n·(√n + 0.155 + 0.24/√n)`, the quantity compared with the critical value.
    pub modified: f64,
    pub critical: f64,
    pub p_value: f64,
    pub n: usize,
    pub significance: f64,
    pub pass: bool,
}

/// Asymptotic tail probability of the modified Kuiper statistic,
/// `Q(λ) = 2 Σ_{j≥1} (4j²λ² − 1) e^{−2j²λ²}`.
pub fn kuiper_tail(lambda: f64) -> f64 {
    // Below 0.3 the tail is 1 to double precision.
    if lambda < 0.3 {
        return 1.0;
    }
    let l2 = lambda * lambda;
    let mut sum = 0.0;
    for j in 1..=100 {
        let j2 = (j * j) as f64;
        let decay = (-2.0 * j2 * l2).exp();
        if decay == 0.0 {
            break;
        }
        sum += (4.0 * j2 * l2 - 1.0) * decay;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Critical value of the modified statistic at `significance`.
pub fn kuiper_critical(significance: f64) -> Result<f64> {
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "significance must lie in (0, 1), got {significance}"
        )));
    }
    // Q is strictly decreasing on [0.4, 10].
    let (mut lo, mut hi) = (0.4, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kuiper_tail(mid) > significance {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Kuiper test of `samples` against the uniform law on `[0, 2π)`.
pub fn kuiper_uniformity(samples: &[Phase], significance: f64) -> Result<UniformityReport> {
    let n = samples.len();
    if n < KUIPER_MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: KUIPER_MIN_SAMPLES,
            got: n,
        });
    }
    let critical = kuiper_critical(significance)?;

    let mut u: Vec<f64> = samples.iter().map(|p| p.radians() / TAU).collect();
    u.sort_by(f64::total_cmp);
    let nf = n as f64;
    let (mut d_plus, mut d_minus) = (0.0f64, 0.0f64);
    for (i, &x) in u.iter().enumerate() {
        d_plus = d_plus.max((i + 1) as f64 / nf - x);
        d_minus = d_minus.max(x - i as f64 / nf);
    }
    let statistic = d_plus + d_minus;
    let sqrt_n = nf.sqrt();
    let modified = statistic * (sqrt_n + 0.155 + 0.24 / sqrt_n);

    Ok(UniformityReport {
        statistic,
        modified,
        critical,
        p_value: kuiper_tail(modified),
        n,
        significance,
        pass: modified < critical,
    })
}

/// One axis of a binned MI estimate.
#[derive(Debug, Clone, Copy)]
pub enum Variable<'a> {
    /// Binned over `[0, 2π)`.
    Phase(&'a [Phase]),
    /// Binned over the sample's `[min, max]`.
    Real(&'a [f64]),
    /// Categorical values in `0..levels`, binned over `[0, levels)`.
    Index(&'a [usize], usize),
}

impl Variable<'_> {
    fn len(&self) -> usize {
        match self {
            Variable::Phase(v) => v.len(),
            Variable::Real(v) => v.len(),
            Variable::Index(v, _) => v.len(),
        }
    }

    fn bin_indices(&self, bins: usize) -> Result<Vec<usize>> {
        let clamp = |b: f64| (b.max(0.0) as usize).min(bins - 1);
        Ok(match *self {
            Variable::Phase(v) => v
                .iter()
                .map(|p| clamp(p.radians() / TAU * bins as f64))
                .collect(),
            Variable::Real(v) => {
                if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::InvalidArgument(format!("non-finite sample {bad}")));
                }
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let width = hi - lo;
                v.iter()
                    .map(|&x| {
                        if width > 0.0 {
                            clamp((x - lo) / width * bins as f64)
                        } else {
                            0
                        }
                    })
                    .collect()
            }
            Variable::Index(v, levels) => {
                if let Some(bad) = v.iter().find(|&&x| x >= levels) {
                    return Err(Error::InvalidArgument(format!(
                        "index {bad} outside 0..{levels}"
                    )));
                }
                v.iter().map(|&x| x * bins / levels).collect()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiEstimate {
    /// Corrected estimate, floored at zero.
    pub bits: f64,
    /// Uncorrected plug-in estimate.
    pub plug_in: f64,
    pub bias_correction: f64,
    pub bins: (usize, usize),
    pub n: usize,
}

/// Plug-in mutual information (bits) of equal-width binned `x` and `y`,
/// minus the Miller–Madow bias `(Bx−1)(By−1)/(2n ln 2)`.
pub fn estimate_mi_binned(
    x: Variable<'_>,
    y: Variable<'_>,
    bins: (usize, usize),
) -> Result<MiEstimate> {
    let (bx, by) = bins;
    if bx == 0 || by == 0 {
        return Err(Error::InvalidArgument("bin counts must be positive".into()));
    }
    let n = x.len();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            n,
            y.len()
        )));
    }
    if n < 10 * bx * by {
        return Err(Error::InvalidArgument(format!(
            "{n} samples undersample a {bx}x{by} histogram (need {})",
            10 * bx * by
        )));
    }

    let xi = x.bin_indices(bx)?;
    let yi = y.bin_indices(by)?;
    let mut hist = JointHistogram::new(bx, by);
    for (&a, &b) in xi.iter().zip(&yi) {
        hist.add(a, b);
    }
    Ok(hist.mutual_information())
}

/// Joint histogram of two binned variables. Shards built over disjoint
/// sample ranges can be merged, so large estimates can be accumulated in
/// parallel without keeping the samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointHistogram {
    bx: usize,
    by: usize,
    counts: Vec<u64>,
    total: u64,
}

impl JointHistogram {
    pub fn new(bx: usize, by: usize) -> Self {
        assert!(bx > 0 && by > 0, "bin counts must be positive");
        JointHistogram {
            bx,
            by,
            counts: vec![0; bx * by],
            total: 0,
        }
    }

    pub fn bins(&self) -> (usize, usize) {
        (self.bx, self.by)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn add(&mut self, x_bin: usize, y_bin: usize) {
        self.counts[x_bin * self.by + y_bin] += 1;
        self.total += 1;
    }

    /// Bins two phases over `[0, 2π)` and records the pair.
    pub fn add_phases(&mut self, x: Phase, y: Phase) {
        let bin = |p: Phase, b: usize| ((p.radians() / TAU * b as f64) as usize).min(b - 1);
        self.add(bin(x, self.bx), bin(y, self.by));
    }

    pub fn merge(&mut self, other: &JointHistogram) {
        assert_eq!(self.bins(), other.bins(), "histogram shapes differ");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }

    /// Plug-in MI with Miller–Madow correction.
    pub fn mutual_information(&self) -> MiEstimate {
        let (bx, by) = (self.bx, self.by);
        let mut mx = vec![0u64; bx];
        let mut my = vec![0u64; by];
        for (row, count_x) in self.counts.chunks(by).zip(mx.iter_mut()) {
            for (&c, count_y) in row.iter().zip(my.iter_mut()) {
                *count_x += c;
                *count_y += c;
            }
        }
        let nf = self.total as f64;
        let mut plug_in = 0.0;
        for (row, &cx) in self.counts.chunks(by).zip(&mx) {
            for (&c, &cy) in row.iter().zip(&my) {
                if c > 0 {
                    let c = c as f64;
                    plug_in += c / nf * (c * nf / (cx as f64 * cy as f64)).log2();
                }
            }
        }
        let bias_correction = if self.total > 0 {
            ((bx - 1) * (by - 1)) as f64 / (2.0 * nf * LN_2)
        } else {
            0.0
        };
        MiEstimate {
            bits: (plug_in - bias_correction).max(0.0),
            plug_in,
            bias_correction,
            bins: (bx, by),
            n: self.total as usize,
        }
    }
}

/// Entropy in bits of `phases` binned into `bins` equal arcs.
pub fn binned_entropy(phases: &[Phase], bins: usize) -> Result<f64> {
    if phases.is_empty() || bins == 0 {
        return Err(Error::InvalidArgument("empty input or zero bins".into()));
    }
    let idx = Variable::Phase(phases).bin_indices(bins)?;
    let mut counts = vec![0u64; bins];
    for i in idx {
        counts[i] += 1;
    }
    let n = phases.len() as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum())
}

/// Fraction of positions where `a` and `b` differ.
pub fn bit_error_rate(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty bit sequences".into()));
    }
    let errors = a.iter().zip(b).filter(|(x, y)| x != y).count();
    Ok(errors as f64 / a.len() as f64)
}
