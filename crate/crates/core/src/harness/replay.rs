//! Measured I/Q trace ingestion.
//!
//! Traces are CSV files with header `state,i,q`. Ingestion removes the
//! empirical complex mean (the constant line-of-sight component), drops the
//! lowest-energy fraction of samples, and keeps the phases of the rest.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::environment::keyed_rng;
use crate::error::{Error, Result};
use crate::phase_math::Phase;

/// Smallest trace accepted by [`replay_ingest`].
pub const MIN_TRACE_RECORDS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqRecord {
    pub state: String,
    pub i: f64,
    pub q: f64,
}

impl IqRecord {
    pub fn sample(&self) -> Complex64 {
        Complex64::new(self.i, self.q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqTrace {
    pub records: Vec<IqRecord>,
    pub source: String,
}

impl IqTrace {
    pub fn from_reader<R: Read>(reader: R, source: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["state", "i", "q"] {
            return Err(Error::InvalidArgument(format!(
                "trace header must be `state,i,q`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let records = rdr.deserialize().collect::<Result<Vec<IqRecord>, _>>()?;
        Ok(IqTrace {
            records,
            source: source.into(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file, path.display().to_string())
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.to_writer(std::fs::File::create(path)?)
    }
}

/// Trace of unit-power Rayleigh-faded samples (uniform phase) offset by
/// `bias`, one mirror state per record.
pub fn synthetic_trace(seed: u64, records: usize, bias: Complex64) -> IqTrace {
    let mut rng = keyed_rng(seed, 0x7ace, 0);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let records = (0..records)
        .map(|k| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = Complex64::new(re, im) * scale + bias;
            IqRecord {
                state: k.to_string(),
                i: z.re,
                q: z.im,
            }
        })
        .collect();
    IqTrace {
        records,
        source: format!("synthetic(seed={seed}, bias={bias})"),
    }
}

/// Number of samples kept out of `n` when discarding `fraction`.
pub fn survivor_count(n: usize, fraction: f64) -> usize {
    // Guard against 0.8·N landing a hair above an integer.
    (((1.0 - fraction) * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Mean removal, then low-energy discard, then phase extraction.
///
/// Survivors keep their input order. Ties in magnitude are broken by input
/// order.
pub fn replay_ingest(trace: &IqTrace, discard_fraction: f64) -> Result<Vec<Phase>> {
    let n = trace.records.len();
    if n < MIN_TRACE_RECORDS {
        return Err(Error::InsufficientSamples {
            needed: MIN_TRACE_RECORDS,
            got: n,
        });
    }
    if !(0.0..1.0).contains(&discard_fraction) {
        return Err(Error::InvalidArgument(format!(
            "discard fraction {discard_fraction} outside [0, 1)"
        )));
    }
    let samples: Vec<Complex64> = trace.records.iter().map(IqRecord::sample).collect();
    if samples.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidArgument(
            "trace contains non-finite samples".into(),
        ));
    }

    let mean = samples.iter().sum::<Complex64>() / n as f64;
    let centred: Vec<Complex64> = samples.iter().map(|z| z - mean).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| centred[a].norm().total_cmp(&centred[b].norm()));
    let dropped = n - survivor_count(n, discard_fraction);
    let mut keep = vec![true; n];
    for &i in &order[..dropped] {
        keep[i] = false;
    }

    Ok(centred
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(z, _)| Phase::of_complex(*z))
        .collect())
}
