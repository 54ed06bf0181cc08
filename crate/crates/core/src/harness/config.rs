//! Experiment configuration: a flat `key = value` file (a TOML subset).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::keylink::KeyExchangeParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Uniformity,
    Leakage,
    Exchange,
    Sweep,
    Replay,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Uniformity,
        ExperimentKind::Leakage,
        ExperimentKind::Exchange,
        ExperimentKind::Sweep,
        ExperimentKind::Replay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Uniformity => "uniformity",
            ExperimentKind::Leakage => "leakage",
            ExperimentKind::Exchange => "exchange",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Replay => "replay",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| config_error("kind", format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolChoice {
    Two,
    Four,
}

impl ProtocolChoice {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolChoice::Two => "two",
            ProtocolChoice::Four => "four",
        }
    }
}

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Every recognised key with its default and meaning, in file order.
pub const CONFIG_KEYS: &[(&str, &str, &str)] = &[
    (
        "kind",
        "\"exchange\"",
        "experiment: uniformity | leakage | exchange | sweep | replay",
    ),
    (
        "seed",
        "1",
        "master seed; every random stream derives from it",
    ),
    (
        "k",
        "20",
        "number of RF mirrors (2^k mirror states, at most 30)",
    ),
    ("n", "2", "number of Eve antennas"),
    ("s", "16", "pilot tones averaged per transmission"),
    (
        "snr_db",
        "20.0",
        "per-tone pilot SNR in dB (inf = noiseless)",
    ),
    (
        "los_magnitude",
        "0.0",
        "magnitude of the constant line-of-sight offset",
    ),
    ("m", "2", "bits per PSK symbol"),
    ("l", "128", "key (information) bits per exchange"),
    (
        "r",
        "128",
        "redundancy bits per exchange; l + r must be a multiple of m",
    ),
    (
        "rounds",
        "1000",
        "Monte-Carlo rounds (draws, rounds or exchanges)",
    ),
    (
        "discard_fraction",
        "0.2",
        "replay: fraction of lowest-energy samples dropped",
    ),
    ("protocol", "\"two\"", "key-sharing protocol: two | four"),
    ("output", "\"report.csv\"", "report CSV path"),
    ("significance", "0.01", "Kuiper test significance"),
    (
        "mi_bins",
        "16",
        "bins per axis for mutual-information estimates",
    ),
    ("mi_threshold", "0.02", "leakage pass threshold in bits"),
    (
        "symbol_noise_std",
        "0.0",
        "phase noise (rad) on masked symbols in transit",
    ),
    ("eve_snr_db", "inf", "Eve's per-tone SNR in dB"),
    (
        "internal_offset",
        "0.0",
        "four-antenna wired-phase mismatch αa ⊖ bβ (rad)",
    ),
    (
        "calibration_rounds",
        "16",
        "four-antenna calibration loop pairs",
    ),
    (
        "sweep_snr_db",
        "[5, 10, 15, 20, 25]",
        "sweep: SNR points in dB",
    ),
    ("trace", "(none)", "replay: path of the state,i,q CSV trace"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub k: u32,
    pub n: u16,
    pub s: usize,
    pub snr_db: f64,
    pub los_magnitude: f64,
    pub m: u32,
    pub l: usize,
    pub r: usize,
    pub rounds: u64,
    pub discard_fraction: f64,
    pub protocol: ProtocolChoice,
    pub output: PathBuf,
    pub significance: f64,
    pub mi_bins: usize,
    pub mi_threshold: f64,
    pub symbol_noise_std: f64,
    pub eve_snr_db: f64,
    pub internal_offset: f64,
    pub calibration_rounds: u32,
    pub sweep_snr_db: Vec<f64>,
    pub trace: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::Exchange,
            seed: 1,
            k: 20,
            n: 2,
            s: 16,
            snr_db: 20.0,
            los_magnitude: 0.0,
            m: 2,
            l: 128,
            r: 128,
            rounds: 1000,
            discard_fraction: 0.2,
            protocol: ProtocolChoice::Two,
            output: PathBuf::from("report.csv"),
            significance: 0.01,
            mi_bins: 16,
            mi_threshold: 0.02,
            symbol_noise_std: 0.0,
            eve_snr_db: f64::INFINITY,
            internal_offset: 0.0,
            calibration_rounds: 16,
            sweep_snr_db: vec![5.0, 10.0, 15.0, 20.0, 25.0],
            trace: None,
        }
    }
}

fn as_float(field: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(config_error(
            field,
            format!("expected a number, got {other}"),
        )),
    }
}

fn as_uint(field: &str, v: &Value, max: u64) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 && (*i as u64) <= max => Ok(*i as u64),
        Value::Integer(i) => Err(config_error(field, format!("{i} out of range 0..={max}"))),
        other => Err(config_error(
            field,
            format!("expected an integer, got {other}"),
        )),
    }
}

fn as_str<'a>(field: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| config_error(field, format!("expected a string, got {v}")))
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses and validates config text. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| {
            let msg = e.message().to_string();
            config_error("<file>", msg)
        })?;
        let mut c = ExperimentConfig::default();
        for (key, v) in &table {
            let key = key.as_str();
            match key {
                "kind" => c.kind = as_str(key, v)?.parse()?,
                "seed" => c.seed = as_uint(key, v, i64::MAX as u64)?,
                "k" => c.k = as_uint(key, v, u32::MAX as u64)? as u32,
                "n" => c.n = as_uint(key, v, u16::MAX as u64)? as u16,
                "s" => c.s = as_uint(key, v, u32::MAX as u64)? as usize,
                "snr_db" => c.snr_db = as_float(key, v)?,
                "los_magnitude" => c.los_magnitude = as_float(key, v)?,
                "m" => c.m = as_uint(key, v, 16)? as u32,
                "l" => c.l = as_uint(key, v, u32::MAX as u64)? as usize,
                "r" => c.r = as_uint(key, v, u32::MAX as u64)? as usize,
                "rounds" => c.rounds = as_uint(key, v, i64::MAX as u64)?,
                "discard_fraction" => c.discard_fraction = as_float(key, v)?,
                "protocol" => {
                    c.protocol = match as_str(key, v)? {
                        "two" => ProtocolChoice::Two,
                        "four" => ProtocolChoice::Four,
                        other => {
                            return Err(config_error(
                                key,
                                format!("expected two or four, got `{other}`"),
                            ))
                        }
                    }
                }
                "output" => c.output = PathBuf::from(as_str(key, v)?),
                "significance" => c.significance = as_float(key, v)?,
                "mi_bins" => c.mi_bins = as_uint(key, v, 1 << 12)? as usize,
                "mi_threshold" => c.mi_threshold = as_float(key, v)?,
                "symbol_noise_std" => c.symbol_noise_std = as_float(key, v)?,
                "eve_snr_db" => c.eve_snr_db = as_float(key, v)?,
                "internal_offset" => c.internal_offset = as_float(key, v)?,
                "calibration_rounds" => {
                    c.calibration_rounds = as_uint(key, v, u32::MAX as u64)? as u32
                }
                "sweep_snr_db" => {
                    let arr = v
                        .as_array()
                        .ok_or_else(|| config_error(key, "expected an array of numbers"))?;
                    c.sweep_snr_db = arr
                        .iter()
                        .map(|x| as_float(key, x))
                        .collect::<Result<_>>()?;
                }
                "trace" => c.trace = Some(PathBuf::from(as_str(key, v)?)),
                other => return Err(config_error(other, "unknown key")),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k", self.k as u64),
            ("n", self.n as u64),
            ("s", self.s as u64),
            ("m", self.m as u64),
            ("l", self.l as u64),
            ("rounds", self.rounds),
            ("mi_bins", self.mi_bins as u64),
            ("calibration_rounds", self.calibration_rounds as u64),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(config_error(field, "must be positive"));
            }
        }
        if self.k > crate::environment::MAX_MIRRORS {
            return Err(config_error(
                "k",
                format!("at most {} mirrors", crate::environment::MAX_MIRRORS),
            ));
        }
        if !(0.0..1.0).contains(&self.discard_fraction) {
            return Err(config_error("discard_fraction", "must lie in [0, 1)"));
        }
        if !(self.l + self.r).is_multiple_of(self.m as usize) {
            return Err(config_error("r", "l + r must be divisible by m"));
        }
        self.key_params()?;
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(config_error("significance", "must lie in (0, 1)"));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(config_error("snr_db", "must be a number or inf"));
        }
        if self.eve_snr_db.is_nan() || self.eve_snr_db == f64::NEG_INFINITY {
            return Err(config_error("eve_snr_db", "must be a number or inf"));
        }
        if !(self.los_magnitude.is_finite() && self.los_magnitude >= 0.0) {
            return Err(config_error(
                "los_magnitude",
                "must be finite and non-negative",
            ));
        }
        if !(self.symbol_noise_std.is_finite() && self.symbol_noise_std >= 0.0) {
            return Err(config_error(
                "symbol_noise_std",
                "must be finite and non-negative",
            ));
        }
        if !self.internal_offset.is_finite() {
            return Err(config_error("internal_offset", "must be finite"));
        }
        if self.mi_threshold.is_nan() || self.mi_threshold < 0.0 {
            return Err(config_error("mi_threshold", "must be non-negative"));
        }
        if self.sweep_snr_db.is_empty() || self.sweep_snr_db.iter().any(|x| x.is_nan()) {
            return Err(config_error(
                "sweep_snr_db",
                "needs at least one numeric SNR",
            ));
        }
        Ok(())
    }

    pub fn key_params(&self) -> Result<KeyExchangeParams> {
        KeyExchangeParams::new(self.l, self.r, self.m).map_err(|e| config_error("r", e.to_string()))
    }
}
