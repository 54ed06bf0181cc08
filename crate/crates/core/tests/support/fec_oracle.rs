//! Stand-alone model of the key link used as a reference: tap-array
//! encoder, QPSK over wrapped Gaussian phase noise, and a register-exchange
//! Viterbi decoder maximising correlation. Shares no code with the crate.

use std::f64::consts::{FRAC_PI_4, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

const MEMORY: usize = 6;
// Tap on the input delayed by `d` for each generator, d = 0..=6.
const TAPS: [[u8; 7]; 2] = [[1, 1, 1, 1, 0, 0, 1], [1, 0, 1, 1, 0, 1, 1]];

pub struct OracleCode {
    info: usize,
    keep: Vec<bool>,
}

impl OracleCode {
    pub fn new(info: usize, transmitted: usize) -> OracleCode {
        let full = 2 * (info + MEMORY);
        let holes = full - transmitted;
        let mut keep = vec![true; full];
        for j in 0..holes {
            keep[(2 * j + 1) * full / (2 * holes)] = false;
        }
        OracleCode { info, keep }
    }

    pub fn encode(&self, bits: &[u8]) -> Vec<u8> {
        assert_eq!(bits.len(), self.info);
        let mut window = [0u8; 7];
        let mut out = Vec::new();
        for &b in bits.iter().chain([0u8; MEMORY].iter()) {
            window.rotate_right(1);
            window[0] = b;
            for taps in &TAPS {
                let v = taps
                    .iter()
                    .zip(&window)
                    .fold(0, |acc, (t, w)| acc ^ (t & w));
                out.push(v);
            }
        }
        out.into_iter()
            .zip(&self.keep)
            .filter(|(_, &k)| k)
            .map(|(b, _)| b)
            .collect()
    }

    /// `soft[i] > 0` favours a 0 on transmitted bit `i`.
    pub fn decode(&self, soft: &[f64]) -> Vec<u8> {
        let full = self.keep.len();
        let mut values = vec![0.0; full];
        let mut it = soft.iter();
        for (v, &k) in values.iter_mut().zip(&self.keep) {
            if k {
                *v = *it.next().expect("enough soft values");
            }
        }
        assert!(it.next().is_none());

        // State = last six inputs, newest in the lowest bit.
        let states = 1 << MEMORY;
        let mut metric = vec![f64::NEG_INFINITY; states];
        metric[0] = 0.0;
        let mut paths: Vec<Vec<u8>> = vec![Vec::new(); states];
        for t in 0..self.info + MEMORY {
            let mut next_metric = vec![f64::NEG_INFINITY; states];
            let mut next_paths: Vec<Vec<u8>> = vec![Vec::new(); states];
            for s in 0..states {
                if metric[s] == f64::NEG_INFINITY {
                    continue;
                }
                let inputs: &[u8] = if t < self.info { &[0, 1] } else { &[0] };
                for &b in inputs {
                    let mut window = [0u8; 7];
                    window[0] = b;
                    for (d, w) in window.iter_mut().enumerate().skip(1) {
                        *w = ((s >> (d - 1)) & 1) as u8;
                    }
                    let mut gain = metric[s];
                    for (g, taps) in TAPS.iter().enumerate() {
                        let c = taps
                            .iter()
                            .zip(&window)
                            .fold(0, |acc, (t, w)| acc ^ (t & w));
                        let sign = if c == 0 { 1.0 } else { -1.0 };
                        gain += sign * values[2 * t + g];
                    }
                    let ns = ((s << 1) | b as usize) & (states - 1);
                    if gain > next_metric[ns] {
                        next_metric[ns] = gain;
                        let mut p = paths[s].clone();
                        p.push(b);
                        next_paths[ns] = p;
                    }
                }
            }
            metric = next_metric;
            paths = next_paths;
        }
        paths[0][..self.info].to_vec()
    }
}

/// Gray QPSK: 00 → 0, 01 → π/2, 11 → π, 10 → 3π/2.
pub fn qpsk(bits: &[u8]) -> Vec<f64> {
    bits.chunks(2)
        .map(|c| match (c[0], c[1]) {
            (0, 0) => 0.0,
            (0, 1) => PI / 2.0,
            (1, 1) => PI,
            _ => 3.0 * PI / 2.0,
        })
        .collect()
}

/// Correlation soft values per bit: the first bit is 0 on the upper
/// half-plane pair {0, π/2}, the second is 0 on {3π/2, 0}.
pub fn qpsk_soft(theta: &[f64]) -> Vec<f64> {
    theta
        .iter()
        .flat_map(|&t| [(t - FRAC_PI_4).cos(), (t + FRAC_PI_4).cos()])
        .collect()
}

/// Fraction of `trials` QPSK exchanges of `info` key bits and `redundancy`
/// parity bits decoded without error when each phase carries `N(0, std²)`
/// disagreement.
pub fn success_rate(info: usize, redundancy: usize, std: f64, trials: usize, seed: u64) -> f64 {
    let code = OracleCode::new(info, info + redundancy);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, std).unwrap();
    let mut ok = 0;
    for _ in 0..trials {
        let bits: Vec<u8> = (0..info).map(|_| rng.random_range(0..2)).collect();
        let received: Vec<f64> = qpsk(&code.encode(&bits))
            .into_iter()
            .map(|x| x + noise.sample(&mut rng))
            .collect();
        if code.decode(&qpsk_soft(&received)) == bits {
            ok += 1;
        }
    }
    ok as f64 / trials as f64
}
