//! Key transport over shared phases.
//!
//! The master draws `L` key bits, protects them with a rate-1/2 K=7
//! convolutional code (generators 171/133 octal, zero-terminated and
//! punctured down to `L + r` bits), Gray-maps them onto `2^m`-PSK and rotates
//! symbol `t` by the `t`-th shared phase. The slave derotates with its own
//! copy of the phases and runs a soft-decision Viterbi decoder on the
//! angular distances.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::adversary::eve_demodulate;
use crate::error::{Error, Result};
use crate::phase_math::{circular_distance, Phase};

/// Constraint length of the convolutional code.
pub const CONSTRAINT_LENGTH: usize = 7;
/// Generator polynomials, octal 171 and 133.
pub const GENERATORS: [u32; 2] = [0o171, 0o133];
/// Zero bits appended to flush the encoder.
pub const TAIL_BITS: usize = CONSTRAINT_LENGTH - 1;

const STATES: usize = 1 << TAIL_BITS;

/// Sizes of one key exchange. `L + r = m·N_p` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyExchangeParams {
    info_bits: usize,
    redundancy_bits: usize,
    bits_per_symbol: u32,
}

impl KeyExchangeParams {
    pub fn new(info_bits: usize, redundancy_bits: usize, bits_per_symbol: u32) -> Result<Self> {
        if info_bits == 0 {
            return Err(Error::InvalidArgument("L must be positive".into()));
        }
        if !(1..=16).contains(&bits_per_symbol) {
            return Err(Error::InvalidArgument(format!(
                "m = {bits_per_symbol} outside 1..=16"
            )));
        }
        let coded = info_bits + redundancy_bits;
        if !coded.is_multiple_of(bits_per_symbol as usize) {
            return Err(Error::Framing(format!(
                "L + r = {coded} is not a multiple of m = {bits_per_symbol}"
            )));
        }
        let full = 2 * (info_bits + TAIL_BITS);
        // Puncturing may remove at most a quarter of the terminated output.
        if coded > full || 4 * (full - coded) > full {
            return Err(Error::Framing(format!(
                "L + r = {coded} incompatible with a terminated rate-1/2 code \
                 producing {full} bits (allowed {}..={full})",
                full - full / 4
            )));
        }
        Ok(KeyExchangeParams {
            info_bits,
            redundancy_bits,
            bits_per_symbol,
        })
    }

    pub fn info_bits(&self) -> usize {
        self.info_bits
    }

    pub fn redundancy_bits(&self) -> usize {
        self.redundancy_bits
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    pub fn coded_bits(&self) -> usize {
        self.info_bits + self.redundancy_bits
    }

    /// `N_p`, the number of PSK symbols and shared phases per exchange.
    pub fn symbol_count(&self) -> usize {
        self.coded_bits() / self.bits_per_symbol as usize
    }
}

fn check_m(m: u32) -> Result<usize> {
    if (1..=16).contains(&m) {
        Ok(m as usize)
    } else {
        Err(Error::InvalidArgument(format!("m = {m} outside 1..=16")))
    }
}

fn gray_decode(mut g: u32) -> u32 {
    let mut k = g;
    while g > 0 {
        g >>= 1;
        k ^= g;
    }
    k
}

/// Gray-coded `2^m`-PSK mapping, most significant bit first. For QPSK:
/// `00→0, 01→π/2, 11→π, 10→3π/2`.
pub fn psk_map(bits: &[u8], m: u32) -> Result<Vec<Phase>> {
    let width = check_m(m)?;
    if !bits.len().is_multiple_of(width) {
        return Err(Error::Framing(format!(
            "{} bits do not split into {m}-bit symbols",
            bits.len()
        )));
    }
    let order = 1u64 << m;
    Ok(bits
        .chunks(width)
        .map(|chunk| {
            let g = chunk
                .iter()
                .fold(0u32, |acc, &b| (acc << 1) | (b & 1) as u32);
            Phase::from_fraction(gray_decode(g) as u64, order)
        })
        .collect())
}

/// Nearest-point PSK decision followed by Gray encoding.
pub fn psk_demap(phases: &[Phase], m: u32) -> Result<Vec<u8>> {
    let width = check_m(m)?;
    let order = 1u64 << m;
    let mut bits = Vec::with_capacity(phases.len() * width);
    for p in phases {
        let k = ((p.radians() / TAU * order as f64).round() as u64 % order) as u32;
        let g = k ^ (k >> 1);
        bits.extend((0..width).rev().map(|j| ((g >> j) & 1) as u8));
    }
    Ok(bits)
}

/// `Y = X ⊕ Φ`.
pub fn mask(symbol: Phase, shared: Phase) -> Phase {
    symbol + shared
}

/// `X = Y ⊖ Φ`.
pub fn unmask(received: Phase, shared: Phase) -> Phase {
    received - shared
}

/// Decoder cost of hypothesising a 0 or a 1 for one coded bit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BitCost {
    pub zero: f64,
    pub one: f64,
}

impl BitCost {
    pub fn hard(bit: u8) -> BitCost {
        if bit == 0 {
            BitCost {
                zero: 0.0,
                one: 1.0,
            }
        } else {
            BitCost {
                zero: 1.0,
                one: 0.0,
            }
        }
    }

    fn get(&self, bit: u8) -> f64 {
        if bit == 0 {
            self.zero
        } else {
            self.one
        }
    }
}

/// Max-log bit costs from derotated phases: for every bit position, the
/// smallest squared angular distance to a constellation point carrying a 0
/// and to one carrying a 1.
pub fn soft_bit_costs(received: &[Phase], m: u32) -> Result<Vec<BitCost>> {
    let width = check_m(m)?;
    let order = 1u64 << m;
    let points: Vec<(Phase, u32)> = (0..order)
        .map(|k| (Phase::from_fraction(k, order), (k ^ (k >> 1)) as u32))
        .collect();
    let mut out = Vec::with_capacity(received.len() * width);
    for &r in received {
        let d2: Vec<f64> = points
            .iter()
            .map(|(p, _)| circular_distance(r, *p).powi(2))
            .collect();
        for j in (0..width).rev() {
            let mut cost = BitCost {
                zero: f64::INFINITY,
                one: f64::INFINITY,
            };
            for ((_, label), &d) in points.iter().zip(&d2) {
                if (label >> j) & 1 == 0 {
                    cost.zero = cost.zero.min(d);
                } else {
                    cost.one = cost.one.min(d);
                }
            }
            out.push(cost);
        }
    }
    Ok(out)
}

/// The terminated, punctured (171, 133) convolutional code for one
/// information length.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionalCode {
    info_bits: usize,
    /// Sorted indices of the terminated output that are not transmitted.
    punctured: Vec<usize>,
}

fn parity(x: u32) -> u8 {
    (x.count_ones() & 1) as u8
}

// Output pair and next state for `input` entering `state`.
fn step(state: usize, input: u8) -> ([u8; 2], usize) {
    let reg = ((input as u32) << TAIL_BITS) | state as u32;
    let out = [parity(reg & GENERATORS[0]), parity(reg & GENERATORS[1])];
    (out, (reg >> 1) as usize)
}

impl ConvolutionalCode {
    /// Code delivering exactly `coded_bits` channel bits for `info_bits`
    /// information bits.
    pub fn new(info_bits: usize, coded_bits: usize) -> Result<Self> {
        let full = 2 * (info_bits + TAIL_BITS);
        if coded_bits > full || 4 * (full - coded_bits) > full {
            return Err(Error::Framing(format!(
                "cannot fit {info_bits} bits into {coded_bits} coded bits"
            )));
        }
        let p = full - coded_bits;
        let punctured = (0..p).map(|j| (2 * j + 1) * full / (2 * p)).collect();
        Ok(ConvolutionalCode {
            info_bits,
            punctured,
        })
    }

    pub fn for_params(params: &KeyExchangeParams) -> Self {
        // Params are validated with the same bounds.
        Self::new(params.info_bits(), params.coded_bits()).expect("validated params")
    }

    pub fn info_bits(&self) -> usize {
        self.info_bits
    }

    fn full_len(&self) -> usize {
        2 * (self.info_bits + TAIL_BITS)
    }

    pub fn coded_bits(&self) -> usize {
        self.full_len() - self.punctured.len()
    }

    pub fn encode(&self, bits: &[u8]) -> Result<Vec<u8>> {
        if bits.len() != self.info_bits {
            return Err(Error::Framing(format!(
                "encoder expects {} bits, got {}",
                self.info_bits,
                bits.len()
            )));
        }
        let mut state = 0;
        let mut full = Vec::with_capacity(self.full_len());
        for &b in bits.iter().chain(std::iter::repeat_n(&0u8, TAIL_BITS)) {
            let (out, next) = step(state, b & 1);
            full.extend_from_slice(&out);
            state = next;
        }
        let mut holes = self.punctured.iter().peekable();
        Ok(full
            .into_iter()
            .enumerate()
            .filter(|(i, _)| {
                if holes.peek() == Some(&i) {
                    holes.next();
                    false
                } else {
                    true
                }
            })
            .map(|(_, b)| b)
            .collect())
    }

    /// Viterbi decoding of per-bit costs for the transmitted bits.
    pub fn decode_soft(&self, costs: &[BitCost]) -> Result<Vec<u8>> {
        if costs.len() != self.coded_bits() {
            return Err(Error::Framing(format!(
                "decoder expects {} coded bits, got {}",
                self.coded_bits(),
                costs.len()
            )));
        }
        // Punctured positions carry no evidence.
        let mut full = Vec::with_capacity(self.full_len());
        let mut it = costs.iter();
        let mut holes = self.punctured.iter().peekable();
        for i in 0..self.full_len() {
            if holes.peek() == Some(&&i) {
                holes.next();
                full.push(BitCost::default());
            } else {
                full.push(*it.next().expect("length checked"));
            }
        }

        let steps = self.info_bits + TAIL_BITS;
        let mut metric = [f64::INFINITY; STATES];
        metric[0] = 0.0;
        let mut survivors: Vec<[u8; STATES]> = Vec::with_capacity(steps);
        for t in 0..steps {
            let (c0, c1) = (full[2 * t], full[2 * t + 1]);
            let mut next = [f64::INFINITY; STATES];
            let mut from = [0u8; STATES];
            let inputs: &[u8] = if t < self.info_bits { &[0, 1] } else { &[0] };
            for (s, &m) in metric.iter().enumerate() {
                if !m.is_finite() {
                    continue;
                }
                for &b in inputs {
                    let (out, ns) = step(s, b);
                    let cand = m + c0.get(out[0]) + c1.get(out[1]);
                    if cand < next[ns] {
                        next[ns] = cand;
                        from[ns] = s as u8;
                    }
                }
            }
            metric = next;
            survivors.push(from);
        }

        let mut state = 0usize;
        let mut decoded = vec![0u8; steps];
        for t in (0..steps).rev() {
            decoded[t] = (state >> (TAIL_BITS - 1)) as u8;
            state = survivors[t][state] as usize;
        }
        decoded.truncate(self.info_bits);
        Ok(decoded)
    }

    pub fn decode_hard(&self, bits: &[u8]) -> Result<Vec<u8>> {
        let costs: Vec<BitCost> = bits.iter().map(|&b| BitCost::hard(b)).collect();
        self.decode_soft(&costs)
    }
}

/// Encodes `L` information bits into `L + r` coded bits.
pub fn fec_encode(params: &KeyExchangeParams, bits: &[u8]) -> Result<Vec<u8>> {
    ConvolutionalCode::for_params(params).encode(bits)
}

/// Soft-decision decode of derotated symbol phases back to `L` bits.
pub fn fec_decode(params: &KeyExchangeParams, received: &[Phase]) -> Result<Vec<u8>> {
    if received.len() != params.symbol_count() {
        return Err(Error::Framing(format!(
            "expected {} symbols, got {}",
            params.symbol_count(),
            received.len()
        )));
    }
    let costs = soft_bit_costs(received, params.bits_per_symbol())?;
    ConvolutionalCode::for_params(params).decode_soft(&costs)
}

/// Hard-decision fallback.
pub fn fec_decode_hard(params: &KeyExchangeParams, bits: &[u8]) -> Result<Vec<u8>> {
    ConvolutionalCode::for_params(params).decode_hard(bits)
}

/// Aligned shared phases awaiting use. Each phase leaves the pool once.
#[derive(Debug, Clone, Default)]
pub struct KeyMaterial {
    master: Vec<Phase>,
    slave: Vec<Phase>,
    cursor: usize,
}

impl KeyMaterial {
    pub fn new(master: Vec<Phase>, slave: Vec<Phase>) -> Result<Self> {
        if master.len() != slave.len() {
            return Err(Error::InvalidArgument(format!(
                "unaligned phase streams: {} vs {}",
                master.len(),
                slave.len()
            )));
        }
        Ok(KeyMaterial {
            master,
            slave,
            cursor: 0,
        })
    }

    pub fn remaining(&self) -> usize {
        self.master.len() - self.cursor
    }

    /// Hands out the next `n` phases of each stream.
    pub fn take(&mut self, n: usize) -> Result<(Vec<Phase>, Vec<Phase>)> {
        if n > self.remaining() {
            return Err(Error::InsufficientKeyMaterial {
                needed: n,
                available: self.remaining(),
            });
        }
        let range = self.cursor..self.cursor + n;
        self.cursor += n;
        Ok((
            self.master[range.clone()].to_vec(),
            self.slave[range].to_vec(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyOutcome {
    pub master_bits: Vec<u8>,
    pub slave_bits: Vec<u8>,
    pub agreed: bool,
    pub eve_bits: Vec<u8>,
    /// What went over the air, after channel noise.
    pub masked_symbols: Vec<Phase>,
    pub phases_consumed: usize,
}

/// One end-to-end exchange.
///
/// The master's phases mask the symbols; `symbol_noise_std` radians of
/// wrapped Gaussian phase noise hit each masked symbol in transit; the slave
/// derotates with its phases and soft-decodes. Eve sees the noisy masked
/// symbols and decodes them without a key.
pub fn exchange_key<R: Rng + ?Sized>(
    params: &KeyExchangeParams,
    master_phases: Vec<Phase>,
    slave_phases: Vec<Phase>,
    symbol_noise_std: f64,
    rng: &mut R,
) -> Result<KeyOutcome> {
    let np = params.symbol_count();
    for len in [master_phases.len(), slave_phases.len()] {
        if len != np {
            return Err(Error::InsufficientKeyMaterial {
                needed: np,
                available: len,
            });
        }
    }
    let noise = if symbol_noise_std > 0.0 {
        Some(
            Normal::new(0.0, symbol_noise_std)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?,
        )
    } else if symbol_noise_std == 0.0 {
        None
    } else {
        return Err(Error::InvalidArgument(format!(
            "symbol noise std must be non-negative, got {symbol_noise_std}"
        )));
    };

    let m = params.bits_per_symbol();
    let code = ConvolutionalCode::for_params(params);
    let master_bits: Vec<u8> = (0..params.info_bits())
        .map(|_| rng.random_range(0..2))
        .collect();
    let codeword = code.encode(&master_bits)?;
    let symbols = psk_map(&codeword, m)?;

    let masked_symbols: Vec<Phase> = symbols
        .iter()
        .zip(&master_phases)
        .map(|(&x, &phi)| {
            let y = mask(x, phi);
            match &noise {
                Some(n) => Phase::wrap_finite(y.radians() + n.sample(rng)),
                None => y,
            }
        })
        .collect();

    let derotated: Vec<Phase> = masked_symbols
        .iter()
        .zip(&slave_phases)
        .map(|(&y, &phi)| unmask(y, phi))
        .collect();
    let slave_bits = code.decode_soft(&soft_bit_costs(&derotated, m)?)?;

    let eve_coded = eve_demodulate(&masked_symbols, &[], m)?;
    let eve_bits = code.decode_hard(&eve_coded)?;

    Ok(KeyOutcome {
        agreed: slave_bits == master_bits,
        master_bits,
        slave_bits,
        eve_bits,
        masked_symbols,
        phases_consumed: np,
    })
}
