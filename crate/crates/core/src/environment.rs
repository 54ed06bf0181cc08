//! Simulated reciprocal radio environment.
//!
//! A [`ChannelRealization`] assigns every over-the-air link an independent
//! uniform phase per mirror state. Phases are derived on demand from a keyed
//! ChaCha stream `(seed, state, link)`, so the table never has to be
//! materialized and two realizations built from the same seed agree bit for
//! bit. Links are keyed on unordered endpoint pairs, which makes reciprocity
//! hold by construction.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::phase_math::{complex_mean_phase, Phase};

/// Largest supported mirror count.
pub const MAX_MIRRORS: u32 = 30;

// Key domains for the derived ChaCha streams.
const DOMAIN_LINK: u64 = 1;
const DOMAIN_CONSTANTS: u64 = 2;
const DOMAIN_NOISE: u64 = 3;

// Stream slot used for links that do not depend on the mirror state.
const STATE_FREE: u64 = u32::MAX as u64;

/// Deterministic generator for `(seed, domain, stream)`.
///
/// Distinct triples yield independent ChaCha8 streams.
pub fn keyed_rng(seed: u64, domain: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Noise stream for Monte-Carlo round `round` of an experiment seeded with
/// `seed`. Rounds never share generator state.
pub fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    keyed_rng(seed, DOMAIN_NOISE, round)
}

/// Uniform phase drawn from `rng`.
pub fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> Phase {
    Phase::wrap_finite(rng.random::<f64>() * TAU)
}

/// One of the `2^K` configurations of Alice's RF mirrors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MirrorState(pub u32);

impl MirrorState {
    /// The reference state `i0`.
    pub const REFERENCE: MirrorState = MirrorState(0);

    pub fn index(self) -> u32 {
        self.0
    }
}

impl fmt::Display for MirrorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Physical antennas. Alice owns `a` (mirrored) and `α`; Bob owns `b` and
/// `β`; Eve has `n` receive antennas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Antenna {
    A,
    Alpha,
    B,
    Beta,
    Eve(u16),
}

impl Antenna {
    pub fn device(self) -> Device {
        match self {
            Antenna::A | Antenna::Alpha => Device::Alice,
            Antenna::B | Antenna::Beta => Device::Bob,
            Antenna::Eve(k) => Device::Eve(k),
        }
    }

    fn is_alice(self) -> bool {
        matches!(self, Antenna::A | Antenna::Alpha)
    }
}

impl fmt::Display for Antenna {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Antenna::A => f.write_str("a"),
            Antenna::Alpha => f.write_str("alpha"),
            Antenna::B => f.write_str("b"),
            Antenna::Beta => f.write_str("beta"),
            Antenna::Eve(k) => write!(f, "e{}", k + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Device {
    Alice,
    Bob,
    Eve(u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    OverAir,
    InternalWired,
}

/// A directed transmission path `from → to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkId {
    pub from: Antenna,
    pub to: Antenna,
}

impl LinkId {
    pub fn new(from: Antenna, to: Antenna) -> LinkId {
        LinkId { from, to }
    }

    pub fn reversed(self) -> LinkId {
        LinkId::new(self.to, self.from)
    }

    /// Kind of the link, or `None` for pairs that have no link at all.
    pub fn kind(self) -> Option<LinkKind> {
        use Antenna::*;
        let (u, v) = self.unordered();
        match (u, v) {
            (A, B) | (Alpha, B) | (A, Beta) => Some(LinkKind::OverAir),
            (A, Alpha) | (B, Beta) => Some(LinkKind::InternalWired),
            (A | Alpha | B | Beta, Eve(_)) => Some(LinkKind::OverAir),
            _ => None,
        }
    }

    fn unordered(self) -> (Antenna, Antenna) {
        if self.from <= self.to {
            (self.from, self.to)
        } else {
            (self.to, self.from)
        }
    }

    /// Whether the link's phase changes with Alice's mirror state. Every
    /// over-air link with an Alice endpoint does; Bob-to-Eve links and the
    /// wired links do not.
    pub fn depends_on_state(self) -> bool {
        self.kind() == Some(LinkKind::OverAir) && (self.from.is_alice() || self.to.is_alice())
    }

    // Stable 24-bit code of the unordered pair.
    fn code(self) -> u64 {
        let (u, v) = self.unordered();
        let tag = |a: Antenna| -> u64 {
            match a {
                Antenna::A => 0,
                Antenna::Alpha => 1,
                Antenna::B => 2,
                Antenna::Beta => 3,
                Antenna::Eve(k) => 4 + k as u64,
            }
        };
        (tag(u) << 17) | tag(v)
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

/// Constant transmit/receive chain phases of one device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainPhases {
    pub transmit: Phase,
    pub receive: Phase,
}

/// Pilot layout: `S` tones with ±1 amplitudes, observed at `snr_db`.
///
/// `snr_db` is the ratio of unit signal power to the noise variance of each
/// quadrature component, so at high SNR the per-tone phase error has
/// standard deviation `10^(-snr_db/20)` radians. `f64::INFINITY` disables
/// noise exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSpec {
    signs: Vec<f64>,
    pub snr_db: f64,
}

impl PilotSpec {
    /// `tone_count` tones with alternating +1/−1 amplitudes.
    pub fn new(tone_count: usize, snr_db: f64) -> Result<PilotSpec> {
        let signs = (0..tone_count)
            .map(|l| if l % 2 == 0 { 1 } else { -1 })
            .collect();
        PilotSpec::with_signs(signs, snr_db)
    }

    pub fn with_signs(signs: Vec<i8>, snr_db: f64) -> Result<PilotSpec> {
        if signs.is_empty() {
            return Err(Error::InvalidArgument(
                "pilot needs at least one tone".into(),
            ));
        }
        if let Some(s) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(format!("pilot sign {s} is not ±1")));
        }
        if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument(format!("invalid snr_db {snr_db}")));
        }
        Ok(PilotSpec {
            signs: signs.into_iter().map(f64::from).collect(),
            snr_db,
        })
    }

    pub fn noiseless(tone_count: usize) -> Result<PilotSpec> {
        PilotSpec::new(tone_count, f64::INFINITY)
    }

    pub fn tone_count(&self) -> usize {
        self.signs.len()
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db == f64::INFINITY
    }

    /// Per-quadrature noise standard deviation.
    pub fn noise_sigma(&self) -> f64 {
        if self.is_noiseless() {
            0.0
        } else {
            10f64.powf(-self.snr_db / 20.0)
        }
    }

    /// Same tones at a different SNR.
    pub fn at_snr(&self, snr_db: f64) -> PilotSpec {
        PilotSpec {
            signs: self.signs.clone(),
            snr_db,
        }
    }

    /// Undoes the pilot signs and returns the phase of the coherent average.
    pub fn estimate_phase(&self, samples: &[Complex64]) -> Result<Phase> {
        if samples.len() != self.signs.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} pilot samples, got {}",
                self.signs.len(),
                samples.len()
            )));
        }
        let despread: Vec<Complex64> = samples
            .iter()
            .zip(&self.signs)
            .map(|(z, s)| z * s)
            .collect();
        complex_mean_phase(&despread)
    }
}

/// One draw of the environment: link phases for every mirror state, wired
/// phases, chain phases and the LOS offset.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    seed: u64,
    mirror_count: u32,
    eve_antennas: u16,
    alpha_a: Phase,
    b_beta: Phase,
    alice_chain: ChainPhases,
    bob_chain: ChainPhases,
    eve_chain: Vec<ChainPhases>,
    los_bias: Complex64,
}

/// Draws a realization for `mirror_count` mirrors and `eve_antennas`
/// eavesdropper antennas.
///
/// Wired phases satisfy `αa = bβ`; see
/// [`ChannelRealization::with_internal_offset`] to break that.
pub fn draw_realization(
    seed: u64,
    mirror_count: u32,
    eve_antennas: u16,
    los_magnitude: f64,
) -> Result<ChannelRealization> {
    if mirror_count == 0 {
        return Err(Error::InvalidArgument(
            "mirror count must be at least 1".into(),
        ));
    }
    if mirror_count > MAX_MIRRORS {
        return Err(Error::Capacity(mirror_count));
    }
    if !(los_magnitude >= 0.0 && los_magnitude.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "LOS magnitude must be finite and non-negative, got {los_magnitude}"
        )));
    }

    let mut rng = keyed_rng(seed, DOMAIN_CONSTANTS, 0);
    let chain = |rng: &mut ChaCha8Rng| ChainPhases {
        transmit: uniform_phase(rng),
        receive: uniform_phase(rng),
    };
    let alice_chain = chain(&mut rng);
    let bob_chain = chain(&mut rng);
    let internal = uniform_phase(&mut rng);
    let los_angle = uniform_phase(&mut rng);
    let eve_chain = (0..eve_antennas).map(|_| chain(&mut rng)).collect();

    Ok(ChannelRealization {
        seed,
        mirror_count,
        eve_antennas,
        alpha_a: internal,
        b_beta: internal,
        alice_chain,
        bob_chain,
        eve_chain,
        los_bias: Complex64::from_polar(los_magnitude, los_angle.radians()),
    })
}

impl ChannelRealization {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mirror_count(&self) -> u32 {
        self.mirror_count
    }

    pub fn state_count(&self) -> u64 {
        1u64 << self.mirror_count
    }

    pub fn eve_antennas(&self) -> u16 {
        self.eve_antennas
    }

    pub fn los_bias(&self) -> Complex64 {
        self.los_bias
    }

    /// Wired phase `αa` on Alice's side.
    pub fn alpha_a(&self) -> Phase {
        self.alpha_a
    }

    /// Wired phase `bβ` on Bob's side.
    pub fn b_beta(&self) -> Phase {
        self.b_beta
    }

    pub fn chain(&self, device: Device) -> Option<ChainPhases> {
        match device {
            Device::Alice => Some(self.alice_chain),
            Device::Bob => Some(self.bob_chain),
            Device::Eve(k) => self.eve_chain.get(k as usize).copied(),
        }
    }

    /// Replaces all chain phases while keeping every link phase.
    pub fn with_chain_phases(
        mut self,
        alice: ChainPhases,
        bob: ChainPhases,
        eve: Vec<ChainPhases>,
    ) -> Result<Self> {
        if eve.len() != self.eve_antennas as usize {
            return Err(Error::InvalidArgument(format!(
                "expected {} Eve chain entries, got {}",
                self.eve_antennas,
                eve.len()
            )));
        }
        self.alice_chain = alice;
        self.bob_chain = bob;
        self.eve_chain = eve;
        Ok(self)
    }

    /// Sets `αa = bβ ⊕ offset`, modelling an uncalibrated hardware mismatch.
    pub fn with_internal_offset(mut self, offset: Phase) -> Self {
        self.alpha_a = self.b_beta + offset;
        self
    }

    pub fn with_los_bias(mut self, bias: Complex64) -> Self {
        self.los_bias = bias;
        self
    }

    pub fn check_state(&self, state: MirrorState) -> Result<()> {
        if (state.0 as u64) < self.state_count() {
            Ok(())
        } else {
            Err(Error::StateOutOfRange(state.0))
        }
    }

    fn check_link(&self, link: LinkId) -> Result<LinkKind> {
        let eve_ok = |a: Antenna| match a {
            Antenna::Eve(k) => k < self.eve_antennas,
            _ => true,
        };
        match link.kind() {
            Some(kind) if eve_ok(link.from) && eve_ok(link.to) => Ok(kind),
            _ => Err(Error::InvalidLink(link)),
        }
    }

    /// Ground-truth channel phase of `link` at `state`, excluding chain
    /// phases, LOS and noise. Protocol parties never call this.
    pub fn oracle_link_phase(&self, link: LinkId, state: MirrorState) -> Result<Phase> {
        let kind = self.check_link(link)?;
        self.check_state(state)?;
        Ok(match kind {
            LinkKind::InternalWired => {
                if link.from.device() == Device::Alice {
                    self.alpha_a
                } else {
                    self.b_beta
                }
            }
            LinkKind::OverAir => {
                let slot = if link.depends_on_state() {
                    state.0 as u64
                } else {
                    STATE_FREE
                };
                let mut rng = keyed_rng(self.seed, DOMAIN_LINK, (slot << 24) | link.code());
                uniform_phase(&mut rng)
            }
        })
    }

    /// Received pilot samples for one transmission over `link` at `state`.
    ///
    /// Tone `l` is `s_l·e^{j(link ⊕ tx ⊕ rx ⊕ extra)} + los + w_l`, where the
    /// LOS term applies to over-air links only and `w_l` is drawn from `rng`.
    /// `extra_phase` carries phases injected by the protocol.
    pub fn observe_pilot<R: Rng + ?Sized>(
        &self,
        link: LinkId,
        state: MirrorState,
        pilot: &PilotSpec,
        extra_phase: Phase,
        rng: &mut R,
    ) -> Result<Vec<Complex64>> {
        let kind = self.check_link(link)?;
        let tx = self
            .chain(link.from.device())
            .ok_or(Error::InvalidLink(link))?
            .transmit;
        let rx = self
            .chain(link.to.device())
            .ok_or(Error::InvalidLink(link))?
            .receive;
        let total = self.oracle_link_phase(link, state)? + tx + rx + extra_phase;
        let carrier = total.phasor();
        let los = if kind == LinkKind::OverAir {
            self.los_bias
        } else {
            Complex64::new(0.0, 0.0)
        };
        let sigma = pilot.noise_sigma();

        Ok(pilot
            .signs()
            .iter()
            .map(|&s| {
                let mut z = carrier * s + los;
                if sigma > 0.0 {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    z += Complex64::new(re, im) * sigma;
                }
                z
            })
            .collect())
    }

    /// Observes a pilot and returns the receiver's averaged phase estimate.
    pub fn measure_phase<R: Rng + ?Sized>(
        &self,
        link: LinkId,
        state: MirrorState,
        pilot: &PilotSpec,
        extra_phase: Phase,
        rng: &mut R,
    ) -> Result<Phase> {
        let samples = self.observe_pilot(link, state, pilot, extra_phase, rng)?;
        pilot.estimate_phase(&samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_math::circular_distance;
    use std::f64::consts::PI;

    const AB: LinkId = LinkId {
        from: Antenna::A,
        to: Antenna::B,
    };

    #[test]
    fn reciprocity_by_construction() {
        let env = draw_realization(7, 4, 2, 0.0).unwrap();
        let s = MirrorState(3);
        assert_eq!(
            env.oracle_link_phase(AB, s).unwrap(),
            env.oracle_link_phase(AB.reversed(), s).unwrap()
        );
    }

    #[test]
    fn same_seed_same_realization() {
        let a = draw_realization(7, 4, 2, 0.0).unwrap();
        let b = draw_realization(7, 4, 2, 0.0).unwrap();
        assert_eq!(a, b);
        for s in 0..16 {
            for link in [
                AB,
                LinkId::new(Antenna::Alpha, Antenna::B),
                LinkId::new(Antenna::Beta, Antenna::A),
                LinkId::new(Antenna::A, Antenna::Eve(1)),
            ] {
                assert_eq!(
                    a.oracle_link_phase(link, MirrorState(s)).unwrap(),
                    b.oracle_link_phase(link, MirrorState(s)).unwrap()
                );
            }
        }
        let c = draw_realization(8, 4, 2, 0.0).unwrap();
        assert_ne!(
            a.oracle_link_phase(AB, MirrorState(1)).unwrap(),
            c.oracle_link_phase(AB, MirrorState(1)).unwrap()
        );
    }

    #[test]
    fn state_independent_links() {
        let env = draw_realization(11, 6, 2, 0.0).unwrap();
        let wired = LinkId::new(Antenna::Alpha, Antenna::A);
        let be = LinkId::new(Antenna::B, Antenna::Eve(0));
        let beta_e = LinkId::new(Antenna::Beta, Antenna::Eve(1));
        let first = |l| env.oracle_link_phase(l, MirrorState(0)).unwrap();
        for s in 1..64 {
            let s = MirrorState(s);
            assert_eq!(env.oracle_link_phase(wired, s).unwrap(), first(wired));
            assert_eq!(env.oracle_link_phase(be, s).unwrap(), first(be));
            assert_eq!(env.oracle_link_phase(beta_e, s).unwrap(), first(beta_e));
        }
        // Alice-side links move with the mirrors.
        assert_ne!(
            env.oracle_link_phase(AB, MirrorState(1)).unwrap(),
            env.oracle_link_phase(AB, MirrorState(2)).unwrap()
        );
    }

    #[test]
    fn capacity_and_argument_errors() {
        assert!(matches!(
            draw_realization(1, 31, 0, 0.0),
            Err(Error::Capacity(31))
        ));
        assert!(draw_realization(1, 30, 0, 0.0).is_ok());
        assert!(draw_realization(1, 0, 0, 0.0).is_err());
        assert!(draw_realization(1, 3, 0, -1.0).is_err());
    }

    #[test]
    fn invalid_links_rejected() {
        let env = draw_realization(1, 3, 1, 0.0).unwrap();
        let pilot = PilotSpec::noiseless(4).unwrap();
        let mut rng = round_rng(1, 0);
        for link in [
            LinkId::new(Antenna::Alpha, Antenna::Beta),
            LinkId::new(Antenna::A, Antenna::A),
            LinkId::new(Antenna::Eve(0), Antenna::Eve(0)),
            LinkId::new(Antenna::A, Antenna::Eve(1)),
        ] {
            assert!(matches!(
                env.oracle_link_phase(link, MirrorState(0)),
                Err(Error::InvalidLink(_))
            ));
            assert!(env
                .observe_pilot(link, MirrorState(0), &pilot, Phase::ZERO, &mut rng)
                .is_err());
        }
        assert!(matches!(
            env.oracle_link_phase(AB, MirrorState(8)),
            Err(Error::StateOutOfRange(8))
        ));
    }

    #[test]
    fn noiseless_pilot_carries_link_and_chain_phase() {
        let env = draw_realization(5, 3, 1, 0.0).unwrap();
        let pilot = PilotSpec::with_signs(vec![1, 1, -1, 1], f64::INFINITY).unwrap();
        let mut rng = round_rng(5, 0);
        let s = MirrorState(2);
        let samples = env
            .observe_pilot(AB, s, &pilot, Phase::ZERO, &mut rng)
            .unwrap();
        let expected = env.oracle_link_phase(AB, s).unwrap()
            + env.chain(Device::Alice).unwrap().transmit
            + env.chain(Device::Bob).unwrap().receive;
        for (l, z) in samples.iter().enumerate() {
            let arg = Phase::of_complex(*z);
            if l == 2 {
                let flipped = expected + Phase::wrap(PI).unwrap();
                assert!(circular_distance(arg, flipped) < 1e-12);
            } else {
                assert!(circular_distance(arg, expected) < 1e-12);
            }
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn extra_phase_is_added() {
        let env = draw_realization(5, 3, 1, 0.0).unwrap();
        let pilot = PilotSpec::noiseless(2).unwrap();
        let mut rng = round_rng(5, 0);
        let extra = Phase::wrap(1.25).unwrap();
        let base = env
            .measure_phase(AB, MirrorState(1), &pilot, Phase::ZERO, &mut rng)
            .unwrap();
        let shifted = env
            .measure_phase(AB, MirrorState(1), &pilot, extra, &mut rng)
            .unwrap();
        assert!(circular_distance(shifted - base, extra) < 1e-12);
    }

    #[test]
    fn los_applies_to_over_air_only() {
        let bias = Complex64::new(0.5, 0.0);
        let env = draw_realization(5, 3, 0, 0.0).unwrap().with_los_bias(bias);
        let pilot = PilotSpec::noiseless(1).unwrap();
        let mut rng = round_rng(5, 0);
        let wired = LinkId::new(Antenna::Alpha, Antenna::A);
        let z = env
            .observe_pilot(wired, MirrorState(0), &pilot, Phase::ZERO, &mut rng)
            .unwrap()[0];
        assert!((z.norm() - 1.0).abs() < 1e-12);
        let z = env
            .observe_pilot(AB, MirrorState(0), &pilot, Phase::ZERO, &mut rng)
            .unwrap()[0];
        let clean = (env.oracle_link_phase(AB, MirrorState(0)).unwrap()
            + env.chain(Device::Alice).unwrap().transmit
            + env.chain(Device::Bob).unwrap().receive)
            .phasor();
        assert!((z - clean - bias).norm() < 1e-12);
    }

    #[test]
    fn pilot_spec_validation() {
        assert!(PilotSpec::with_signs(vec![], 10.0).is_err());
        assert!(PilotSpec::with_signs(vec![1, 0], 10.0).is_err());
        assert!(PilotSpec::with_signs(vec![1], f64::NAN).is_err());
        let p = PilotSpec::new(5, 20.0).unwrap();
        assert_eq!(p.tone_count(), 5);
        assert_eq!(p.signs(), &[1.0, -1.0, 1.0, -1.0, 1.0]);
        assert!((p.noise_sigma() - 0.1).abs() < 1e-15);
        assert_eq!(PilotSpec::noiseless(3).unwrap().noise_sigma(), 0.0);
    }

    #[test]
    fn adjacent_states_uncorrelated() {
        let env = draw_realization(99, 14, 0, 0.0).unwrap();
        let m = 10_000u32;
        let corr: Complex64 = (0..m)
            .map(|i| {
                let p = env.oracle_link_phase(AB, MirrorState(i)).unwrap();
                let q = env.oracle_link_phase(AB, MirrorState(i + 1)).unwrap();
                p.phasor() * q.phasor().conj()
            })
            .sum::<Complex64>()
            / m as f64;
        assert!(
            corr.norm() < 3.0 / (m as f64).sqrt(),
            "corr {}",
            corr.norm()
        );
    }

    #[test]
    fn per_tone_phase_noise_matches_model() {
        // Small-angle model: std ≈ 10^(-s/20) at s = 20 dB.
        let env = draw_realization(3, 2, 0, 0.0).unwrap();
        let pilot = PilotSpec::new(1, 20.0).unwrap();
        let truth = env.oracle_link_phase(AB, MirrorState(1)).unwrap()
            + env.chain(Device::Alice).unwrap().transmit
            + env.chain(Device::Bob).unwrap().receive;
        let mut rng = round_rng(3, 7);
        let n = 20_000;
        let var = (0..n)
            .map(|_| {
                let est = env
                    .measure_phase(AB, MirrorState(1), &pilot, Phase::ZERO, &mut rng)
                    .unwrap();
                (est - truth).signed().powi(2)
            })
            .sum::<f64>()
            / n as f64;
        let std = var.sqrt();
        assert!((std - 0.1).abs() < 0.015, "std {std}");
    }
}
