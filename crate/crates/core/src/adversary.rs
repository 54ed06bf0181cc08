//! Passive multi-antenna eavesdropper.
//!
//! Eve knows the protocol, listens to every over-air hop on each of her `n`
//! antennas, averages the pilot tones exactly as the legitimate receivers
//! do, and may try to solve for the shared phase.

use rand::Rng;

use crate::environment::{Antenna, ChannelRealization, LinkId, MirrorState};
use crate::error::{Error, Result};
use crate::keylink::psk_demap;
use crate::phase_math::Phase;
use crate::transcript::{Protocol, Transcript};

/// One averaged phase Eve recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveObservation {
    pub transmitter: Antenna,
    pub state: MirrorState,
    /// Position of the hop in the round's transcript.
    pub index: usize,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EveObservationSet {
    pub protocol: Protocol,
    /// `per_antenna[k]` holds the four observations of antenna `e_{k+1}`.
    pub per_antenna: Vec<Vec<EveObservation>>,
}

impl EveObservationSet {
    pub fn antenna_count(&self) -> usize {
        self.per_antenna.len()
    }

    /// Observed phases of antenna `k` in transcript order.
    pub fn phases(&self, k: usize) -> Vec<Phase> {
        self.per_antenna[k].iter().map(|o| o.phase).collect()
    }

    /// Every single observation plus every pairwise difference across all
    /// antennas, labelled. These are the quantities a leakage estimate has
    /// to clear.
    pub fn features(&self) -> Vec<(String, Phase)> {
        let flat: Vec<(String, Phase)> = self
            .per_antenna
            .iter()
            .enumerate()
            .flat_map(|(k, obs)| {
                obs.iter()
                    .map(move |o| (format!("e{}.{}", k + 1, o.index + 1), o.phase))
            })
            .collect();
        let mut out = flat.clone();
        for i in 0..flat.len() {
            for j in i + 1..flat.len() {
                out.push((
                    format!("{}-{}", flat[j].0, flat[i].0),
                    flat[j].1 - flat[i].1,
                ));
            }
        }
        out
    }

    /// Eve's best imitation of the legitimate computation on antenna `k`:
    /// `ae^i ⊖ ae^{i0}` for the two-antenna protocol and `(ii) ⊖ (i)` for
    /// the four-antenna one.
    pub fn rotation_guess(&self, k: usize) -> Phase {
        let obs = &self.per_antenna[k];
        obs[1].phase - obs[0].phase
    }
}

/// Eve's view of one protocol round.
///
/// Each hop is observed on `transmitter → e_k` at the hop's mirror state with
/// the hop's injected phase, using the transcript's pilot at `eve_snr_db`
/// (`f64::INFINITY` for a noiseless Eve).
pub fn record_cycle<R: Rng + ?Sized>(
    env: &ChannelRealization,
    transcript: &Transcript,
    eve_snr_db: f64,
    rng: &mut R,
) -> Result<EveObservationSet> {
    if transcript.hops.len() != 4 {
        return Err(Error::InvalidArgument(format!(
            "transcript has {} hops, expected 4",
            transcript.hops.len()
        )));
    }
    let pilot = transcript.pilot.at_snr(eve_snr_db);
    let n = env.eve_antennas();
    let mut per_antenna = vec![Vec::with_capacity(4); n as usize];
    for (index, hop) in transcript.hops.iter().enumerate() {
        for k in 0..n {
            let link = LinkId::new(hop.from, Antenna::Eve(k));
            let phase = env.measure_phase(link, hop.state, &pilot, hop.injected, rng)?;
            per_antenna[k as usize].push(EveObservation {
                transmitter: hop.from,
                state: hop.state,
                index,
                phase,
            });
        }
    }
    Ok(EveObservationSet {
        protocol: transcript.protocol,
        per_antenna,
    })
}

/// One point of the solution family of Eve's system
///
/// ```text
/// αb ⊕ m2 = y1
/// αb ⊕ m4 = y2
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoverySolution {
    pub alpha_b: Phase,
    pub m2: Phase,
    pub m4: Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryAttempt {
    /// Right-hand sides `(y1, y2)` after removing the known wired phase.
    pub equations: (Phase, Phase),
    pub solutions: Vec<RecoverySolution>,
    pub method_note: String,
}

impl RecoveryAttempt {
    /// Candidate values of the target `αb^i`.
    pub fn posterior_samples(&self) -> Vec<Phase> {
        self.solutions.iter().map(|s| s.alpha_b).collect()
    }

    /// Largest circular violation of the two equations by `solution`.
    pub fn residual(&self, solution: &RecoverySolution) -> f64 {
        use crate::phase_math::circular_distance;
        let (y1, y2) = self.equations;
        circular_distance(solution.alpha_b + solution.m2, y1)
            .max(circular_distance(solution.alpha_b + solution.m4, y2))
    }

    /// Distance from `value` to the closest posterior sample.
    pub fn nearest_sample_distance(&self, value: Phase) -> f64 {
        use crate::phase_math::circular_distance;
        self.solutions
            .iter()
            .map(|s| circular_distance(s.alpha_b, value))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Enumerates the solutions of Eve's four-antenna system on antenna `k`.
///
/// Eve is granted the wired phase `αa = bβ`. Observations (ii) and (iv)
/// then give two equations in the three unknowns `αb^i`, `m2` and `m4`.
/// The nuisance `m2` is swept over the grid `2πj/trials`, `j = 0..trials`,
/// and the other two unknowns are solved from it.
pub fn attempt_recovery_four(
    obs: &EveObservationSet,
    k: usize,
    known_internal: Phase,
    trials: usize,
) -> Result<RecoveryAttempt> {
    if obs.protocol != Protocol::FourAntenna {
        return Err(Error::InvalidArgument(
            "recovery needs a four-antenna observation set".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let antenna = obs
        .per_antenna
        .get(k)
        .ok_or_else(|| Error::InvalidArgument(format!("no Eve antenna {k}")))?;
    let expected = [Antenna::Alpha, Antenna::Beta, Antenna::B, Antenna::A];
    let senders: Vec<Antenna> = antenna.iter().map(|o| o.transmitter).collect();
    if senders != expected {
        return Err(Error::Inconsistent(format!(
            "observations from {senders:?} do not follow the loop order {expected:?}"
        )));
    }

    let y1 = antenna[1].phase - known_internal;
    let y2 = antenna[3].phase - known_internal;
    let solutions = (0..trials as u64)
        .map(|j| {
            let m2 = Phase::from_fraction(j, trials as u64);
            let alpha_b = y1 - m2;
            RecoverySolution {
                alpha_b,
                m2,
                m4: y2 - alpha_b,
            }
        })
        .collect();

    Ok(RecoveryAttempt {
        equations: (y1, y2),
        solutions,
        method_note: format!(
            "two equations, three unknowns; swept m2 over {trials} grid points and solved for αb, m4"
        ),
    })
}

/// Eve's symbol decisions without the key: derotate by `guesses` (or by
/// nothing when empty) and take the nearest constellation point.
pub fn eve_demodulate(
    masked: &[Phase],
    guesses: &[Phase],
    bits_per_symbol: u32,
) -> Result<Vec<u8>> {
    if !guesses.is_empty() && guesses.len() != masked.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rotation guesses for {} symbols",
            guesses.len(),
            masked.len()
        )));
    }
    let derotated: Vec<Phase> = if guesses.is_empty() {
        masked.to_vec()
    } else {
        masked.iter().zip(guesses).map(|(&y, &g)| y - g).collect()
    };
    psk_demap(&derotated, bits_per_symbol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{draw_realization, round_rng, Device, PilotSpec};
    use crate::phase_math::circular_distance;
    use crate::protocol_four::run_loops_with;
    use crate::protocol_two::run_cycle;

    fn p(x: f64) -> Phase {
        Phase::wrap(x).unwrap()
    }

    #[test]
    fn two_antenna_observation_shape() {
        let env = draw_realization(41, 6, 1, 0.0).unwrap();
        let pilot = PilotSpec::noiseless(8).unwrap();
        let mut rng = round_rng(41, 0);
        let c = run_cycle(&env, MirrorState(0), MirrorState(7), &pilot, &mut rng).unwrap();
        let obs = record_cycle(&env, &c.transcript, f64::INFINITY, &mut rng).unwrap();
        assert_eq!(obs.antenna_count(), 1);
        let ph = obs.phases(0);
        assert_eq!(ph.len(), 4);
        // Both Bob transmissions reach Eve over the same state-free link.
        assert!(circular_distance(ph[2], ph[3]) < 1e-12);
        assert!(circular_distance(ph[0], ph[1]) > 1e-6);
    }

    #[test]
    fn shape_with_three_antennas() {
        let env = draw_realization(42, 6, 3, 0.0).unwrap();
        let pilot = PilotSpec::noiseless(4).unwrap();
        let mut rng = round_rng(42, 0);
        let r = run_loops_with(&env, MirrorState(5), p(1.0), p(2.0), &pilot, &mut rng).unwrap();
        let obs = record_cycle(&env, &r.transcript, f64::INFINITY, &mut rng).unwrap();
        assert_eq!(obs.per_antenna.len(), 3);
        assert!(obs.per_antenna.iter().all(|a| a.len() == 4));
        // 12 singles + C(12, 2) differences.
        assert_eq!(obs.features().len(), 12 + 66);
    }

    #[test]
    fn four_antenna_difference_entangles_unknowns() {
        let env = draw_realization(43, 6, 1, 0.0).unwrap();
        let pilot = PilotSpec::noiseless(4).unwrap();
        let mut rng = round_rng(43, 0);
        let s = MirrorState(11);
        let theta = p(0.9);
        let r = run_loops_with(&env, s, theta, p(5.0), &pilot, &mut rng).unwrap();
        let obs = record_cycle(&env, &r.transcript, f64::INFINITY, &mut rng).unwrap();
        let ph = obs.phases(0);

        let link = |a, b| LinkId::new(a, b);
        let oracle = |l| env.oracle_link_phase(l, s).unwrap();
        let bob = env.chain(Device::Bob).unwrap();
        // (ii) ⊖ (i): θ and Eve's receive chain cancel.
        let expected = oracle(link(Antenna::Alpha, Antenna::B))
            + env.b_beta()
            + oracle(link(Antenna::Beta, Antenna::Eve(0)))
            - oracle(link(Antenna::Alpha, Antenna::Eve(0)))
            + bob.receive
            + bob.transmit;
        assert!(circular_distance(ph[1] - ph[0], expected) < 1e-9);
    }

    #[test]
    fn recovery_contains_truth_and_is_consistent() {
        let env = draw_realization(44, 6, 1, 0.0).unwrap();
        let pilot = PilotSpec::noiseless(4).unwrap();
        let mut rng = round_rng(44, 0);
        let s = MirrorState(21);
        let theta = p(2.5);
        let r = run_loops_with(&env, s, theta, p(0.3), &pilot, &mut rng).unwrap();
        let obs = record_cycle(&env, &r.transcript, f64::INFINITY, &mut rng).unwrap();
        let attempt = attempt_recovery_four(&obs, 0, env.b_beta(), 1000).unwrap();

        for sol in &attempt.solutions {
            assert!(attempt.residual(sol) < 1e-9);
        }
        let alpha_b = env
            .oracle_link_phase(LinkId::new(Antenna::Alpha, Antenna::B), s)
            .unwrap();
        let (y1, y2) = attempt.equations;
        let truth = RecoverySolution {
            alpha_b,
            m2: y1 - alpha_b,
            m4: y2 - alpha_b,
        };
        assert!(attempt.residual(&truth) < 1e-9);
        assert!(attempt.nearest_sample_distance(alpha_b) <= std::f64::consts::PI / 1000.0 + 1e-12);
    }

    #[test]
    fn recovery_single_trial_and_errors() {
        let env = draw_realization(45, 4, 1, 0.0).unwrap();
        let pilot = PilotSpec::noiseless(2).unwrap();
        let mut rng = round_rng(45, 0);
        let r = run_loops_with(&env, MirrorState(1), p(1.0), p(1.0), &pilot, &mut rng).unwrap();
        let obs = record_cycle(&env, &r.transcript, f64::INFINITY, &mut rng).unwrap();
        assert_eq!(
            attempt_recovery_four(&obs, 0, env.b_beta(), 1)
                .unwrap()
                .solutions
                .len(),
            1
        );
        assert!(attempt_recovery_four(&obs, 0, env.b_beta(), 0).is_err());
        assert!(attempt_recovery_four(&obs, 1, env.b_beta(), 10).is_err());

        let mut shuffled = obs.clone();
        shuffled.per_antenna[0].swap(0, 1);
        assert!(matches!(
            attempt_recovery_four(&shuffled, 0, env.b_beta(), 10),
            Err(Error::Inconsistent(_))
        ));

        let c = run_cycle(&env, MirrorState(0), MirrorState(2), &pilot, &mut rng).unwrap();
        let two = record_cycle(&env, &c.transcript, f64::INFINITY, &mut rng).unwrap();
        assert!(attempt_recovery_four(&two, 0, env.b_beta(), 10).is_err());
    }

    #[test]
    fn demodulate_edge_cases() {
        assert!(eve_demodulate(&[], &[], 2).unwrap().is_empty());
        assert!(eve_demodulate(&[p(0.0)], &[p(0.0), p(1.0)], 2).is_err());
        let bits = eve_demodulate(&[p(std::f64::consts::PI)], &[], 2).unwrap();
        assert_eq!(bits, vec![1, 1]);
    }
}
