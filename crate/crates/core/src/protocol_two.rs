//! Two-antenna key sharing.
//!
//! One cycle is four transmissions: Alice sends a pilot from `a` with her
//! mirrors at the reference state `i0` and then at a fresh state `i`; Bob
//! answers twice while Alice steps her mirrors through the same two states.
//! Each node differences its two averaged pilot phases, which removes the
//! transmit/receive chain phases and leaves `ab^i ⊖ ab^{i0}` on both sides.

use std::collections::HashSet;

use rand::Rng;

use crate::environment::{Antenna, ChannelRealization, LinkId, MirrorState, PilotSpec};
use crate::error::{Error, Result};
use crate::phase_math::Phase;
use crate::transcript::{Hop, Protocol, SharedPair, Transcript};

#[derive(Debug, Clone, PartialEq)]
pub struct CycleResult {
    /// `None` when a pilot average was degenerate; the state is then burnt.
    pub shared: Option<SharedPair>,
    pub reference: MirrorState,
    pub state: MirrorState,
    pub transcript: Transcript,
}

impl CycleResult {
    pub fn is_erasure(&self) -> bool {
        self.shared.is_none()
    }
}

fn transcript_for(reference: MirrorState, state: MirrorState, pilot: &PilotSpec) -> Transcript {
    let hop = |from, to, state| Hop {
        from,
        to,
        state,
        injected: Phase::ZERO,
    };
    Transcript {
        protocol: Protocol::TwoAntenna,
        pilot: pilot.clone(),
        hops: vec![
            hop(Antenna::A, Antenna::B, reference),
            hop(Antenna::A, Antenna::B, state),
            hop(Antenna::B, Antenna::A, reference),
            hop(Antenna::B, Antenna::A, state),
        ],
    }
}

/// Runs one four-transmission cycle against reference state `reference`.
pub fn run_cycle<R: Rng + ?Sized>(
    env: &ChannelRealization,
    reference: MirrorState,
    state: MirrorState,
    pilot: &PilotSpec,
    rng: &mut R,
) -> Result<CycleResult> {
    if state == reference {
        return Err(Error::StateReuse(state.0));
    }
    env.check_state(reference)?;
    env.check_state(state)?;

    let forward = LinkId::new(Antenna::A, Antenna::B);
    let backward = forward.reversed();
    let mut measure = |link, s| env.measure_phase(link, s, pilot, Phase::ZERO, rng);

    // Transmissions in air order; every one is made even if an earlier one
    // erased, so the noise stream consumption does not depend on outcomes.
    let measurements = [
        measure(forward, reference),
        measure(forward, state),
        measure(backward, reference),
        measure(backward, state),
    ];
    let mut phases = [Phase::ZERO; 4];
    let mut erased = false;
    for (slot, m) in phases.iter_mut().zip(measurements) {
        match m {
            Ok(p) => *slot = p,
            Err(Error::DegenerateAverage { .. }) => erased = true,
            Err(e) => return Err(e),
        }
    }

    let shared = (!erased).then(|| SharedPair {
        bob: phases[1] - phases[0],
        alice: phases[3] - phases[2],
    });

    Ok(CycleResult {
        shared,
        reference,
        state,
        transcript: transcript_for(reference, state, pilot),
    })
}

/// Aligned shared-phase streams from a sequence of fresh states.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SharedStream {
    pub alice: Vec<Phase>,
    pub bob: Vec<Phase>,
    /// State that produced each entry.
    pub states: Vec<MirrorState>,
    /// States lost to erasures.
    pub erased: Vec<MirrorState>,
}

impl SharedStream {
    pub fn len(&self) -> usize {
        self.alice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alice.is_empty()
    }
}

/// One cycle per state against the fixed reference `i0 = 0`.
pub fn shared_phase_stream<R: Rng + ?Sized>(
    env: &ChannelRealization,
    states: &[MirrorState],
    pilot: &PilotSpec,
    rng: &mut R,
) -> Result<SharedStream> {
    let mut seen = HashSet::with_capacity(states.len());
    for &s in states {
        if s == MirrorState::REFERENCE || !seen.insert(s) {
            return Err(Error::StateReuse(s.0));
        }
    }

    let mut out = SharedStream::default();
    for &s in states {
        let cycle = run_cycle(env, MirrorState::REFERENCE, s, pilot, rng)?;
        match cycle.shared {
            Some(pair) => {
                out.alice.push(pair.alice);
                out.bob.push(pair.bob);
                out.states.push(s);
            }
            None => out.erased.push(s),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{draw_realization, round_rng, ChainPhases, Device};
    use crate::phase_math::circular_distance;

    fn states(n: u32) -> Vec<MirrorState> {
        (1..=n).map(MirrorState).collect()
    }

    #[test]
    fn noiseless_cycle_matches_oracle() {
        let env = draw_realization(21, 8, 1, 0.0).unwrap();
        let pilot = PilotSpec::noiseless(16).unwrap();
        let mut rng = round_rng(21, 0);
        let ab = LinkId::new(Antenna::A, Antenna::B);
        for s in 1..50 {
            let s = MirrorState(s);
            let c = run_cycle(&env, MirrorState::REFERENCE, s, &pilot, &mut rng).unwrap();
            let pair = c.shared.unwrap();
            let oracle = env.oracle_link_phase(ab, s).unwrap()
                - env.oracle_link_phase(ab, MirrorState::REFERENCE).unwrap();
            assert!(circular_distance(pair.alice, pair.bob) < 1e-9);
            assert!(circular_distance(pair.bob, oracle) < 1e-9);
        }
    }

    #[test]
    fn chain_phases_cancel() {
        let env = draw_realization(22, 6, 1, 0.0).unwrap();
        let other = env
            .clone()
            .with_chain_phases(
                ChainPhases {
                    transmit: Phase::wrap(0.4).unwrap(),
                    receive: Phase::wrap(5.9).unwrap(),
                },
                ChainPhases {
                    transmit: Phase::wrap(2.2).unwrap(),
                    receive: Phase::wrap(1.1).unwrap(),
                },
                vec![env.chain(Device::Eve(0)).unwrap()],
            )
            .unwrap();
        let pilot = PilotSpec::noiseless(4).unwrap();
        let mut rng = round_rng(0, 0);
        for s in 1..20 {
            let a = run_cycle(&env, MirrorState(0), MirrorState(s), &pilot, &mut rng).unwrap();
            let b = run_cycle(&other, MirrorState(0), MirrorState(s), &pilot, &mut rng).unwrap();
            let (a, b) = (a.shared.unwrap(), b.shared.unwrap());
            assert!(circular_distance(a.alice, b.alice) < 1e-9);
            assert!(circular_distance(a.bob, b.bob) < 1e-9);
        }
    }

    #[test]
    fn transcript_order() {
        let env = draw_realization(1, 3, 0, 0.0).unwrap();
        let pilot = PilotSpec::noiseless(2).unwrap();
        let c = run_cycle(
            &env,
            MirrorState(0),
            MirrorState(5),
            &pilot,
            &mut round_rng(1, 0),
        )
        .unwrap();
        let hops: Vec<_> = c
            .transcript
            .hops
            .iter()
            .map(|h| (h.from, h.state.0))
            .collect();
        assert_eq!(
            hops,
            vec![
                (Antenna::A, 0),
                (Antenna::A, 5),
                (Antenna::B, 0),
                (Antenna::B, 5)
            ]
        );
        assert_eq!(c.transcript.protocol, Protocol::TwoAntenna);
    }

    #[test]
    fn state_reuse_rejected() {
        let env = draw_realization(1, 3, 0, 0.0).unwrap();
        let pilot = PilotSpec::noiseless(2).unwrap();
        let mut rng = round_rng(1, 0);
        assert!(matches!(
            run_cycle(&env, MirrorState(2), MirrorState(2), &pilot, &mut rng),
            Err(Error::StateReuse(2))
        ));
        assert!(matches!(
            shared_phase_stream(
                &env,
                &[MirrorState(1), MirrorState(3), MirrorState(1)],
                &pilot,
                &mut rng
            ),
            Err(Error::StateReuse(1))
        ));
        assert!(matches!(
            shared_phase_stream(&env, &[MirrorState(0)], &pilot, &mut rng),
            Err(Error::StateReuse(0))
        ));
    }

    #[test]
    fn stream_shapes() {
        let env = draw_realization(3, 8, 0, 0.0).unwrap();
        let pilot = PilotSpec::noiseless(16).unwrap();
        let mut rng = round_rng(3, 0);
        let out = shared_phase_stream(&env, &states(64), &pilot, &mut rng).unwrap();
        assert_eq!(out.len(), 64);
        for (a, b) in out.alice.iter().zip(&out.bob) {
            assert!(circular_distance(*a, *b) < 1e-9);
        }
        assert!(shared_phase_stream(&env, &[], &pilot, &mut rng)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn degenerate_average_is_an_erasure() {
        // A LOS offset that exactly cancels the single-tone pilot at one
        // state drives the average to the origin.
        let env = draw_realization(4, 3, 0, 0.0).unwrap();
        let ab = LinkId::new(Antenna::A, Antenna::B);
        let s = MirrorState(2);
        let arrival = env.oracle_link_phase(ab, s).unwrap()
            + env.chain(Device::Alice).unwrap().transmit
            + env.chain(Device::Bob).unwrap().receive;
        let env = env.with_los_bias(-arrival.phasor());
        let pilot = PilotSpec::noiseless(1).unwrap();
        let c = run_cycle(&env, MirrorState(0), s, &pilot, &mut round_rng(4, 0)).unwrap();
        assert!(c.is_erasure());
        let out =
            shared_phase_stream(&env, &[MirrorState(1), s], &pilot, &mut round_rng(4, 0)).unwrap();
        assert_eq!(out.erased, vec![s]);
        assert_eq!(out.states, vec![MirrorState(1)]);
    }
}
