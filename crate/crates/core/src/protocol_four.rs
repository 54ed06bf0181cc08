//! Four-antenna loop protocol.
//!
//! Per mirror state two loops run back to back. Alice launches a pilot with
//! a private random phase θ from `α`; Bob receives it on `b`, passes it
//! through his wired path to `β` and relays it to `a`. Bob then launches φ
//! from `b` around the opposite loop `b → α → a → β`. Each initiator strips
//! its own random phase from what comes back:
//!
//! ```text
//! Alice: αb ⊕ bβ ⊕ βa        Bob: bα ⊕ αa ⊕ aβ
//! ```
//!
//! Both loops cross the same four chain phases, so those add the same
//! constant to both results. The wired phases `αa` and `bβ` differ by a
//! hardware constant that [`FourAntennaSession::calibrate`] measures once.

use std::collections::HashSet;

use rand::Rng;

use crate::environment::{
    uniform_phase, Antenna, ChannelRealization, LinkId, MirrorState, PilotSpec,
};
use crate::error::{Error, Result};
use crate::phase_math::{circular_mean, Phase};
use crate::transcript::{Hop, Protocol, SharedPair, Transcript};

#[derive(Debug, Clone, PartialEq)]
pub struct LoopResult {
    /// `None` on an erasure. Bob's value already has the session's
    /// calibration offset removed.
    pub shared: Option<SharedPair>,
    pub theta: Phase,
    pub phi: Phase,
    pub state: MirrorState,
    pub transcript: Transcript,
}

impl LoopResult {
    pub fn is_erasure(&self) -> bool {
        self.shared.is_none()
    }
}

// Receive on `to`, returning None on a degenerate pilot average.
fn hop<R: Rng + ?Sized>(
    env: &ChannelRealization,
    from: Antenna,
    to: Antenna,
    state: MirrorState,
    pilot: &PilotSpec,
    injected: Phase,
    rng: &mut R,
) -> Result<Option<Phase>> {
    match env.measure_phase(LinkId::new(from, to), state, pilot, injected, rng) {
        Ok(p) => Ok(Some(p)),
        Err(Error::DegenerateAverage { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Both loops at `state` with explicit initiation phases. No session
/// bookkeeping and no calibration correction.
pub fn run_loops_with<R: Rng + ?Sized>(
    env: &ChannelRealization,
    state: MirrorState,
    theta: Phase,
    phi: Phase,
    pilot: &PilotSpec,
    rng: &mut R,
) -> Result<LoopResult> {
    env.check_state(state)?;
    let mut hops = Vec::with_capacity(4);
    let mut erased = false;

    // Loop 1: α → b, wired b → β, β → a.
    hops.push(Hop {
        from: Antenna::Alpha,
        to: Antenna::B,
        state,
        injected: theta,
    });
    let at_bob = hop(env, Antenna::Alpha, Antenna::B, state, pilot, theta, rng)?;
    // An erased relay still forwards whatever it holds so the transcript
    // keeps its shape.
    let relayed = at_bob.unwrap_or_else(|| {
        erased = true;
        Phase::ZERO
    }) + env.b_beta();
    hops.push(Hop {
        from: Antenna::Beta,
        to: Antenna::A,
        state,
        injected: relayed,
    });
    let at_alice = hop(env, Antenna::Beta, Antenna::A, state, pilot, relayed, rng)?;

    // Loop 2: b → α, wired α → a, a → β.
    hops.push(Hop {
        from: Antenna::B,
        to: Antenna::Alpha,
        state,
        injected: phi,
    });
    let at_alice_relay = hop(env, Antenna::B, Antenna::Alpha, state, pilot, phi, rng)?;
    let relayed = at_alice_relay.unwrap_or_else(|| {
        erased = true;
        Phase::ZERO
    }) + env.alpha_a();
    hops.push(Hop {
        from: Antenna::A,
        to: Antenna::Beta,
        state,
        injected: relayed,
    });
    let at_bob_final = hop(env, Antenna::A, Antenna::Beta, state, pilot, relayed, rng)?;

    let shared = match (erased, at_alice, at_bob_final) {
        (false, Some(a), Some(b)) => Some(SharedPair {
            alice: a - theta,
            bob: b - phi,
        }),
        _ => None,
    };

    Ok(LoopResult {
        shared,
        theta,
        phi,
        state,
        transcript: Transcript {
            protocol: Protocol::FourAntenna,
            pilot: pilot.clone(),
            hops,
        },
    })
}

/// Tracks consumed mirror states and the calibrated wired-phase offset for
/// one key-sharing session.
#[derive(Debug, Clone, Default)]
pub struct FourAntennaSession {
    used: HashSet<MirrorState>,
    offset: Phase,
}

impl FourAntennaSession {
    pub fn new() -> Self {
        Self::default()
    }

    /// Current estimate of `αa ⊖ bβ`.
    pub fn offset(&self) -> Phase {
        self.offset
    }

    pub fn is_used(&self, state: MirrorState) -> bool {
        self.used.contains(&state)
    }

    fn claim(&mut self, env: &ChannelRealization, state: MirrorState) -> Result<()> {
        env.check_state(state)?;
        if !self.used.insert(state) {
            return Err(Error::StateReuse(state.0));
        }
        Ok(())
    }

    /// Runs both loops at a fresh `state` with θ and φ drawn from `rng`.
    pub fn run_loops<R: Rng + ?Sized>(
        &mut self,
        env: &ChannelRealization,
        state: MirrorState,
        pilot: &PilotSpec,
        rng: &mut R,
    ) -> Result<LoopResult> {
        let theta = uniform_phase(rng);
        let phi = uniform_phase(rng);
        self.run_loops_with(env, state, theta, phi, pilot, rng)
    }

    pub fn run_loops_with<R: Rng + ?Sized>(
        &mut self,
        env: &ChannelRealization,
        state: MirrorState,
        theta: Phase,
        phi: Phase,
        pilot: &PilotSpec,
        rng: &mut R,
    ) -> Result<LoopResult> {
        self.claim(env, state)?;
        let mut result = run_loops_with(env, state, theta, phi, pilot, rng)?;
        if let Some(pair) = result.shared.as_mut() {
            pair.bob = pair.bob - self.offset;
        }
        Ok(result)
    }

    /// Estimates `Δ = αa ⊖ bβ` as the circular mean of `bob ⊖ alice` over
    /// `rounds` loop pairs and stores it for later loops.
    ///
    /// Calibration uses the top of the state space, counting down from
    /// `2^K − 1`; those states are marked used and never carry key material.
    pub fn calibrate<R: Rng + ?Sized>(
        &mut self,
        env: &ChannelRealization,
        rounds: u32,
        pilot: &PilotSpec,
        rng: &mut R,
    ) -> Result<Phase> {
        if rounds == 0 {
            return Err(Error::InvalidArgument(
                "calibration needs at least one round".into(),
            ));
        }
        if rounds as u64 >= env.state_count() / 2 {
            return Err(Error::InvalidArgument(format!(
                "{rounds} calibration rounds exceed the reserved half of {} states",
                env.state_count()
            )));
        }
        let top = (env.state_count() - 1) as u32;
        let mut diffs = Vec::with_capacity(rounds as usize);
        for r in 0..rounds {
            let state = MirrorState(top - r);
            self.claim(env, state)?;
            let theta = uniform_phase(rng);
            let phi = uniform_phase(rng);
            let result = run_loops_with(env, state, theta, phi, pilot, rng)?;
            if let Some(pair) = result.shared {
                diffs.push(pair.bob - pair.alice);
            }
        }
        self.offset = circular_mean(&diffs)?;
        Ok(self.offset)
    }
}

/// One-shot calibration on a fresh session.
pub fn calibrate_internal_offset<R: Rng + ?Sized>(
    env: &ChannelRealization,
    rounds: u32,
    pilot: &PilotSpec,
    rng: &mut R,
) -> Result<Phase> {
    FourAntennaSession::new().calibrate(env, rounds, pilot, rng)
}
