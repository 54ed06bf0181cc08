//! Public record of what went over the air during one protocol round.

use crate::environment::{Antenna, MirrorState, PilotSpec};
use crate::phase_math::Phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    TwoAntenna,
    FourAntenna,
}

/// One over-air transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hop {
    pub from: Antenna,
    pub to: Antenna,
    pub state: MirrorState,
    /// Phase the transmitter injected on top of the pilot (θ, φ or a relayed
    /// accumulated phase). Zero in the two-antenna protocol.
    pub injected: Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub protocol: Protocol,
    pub pilot: PilotSpec,
    pub hops: Vec<Hop>,
}

/// Phases both legitimate nodes hold after a successful round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharedPair {
    pub alice: Phase,
    pub bob: Phase,
}
