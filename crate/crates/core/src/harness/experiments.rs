use std::f64::consts::FRAC_PI_4;

use rand::Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind, ProtocolChoice};
use super::replay::{replay_ingest, IqTrace};
use super::Report;
use crate::adversary::record_cycle;
use crate::analysis::{binned_entropy, kuiper_uniformity, JointHistogram, UniformityReport};
use crate::environment::{
    draw_realization, keyed_rng, uniform_phase, ChannelRealization, MirrorState, PilotSpec,
};
use crate::error::{Error, Result};
use crate::keylink::{exchange_key, KeyMaterial};
use crate::phase_math::{circular_distance, Phase};
use crate::protocol_four::{run_loops_with, FourAntennaSession};
use crate::protocol_two::{run_cycle, SharedStream};
use crate::transcript::Transcript;

// Stream domains for the harness; distinct from the environment's own.
const DOMAIN_PROTOCOL: u64 = 0x100;
const DOMAIN_EXCHANGE: u64 = 0x101;
const DOMAIN_LEAKAGE: u64 = 0x102;
const DOMAIN_DRAWS: u64 = 0x103;
const DOMAIN_CALIBRATION: u64 = 0x104;

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn realization(config: &ExperimentConfig, seed: u64) -> Result<ChannelRealization> {
    Ok(
        draw_realization(seed, config.k, config.n, config.los_magnitude)?
            .with_internal_offset(Phase::wrap(config.internal_offset)?),
    )
}

fn pilot(config: &ExperimentConfig, snr_db: f64) -> Result<PilotSpec> {
    PilotSpec::new(config.s, snr_db)
}

/// Key states available once the calibration range is set aside.
fn usable_states(config: &ExperimentConfig, env: &ChannelRealization) -> u64 {
    let reserved = match config.protocol {
        ProtocolChoice::Two => 0,
        ProtocolChoice::Four => config.calibration_rounds as u64,
    };
    // Minus the reference state.
    env.state_count().saturating_sub(1 + reserved)
}

/// Runs one protocol round per state, each with its own noise stream, and
/// collects the aligned shared phases. For the four-antenna protocol the
/// wired-phase offset is calibrated first.
pub fn shared_phases(
    config: &ExperimentConfig,
    env: &ChannelRealization,
    states: &[MirrorState],
    pilot: &PilotSpec,
) -> Result<SharedStream> {
    let seed = config.seed;
    type Round = Result<(MirrorState, Option<(Phase, Phase)>)>;
    let rounds: Vec<Round> = match config.protocol {
        ProtocolChoice::Two => states
            .par_iter()
            .map(|&s| {
                let mut rng = keyed_rng(seed, DOMAIN_PROTOCOL, s.0 as u64);
                let c = run_cycle(env, MirrorState::REFERENCE, s, pilot, &mut rng)?;
                Ok((s, c.shared.map(|p| (p.alice, p.bob))))
            })
            .collect(),
        ProtocolChoice::Four => {
            let mut session = FourAntennaSession::new();
            let mut rng = keyed_rng(seed, DOMAIN_CALIBRATION, 0);
            let offset = session.calibrate(env, config.calibration_rounds, pilot, &mut rng)?;
            if let Some(s) = states.iter().find(|s| session.is_used(**s)) {
                return Err(Error::StateReuse(s.0));
            }
            states
                .par_iter()
                .map(|&s| {
                    let mut rng = keyed_rng(seed, DOMAIN_PROTOCOL, s.0 as u64);
                    let theta = uniform_phase(&mut rng);
                    let phi = uniform_phase(&mut rng);
                    let r = run_loops_with(env, s, theta, phi, pilot, &mut rng)?;
                    Ok((s, r.shared.map(|p| (p.alice, p.bob - offset))))
                })
                .collect()
        }
    };

    let mut out = SharedStream::default();
    for r in rounds {
        match r? {
            (s, Some((a, b))) => {
                out.alice.push(a);
                out.bob.push(b);
                out.states.push(s);
            }
            (s, None) => out.erased.push(s),
        }
    }
    Ok(out)
}

fn uniformity_row(check: &str, r: &UniformityReport) -> Vec<String> {
    vec![
        check.to_string(),
        r.n.to_string(),
        r.statistic.to_string(),
        r.modified.to_string(),
        r.critical.to_string(),
        r.p_value.to_string(),
        r.pass.to_string(),
    ]
}

pub(super) fn uniformity(config: &ExperimentConfig) -> Result<Report> {
    let n = usize::try_from(config.rounds).map_err(|_| config_error("rounds", "too large"))?;
    let mut rows = Vec::new();
    let mut pass = true;

    // Masking a fixed symbol with one shared sample of uniform phases.
    let mut rng = keyed_rng(config.seed, DOMAIN_DRAWS, 0);
    let draws: Vec<Phase> = (0..n).map(|_| uniform_phase(&mut rng)).collect();
    for x in [0.0, FRAC_PI_4, 1.0, 3.0] {
        let x = Phase::wrap(x)?;
        let masked: Vec<Phase> = draws.iter().map(|&phi| x + phi).collect();
        let r = kuiper_uniformity(&masked, config.significance)?;
        pass &= r.pass;
        rows.push(uniformity_row(&format!("mask_x={}", x.radians()), &r));
    }

    // Shared phases over fresh mirror states.
    let env = realization(config, config.seed)?;
    let count = (config.rounds).min(usable_states(config, &env));
    let states: Vec<MirrorState> = (1..=count as u32).map(MirrorState).collect();
    let p = pilot(config, config.snr_db)?;
    let stream = shared_phases(config, &env, &states, &p)?;
    for (label, phases) in [("shared_alice", &stream.alice), ("shared_bob", &stream.bob)] {
        let r = kuiper_uniformity(phases, config.significance)?;
        pass &= r.pass;
        rows.push(uniformity_row(label, &r));
    }

    // Eve's four loop observations are each marginally uniform.
    if config.protocol == ProtocolChoice::Four {
        let obs: Vec<Vec<Phase>> = states
            .par_iter()
            .map(|&s| {
                let mut rng = keyed_rng(config.seed, DOMAIN_PROTOCOL, s.0 as u64);
                let theta = uniform_phase(&mut rng);
                let phi = uniform_phase(&mut rng);
                let r = run_loops_with(&env, s, theta, phi, &p, &mut rng)?;
                let o = record_cycle(&env, &r.transcript, config.eve_snr_db, &mut rng)?;
                Ok(o.phases(0))
            })
            .collect::<Result<_>>()?;
        for j in 0..4 {
            let column: Vec<Phase> = obs.iter().map(|o| o[j]).collect();
            let r = kuiper_uniformity(&column, config.significance)?;
            pass &= r.pass;
            rows.push(uniformity_row(&format!("eve_m{}", j + 1), &r));
        }
    }

    Ok(Report {
        kind: ExperimentKind::Uniformity,
        header: [
            "check",
            "n",
            "statistic",
            "modified",
            "critical",
            "p_value",
            "pass",
        ]
        .map(String::from)
        .to_vec(),
        summary: format!(
            "uniformity: {}/{} checks passed -> {}",
            rows.iter().filter(|r| r[6] == "true").count(),
            rows.len(),
            verdict(pass)
        ),
        rows,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageRow {
    pub feature: String,
    pub plug_in: f64,
    pub bias_correction: f64,
    pub bits: f64,
    pub n: usize,
}

/// Alice's shared phase and Eve's labelled features for one round, or
/// `None` when the round is erased.
type LeakageSample = Option<(Phase, Vec<(String, Phase)>)>;

fn leakage_round(config: &ExperimentConfig, round: u64) -> Result<LeakageSample> {
    let mut rng = keyed_rng(config.seed, DOMAIN_LEAKAGE, round);
    let env = realization(config, rng.random())?;
    let state = MirrorState(rng.random_range(1..env.state_count()) as u32);
    let p = pilot(config, config.snr_db)?;
    let (shared, transcript): (Option<Phase>, Transcript) = match config.protocol {
        ProtocolChoice::Two => {
            let c = run_cycle(&env, MirrorState::REFERENCE, state, &p, &mut rng)?;
            (c.shared.map(|s| s.alice), c.transcript)
        }
        ProtocolChoice::Four => {
            let theta = uniform_phase(&mut rng);
            let phi = uniform_phase(&mut rng);
            let r = run_loops_with(&env, state, theta, phi, &p, &mut rng)?;
            (r.shared.map(|s| s.alice), r.transcript)
        }
    };
    let Some(shared) = shared else {
        return Ok(None);
    };
    let obs = match record_cycle(&env, &transcript, config.eve_snr_db, &mut rng) {
        Ok(o) => o,
        Err(Error::DegenerateAverage { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    Ok(Some((shared, obs.features())))
}

/// Binned MI between the shared phase and every Eve observation and
/// pairwise observation difference, each round on a fresh realization.
pub fn leakage_estimates(config: &ExperimentConfig) -> Result<Vec<LeakageRow>> {
    // The first surviving round fixes the feature layout; it is counted
    // again below.
    let labels: Vec<String> = (0..config.rounds)
        .find_map(|r| leakage_round(config, r).transpose())
        .ok_or_else(|| Error::Inconsistent("every leakage round was erased".into()))??
        .1
        .into_iter()
        .map(|(label, _)| label)
        .collect();
    let bins = config.mi_bins;
    let empty = || vec![JointHistogram::new(bins, bins); labels.len()];

    let hists = (0..config.rounds)
        .into_par_iter()
        .try_fold(empty, |mut acc, round| {
            if let Some((shared, features)) = leakage_round(config, round)? {
                for (h, (_, f)) in acc.iter_mut().zip(&features) {
                    h.add_phases(*f, shared);
                }
            }
            Ok::<_, Error>(acc)
        })
        .try_reduce(empty, |mut a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                x.merge(y);
            }
            Ok(a)
        })?;

    Ok(labels
        .into_iter()
        .zip(&hists)
        .map(|(feature, h)| {
            let mi = h.mutual_information();
            LeakageRow {
                feature,
                plug_in: mi.plug_in,
                bias_correction: mi.bias_correction,
                bits: mi.bits,
                n: mi.n,
            }
        })
        .collect())
}

pub(super) fn leakage(config: &ExperimentConfig) -> Result<Report> {
    let rows = leakage_estimates(config)?;
    let worst = rows.iter().map(|r| r.bits).fold(0.0, f64::max);
    let pass = worst <= config.mi_threshold;
    Ok(Report {
        kind: ExperimentKind::Leakage,
        header: [
            "protocol",
            "feature",
            "n",
            "plug_in_bits",
            "bias_correction_bits",
            "mi_bits",
            "threshold_bits",
            "pass",
        ]
        .map(String::from)
        .to_vec(),
        summary: format!(
            "leakage ({} antennas, {} features): max MI {:.6} bits vs {} -> {}",
            config.protocol.name(),
            rows.len(),
            worst,
            config.mi_threshold,
            verdict(pass)
        ),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    config.protocol.name().to_string(),
                    r.feature.clone(),
                    r.n.to_string(),
                    r.plug_in.to_string(),
                    r.bias_correction.to_string(),
                    r.bits.to_string(),
                    config.mi_threshold.to_string(),
                    (r.bits <= config.mi_threshold).to_string(),
                ]
            })
            .collect(),
        pass,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeSummary {
    pub snr_db: f64,
    pub exchanges: usize,
    pub agreement_rate: f64,
    pub eve_ber: f64,
    pub eve_bits: usize,
    /// Mean circular distance between the two nodes' phases.
    pub mean_disagreement: f64,
    pub phases_consumed: usize,
    pub erasures: usize,
}

impl ExchangeSummary {
    /// Eve's BER is within `max(0.01, 4σ)` of one half, σ the binomial
    /// standard deviation for her bit count.
    pub fn eve_blind(&self) -> bool {
        let tol = (2.0 / (self.eve_bits as f64).sqrt()).max(0.01);
        (self.eve_ber - 0.5).abs() <= tol
    }
}

/// `config.rounds` key exchanges over shared phases produced by the
/// configured protocol at `snr_db`.
pub fn exchange_point(config: &ExperimentConfig, snr_db: f64) -> Result<ExchangeSummary> {
    let params = config.key_params()?;
    let np = params.symbol_count();
    let exchanges =
        usize::try_from(config.rounds).map_err(|_| config_error("rounds", "too large"))?;
    let needed = exchanges
        .checked_mul(np)
        .ok_or_else(|| config_error("rounds", "too many phases requested"))?;
    // Spare states absorb erasures.
    let requested = needed + needed / 100 + 16;

    let env = realization(config, config.seed)?;
    if requested as u64 > usable_states(config, &env) {
        return Err(config_error(
            "rounds",
            format!(
                "{exchanges} exchanges need {requested} mirror states; k = {} offers {}",
                config.k,
                usable_states(config, &env)
            ),
        ));
    }
    let states: Vec<MirrorState> = (1..=requested as u32).map(MirrorState).collect();
    let stream = shared_phases(config, &env, &states, &pilot(config, snr_db)?)?;
    let erasures = stream.erased.len();

    let mut pool = KeyMaterial::new(stream.alice, stream.bob)?;
    let blocks = (0..exchanges)
        .map(|_| pool.take(np))
        .collect::<Result<Vec<_>>>()?;
    let mean_disagreement = blocks
        .iter()
        .flat_map(|(a, b)| a.iter().zip(b))
        .map(|(&a, &b)| circular_distance(a, b))
        .sum::<f64>()
        / needed.max(1) as f64;

    let outcomes = blocks
        .into_par_iter()
        .enumerate()
        .map(|(e, (master, slave))| {
            let mut rng = keyed_rng(config.seed, DOMAIN_EXCHANGE, e as u64);
            exchange_key(&params, master, slave, config.symbol_noise_std, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;

    let agreed = outcomes.iter().filter(|o| o.agreed).count();
    let eve_errors: usize = outcomes
        .iter()
        .map(|o| {
            o.eve_bits
                .iter()
                .zip(&o.master_bits)
                .filter(|(a, b)| a != b)
                .count()
        })
        .sum();
    let eve_bits = exchanges * params.info_bits();
    Ok(ExchangeSummary {
        snr_db,
        exchanges,
        agreement_rate: agreed as f64 / exchanges as f64,
        eve_ber: eve_errors as f64 / eve_bits as f64,
        eve_bits,
        mean_disagreement,
        phases_consumed: outcomes.iter().map(|o| o.phases_consumed).sum(),
        erasures,
    })
}

const EXCHANGE_HEADER: [&str; 12] = [
    "protocol",
    "snr_db",
    "exchanges",
    "l",
    "r",
    "m",
    "n_p",
    "agreement_rate",
    "eve_ber",
    "mean_disagreement_rad",
    "phases_consumed",
    "erasures",
];

fn exchange_row(config: &ExperimentConfig, s: &ExchangeSummary) -> Vec<String> {
    vec![
        config.protocol.name().to_string(),
        s.snr_db.to_string(),
        s.exchanges.to_string(),
        config.l.to_string(),
        config.r.to_string(),
        config.m.to_string(),
        ((config.l + config.r) / config.m as usize).to_string(),
        s.agreement_rate.to_string(),
        s.eve_ber.to_string(),
        s.mean_disagreement.to_string(),
        s.phases_consumed.to_string(),
        s.erasures.to_string(),
    ]
}

/// Agreement target for a single exchange experiment.
pub const AGREEMENT_TARGET: f64 = 0.99;

pub(super) fn exchange(config: &ExperimentConfig) -> Result<Report> {
    let s = exchange_point(config, config.snr_db)?;
    let pass = s.agreement_rate >= AGREEMENT_TARGET && s.eve_blind();
    Ok(Report {
        kind: ExperimentKind::Exchange,
        header: EXCHANGE_HEADER.map(String::from).to_vec(),
        rows: vec![exchange_row(config, &s)],
        summary: format!(
            "exchange: agreement {:.4} over {} exchanges, Eve BER {:.4} -> {}",
            s.agreement_rate,
            s.exchanges,
            s.eve_ber,
            verdict(pass)
        ),
        pass,
    })
}

pub(super) fn sweep(config: &ExperimentConfig) -> Result<Report> {
    let mut snrs = config.sweep_snr_db.clone();
    snrs.sort_by(f64::total_cmp);
    let points = snrs
        .iter()
        .map(|&snr| exchange_point(config, snr))
        .collect::<Result<Vec<_>>>()?;
    let monotone = points
        .windows(2)
        .all(|w| w[1].agreement_rate >= w[0].agreement_rate);
    let blind = points.iter().all(ExchangeSummary::eve_blind);
    let pass = monotone && blind;
    Ok(Report {
        kind: ExperimentKind::Sweep,
        header: EXCHANGE_HEADER.map(String::from).to_vec(),
        rows: points.iter().map(|s| exchange_row(config, s)).collect(),
        summary: format!(
            "sweep: {} SNR points, agreement {} in SNR, Eve blind at every point: {} -> {}",
            points.len(),
            if monotone {
                "nondecreasing"
            } else {
                "NOT monotone"
            },
            blind,
            verdict(pass)
        ),
        pass,
    })
}

pub(super) fn replay(config: &ExperimentConfig) -> Result<Report> {
    let path = config
        .trace
        .as_ref()
        .ok_or_else(|| config_error("trace", "replay needs a trace file"))?;
    let trace = IqTrace::read(path)?;
    let phases = replay_ingest(&trace, config.discard_fraction)?;
    let r = kuiper_uniformity(&phases, config.significance)?;
    let entropy = binned_entropy(&phases, config.mi_bins)?;
    Ok(Report {
        kind: ExperimentKind::Replay,
        header: [
            "records",
            "survivors",
            "discard_fraction",
            "statistic",
            "modified",
            "critical",
            "p_value",
            "entropy_bits",
            "max_entropy_bits",
            "pass",
        ]
        .map(String::from)
        .to_vec(),
        rows: vec![vec![
            trace.records.len().to_string(),
            phases.len().to_string(),
            config.discard_fraction.to_string(),
            r.statistic.to_string(),
            r.modified.to_string(),
            r.critical.to_string(),
            r.p_value.to_string(),
            entropy.to_string(),
            (config.mi_bins as f64).log2().to_string(),
            r.pass.to_string(),
        ]],
        summary: format!(
            "replay: {} of {} samples kept, Kuiper p = {:.4}, entropy {:.4} bits -> {}",
            phases.len(),
            trace.records.len(),
            r.p_value,
            entropy,
            verdict(r.pass)
        ),
        pass: r.pass,
    })
}
