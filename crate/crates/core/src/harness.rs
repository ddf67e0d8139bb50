//! Match execution, Monte Carlo experiments, and certification verdicts.
//!
//! The harness turns the probabilistic statements of the consistency,
//! compatibility, and social-intelligence definitions into empirical
//! estimates: it runs seeded matches, evaluates per-trial verdicts, and
//! aggregates them with exact binomial confidence intervals.
//!
//! Determinism contract: the i-th trial of a pairing depends only on
//! `(master seed, pairing label, trial index)`. Results are byte-identical
//! across worker counts and execution orders.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::agents::{Agent, AgentContext, AgentKind, AgentSpec, ConventionRef};
use crate::equilibria::{
    convention, enumerate_nash, pone_filter, ConventionMap, EquilibriumSet, TieBreakPolicy,
    SOLVE_TOL,
};
use crate::error::{Result, SiError};
use crate::game::{
    empirical_payoff, expected_payoff, GameCatalog, History, JointAction, MatchTrace, MatrixGame,
    Seat, SeedRecord, TypeId,
};
use crate::regret::CumulativePayoffTable;
use crate::seeding;
use crate::{agents, regret};

/// One match to run: both agent specs, the game type, length, and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchConfig {
    pub type_id: TypeId,
    pub agent_1: AgentSpec,
    pub agent_2: AgentSpec,
    #[serde(rename = "T")]
    pub stages: u64,
    pub seed: u64,
}

/// Runs a match with one shared convention map for both seats.
pub fn run_match(
    config: &MatchConfig,
    catalog: &GameCatalog,
    conventions: Option<&ConventionMap>,
) -> Result<MatchTrace> {
    run_match_with(config, catalog, conventions, conventions)
}

/// Runs a match with per-seat convention maps (agents of different classes
/// may have settled on different conventions).
pub fn run_match_with(
    config: &MatchConfig,
    catalog: &GameCatalog,
    conventions_1: Option<&ConventionMap>,
    conventions_2: Option<&ConventionMap>,
) -> Result<MatchTrace> {
    if config.stages < 1 {
        return Err(SiError::InvalidInput("a match needs at least one stage".into()));
    }
    let game = catalog.get(&config.type_id)?;
    let seed = SeedRecord {
        match_seed: config.seed,
        seat_1: seeding::mix(config.seed, &[1]),
        seat_2: seeding::mix(config.seed, &[2]),
    };
    let mut agent_1 = Agent::new(
        &config.agent_1,
        &AgentContext {
            seat: Seat::P1,
            type_id: &config.type_id,
            game,
            conventions: conventions_1,
            match_stages: config.stages,
            sample_seed: seed.seat_1,
        },
    )?;
    let mut agent_2 = Agent::new(
        &config.agent_2,
        &AgentContext {
            seat: Seat::P2,
            type_id: &config.type_id,
            game,
            conventions: conventions_2,
            match_stages: config.stages,
            sample_seed: seed.seat_2,
        },
    )?;

    let stages = config.stages as usize;
    let mut history = History::new();
    let mut strat_1 = Vec::with_capacity(stages);
    let mut strat_2 = Vec::with_capacity(stages);
    for t in 0..stages {
        let s1 = agent_1
            .act(game, history.stages())
            .map_err(|e| SiError::InvalidInput(format!("stage {}: seat 1: {e}", t + 1)))?;
        let s2 = agent_2
            .act(game, history.stages())
            .map_err(|e| SiError::InvalidInput(format!("stage {}: seat 2: {e}", t + 1)))?;
        let a1 = agent_1.sample(&s1);
        let a2 = agent_2.sample(&s2);
        strat_1.push(s1);
        strat_2.push(s2);
        history.push(JointAction::new(a1, a2));
    }

    let trace = MatchTrace {
        type_id: config.type_id.clone(),
        seed,
        history,
        strat_1,
        strat_2,
        switch_stage_1: agent_1.switch_stage(),
        switch_stage_2: agent_2.switch_stage(),
    };
    debug_assert!(trace.validate(game).is_ok());
    Ok(trace)
}

/// Which regret functional a consistency check compares against epsilon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsistencyFlavor {
    Stochastic,
    Adversarial,
}

/// Per-trial consistency verdict for one seat of one trace.
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyVerdict {
    pub seat: u8,
    pub flavor: ConsistencyFlavor,
    /// Realized regret of the flavor, divided by T.
    pub normalized_regret: f64,
    /// Expected-variant regret of the flavor, divided by T.
    pub expected_normalized: f64,
    /// The surely-bounded accounting of the flavor: for the stochastic
    /// flavor, realized regret frozen at the fallback's switch point (the
    /// post-switch recommendation equals the recorded strategy, so expected
    /// increments vanish); for the adversarial flavor, the expected regret of
    /// the full trace.
    pub accounted_normalized: f64,
    /// Largest absolute expected stochastic-regret increment at or after the
    /// seat's switch stage. Zero when the seat never switched.
    pub max_post_switch_expected_increment: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

struct SeatSeries {
    external: f64,
    stochastic: f64,
    expected_external: f64,
    expected_stochastic: f64,
    accounted_stochastic: f64,
    max_post_switch_increment: f64,
}

fn seat_series(trace: &MatchTrace, game: &MatrixGame, seat: Seat) -> Result<SeatSeries> {
    let strategies = trace.strategies(seat);
    if strategies.len() != trace.history.len() {
        return Err(SiError::InvalidInput(
            "trace strategy records do not align with its history".into(),
        ));
    }
    let switch = trace.switch_stage(seat);
    let mut table = CumulativePayoffTable::new(seat, game.n_actions());
    let mut accounted = 0.0;
    let mut max_increment: f64 = 0.0;
    for (idx, (&joint, strategy)) in trace.history.stages().iter().zip(strategies).enumerate() {
        let stage = idx + 1;
        let fp = table.fp_next();
        let partner = joint.action_of(seat.other());
        let increment =
            game.mixed_payoff_vs(seat, &fp, partner) - game.mixed_payoff_vs(seat, strategy, partner);
        table.advance(game, joint, Some(strategy));
        match switch {
            Some(s) if stage >= s => max_increment = max_increment.max(increment.abs()),
            _ => accounted = table.stochastic(),
        }
    }
    Ok(SeatSeries {
        external: table.external(),
        stochastic: table.stochastic(),
        expected_external: table.expected_external()?,
        expected_stochastic: table.expected_stochastic()?,
        accounted_stochastic: accounted,
        max_post_switch_increment: max_increment,
    })
}

/// Normalized realized regret of `seat` compared against `epsilon`, with
/// expected-regret diagnostics attached.
pub fn check_consistency(
    trace: &MatchTrace,
    game: &MatrixGame,
    epsilon: f64,
    flavor: ConsistencyFlavor,
    seat: Seat,
) -> Result<ConsistencyVerdict> {
    if trace.history.is_empty() {
        return Err(SiError::InvalidInput("consistency needs a nonempty trace".into()));
    }
    let series = seat_series(trace, game, seat)?;
    let t = trace.history.len() as f64;
    let (value, expected, accounted) = match flavor {
        ConsistencyFlavor::Stochastic => (
            series.stochastic / t,
            series.expected_stochastic / t,
            series.accounted_stochastic / t,
        ),
        ConsistencyFlavor::Adversarial => (
            series.external / t,
            series.expected_external / t,
            series.expected_external / t,
        ),
    };
    Ok(ConsistencyVerdict {
        seat: seat.number(),
        flavor,
        normalized_regret: value,
        expected_normalized: expected,
        accounted_normalized: accounted,
        max_post_switch_expected_increment: series.max_post_switch_increment,
        threshold: epsilon,
        satisfied: value <= epsilon,
    })
}

/// Per-trial compatibility verdict: how far the observed payoff profile falls
/// short of each PONE profile.
#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityVerdict {
    /// `shortfalls[k] = (p1(s_k) - p1(h), p2(s_k) - p2(h))` per PONE profile.
    pub shortfalls: Vec<(f64, f64)>,
    /// Index of a PONE profile witnessing satisfaction, if any.
    pub witness: Option<usize>,
    /// Smallest shortfall over all PONE profiles and seats.
    pub min_shortfall: f64,
    /// Some PONE profile leaves some seat within epsilon (the definition's
    /// literal existential reading).
    pub satisfied: bool,
    /// No PONE profile exceeds epsilon on *both* seats (the stricter
    /// universal reading, reported alongside).
    pub strictly_satisfied: bool,
    pub threshold: f64,
}

/// Evaluates compatibility of a finished trace against the game's PONE set.
pub fn check_compatibility(
    trace: &MatchTrace,
    pone: &EquilibriumSet,
    game: &MatrixGame,
    epsilon: f64,
) -> Result<CompatibilityVerdict> {
    if pone.profiles.is_empty() {
        return Err(SiError::InvalidInput("compatibility needs a nonempty PONE set".into()));
    }
    let observed = empirical_payoff(&trace.history, game)?;
    let mut shortfalls = Vec::with_capacity(pone.profiles.len());
    let mut witness = None;
    let mut min_shortfall = f64::INFINITY;
    let mut strictly = true;
    for (k, profile) in pone.profiles.iter().enumerate() {
        let target = expected_payoff(game, &profile.s1, &profile.s2)?;
        let d1 = target.p1 - observed.p1;
        let d2 = target.p2 - observed.p2;
        shortfalls.push((d1, d2));
        let best = d1.min(d2);
        if best < min_shortfall {
            min_shortfall = best;
        }
        if best <= epsilon && witness.is_none() {
            witness = Some(k);
        }
        if d1 > epsilon && d2 > epsilon {
            strictly = false;
        }
    }
    Ok(CompatibilityVerdict {
        shortfalls,
        witness,
        min_shortfall,
        satisfied: witness.is_some(),
        strictly_satisfied: strictly,
        threshold: epsilon,
    })
}

/// Epsilon choice of an experiment: a literal value or a directive that
/// derives it from `(delta, T, N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonSpec {
    Value(f64),
    Directive(String),
}

/// Epsilon resolved for one game type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedEpsilon {
    /// Threshold scale handed to fallback agents.
    pub agent: f64,
    /// Radius the consistency and compatibility verdicts compare against.
    pub certification: f64,
}

impl EpsilonSpec {
    pub fn resolve(&self, stages: u64, delta: f64, n_actions: usize) -> Result<ResolvedEpsilon> {
        match self {
            EpsilonSpec::Value(v) => {
                if *v <= 0.0 {
                    return Err(SiError::InvalidInput(format!(
                        "epsilon must be positive, got {v}"
                    )));
                }
                Ok(ResolvedEpsilon {
                    agent: *v,
                    certification: *v,
                })
            }
            EpsilonSpec::Directive(d) if d == "from_theorem_1" => {
                let p = agents::stochastic_si_params(stages, delta)?;
                Ok(ResolvedEpsilon {
                    agent: p.epsilon,
                    certification: p.epsilon,
                })
            }
            EpsilonSpec::Directive(d) if d == "from_theorem_2" => {
                let p = agents::adversarial_si_params(stages, delta, n_actions)?;
                Ok(ResolvedEpsilon {
                    agent: p.epsilon1,
                    certification: p.epsilon,
                })
            }
            EpsilonSpec::Directive(other) => Err(SiError::Parse(format!(
                "unknown epsilon directive `{other}` (expected a number, \"from_theorem_1\", or \"from_theorem_2\")"
            ))),
        }
    }
}

/// A class member or zoo partner: its spec plus the convention map it uses
/// (None = the experiment's shared map).
#[derive(Debug, Clone)]
pub struct ExperimentAgent {
    pub spec: AgentSpec,
    pub conventions: Option<ConventionMap>,
}

impl ExperimentAgent {
    pub fn shared(spec: AgentSpec) -> Self {
        ExperimentAgent {
            spec,
            conventions: None,
        }
    }
}

/// A fully resolved experiment: everything needed to certify a class.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub catalog: GameCatalog,
    pub conventions: ConventionMap,
    pub delta: f64,
    pub epsilon: EpsilonSpec,
    pub stages: u64,
    pub trials: u64,
    pub flavor: ConsistencyFlavor,
    pub class: Vec<ExperimentAgent>,
    pub zoo: Vec<ExperimentAgent>,
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(SiError::InvalidInput(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.trials < 1 {
            return Err(SiError::InvalidInput("an experiment needs at least one trial".into()));
        }
        if self.stages < 1 {
            return Err(SiError::InvalidInput("an experiment needs at least one stage".into()));
        }
        if self.class.is_empty() {
            return Err(SiError::InvalidInput("an experiment needs a nonempty class".into()));
        }
        // The regret bounds assume payoffs in [0, 1]; reject anything else.
        for (id, game) in self.catalog.iter() {
            if !game.is_normalized() {
                return Err(SiError::InvalidInput(format!(
                    "game `{id}` has payoffs outside [0, 1]; certification requires normalized games"
                )));
            }
        }
        for id in self.catalog.ids() {
            if !self.conventions.contains(id) {
                return Err(SiError::InvalidInput(format!(
                    "shared convention map does not cover type `{id}`"
                )));
            }
        }
        Ok(())
    }
}

/// Injects the resolved epsilon into fallback-style specs that did not pin
/// their own, so agent thresholds and verdict radii stay in lockstep.
fn with_epsilon(spec: &AgentSpec, epsilon: f64) -> AgentSpec {
    let mut spec = spec.clone();
    let takes_epsilon = matches!(
        spec.kind,
        AgentKind::StochasticFallback | AgentKind::AdversarialFallback | AgentKind::SecretCode
    );
    if takes_epsilon && spec.params.epsilon.is_none() {
        spec.params.epsilon = Some(epsilon);
    }
    spec
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum PairingKind {
    Consistency,
    Compatibility,
}

#[derive(Debug, Clone)]
struct Pairing {
    label: String,
    kind: PairingKind,
    type_id: TypeId,
    /// Index into `class`.
    member: usize,
    /// Consistency: the partner. Compatibility: the second class member.
    partner: PartnerRef,
    /// Seat the measured member occupies (consistency only; compatibility
    /// measures the joint profile).
    seat: Seat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PartnerRef {
    Zoo(usize),
    Class(usize),
}

/// One row of the per-trial CSV: one verdict of one trial.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub pairing: String,
    pub kind: String,
    pub type_id: TypeId,
    pub trial: u64,
    pub seed: u64,
    /// Measured seat (consistency) or 0 (compatibility).
    pub seat: u8,
    /// Normalized realized regret, or the minimum PONE shortfall.
    pub value: f64,
    /// Expected-regret diagnostic (consistency) or the strict-reading flag as
    /// 0/1 (compatibility).
    pub expected_value: f64,
    /// Surely-bounded accounting of the regret (consistency only).
    pub accounted_value: f64,
    pub threshold: f64,
    pub satisfied: bool,
    pub max_post_switch_expected_increment: f64,
    pub switch_stage_1: Option<usize>,
    pub switch_stage_2: Option<usize>,
}

impl TrialRecord {
    pub fn csv_header() -> &'static str {
        "pairing,kind,type_id,trial,seed,seat,value,expected_value,accounted_value,threshold,satisfied,max_post_switch_expected_increment,switch_stage_1,switch_stage_2"
    }

    pub fn to_csv_row(&self) -> String {
        let opt = |o: Option<usize>| o.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.pairing,
            self.kind,
            self.type_id,
            self.trial,
            self.seed,
            self.seat,
            self.value,
            self.expected_value,
            self.accounted_value,
            self.threshold,
            self.satisfied,
            self.max_post_switch_expected_increment,
            opt(self.switch_stage_1),
            opt(self.switch_stage_2),
        )
    }
}

/// Aggregate of one pairing over all its trials.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictAggregate {
    pub pairing: String,
    pub kind: String,
    pub type_id: TypeId,
    pub seat: u8,
    pub trials: u64,
    pub successes: u64,
    pub rate: f64,
    /// Two-sided 99% exact binomial interval around the rate.
    pub ci_low: f64,
    pub ci_high: f64,
    /// The `1 - delta` requirement the rate is held against.
    pub required_rate: f64,
    /// Lower one-sided 99% bound exceeds `required_rate - 0.02`.
    pub pass: bool,
    /// Trials in which the measured member switched to its inner agent.
    pub switch_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Full certification report.
#[derive(Debug, Clone, Serialize)]
pub struct SiReport {
    pub tool_version: String,
    pub master_seed: u64,
    /// Hash of the configuration files; attached by the CLI.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub delta: f64,
    pub stages: u64,
    pub trials_per_pairing: u64,
    pub flavor: ConsistencyFlavor,
    pub epsilon_by_type: BTreeMap<TypeId, ResolvedEpsilon>,
    pub consistency: Vec<VerdictAggregate>,
    pub compatibility: Vec<VerdictAggregate>,
    pub overall_pass: bool,
    /// Per-trial rows; serialized separately as CSV.
    #[serde(skip)]
    pub trial_records: Vec<TrialRecord>,
}

impl SiReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn trials_csv(&self) -> String {
        let mut out = String::from(TrialRecord::csv_header());
        out.push('\n');
        for row in &self.trial_records {
            out.push_str(&row.to_csv_row());
            out.push('\n');
        }
        out
    }
}

/// Exact (Clopper-Pearson) two-sided binomial confidence interval.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    assert!(confidence > 0.0 && confidence < 1.0);
    let alpha = 1.0 - confidence;
    (
        cp_lower_bound(successes, trials, alpha / 2.0),
        cp_upper_bound(successes, trials, alpha / 2.0),
    )
}

/// One-sided lower Clopper-Pearson bound at level `1 - alpha`.
pub fn cp_lower_bound(successes: u64, trials: u64, alpha: f64) -> f64 {
    if successes == 0 {
        return 0.0;
    }
    let a = successes as f64;
    let b = (trials - successes) as f64 + 1.0;
    Beta::new(a, b).expect("valid Beta parameters").inverse_cdf(alpha)
}

/// One-sided upper Clopper-Pearson bound at level `1 - alpha`.
pub fn cp_upper_bound(successes: u64, trials: u64, alpha: f64) -> f64 {
    if successes == trials {
        return 1.0;
    }
    let a = successes as f64 + 1.0;
    let b = (trials - successes) as f64;
    Beta::new(a, b).expect("valid Beta parameters").inverse_cdf(1.0 - alpha)
}

/// The report's finite-sample acceptance rule for a `>= 1 - delta`
/// requirement: the one-sided 99% lower bound on the success rate must
/// exceed `1 - delta - 0.02`.
pub fn meets_probability_requirement(successes: u64, trials: u64, required_rate: f64) -> bool {
    cp_lower_bound(successes, trials, 0.01) > required_rate - 0.02
}

/// Runs the full certification: every class member's consistency against
/// every zoo partner and every class member (both seats, every type), and
/// compatibility of every ordered class pair on every type.
pub fn certify_si(
    class: &[ExperimentAgent],
    experiment: &ExperimentConfig,
    master_seed: u64,
) -> Result<SiReport> {
    let mut experiment_for_run = experiment.clone();
    experiment_for_run.class = class.to_vec();
    let exp = &experiment_for_run;
    exp.validate()?;

    // Per-type solver products and resolved epsilons.
    let mut epsilon_by_type = BTreeMap::new();
    let mut pone_by_type: BTreeMap<TypeId, EquilibriumSet> = BTreeMap::new();
    for (id, game) in exp.catalog.iter() {
        let eqs = enumerate_nash(game, SOLVE_TOL)?;
        pone_by_type.insert(id.clone(), pone_filter(&eqs, game));
        epsilon_by_type.insert(id.clone(), exp.epsilon.resolve(exp.stages, exp.delta, game.n_actions())?);
    }

    let member_label = |i: usize| format!("class.{i}:{}", exp.class[i].spec.label());
    let partner_label = |p: PartnerRef| match p {
        PartnerRef::Zoo(i) => format!("zoo.{i}:{}", exp.zoo[i].spec.label()),
        PartnerRef::Class(i) => format!("class.{i}:{}", exp.class[i].spec.label()),
    };

    let mut pairings = Vec::new();
    for m in 0..exp.class.len() {
        let partners: Vec<PartnerRef> = (0..exp.zoo.len())
            .map(PartnerRef::Zoo)
            .chain((0..exp.class.len()).map(PartnerRef::Class))
            .collect();
        for partner in partners {
            for seat in [Seat::P1, Seat::P2] {
                for type_id in exp.catalog.ids() {
                    pairings.push(Pairing {
                        label: format!(
                            "consistency/{}/vs={}/seat={}/type={}",
                            member_label(m),
                            partner_label(partner),
                            seat.number(),
                            type_id
                        ),
                        kind: PairingKind::Consistency,
                        type_id: type_id.clone(),
                        member: m,
                        partner,
                        seat,
                    });
                }
            }
        }
    }
    for i in 0..exp.class.len() {
        for j in 0..exp.class.len() {
            for type_id in exp.catalog.ids() {
                pairings.push(Pairing {
                    label: format!(
                        "compatibility/{}/with={}/type={}",
                        member_label(i),
                        member_label(j),
                        type_id
                    ),
                    kind: PairingKind::Compatibility,
                    type_id: type_id.clone(),
                    member: i,
                    partner: PartnerRef::Class(j),
                    seat: Seat::P1,
                });
            }
        }
    }

    // All (pairing, trial) tasks, evaluated in parallel, collected in order.
    let tasks: Vec<(usize, u64)> = (0..pairings.len())
        .flat_map(|p| (0..exp.trials).map(move |t| (p, t)))
        .collect();
    let results: Vec<Result<TrialRecord>> = tasks
        .par_iter()
        .map(|&(p_idx, trial)| {
            run_trial(
                exp,
                &pairings[p_idx],
                trial,
                master_seed,
                &pone_by_type,
                &epsilon_by_type,
            )
        })
        .collect();

    // Aggregate in pairing order.
    let mut consistency = Vec::new();
    let mut compatibility = Vec::new();
    let mut trial_records = Vec::new();
    let required_rate = 1.0 - exp.delta;
    for (p_idx, pairing) in pairings.iter().enumerate() {
        let slice = &results[p_idx as usize * exp.trials as usize..][..exp.trials as usize];
        let mut successes = 0u64;
        let mut switch_count = 0u64;
        let mut error: Option<String> = None;
        for r in slice {
            match r {
                Ok(rec) => {
                    if rec.satisfied {
                        successes += 1;
                    }
                    let member_switched = match pairing.kind {
                        PairingKind::Consistency => match pairing.seat {
                            Seat::P1 => rec.switch_stage_1.is_some(),
                            Seat::P2 => rec.switch_stage_2.is_some(),
                        },
                        PairingKind::Compatibility => {
                            rec.switch_stage_1.is_some() || rec.switch_stage_2.is_some()
                        }
                    };
                    if member_switched {
                        switch_count += 1;
                    }
                    trial_records.push(rec.clone());
                }
                Err(e) => {
                    if error.is_none() {
                        error = Some(e.to_string());
                    }
                }
            }
        }
        let n = slice.iter().filter(|r| r.is_ok()).count() as u64;
        let (rate, ci_low, ci_high, pass) = if n > 0 && error.is_none() {
            let (lo, hi) = clopper_pearson(successes, n, 0.99);
            (
                successes as f64 / n as f64,
                lo,
                hi,
                meets_probability_requirement(successes, n, required_rate),
            )
        } else {
            (0.0, 0.0, 0.0, false)
        };
        let aggregate = VerdictAggregate {
            pairing: pairing.label.clone(),
            kind: match pairing.kind {
                PairingKind::Consistency => "consistency".into(),
                PairingKind::Compatibility => "compatibility".into(),
            },
            type_id: pairing.type_id.clone(),
            seat: match pairing.kind {
                PairingKind::Consistency => pairing.seat.number(),
                PairingKind::Compatibility => 0,
            },
            trials: exp.trials,
            successes,
            rate,
            ci_low,
            ci_high,
            required_rate,
            pass,
            switch_count,
            error,
        };
        match pairing.kind {
            PairingKind::Consistency => consistency.push(aggregate),
            PairingKind::Compatibility => compatibility.push(aggregate),
        }
    }

    let overall_pass = consistency.iter().all(|a| a.pass && a.error.is_none())
        && compatibility.iter().all(|a| a.pass && a.error.is_none());
    Ok(SiReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed,
        config_hash: None,
        delta: exp.delta,
        stages: exp.stages,
        trials_per_pairing: exp.trials,
        flavor: exp.flavor,
        epsilon_by_type,
        consistency,
        compatibility,
        overall_pass,
        trial_records,
    })
}

/// Runs the experiment exactly as configured (its own class field).
pub fn monte_carlo(experiment: &ExperimentConfig, master_seed: u64) -> Result<SiReport> {
    certify_si(&experiment.class, experiment, master_seed)
}

fn run_trial(
    exp: &ExperimentConfig,
    pairing: &Pairing,
    trial: u64,
    master_seed: u64,
    pone_by_type: &BTreeMap<TypeId, EquilibriumSet>,
    epsilon_by_type: &BTreeMap<TypeId, ResolvedEpsilon>,
) -> Result<TrialRecord> {
    let seed = seeding::trial_seed(master_seed, &pairing.label, trial);
    let game = exp.catalog.get(&pairing.type_id)?;
    let eps = &epsilon_by_type[&pairing.type_id];

    let member = &exp.class[pairing.member];
    let partner = match pairing.partner {
        PartnerRef::Zoo(i) => &exp.zoo[i],
        PartnerRef::Class(i) => &exp.class[i],
    };
    let member_spec = with_epsilon(&member.spec, eps.agent);
    let partner_spec = with_epsilon(&partner.spec, eps.agent);

    let (spec_1, spec_2, conv_1, conv_2) = match (pairing.kind, pairing.seat) {
        (PairingKind::Compatibility, _) | (PairingKind::Consistency, Seat::P1) => (
            member_spec,
            partner_spec,
            member.conventions.as_ref(),
            partner.conventions.as_ref(),
        ),
        (PairingKind::Consistency, Seat::P2) => (
            partner_spec,
            member_spec,
            partner.conventions.as_ref(),
            member.conventions.as_ref(),
        ),
    };
    let config = MatchConfig {
        type_id: pairing.type_id.clone(),
        agent_1: spec_1,
        agent_2: spec_2,
        stages: exp.stages,
        seed,
    };
    let trace = run_match_with(
        &config,
        &exp.catalog,
        conv_1.or(Some(&exp.conventions)),
        conv_2.or(Some(&exp.conventions)),
    )?;

    let record = match pairing.kind {
        PairingKind::Consistency => {
            let verdict = check_consistency(&trace, game, eps.certification, exp.flavor, pairing.seat)?;
            TrialRecord {
                pairing: pairing.label.clone(),
                kind: "consistency".into(),
                type_id: pairing.type_id.clone(),
                trial,
                seed,
                seat: verdict.seat,
                value: verdict.normalized_regret,
                expected_value: verdict.expected_normalized,
                accounted_value: verdict.accounted_normalized,
                threshold: verdict.threshold,
                satisfied: verdict.satisfied,
                max_post_switch_expected_increment: verdict.max_post_switch_expected_increment,
                switch_stage_1: trace.switch_stage_1,
                switch_stage_2: trace.switch_stage_2,
            }
        }
        PairingKind::Compatibility => {
            let pone = &pone_by_type[&pairing.type_id];
            let verdict = check_compatibility(&trace, pone, game, eps.certification)?;
            TrialRecord {
                pairing: pairing.label.clone(),
                kind: "compatibility".into(),
                type_id: pairing.type_id.clone(),
                trial,
                seed,
                seat: 0,
                value: verdict.min_shortfall,
                expected_value: if verdict.strictly_satisfied { 1.0 } else { 0.0 },
                accounted_value: verdict.min_shortfall,
                threshold: verdict.threshold,
                satisfied: verdict.satisfied,
                max_post_switch_expected_increment: 0.0,
                switch_stage_1: trace.switch_stage_1,
                switch_stage_2: trace.switch_stage_2,
            }
        }
    };
    Ok(record)
}

/// Outcome of repeatedly replaying a fixed strategy profile and measuring
/// how often the prefix-maximum regrets exceed the concentration bounds.
#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub trials: u64,
    pub stages: u64,
    pub delta: f64,
    /// `sqrt(2T ln(2/delta))`.
    pub expected_bound: f64,
    /// `2 sqrt(2T ln(4/delta))`.
    pub realized_bound: f64,
    /// Trials where either seat's prefix-max expected external regret
    /// exceeded `expected_bound`.
    pub expected_exceed: u64,
    /// Trials where either seat's prefix-max realized external regret
    /// exceeded `realized_bound`.
    pub realized_exceed: u64,
}

/// Both seats replay `(s1, s2)` for `stages` stages, `trials` times; counts
/// how often `max_{t<=T}` of the external regrets exceeds the Nash-play
/// bounds at `delta`.
pub fn nash_replay_tail(
    game: &MatrixGame,
    s1: &crate::game::MixedStrategy,
    s2: &crate::game::MixedStrategy,
    stages: u64,
    trials: u64,
    delta: f64,
    master_seed: u64,
) -> Result<TailReport> {
    if trials < 1 {
        return Err(SiError::InvalidInput("tail experiment needs at least one trial".into()));
    }
    let (expected_bound, realized_bound) = regret::nash_play_bounds(stages, delta)?;
    let exceed: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seed = seeding::trial_seed(master_seed, "nash-replay-tail", trial);
            let mut rng = seeding::rng_from(seed);
            let mut t1 = CumulativePayoffTable::new(Seat::P1, game.n_actions());
            let mut t2 = CumulativePayoffTable::new(Seat::P2, game.n_actions());
            for _ in 0..stages {
                let a1 = crate::game::sample_action(s1, &mut rng);
                let a2 = crate::game::sample_action(s2, &mut rng);
                let joint = JointAction::new(a1, a2);
                t1.advance(game, joint, Some(s1));
                t2.advance(game, joint, Some(s2));
            }
            let expected_hit = t1.max_prefix().expected_external > expected_bound
                || t2.max_prefix().expected_external > expected_bound;
            let realized_hit = t1.max_prefix().external > realized_bound
                || t2.max_prefix().external > realized_bound;
            (expected_hit, realized_hit)
        })
        .collect();
    Ok(TailReport {
        trials,
        stages,
        delta,
        expected_bound,
        realized_bound,
        expected_exceed: exceed.iter().filter(|(e, _)| *e).count() as u64,
        realized_exceed: exceed.iter().filter(|(_, r)| *r).count() as u64,
    })
}

// ---------------------------------------------------------------------------
// Config documents
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct MatchDoc {
    catalog: String,
    #[serde(default)]
    conventions: Option<String>,
    #[serde(default)]
    policy: Option<String>,
    type_id: String,
    #[serde(rename = "T")]
    stages: u64,
    seed: u64,
    agent_1: AgentSpec,
    agent_2: AgentSpec,
}

/// A match file resolved against its referenced catalog and conventions.
#[derive(Debug)]
pub struct LoadedMatch {
    pub config: MatchConfig,
    pub catalog: GameCatalog,
    pub conventions: Option<ConventionMap>,
    pub conventions_1: Option<ConventionMap>,
    pub conventions_2: Option<ConventionMap>,
    /// Files that define this match, for reproduction hashes.
    pub source_files: Vec<std::path::PathBuf>,
}

impl LoadedMatch {
    pub fn run(&self) -> Result<MatchTrace> {
        run_match_with(
            &self.config,
            &self.catalog,
            self.conventions_1.as_ref().or(self.conventions.as_ref()),
            self.conventions_2.as_ref().or(self.conventions.as_ref()),
        )
    }
}

fn resolve_relative(base: &Path, raw: &str) -> std::path::PathBuf {
    let p = Path::new(raw);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Resolves a spec-level convention reference (path or inline profiles).
pub fn resolve_convention_ref(
    reference: &ConventionRef,
    catalog: &GameCatalog,
    base: &Path,
) -> Result<(ConventionMap, Option<std::path::PathBuf>)> {
    match reference {
        ConventionRef::Path(p) => {
            let path = resolve_relative(base, p);
            Ok((ConventionMap::load_path(&path, catalog)?, Some(path)))
        }
        ConventionRef::Inline(entries) => {
            let raw = entries
                .iter()
                .map(|(id, e)| (id.clone(), e.s1.clone(), e.s2.clone()));
            Ok((ConventionMap::from_raw(raw, catalog)?, None))
        }
    }
}

/// Loads a match configuration file (TOML), resolving its catalog and
/// convention references relative to the file's directory.
pub fn load_match_file(path: &Path) -> Result<LoadedMatch> {
    let text = std::fs::read_to_string(path)?;
    let doc: MatchDoc = toml::from_str(&text).map_err(|e| SiError::Parse(format!("match config: {e}")))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();

    let catalog_path = resolve_relative(&base, &doc.catalog);
    let catalog = GameCatalog::load_path(&catalog_path)?;
    let mut source_files = vec![path.to_path_buf(), catalog_path];

    let conventions = match &doc.conventions {
        Some(p) => {
            let conv_path = resolve_relative(&base, p);
            let map = ConventionMap::load_path(&conv_path, &catalog)?;
            source_files.push(conv_path);
            Some(map)
        }
        None => {
            let needs_conventions = [&doc.agent_1, &doc.agent_2].iter().any(|s| {
                matches!(
                    s.kind,
                    AgentKind::StochasticFallback | AgentKind::AdversarialFallback | AgentKind::SecretCode
                )
            });
            if needs_conventions {
                let policy = match &doc.policy {
                    Some(p) => TieBreakPolicy::from_id(p)?,
                    None => TieBreakPolicy::default(),
                };
                Some(convention(&catalog, policy)?)
            } else {
                None
            }
        }
    };

    let mut resolve_agent = |spec: &AgentSpec| -> Result<Option<ConventionMap>> {
        match &spec.convention_ref {
            Some(r) => {
                let (map, file) = resolve_convention_ref(r, &catalog, &base)?;
                if let Some(f) = file {
                    source_files.push(f);
                }
                Ok(Some(map))
            }
            None => Ok(None),
        }
    };
    let conventions_1 = resolve_agent(&doc.agent_1)?;
    let conventions_2 = resolve_agent(&doc.agent_2)?;

    Ok(LoadedMatch {
        config: MatchConfig {
            type_id: doc.type_id,
            agent_1: doc.agent_1,
            agent_2: doc.agent_2,
            stages: doc.stages,
            seed: doc.seed,
        },
        catalog,
        conventions,
        conventions_1,
        conventions_2,
        source_files,
    })
}

#[derive(Debug, Deserialize)]
struct ExperimentDoc {
    catalog: String,
    #[serde(default)]
    conventions: Option<String>,
    #[serde(default)]
    policy: Option<String>,
    delta: f64,
    epsilon: EpsilonSpec,
    #[serde(rename = "T")]
    stages: u64,
    trials: u64,
    flavor: ConsistencyFlavor,
    #[serde(default)]
    seed: Option<u64>,
    class: Vec<AgentSpec>,
    #[serde(default)]
    zoo: Vec<AgentSpec>,
}

/// An experiment file resolved into a runnable [`ExperimentConfig`].
#[derive(Debug)]
pub struct LoadedExperiment {
    pub experiment: ExperimentConfig,
    /// Files that define this experiment, for reproduction hashes.
    pub source_files: Vec<std::path::PathBuf>,
}

/// Loads an experiment configuration file (TOML). Paths inside the file are
/// resolved relative to its directory; a missing `conventions` entry computes
/// the map from the catalog with the configured tie-break policy.
pub fn load_experiment_file(path: &Path) -> Result<LoadedExperiment> {
    let text = std::fs::read_to_string(path)?;
    let doc: ExperimentDoc =
        toml::from_str(&text).map_err(|e| SiError::Parse(format!("experiment config: {e}")))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();

    let catalog_path = resolve_relative(&base, &doc.catalog);
    let catalog = GameCatalog::load_path(&catalog_path)?;
    let mut source_files = vec![path.to_path_buf(), catalog_path];

    let conventions = match &doc.conventions {
        Some(p) => {
            let conv_path = resolve_relative(&base, p);
            let map = ConventionMap::load_path(&conv_path, &catalog)?;
            source_files.push(conv_path);
            map
        }
        None => {
            let policy = match &doc.policy {
                Some(p) => TieBreakPolicy::from_id(p)?,
                None => TieBreakPolicy::default(),
            };
            convention(&catalog, policy)?
        }
    };

    let mut resolve_members = |specs: Vec<AgentSpec>| -> Result<Vec<ExperimentAgent>> {
        specs
            .into_iter()
            .map(|spec| {
                let conventions = match &spec.convention_ref {
                    Some(r) => {
                        let (map, file) = resolve_convention_ref(r, &catalog, &base)?;
                        if let Some(f) = file {
                            source_files.push(f);
                        }
                        Some(map)
                    }
                    None => None,
                };
                Ok(ExperimentAgent { spec, conventions })
            })
            .collect()
    };
    let class = resolve_members(doc.class)?;
    let zoo = resolve_members(doc.zoo)?;

    let experiment = ExperimentConfig {
        catalog,
        conventions,
        delta: doc.delta,
        epsilon: doc.epsilon,
        stages: doc.stages,
        trials: doc.trials,
        flavor: doc.flavor,
        class,
        zoo,
        seed: doc.seed,
    };
    experiment.validate()?;
    Ok(LoadedExperiment {
        experiment,
        source_files,
    })
}
