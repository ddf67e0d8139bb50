//! Agents for repeated matrix games.
//!
//! An agent maps the observed history (realized joint actions only — never
//! the partner's distributions) to a mixed strategy for its seat. The
//! learning agents are fictitious play and multiplicative weights; the two
//! fallback agents play an agreed-upon PONE convention while their
//! accumulated regret stays under a threshold and switch permanently to the
//! learner once it is crossed. A zoo of stress partners (constant, uniform,
//! exploiter, adversary, secret-code) rounds out the set for consistency
//! experiments.
//!
//! All strategy choices are deterministic functions of the observed history;
//! randomness enters only when the harness samples actions from the returned
//! distributions.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equilibria::ConventionMap;
use crate::error::{Result, SiError};
use crate::game::{sample_action, JointAction, MatrixGame, MixedStrategy, Seat};
use crate::regret::CumulativePayoffTable;
use crate::seeding;

/// Agent kinds, as they appear in serialized specs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    FictitiousPlay,
    MultiplicativeWeights,
    StochasticFallback,
    AdversarialFallback,
    Constant,
    UniformRandom,
    BestResponseExploiter,
    RegretAdversary,
    SecretCode,
}

/// Kind-specific parameters; unused fields are ignored by other kinds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    /// Fixed action of the `constant` agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<usize>,
    /// Regret threshold scale of the fallback agents (per-stage units).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Horizon used in thresholds and learning rates; defaults to the match
    /// length.
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    /// Learning-rate override for multiplicative weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Joint-action opening sequence of the `secret_code` agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<Vec<JointAction>>,
    /// Inner consistent agent the `secret_code` agent falls back to when the
    /// partner breaks the code.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<Box<AgentSpec>>,
}

/// Inline convention document: `{ type_id: { s1, s2 } }`.
pub type InlineConventions = BTreeMap<String, InlineConventionEntry>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InlineConventionEntry {
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
}

/// Where an agent's convention map comes from: a file path or inline
/// profiles. Absent means the experiment's shared conventions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConventionRef {
    Path(String),
    Inline(InlineConventions),
}

/// Serializable description of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub kind: AgentKind,
    #[serde(default, skip_serializing_if = "is_default_params")]
    pub params: AgentParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention_ref: Option<ConventionRef>,
}

fn is_default_params(p: &AgentParams) -> bool {
    *p == AgentParams::default()
}

impl AgentSpec {
    pub fn of_kind(kind: AgentKind) -> Self {
        AgentSpec {
            kind,
            params: AgentParams::default(),
            convention_ref: None,
        }
    }

    pub fn fictitious_play() -> Self {
        Self::of_kind(AgentKind::FictitiousPlay)
    }

    pub fn multiplicative_weights() -> Self {
        Self::of_kind(AgentKind::MultiplicativeWeights)
    }

    pub fn stochastic_fallback(epsilon: Option<f64>) -> Self {
        let mut spec = Self::of_kind(AgentKind::StochasticFallback);
        spec.params.epsilon = epsilon;
        spec
    }

    pub fn adversarial_fallback(epsilon: Option<f64>) -> Self {
        let mut spec = Self::of_kind(AgentKind::AdversarialFallback);
        spec.params.epsilon = epsilon;
        spec
    }

    pub fn constant(action: usize) -> Self {
        let mut spec = Self::of_kind(AgentKind::Constant);
        spec.params.action = Some(action);
        spec
    }

    pub fn uniform_random() -> Self {
        Self::of_kind(AgentKind::UniformRandom)
    }

    pub fn best_response_exploiter() -> Self {
        Self::of_kind(AgentKind::BestResponseExploiter)
    }

    pub fn regret_adversary() -> Self {
        Self::of_kind(AgentKind::RegretAdversary)
    }

    pub fn secret_code(code: Vec<JointAction>) -> Self {
        let mut spec = Self::of_kind(AgentKind::SecretCode);
        spec.params.code = Some(code);
        spec
    }

    /// Stable label for pairing ids and report rows.
    pub fn label(&self) -> String {
        let kind = match self.kind {
            AgentKind::FictitiousPlay => "fictitious_play",
            AgentKind::MultiplicativeWeights => "multiplicative_weights",
            AgentKind::StochasticFallback => "stochastic_fallback",
            AgentKind::AdversarialFallback => "adversarial_fallback",
            AgentKind::Constant => "constant",
            AgentKind::UniformRandom => "uniform_random",
            AgentKind::BestResponseExploiter => "best_response_exploiter",
            AgentKind::RegretAdversary => "regret_adversary",
            AgentKind::SecretCode => "secret_code",
        };
        match (self.kind, self.params.action) {
            (AgentKind::Constant, Some(a)) => format!("{kind}({a})"),
            _ => kind.to_string(),
        }
    }
}

/// Default multiplicative-weights learning rate: `sqrt(8 ln(N) / T)`.
pub fn mw_default_eta(n_actions: usize, stages: u64) -> Result<f64> {
    if n_actions < 2 {
        return Err(SiError::InvalidInput(format!(
            "need at least 2 actions, got {n_actions}"
        )));
    }
    if stages < 1 {
        return Err(SiError::InvalidInput("horizon must be at least 1".into()));
    }
    Ok((8.0 * (n_actions as f64).ln() / stages as f64).sqrt())
}

/// Parameters that make the stochastic fallback socially intelligent at
/// `(delta, T)`: the minimal `epsilon0 = 2 sqrt((2/T) ln(4/delta))` and the
/// certification radius `epsilon = epsilon0 + 1/T`.
///
/// The fallback switches exactly when its stochastic regret reaches
/// `epsilon * T - 1 = epsilon0 * T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticSiParams {
    pub epsilon0: f64,
    pub epsilon: f64,
}

pub fn stochastic_si_params(stages: u64, delta: f64) -> Result<StochasticSiParams> {
    check_params_domain(stages, delta)?;
    let t = stages as f64;
    let epsilon0 = 2.0 * (2.0 / t * (4.0 / delta).ln()).sqrt();
    Ok(StochasticSiParams {
        epsilon0,
        epsilon: epsilon0 + 1.0 / t,
    })
}

/// Parameters that make the adversarial fallback socially intelligent at
/// `(delta, T)` in an `N`-action game:
/// `epsilon0 = sqrt((2/T) ln(2/delta))`,
/// `epsilon1 = epsilon0 + sqrt(ln(N) / (2T)) + 1/T`, and the certification
/// radius `epsilon = epsilon1 + sqrt(ln(1/delta) / (2T))` (the per-stage
/// realized-vs-expected gap).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarialSiParams {
    pub epsilon0: f64,
    pub epsilon1: f64,
    pub epsilon: f64,
}

pub fn adversarial_si_params(stages: u64, delta: f64, n_actions: usize) -> Result<AdversarialSiParams> {
    check_params_domain(stages, delta)?;
    if n_actions < 2 {
        return Err(SiError::InvalidInput(format!(
            "need at least 2 actions, got {n_actions}"
        )));
    }
    let t = stages as f64;
    let n = n_actions as f64;
    let epsilon0 = (2.0 / t * (2.0 / delta).ln()).sqrt();
    let epsilon1 = epsilon0 + (n.ln() / (2.0 * t)).sqrt() + 1.0 / t;
    let epsilon = epsilon1 + ((1.0 / delta).ln() / (2.0 * t)).sqrt();
    Ok(AdversarialSiParams {
        epsilon0,
        epsilon1,
        epsilon,
    })
}

fn check_params_domain(stages: u64, delta: f64) -> Result<()> {
    if stages < 1 {
        return Err(SiError::InvalidInput("horizon must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SiError::InvalidInput(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

/// Multiplicative-weights state. Weights live in log space so that long
/// horizons cannot underflow.
#[derive(Debug, Clone)]
pub struct MwState {
    log_weights: Vec<f64>,
}

impl MwState {
    /// Uniform initial weights over `n` actions.
    pub fn uniform(n: usize) -> Self {
        MwState {
            log_weights: vec![0.0; n],
        }
    }

    /// Current strategy: normalized exponential of the log weights.
    pub fn strategy(&self) -> MixedStrategy {
        let max = self.log_weights.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let exp: Vec<f64> = self.log_weights.iter().map(|&w| (w - max).exp()).collect();
        let sum: f64 = exp.iter().sum();
        MixedStrategy::new(exp.iter().map(|e| e / sum).collect())
            .expect("softmax output is a distribution")
    }
}

/// One multiplicative-weights update after observing the partner's action:
/// each weight is multiplied by `exp(eta * payoff(k, partner_action))`.
/// Returns the post-update strategy.
pub fn mw_update(
    state: &mut MwState,
    game: &MatrixGame,
    seat: Seat,
    partner_action: usize,
    eta: f64,
) -> MixedStrategy {
    for (k, w) in state.log_weights.iter_mut().enumerate() {
        *w += eta * game.payoff_vs(seat, k, partner_action);
    }
    state.strategy()
}

/// Convention-while-regret-is-low core shared by the fallback agents.
#[derive(Debug, Clone)]
struct FallbackCore {
    convention: MixedStrategy,
    threshold: f64,
}

#[derive(Debug)]
enum Brain {
    FictitiousPlay {
        table: CumulativePayoffTable,
    },
    MultiplicativeWeights {
        mw: MwState,
        eta: f64,
    },
    /// Plays the convention while realized stochastic regret stays below
    /// `epsilon * T - 1`, then fictitious play for all subsequent stages.
    StochasticFallback {
        core: FallbackCore,
        table: CumulativePayoffTable,
    },
    /// Plays the convention while its own expected external regret stays at
    /// or below `epsilon1 * T - sqrt((T/2) ln N) - 1`, then multiplicative
    /// weights (restarted uniform) for all subsequent stages.
    AdversarialFallback {
        core: FallbackCore,
        table: CumulativePayoffTable,
        mw: Option<MwState>,
        eta: f64,
    },
    Constant {
        action: usize,
    },
    UniformRandom,
    /// Pure best response to the partner's empirical action counts; the
    /// mirror image of fictitious play with lowest-index tie-breaking.
    BestResponseExploiter {
        partner_counts: Vec<u64>,
    },
    /// Picks the action minimizing the partner's expected payoff against the
    /// partner's empirical action distribution. Public information only.
    RegretAdversary {
        partner_counts: Vec<u64>,
    },
    /// Plays a joint-action code, then a convention fallback if the partner
    /// matched it, else an inner consistent agent on the full history.
    SecretCode {
        code: Vec<JointAction>,
        broken: bool,
        inner_done: Box<Agent>,
        inner_broken: Box<Agent>,
    },
}

/// Everything an agent needs to bind a spec to one seat of one match.
#[derive(Clone, Copy)]
pub struct AgentContext<'a> {
    pub seat: Seat,
    pub type_id: &'a str,
    pub game: &'a MatrixGame,
    pub conventions: Option<&'a ConventionMap>,
    /// Match length; the default horizon for thresholds and learning rates.
    pub match_stages: u64,
    /// Seed of this agent's action-sampling stream.
    pub sample_seed: u64,
}

/// A spec bound to a seat, with its mutable match-local state.
#[derive(Debug)]
pub struct Agent {
    seat: Seat,
    stages_seen: usize,
    /// Strategy already returned for the upcoming stage, consumed by the
    /// next observation (the adversarial monitor needs its own mixture).
    pending: Option<MixedStrategy>,
    /// First stage played by the inner agent, once a fallback has switched.
    switch_stage: Option<usize>,
    rng: ChaCha8Rng,
    brain: Brain,
}

impl Agent {
    pub fn new(spec: &AgentSpec, ctx: &AgentContext) -> Result<Agent> {
        let n = ctx.game.n_actions();
        let horizon = spec.params.horizon.unwrap_or(ctx.match_stages);
        if horizon < 1 {
            return Err(SiError::AgentSpec("horizon must be at least 1".into()));
        }
        let brain = match spec.kind {
            AgentKind::FictitiousPlay => Brain::FictitiousPlay {
                table: CumulativePayoffTable::new(ctx.seat, n),
            },
            AgentKind::MultiplicativeWeights => {
                let eta = match spec.params.eta {
                    Some(eta) if eta > 0.0 => eta,
                    Some(eta) => {
                        return Err(SiError::AgentSpec(format!("eta must be positive, got {eta}")))
                    }
                    None => mw_default_eta(n, horizon)?,
                };
                Brain::MultiplicativeWeights {
                    mw: MwState::uniform(n),
                    eta,
                }
            }
            AgentKind::StochasticFallback => {
                let (core, _) = fallback_core(spec, ctx, horizon, |eps, t| eps * t - 1.0)?;
                Brain::StochasticFallback {
                    core,
                    table: CumulativePayoffTable::new(ctx.seat, n),
                }
            }
            AgentKind::AdversarialFallback => {
                let ln_n = (n as f64).ln();
                let (core, t) = fallback_core(spec, ctx, horizon, |eps, t| {
                    eps * t - (t / 2.0 * ln_n).sqrt() - 1.0
                })?;
                let eta = match spec.params.eta {
                    Some(eta) if eta > 0.0 => eta,
                    Some(eta) => {
                        return Err(SiError::AgentSpec(format!("eta must be positive, got {eta}")))
                    }
                    None => mw_default_eta(n, t as u64)?,
                };
                Brain::AdversarialFallback {
                    core,
                    table: CumulativePayoffTable::new(ctx.seat, n),
                    mw: None,
                    eta,
                }
            }
            AgentKind::Constant => {
                let action = spec
                    .params
                    .action
                    .ok_or_else(|| SiError::AgentSpec("constant agent needs an action".into()))?;
                if action >= n {
                    return Err(SiError::AgentSpec(format!(
                        "constant action {action} out of range for {n} actions"
                    )));
                }
                Brain::Constant { action }
            }
            AgentKind::UniformRandom => Brain::UniformRandom,
            AgentKind::BestResponseExploiter => Brain::BestResponseExploiter {
                partner_counts: vec![0; n],
            },
            AgentKind::RegretAdversary => Brain::RegretAdversary {
                partner_counts: vec![0; n],
            },
            AgentKind::SecretCode => {
                let code = spec.params.code.clone().unwrap_or_default();
                for j in &code {
                    if j.a1 >= n || j.a2 >= n {
                        return Err(SiError::AgentSpec(format!(
                            "code action ({}, {}) out of range for {n} actions",
                            j.a1, j.a2
                        )));
                    }
                }
                // After a matched code the agent behaves as the stochastic
                // fallback over the post-code stages.
                let mut done_spec = AgentSpec::stochastic_fallback(spec.params.epsilon);
                done_spec.params.horizon = spec.params.horizon;
                done_spec.convention_ref = spec.convention_ref.clone();
                let done_ctx = AgentContext {
                    sample_seed: seeding::mix(ctx.sample_seed, &[1]),
                    ..*ctx
                };
                let inner_done = Box::new(Agent::new(&done_spec, &done_ctx)?);

                let broken_spec = spec
                    .params
                    .inner
                    .as_deref()
                    .cloned()
                    .unwrap_or_else(AgentSpec::fictitious_play);
                let broken_ctx = AgentContext {
                    sample_seed: seeding::mix(ctx.sample_seed, &[2]),
                    ..*ctx
                };
                let inner_broken = Box::new(Agent::new(&broken_spec, &broken_ctx)?);
                Brain::SecretCode {
                    code,
                    broken: false,
                    inner_done,
                    inner_broken,
                }
            }
        };
        Ok(Agent {
            seat: ctx.seat,
            stages_seen: 0,
            pending: None,
            switch_stage: None,
            rng: seeding::rng_from(ctx.sample_seed),
            brain,
        })
    }

    pub fn seat(&self) -> Seat {
        self.seat
    }

    /// First stage at which a fallback-style agent played its inner agent.
    pub fn switch_stage(&self) -> Option<usize> {
        match &self.brain {
            Brain::SecretCode {
                broken,
                inner_done,
                code,
                ..
            } => {
                if *broken {
                    self.switch_stage
                } else {
                    inner_done.switch_stage().map(|s| s + code.len())
                }
            }
            _ => self.switch_stage,
        }
    }

    /// The strategy for the next stage given everything observed so far.
    ///
    /// `observed` is the full realized history of the match: the agent
    /// ingests any stages it has not seen yet, then computes its mixture.
    /// Passing a history shorter than what was already observed is an error.
    pub fn act(&mut self, game: &MatrixGame, observed: &[JointAction]) -> Result<MixedStrategy> {
        if observed.len() < self.stages_seen {
            return Err(SiError::InvalidInput(format!(
                "observed history has {} stages but this agent already saw {}",
                observed.len(),
                self.stages_seen
            )));
        }
        let n = game.n_actions();
        for joint in &observed[self.stages_seen..] {
            if joint.a1 >= n || joint.a2 >= n {
                return Err(SiError::InvalidInput("joint action out of range".into()));
            }
            self.observe(game, *joint);
        }
        let strategy = self.next_strategy(game, observed)?;
        self.pending = Some(strategy.clone());
        Ok(strategy)
    }

    /// Draws an action from `strategy` using this agent's sampling stream.
    pub fn sample(&mut self, strategy: &MixedStrategy) -> usize {
        sample_action(strategy, &mut self.rng)
    }

    fn observe(&mut self, game: &MatrixGame, joint: JointAction) {
        let own_strategy = self.pending.take();
        let partner = joint.action_of(self.seat.other());
        match &mut self.brain {
            Brain::FictitiousPlay { table } => table.advance(game, joint, None),
            Brain::MultiplicativeWeights { mw, eta } => {
                mw_update(mw, game, self.seat, partner, *eta);
            }
            Brain::StochasticFallback { core, table } => {
                table.advance(game, joint, None);
                if self.switch_stage.is_none() && table.stochastic() >= core.threshold {
                    self.switch_stage = Some(self.stages_seen + 2);
                }
            }
            Brain::AdversarialFallback { core, table, mw, eta } => {
                let own = own_strategy.unwrap_or_else(|| match mw {
                    Some(state) => state.strategy(),
                    None => core.convention.clone(),
                });
                if let Some(state) = mw {
                    // Already switched: the monitor keeps recording, and the
                    // weights absorb this stage's observation.
                    table.advance(game, joint, Some(&own));
                    mw_update(state, game, self.seat, partner, *eta);
                } else {
                    table.advance(game, joint, Some(&own));
                    let expected = table
                        .expected_external()
                        .expect("monitor records a strategy every stage");
                    if expected > core.threshold {
                        self.switch_stage = Some(self.stages_seen + 2);
                        *mw = Some(MwState::uniform(game.n_actions()));
                    }
                }
            }
            Brain::Constant { .. } | Brain::UniformRandom => {}
            Brain::BestResponseExploiter { partner_counts }
            | Brain::RegretAdversary { partner_counts } => {
                partner_counts[partner] += 1;
            }
            Brain::SecretCode { code, broken, .. } => {
                if !*broken && self.stages_seen < code.len() {
                    let expected = code[self.stages_seen].action_of(self.seat.other());
                    if partner != expected {
                        *broken = true;
                        self.switch_stage = Some(self.stages_seen + 2);
                    }
                }
            }
        }
        self.stages_seen += 1;
    }

    fn next_strategy(&mut self, game: &MatrixGame, observed: &[JointAction]) -> Result<MixedStrategy> {
        let n = game.n_actions();
        Ok(match &mut self.brain {
            Brain::FictitiousPlay { table } => table.fp_next(),
            Brain::MultiplicativeWeights { mw, .. } => mw.strategy(),
            Brain::StochasticFallback { core, table } => {
                if self.switch_stage.is_some() {
                    table.fp_next()
                } else {
                    core.convention.clone()
                }
            }
            Brain::AdversarialFallback { core, mw, .. } => match mw {
                Some(state) => state.strategy(),
                None => core.convention.clone(),
            },
            Brain::Constant { action } => MixedStrategy::pure(*action, n),
            Brain::UniformRandom => MixedStrategy::uniform(n),
            Brain::BestResponseExploiter { partner_counts } => {
                let seat = self.seat;
                let scores: Vec<f64> = (0..n)
                    .map(|own| {
                        (0..n)
                            .map(|p| partner_counts[p] as f64 * game.payoff_vs(seat, own, p))
                            .sum::<f64>()
                    })
                    .collect();
                let best = scores.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                // Lowest index among the maxima, so ties break deterministically.
                let lowest = (0..n).find(|&a| scores[a] == best).unwrap_or(0);
                MixedStrategy::pure(lowest, n)
            }
            Brain::RegretAdversary { partner_counts } => {
                let partner_seat = self.seat.other();
                // Partner's expected payoff against its own empirical mixture
                // if we commit to `own`: minimize it.
                let scores: Vec<f64> = (0..n)
                    .map(|own| {
                        (0..n)
                            .map(|p| partner_counts[p] as f64 * game.payoff_vs(partner_seat, p, own))
                            .sum::<f64>()
                    })
                    .collect();
                let worst = scores.iter().fold(f64::INFINITY, |m, &v| m.min(v));
                let lowest = (0..n).find(|&a| scores[a] == worst).unwrap_or(0);
                MixedStrategy::pure(lowest, n)
            }
            Brain::SecretCode {
                code,
                broken,
                inner_done,
                inner_broken,
            } => {
                if *broken {
                    inner_broken.act(game, observed)?
                } else if self.stages_seen < code.len() {
                    MixedStrategy::pure(code[self.stages_seen].action_of(self.seat), n)
                } else {
                    inner_done.act(game, &observed[code.len()..])?
                }
            }
        })
    }
}

fn fallback_core(
    spec: &AgentSpec,
    ctx: &AgentContext,
    horizon: u64,
    threshold_of: impl Fn(f64, f64) -> f64,
) -> Result<(FallbackCore, f64)> {
    let epsilon = spec
        .params
        .epsilon
        .ok_or_else(|| SiError::AgentSpec("fallback agent needs epsilon".into()))?;
    if epsilon <= 0.0 {
        return Err(SiError::AgentSpec(format!(
            "epsilon must be strictly positive, got {epsilon}"
        )));
    }
    let conventions = ctx
        .conventions
        .ok_or_else(|| SiError::AgentSpec("fallback agent needs a convention map".into()))?;
    let profile = conventions.get(ctx.type_id).map_err(|_| {
        SiError::AgentSpec(format!(
            "convention map does not cover type `{}`",
            ctx.type_id
        ))
    })?;
    let convention = profile.strategy(ctx.seat).clone();
    if convention.n_actions() != ctx.game.n_actions() {
        return Err(SiError::AgentSpec(
            "convention profile does not match the game's action count".into(),
        ));
    }
    let t = horizon as f64;
    Ok((
        FallbackCore {
            convention,
            threshold: threshold_of(epsilon, t),
        },
        t,
    ))
}

/// Convenience wrapper for building zoo partners; equivalent to the
/// corresponding [`AgentSpec`] constructors but validates params eagerly.
pub fn zoo_agent(kind: AgentKind, params: AgentParams) -> Result<AgentSpec> {
    let spec = AgentSpec {
        kind,
        params,
        convention_ref: None,
    };
    match kind {
        AgentKind::Constant if spec.params.action.is_none() => {
            Err(SiError::AgentSpec("constant agent needs an action".into()))
        }
        _ => Ok(spec),
    }
}
