//! Regret functionals over match histories.
//!
//! Four quantities are computed for a seat, all from the same cumulative
//! table and all in O(N) per stage:
//!
//! - *external regret*: best fixed action in hindsight minus realized payoff;
//! - *stochastic regret*: the fictitious-play recommendation path minus
//!   realized payoff, holding the partner's actions fixed;
//! - the *expected* variants of both, with the realized payoff replaced by
//!   the payoff of the recorded mixed strategies.
//!
//! Stochastic regret never exceeds external regret; the property-test sweeps
//! in this module and the acceptance suite check that ordering empirically.

use serde::Serialize;

use crate::error::{Result, SiError};
use crate::game::{History, JointAction, MatchTrace, MatrixGame, MixedStrategy, Seat};

/// Tie tolerance on cumulative payoffs when forming the fictitious-play
/// argmax set.
pub const FP_TIE_TOL: f64 = 1e-9;

/// Uniform distribution over the argmax set of a cumulative payoff vector.
///
/// This single function defines fictitious play's tie-breaking everywhere:
/// agents and post-hoc trace analysis share it, so recomputed
/// recommendations are bitwise identical to the recorded ones.
pub fn fp_from_per_action(per_action: &[f64], tie_tol: f64) -> MixedStrategy {
    let best = per_action.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let ties: Vec<usize> = (0..per_action.len())
        .filter(|&a| per_action[a] >= best - tie_tol)
        .collect();
    MixedStrategy::uniform_over(&ties, per_action.len())
}

/// Cumulative counterfactual payoff accounting for one seat.
///
/// `per_action[a]` is the payoff action `a` would have accumulated against
/// the partner's realized actions. Alongside it the table tracks the realized
/// payoff, the fictitious-play recommendation path and its payoff, and (when
/// strategies are recorded) the expected payoff of the played distributions.
#[derive(Debug, Clone)]
pub struct CumulativePayoffTable {
    seat: Seat,
    per_action: Vec<f64>,
    realized: f64,
    fp_counterfactual: f64,
    expected_realized: f64,
    fp_path: Vec<MixedStrategy>,
    stages: usize,
    strategies_seen: usize,
    max_prefix: PrefixMaxima,
    tie_tol: f64,
}

/// Running maxima of each regret over all prefixes seen so far (including
/// the empty prefix, whose regrets are zero).
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct PrefixMaxima {
    pub external: f64,
    pub stochastic: f64,
    pub expected_external: f64,
    pub expected_stochastic: f64,
}

impl CumulativePayoffTable {
    pub fn new(seat: Seat, n_actions: usize) -> Self {
        CumulativePayoffTable {
            seat,
            per_action: vec![0.0; n_actions],
            realized: 0.0,
            fp_counterfactual: 0.0,
            expected_realized: 0.0,
            fp_path: Vec::new(),
            stages: 0,
            strategies_seen: 0,
            max_prefix: PrefixMaxima::default(),
            tie_tol: FP_TIE_TOL,
        }
    }

    pub fn seat(&self) -> Seat {
        self.seat
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn per_action(&self) -> &[f64] {
        &self.per_action
    }

    /// Fictitious-play recommendation for the *next* stage, i.e. the
    /// best response to the partner's empirical play so far.
    pub fn fp_next(&self) -> MixedStrategy {
        fp_from_per_action(&self.per_action, self.tie_tol)
    }

    /// Recommendations issued at stages `1..=stages`.
    pub fn fp_path(&self) -> &[MixedStrategy] {
        &self.fp_path
    }

    /// Consumes one stage. `own_strategy` is the distribution the seat played
    /// from, when known; it feeds the expected-regret variants.
    pub fn advance(
        &mut self,
        game: &MatrixGame,
        joint: JointAction,
        own_strategy: Option<&MixedStrategy>,
    ) {
        let own = joint.action_of(self.seat);
        let partner = joint.action_of(self.seat.other());

        // The recommendation for stage t is formed from the prefix h_{t-1},
        // before this stage's observation lands in the table.
        let fp = self.fp_next();
        self.fp_counterfactual += game.mixed_payoff_vs(self.seat, &fp, partner);
        self.fp_path.push(fp);

        self.realized += game.payoff_vs(self.seat, own, partner);
        if let Some(s) = own_strategy {
            self.expected_realized += game.mixed_payoff_vs(self.seat, s, partner);
            self.strategies_seen += 1;
        }
        for a in 0..self.per_action.len() {
            self.per_action[a] += game.payoff_vs(self.seat, a, partner);
        }
        self.stages += 1;

        self.max_prefix.external = self.max_prefix.external.max(self.external());
        self.max_prefix.stochastic = self.max_prefix.stochastic.max(self.stochastic());
        if self.has_strategies() {
            self.max_prefix.expected_external =
                self.max_prefix.expected_external.max(self.expected_external_unchecked());
            self.max_prefix.expected_stochastic = self
                .max_prefix
                .expected_stochastic
                .max(self.expected_stochastic_unchecked());
        }
    }

    fn best_fixed(&self) -> f64 {
        self.per_action.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// Best fixed action in hindsight minus realized payoff. Zero on the
    /// empty prefix.
    pub fn external(&self) -> f64 {
        if self.stages == 0 {
            return 0.0;
        }
        self.best_fixed() - self.realized
    }

    /// Fictitious-play path payoff minus realized payoff.
    pub fn stochastic(&self) -> f64 {
        self.fp_counterfactual - self.realized
    }

    fn has_strategies(&self) -> bool {
        self.strategies_seen == self.stages
    }

    fn expected_external_unchecked(&self) -> f64 {
        if self.stages == 0 {
            return 0.0;
        }
        self.best_fixed() - self.expected_realized
    }

    fn expected_stochastic_unchecked(&self) -> f64 {
        self.fp_counterfactual - self.expected_realized
    }

    fn require_strategies(&self) -> Result<()> {
        if self.has_strategies() {
            Ok(())
        } else {
            Err(SiError::InvalidInput(
                "expected regrets need a strategy record for every stage".into(),
            ))
        }
    }

    /// Expected-variant external regret; errors when any stage lacks a
    /// recorded strategy.
    pub fn expected_external(&self) -> Result<f64> {
        self.require_strategies()?;
        Ok(self.expected_external_unchecked())
    }

    /// Expected-variant stochastic regret.
    pub fn expected_stochastic(&self) -> Result<f64> {
        self.require_strategies()?;
        Ok(self.expected_stochastic_unchecked())
    }

    pub fn max_prefix(&self) -> PrefixMaxima {
        self.max_prefix
    }
}

fn replay_history(history: &[JointAction], game: &MatrixGame, seat: Seat) -> CumulativePayoffTable {
    let mut table = CumulativePayoffTable::new(seat, game.n_actions());
    for &joint in history {
        table.advance(game, joint, None);
    }
    table
}

fn replay_trace(trace: &MatchTrace, game: &MatrixGame, seat: Seat) -> Result<CumulativePayoffTable> {
    let strategies = trace.strategies(seat);
    if strategies.len() != trace.history.len() {
        return Err(SiError::InvalidInput(
            "trace strategy records do not align with its history".into(),
        ));
    }
    let mut table = CumulativePayoffTable::new(seat, game.n_actions());
    for (&joint, strategy) in trace.history.stages().iter().zip(strategies) {
        table.advance(game, joint, Some(strategy));
    }
    Ok(table)
}

/// External regret of `seat` over a history. Zero on the empty history.
pub fn external_regret(history: &History, game: &MatrixGame, seat: Seat) -> f64 {
    replay_history(history.stages(), game, seat).external()
}

/// The fictitious-play strategy for `seat` given a history: best response to
/// the partner's empirical action distribution, uniform over ties.
pub fn fictitious_play_strategy(
    history: &History,
    game: &MatrixGame,
    seat: Seat,
    tie_tol: f64,
) -> MixedStrategy {
    let mut table = CumulativePayoffTable::new(seat, game.n_actions());
    table.tie_tol = tie_tol;
    for &joint in history.stages() {
        table.advance(game, joint, None);
    }
    table.fp_next()
}

/// Stochastic regret of `seat`: payoff of the per-stage fictitious-play
/// recommendations minus the realized payoff.
pub fn stochastic_regret(history: &History, game: &MatrixGame, seat: Seat) -> f64 {
    replay_history(history.stages(), game, seat).stochastic()
}

/// Expected external regret of `seat`, from the trace's recorded strategies.
pub fn expected_external_regret(trace: &MatchTrace, game: &MatrixGame, seat: Seat) -> Result<f64> {
    replay_trace(trace, game, seat)?.expected_external()
}

/// Expected stochastic regret of `seat`, from the trace's recorded strategies.
pub fn expected_stochastic_regret(trace: &MatchTrace, game: &MatrixGame, seat: Seat) -> Result<f64> {
    replay_trace(trace, game, seat)?.expected_stochastic()
}

/// Stochastic regret never exceeds external regret (up to accumulation
/// error); checked for both seats. Used as a property-test predicate.
pub fn regret_ordering_holds(history: &History, game: &MatrixGame) -> bool {
    [Seat::P1, Seat::P2].iter().all(|&seat| {
        let table = replay_history(history.stages(), game, seat);
        table.stochastic() <= table.external() + 1e-9
    })
}

fn check_horizon_delta(stages: u64, delta: f64) -> Result<()> {
    if stages < 1 {
        return Err(SiError::InvalidInput("horizon must be at least 1".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(SiError::InvalidInput(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    Ok(())
}

/// High-probability gap between realized and expected regret over a
/// `stages`-long match: `sqrt((T/2) ln(1/delta))`.
pub fn azuma_gap(stages: u64, delta: f64) -> Result<f64> {
    check_horizon_delta(stages, delta)?;
    Ok((stages as f64 / 2.0 * (1.0 / delta).ln()).sqrt())
}

/// Regret bounds when both seats repeat a Nash profile of the stage game:
/// `(expected, realized)` = `(sqrt(2T ln(2/delta)), 2 sqrt(2T ln(4/delta)))`,
/// each holding for all prefixes simultaneously with probability `1 - delta`.
pub fn nash_play_bounds(stages: u64, delta: f64) -> Result<(f64, f64)> {
    check_horizon_delta(stages, delta)?;
    let t = stages as f64;
    let expected = (2.0 * t * (2.0 / delta).ln()).sqrt();
    let realized = 2.0 * (2.0 * t * (4.0 / delta).ln()).sqrt();
    Ok((expected, realized))
}

/// The four regret functionals of one seat over one trace, with prefix
/// maxima for the "for all t <= T" statements.
#[derive(Debug, Clone, Serialize)]
pub struct RegretReport {
    pub player: u8,
    pub external: f64,
    pub stochastic: f64,
    pub expected_external: f64,
    pub expected_stochastic: f64,
    pub max_prefix: PrefixMaxima,
}

impl RegretReport {
    pub fn from_trace(trace: &MatchTrace, game: &MatrixGame, seat: Seat) -> Result<Self> {
        let table = replay_trace(trace, game, seat)?;
        let report = RegretReport {
            player: seat.number(),
            external: table.external(),
            stochastic: table.stochastic(),
            expected_external: table.expected_external()?,
            expected_stochastic: table.expected_stochastic()?,
            max_prefix: table.max_prefix(),
        };
        debug_assert!(report.stochastic <= report.external + 1e-9);
        Ok(report)
    }

    pub fn csv_header() -> &'static str {
        "trace_id,player,external,stochastic,expected_external,expected_stochastic,max_prefix_expected_external"
    }

    pub fn to_csv_row(&self, trace_id: &str) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            trace_id,
            self.player,
            self.external,
            self.stochastic,
            self.expected_external,
            self.expected_stochastic,
            self.max_prefix.expected_external
        )
    }
}
