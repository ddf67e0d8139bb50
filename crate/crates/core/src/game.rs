//! Stage games, mixed strategies, histories, and payoff accounting.
//!
//! A [`MatrixGame`] holds both players' `N x N` payoff matrices for one game
//! type. Actions are 0-indexed everywhere, including serialized forms. Row
//! index is player 1's action, column index player 2's. A game is *normalized*
//! when every payoff lies in `[0, 1]`; the regret-bound experiments require
//! normalized games, while the equilibrium solver accepts any finite payoffs.

use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SiError};

/// Identifier of one game type in a catalog.
pub type TypeId = String;

/// Seat of an agent in a match: player 1 picks rows, player 2 picks columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Seat {
    #[serde(rename = "1")]
    P1,
    #[serde(rename = "2")]
    P2,
}

impl Seat {
    pub fn index(self) -> usize {
        match self {
            Seat::P1 => 0,
            Seat::P2 => 1,
        }
    }

    pub fn other(self) -> Seat {
        match self {
            Seat::P1 => Seat::P2,
            Seat::P2 => Seat::P1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl fmt::Display for Seat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Normalization tolerance for mixed strategies: constructors renormalize
/// inputs whose mass deviates from 1 by at most this much and reject worse.
pub const STRATEGY_SUM_SLACK: f64 = 1e-9;

/// After construction a strategy's mass is within this of exactly 1.
pub const STRATEGY_SUM_TOL: f64 = 1e-12;

/// A probability distribution over the `N` pure actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedStrategy {
    probs: Vec<f64>,
}

impl MixedStrategy {
    /// Builds a strategy from raw weights.
    ///
    /// Entries must be nonnegative and sum to 1 within [`STRATEGY_SUM_SLACK`];
    /// small drift is renormalized away.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(SiError::InvalidInput("empty strategy vector".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(SiError::InvalidInput(format!(
                "strategy entries must be finite and nonnegative, got {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > STRATEGY_SUM_SLACK {
            return Err(SiError::InvalidInput(format!(
                "strategy mass {sum} deviates from 1 by more than {STRATEGY_SUM_SLACK}"
            )));
        }
        let probs = if sum == 1.0 {
            probs
        } else {
            probs.iter().map(|p| p / sum).collect()
        };
        Ok(MixedStrategy { probs })
    }

    /// The pure strategy on action `k` out of `n`.
    pub fn pure(k: usize, n: usize) -> Self {
        assert!(k < n, "pure action {k} out of range for {n} actions");
        let mut probs = vec![0.0; n];
        probs[k] = 1.0;
        MixedStrategy { probs }
    }

    /// The uniform distribution over `n` actions.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        MixedStrategy {
            probs: vec![1.0 / n as f64; n],
        }
    }

    /// Uniform distribution over a nonempty subset of `n` actions.
    pub fn uniform_over(actions: &[usize], n: usize) -> Self {
        assert!(!actions.is_empty());
        let w = 1.0 / actions.len() as f64;
        let mut probs = vec![0.0; n];
        for &a in actions {
            assert!(a < n);
            probs[a] = w;
        }
        MixedStrategy { probs }
    }

    pub fn n_actions(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, action: usize) -> f64 {
        self.probs[action]
    }

    /// Indices with strictly positive probability.
    pub fn support(&self) -> Vec<usize> {
        (0..self.probs.len())
            .filter(|&a| self.probs[a] > 0.0)
            .collect()
    }

    /// `Some(action)` when all mass sits on a single action.
    pub fn as_pure(&self) -> Option<usize> {
        let mut it = self.support().into_iter();
        match (it.next(), it.next()) {
            (Some(a), None) => Some(a),
            _ => None,
        }
    }

    /// Largest coordinate-wise difference to another strategy.
    pub fn linf_distance(&self, other: &MixedStrategy) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for MixedStrategy {
    type Error = SiError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        MixedStrategy::new(v)
    }
}

impl From<MixedStrategy> for Vec<f64> {
    fn from(s: MixedStrategy) -> Vec<f64> {
        s.probs
    }
}

/// Draws an action index from `strategy` using the generator's next uniform.
///
/// Deterministic given the generator state; zero-probability actions are never
/// returned.
pub fn sample_action<R: Rng>(strategy: &MixedStrategy, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (a, &p) in strategy.probs().iter().enumerate() {
        if p > 0.0 {
            last_positive = a;
            cum += p;
            if u < cum {
                return a;
            }
        }
    }
    // Mass can round to slightly below 1; fall back to the last viable action.
    last_positive
}

/// One realized stage: the pair of actions actually played.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct JointAction {
    pub a1: usize,
    pub a2: usize,
}

impl JointAction {
    pub fn new(a1: usize, a2: usize) -> Self {
        JointAction { a1, a2 }
    }

    pub fn action_of(&self, seat: Seat) -> usize {
        match seat {
            Seat::P1 => self.a1,
            Seat::P2 => self.a2,
        }
    }
}

impl From<(usize, usize)> for JointAction {
    fn from((a1, a2): (usize, usize)) -> Self {
        JointAction { a1, a2 }
    }
}

impl From<JointAction> for (usize, usize) {
    fn from(j: JointAction) -> (usize, usize) {
        (j.a1, j.a2)
    }
}

/// The realized joint actions of a match prefix.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    stages: Vec<JointAction>,
}

impl History {
    pub fn new() -> Self {
        History::default()
    }

    pub fn from_stages(stages: Vec<JointAction>) -> Self {
        History { stages }
    }

    pub fn push(&mut self, joint: JointAction) {
        self.stages.push(joint);
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn stages(&self) -> &[JointAction] {
        &self.stages
    }

    /// The first `t` stages as a borrowed slice.
    pub fn prefix(&self, t: usize) -> &[JointAction] {
        &self.stages[..t]
    }
}

/// Both players' payoffs for one profile or one history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffProfile {
    pub p1: f64,
    pub p2: f64,
}

impl PayoffProfile {
    pub fn new(p1: f64, p2: f64) -> Self {
        PayoffProfile { p1, p2 }
    }

    pub fn of(&self, seat: Seat) -> f64 {
        match seat {
            Seat::P1 => self.p1,
            Seat::P2 => self.p2,
        }
    }

    pub fn welfare(&self) -> f64 {
        self.p1 + self.p2
    }
}

/// One stage game: both players' `N x N` payoff matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    n_actions: usize,
    // Row-major: payoff_1[a1 * n + a2].
    payoff_1: Vec<f64>,
    payoff_2: Vec<f64>,
    normalized: bool,
}

/// Outcome of structural validation of a candidate payoff-matrix pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameValidation {
    /// Both matrices are square with the same dimension `N >= 2`.
    pub square: bool,
    /// Every entry is finite.
    pub finite: bool,
    /// Every entry lies in `[0, 1]`.
    pub normalized: bool,
    /// Human-readable defects; empty iff `square && finite`.
    pub problems: Vec<String>,
}

impl GameValidation {
    pub fn is_valid(&self) -> bool {
        self.square && self.finite
    }
}

/// Reports squareness, finiteness, and `[0, 1]` membership for a matrix pair.
///
/// Report-valued: malformed shapes are described, not rejected.
pub fn validate_game(payoff_1: &[Vec<f64>], payoff_2: &[Vec<f64>]) -> GameValidation {
    let mut problems = Vec::new();
    let n = payoff_1.len();
    let mut square = n >= 2 && payoff_2.len() == n;
    if payoff_2.len() != n {
        problems.push(format!(
            "matrices disagree on row count: {} vs {}",
            n,
            payoff_2.len()
        ));
    }
    if n < 2 {
        problems.push(format!("need at least 2 actions, got {n} rows"));
    }
    for (name, m) in [("payoff_1", payoff_1), ("payoff_2", payoff_2)] {
        for (i, row) in m.iter().enumerate() {
            if row.len() != n {
                square = false;
                problems.push(format!(
                    "{name} row {i} has {} columns, expected {n}",
                    row.len()
                ));
            }
        }
    }

    let mut finite = true;
    let mut normalized = true;
    for m in [payoff_1, payoff_2] {
        for row in m {
            for &v in row {
                if !v.is_finite() {
                    finite = false;
                } else if !(0.0..=1.0).contains(&v) {
                    normalized = false;
                }
            }
        }
    }
    if !finite {
        normalized = false;
        problems.push("non-finite payoff entry".into());
    }

    GameValidation {
        square,
        finite,
        normalized,
        problems,
    }
}

impl MatrixGame {
    /// Builds a game from nested row-major matrices, validating shape and
    /// finiteness and deriving the `normalized` flag.
    pub fn from_rows(payoff_1: Vec<Vec<f64>>, payoff_2: Vec<Vec<f64>>) -> Result<Self> {
        let report = validate_game(&payoff_1, &payoff_2);
        if !report.is_valid() {
            return Err(SiError::InvalidInput(format!(
                "malformed game: {}",
                report.problems.join("; ")
            )));
        }
        let n = payoff_1.len();
        let flatten = |m: Vec<Vec<f64>>| m.into_iter().flatten().collect::<Vec<f64>>();
        Ok(MatrixGame {
            n_actions: n,
            payoff_1: flatten(payoff_1),
            payoff_2: flatten(payoff_2),
            normalized: report.normalized,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// True when every payoff entry lies in `[0, 1]`.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Payoff of `seat` when player 1 plays `a1` and player 2 plays `a2`.
    #[inline]
    pub fn payoff(&self, seat: Seat, a1: usize, a2: usize) -> f64 {
        let idx = a1 * self.n_actions + a2;
        match seat {
            Seat::P1 => self.payoff_1[idx],
            Seat::P2 => self.payoff_2[idx],
        }
    }

    /// Payoff of `seat` when it plays `own` and the partner plays `partner`.
    #[inline]
    pub fn payoff_vs(&self, seat: Seat, own: usize, partner: usize) -> f64 {
        match seat {
            Seat::P1 => self.payoff_1[own * self.n_actions + partner],
            Seat::P2 => self.payoff_2[partner * self.n_actions + own],
        }
    }

    /// Payoff of `seat` when it plays the mixed strategy `own` against the
    /// partner's realized pure action.
    #[inline]
    pub fn mixed_payoff_vs(&self, seat: Seat, own: &MixedStrategy, partner: usize) -> f64 {
        let mut total = 0.0;
        for (a, &p) in own.probs().iter().enumerate() {
            if p > 0.0 {
                total += p * self.payoff_vs(seat, a, partner);
            }
        }
        total
    }

    /// Row-major copy of one player's matrix as nested vectors.
    pub fn rows(&self, seat: Seat) -> Vec<Vec<f64>> {
        let m = match seat {
            Seat::P1 => &self.payoff_1,
            Seat::P2 => &self.payoff_2,
        };
        m.chunks(self.n_actions).map(|r| r.to_vec()).collect()
    }
}

/// Expected payoffs of both players under a mixed strategy profile: the
/// bilinear form `s1' G_i s2` for each player.
pub fn expected_payoff(
    game: &MatrixGame,
    s1: &MixedStrategy,
    s2: &MixedStrategy,
) -> Result<PayoffProfile> {
    let n = game.n_actions();
    if s1.n_actions() != n || s2.n_actions() != n {
        return Err(SiError::InvalidInput(format!(
            "strategy dimensions ({}, {}) do not match the game's {n} actions",
            s1.n_actions(),
            s2.n_actions()
        )));
    }
    let mut p1 = 0.0;
    let mut p2 = 0.0;
    for (a1, &x) in s1.probs().iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (a2, &y) in s2.probs().iter().enumerate() {
            if y == 0.0 {
                continue;
            }
            let w = x * y;
            p1 += w * game.payoff(Seat::P1, a1, a2);
            p2 += w * game.payoff(Seat::P2, a1, a2);
        }
    }
    Ok(PayoffProfile::new(p1, p2))
}

/// Per-player mean of realized stage payoffs over a history.
pub fn empirical_payoff(history: &History, game: &MatrixGame) -> Result<PayoffProfile> {
    empirical_payoff_of_stages(history.stages(), game)
}

/// [`empirical_payoff`] over a plain stage slice.
pub fn empirical_payoff_of_stages(stages: &[JointAction], game: &MatrixGame) -> Result<PayoffProfile> {
    if stages.is_empty() {
        return Err(SiError::InvalidInput(
            "empirical payoff of an empty history is undefined".into(),
        ));
    }
    let n = game.n_actions();
    let mut p1 = 0.0;
    let mut p2 = 0.0;
    for j in stages {
        if j.a1 >= n || j.a2 >= n {
            return Err(SiError::InvalidInput(format!(
                "joint action ({}, {}) out of range for {n} actions",
                j.a1, j.a2
            )));
        }
        p1 += game.payoff(Seat::P1, j.a1, j.a2);
        p2 += game.payoff(Seat::P2, j.a1, j.a2);
    }
    let t = stages.len() as f64;
    Ok(PayoffProfile::new(p1 / t, p2 / t))
}

/// Seeds recorded with a trace so it can be reproduced exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    /// Seed the match was launched with.
    pub match_seed: u64,
    /// Derived sampling stream for player 1.
    pub seat_1: u64,
    /// Derived sampling stream for player 2.
    pub seat_2: u64,
}

/// Full record of a T-stage match.
///
/// The per-stage mixed strategies of both seats are recorded for post-hoc
/// analysis only; agents themselves never observe the partner's
/// distributions, just the realized actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchTrace {
    pub type_id: TypeId,
    pub seed: SeedRecord,
    pub history: History,
    pub strat_1: Vec<MixedStrategy>,
    pub strat_2: Vec<MixedStrategy>,
    /// First stage at which seat 1's fallback agent played its inner agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_stage_1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_stage_2: Option<usize>,
}

impl MatchTrace {
    /// Recorded strategy sequence of one seat.
    pub fn strategies(&self, seat: Seat) -> &[MixedStrategy] {
        match seat {
            Seat::P1 => &self.strat_1,
            Seat::P2 => &self.strat_2,
        }
    }

    pub fn switch_stage(&self, seat: Seat) -> Option<usize> {
        match seat {
            Seat::P1 => self.switch_stage_1,
            Seat::P2 => self.switch_stage_2,
        }
    }

    /// Structural invariants: strategy sequences align 1:1 with the history
    /// and every realized action had positive probability when drawn.
    pub fn validate(&self, game: &MatrixGame) -> Result<()> {
        let t = self.history.len();
        if self.strat_1.len() != t || self.strat_2.len() != t {
            return Err(SiError::InvalidInput(format!(
                "strategy records ({}, {}) do not align with history length {t}",
                self.strat_1.len(),
                self.strat_2.len()
            )));
        }
        let n = game.n_actions();
        for (stage, joint) in self.history.stages().iter().enumerate() {
            if joint.a1 >= n || joint.a2 >= n {
                return Err(SiError::InvalidInput(format!(
                    "stage {stage}: joint action out of range"
                )));
            }
            if self.strat_1[stage].prob(joint.a1) <= 0.0 {
                return Err(SiError::InvalidInput(format!(
                    "stage {stage}: seat 1 realized an action of probability 0"
                )));
            }
            if self.strat_2[stage].prob(joint.a2) <= 0.0 {
                return Err(SiError::InvalidInput(format!(
                    "stage {stage}: seat 2 realized an action of probability 0"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SiError::Parse(format!("trace: {e}")))
    }
}

/// An ordered map from type ids to validated stage games.
#[derive(Debug, Clone, PartialEq)]
pub struct GameCatalog {
    entries: IndexMap<TypeId, MatrixGame>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogDoc {
    games: Vec<GameDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GameDoc {
    id: String,
    n_actions: usize,
    payoff_1: Vec<Vec<f64>>,
    payoff_2: Vec<Vec<f64>>,
}

impl GameCatalog {
    pub fn from_entries(entries: Vec<(TypeId, MatrixGame)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(SiError::InvalidInput("catalog has no games".into()));
        }
        let mut map = IndexMap::new();
        for (id, game) in entries {
            if map.insert(id.clone(), game).is_some() {
                return Err(SiError::DuplicateTypeId(id));
            }
        }
        Ok(GameCatalog { entries: map })
    }

    /// Parses a catalog document (TOML with a top-level `games` array).
    pub fn load_str(text: &str) -> Result<Self> {
        let doc: CatalogDoc =
            toml::from_str(text).map_err(|e| SiError::Parse(format!("catalog: {e}")))?;
        if doc.games.is_empty() {
            return Err(SiError::Parse("catalog: no games defined".into()));
        }
        let mut entries = Vec::with_capacity(doc.games.len());
        for g in doc.games {
            let game = MatrixGame::from_rows(g.payoff_1, g.payoff_2)
                .map_err(|e| SiError::Parse(format!("game `{}`: {e}", g.id)))?;
            if game.n_actions() != g.n_actions {
                return Err(SiError::Parse(format!(
                    "game `{}`: n_actions = {} but matrices are {}x{}",
                    g.id,
                    g.n_actions,
                    game.n_actions(),
                    game.n_actions()
                )));
            }
            entries.push((g.id, game));
        }
        GameCatalog::from_entries(entries)
    }

    pub fn load_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        GameCatalog::load_str(&text)
    }

    /// Serializes back to the catalog document format, bit-exactly.
    pub fn to_toml_string(&self) -> String {
        let doc = CatalogDoc {
            games: self
                .entries
                .iter()
                .map(|(id, game)| GameDoc {
                    id: id.clone(),
                    n_actions: game.n_actions(),
                    payoff_1: game.rows(Seat::P1),
                    payoff_2: game.rows(Seat::P2),
                })
                .collect(),
        };
        toml::to_string(&doc).expect("catalog serialization cannot fail")
    }

    pub fn get(&self, id: &str) -> Result<&MatrixGame> {
        self.entries
            .get(id)
            .ok_or_else(|| SiError::UnknownTypeId(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &TypeId> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TypeId, &MatrixGame)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
