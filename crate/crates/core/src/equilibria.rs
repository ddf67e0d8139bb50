//! Nash equilibrium enumeration and Pareto-optimal equilibrium selection.
//!
//! The solver enumerates candidate support pairs and solves each pair's
//! indifference system: it is complete for nondegenerate games up to
//! [`MAX_ENUM_ACTIONS`] actions. Degenerate games (singular or unequal-support
//! systems with solutions, weak supports, extra best responses) yield
//! representative solutions and clear the `complete_vertex_enumeration` flag
//! instead of enumerating equilibrium components.
//!
//! On top of the raw Nash set sit the PONE filter — equilibria not strongly
//! Pareto-dominated by other equilibria — and the convention map assigning
//! one PONE profile to every catalog type via a deterministic tie-break.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SiError};
use crate::game::{expected_payoff, GameCatalog, MatrixGame, MixedStrategy, PayoffProfile, Seat, TypeId};

/// Largest game the support-enumeration solver accepts.
pub const MAX_ENUM_ACTIONS: usize = 5;

/// Default tolerance for solving (indifference, nonnegativity, deviation).
pub const SOLVE_TOL: f64 = 1e-9;

/// Default tolerance for post-hoc equilibrium verification.
pub const VERIFY_TOL: f64 = 1e-7;

/// Strong-domination tolerance of the PONE filter.
pub const PONE_TOL: f64 = 1e-9;

/// Two profiles within this L-infinity distance (both seats) are one
/// equilibrium.
pub const DEDUP_TOL: f64 = 1e-9;

/// One Nash equilibrium of a stage game.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumProfile {
    pub s1: MixedStrategy,
    pub s2: MixedStrategy,
    pub payoffs: PayoffProfile,
    pub support_1: Vec<usize>,
    pub support_2: Vec<usize>,
}

impl EquilibriumProfile {
    fn from_strategies(game: &MatrixGame, s1: MixedStrategy, s2: MixedStrategy) -> Self {
        let payoffs = expected_payoff(game, &s1, &s2).expect("dimensions checked by caller");
        EquilibriumProfile {
            support_1: s1.support(),
            support_2: s2.support(),
            s1,
            s2,
            payoffs,
        }
    }

    pub fn strategy(&self, seat: Seat) -> &MixedStrategy {
        match seat {
            Seat::P1 => &self.s1,
            Seat::P2 => &self.s2,
        }
    }

    fn same_as(&self, other: &EquilibriumProfile) -> bool {
        self.s1.linf_distance(&other.s1) <= DEDUP_TOL && self.s2.linf_distance(&other.s2) <= DEDUP_TOL
    }
}

/// The enumerated equilibria of one game.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSet {
    pub profiles: Vec<EquilibriumProfile>,
    /// False when degeneracy forced a representative subset rather than a
    /// complete vertex enumeration.
    pub complete_vertex_enumeration: bool,
}

/// Best-response diagnostic of [`is_nash`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashCheck {
    pub is_nash: bool,
    /// Largest payoff either player could gain by a pure deviation.
    pub max_gain: f64,
}

/// Payoff each pure action earns against the opponent's strategy:
/// `(u1, u2)` with `u1[a] = e_a' G1 s2` and `u2[b] = s1' G2 e_b`.
fn response_values(game: &MatrixGame, s1: &MixedStrategy, s2: &MixedStrategy) -> (Vec<f64>, Vec<f64>) {
    let n = game.n_actions();
    let u1 = (0..n)
        .map(|a| {
            (0..n)
                .filter(|&b| s2.prob(b) > 0.0)
                .map(|b| game.payoff(Seat::P1, a, b) * s2.prob(b))
                .sum()
        })
        .collect();
    let u2 = (0..n)
        .map(|b| {
            (0..n)
                .filter(|&a| s1.prob(a) > 0.0)
                .map(|a| game.payoff(Seat::P2, a, b) * s1.prob(a))
                .sum()
        })
        .collect();
    (u1, u2)
}

/// True iff no pure deviation improves either player's expected payoff by
/// more than `tol`.
pub fn is_nash(game: &MatrixGame, s1: &MixedStrategy, s2: &MixedStrategy, tol: f64) -> NashCheck {
    assert_eq!(s1.n_actions(), game.n_actions(), "s1 dimension mismatch");
    assert_eq!(s2.n_actions(), game.n_actions(), "s2 dimension mismatch");
    let (u1, u2) = response_values(game, s1, s2);
    let own1: f64 = u1.iter().zip(s1.probs()).map(|(u, p)| u * p).sum();
    let own2: f64 = u2.iter().zip(s2.probs()).map(|(u, p)| u * p).sum();
    let best1 = u1.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let best2 = u2.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let max_gain = (best1 - own1).max(best2 - own2);
    NashCheck {
        is_nash: max_gain <= tol,
        max_gain,
    }
}

/// Solves the indifference system of `mix_support` (the mixing player's
/// support) against `indiff_support` (the opponent actions that must be
/// indifferent), for the given opponent payoff lookup.
///
/// Returns the full-length mixture vector and whether a rank-deficient
/// system was involved.
fn solve_indifference(
    n: usize,
    indiff_support: &[usize],
    mix_support: &[usize],
    payoff: impl Fn(usize, usize) -> f64,
) -> Option<(Vec<f64>, bool)> {
    let rows = indiff_support.len() + 1;
    let cols = mix_support.len() + 1;
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = DVector::zeros(rows);
    for (i, &own) in indiff_support.iter().enumerate() {
        for (j, &opp) in mix_support.iter().enumerate() {
            a[(i, j)] = payoff(own, opp);
        }
        a[(i, mix_support.len())] = -1.0;
    }
    for j in 0..mix_support.len() {
        a[(rows - 1, j)] = 1.0;
    }
    b[rows - 1] = 1.0;

    let mut degenerate = false;
    let sol = if rows == cols {
        match a.clone().lu().solve(&b) {
            Some(sol) => sol,
            None => {
                // Singular square system: fall back to a least-squares
                // representative and let the acceptance checks decide.
                degenerate = true;
                a.clone().svd(true, true).solve(&b, 1e-12).ok()?
            }
        }
    } else {
        degenerate = true;
        a.clone().svd(true, true).solve(&b, 1e-12).ok()?
    };

    let mut full = vec![0.0; n];
    for (j, &opp) in mix_support.iter().enumerate() {
        full[opp] = sol[j];
    }
    Some((full, degenerate))
}

/// Clamps solver output onto the simplex; rejects entries below `-tol`.
fn to_strategy(raw: &[f64], tol: f64) -> Option<MixedStrategy> {
    if raw.iter().any(|&v| v < -tol || !v.is_finite()) {
        return None;
    }
    let clamped: Vec<f64> = raw.iter().map(|&v| v.max(0.0)).collect();
    let sum: f64 = clamped.iter().sum();
    if sum <= 0.0 {
        return None;
    }
    MixedStrategy::new(clamped.iter().map(|v| v / sum).collect()).ok()
}

fn nonempty_subsets(n: usize) -> Vec<Vec<usize>> {
    (1u32..(1 << n))
        .map(|mask| (0..n).filter(|&a| mask & (1 << a) != 0).collect())
        .collect()
}

/// Enumerates the Nash equilibria of a stage game by support enumeration.
///
/// All equal-cardinality support pairs are tried first, then unequal pairs
/// (which only admit solutions in degenerate games). Numerically singular
/// systems are skipped. `tol` bounds indifference error, negative mass, and
/// profitable deviations.
pub fn enumerate_nash(game: &MatrixGame, tol: f64) -> Result<EquilibriumSet> {
    let n = game.n_actions();
    if n > MAX_ENUM_ACTIONS {
        return Err(SiError::UnsupportedSize {
            n,
            max: MAX_ENUM_ACTIONS,
        });
    }
    if !(tol > 0.0) {
        return Err(SiError::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }

    let subsets = nonempty_subsets(n);
    let mut pairs: Vec<(&Vec<usize>, &Vec<usize>)> = Vec::new();
    for s1 in &subsets {
        for s2 in &subsets {
            if s1.len() == s2.len() {
                pairs.push((s1, s2));
            }
        }
    }
    for s1 in &subsets {
        for s2 in &subsets {
            if s1.len() != s2.len() {
                pairs.push((s1, s2));
            }
        }
    }

    let mut profiles: Vec<EquilibriumProfile> = Vec::new();
    let mut complete = true;
    for (sup1, sup2) in pairs {
        // Opponent's mixture makes our support indifferent: y from player 1's
        // system, x from player 2's.
        let Some((y_raw, deg_y)) =
            solve_indifference(n, sup1, sup2, |own, opp| game.payoff(Seat::P1, own, opp))
        else {
            log::debug!("skipping singular support system {sup1:?} x {sup2:?}");
            continue;
        };
        let Some((x_raw, deg_x)) =
            solve_indifference(n, sup2, sup1, |own, opp| game.payoff(Seat::P2, opp, own))
        else {
            log::debug!("skipping singular support system {sup1:?} x {sup2:?}");
            continue;
        };
        let (Some(s1), Some(s2)) = (to_strategy(&x_raw, tol), to_strategy(&y_raw, tol)) else {
            continue;
        };
        let check = is_nash(game, &s1, &s2, tol);
        if !check.is_nash {
            continue;
        }

        let profile = EquilibriumProfile::from_strategies(game, s1, s2);
        if profiles.iter().any(|p| p.same_as(&profile)) {
            continue;
        }

        // Degeneracy hints: rank-deficient systems, unequal supports, weak
        // support entries, or extra pure best responses.
        let mut degenerate = deg_x || deg_y || sup1.len() != sup2.len();
        if profile.support_1.len() < sup1.len() || profile.support_2.len() < sup2.len() {
            degenerate = true;
        }
        let (u1, u2) = response_values(game, &profile.s1, &profile.s2);
        let best1 = u1.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let best2 = u2.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let extra1 = (0..n).any(|a| !profile.support_1.contains(&a) && u1[a] >= best1 - tol);
        let extra2 = (0..n).any(|b| !profile.support_2.contains(&b) && u2[b] >= best2 - tol);
        if extra1 || extra2 {
            degenerate = true;
        }
        if degenerate {
            complete = false;
        }
        profiles.push(profile);
    }

    if profiles.is_empty() {
        // Every finite game has a mixed equilibrium; reaching this means the
        // numerics rejected everything.
        return Err(SiError::Solver(format!(
            "no equilibrium survived support enumeration at tolerance {tol}"
        )));
    }

    Ok(EquilibriumSet {
        profiles,
        complete_vertex_enumeration: complete,
    })
}

/// Keeps the equilibria that are not strongly Pareto-dominated by any other
/// equilibrium in the set: `s` survives unless some `s'` has a strictly
/// larger payoff for *both* players (beyond [`PONE_TOL`]).
pub fn pone_filter(eqs: &EquilibriumSet, game: &MatrixGame) -> EquilibriumSet {
    let payoff_of = |p: &EquilibriumProfile| {
        expected_payoff(game, &p.s1, &p.s2).expect("profiles match the game dimension")
    };
    let payoffs: Vec<PayoffProfile> = eqs.profiles.iter().map(payoff_of).collect();
    let survivors = eqs
        .profiles
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            !payoffs.iter().enumerate().any(|(j, other)| {
                j != *i
                    && other.p1 > payoffs[*i].p1 + PONE_TOL
                    && other.p2 > payoffs[*i].p2 + PONE_TOL
            })
        })
        .map(|(_, p)| p.clone())
        .collect();
    EquilibriumSet {
        profiles: survivors,
        complete_vertex_enumeration: eqs.complete_vertex_enumeration,
    }
}

/// How the convention picks among multiple PONE profiles.
///
/// Both policies maximize joint welfare first and break remaining ties on the
/// lexicographically greater `(s1, s2)` vector; they differ in whose payoff
/// breaks the welfare tie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieBreakPolicy {
    /// Maximize welfare, then player 1's payoff.
    #[default]
    #[serde(rename = "welfare-lex")]
    WelfareLex,
    /// Maximize welfare, then player 2's payoff.
    #[serde(rename = "welfare-lex-p2")]
    WelfareLexP2,
}

impl TieBreakPolicy {
    pub fn id(self) -> &'static str {
        match self {
            TieBreakPolicy::WelfareLex => "welfare-lex",
            TieBreakPolicy::WelfareLexP2 => "welfare-lex-p2",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "welfare-lex" => Ok(TieBreakPolicy::WelfareLex),
            "welfare-lex-p2" => Ok(TieBreakPolicy::WelfareLexP2),
            other => Err(SiError::Parse(format!("unknown tie-break policy `{other}`"))),
        }
    }

    /// True when `a` is preferred over `b`.
    fn prefers(self, a: &EquilibriumProfile, b: &EquilibriumProfile) -> bool {
        let wa = a.payoffs.welfare();
        let wb = b.payoffs.welfare();
        if wa != wb {
            return wa > wb;
        }
        let (pa, pb) = match self {
            TieBreakPolicy::WelfareLex => (a.payoffs.p1, b.payoffs.p1),
            TieBreakPolicy::WelfareLexP2 => (a.payoffs.p2, b.payoffs.p2),
        };
        if pa != pb {
            return pa > pb;
        }
        let lex = a
            .s1
            .probs()
            .iter()
            .chain(a.s2.probs())
            .zip(b.s1.probs().iter().chain(b.s2.probs()))
            .find_map(|(x, y)| if x != y { Some(x > y) } else { None });
        lex.unwrap_or(false)
    }
}

/// The agreed-upon PONE profile for every type in a catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct ConventionMap {
    entries: BTreeMap<TypeId, EquilibriumProfile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConventionEntryDoc {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl ConventionMap {
    /// Selects one PONE profile per catalog type with the given tie-break.
    pub fn build(catalog: &GameCatalog, policy: TieBreakPolicy) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (id, game) in catalog.iter() {
            let eqs = enumerate_nash(game, SOLVE_TOL)?;
            let pone = pone_filter(&eqs, game);
            let chosen = pone
                .profiles
                .iter()
                .fold(None::<&EquilibriumProfile>, |best, p| match best {
                    Some(b) if !policy.prefers(p, b) => Some(b),
                    _ => Some(p),
                })
                .ok_or_else(|| SiError::Solver(format!("type `{id}` has an empty PONE set")))?;
            entries.insert(id.clone(), chosen.clone());
        }
        Ok(ConventionMap { entries })
    }

    pub fn get(&self, id: &str) -> Result<&EquilibriumProfile> {
        self.entries
            .get(id)
            .ok_or_else(|| SiError::UnknownTypeId(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TypeId, &EquilibriumProfile)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Serializes as `{ type_id: { s1: [...], s2: [...] } }`.
    pub fn to_toml_string(&self) -> String {
        let doc: BTreeMap<&TypeId, ConventionEntryDoc> = self
            .entries
            .iter()
            .map(|(id, p)| {
                (
                    id,
                    ConventionEntryDoc {
                        s1: p.s1.probs().to_vec(),
                        s2: p.s2.probs().to_vec(),
                    },
                )
            })
            .collect();
        toml::to_string(&doc).expect("convention serialization cannot fail")
    }

    /// Builds a map from raw `(type_id, s1, s2)` entries, re-validating every
    /// profile against the catalog: each must be a Nash equilibrium not
    /// strongly dominated by any enumerated equilibrium of its game.
    pub fn from_raw<I>(raw: I, catalog: &GameCatalog) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>, Vec<f64>)>,
    {
        let mut entries = BTreeMap::new();
        for (id, raw_s1, raw_s2) in raw {
            let game = catalog.get(&id)?;
            let s1 = MixedStrategy::new(raw_s1)
                .map_err(|e| SiError::Parse(format!("convention `{id}` s1: {e}")))?;
            let s2 = MixedStrategy::new(raw_s2)
                .map_err(|e| SiError::Parse(format!("convention `{id}` s2: {e}")))?;
            if s1.n_actions() != game.n_actions() || s2.n_actions() != game.n_actions() {
                return Err(SiError::Parse(format!(
                    "convention `{id}` does not match the game's action count"
                )));
            }
            let check = is_nash(game, &s1, &s2, VERIFY_TOL);
            if !check.is_nash {
                return Err(SiError::Parse(format!(
                    "convention `{id}` is not a Nash equilibrium (deviation gain {})",
                    check.max_gain
                )));
            }
            let profile = EquilibriumProfile::from_strategies(game, s1, s2);
            let eqs = enumerate_nash(game, SOLVE_TOL)?;
            let dominated = eqs.profiles.iter().any(|e| {
                e.payoffs.p1 > profile.payoffs.p1 + PONE_TOL
                    && e.payoffs.p2 > profile.payoffs.p2 + PONE_TOL
            });
            if dominated {
                return Err(SiError::Parse(format!(
                    "convention `{id}` is strongly Pareto-dominated by another equilibrium"
                )));
            }
            entries.insert(id, profile);
        }
        if entries.is_empty() {
            return Err(SiError::Parse("convention map is empty".into()));
        }
        Ok(ConventionMap { entries })
    }

    /// Parses a convention document; see [`ConventionMap::from_raw`].
    pub fn load_str(text: &str, catalog: &GameCatalog) -> Result<Self> {
        let doc: BTreeMap<String, ConventionEntryDoc> =
            toml::from_str(text).map_err(|e| SiError::Parse(format!("convention map: {e}")))?;
        ConventionMap::from_raw(doc.into_iter().map(|(id, e)| (id, e.s1, e.s2)), catalog)
    }

    pub fn load_path(path: &Path, catalog: &GameCatalog) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ConventionMap::load_str(&text, catalog)
    }
}

/// Builds the convention map for a catalog; see [`ConventionMap::build`].
pub fn convention(catalog: &GameCatalog, policy: TieBreakPolicy) -> Result<ConventionMap> {
    ConventionMap::build(catalog, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from;
    use crate::verify::{grid_cross_check, random_normalized_game};
    use approx::assert_abs_diff_eq;

    fn coordination() -> MatrixGame {
        let m = vec![vec![2.0, 0.0], vec![0.0, 1.0]];
        MatrixGame::from_rows(m.clone(), m).unwrap()
    }

    fn pennies() -> MatrixGame {
        MatrixGame::from_rows(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap()
    }

    /// Two pure PONE with payoffs (1, 0.5) and (0.5, 1).
    fn battle() -> MatrixGame {
        MatrixGame::from_rows(
            vec![vec![1.0, 0.0], vec![0.0, 0.5]],
            vec![vec![0.5, 0.0], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn coordination_game_has_three_equilibria() {
        let eqs = enumerate_nash(&coordination(), SOLVE_TOL).unwrap();
        assert!(eqs.complete_vertex_enumeration);
        assert_eq!(eqs.profiles.len(), 3);

        let find = |s1: &[f64]| {
            eqs.profiles
                .iter()
                .find(|p| {
                    p.s1.probs()
                        .iter()
                        .zip(s1)
                        .all(|(a, b)| (a - b).abs() <= 1e-9)
                })
                .unwrap_or_else(|| panic!("missing equilibrium with s1 = {s1:?}"))
        };
        let pure_a = find(&[1.0, 0.0]);
        assert_eq!((pure_a.payoffs.p1, pure_a.payoffs.p2), (2.0, 2.0));
        let pure_b = find(&[0.0, 1.0]);
        assert_eq!((pure_b.payoffs.p1, pure_b.payoffs.p2), (1.0, 1.0));
        // Mixed profile from the indifference condition 2q = 1 - q.
        let mixed = find(&[1.0 / 3.0, 2.0 / 3.0]);
        assert_abs_diff_eq!(mixed.s2.prob(0), 1.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(mixed.payoffs.p1, 2.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(mixed.payoffs.p2, 2.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn pennies_has_unique_mixed_equilibrium() {
        let eqs = enumerate_nash(&pennies(), SOLVE_TOL).unwrap();
        assert_eq!(eqs.profiles.len(), 1);
        assert!(eqs.complete_vertex_enumeration);
        let p = &eqs.profiles[0];
        for v in p.s1.probs().iter().chain(p.s2.probs()) {
            assert_abs_diff_eq!(*v, 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn strict_dominance_leaves_one_pure_equilibrium() {
        // Action 0 strictly dominates for both players.
        let g = MatrixGame::from_rows(
            vec![vec![1.0, 0.8], vec![0.2, 0.0]],
            vec![vec![1.0, 0.2], vec![0.8, 0.0]],
        )
        .unwrap();
        let eqs = enumerate_nash(&g, SOLVE_TOL).unwrap();
        assert_eq!(eqs.profiles.len(), 1);
        assert_eq!(eqs.profiles[0].s1.as_pure(), Some(0));
        assert_eq!(eqs.profiles[0].s2.as_pure(), Some(0));
    }

    #[test]
    fn oversized_game_is_rejected() {
        let n = 6;
        let z = vec![vec![0.0; n]; n];
        let g = MatrixGame::from_rows(z.clone(), z).unwrap();
        assert!(matches!(
            enumerate_nash(&g, SOLVE_TOL),
            Err(SiError::UnsupportedSize { n: 6, max: 5 })
        ));
    }

    #[test]
    fn is_nash_examples() {
        let g = coordination();
        let a = MixedStrategy::pure(0, 2);
        let b = MixedStrategy::pure(1, 2);
        assert!(is_nash(&g, &a, &a, 1e-9).is_nash);

        // Player 2 gains 2 by deviating to action 0.
        let check = is_nash(&g, &a, &b, 1e-9);
        assert!(!check.is_nash);
        assert_abs_diff_eq!(check.max_gain, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn enumerated_profiles_pass_is_nash() {
        let mut rng = rng_from(31);
        for i in 0..200 {
            let n = 2 + (i % 3);
            let g = random_normalized_game(n, &mut rng);
            let eqs = enumerate_nash(&g, SOLVE_TOL).unwrap();
            for p in &eqs.profiles {
                let check = is_nash(&g, &p.s1, &p.s2, SOLVE_TOL);
                assert!(check.is_nash, "game {i}: profile fails with gain {}", check.max_gain);
            }
        }
    }

    #[test]
    fn pone_filter_examples() {
        let g = coordination();
        let eqs = enumerate_nash(&g, SOLVE_TOL).unwrap();
        let pone = pone_filter(&eqs, &g);
        assert_eq!(pone.profiles.len(), 1);
        assert_eq!((pone.profiles[0].payoffs.p1, pone.profiles[0].payoffs.p2), (2.0, 2.0));

        // Idempotent and a subset of the input.
        let again = pone_filter(&pone, &g);
        assert_eq!(again.profiles.len(), 1);

        // Singleton set unchanged.
        let single = EquilibriumSet {
            profiles: vec![eqs.profiles[0].clone()],
            complete_vertex_enumeration: true,
        };
        assert_eq!(pone_filter(&single, &g).profiles.len(), 1);

        // Incomparable payoff profiles are both retained.
        let b = battle();
        let eqs = enumerate_nash(&b, SOLVE_TOL).unwrap();
        let pone = pone_filter(&eqs, &b);
        assert_eq!(pone.profiles.len(), 2);
        assert!(pone.profiles.iter().all(|p| p.s1.as_pure().is_some()));
    }

    #[test]
    fn convention_selection_and_tie_breaks() {
        let catalog = GameCatalog::from_entries(vec![
            ("coordination".into(), coordination()),
            ("pennies".into(), pennies()),
            ("battle".into(), battle()),
        ])
        .unwrap();

        let map = convention(&catalog, TieBreakPolicy::WelfareLex).unwrap();
        // Unique PONE: forced choice.
        assert_eq!(map.get("coordination").unwrap().s1.as_pure(), Some(0));
        // Unique equilibrium: forced choice.
        assert_abs_diff_eq!(map.get("pennies").unwrap().s1.prob(0), 0.5, epsilon = 1e-9);
        // Welfare tie resolved toward player 1's payoff.
        let chosen = map.get("battle").unwrap();
        assert_eq!(chosen.s1.as_pure(), Some(0));
        assert_abs_diff_eq!(chosen.payoffs.p1, 1.0, epsilon = 1e-9);

        // The alternate policy picks the other pure profile.
        let map2 = convention(&catalog, TieBreakPolicy::WelfareLexP2).unwrap();
        assert_eq!(map2.get("battle").unwrap().s1.as_pure(), Some(1));

        // Determinism: identical inputs give identical serialized maps.
        let again = convention(&catalog, TieBreakPolicy::WelfareLex).unwrap();
        assert_eq!(map.to_toml_string(), again.to_toml_string());
    }

    #[test]
    fn convention_roundtrip_revalidates() {
        let catalog = GameCatalog::from_entries(vec![
            ("coordination".into(), coordination()),
            ("battle".into(), battle()),
        ])
        .unwrap();
        let map = convention(&catalog, TieBreakPolicy::WelfareLex).unwrap();
        let text = map.to_toml_string();
        let back = ConventionMap::load_str(&text, &catalog).unwrap();
        assert_eq!(back.to_toml_string(), text);

        // A non-equilibrium profile is rejected on load.
        let forged = "[coordination]\ns1 = [0.0, 1.0]\ns2 = [1.0, 0.0]\n";
        assert!(ConventionMap::load_str(forged, &catalog).is_err());

        // A dominated equilibrium is rejected on load.
        let dominated = "[coordination]\ns1 = [0.0, 1.0]\ns2 = [0.0, 1.0]\n";
        assert!(ConventionMap::load_str(dominated, &catalog).is_err());
    }

    #[test]
    fn grid_search_confirms_enumeration_on_random_games() {
        // At a grid-commensurate tolerance, every approximate equilibrium the
        // 1/64 grid can see sits within one step of an enumerated profile.
        // (Looser tolerances admit "blob" points far from any equilibrium
        // whenever a best-response gap is small; see the acceptance suite.)
        let mut rng = rng_from(64);
        for i in 0..60 {
            let n = 2 + (i % 2);
            let g = random_normalized_game(n, &mut rng);
            let eqs = enumerate_nash(&g, SOLVE_TOL).unwrap();
            if !eqs.complete_vertex_enumeration {
                continue;
            }
            let check = grid_cross_check(&g, 64, 1e-6, &eqs).unwrap();
            assert!(
                check.worst_distance <= 1.0 / 64.0 + 1e-12,
                "game {i}: grid equilibrium {} away from enumerated set",
                check.worst_distance
            );
        }
    }

    #[test]
    fn degenerate_game_is_flagged() {
        // Constant payoffs: every profile is an equilibrium.
        let c = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let g = MatrixGame::from_rows(c.clone(), c).unwrap();
        let eqs = enumerate_nash(&g, SOLVE_TOL).unwrap();
        assert!(!eqs.complete_vertex_enumeration);
        assert!(!eqs.profiles.is_empty());
    }
}
