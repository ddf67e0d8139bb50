//! Repeated two-player matrix games with adaptive agents.
//!
//! The library is organized around one pipeline:
//!
//! 1. [`game`] — stage games, mixed strategies, histories, and payoff
//!    accounting for a catalog of game types.
//! 2. [`equilibria`] — Nash equilibrium enumeration, the Pareto-optimal
//!    Nash (PONE) filter, and the convention map that assigns one PONE
//!    profile to every game type.
//! 3. [`regret`] — external and stochastic regret functionals, their
//!    expected variants, and the concentration-bound curves they are
//!    measured against.
//! 4. [`agents`] — fictitious play, multiplicative weights, the two
//!    convention-fallback agents built on them, and a zoo of stress
//!    partners.
//! 5. [`harness`] — seeded match execution, Monte Carlo experiments, and
//!    the consistency / compatibility / social-intelligence verdicts.
//!
//! Everything downstream of a seed is deterministic: a match trace is a
//! pure function of (configuration, master seed), independent of thread
//! count.

pub mod agents;
pub mod equilibria;
pub mod error;
pub mod game;
pub mod harness;
pub mod regret;
pub mod seeding;
pub mod verify;

pub use error::{Result, SiError};
