//! Approximate Nash equilibria of bimatrix games from semidefinite
//! relaxations of the equilibrium QP.
//!
//! The pipeline: [`moment::build`] turns a game into a conic problem over the
//! moment matrix, [`backend`] solves it, [`spectral`] and [`recovery`] read
//! off a profile with certified ε bounds, and [`heuristics`] iterates
//! rank-reducing objectives. [`oracle`] provides exact answers on small
//! games for testing.

pub mod applications;
pub mod backend;
pub mod cli;
pub mod error;
pub mod game;
pub mod heuristics;
pub mod linalg;
pub mod moment;
pub mod oracle;
pub mod recovery;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use game::{BimatrixGame, EpsilonReport, StrategyProfile};
pub use heuristics::{solve_nash, Method, NashResult, RunConfig};

/// Double-precision game, the common case.
pub type Game = BimatrixGame<f64>;
pub type Profile = StrategyProfile<f64>;
