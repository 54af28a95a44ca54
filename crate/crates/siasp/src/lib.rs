//! Satellite image acquisition scheduling as QUBO.
//!
//! The library models the selection of a maximum-value subset of image
//! requests for a single orbit pass of a three-camera satellite, compiles
//! the problem into QUBO form under two rival variable encodings (`4cam`
//! and `3cam`), and solves the result with an exact enumerator or a
//! seeded simulated-annealing sampler.
//!
//! Modules:
//! - [`instance`] — problem data model, canonical JSON format, validation,
//!   statistics and the random instance reductor.
//! - [`classical`] — objective, feasibility checking and a branch-and-bound
//!   exact solver used as the ground-truth oracle.
//! - [`quadform`] — generic sparse quadratic forms over binary and spin
//!   variables, with the x = (1 - z)/2 transform between them.
//! - [`qubo`] — the two encodings, penalty construction, slack allocation
//!   and text/DOT exports.
//! - [`anneal`] — brute-force minimization, simulated annealing and the
//!   repetition protocol with infeasible-solution filtering.
//! - [`bench`] — CSV benchmark harness driven by the CLI.

pub mod anneal;
pub mod bench;
pub mod classical;
pub mod instance;
pub mod quadform;
pub mod qubo;

/// Coefficient scalar used by the compiled models. All QUBO arithmetic is
/// exact integer arithmetic; energies never involve rounding.
pub type Coeff = i64;

/// Exact rational scalar used by the Ising form (denominators are at most 4).
pub type Rational = num_rational::Ratio<i64>;

/// Sparse QUBO quadratic form with integer coefficients.
pub type QuboForm = quadform::QuadraticForm<Coeff>;

/// Ising (spin) form with exact rational fields and couplings.
pub type IsingModel = quadform::SpinForm<Rational>;
