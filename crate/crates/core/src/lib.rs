//! rplab is an exact laboratory for reward-driven interactive proofs: a
//! prover talks to a randomized verifier who pays a reward at the end, and
//! the prover's rational play is solved precisely by backward induction over
//! information sets. Everything is computed in dyadic arithmetic so reported
//! values, gaps and probabilities are exact, never floating point.
//!
//! The crate is organized bottom up:
//!
//! * [`dyadic`]: arbitrary-precision binary fractions and polynomials.
//! * [`circuit`]: a small boolean circuit language with exhaustive counting.
//! * [`protocol`]: the protocol model (message widths, verifier rule, reward).
//! * [`solver`]: exact solving, gap measurement, verification, and play.
//! * [`protocols`]: the concrete constructions the lab studies.
//! * [`parity`]: sampler protocols, their reward polynomials, parity audits.
//! * [`corpus`]: deterministic instance generation and the corpus file format.
//! * [`report`]: serializable reports shared by the CLI and the test suites.

pub mod circuit;
pub mod corpus;
pub mod dyadic;
pub mod error;
pub mod exec;
pub mod parity;
pub mod protocol;
pub mod protocols;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
