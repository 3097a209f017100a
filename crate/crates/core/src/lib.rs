//! Exact laws, samplers and verification experiments for p-adic Hua measures
//! on `Mat(N, Q_p)` and the Hall-Littlewood measure that governs their
//! ergodic decomposition.
//!
//! The crate is organised bottom-up:
//!
//! * [`padic`]: finite-precision scalars in `Q_p` and Haar sampling on `Z_p`.
//! * [`linalg`]: matrices over `Q_p`, singular numbers (Smith normal form),
//!   corners, Haar sampling on `GL(N, Z_p)`, orbit assembly.
//! * [`qseries`]: exact q-Pochhammer symbols and certified infinite products.
//! * [`laws`]: every finite and infinite law as exact rationals or certified
//!   brackets.
//! * [`samplers`]: exact, seedable samplers for all of the above.
//! * [`experiments`]: exhaustive oracles and Monte Carlo verification suites.
//! * [`cli`]: the `padic-hua` command-line front end.
//!
//! The Hua parameter `s > -1` enters every finite formula only through
//! `t = p^{-s}`, so laws are parametrised by the exact rational `t`.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod laws;
pub mod linalg;
pub mod padic;
pub mod qseries;
pub mod rational;
pub mod samplers;

pub use error::{Error, Result};
pub use laws::{HuaParams, LProfile, Partition};
pub use linalg::{PadicMatrix, SingularTuple, SingularValue};
pub use padic::{PadicScalar, PrecisionBudget, Valuation};
pub use qseries::CertifiedValue;
pub use samplers::RngStream;
