//! Monte Carlo prices and Deltas of European and Bermudan swaptions in a
//! full-factor Libor market model, using a truncated WKB approximation of the
//! transition density weighted against a lognormal importance sampler.

pub mod bermudan;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod lmm;
pub mod payoffs;
pub mod proxy;
pub mod quadrature;
pub mod stats;
pub mod wkb;

pub use error::{Error, Result};
