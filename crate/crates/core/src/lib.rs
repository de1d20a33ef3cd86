//! Bond pricing when the market learns about a terminal cash flow through
//! an information process whose flow rate is itself random.
//!
//! The crate covers path simulation, Bayesian inference of the cash flow
//! and flow rate, price dynamics, information-geometric sensitivity,
//! mutual information, option pricing and a manipulation experiment.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod inference;
pub mod infotheory;
pub mod manipulation;
pub mod model;
pub mod numerics;
pub mod options;
pub mod paths;
pub mod rng;
pub mod sensitivity;

pub use error::{Error, Result};
pub use model::MarketModel;
pub use paths::{InfoPath, PathEnsemble, TimeGrid};
