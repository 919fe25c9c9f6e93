//! Bayesian reconstruction of a seabed interface from surface wave data.
//!
//! The crate is organised bottom-up: [`prior`] builds random seabed curves,
//! [`material`] turns a curve into coefficient fields, [`assembly`] and
//! [`solver`] produce boundary traces, [`bayes`] scores them against data,
//! [`samplers`] explores the posterior and [`diagnostics`] summarises chains.

pub mod assembly;
pub mod bayes;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod material;
pub mod mesh;
pub mod prior;
pub mod samplers;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
