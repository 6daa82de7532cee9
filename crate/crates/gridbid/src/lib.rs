//! File formats, study cases, experiment harness and command-line front end
//! for the `gridbid-core` market-clearing and bilevel offer solvers.

pub mod backend;
pub mod error;
pub mod harness;
pub mod io;
pub mod matpower;
pub mod mps;
pub mod report;
pub mod synthetic;

pub use error::Error;
