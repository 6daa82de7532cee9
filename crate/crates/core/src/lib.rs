//! Two-settlement electricity market clearing with renewable offer
//! adjustment: day-ahead and real-time LPs, the joint stochastic benchmark,
//! and exact and relaxed bilevel offer optimization.
//!
//! The crate is `no_std` (it needs `alloc`) and carries its own LP engine.

#![no_std]

extern crate alloc;

pub mod bilevel;
pub mod error;
pub mod grid;
pub mod instances;
pub mod lp;
pub mod market;
pub mod scenarios;

pub use error::Error;
