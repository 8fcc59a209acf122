//! Finite-dimensional quantum channels in Kraus, Choi and Stinespring form,
//! Schmidt-number analysis through Kraus-rank certificates, and an exact
//! simulator for the entanglement-assisted one-way LOCC construction of
//! k-partially entanglement breaking (k-PEB) channels.

pub mod error;
pub mod channels;
pub mod cli;
pub mod numerics;
pub mod protocol;
pub mod schmidt;
pub mod zoo;

pub use error::{Error, Result};
