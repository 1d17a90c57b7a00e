//! Quadcopter waypoint control with action-robust DDPG.
//!
//! The crate is `no_std` + `alloc`. It contains the rigid-body simulator
//! ([`sim`]), the waypoint-reaching MDP ([`env`]), a small dense network
//! engine ([`nn`]), the actor/adversary/critic training loop ([`agent`]) and
//! the mass/action perturbation sweep ([`eval`]). File formats, the CLI and
//! the threaded sweep live in the companion `rq` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod agent;
pub mod env;
pub mod error;
pub mod eval;
pub mod nn;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
