//! Diffusion off-policy gradient temporal-difference learning.
//!
//! A network of agents, each sampling a copy of the same MDP under its own behavior
//! policy, cooperatively estimates the value function of a common target policy with
//! linear features. Besides the stochastic algorithm the crate evaluates the closed-form
//! steady-state quantities of the recursion (saddle point, bias, mean-square deviation,
//! step-size bound) and ships a grid-world harness.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod dense_text;
pub mod error;
pub mod gridworld;
pub mod gtd;
pub mod linalg;
pub mod mdp;
pub mod network;
pub mod objective;
pub mod testbed;

pub use error::{Error, Result};
