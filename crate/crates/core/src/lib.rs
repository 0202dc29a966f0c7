//! Continuous-time Hessian-inverse-sum optimization (HISO).
//!
//! The crate contains the centralized gradient-descent, Newton-Raphson and
//! HISO flows with their Euler discretizations, and a distributed HISO
//! protocol in which every agent keeps a decision vector and a
//! dynamic-average-consensus state and only talks to its one-hop neighbours.
//!
//! Module map:
//! - [`graph`]: undirected connected graphs, Laplacian/incidence/projection.
//! - [`cost`]: per-agent convex cost oracles (quadratic, quartic, logistic).
//! - [`central`]: centralized flows, Euler runs, stepsize search, Newton oracle.
//! - [`dhiso`]: distributed protocol, diagnostics and finite-time bound.
//! - [`experiments`]: the quartic and logistic-regression comparisons.
//! - [`io`]: configuration files, CSV traces and SVG plots.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod central;
pub mod cost;
pub mod dhiso;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod io;
pub mod linalg;

pub use error::{Error, Result};
