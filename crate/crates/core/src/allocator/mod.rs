//! Resource allocation: maximizes the Bayesian CRB metric
//! `g(z) = sum_q 1 / Tr(L B_q(z)^{-1} L^T)` over MMR powers, PAR dwell times
//! and downlink powers, subject to per-radar budgets, the base-station
//! budget and per-link throughput floors.

pub mod baseline;
pub mod fractional;
pub mod inner;
pub mod layout;
pub mod problem;
pub mod projection;
pub mod solver;

pub use baseline::{baseline_random, baseline_uniform, even_split};
pub use fractional::{grad_f, FractionalProgram, FractionalTerm};
pub use inner::{inner_objective, inner_v_update, SlackMatrix, WeightMatrix};
pub use layout::{AllocationVector, Layout, Slot};
pub use problem::{assemble_constraints, throughput, AllocationProblem, LinearConstraints, TargetPrior};
pub use projection::{project, InfeasibilityCertificate, Projection};
pub use solver::{adam_solve, coordinate_scales, project_scaled, solve_problem, AllocatorConfig, SolveOutput, TraceRecord};
