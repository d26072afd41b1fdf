//! Stochastic distribution network reconfiguration with voltage-stability
//! scoring.
//!
//! Finds a radial switch configuration that minimizes a weighted sum of the
//! expected active power loss and an expected voltage-stability index over a
//! set of load/generation scenarios. The search is a successive branch
//! reduction heuristic whose stability term can be evaluated exactly (the
//! smallest singular value of the power-flow Jacobian) or by a trained
//! surrogate predictor.
//!
//! Module map:
//! - [`network`]: case model, radiality, loop extraction, exhaustive radial
//!   enumeration
//! - [`scenario`]: CSV ingestion, k-medoids scenario reduction, injections
//! - [`powerflow`]: Newton-Raphson solve, flows, limits, Jacobian
//! - [`stability`]: exact/surrogate index evaluation
//! - [`surrogate`]: state encoding, dataset generation, training, the
//!   order-consistency metric
//! - [`reconfig`]: the one-stage and two-stage reduction algorithms
//! - [`oracle`]: brute-force optimum and the backward-forward-sweep
//!   cross-check solver

pub mod error;
pub mod network;
pub mod oracle;
pub mod powerflow;
pub mod reconfig;
pub mod scenario;
pub mod stability;
pub mod surrogate;

pub use error::{Error, Result};
pub use network::{
    chordless_loops, count_radial, enumerate_radial, is_radial, Branch, Bus, BusKind, Loop,
    Network, SwitchStatus,
};
pub use powerflow::{
    branch_flows, check_limits, expected_loss, jacobian, sigma_min, solve, BranchFlow,
    PowerFlowSolution, SolverOptions, Violation, ViolationKind,
};
pub use reconfig::{
    candidate_set, evaluate_topology, loop_injection, min_flow_branch, objective_score,
    one_stage_sbr, one_stage_sbr_from, resolve_weights, subpaths, two_stage_sbr, CandidateTrace,
    ObjectiveWeights, SbrResult, Stage,
};
pub use scenario::{
    ingest_timeseries, kmedoids_reduce, net_injections, BusScales, Injections, Sample,
    ScenarioSet,
};
pub use stability::{Evaluator, EvaluatorMode, IndexKind, IndexName, Orientation};
pub use surrogate::{
    consistency, encode, generate_dataset, predict, train, ArchChoice, Architecture, GenOpts,
    Hyperparams, LabeledDataset, NetworkStateEncoding, PredictorModel,
};
pub use oracle::{bfs_sweep_pf, brute_force_optimum, OracleReport, OracleRow};
