//! Traffic-aware spectrum planning for small clusters of base stations.
//!
//! The crate models a bounded service area tiled by hexagonal cells, a
//! handful of base stations serving those cells, and Poisson packet traffic
//! at each station. Bandwidth is split into segments, each shared by one
//! subset of stations; sharing raises interference but may still pay off in
//! capacity. The [`optimizer`] module finds the segment layout minimizing
//! the traffic-weighted mean packet delay, [`sim`] checks those analytic
//! delays against an event-driven queueing simulation, and [`power`]
//! re-balances transmit power across whatever bandwidth each station ends up
//! holding.

pub mod optimizer;
pub mod power;
pub mod sim;
pub mod spectrum;
pub mod subset;
pub mod topology;

pub use optimizer::{
    find_feasible, find_feasible_within, full_reuse_baseline, solve, solve_orthogonal_baseline,
    solve_restricted, OptimizerError, Solution, SolveReport, SolveStatus, SolverOptions,
};
pub use spectrum::{
    objective, objective_gradient, service_rate, worst_case_rates, RateVector, SpectrumError,
    SpectrumPartition, TrafficProfile, STABILITY_MARGIN, SUPPORT_THRESHOLD,
};
pub use subset::{BtsSubset, MAX_BTS};
pub use topology::{
    build_efficiency_table, build_efficiency_table_with_psd, Deployment, HexGrid, LogBase, Point,
    RadioParams, Scenario, SpectralEfficiencyTable, TopologyError,
};
