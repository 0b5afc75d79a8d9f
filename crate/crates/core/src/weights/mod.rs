//! Put-weight recursion, hedge values, the replication identity and the surface recursion.

pub mod curve;
pub mod markov;
pub mod recursion;
pub mod replication;

pub use curve::{parse_weight_csv, Atom, WeightCurve};
pub use markov::{
    backward_markov_value, verify_boundary_conditions, BoundaryReport, BoundaryTolerances,
    MarkovConfig, MarkovResult, ValueSurface,
};
pub use recursion::{
    build_weights, build_weights_on_grids, expected_means, rebuild_below, recurse_weight,
    terminal_weight, value_from_weights, weight_grid, StepDiagnostics, WeightConfig, WeightSet,
};
pub use replication::{expired_portfolio_value, replication_check, ReplicationPoint};
