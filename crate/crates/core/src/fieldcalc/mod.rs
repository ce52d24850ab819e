//! Coordinate differential calculus on 3-dimensional domains and ODE flows.

pub mod calculus;
pub mod domain;
pub mod fd;
pub mod fields;
pub mod flow;
pub mod linalg;
pub mod maps;
pub mod sweep;

pub use calculus::{
    contract_1, contract_2, d_scalar, exterior_derivative, lie_derivative_oneform, proportionality,
    pullback_oneform, pushforward_vector,
};
pub use domain::{
    time_nodes, wrap_angle, CoordKind, Domain, DEFAULT_CONSTRAINT_TOL, DEFAULT_SLACK, Grid, GridSpec, LevelSet, Orientation, ParamBox, Parametrization,
    Point,
};
pub use fd::{FdConfig, FdOrder};
pub use fields::{reduce_time, OneForm, ScalarField, TwoForm, TwoFormValue, VectorField};
pub use flow::{integrate, integrate_flow, Augmented, FlowConfig, FlowRhs};
pub use maps::DiffMap;
