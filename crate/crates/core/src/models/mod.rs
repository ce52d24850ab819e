//! Explicit model manifolds, forms and loops on `S^1 x D^2`, `S^1 x S^2`, the neck and `S^3`.

pub mod cutoff;
pub mod displacement;
pub mod loops;
pub mod manifolds;

pub use cutoff::CutoffProfile;
pub use displacement::{default_displacement, displacement_psi, Displacement, DisplacementReport, SouthChart, DEFAULT_EPS};
pub use loops::{find_min_k, find_min_k_from, loop_beta, loop_delta, loop_hopf, loop_rho, loop_zeta, KSearch};
pub use manifolds::{
    model_annulus, model_by_name, model_s1s2, model_s3, model_solid_torus, s1s2_domain, s3_domain, ModelManifold,
    NamedRegion,
};
