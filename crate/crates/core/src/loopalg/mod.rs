//! Loops of contactomorphisms: construction, algebra and certification.

pub mod certify;
pub mod compare;
pub mod loops;
pub mod ops;

pub use certify::{
    certify_positivity, certify_positivity_with, certify_scalar, check_local_autonomy, AutonomyConfig, AutonomyReport,
    PositivityCertificate, PositivityThresholds, SliceMinimum, Verdict,
};
pub use loops::{
    check_closure, extract_hamiltonian, loop_from_ham, loop_from_ham_with, path_from_ham, ClosureReport,
    ContactLoop, ExactFlow, IntegratedFlow, LoopConfig, LoopFlow, Provenance,
};
pub use ops::{
    compose_loops, concatenate_loops, conjugate_loop, map_log_factor, oracle_discrepancy, piece_time,
    self_concatenate, ORACLE_TIMES,
};
pub use compare::{flow_distance, formula_residual, Discrepancy};
