//! Fibered connected sums, half Lutz twists and glued loops.

pub mod darboux;
pub mod glued;
pub mod gluing;
pub mod knot;
pub mod pipeline;
pub mod slice;
pub mod tube;

pub use darboux::{
    normal_form_tube, normal_form_tube_with, strict_darboux_chart, strict_darboux_chart_with, strictness_residual,
    DarbouxConfig, NormalFormTube, StrictChart, StrictnessReport, TubeConfig, TubeReport,
};
pub use gluing::{check_pullback, gluing_maps, GluingMaps, PullbackCheck};
pub use knot::{FramedTransverseKnot, KnotCertificate};
pub use slice::SliceChart;
pub use tube::{default_tube_radius, tube_embedding, tube_embedding_with, TubeEmbedding, TubeEmbeddingReport};
pub use glued::{
    fibered_sum, fibered_sum_tubes, glue_loops, glue_loops_with, half_lutz, neck_loop, overlap_samples,
    ChartCertificate, FieldOverlapReport, GlueConfig, GluedLoop, GluedManifold, OverlapReport, Piece, Transition,
    TubeSide, SMOOTH_TYPE_NOTE,
};
pub use pipeline::{north_pole, theorem1_pipeline, CertificateBundle, PipelineConfig, SourceLoop, StageTiming};
