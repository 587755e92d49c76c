//! Changes of variables: heat to Hermite coordinates, and the coordinate
//! change that freezes a rough metric to the identity at anchor points.

pub mod heat;
pub mod metric;

pub use heat::{
    conjugation_residual, from_hermite, heat_point, hermite_point, observed_order, source_to_hermite, to_hermite,
    ConjugationReport, HeatSample, HermiteGrid, HermiteSample,
};
pub use metric::{
    anchor_point, audit_metric, build_chi, pushforward_metric, AnchorLattice, ChiJet, ChiMap, MetricAudit,
    MetricField, MetricSample, PerturbedMetric, Pushforward,
};
