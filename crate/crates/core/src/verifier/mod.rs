//! Numerical checks of the Carleman inequalities over seeded ensembles.
//!
//! Every check returns a [`RatioReport`]; constants the theory leaves
//! implicit are recorded, explicit ones are asserted.

pub mod bell;
pub mod commutator;
pub mod envelope;
pub mod flat;
pub mod gap;
pub mod grid;
pub mod report;

pub use bell::{check_bell, worst_split};
pub use commutator::{
    check_commutator, field_ensemble, radial_hessian_mismatch, FormResolution, SpatialProfile, TestField, WavePacket,
};
pub use envelope::{check_weight_envelope, EnvelopeReport};
pub use flat::check_flat_carleman;
pub use gap::{check_gap_inequality, gap_sweep, ground_mode_probe, series_ensemble, ExcludedSet, SeriesEnsemble};
pub use grid::GridFunction;
pub use report::{write_reports, BoundKind, RatioReport, REPORT_HEADER};
