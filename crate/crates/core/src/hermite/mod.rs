//! Hermite eigensystem, spectral projectors, resolvent and the parametrix of
//! the conjugated heat operator.

pub mod basis;
pub mod localized;
pub mod parametrix;
pub mod spectral;

pub use basis::{hermite_all, hermite_eval, hermite_with_derivative, GaussHermite, HermiteBasis, MultiIndex};
pub use localized::{ball_cutoff, fitted_exponent, localized_ratio, lp_projection_ratio, pointwise_ratio, LocalizedRatio};
pub use parametrix::{mode_convolve, parametrix_apply, random_smooth_series, SpectralSeries, TimeGrid};
pub use spectral::{project, spectrum_distance, SpectralVector};
