//! Canonical correlation family, temporal embedding and pattern recovery.

pub mod cca;
pub mod haufe;
pub mod laplacian;
pub mod tcca;

pub use cca::{closed_form_correlations, fit_cca, transform_cca, CcaModel, CcaParams, FitDims, Standardizer};
pub use haufe::spatial_pattern_from_weights;
pub use laplacian::build_graph_laplacian;
pub use tcca::{fit_tcca, transform_tcca, TccaModel};
