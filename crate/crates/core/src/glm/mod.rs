//! General linear model: basis functions, design matrices, fits and inference.

pub mod basis;
pub mod contrast;
pub mod design;
pub mod fit;

pub use basis::Basis;
pub use contrast::{auc_contrast, extraction_design, predict_with_uncertainty, t_test, ContrastResult};
pub use design::{drift_regressors, hrf_regressors, short_channel_regressor, DesignMatrix, Drift};
pub use fit::{fit, mar, predict, r_squared, FitResult, NoiseModel};
pub use crate::stats::fdr_bh;
