//! Signal conversion, filtering, artifact handling and epoching.

pub mod epochs;
pub mod features;
pub mod filter;
pub mod mbll;
pub mod motion;
pub mod physio;

pub use epochs::{baseline_correct, block_average, to_epochs, Epochs};
pub use features::{epoch_features, Feature, FeatureSpec};
pub use filter::{freq_filter, split_long_short};
pub use mbll::{clamp_amplitude, conc2od, int2od, od2conc, od2int, ExtinctionTable, CHROMOPHORES};
pub use motion::{spline_correct, tddr};
pub use physio::global_component_subtract;
