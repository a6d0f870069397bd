//! Ground-truth augmentation: activations, stimulus tables, artifacts and toy data.

mod activation;
mod artifacts;
mod stim;
mod toy;

pub use activation::{build_spatial_activation, build_synthetic_hrf_timeseries, scale_to_peak_conc};
pub use artifacts::{
    add_artifacts, add_chromo_artifacts_to_od, auto_alpha, gen_bl_shift, gen_spike, Generator, Generators, ScaleMode,
};
pub use stim::{add_event_timing, build_stim_df, random_events_perc, StimParams, TrialOrder};
pub use toy::{preprocess_toy, simulate_bimodal_toy, Split, ToyConfig, ToyDataset, ToySplit};

/// Artifact events; an empty `channels` list means every channel.
pub type ArtifactTiming = crate::recording::StimTable;
