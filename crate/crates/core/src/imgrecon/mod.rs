//! Diffuse optical tomography: meshes, spatial bases and Tikhonov inversion.

mod basis;
mod mesh;
mod operator;

pub use basis::{build_spatial_basis, BasisPreset, SpatialBasis};
pub use mesh::{geodesic_distance, geodesic_on, Adjacency, TriSurface};
pub use operator::{
    assemble_inverse_operator, forward_project, parcel_average, reconstruct, tikhonov, ImageReconConfig,
    InverseOperator, ReconMode, SensitivityMatrix,
};
