//! Stopping-time construction of sparse families and the quadratic sparse
//! form.

mod build;
mod form;

pub use build::{
    build_sparse, calibrate, eta_calibrate, exceptional_set, maximal_cover, EtaCalibration,
    MStarVariant, NodeInfo, SparseBuild, SparseBuildConfig, Stopping, StoppingField, ETA_PRECISION,
};
pub use form::{
    domination_check, linear_sparse_form, sparse_form, CubeDecomposition, CubeTerm,
    SparseFormReport, SparseFormValue,
};
