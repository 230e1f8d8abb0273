//! Reference P1 finite elements on structured subdomain meshes, skeleton
//! multiplier spaces, trace coupling, manufactured solutions and error norms.

mod assembly;
mod cases;
mod mesh;
mod norms;
mod quadrature;
mod scenario;
mod skeleton;
mod solver;

pub use assembly::{assemble_load, assemble_local, full_stiffness, lumped_dof_weights, LocalAssembly};
pub use cases::{CaseId, FractureSegment, ManufacturedCase};
pub use mesh::{InterfaceTrace, SubdomainMesh};
pub use norms::{broken_h1_error, max_nodal_error, multiplier_error, nodal_values};
pub use scenario::{build_scenario, Scenario, ScenarioConfig, ScenarioKind, SegmentConfig};
pub use skeleton::{build_coupling, CouplingAssembly, FluxSide, InterfaceShape, SkeletonInterface, SkeletonSpace};
pub use solver::{galerkin_pseudo_inverse, GalerkinPseudoInverse};

use thiserror::Error;

use crate::coupling::CouplingError;
use crate::numerics::NumericsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FemError {
    #[error("degenerate element {element} (measure {measure:e})")]
    DegenerateElement { element: usize, measure: f64 },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),
    #[error("invalid configuration: {field}: {reason}")]
    ConfigInvalid { field: String, reason: String },
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl FemError {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        FemError::ConfigInvalid { field: field.to_string(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, FemError>;

pub type Point = [f64; 2];

pub(crate) fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
