//! Local rigidity analysis of polyhedral surfaces in the folding-angle model.
//!
//! The crate evaluates closure constraints around interior vertices and
//! representative cycles, builds their derivative tensors of any order,
//! expands derivatives along trajectories with the Faà di Bruno formula, and
//! runs the rigidity / prestress-stability decision procedure.

pub mod analysis;
pub mod closure;
pub mod derivatives;
pub mod energy;
pub mod error;
pub mod fixtures;
pub mod jets;
pub mod linalg;
pub mod scalar;
pub mod series;
pub mod surface;
pub mod tensor;

pub use analysis::{classify, classify_jets, AnalysisOptions, FlexCertificate, FlexKind, RigidityReport};
pub use closure::{is_configuration, residual, Closure, ConfigurationCheck, TOL_CONFIG};
pub use derivatives::{
    derivative_tensor, fd_oracle, rigidity_matrix, ConstraintJets, Evaluator, PolynomialSystem, DEFAULT_KMAX,
};
pub use energy::{build_energy, fit_growth, growth_probe, growth_samples, selfstress_basis, stress_data, EnergyModel, GrowthFit, GrowthPoint, StressData};
pub use error::{Error, Result};
pub use jets::{de_dt, df_dt, enumerate_partitions, Partition, TrajectoryJet};
pub use surface::{load_surface, FoldingState, GeometryCache, Surface, SurfaceDocument};
pub use tensor::SymmetricTensor;
