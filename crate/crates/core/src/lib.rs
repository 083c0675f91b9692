//! Mixed finite elements for two-dimensional incompressible Navier-Stokes
//! and Euler flow, with convection advected by a divergence-free H(div)
//! reconstruction of the discrete velocity.

pub mod assembly;
pub mod benchmarks;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod reconstruction;
pub mod spaces;
pub mod timestepping;
pub mod verify;

pub use assembly::{Assembler, ConvectiveForm};
pub use benchmarks::{BenchmarkCase, RunRequest};
pub use diagnostics::{ConservedQuantities, DiagnosticsRecord};
pub use error::{Error, Result};
pub use linalg::{Constraints, LuSolver, SaddleSystem, SparseMatrix};
pub use mesh::{BoundaryTag, DomainKind, DomainSpec, Mesh};
pub use quadrature::QuadratureRule;
pub use reconstruction::{ProjectionFlavor, ReconstructionPlan, Reconstructor};
pub use spaces::{ElementKind, ElementPair, Eval, Field, Shape, Space};
pub use timestepping::{BoundaryCondition, SchemeConfig, Simulation, Stepper};
