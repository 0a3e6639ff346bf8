//! Boundary-free stabilization of cascaded heat equations actuated in the
//! first equation only.
//!
//! The pipeline is: validate a [`PlantSpec`](model::PlantSpec), build the
//! Sturm–Liouville basis, solve the polynomial transform family, synthesize
//! the modal gains, certify the closed loop, and simulate it.
//!
//! ```
//! use cascade_stab::{fixtures, validate_plant, build_basis, build_controller, SynthesisOptions};
//!
//! let plant = validate_plant(fixtures::reference_plant(), None).unwrap();
//! let basis = build_basis(plant.length, plant.gamma1, plant.gamma2, 30).unwrap();
//! let ctrl = build_controller(&plant, &basis, 9.0, &SynthesisOptions::default()).unwrap();
//! assert_eq!(ctrl.modes, 2);
//! ```

// `!(x > 0)` is used deliberately so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod simulator;
pub mod spectral;
pub mod synthesis;
pub mod transform;

pub use error::{Error, ErrorClass, Result};
pub use model::{validate_plant, DiffusionIndices, PlantSpec, ShapeFunction, ValidatedPlant};
pub use scalar::Real;
pub use simulator::{InitialCondition, ProfileTerm, SimConfig, Trajectory};
pub use spectral::{build_basis, SpectralBasis};
pub use synthesis::{build_controller, certificate, Certificate, Controller, SynthesisOptions};
pub use transform::{solve_transform_family, ModalTransform, TransformFamily};

pub type Plant = PlantSpec<f64>;
pub type Validated = ValidatedPlant<f64>;
pub type Shape = ShapeFunction<f64>;
pub type Basis = SpectralBasis<f64>;
pub type Family = TransformFamily<f64>;
pub type Gains = Controller<f64>;
pub type Cert = Certificate<f64>;
pub type Initial = InitialCondition<f64>;
pub type Traj = Trajectory<f64>;

pub type Plant32 = PlantSpec<f32>;
pub type Basis32 = SpectralBasis<f32>;
pub type Gains32 = Controller<f32>;
