//! Geodesic shooting for jet particles in landmark LDDMM on `R^d`.
//!
//! Particles carry a position and, at order 1 and 2, the first and second
//! derivatives of the deformation at that position. Their canonical momenta
//! generate a velocity field through a gaussian reproducing kernel; the
//! resulting Hamiltonian flow is integrated with RK4, its internal-symmetry
//! momenta are audited for conservation, and shooting is used to register
//! one particle configuration onto another.

pub mod cli;
pub mod config;
pub mod conservation;
pub mod dynamics;
pub mod error;
pub mod jet;
pub mod kernel;
pub mod matching;
pub mod phase;
pub mod sample;
pub mod tensor;

pub use conservation::{audit, noether_gl, noether_s12, InvariantDrift, InvariantReport};
pub use dynamics::{
    flow_points, grad_hamiltonian, hamiltonian, integrate, shoot, velocity_jet, FlowResult, HamiltonianGradient,
    ParticleGradient, Scheme, Trajectory,
};
pub use error::{Error, Result};
pub use jet::{act_left, act_right, Jet1Element, Jet2Element, S12Tensor};
pub use kernel::{Kernel, KernelFamily};
pub use matching::{RegistrationProblem, RegistrationResult, Target};
pub use phase::{FieldJet, JetOrder, ParticleState, SpatialMomenta, SpatialMomentum, SystemState};
pub use tensor::Tensor;
