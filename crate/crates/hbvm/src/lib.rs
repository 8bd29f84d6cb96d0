//! Energy-conserving Runge-Kutta integrators for canonical Hamiltonian
//! systems: HBVM(k, s) tableau construction, fundamental/silent stage
//! splitting with the blended nonlinear solver, spectral diagnostics, a
//! fixed-step integrator with dense output, benchmark problems, and the
//! experiment drivers behind the `hbvm` CLI.
//!
//! An HBVM(k, s) advances ẏ = J∇H(y) with a degree-s polynomial update whose
//! free coefficients are fixed by a k-point quadrature of the line integral
//! of ∇H; for Gauss abscissae the step conserves every polynomial
//! Hamiltonian of degree ν as soon as k ≥ νs/2, while retaining order 2s.

pub mod blended;
pub mod error;
pub mod harness;
pub mod integrator;
pub mod legendre;
pub mod problems;
pub mod quadrature;
pub mod system;
pub mod tableau;

pub use error::{Error, Result};
pub use integrator::{integrate, step, DenseOutput, StageSolver, StepResult, Trajectory};
pub use problems::ProblemSpec;
pub use quadrature::{gauss_rule, interpolatory_weights, lobatto_rule, NodeFamily, QuadratureRule};
pub use system::{HamiltonianSystem, OdeSystem};
pub use tableau::{build_collocation, build_hbvm, Family, HbvmTableau};
