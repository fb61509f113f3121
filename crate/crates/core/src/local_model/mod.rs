//! Discrete complex calculus on uniform grids over `[0,1]_t × (torus or
//! square patch)`: Wirtinger derivatives, the reduced complex Hessian of
//! translation-invariant functions, ω-plurisubharmonicity tests, the Green
//! disc identity and a sub-mean-value tester.

mod green;
mod grid;
mod hessian;
mod submean;
mod wirtinger;

pub use green::{green_disc_identity, ClosureField, DiscTestField, GreenIdentity};
pub use grid::{Grid, GridFunction, GridSlice, KahlerCoefficient, NodeField, Topology};
pub use hessian::{hessian_at, is_omega_psh, reduced_hessian, HessianField, PshReport, ReducedHessian};
pub use submean::{submeanvalue_test, PlaneSamples, SubmeanReport};
pub use wirtinger::{wirtinger, Neighborhood, Wirtinger};
