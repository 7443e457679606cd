//! Spline-basis Hessian theory: moments, leading-order Hessian, eigenvalue
//! bounds, residual estimation and gradient-descent mode decay.

pub mod bounds;
pub mod decay;
pub mod hessian;
pub mod moments;
pub mod residual;
pub mod spline;

pub use bounds::{condition_sweep, theorem_bounds, BoundsReport, ConditionRow};
pub use decay::{mode_decay_sim, ModeDecayReport};
pub use hessian::{ar1_correlation, leading_order_hessian, HessianBundle};
pub use moments::{basis_moments, Density, MomentBundle};
pub use residual::{empirical_hessian, residual_report, residual_study, ResidualReport};
pub use spline::{bspline_basis, SplineBasisSpec};
