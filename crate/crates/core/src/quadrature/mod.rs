pub mod adaptive;
pub mod engine;
pub mod fit;
pub mod lemmas;
pub mod qmc;
pub mod sphere;

pub use engine::{integrate, integrate_vec, QuadResult, QuadratureSpec};
pub use fit::{AsymptoticFitReport, FitSample};
pub use lemmas::{integrate_bubble_power, interaction_integral, interaction_norms, taylor_bound_check, TaylorKind, TaylorReport};
