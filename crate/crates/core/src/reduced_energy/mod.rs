//! Energy of spike ensembles, the reduced functional Ψ_λ(d, ξ), its critical
//! points and the admissibility test for λ-dependent couplings β(λ).

pub mod beta;
pub mod energy;
pub mod ensemble;
pub mod psi;
pub mod solve;

pub use beta::{beta_admissible, BetaReport, BetaSchedule};
pub use energy::{
    compare_breakdowns, d_constants, energy_terms_asymptotic, energy_terms_quadrature, remainder_budget, DConstant,
    EnergyBreakdown, EnergyComparison, EnergyContext, EnergyMethod, EnergySettings,
};
pub use ensemble::{SpikeEnsemble, Validation};
pub use psi::{critical_d, critical_d_with, psi, psi_grad, psi_grad_scaled, psi_scaled, ScaledValue, SecondOrder};
pub use solve::{solve_reduced_system, CriticalPointReport, SolveMode, SolveSettings, SpikeBox};
