//! Numerical laboratory for the fractional Allen–Cahn equation.

pub mod energy;
pub mod error;
pub mod extension;
pub mod fft;
pub mod field;
pub mod kernel;
pub mod linalg;
pub mod quad;
pub mod scalar;
pub mod scaling;
pub mod solver;
pub mod stability;

pub use energy::{
    domain_variation, energy_potential, energy_sobolev, fractional_perimeter,
    gradient_bound_check, maxmin_identity_check, perimeter_energy_identity,
    translation_comparison, EnergyBreakdown, EnergyModel, Potential, PotentialKind, VariationMap,
};
pub use error::{LabError, Result};
pub use field::{
    embed_profile, gradient_l1_norm, hausdorff_distance, l1_distance, level_set, make_grid,
    rescale_blowdown, BallRegion, BoundaryModel, ExteriorConstant, Grid, IndicatorSet, Plane,
    ScalarField,
};
pub use kernel::{
    apply_fraclap_spectral, apply_laplacian, apply_lk_quadrature, kernel_audit, kernel_value,
    operator_consistency, symbol_constant, unit_width_epsilon, DiscreteOperator, KernelKind,
    KernelSpec, NonlocalOperator, RadialProfile, SpectralOperator,
};
pub use scalar::Real;
pub use scaling::{
    blowdown_convergence, bv_scaling, density_check, fit_loglog, fit_loglog_window, flatness_profile,
    full_energy_scaling, interpolation_check, layer_decay, pot_vs_sob, potential_decay, random_smooth_field,
    sobolev_scaling, BlowdownTrace, DensityCheckConfig, DensityOutcome, DensityReport, FitResult,
    FlatnessPoint, InterpolationRatio, RatioReport, ScalingExperiment, ScalingRun,
};
pub use solver::{
    el_consistency, gradient_flow, solve_layer, solve_layer_1d, translation_degeneracy, LayerSolution,
    Scheme, SolveConfig, SolveResult,
};
pub use stability::{
    cone_perimeter_stability, flow_map, gradient_test_inequality, gradient_test_terms, min_rayleigh,
    perimeter_quotients, second_variation, GradientTest, PerimeterProbe, QuotientPoint, SetLevel,
    StabilityReport, VectorFieldSpec,
};
pub use extension::{
    extend, extend_half_space, extend_with, extension_constant, extension_energy, extension_energy_parts,
    monotonicity_trace, neumann_trace, neumann_trace_check, ExtensionBackend, ExtensionEnergy,
    ExtensionField, MonotonicityTrace,
};

pub type Field = ScalarField<f64>;
pub type Field32 = ScalarField<f32>;
pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type Kernel = KernelSpec<f64>;
pub type Region = BallRegion<f64>;
pub type Indicator = IndicatorSet<f64>;
pub type Potential64 = Potential<f64>;
