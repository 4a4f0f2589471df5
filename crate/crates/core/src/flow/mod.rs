mod deturck;
mod kappa;
mod pde;
mod study;

pub use deturck::{
    deturck_expansion_check, deturck_field_series, deturck_system_closed_form,
    deturck_system_engine, lie_derivative_series, lower, DeturckReport,
};
pub use kappa::{kappa_evolve, kappa_rhs, kappa_rk4, KappaMethod, KappaState, KappaSystem};
pub use pde::{
    advance, deturck_decay_slope, deturck_field, fit_expansion, flow_run, linear_fit, mass_fit,
    rdtf_step, Background, ExpansionFit, FlowConfig, FlowFields, FlowGrid, FlowRun, FlowSample,
    FlowState, MassFit, RunOptions, FLOW_CSV_HEADER,
};
pub use study::{
    parabolic_scaling_run, predicted_mass, residual_samples, scalar_evolution_residual, PdeScaling,
    ResidualField, ScalingRow, ScalingTable,
};
