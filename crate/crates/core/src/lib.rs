//! Heavy-tailed marked point processes, their risk paths, and the limit
//! theory of the multiple-large-claims regime.
//!
//! The closed-form layer is generic over the scalar ([`Real`], `f32` or
//! `f64`); the Monte Carlo layer works in `f64`.

pub mod asymptotics;
mod error;
pub mod heavy_tails;
pub mod marked;
pub mod montecarlo;
pub mod point_processes;
pub mod quadrature;
mod real;
pub mod risk_paths;

pub use asymptotics::{
    gamma_monitoring_ratio_t0zero, monitoring_factor, monitoring_factor_two_term, monitoring_limit_t0zero_gamma,
    AsymptoticContext, ConditionalLimitSampler,
};
pub use error::{Error, Result};
pub use heavy_tails::{norming, LimitMeasure, ParetoLaw};
pub use marked::{
    hrv_pp_limit, limit_cylinder_mass, mc_hrv_pp, CylinderBox, CylinderEvent, MarkedPattern, MarkedPoint,
};
pub use montecarlo::{ExperimentConfig, RunConfig, TailEstimate};
pub use point_processes::{m2_gamma, m3_box_gamma, BaseProcessModel, FactorialMoments, ProcessKind, TimePattern};
pub use real::Real;
pub use risk_paths::{build_centered_risk, build_risk, Jump, RiskPath};

pub type ParetoLawF64 = ParetoLaw<f64>;
pub type ParetoLawF32 = ParetoLaw<f32>;
pub type ModelF64 = BaseProcessModel<f64>;
pub type ModelF32 = BaseProcessModel<f32>;
pub type MarkedPatternF64 = MarkedPattern<f64>;
pub type RiskPathF64 = RiskPath<f64>;
pub type RiskPathF32 = RiskPath<f32>;
pub type ContextF64 = AsymptoticContext<f64>;
pub type ContextF32 = AsymptoticContext<f32>;
