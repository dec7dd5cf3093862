//! Volume-normalized anisotropic curvature flow on the support function.
//!
//! A convex body moving with normal speed `s(ν)` has support function obeying
//! `∂u/∂t = s`. With `s = −sign(1−p)(f σ_k(κ))^{1/(1−p)}` and the volume held
//! fixed, the fixed points are the homothetic solutions of the curvature
//! equation, which makes the flow an independent check on Newton.

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{quotient_with_gradient, sigma_all};
use crate::grid::ScalarField;
use crate::solver::{admissibility, ProblemSpec};
use crate::surface::{bundle_from_support, ShapeBundle};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("invalid flow input: {0}")]
    Invalid(String),
    #[error("sigma_k(kappa) = {value} at node {node}")]
    Inadmissible { node: usize, value: f64 },
    #[error("time step underflow (dt = {dt:e} at t = {t})")]
    StepUnderflow { t: f64, dt: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowRecord {
    pub t: f64,
    pub volume: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub u: ScalarField,
    pub t: f64,
    pub dt: f64,
    pub renormalize: bool,
    pub c_cfl: f64,
    /// Volume held fixed when `renormalize` is set.
    pub volume0: f64,
    pub steps: usize,
    pub rejected: usize,
    pub history: Vec<FlowRecord>,
}

impl FlowState {
    pub fn new(u0: ScalarField, renormalize: bool) -> Self {
        let volume0 = bundle_from_support(&u0).volume;
        Self {
            u: u0,
            t: 0.0,
            dt: f64::INFINITY,
            renormalize,
            c_cfl: 0.2,
            volume0,
            steps: 0,
            rejected: 0,
            history: Vec::new(),
        }
    }
}

fn check_spec(spec: &ProblemSpec) -> Result<(), FlowError> {
    if (spec.p - 1.0).abs() < 1e-14 {
        return Err(FlowError::Invalid("flow speed is undefined for p = 1".into()));
    }
    Ok(())
}

/// `s = −sign(1−p)(f σ_k(κ))^{1/(1−p)}` node-wise.
pub fn normal_speed(bundle: &ShapeBundle, spec: &ProblemSpec) -> Result<ScalarField, FlowError> {
    check_spec(spec)?;
    let beta = 1.0 / (1.0 - spec.p);
    let sign = -(1.0 - spec.p).signum();
    let mut out = Vec::with_capacity(bundle.u.len());
    for i in 0..bundle.u.len() {
        let sk = sigma_all(bundle.kappa_at(i))[spec.k];
        if !(sk > 0.0 && sk.is_finite()) {
            return Err(FlowError::Inadmissible { node: i, value: sk });
        }
        out.push(sign * (spec.f.values()[i] * sk).powf(beta));
    }
    Ok(bundle.u.with_values(out))
}

/// Largest diffusion coefficient of the linearized speed, `|∂s/∂μ_i|` over
/// nodes and principal radii.
fn max_diffusion(bundle: &ShapeBundle, speed: &ScalarField, spec: &ProblemSpec) -> f64 {
    let beta = (1.0 / (1.0 - spec.p)).abs();
    let kf = spec.k as f64;
    let mut d: f64 = 0.0;
    for i in 0..bundle.u.len() {
        let Ok((f, grad)) = quotient_with_gradient(bundle.radii_at(i), spec.k) else {
            continue;
        };
        let g = grad.iter().copied().fold(0.0, f64::max);
        d = d.max(beta * speed.values()[i].abs() * kf * g / f);
    }
    d
}

/// Back-computes `λ` for the current shape and returns it with the sup of the
/// relative residual `1 − (f/λ)^{1/k} u^{(p−1)/k} / F(h)`.
///
/// `λ` is chosen to minimize that sup; at a fixed point of the normalized flow
/// it coincides with the eigenvalue of the homothetic solution.
pub fn self_similar_residual(bundle: &ShapeBundle, spec: &ProblemSpec) -> (f64, f64) {
    let kf = spec.k as f64;
    let a = spec.rhs_exponent();
    let mut gmin = f64::INFINITY;
    let mut gmax = f64::NEG_INFINITY;
    for i in 0..bundle.u.len() {
        // 1/F(h) = σ_k(κ)^{1/k}
        let sk = sigma_all(bundle.kappa_at(i))[spec.k];
        let g = spec.f.values()[i].powf(1.0 / kf) * bundle.u.values()[i].powf(a) * sk.powf(1.0 / kf);
        gmin = gmin.min(g);
        gmax = gmax.max(g);
    }
    let c = 2.0 / (gmin + gmax);
    let lambda = c.powf(-kf);
    (lambda, (gmax - gmin) / (gmax + gmin))
}

/// One accepted explicit Euler step `u ← u + dt (s − η u)`, halving `dt` on
/// rejection. With `renormalize`, `η = ∫ s det h / ((n+1) V)` and the result
/// is rescaled to the initial volume to remove the O(dt²) drift.
pub fn flow_step(state: &FlowState, spec: &ProblemSpec) -> Result<FlowState, FlowError> {
    let n1 = spec.n as f64 + 1.0;
    let bundle = bundle_from_support(&state.u);
    let speed = normal_speed(&bundle, spec)?;
    let eta = if state.renormalize {
        let det = bundle.det_h();
        let flux: Vec<f64> = speed.values().iter().zip(&det).map(|(s, d)| s * d).collect();
        state.u.grid().integrate(&flux) / (n1 * bundle.volume)
    } else {
        0.0
    };
    let spacing = state.u.grid().min_spacing();
    let cap = state.c_cfl * spacing * spacing / max_diffusion(&bundle, &speed, spec).max(1e-300);
    let mut dt = (2.0 * state.dt).min(cap);
    let mut rejected = state.rejected;
    loop {
        if dt < 1e-12 {
            return Err(FlowError::StepUnderflow { t: state.t, dt });
        }
        let values: Vec<f64> = state
            .u
            .values()
            .iter()
            .zip(speed.values())
            .map(|(u, s)| u + dt * (s - eta * u))
            .collect();
        let mut trial = state.u.with_values(values);
        if admissibility(&trial, spec).ok() {
            if state.renormalize {
                let v = bundle_from_support(&trial).volume;
                trial = trial.scaled((state.volume0 / v).powf(1.0 / n1));
            }
            let mut next = state.clone();
            next.u = trial;
            next.t += dt;
            next.dt = dt;
            next.steps += 1;
            next.rejected = rejected;
            return Ok(next);
        }
        rejected += 1;
        dt *= 0.5;
    }
}

#[derive(Clone, Debug)]
pub struct FlowOutcome {
    pub state: FlowState,
    pub converged: bool,
    /// Back-computed `λ` of the final shape.
    pub lambda: f64,
    pub residual: f64,
}

/// Runs the normalized flow until the relative residual of the homothetic
/// equation drops below `stop_tol` or `t ≥ t_max`.
pub fn flow_run(spec: &ProblemSpec, u0: &ScalarField, t_max: f64, stop_tol: f64) -> Result<FlowOutcome, FlowError> {
    if !(spec.p > spec.k as f64 + 1.0) {
        return Err(FlowError::Invalid(format!("flow needs p > k+1, got p={}", spec.p)));
    }
    if !admissibility(u0, spec).ok() {
        return Err(FlowError::Invalid("initial support function is not admissible".into()));
    }
    flow_run_from(FlowState::new(u0.clone(), true), spec, t_max, stop_tol)
}

/// [`flow_run`] from a prepared state, e.g. with a custom `c_cfl`.
pub fn flow_run_from(mut state: FlowState, spec: &ProblemSpec, t_max: f64, stop_tol: f64) -> Result<FlowOutcome, FlowError> {
    let record_every = 50;
    loop {
        let bundle = bundle_from_support(&state.u);
        let (lambda, residual) = self_similar_residual(&bundle, spec);
        let converged = residual <= stop_tol;
        let done = converged || state.t >= t_max;
        if done || state.steps % record_every == 0 {
            state.history.push(FlowRecord { t: state.t, volume: bundle.volume, residual });
        }
        if done {
            return Ok(FlowOutcome { state, converged, lambda, residual });
        }
        state = flow_step(&state, spec)?;
    }
}
