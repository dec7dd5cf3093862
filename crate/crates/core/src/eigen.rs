//! The eigenvalue problem `⟨X,ν⟩^k σ_k(κ) = λ ψ(ν)` at `p = k+1`.
//!
//! [`continuation_eigen`] solves the `λ = 1` problem for a decreasing sequence
//! `p_j ↓ k+1`, normalizes each solution to unit volume (which turns the
//! equation into one with `λ_p = V^{−(p−k−1)/(n+1)}`), and extrapolates `λ_p`
//! and the normalized shape to `p = k+1`. [`direct_eigen_solve`] attacks the
//! limit problem directly with `λ` as an extra unknown and the volume
//! constraint as an extra equation.

use serde::Serialize;
use thiserror::Error;

use crate::algebra::sigma_all;
use crate::bounds::{self, BoundReport};
use crate::grid::{ScalarField, GridError};
use crate::solver::{admissibility, newton_solve_shape, residual, sup, ProblemSpec, SolveReport, SolverError};
use crate::sparse::{LinearError, SparseMatrix};
use crate::surface::{bundle_from_support, det};

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("invalid eigen problem: {0}")]
    Invalid(String),
    #[error("volume {0:e} is not positive")]
    Volume(f64),
    #[error("solve at step {index} (p={p}) failed: {source}")]
    Step {
        index: usize,
        p: f64,
        #[source]
        source: SolverError,
        completed: Vec<EigenStep>,
    },
    #[error("direct solve did not converge after {iterations} iterations (residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuationSchedule {
    pub p_list: Vec<f64>,
    pub warm_start: bool,
}

impl ContinuationSchedule {
    /// `p_j = k+1+base^{−j}` for `j = 1..=steps`.
    pub fn geometric(k: usize, base: f64, steps: usize) -> Self {
        let p_list = (1..=steps).map(|j| k as f64 + 1.0 + base.powi(-(j as i32))).collect();
        Self { p_list, warm_start: true }
    }

    /// The default schedule `p_j = k+1+2^{−j}`, `j = 1..=8`.
    pub fn standard(k: usize) -> Self {
        Self::geometric(k, 2.0, 8)
    }

    pub fn validate(&self, k: usize) -> Result<(), EigenError> {
        if self.p_list.is_empty() {
            return Err(EigenError::Invalid("empty schedule".into()));
        }
        if self.p_list.iter().any(|&p| !(p > k as f64 + 1.0) || !p.is_finite()) {
            return Err(EigenError::Invalid(format!("schedule entries must exceed k+1={}", k + 1)));
        }
        if self.p_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(EigenError::Invalid("schedule must be strictly decreasing".into()));
        }
        Ok(())
    }
}

/// One continuation step.
#[derive(Clone, Debug)]
pub struct EigenStep {
    pub p: f64,
    pub lambda_p: f64,
    /// `ln V` of the unnormalized `λ = 1` solution (the volume itself may underflow).
    pub log_volume: f64,
    /// Unit-volume solution.
    pub normalized: ScalarField,
    /// Sup-residual of the normalized shape against the `λ_p` equation.
    pub residual: f64,
    pub symmetry_defect: f64,
    pub min_radius: f64,
    pub solve: SolveReport,
}

#[derive(Clone, Debug)]
pub struct EigenReport {
    pub k: usize,
    pub steps: Vec<EigenStep>,
    pub lambda0: f64,
    /// Extrapolated unit-volume limit shape.
    pub u0: ScalarField,
    /// `sup |u₀^k σ_k(κ) − λ₀ ψ|`.
    pub verification_residual: f64,
    pub verification_tolerance: f64,
    pub symmetry_defect: f64,
    pub bound_checks: Vec<BoundReport>,
}

impl EigenReport {
    pub fn lambda_list(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.lambda_p).collect()
    }

    pub fn p_list(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.p).collect()
    }

    pub fn verified(&self) -> bool {
        self.verification_residual <= self.verification_tolerance
    }
}

impl ProblemSpec {
    /// Eigen problem for `ψ`: `p = k+1`, `f = 1/ψ`, `λ` unknown (set to 1 here).
    pub fn eigen(k: usize, psi: &ScalarField) -> Result<Self, SolverError> {
        if let Some(i) = psi.values().iter().position(|&v| v <= 0.0) {
            return Err(SolverError::Invalid(format!("psi must be positive (psi={} at node {i})", psi.values()[i])));
        }
        let mut spec = ProblemSpec::new(k, k as f64 + 1.0, 1.0, psi.map(|v| 1.0 / v))?;
        spec.psi = psi.clone();
        Ok(spec)
    }
}

/// `u / V(u)^{1/(n+1)}`.
pub fn normalize_by_volume(u: &ScalarField) -> Result<ScalarField, EigenError> {
    let n1 = u.grid().dim() as f64 + 1.0;
    let mut out = u.clone();
    for _ in 0..2 {
        let v = bundle_from_support(&out).volume;
        if !(v > 0.0) {
            return Err(EigenError::Volume(v));
        }
        if (v - 1.0).abs() <= 1e-14 {
            break;
        }
        out = out.scaled(v.powf(-1.0 / n1));
    }
    Ok(out)
}

/// `λ_p = V^{−(p−k−1)/(n+1)}`.
pub fn lambda_from_volume(v: f64, p: f64, k: usize, n: usize) -> f64 {
    v.powf(-(p - k as f64 - 1.0) / (n as f64 + 1.0))
}

/// Smallest `r > 1` at which the round sphere of radius `r` is an outer
/// barrier: `λ maxψ r^{1−p} ≤ C(n,k) r^{−k}`.
pub fn barrier_radius(spec: &ProblemSpec) -> Result<f64, SolverError> {
    let d = spec.dilation_degree();
    if d <= 0.0 {
        return Err(SolverError::Invalid(format!("barrier needs p > k+1, got p={}", spec.p)));
    }
    let r = (spec.lambda * spec.psi.max() / spec.sigma_ones()).powf(1.0 / d);
    Ok(r.max(1.0 + 1e-6))
}

fn linear_intercept(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    if x.len() == 1 {
        return y[0];
    }
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    my - sxy / sxx * mx
}

/// `sup |u^k σ_k(κ) − λ ψ|` over the grid.
pub fn eigen_residual(u: &ScalarField, lambda: f64, spec: &ProblemSpec) -> f64 {
    let b = bundle_from_support(u);
    let mut worst: f64 = 0.0;
    for i in 0..u.len() {
        let e = sigma_all(b.kappa_at(i));
        let lhs = u.values()[i].powi(spec.k as i32) * e[spec.k];
        worst = worst.max((lhs - lambda * spec.psi.values()[i]).abs());
    }
    worst
}

pub fn continuation_eigen(spec: &ProblemSpec, schedule: &ContinuationSchedule) -> Result<EigenReport, EigenError> {
    schedule.validate(spec.k)?;
    let grid = spec.grid().clone();
    let n = spec.n;
    let n1 = n as f64 + 1.0;
    let k = spec.k as f64;
    let ball = grid.unit_ball_volume();
    let mut steps: Vec<EigenStep> = Vec::with_capacity(schedule.p_list.len());
    for (index, &p) in schedule.p_list.iter().enumerate() {
        let spec_j = spec.with_p(p).with_lambda(1.0);
        let w0 = match steps.last() {
            Some(prev) if schedule.warm_start => prev.normalized.scaled(ball.powf(1.0 / n1)),
            _ => ScalarField::constant(grid.clone(), 1.0),
        };
        let solve = newton_solve_shape(&spec_j, &w0).map_err(|source| EigenError::Step {
            index,
            p,
            source,
            completed: steps.clone(),
        })?;
        let vw = bundle_from_support(&solve.shape).volume;
        let log_volume = n1 * solve.log_scale + vw.ln();
        let lambda_p = solve.lambda_eff * vw.powf(-(p - k - 1.0) / n1);
        let normalized = normalize_by_volume(&solve.shape)?;
        let nspec = spec_j.with_lambda(lambda_p);
        let res = residual(&normalized, &nspec).map_err(|source| EigenError::Step {
            index,
            p,
            source,
            completed: steps.clone(),
        })?;
        steps.push(EigenStep {
            p,
            lambda_p,
            log_volume,
            residual: res.sup_abs(),
            symmetry_defect: normalized.symmetry_defect(),
            min_radius: bundle_from_support(&normalized).min_radius(),
            normalized,
            solve,
        });
    }

    let tail = &steps[steps.len().saturating_sub(4)..];
    let xs: Vec<f64> = tail.iter().map(|s| s.p - k - 1.0).collect();
    let lambda0 = linear_intercept(&xs, &tail.iter().map(|s| s.lambda_p).collect::<Vec<_>>());
    let nodes = grid.len();
    let mut u0 = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let ys: Vec<f64> = tail.iter().map(|s| s.normalized.values()[i]).collect();
        u0.push(linear_intercept(&xs, &ys));
    }
    let u0 = normalize_by_volume(&ScalarField::new(grid.clone(), u0)?)?;
    let verification_residual = eigen_residual(&u0, lambda0, spec);
    let mut report = EigenReport {
        k: spec.k,
        symmetry_defect: u0.symmetry_defect(),
        steps,
        lambda0,
        u0,
        verification_residual,
        verification_tolerance: 50.0 * grid.grid_error(),
        bound_checks: Vec::new(),
    };
    report.bound_checks = bounds::eigen_report_checks(&report, spec);
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct DirectEigen {
    pub u: ScalarField,
    pub lambda: f64,
    pub iterations: usize,
    /// `max(sup|R|, |V − 1|)` at the returned iterate.
    pub residual: f64,
}

/// Exact gradient of the discrete volume `(1/(n+1)) Σ wᵢ uᵢ det hᵢ`.
fn volume_gradient(u: &ScalarField, h: &[[f64; 3]]) -> Vec<f64> {
    let grid = u.grid();
    let n = grid.dim();
    let w = grid.weights();
    let ops = &grid.ops().hess;
    let y: Vec<f64> = w.iter().zip(u.values()).map(|(a, b)| a * b).collect();
    let mut g: Vec<f64> = (0..u.len()).map(|i| w[i] * det(n, h[i])).collect();
    let mut add = |op: &SparseMatrix, coeff: &dyn Fn(usize) -> f64| {
        let z: Vec<f64> = (0..y.len()).map(|i| y[i] * coeff(i)).collect();
        for (gi, t) in g.iter_mut().zip(op.apply_transpose(&z)) {
            *gi += t;
        }
    };
    if n == 1 {
        add(&ops[0], &|_| 1.0);
    } else {
        add(&ops[0], &|i| h[i][2]);
        add(&ops[2], &|i| h[i][0]);
        add(&ops[1], &|i| -2.0 * h[i][1]);
    }
    // the `uδ` part of h
    for i in 0..g.len() {
        let trace = if n == 1 { 1.0 } else { h[i][0] + h[i][2] };
        g[i] += y[i] * trace;
    }
    g.iter().map(|v| v / (n as f64 + 1.0)).collect()
}

fn eigen_system(u: &ScalarField, lambda: f64, spec: &ProblemSpec) -> Result<(Vec<f64>, f64), SolverError> {
    let r = residual(u, &spec.with_lambda(lambda))?;
    let v = bundle_from_support(u).volume;
    Ok((r.into_values(), v - 1.0))
}

/// Newton on `(u, λ)` for `F(h) = (f/λ)^{1/k} u` together with `V(u) = 1`.
pub fn direct_eigen_solve(spec: &ProblemSpec, u_init: &ScalarField, lambda_init: f64) -> Result<DirectEigen, EigenError> {
    if (spec.p - spec.k as f64 - 1.0).abs() > 1e-14 {
        return Err(EigenError::Invalid(format!("direct solve needs p = k+1, got p={}", spec.p)));
    }
    if !(lambda_init > 0.0) {
        return Err(EigenError::Invalid("initial eigenvalue must be positive".into()));
    }
    if !admissibility(u_init, spec).ok() {
        return Err(EigenError::Invalid("initial support function is not admissible".into()));
    }
    let len = u_init.len();
    let kf = spec.k as f64;
    let mut u = u_init.clone();
    let mut lambda = lambda_init;
    let (mut r, mut c) = eigen_system(&u, lambda, spec)?;
    let mut norm = sup(&r).max(c.abs());
    for iter in 0..spec.max_iter {
        if norm <= spec.tol_newton {
            return Ok(DirectEigen { u, lambda, iterations: iter, residual: norm });
        }
        let lspec = spec.with_lambda(lambda);
        let jac = crate::solver::assemble_jacobian(&u, &lspec)?;
        let bundle = bundle_from_support(&u);
        let dv = volume_gradient(&u, &bundle.h);
        let dl: Vec<f64> = (0..len)
            .map(|i| spec.f.values()[i].powf(1.0 / kf) * lambda.powf(-1.0 / kf - 1.0) * u.values()[i] / kf)
            .collect();
        let mut rows: Vec<Vec<(usize, f64)>> = (0..len)
            .map(|i| {
                let (cols, vals) = jac.row(i);
                let mut row: Vec<(usize, f64)> = cols.iter().copied().zip(vals.iter().copied()).collect();
                row.push((len, dl[i]));
                row
            })
            .collect();
        rows.push(dv.iter().copied().enumerate().collect());
        let full = SparseMatrix::from_rows(len + 1, rows);
        let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        rhs.push(-c);
        let delta = full.lu()?.solve(&rhs)?;
        let mut damping = 1.0;
        loop {
            let trial = u.with_values((0..len).map(|i| u.values()[i] + damping * delta[i]).collect());
            let tl = lambda + damping * delta[len];
            if tl > 0.0 && admissibility(&trial, spec).ok() {
                if let Ok((tr, tc)) = eigen_system(&trial, tl, spec) {
                    let tn = sup(&tr).max(tc.abs());
                    if tn < norm {
                        u = trial;
                        lambda = tl;
                        r = tr;
                        c = tc;
                        norm = tn;
                        break;
                    }
                }
            }
            damping *= 0.5;
            if damping < 1e-8 {
                return Err(EigenError::Divergence { iterations: iter, residual: norm });
            }
        }
    }
    if norm <= spec.tol_newton {
        return Ok(DirectEigen { u, lambda, iterations: spec.max_iter, residual: norm });
    }
    Err(EigenError::Divergence { iterations: spec.max_iter, residual: norm })
}
