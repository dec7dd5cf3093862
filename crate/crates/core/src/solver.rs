//! Residual, linearization and damped Newton iteration for
//! `F(∇²u + uI) = (f/λ)^{1/k} u^{(p−1)/k}`.
//!
//! Newton works on a rescaled unknown. Writing `u = s·w` with
//! `s^{p−1−k} C(n,k) f̄ = λ`, the shape `w` solves the same equation with
//! `λ_eff = C(n,k) f̄` and is of order one however small `p − 1 − k` is, while
//! `s` itself is carried as `ln s`. Residuals of the two problems differ by the
//! factor `s`.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{binomial, eigen_packed, quotient_packed, sigma_all};
use crate::grid::{GridError, ScalarField, SphereGrid};
use crate::sparse::{smallest_singular_value, LinearError, SparseMatrix};
use crate::surface::{bundle_from_support, RadialBundle};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("iterate left the admissible cone at node {node} (u={u:e}, smallest eigenvalue of h={min_eigenvalue:e})")]
    Cone { node: usize, u: f64, min_eigenvalue: f64 },
    #[error("curvature outside the Gårding cone at node {node}")]
    Garding { node: usize },
    #[error("no convergence after {} iterations (residual {:e})", .best.iterations, .best.final_residual_sup)]
    MaxIterations { best: Box<SolveReport> },
    #[error("line search failed after {} iterations (residual {:e})", .best.iterations, .best.final_residual_sup)]
    LineSearch { best: Box<SolveReport> },
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Data of one instance of the equation.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub lambda: f64,
    pub f: ScalarField,
    pub psi: ScalarField,
    pub tol_newton: f64,
    pub max_iter: usize,
    /// Fraction of the current admissibility margin a trial iterate must keep.
    pub margin: f64,
}

impl ProblemSpec {
    /// Problem with default solver settings; `psi = 1/f`.
    pub fn new(k: usize, p: f64, lambda: f64, f: ScalarField) -> Result<Self, SolverError> {
        let n = f.grid().dim();
        if k == 0 || k > n {
            return Err(SolverError::Invalid(format!("need 1 <= k <= n, got k={k}, n={n}")));
        }
        if !(p.is_finite() && p >= k as f64 + 1.0) {
            return Err(SolverError::Invalid(format!("need p >= k+1, got p={p}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(SolverError::Invalid(format!("need lambda > 0, got {lambda}")));
        }
        if let Some(i) = f.values().iter().position(|&v| v <= 0.0) {
            return Err(SolverError::Invalid(format!("f must be positive (f={} at node {i})", f.values()[i])));
        }
        let psi = f.map(|v| 1.0 / v);
        Ok(Self {
            n,
            k,
            p,
            lambda,
            f,
            psi,
            tol_newton: if n == 1 { 1e-9 } else { 1e-8 },
            max_iter: 60,
            margin: 0.1,
        })
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        self.f.grid()
    }

    /// `C(n,k) = σ_k(1, …, 1)`.
    pub fn sigma_ones(&self) -> f64 {
        binomial(self.n, self.k)
    }

    /// Exponent `(p−1)/k` of `u` on the right-hand side.
    pub fn rhs_exponent(&self) -> f64 {
        (self.p - 1.0) / self.k as f64
    }

    /// `p − 1 − k`, the degree by which dilations change the equation.
    pub fn dilation_degree(&self) -> f64 {
        self.p - 1.0 - self.k as f64
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    pub fn with_p(&self, p: f64) -> Self {
        Self { p, ..self.clone() }
    }

    fn rhs_coefficients(&self) -> Vec<f64> {
        let e = 1.0 / self.k as f64;
        self.f.values().iter().map(|f| (f / self.lambda).powf(e)).collect()
    }

    /// `ln s` of the rescaling `u = s·w` that makes the round guess `w ≡ 1`.
    pub fn log_scale(&self) -> Result<f64, SolverError> {
        let d = self.dilation_degree();
        if d <= 0.0 {
            return Err(SolverError::Invalid(format!("rescaling needs p > k+1, got p={}", self.p)));
        }
        Ok((self.lambda / (self.f.mean() * self.sigma_ones())).ln() / d)
    }

    /// The equivalent problem for the shape `w = u/s`.
    pub fn shape_problem(&self) -> Result<(Self, f64), SolverError> {
        let log_s = self.log_scale()?;
        let lambda_eff = self.f.mean() * self.sigma_ones();
        Ok((self.with_lambda(lambda_eff), log_s))
    }
}

/// Node-wise admissibility of a support function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Admissibility {
    pub positive: bool,
    pub convex: bool,
    pub gamma_k: bool,
    /// `min(min u, min eig h)`.
    pub worst_margin: f64,
    pub worst_node: usize,
}

impl Admissibility {
    pub fn ok(&self) -> bool {
        self.positive && self.convex && self.gamma_k
    }
}

pub fn admissibility(u: &ScalarField, spec: &ProblemSpec) -> Admissibility {
    let grid = u.grid();
    let n = grid.dim();
    let hess = grid.hessian(u.values());
    let mut worst = f64::INFINITY;
    let mut worst_node = 0;
    let mut min_u = f64::INFINITY;
    let mut min_eig = f64::INFINITY;
    let mut gamma_k = true;
    for (i, (&ui, hh)) in u.values().iter().zip(&hess).enumerate() {
        let h = add_identity(n, *hh, ui);
        let eig = eigen_packed(n, h);
        let m = ui.min(eig.min());
        min_u = min_u.min(ui);
        min_eig = min_eig.min(eig.min());
        if m < worst {
            worst = m;
            worst_node = i;
        }
        let kappa: Vec<f64> = eig.values[..n].iter().map(|r| 1.0 / r).collect();
        let e = sigma_all(&kappa);
        if !e[1..=spec.k].iter().all(|&v| v > 0.0 && v.is_finite()) {
            gamma_k = false;
        }
    }
    Admissibility {
        positive: min_u > 0.0,
        convex: min_eig > 0.0,
        gamma_k,
        worst_margin: worst,
        worst_node,
    }
}

fn add_identity(n: usize, mut h: [f64; 3], u: f64) -> [f64; 3] {
    h[0] += u;
    if n == 2 {
        h[2] += u;
    }
    h
}

/// Node-wise `F(h)`, `F^{ij}` and `h`, or the first inadmissible node.
struct Linearization {
    f: Vec<f64>,
    grad: Vec<[f64; 3]>,
}

fn linearize(u: &ScalarField, spec: &ProblemSpec) -> Result<Linearization, SolverError> {
    let grid = u.grid();
    let n = grid.dim();
    let hess = grid.hessian(u.values());
    let mut f = Vec::with_capacity(grid.len());
    let mut grad = Vec::with_capacity(grid.len());
    for (i, (&ui, hh)) in u.values().iter().zip(&hess).enumerate() {
        let h = add_identity(n, *hh, ui);
        let min_eigenvalue = eigen_packed(n, h).min();
        if ui <= 0.0 || min_eigenvalue <= 0.0 {
            return Err(SolverError::Cone { node: i, u: ui, min_eigenvalue });
        }
        let (fi, gi) = quotient_packed(n, spec.k, h).map_err(|_| SolverError::Cone { node: i, u: ui, min_eigenvalue })?;
        f.push(fi);
        grad.push(gi);
    }
    Ok(Linearization { f, grad })
}

/// `R = F(h) − (f/λ)^{1/k} u^{(p−1)/k}` node-wise.
pub fn residual(u: &ScalarField, spec: &ProblemSpec) -> Result<ScalarField, SolverError> {
    let lin = linearize(u, spec)?;
    Ok(u.with_values(residual_from(&lin, u, spec)))
}

fn residual_from(lin: &Linearization, u: &ScalarField, spec: &ProblemSpec) -> Vec<f64> {
    let a = spec.rhs_exponent();
    let c = spec.rhs_coefficients();
    (0..u.len()).map(|i| lin.f[i] - c[i] * u.values()[i].powf(a)).collect()
}

/// `L[du] = F^{ij}(∇²du + du δ)_{ij} − ((p−1)/k)(f/λ)^{1/k} u^{(p−1)/k−1} du`.
pub fn jacobian_apply(u: &ScalarField, du: &ScalarField, spec: &ProblemSpec) -> Result<ScalarField, SolverError> {
    let lin = linearize(u, spec)?;
    let grid = u.grid();
    let n = grid.dim();
    let a = spec.rhs_exponent();
    let c = spec.rhs_coefficients();
    let hd = grid.hessian(du.values());
    let out = (0..u.len())
        .map(|i| {
            let g = lin.grad[i];
            let d = du.values()[i];
            let h = add_identity(n, hd[i], d);
            let elliptic = if n == 1 { g[0] * h[0] } else { g[0] * h[0] + 2.0 * g[1] * h[1] + g[2] * h[2] };
            elliptic - a * c[i] * u.values()[i].powf(a - 1.0) * d
        })
        .collect();
    Ok(u.with_values(out))
}

fn jacobian_from(lin: &Linearization, u: &ScalarField, spec: &ProblemSpec) -> SparseMatrix {
    let grid = u.grid();
    let n = grid.dim();
    let ops = &grid.ops().hess;
    let a = spec.rhs_exponent();
    let c = spec.rhs_coefficients();
    let rows = (0..u.len())
        .map(|i| {
            let g = lin.grad[i];
            let trace = if n == 1 { g[0] } else { g[0] + g[2] };
            let mut row = vec![(i, trace - a * c[i] * u.values()[i].powf(a - 1.0))];
            let weights = [g[0], 2.0 * g[1], g[2]];
            for (op, w) in ops.iter().zip(weights).take(if n == 1 { 1 } else { 3 }) {
                let (cols, vals) = op.row(i);
                row.extend(cols.iter().zip(vals).map(|(&cc, &v)| (cc, w * v)));
            }
            row
        })
        .collect();
    SparseMatrix::from_rows(u.len(), rows)
}

/// Matrix of [`jacobian_apply`] in the stencil sparsity pattern.
pub fn assemble_jacobian(u: &ScalarField, spec: &ProblemSpec) -> Result<SparseMatrix, SolverError> {
    let lin = linearize(u, spec)?;
    Ok(jacobian_from(&lin, u, spec))
}

/// Smallest singular value of the linearized operator at `u`.
pub fn linearized_conditioning(u: &ScalarField, spec: &ProblemSpec) -> Result<f64, SolverError> {
    Ok(smallest_singular_value(&assemble_jacobian(u, spec)?, 30)?)
}

/// `⟨X,ν⟩^{p−1} σ_k(κ) − λ/f(ν)` at each point of a radial parametrization,
/// with `f` interpolated at the normal.
pub fn primal_residual(rb: &RadialBundle, spec: &ProblemSpec) -> Result<ScalarField, SolverError> {
    let grid = rb.rho.grid();
    let n = grid.dim();
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let s = rb.u_of_rho[i];
        if s <= 0.0 {
            return Err(SolverError::Cone { node: i, u: s, min_eigenvalue: f64::NAN });
        }
        let e = sigma_all(&rb.kappa[i][..n]);
        if !e[1..=spec.k].iter().all(|&v| v > 0.0) {
            return Err(SolverError::Garding { node: i });
        }
        let fv = grid.interpolate(spec.f.values(), grid.chart_of(&rb.nu[i])).value;
        out.push(s.powf(spec.p - 1.0) * e[spec.k] - spec.lambda / fv);
    }
    Ok(ScalarField::new(grid.clone(), out)?)
}

/// Round sphere `u ≡ r` balancing the equation for the mean of `f`.
pub fn sphere_guess(spec: &ProblemSpec) -> Result<ScalarField, SolverError> {
    let log_s = spec.log_scale()?;
    Ok(ScalarField::constant(spec.grid().clone(), log_s.exp()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NewtonStep {
    pub step: usize,
    pub damping: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Physical solution `s·w` (may underflow when `ln s` is very negative).
    pub u: ScalarField,
    /// Shape `w`, solution of the rescaled problem.
    pub shape: ScalarField,
    /// `ln s`.
    pub log_scale: f64,
    /// `λ` of the rescaled problem.
    pub lambda_eff: f64,
    pub iterations: usize,
    /// Sup-norm residual of the rescaled problem; the tolerance refers to this.
    pub final_residual_sup: f64,
    /// `s ·` [`Self::final_residual_sup`], the residual in the original units.
    pub physical_residual_sup: f64,
    pub newton_path: Vec<NewtonStep>,
    pub admissible_throughout: bool,
    pub worst_margin: f64,
}

impl SolveReport {
    pub fn converged_within(&self, tol: f64) -> bool {
        self.final_residual_sup <= tol
    }
}

/// Damped Newton iteration from `u0`; requires `p > k+1`.
pub fn newton_solve(spec: &ProblemSpec, u0: &ScalarField) -> Result<SolveReport, SolverError> {
    let log_s = spec.log_scale()?;
    let w0 = u0.scaled((-log_s).exp());
    newton_solve_shape(spec, &w0)
}

/// As [`newton_solve`], with the start given as a shape `w0 = u0/s`.
pub fn newton_solve_shape(spec: &ProblemSpec, w0: &ScalarField) -> Result<SolveReport, SolverError> {
    let (wspec, log_s) = spec.shape_problem()?;
    newton_core(&wspec, w0, log_s)
}

fn newton_core(spec: &ProblemSpec, w0: &ScalarField, log_s: f64) -> Result<SolveReport, SolverError> {
    let start = admissibility(w0, spec);
    if !start.ok() {
        let b = bundle_from_support(w0);
        return Err(SolverError::Cone {
            node: start.worst_node,
            u: w0.values()[start.worst_node],
            min_eigenvalue: b.min_radius(),
        });
    }
    let scale = log_s.exp();
    let mut w = w0.clone();
    let mut margin = start.worst_margin;
    let mut lin = linearize(&w, spec)?;
    let mut r = residual_from(&lin, &w, spec);
    let mut rnorm = sup(&r);
    let mut path = vec![NewtonStep { step: 0, damping: 0.0, residual: rnorm }];

    let report = |w: &ScalarField, iterations: usize, rnorm: f64, path: &[NewtonStep], margin: f64| SolveReport {
        u: w.scaled(scale),
        shape: w.clone(),
        log_scale: log_s,
        lambda_eff: spec.lambda,
        iterations,
        final_residual_sup: rnorm,
        physical_residual_sup: rnorm * scale,
        newton_path: path.to_vec(),
        admissible_throughout: true,
        worst_margin: margin,
    };

    for iter in 1..=spec.max_iter {
        if rnorm <= spec.tol_newton {
            return Ok(report(&w, iter - 1, rnorm, &path, margin));
        }
        let jac = jacobian_from(&lin, &w, spec);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = jac.lu()?.solve(&rhs)?;
        let mut damping = 1.0;
        loop {
            let trial = w.with_values(w.values().iter().zip(&delta).map(|(a, d)| a + damping * d).collect());
            let adm = admissibility(&trial, spec);
            if adm.ok() && adm.worst_margin >= spec.margin * margin {
                if let Ok(tlin) = linearize(&trial, spec) {
                    let tr = residual_from(&tlin, &trial, spec);
                    let tnorm = sup(&tr);
                    if tnorm < rnorm {
                        w = trial;
                        lin = tlin;
                        r = tr;
                        rnorm = tnorm;
                        margin = adm.worst_margin;
                        path.push(NewtonStep { step: iter, damping, residual: rnorm });
                        break;
                    }
                }
            }
            damping *= 0.5;
            if damping < 1e-8 {
                return Err(SolverError::LineSearch {
                    best: Box::new(report(&w, iter - 1, rnorm, &path, margin)),
                });
            }
        }
    }
    if rnorm <= spec.tol_newton {
        return Ok(report(&w, spec.max_iter, rnorm, &path, margin));
    }
    Err(SolverError::MaxIterations {
        best: Box::new(report(&w, spec.max_iter, rnorm, &path, margin)),
    })
}

pub(crate) fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
