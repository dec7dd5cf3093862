//! Executable a-priori estimates for solutions of the curvature equation.
//!
//! Each checker returns [`BoundReport`]s of the form `lhs ≤ rhs`. Two-sided
//! bounds produce one report per side. Checkers take a support function and
//! the problem it solves; for Newton output the natural input is the shape
//! `w` together with the rescaled problem (see [`solve_report_checks`]), since
//! every estimate below is invariant under the rescaling `u = s·w`,
//! `λ = s^{p−1−k} λ_eff` up to the common factor it applies to both sides.

use serde::Serialize;

use crate::algebra::{binomial, eigen_packed};
use crate::eigen::EigenReport;
use crate::grid::ScalarField;
use crate::solver::{ProblemSpec, SolveReport};
use crate::surface::bundle_from_support;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub slack: f64,
    pub notes: String,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, notes: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            satisfied: lhs <= rhs + 1e-9 * rhs.abs(),
            slack: rhs - lhs,
            notes: notes.into(),
        }
    }
}

pub fn all_satisfied(reports: &[BoundReport]) -> bool {
    reports.iter().all(|r| r.satisfied)
}

/// `(V/V(B₁))^{(p−k−1)/(n+1)}`.
fn volume_ratio_power(u: &ScalarField, spec: &ProblemSpec) -> f64 {
    let v = bundle_from_support(u).volume;
    let ball = u.grid().unit_ball_volume();
    ((v / ball).ln() * spec.dilation_degree() / (spec.n as f64 + 1.0)).exp()
}

/// `λ/(C(n,k) max f) ≤ (V/V(B₁))^{(p−k−1)/(n+1)} ≤ λ/(C(n,k) min f)`.
pub fn check_volume_ratio(u: &ScalarField, spec: &ProblemSpec) -> [BoundReport; 2] {
    let r = volume_ratio_power(u, spec);
    let c = spec.sigma_ones();
    let note = "includes the factor C(n,k) = sigma_k(1,...,1); without it the bound fails on the round solution for f = 1";
    [
        BoundReport::new("volume_ratio_lower", spec.lambda / (c * spec.f.max()), r, note),
        BoundReport::new("volume_ratio_upper", r, spec.lambda / (c * spec.f.min()), note),
    ]
}

/// The same two-sided bound without the factor `C(n,k)`, kept for comparison.
pub fn check_volume_ratio_literal(u: &ScalarField, spec: &ProblemSpec) -> [BoundReport; 2] {
    let r = volume_ratio_power(u, spec);
    let note = "uncorrected form, expected to fail whenever C(n,k) > 1";
    [
        BoundReport::new("volume_ratio_lower_uncorrected", spec.lambda / spec.f.max(), r, note),
        BoundReport::new("volume_ratio_upper_uncorrected", r, spec.lambda / spec.f.min(), note),
    ]
}

/// `∫_{⟨x₀,x⟩ ≥ 0} ⟨x₀,x⟩^q` by grid quadrature.
pub fn half_sphere_moment(grid: &crate::grid::SphereGrid, x0: &[f64; 3], q: f64) -> f64 {
    grid.nodes()
        .iter()
        .zip(grid.weights())
        .map(|(x, w)| {
            let t = x[0] * x0[0] + x[1] * x0[1] + x[2] * x0[2];
            if t >= 0.0 {
                w * t.powf(q)
            } else {
                0.0
            }
        })
        .sum()
}

/// The chain bounding `max u` by the volume, with `p* = 1 + (p−1)n/k` and
/// `c = C(n,k)^{−n/k}`:
///
/// 1. `∫ u^{p*} f^{n/k} ≤ c λ^{n/k} (n+1) V`
/// 2. `(min f)^{n/k} ∫ u^{p*} ≤ ∫ u^{p*} f^{n/k}`
/// 3. `u(x₀)^{p*} I(p*) ≤ ∫ u^{p*}` at the maximum point `x₀`
/// 4. `max u ≤ (c λ^{n/k} (n+1) V / ((min f)^{n/k} I(p*)))^{1/p*}`
pub fn check_max_u_chain(u: &ScalarField, spec: &ProblemSpec) -> Vec<BoundReport> {
    let grid = u.grid();
    let n = spec.n as f64;
    let k = spec.k as f64;
    let p_star = 1.0 + (spec.p - 1.0) * n / k;
    let c = spec.sigma_ones().powf(-n / k);
    let volume = bundle_from_support(u).volume;
    let up: Vec<f64> = u.values().iter().map(|v| v.powf(p_star)).collect();
    let weighted: Vec<f64> = up.iter().zip(spec.f.values()).map(|(a, f)| a * f.powf(n / k)).collect();
    let int_up = grid.integrate(&up);
    let int_weighted = grid.integrate(&weighted);
    let fmin_pow = spec.f.min().powf(n / k);
    let (argmax, umax) = u
        .values()
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    let x0 = grid.nodes()[argmax];
    let moment = half_sphere_moment(grid, &x0, p_star);
    let top = c * spec.lambda.powf(n / k) * (n + 1.0) * volume;
    let note = format!("p* = {p_star}, c = C(n,k)^(-n/k) = {c}, I(p*) = {moment}; Maclaurin step uses normalized means");
    vec![
        BoundReport::new("support_power_vs_volume", int_weighted, top, note.clone()),
        BoundReport::new("min_f_weighting", fmin_pow * int_up, int_weighted, note.clone()),
        BoundReport::new("half_sphere_moment", umax.powf(p_star) * moment, int_up, note.clone()),
        BoundReport::new("max_support", umax, (top / (fmin_pow * moment)).powf(1.0 / p_star), note),
    ]
}

/// `sup |∇u| ≤ max u + 10·(grid error)`.
pub fn check_gradient_bound(u: &ScalarField) -> BoundReport {
    let b = bundle_from_support(u);
    let g = b.grad_norm().into_iter().fold(0.0, f64::max);
    let tol = 10.0 * u.grid().grid_error();
    BoundReport::new("gradient", g, u.max() + tol, format!("includes discretization allowance {tol:e}"))
}

/// Grid surrogate of the C^{1,1} norm: `max(sup|g|, sup|∇g|, sup‖∇²g‖)`.
pub fn c11_norm(g: &ScalarField) -> f64 {
    let grid = g.grid();
    let n = grid.dim();
    let grad = grid.gradient(g.values());
    let hess = grid.hessian(g.values());
    let gmax = grad.iter().fold(0.0, |m: f64, v| m.max(v[0].hypot(v[1])));
    let hmax = hess.iter().fold(0.0, |m: f64, h| {
        let e = eigen_packed(n, *h);
        m.max(e.values[0].abs()).max(e.values[1].abs())
    });
    g.sup_abs().max(gmax).max(hmax)
}

/// `sup W ≤ (2n(p−1)/k) (max u)^{(p−1)/k} N((f/λ)^{1/k})` with `W = tr h`.
pub fn check_w_bound(u: &ScalarField, spec: &ProblemSpec) -> BoundReport {
    let b = bundle_from_support(u);
    let w = b.w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a = spec.rhs_exponent();
    let lead = 2.0 * spec.n as f64 * a * u.max().powf(a);
    let kf = spec.k as f64;
    let g = spec.f.map(|f| (f / spec.lambda).powf(1.0 / kf));
    let rhs = lead * c11_norm(&g);
    let literal = lead * c11_norm(&spec.f.map(|f| f / spec.lambda));
    BoundReport::new(
        "width_trace",
        w,
        rhs,
        format!("uses the norm of (f/lambda)^(1/k); with the norm of f/lambda instead the bound is {literal:e}"),
    )
}

/// `C(n,k)/max ψ · V(B₁)^{−(p−k−1)/(n+1)} ≤ λ_p ≤ C(n,k)/min ψ · V(B₁)^{−(p−k−1)/(n+1)}`
/// at every continuation step, with relative tolerance `1e−6`.
pub fn check_lambda_bounds(report: &EigenReport, spec: &ProblemSpec) -> [BoundReport; 2] {
    let c = spec.sigma_ones();
    let n1 = spec.n as f64 + 1.0;
    let ball = spec.grid().unit_ball_volume();
    let tol = 1e-6;
    let mut worst_lower = f64::NEG_INFINITY;
    let mut worst_upper = f64::NEG_INFINITY;
    for s in &report.steps {
        let scale = ball.powf(-(s.p - spec.k as f64 - 1.0) / n1);
        let lo = c / spec.psi.max() * scale * (1.0 - tol);
        let hi = c / spec.psi.min() * scale * (1.0 + tol);
        worst_lower = worst_lower.max(lo / s.lambda_p);
        worst_upper = worst_upper.max(s.lambda_p / hi);
    }
    let note = format!("worst ratio over {} steps; bracket includes C(n,k)", report.steps.len());
    [
        BoundReport::new("lambda_lower", worst_lower, 1.0, note.clone()),
        BoundReport::new("lambda_upper", worst_upper, 1.0, note),
    ]
}

/// Convexity margin, origin symmetry for even data and, when supplied,
/// multi-start and schedule agreement.
pub fn check_solution_properties(
    u: &ScalarField,
    data: &ScalarField,
    symmetry_tol: f64,
    multi_start_gap: Option<(f64, f64)>,
    schedule_gap: Option<(f64, f64)>,
) -> Vec<BoundReport> {
    let b = bundle_from_support(u);
    let mut out = vec![BoundReport::new(
        "strict_convexity",
        -b.min_radius(),
        0.0,
        format!("smallest eigenvalue of h is {:e}", b.min_radius()),
    )];
    if data.is_even(1e-14) {
        out.push(BoundReport::new("origin_symmetry", u.symmetry_defect(), symmetry_tol, "sup |u - u(-x)|"));
    } else {
        out.push(BoundReport::new("origin_symmetry", 0.0, 0.0, "skipped: data is not even"));
    }
    if let Some((gap, tol)) = multi_start_gap {
        out.push(BoundReport::new("multi_start_agreement", gap, tol, "sup-norm spread of solutions from different starts"));
    }
    if let Some((gap, tol)) = schedule_gap {
        out.push(BoundReport::new("schedule_agreement", gap, tol, "eigenvalue spread between continuation schedules"));
    }
    out
}

/// The estimates that apply to a Newton solution, evaluated on its shape and
/// the rescaled problem.
pub fn solve_report_checks(sol: &SolveReport, spec: &ProblemSpec) -> Vec<BoundReport> {
    let wspec = spec.with_lambda(sol.lambda_eff);
    let note = format!(" [rescaled problem: u = exp({:.6}) w]", sol.log_scale);
    let mut out: Vec<BoundReport> = Vec::new();
    out.extend(check_volume_ratio(&sol.shape, &wspec));
    out.extend(check_max_u_chain(&sol.shape, &wspec));
    out.push(check_gradient_bound(&sol.shape));
    out.push(check_w_bound(&sol.shape, &wspec));
    out.extend(check_solution_properties(&sol.shape, &spec.f, 10.0 * spec.tol_newton, None, None));
    for r in &mut out {
        r.notes.push_str(&note);
    }
    out
}

/// Checks attached to a continuation run: the eigenvalue bracket, strict
/// convexity of every normalized iterate and symmetry for even data.
pub fn eigen_report_checks(report: &EigenReport, spec: &ProblemSpec) -> Vec<BoundReport> {
    let mut out: Vec<BoundReport> = check_lambda_bounds(report, spec).into();
    let worst_radius = report.steps.iter().map(|s| s.min_radius).fold(f64::INFINITY, f64::min);
    out.push(BoundReport::new(
        "strict_convexity_all_steps",
        -worst_radius,
        0.0,
        format!("smallest eigenvalue of h over all normalized iterates is {worst_radius:e}"),
    ));
    if spec.psi.is_even(1e-14) {
        let worst = report.steps.iter().map(|s| s.symmetry_defect).fold(report.symmetry_defect, f64::max);
        out.push(BoundReport::new("origin_symmetry_all_steps", worst, 1e-4, "sup |u - u(-x)| over iterates and limit"));
    } else {
        out.push(BoundReport::new("origin_symmetry_all_steps", 0.0, 0.0, "skipped: data is not even"));
    }
    out
}

/// Normalization factor `C(n,k)^{1/k}` turning `F` into the quotient of
/// normalized symmetric means, for which `Σ F^{ii} ≥ 1`.
pub fn quotient_normalization(n: usize, k: usize) -> f64 {
    binomial(n, k).powf(1.0 / k as f64)
}
