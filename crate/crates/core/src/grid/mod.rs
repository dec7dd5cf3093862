//! Discretization of S¹ and S².
//!
//! S¹ uses `N` uniform nodes `t_i = 2πi/N` with 4th-order periodic central
//! differences. S² uses a pole-offset latitude-longitude grid
//! `θ_j = (j+½)π/N_θ`, `φ_l = 2πl/N_φ` with 2nd-order central differences;
//! stencils that reach across a pole use the ghost rule
//! `u(−θ, φ) = u(θ, φ+π)`. Derivatives are expressed in the orthonormal
//! frame `{∂_θ, (1/sinθ)∂_φ}`.
//!
//! Both resolutions must be even so that the node set is closed under
//! `x ↦ −x`.

mod interp;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::SparseMatrix;

pub use interp::Interpolated;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("unsupported sphere dimension {0} (expected 1 or 2)")]
    Dimension(usize),
    #[error("resolution {name}={value} must be even and at least {min}")]
    Resolution {
        name: &'static str,
        value: usize,
        min: usize,
    },
    #[error("field has {got} values, grid has {expected} nodes")]
    Length { expected: usize, got: usize },
    #[error("field value at node {node} is not finite")]
    NonFinite { node: usize },
    #[error("direction search did not converge for target node {node}")]
    DirectionSearch { node: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Resolution {
    Circle { n: usize },
    Sphere { n_theta: usize, n_phi: usize },
}

impl Resolution {
    pub fn dim(&self) -> usize {
        match self {
            Resolution::Circle { .. } => 1,
            Resolution::Sphere { .. } => 2,
        }
    }

    /// Doubles every resolution parameter.
    pub fn refined(&self) -> Resolution {
        match *self {
            Resolution::Circle { n } => Resolution::Circle { n: 2 * n },
            Resolution::Sphere { n_theta, n_phi } => Resolution::Sphere {
                n_theta: 2 * n_theta,
                n_phi: 2 * n_phi,
            },
        }
    }
}

/// Differentiation stencils in the orthonormal frame. For S¹ the second
/// gradient component and the off-diagonal Hessian entries are zero operators.
#[derive(Clone, Debug)]
pub(crate) struct DiffOps {
    pub grad: [SparseMatrix; 2],
    /// Packed symmetric Hessian: (11, 12, 22).
    pub hess: [SparseMatrix; 3],
}

#[derive(Clone, Debug)]
pub struct SphereGrid {
    resolution: Resolution,
    nodes: Vec<[f64; 3]>,
    coords: Vec<[f64; 2]>,
    weights: Vec<f64>,
    antipode: Vec<usize>,
    frames: Vec<[[f64; 3]; 2]>,
    ops: DiffOps,
}

/// Builds a grid on S^n for `n ∈ {1, 2}`.
pub fn build_grid(resolution: Resolution) -> Result<SphereGrid, GridError> {
    SphereGrid::new(resolution)
}

impl SphereGrid {
    pub fn new(resolution: Resolution) -> Result<Self, GridError> {
        match resolution {
            Resolution::Circle { n } => {
                check_even("n", n, 8)?;
                Ok(Self::circle(n))
            }
            Resolution::Sphere { n_theta, n_phi } => {
                check_even("n_theta", n_theta, 8)?;
                check_even("n_phi", n_phi, 16)?;
                Ok(Self::sphere(n_theta, n_phi))
            }
        }
    }

    /// `n = 1` grid with `points` nodes.
    pub fn circle_with(points: usize) -> Result<Arc<Self>, GridError> {
        Self::new(Resolution::Circle { n: points }).map(Arc::new)
    }

    /// `n = 2` grid with the given θ and φ node counts.
    pub fn sphere_with(n_theta: usize, n_phi: usize) -> Result<Arc<Self>, GridError> {
        Self::new(Resolution::Sphere { n_theta, n_phi }).map(Arc::new)
    }

    fn circle(n: usize) -> Self {
        let dt = 2.0 * PI / n as f64;
        let mut nodes = Vec::with_capacity(n);
        let mut coords = Vec::with_capacity(n);
        let mut frames = Vec::with_capacity(n);
        // the second half mirrors the first so antipodal nodes are exact negatives
        let half: Vec<(f64, f64)> = (0..n / 2).map(|i| (dt * i as f64).sin_cos()).collect();
        for i in 0..n {
            let t = dt * i as f64;
            let (s, c) = if i < n / 2 { half[i] } else { (-half[i - n / 2].0, -half[i - n / 2].1) };
            nodes.push([c, s, 0.0]);
            coords.push([t, 0.0]);
            frames.push([[-s, c, 0.0], [0.0; 3]]);
        }
        let weights = vec![dt; n];
        let antipode = (0..n).map(|i| (i + n / 2) % n).collect();

        let wrap = |i: isize| i.rem_euclid(n as isize) as usize;
        let d1 = [(-2isize, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)];
        let d2 = [(-2isize, -1.0), (-1, 16.0), (0, -30.0), (1, 16.0), (2, -1.0)];
        let grad0 = SparseMatrix::from_rows(
            n,
            (0..n as isize)
                .map(|i| d1.iter().map(|&(o, c)| (wrap(i + o), c / (12.0 * dt))).collect())
                .collect(),
        );
        let hess0 = SparseMatrix::from_rows(
            n,
            (0..n as isize)
                .map(|i| d2.iter().map(|&(o, c)| (wrap(i + o), c / (12.0 * dt * dt))).collect())
                .collect(),
        );
        let ops = DiffOps {
            grad: [grad0, SparseMatrix::zeros(n, n)],
            hess: [hess0, SparseMatrix::zeros(n, n), SparseMatrix::zeros(n, n)],
        };
        Self {
            resolution: Resolution::Circle { n },
            nodes,
            coords,
            weights,
            antipode,
            frames,
            ops,
        }
    }

    fn sphere(nt: usize, np: usize) -> Self {
        let dth = PI / nt as f64;
        let dph = 2.0 * PI / np as f64;
        let count = nt * np;
        let mut nodes = Vec::with_capacity(count);
        let mut coords = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        let mut antipode = Vec::with_capacity(count);
        let mut frames = Vec::with_capacity(count);
        // exact band area, so the weights sum to 4π to round-off
        let band = 2.0 * (0.5 * dth).sin() * dph;
        // mirrored trigonometric tables make antipodal nodes exact negatives
        let theta_trig: Vec<(f64, f64)> = (0..nt)
            .map(|j| {
                if j < nt / 2 {
                    ((j as f64 + 0.5) * dth).sin_cos()
                } else {
                    let (s, c) = (((nt - 1 - j) as f64 + 0.5) * dth).sin_cos();
                    (s, -c)
                }
            })
            .collect();
        let phi_trig: Vec<(f64, f64)> = (0..np)
            .map(|l| {
                let (s, c) = ((l % (np / 2)) as f64 * dph).sin_cos();
                if l < np / 2 {
                    (s, c)
                } else {
                    (-s, -c)
                }
            })
            .collect();
        for j in 0..nt {
            let th = (j as f64 + 0.5) * dth;
            let (st, ct) = theta_trig[j];
            for l in 0..np {
                let ph = l as f64 * dph;
                let (sp, cp) = phi_trig[l];
                nodes.push([st * cp, st * sp, ct]);
                coords.push([th, ph]);
                weights.push(band * st);
                antipode.push((nt - 1 - j) * np + (l + np / 2) % np);
                frames.push([[ct * cp, ct * sp, -st], [-sp, cp, 0.0]]);
            }
        }

        // index of chart node (j, l) for j in -1..=nt, applying the ghost rule
        let idx = |j: isize, l: isize| -> usize {
            let (j, shift) = if j < 0 {
                (-1 - j, np as isize / 2)
            } else if j >= nt as isize {
                (2 * nt as isize - 1 - j, np as isize / 2)
            } else {
                (j, 0)
            };
            j as usize * np + (l + shift).rem_euclid(np as isize) as usize
        };

        let mut g1 = Vec::with_capacity(count);
        let mut g2 = Vec::with_capacity(count);
        let mut h11 = Vec::with_capacity(count);
        let mut h12 = Vec::with_capacity(count);
        let mut h22 = Vec::with_capacity(count);
        for j in 0..nt as isize {
            let (st, ct) = theta_trig[j as usize];
            let cot = ct / st;
            for l in 0..np as isize {
                let c = idx(j, l);
                let n_ = idx(j - 1, l);
                let s_ = idx(j + 1, l);
                let e_ = idx(j, l + 1);
                let w_ = idx(j, l - 1);
                let d_th = [(s_, 0.5 / dth), (n_, -0.5 / dth)];
                let d_ph = [(e_, 0.5 / dph), (w_, -0.5 / dph)];
                let d_thth = [(s_, 1.0 / (dth * dth)), (c, -2.0 / (dth * dth)), (n_, 1.0 / (dth * dth))];
                let d_phph = [(e_, 1.0 / (dph * dph)), (c, -2.0 / (dph * dph)), (w_, 1.0 / (dph * dph))];
                let m = 0.25 / (dth * dph);
                let d_thph = [
                    (idx(j + 1, l + 1), m),
                    (idx(j + 1, l - 1), -m),
                    (idx(j - 1, l + 1), -m),
                    (idx(j - 1, l - 1), m),
                ];

                g1.push(d_th.to_vec());
                g2.push(d_ph.iter().map(|&(i, v)| (i, v / st)).collect());
                h11.push(d_thth.to_vec());
                let mut r12: Vec<(usize, f64)> = d_thph.iter().map(|&(i, v)| (i, v / st)).collect();
                r12.extend(d_ph.iter().map(|&(i, v)| (i, -cot * v / st)));
                h12.push(r12);
                let mut r22: Vec<(usize, f64)> = d_phph.iter().map(|&(i, v)| (i, v / (st * st))).collect();
                r22.extend(d_th.iter().map(|&(i, v)| (i, cot * v)));
                h22.push(r22);
            }
        }
        let ops = DiffOps {
            grad: [SparseMatrix::from_rows(count, g1), SparseMatrix::from_rows(count, g2)],
            hess: [
                SparseMatrix::from_rows(count, h11),
                SparseMatrix::from_rows(count, h12),
                SparseMatrix::from_rows(count, h22),
            ],
        };
        Self {
            resolution: Resolution::Sphere { n_theta: nt, n_phi: np },
            nodes,
            coords,
            weights,
            antipode,
            frames,
            ops,
        }
    }

    /// Dimension `n` of the sphere S^n.
    pub fn dim(&self) -> usize {
        self.resolution.dim()
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Unit vectors in R^{n+1}; for `n = 1` the third component is zero.
    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    /// Chart coordinates: `[t, 0]` on S¹, `[θ, φ]` on S².
    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn antipode_index(&self) -> &[usize] {
        &self.antipode
    }

    /// Orthonormal tangent frame per node, as ambient vectors. For S¹ only
    /// the first vector is meaningful.
    pub fn frames(&self) -> &[[[f64; 3]; 2]] {
        &self.frames
    }

    pub(crate) fn ops(&self) -> &DiffOps {
        &self.ops
    }

    /// Surface measure |S^n|.
    pub fn sphere_area(&self) -> f64 {
        match self.dim() {
            1 => 2.0 * PI,
            _ => 4.0 * PI,
        }
    }

    /// Volume of the unit ball B₁ ⊂ R^{n+1}.
    pub fn unit_ball_volume(&self) -> f64 {
        self.sphere_area() / (self.dim() as f64 + 1.0)
    }

    /// Chart spacings: `[Δt, Δt]` on S¹, `[Δθ, Δφ]` on S².
    pub fn spacing(&self) -> [f64; 2] {
        match self.resolution {
            Resolution::Circle { n } => [2.0 * PI / n as f64; 2],
            Resolution::Sphere { n_theta, n_phi } => [PI / n_theta as f64, 2.0 * PI / n_phi as f64],
        }
    }

    /// Smallest geodesic distance between neighbouring nodes.
    pub fn min_spacing(&self) -> f64 {
        match self.resolution {
            Resolution::Circle { .. } => self.spacing()[0],
            Resolution::Sphere { n_theta, .. } => {
                let [dth, dph] = self.spacing();
                let st = (0.5 * PI / n_theta as f64).sin();
                dth.min(st * dph)
            }
        }
    }

    /// Nominal truncation error of the stencils, `hᵖ` with `h` the largest chart
    /// spacing and `p` the stencil order (4 on S¹, 2 on S²).
    pub fn grid_error(&self) -> f64 {
        let h = self.spacing()[0].max(self.spacing()[1]);
        match self.dim() {
            1 => h.powi(4),
            _ => h.powi(2),
        }
    }

    /// Chart coordinates of a (not necessarily unit) direction.
    pub fn chart_of(&self, x: &[f64; 3]) -> [f64; 2] {
        match self.dim() {
            1 => [x[1].atan2(x[0]).rem_euclid(2.0 * PI), 0.0],
            _ => {
                let rho = x[0].hypot(x[1]);
                [rho.atan2(x[2]), x[1].atan2(x[0]).rem_euclid(2.0 * PI)]
            }
        }
    }

    /// Unit vector for chart coordinates; accepts θ outside `[0, π]`.
    pub fn point_of_chart(&self, c: [f64; 2]) -> [f64; 3] {
        match self.dim() {
            1 => [c[0].cos(), c[0].sin(), 0.0],
            _ => {
                let (st, ct) = c[0].sin_cos();
                let (sp, cp) = c[1].sin_cos();
                [st * cp, st * sp, ct]
            }
        }
    }

    /// Maps a node-wise vector in the orthonormal frame to an ambient vector.
    pub fn tangent_to_ambient(&self, node: usize, v: [f64; 2]) -> [f64; 3] {
        let [e1, e2] = self.frames[node];
        [
            v[0] * e1[0] + v[1] * e2[0],
            v[0] * e1[1] + v[1] * e2[1],
            v[0] * e1[2] + v[1] * e2[2],
        ]
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn gradient(&self, values: &[f64]) -> Vec<[f64; 2]> {
        let a = self.ops.grad[0].apply(values);
        let b = self.ops.grad[1].apply(values);
        a.into_iter().zip(b).map(|(x, y)| [x, y]).collect()
    }

    /// Packed covariant Hessian `(H₁₁, H₁₂, H₂₂)` per node.
    pub fn hessian(&self, values: &[f64]) -> Vec<[f64; 3]> {
        let a = self.ops.hess[0].apply(values);
        let b = self.ops.hess[1].apply(values);
        let c = self.ops.hess[2].apply(values);
        (0..self.len()).map(|i| [a[i], b[i], c[i]]).collect()
    }
}

fn check_even(name: &'static str, value: usize, min: usize) -> Result<(), GridError> {
    if value < min || value % 2 != 0 {
        Err(GridError::Resolution { name, value, min })
    } else {
        Ok(())
    }
}

/// One real value per grid node.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Length {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { node });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Arc<SphereGrid>, value: f64) -> Self {
        let values = vec![value; grid.len()];
        Self { grid, values }
    }

    /// Samples a function of the unit normal `x ∈ S^n ⊂ R^{n+1}`.
    pub fn from_fn(grid: Arc<SphereGrid>, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        let values = grid.nodes().iter().map(f).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same grid, new values. Panics on a length mismatch.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        integrate(self) / self.grid.sphere_area()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `sup |u − u∘(−x)|`.
    pub fn symmetry_defect(&self) -> f64 {
        self.sup_distance(&antipodal_reflect(self))
    }

    /// Whether `u(−x) = u(x)` at every node, relative to `tol·sup|u|`.
    pub fn is_even(&self, tol: f64) -> bool {
        self.symmetry_defect() <= tol * self.sup_abs().max(f64::MIN_POSITIVE)
    }

    /// Cubic interpolation at an arbitrary direction.
    pub fn sample(&self, x: &[f64; 3]) -> f64 {
        self.grid.interpolate(&self.values, self.grid.chart_of(x)).value
    }
}

/// `∇u` in the orthonormal frame.
pub fn covariant_gradient(u: &ScalarField) -> Vec<[f64; 2]> {
    u.grid.gradient(&u.values)
}

/// Packed covariant Hessian `∇²u` in the orthonormal frame.
pub fn covariant_hessian(u: &ScalarField) -> Vec<[f64; 3]> {
    u.grid.hessian(&u.values)
}

/// Weighted quadrature `Σ wᵢ uᵢ`.
pub fn integrate(u: &ScalarField) -> f64 {
    u.grid.integrate(&u.values)
}

/// `u ∘ (x ↦ −x)`.
pub fn antipodal_reflect(u: &ScalarField) -> ScalarField {
    let values = u.grid.antipode.iter().map(|&j| u.values[j]).collect();
    u.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    fn check_invariants(g: &SphereGrid) {
        for x in g.nodes() {
            assert!((dot(x, x).sqrt() - 1.0).abs() < 1e-12);
        }
        let total: f64 = g.weights().iter().sum();
        let tol = if g.dim() == 1 { 1e-10 } else { 1e-6 };
        assert!((total - g.sphere_area()).abs() < tol, "{total}");
        for (i, &j) in g.antipode_index().iter().enumerate() {
            assert_ne!(i, j);
            assert_eq!(g.antipode_index()[j], i);
            let (a, b) = (g.nodes()[i], g.nodes()[j]);
            for d in 0..3 {
                assert!((a[d] + b[d]).abs() < 1e-12);
            }
        }
        if g.dim() == 2 {
            assert!(g.coords().iter().all(|c| c[0].sin() > 0.0));
        }
    }

    #[test]
    fn circle_grid_weights() {
        let g = SphereGrid::new(Resolution::Circle { n: 8 }).unwrap();
        assert_eq!(g.len(), 8);
        for w in g.weights() {
            assert!((w - PI / 4.0).abs() < 1e-15);
        }
        check_invariants(&g);
    }

    #[test]
    fn sphere_grid_invariants() {
        for (nt, np) in [(8, 16), (12, 24), (48, 96)] {
            let g = SphereGrid::new(Resolution::Sphere { n_theta: nt, n_phi: np }).unwrap();
            check_invariants(&g);
        }
        let g = SphereGrid::new(Resolution::Sphere { n_theta: 8, n_phi: 16 }).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 4.0 * PI).abs() < 1e-3);
    }

    #[test]
    fn odd_or_small_resolution_rejected() {
        assert!(matches!(
            SphereGrid::new(Resolution::Sphere { n_theta: 7, n_phi: 16 }),
            Err(GridError::Resolution { name: "n_theta", .. })
        ));
        assert!(SphereGrid::new(Resolution::Sphere { n_theta: 8, n_phi: 15 }).is_err());
        assert!(SphereGrid::new(Resolution::Circle { n: 9 }).is_err());
        assert!(SphereGrid::new(Resolution::Circle { n: 6 }).is_err());
    }

    #[test]
    fn constant_field_has_zero_derivatives() {
        for grid in [SphereGrid::circle_with(16).unwrap(), SphereGrid::sphere_with(8, 16).unwrap()] {
            let u = ScalarField::constant(grid, 2.5);
            assert!(covariant_gradient(&u).iter().all(|g| g[0].abs() < 1e-12 && g[1].abs() < 1e-12));
            assert!(covariant_hessian(&u).iter().all(|h| h.iter().all(|v| v.abs() < 1e-10)));
        }
    }

    #[test]
    fn circle_derivative_of_cosine() {
        let grid = SphereGrid::circle_with(256).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| x[0]);
        let g = covariant_gradient(&u);
        let h = covariant_hessian(&u);
        for (i, c) in grid.coords().iter().enumerate() {
            assert!((g[i][0] + c[0].sin()).abs() < 1e-6);
            assert!((h[i][0] + c[0].cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_function_hessian_is_minus_identity() {
        let grid = SphereGrid::sphere_with(48, 96).unwrap();
        let e = [0.6, 0.0, 0.8];
        let u = ScalarField::from_fn(grid.clone(), |x| dot(x, &e));
        let h = covariant_hessian(&u);
        let err = grid.grid_error();
        for (i, hi) in h.iter().enumerate() {
            let ui = u.values()[i];
            // first-order error in the rows adjacent to the poles
            let tol = 40.0 * err.sqrt();
            assert!((hi[0] + ui).abs() < tol && hi[1].abs() < tol && (hi[2] + ui).abs() < tol, "{i} {hi:?} {ui}");
        }
    }

    #[test]
    fn cos_theta_gradient_and_equator_hessian() {
        let grid = SphereGrid::sphere_with(48, 96).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| x[2]);
        let g = covariant_gradient(&u);
        let h = covariant_hessian(&u);
        let err = grid.grid_error();
        for (i, c) in grid.coords().iter().enumerate() {
            assert!((g[i][0] + c[0].sin()).abs() < err);
            assert!(g[i][1].abs() < 1e-12);
            assert!((h[i][0] + c[0].cos()).abs() < err);
            assert!(h[i][1].abs() < 1e-10);
            assert!((h[i][2] + c[0].cos()).abs() < err);
        }
    }

    #[test]
    fn quadrature_moments() {
        let grid = SphereGrid::sphere_with(64, 128).unwrap();
        let one = ScalarField::constant(grid.clone(), 1.0);
        assert!((integrate(&one) - 4.0 * PI).abs() < 1e-3);
        let z = ScalarField::from_fn(grid.clone(), |x| x[2]);
        assert!(integrate(&z).abs() < 1e-10);
        let z2 = ScalarField::from_fn(grid.clone(), |x| x[2] * x[2]);
        assert!((integrate(&z2) - 4.0 * PI / 3.0).abs() < 1e-3);
    }

    #[test]
    fn odd_monomials_integrate_to_zero() {
        for grid in [SphereGrid::sphere_with(8, 16).unwrap(), SphereGrid::sphere_with(14, 30).unwrap(), SphereGrid::circle_with(10).unwrap()] {
            for e in [[0.3, -0.5, 0.81], [1.0, 0.0, 0.0]] {
                for m in 0..4 {
                    let f = ScalarField::from_fn(grid.clone(), |x| dot(x, &e).powi(2 * m + 1));
                    assert!(integrate(&f).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn reflection_parity() {
        let grid = SphereGrid::sphere_with(12, 24).unwrap();
        let e = [0.2, 0.4, 0.8944271909999159];
        let even = ScalarField::from_fn(grid.clone(), |x| dot(x, &e).powi(2));
        assert_eq!(even.symmetry_defect(), 0.0);
        let odd = ScalarField::from_fn(grid.clone(), |x| dot(x, &e));
        let r = antipodal_reflect(&odd);
        assert!(r.values().iter().zip(odd.values()).all(|(a, b)| (a + b).abs() < 1e-15));
    }

    #[test]
    fn hessian_commutes_with_reflection() {
        let grid = SphereGrid::sphere_with(16, 32).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| (x[0] + 0.3 * x[1] * x[2]).exp());
        let h = covariant_hessian(&u);
        let hr = covariant_hessian(&antipodal_reflect(&u));
        for (i, &j) in grid.antipode_index().iter().enumerate() {
            // e_θ agrees at antipodal nodes while e_φ flips sign
            assert!((hr[i][0] - h[j][0]).abs() < 1e-10);
            assert!((hr[i][1] + h[j][1]).abs() < 1e-10);
            assert!((hr[i][2] - h[j][2]).abs() < 1e-10);
        }
    }
}
