//! Hypersurface geometry from the support function `u` (via `h = ∇²u + uI`)
//! or the radial function `ρ`, plus conversions between the two
//! parametrizations and enclosed volume.

use std::sync::Arc;

use thiserror::Error;

use crate::algebra::{eigen_packed, relative_eigenvalues};
use crate::grid::{GridError, ScalarField, SphereGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("support function is not strictly convex (eigenvalue {min_eigenvalue:e} of h at node {node})")]
    NonConvex { node: usize, min_eigenvalue: f64 },
    #[error("radial function is not positive at node {node}")]
    NonPositiveRadial { node: usize },
    #[error("could not resample towards node {node}")]
    Resample { node: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Everything derived from a support function on the grid.
#[derive(Clone, Debug)]
pub struct ShapeBundle {
    pub u: ScalarField,
    pub grad: Vec<[f64; 2]>,
    /// Packed `h = ∇²u + uI`.
    pub h: Vec<[f64; 3]>,
    /// Principal radii (eigenvalues of `h`), ascending; only the first `n` entries are used.
    pub radii: Vec<[f64; 2]>,
    /// Principal curvatures `1/radii`, in the same order as `radii`.
    pub kappa: Vec<[f64; 2]>,
    /// `W = tr h`.
    pub w: Vec<f64>,
    pub volume: f64,
    pub convex: bool,
    pub star_shaped: bool,
}

impl ShapeBundle {
    pub fn grid(&self) -> &Arc<SphereGrid> {
        self.u.grid()
    }

    pub fn dim(&self) -> usize {
        self.u.grid().dim()
    }

    pub fn radii_at(&self, i: usize) -> &[f64] {
        &self.radii[i][..self.dim()]
    }

    pub fn kappa_at(&self, i: usize) -> &[f64] {
        &self.kappa[i][..self.dim()]
    }

    /// `det h` per node (product of the principal radii).
    pub fn det_h(&self) -> Vec<f64> {
        let n = self.dim();
        self.h.iter().map(|h| det(n, *h)).collect()
    }

    pub fn min_radius(&self) -> f64 {
        self.radii.iter().fold(f64::INFINITY, |m, r| m.min(r[0]))
    }

    /// Node with the smallest eigenvalue of `h`, and that eigenvalue.
    pub fn min_radius_node(&self) -> (usize, f64) {
        self.radii
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bm), (i, r)| if r[0] < bm { (i, r[0]) } else { (bi, bm) })
    }

    /// `|∇u|` per node.
    pub fn grad_norm(&self) -> Vec<f64> {
        self.grad.iter().map(|g| g[0].hypot(g[1])).collect()
    }
}

pub(crate) fn det(n: usize, h: [f64; 3]) -> f64 {
    if n == 1 {
        h[0]
    } else {
        h[0] * h[2] - h[1] * h[1]
    }
}

pub fn bundle_from_support(u: &ScalarField) -> ShapeBundle {
    let grid = u.grid();
    let n = grid.dim();
    let grad = grid.gradient(u.values());
    let mut h = grid.hessian(u.values());
    for (hi, &ui) in h.iter_mut().zip(u.values()) {
        hi[0] += ui;
        if n == 2 {
            hi[2] += ui;
        }
    }
    let radii: Vec<[f64; 2]> = h.iter().map(|&hi| eigen_packed(n, hi).values).collect();
    let kappa = radii.iter().map(|r| [1.0 / r[0], 1.0 / r[1]]).collect();
    let w = h.iter().map(|hi| if n == 1 { hi[0] } else { hi[0] + hi[2] }).collect();
    let convex = radii.iter().all(|r| r[0] > 0.0);
    let star_shaped = convex && u.min() > 0.0;
    let dets: Vec<f64> = h.iter().map(|&hi| det(n, hi)).collect();
    let integrand: Vec<f64> = u.values().iter().zip(&dets).map(|(a, b)| a * b).collect();
    let volume = grid.integrate(&integrand) / (n as f64 + 1.0);
    ShapeBundle {
        u: u.clone(),
        grad,
        h,
        radii,
        kappa,
        w,
        volume,
        convex,
        star_shaped,
    }
}

/// Support-route volume `(1/(n+1)) ∫ u det h`.
pub fn volume_support(u: &ScalarField) -> f64 {
    bundle_from_support(u).volume
}

/// Radial-route volume `(1/(n+1)) ∫ ρ^{n+1}`.
pub fn volume_radial(rho: &ScalarField) -> f64 {
    let n = rho.grid().dim() as i32;
    let p: Vec<f64> = rho.values().iter().map(|r| r.powi(n + 1)).collect();
    rho.grid().integrate(&p) / (n as f64 + 1.0)
}

/// Geometry of the star-shaped surface `{ρ(x) x}`.
#[derive(Clone, Debug)]
pub struct RadialBundle {
    pub rho: ScalarField,
    pub grad_rho: Vec<[f64; 2]>,
    /// Packed induced metric `ρ²δ + ∇ρ∇ρ`.
    pub g: Vec<[f64; 3]>,
    /// Packed second fundamental form.
    pub h: Vec<[f64; 3]>,
    /// Outer unit normal.
    pub nu: Vec<[f64; 3]>,
    /// Support function `⟨X, ν⟩` at each surface point.
    pub u_of_rho: Vec<f64>,
    /// Principal curvatures (eigenvalues of `h` relative to `g`), ascending.
    pub kappa: Vec<[f64; 2]>,
}

pub fn bundle_from_radial(rho: &ScalarField) -> Result<RadialBundle, SurfaceError> {
    if let Some(node) = rho.values().iter().position(|&r| r <= 0.0) {
        return Err(SurfaceError::NonPositiveRadial { node });
    }
    let grid = rho.grid();
    let n = grid.dim();
    let grad_rho = grid.gradient(rho.values());
    let hess = grid.hessian(rho.values());
    let len = grid.len();
    let mut g = Vec::with_capacity(len);
    let mut h = Vec::with_capacity(len);
    let mut nu = Vec::with_capacity(len);
    let mut u_of_rho = Vec::with_capacity(len);
    let mut kappa = Vec::with_capacity(len);
    for i in 0..len {
        let r = rho.values()[i];
        let [a, b] = if n == 1 { [grad_rho[i][0], 0.0] } else { grad_rho[i] };
        let q = (r * r + a * a + b * b).sqrt();
        let gi = [r * r + a * a, a * b, r * r + b * b];
        let hh = hess[i];
        let hi = [
            (r * r + 2.0 * a * a - r * hh[0]) / q,
            (2.0 * a * b - r * hh[1]) / q,
            (r * r + 2.0 * b * b - r * hh[2]) / q,
        ];
        let x = grid.nodes()[i];
        let t = grid.tangent_to_ambient(i, [a, b]);
        nu.push([0, 1, 2].map(|d| (r * x[d] - t[d]) / q));
        u_of_rho.push(r * r / q);
        kappa.push(relative_eigenvalues(n, hi, gi));
        g.push(gi);
        h.push(hi);
    }
    Ok(RadialBundle {
        rho: rho.clone(),
        grad_rho,
        g,
        h,
        nu,
        u_of_rho,
        kappa,
    })
}

fn ensure_convex(b: &ShapeBundle) -> Result<(), SurfaceError> {
    let (node, min_eigenvalue) = b.min_radius_node();
    if min_eigenvalue > 0.0 {
        Ok(())
    } else {
        Err(SurfaceError::NonConvex { node, min_eigenvalue })
    }
}

/// Points `X = u x + ∇u` of the surface with normal `x`, per node.
pub fn embed_support(u: &ScalarField) -> Result<Vec<[f64; 3]>, SurfaceError> {
    let b = bundle_from_support(u);
    ensure_convex(&b)?;
    Ok(embed_bundle(&b))
}

pub(crate) fn embed_bundle(b: &ShapeBundle) -> Vec<[f64; 3]> {
    let grid = b.grid();
    (0..grid.len())
        .map(|i| {
            let x = grid.nodes()[i];
            let t = grid.tangent_to_ambient(i, b.grad[i]);
            let ui = b.u.values()[i];
            [0, 1, 2].map(|d| ui * x[d] + t[d])
        })
        .collect()
}

fn components(points: &[[f64; 3]]) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|d| points.iter().map(|p| p[d]).collect())
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Radial function of the convex body with support function `u`, sampled at
/// the grid nodes.
pub fn radial_from_support(u: &ScalarField) -> Result<ScalarField, SurfaceError> {
    let b = bundle_from_support(u);
    ensure_convex(&b)?;
    let grid = b.grid().clone();
    let comps = components(&embed_bundle(&b));
    let mut rho = Vec::with_capacity(grid.len());
    for (node, y) in grid.nodes().iter().enumerate() {
        let c = grid
            .locate_parallel(&comps, y)
            .ok_or(SurfaceError::Resample { node })?;
        let x = [0, 1, 2].map(|d| grid.interpolate(&comps[d], c).value);
        rho.push(dot(&x, y));
    }
    Ok(ScalarField::new(grid, rho)?)
}

/// Support function of the star-shaped surface `{ρ(x) x}`, sampled at the
/// grid nodes. The surface must be convex for the result to be meaningful.
pub fn support_from_radial(rho: &ScalarField) -> Result<ScalarField, SurfaceError> {
    let rb = bundle_from_radial(rho)?;
    let grid = rho.grid().clone();
    let normals = components(&rb.nu);
    let points: Vec<[f64; 3]> = grid
        .nodes()
        .iter()
        .zip(rho.values())
        .map(|(x, r)| x.map(|v| r * v))
        .collect();
    let points = components(&points);
    let mut u = Vec::with_capacity(grid.len());
    for (node, y) in grid.nodes().iter().enumerate() {
        let c = grid
            .locate_parallel(&normals, y)
            .ok_or(SurfaceError::Resample { node })?;
        let p = [0, 1, 2].map(|d| grid.interpolate(&points[d], c).value);
        u.push(dot(&p, y));
    }
    Ok(ScalarField::new(grid, u)?)
}

/// Largest disagreement between the curvatures computed from `u` directly and
/// from its radial function, compared at matching normals through `σ₁(κ)`
/// and `σ_n(κ)`.
pub fn route_consistency(u: &ScalarField) -> Result<f64, SurfaceError> {
    let sb = bundle_from_support(u);
    ensure_convex(&sb)?;
    let rho = radial_from_support(u)?;
    let rb = bundle_from_radial(&rho)?;
    let grid = u.grid();
    let n = grid.dim();
    let (s1, sn): (Vec<f64>, Vec<f64>) = sb
        .kappa
        .iter()
        .map(|k| if n == 1 { (k[0], k[0]) } else { (k[0] + k[1], k[0] * k[1]) })
        .unzip();
    let mut worst: f64 = 0.0;
    for (i, nu) in rb.nu.iter().enumerate() {
        let c = grid.chart_of(nu);
        let k = rb.kappa[i];
        let (r1, rn) = if n == 1 { (k[0], k[0]) } else { (k[0] + k[1], k[0] * k[1]) };
        worst = worst
            .max((grid.interpolate(&s1, c).value - r1).abs())
            .max((grid.interpolate(&sn, c).value - rn).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sphere(nt: usize) -> Arc<SphereGrid> {
        SphereGrid::sphere_with(nt, 2 * nt).unwrap()
    }

    #[test]
    fn round_sphere_bundle() {
        for grid in [sphere(8), SphereGrid::circle_with(16).unwrap()] {
            let n = grid.dim();
            let r = 1.7;
            let b = bundle_from_support(&ScalarField::constant(grid.clone(), r));
            for i in 0..grid.len() {
                for &m in b.radii_at(i) {
                    assert!((m - r).abs() < 1e-12);
                }
                for &k in b.kappa_at(i) {
                    assert!((k - 1.0 / r).abs() < 1e-12);
                }
                assert!((b.w[i] - n as f64 * r).abs() < 1e-12);
            }
            assert!(b.convex && b.star_shaped);
            let ball = grid.unit_ball_volume();
            assert!((b.volume - r.powi(n as i32 + 1) * ball).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_ball_volume_n2() {
        let b = bundle_from_support(&ScalarField::constant(sphere(16), 1.0));
        assert!((b.volume - 4.0 * PI / 3.0).abs() < 1e-3);
    }

    #[test]
    fn translated_sphere_has_constant_radii() {
        let grid = sphere(32);
        let e = [0.6, 0.0, 0.8];
        let c = 1.5;
        let u = ScalarField::from_fn(grid.clone(), |x| dot(x, &e) + c);
        let b = bundle_from_support(&u);
        let tol = 20.0 * grid.grid_error();
        // away from the pole rows the stencils are second order
        for (i, co) in grid.coords().iter().enumerate() {
            if co[0].sin() > 0.3 {
                for &m in b.radii_at(i) {
                    assert!((m - c).abs() < tol, "{i} {m}");
                }
            }
        }
        let x = embed_support(&u).unwrap();
        for (i, xi) in x.iter().enumerate() {
            let want = grid.nodes()[i].map(|v| c * v);
            for d in 0..3 {
                assert!((xi[d] - want[d] - e[d]).abs() < 0.05, "{i}");
            }
        }
    }

    #[test]
    fn nonconvex_flag() {
        let grid = sphere(16);
        // a large P₂ component makes h indefinite near the equator
        let u = ScalarField::from_fn(grid, |x| 1.0 + 2.0 * (3.0 * x[2] * x[2] - 1.0));
        let b = bundle_from_support(&u);
        assert!(!b.convex);
        assert!(matches!(embed_support(&u), Err(SurfaceError::NonConvex { .. })));
        assert!(radial_from_support(&u).is_err());
    }

    #[test]
    fn round_radial_bundle() {
        let grid = sphere(8);
        let r = 0.8;
        let rb = bundle_from_radial(&ScalarField::constant(grid.clone(), r)).unwrap();
        for i in 0..grid.len() {
            assert!((rb.g[i][0] - r * r).abs() < 1e-14 && rb.g[i][1].abs() < 1e-14);
            assert!((rb.h[i][0] - r).abs() < 1e-12 && (rb.h[i][2] - r).abs() < 1e-12);
            assert!((rb.u_of_rho[i] - r).abs() < 1e-14);
            for d in 0..3 {
                assert!((rb.nu[i][d] - grid.nodes()[i][d]).abs() < 1e-14);
            }
            assert!((rb.kappa[i][0] - 1.0 / r).abs() < 1e-12);
        }
        assert!(bundle_from_radial(&ScalarField::constant(grid, -1.0)).is_err());
    }

    #[test]
    fn radial_normals_and_support_bound() {
        let grid = sphere(16);
        let rho = ScalarField::from_fn(grid.clone(), |x| 1.0 + 0.3 * x[0] * x[1] + 0.2 * x[2]);
        let rb = bundle_from_radial(&rho).unwrap();
        for i in 0..grid.len() {
            assert!((dot(&rb.nu[i], &rb.nu[i]) - 1.0).abs() < 1e-12);
            assert!(rb.u_of_rho[i] <= rho.values()[i] + 1e-15);
        }
    }

    #[test]
    fn translated_sphere_radial_function() {
        let grid = sphere(32);
        let u = ScalarField::from_fn(grid.clone(), |x| 0.2 * x[2] + 1.0);
        let rho = radial_from_support(&u).unwrap();
        for (i, x) in grid.nodes().iter().enumerate() {
            let z = x[2];
            let want = 0.2 * z + (1.0 - 0.04 * (1.0 - z * z)).sqrt();
            assert!((rho.values()[i] - want).abs() < 20.0 * grid.grid_error(), "{i}");
        }
    }

    #[test]
    fn round_trip_support_radial() {
        let grid = sphere(24);
        let u = ScalarField::from_fn(grid.clone(), |x| 1.0 + 0.1 * x[0] * x[0] + 0.05 * x[1] * x[2] + 0.1 * x[2]);
        let rho = radial_from_support(&u).unwrap();
        let back = support_from_radial(&rho).unwrap();
        assert!(back.sup_distance(&u) < 5.0 * grid.grid_error(), "{}", back.sup_distance(&u));
        let vs = volume_support(&u);
        let vr = volume_radial(&rho);
        assert!((vs - vr).abs() < 5.0 * grid.grid_error() * vs, "{vs} {vr}");
    }

    #[test]
    fn ellipse_area() {
        let grid = SphereGrid::circle_with(512).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| (4.0 * x[0] * x[0] + x[1] * x[1]).sqrt());
        assert!((volume_support(&u) - 2.0 * PI).abs() < 1e-4);
        // shoelace area of the embedded polygon
        let pts = embed_support(&u).unwrap();
        let m = pts.len();
        let shoelace: f64 = (0..m)
            .map(|i| {
                let (a, b) = (pts[i], pts[(i + 1) % m]);
                0.5 * (a[0] * b[1] - a[1] * b[0])
            })
            .sum();
        assert!((shoelace - 2.0 * PI).abs() < 1e-3);
        let rho = radial_from_support(&u).unwrap();
        assert!((volume_radial(&rho) - 2.0 * PI).abs() < 1e-4);
    }

    #[test]
    fn curvature_routes_agree() {
        for grid in [sphere(24), SphereGrid::circle_with(128).unwrap()] {
            let u = ScalarField::from_fn(grid.clone(), |x| 1.0 + 0.08 * x[0] * x[1] + 0.1 * x[1] * x[1] + 0.05 * x[0]);
            let err = route_consistency(&u).unwrap();
            assert!(err < 10.0 * grid.grid_error(), "{err}");
        }
    }

    #[test]
    fn c1_estimate_and_max_embedding() {
        let grid = sphere(24);
        let u = ScalarField::from_fn(grid.clone(), |x| 1.0 + 0.15 * x[0] * x[0] + 0.3 * x[2]);
        let b = bundle_from_support(&u);
        let gmax = b.grad_norm().into_iter().fold(0.0, f64::max);
        assert!(gmax <= u.max() + 10.0 * grid.grid_error());
        let x = embed_support(&u).unwrap();
        let xmax = x.iter().map(|p| dot(p, p).sqrt()).fold(0.0, f64::max);
        assert!((xmax - u.max()).abs() < 10.0 * grid.grid_error());
        for (i, p) in x.iter().enumerate() {
            let ui = u.values()[i];
            let g = b.grad_norm()[i];
            assert!((dot(p, p) - ui * ui - g * g).abs() < 1e-12);
        }
    }

    #[test]
    fn dilation_scalings() {
        let grid = sphere(12);
        let u = ScalarField::from_fn(grid.clone(), |x| 1.0 + 0.1 * x[0] * x[2]);
        let b = bundle_from_support(&u);
        for c in [0.5, 2.0] {
            let bc = bundle_from_support(&u.scaled(c));
            for i in 0..grid.len() {
                for d in 0..2 {
                    assert!((bc.radii[i][d] - c * b.radii[i][d]).abs() < 1e-12);
                    assert!((bc.kappa[i][d] - b.kappa[i][d] / c).abs() < 1e-12);
                }
            }
            assert!((bc.volume - c.powi(3) * b.volume).abs() < 1e-12 * bc.volume);
        }
    }
}
