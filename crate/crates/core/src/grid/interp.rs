//! Interpolation in chart coordinates (trigonometric on S¹, tensor-product
//! cubic Lagrange on S²), and the inverse problem of finding where an
//! interpolated vector field points in a prescribed direction.

use super::SphereGrid;

/// Interpolated value together with its chart derivatives
/// (`∂_t` on S¹; `∂_θ`, `∂_φ` on S²).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interpolated {
    pub value: f64,
    pub d: [f64; 2],
}

/// Weights and derivative weights for stencil offsets −1, 0, 1, 2 at
/// fractional position `x ∈ [0, 1)`.
fn lagrange(x: f64) -> ([f64; 4], [f64; 4]) {
    let w = [
        -x * (x - 1.0) * (x - 2.0) / 6.0,
        (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0,
        -(x + 1.0) * x * (x - 2.0) / 2.0,
        (x + 1.0) * x * (x - 1.0) / 6.0,
    ];
    let dw = [
        -(3.0 * x * x - 6.0 * x + 2.0) / 6.0,
        (3.0 * x * x - 4.0 * x - 1.0) / 2.0,
        -(3.0 * x * x - 2.0 * x - 2.0) / 2.0,
        (3.0 * x * x - 1.0) / 6.0,
    ];
    (w, dw)
}

fn split(pos: f64) -> (isize, f64) {
    let f = pos.floor();
    (f as isize, pos - f)
}

impl SphereGrid {
    /// Node index for chart indices `(j, l)` with the pole ghost rule applied
    /// to out-of-range `j` and periodic wrap in `l`. For S¹ only `j` is used.
    pub(crate) fn chart_index(&self, j: isize, l: isize) -> usize {
        match self.resolution {
            super::Resolution::Circle { n } => j.rem_euclid(n as isize) as usize,
            super::Resolution::Sphere { n_theta, n_phi } => {
                let nt = n_theta as isize;
                let np = n_phi as isize;
                // reflect across the poles until the row is in range
                let mut j = j.rem_euclid(2 * nt);
                let mut shift = 0;
                if j >= nt {
                    j = 2 * nt - 1 - j;
                    shift = np / 2;
                }
                j as usize * n_phi + (l + shift).rem_euclid(np) as usize
            }
        }
    }

    /// Interpolates node values at chart coordinates `c`.
    pub fn interpolate(&self, values: &[f64], c: [f64; 2]) -> Interpolated {
        debug_assert_eq!(values.len(), self.len());
        let [h0, h1] = self.spacing();
        match self.dim() {
            1 => {
                // trigonometric interpolation with the Dirichlet kernel of an even grid
                let n = self.len() as f64;
                let mut value = 0.0;
                let mut d = 0.0;
                for (i, &v) in values.iter().enumerate() {
                    let x = c[0] - h0 * i as f64;
                    let half = 0.5 * x;
                    let sh = half.sin();
                    if sh.abs() < 1e-14 {
                        value += v;
                        continue;
                    }
                    let ch = half.cos();
                    let (sn, cn) = (0.5 * n * x).sin_cos();
                    value += v * sn * ch / (sh * n);
                    d += v * (0.5 * n * cn * ch / sh - 0.5 * sn / (sh * sh)) / n;
                }
                Interpolated { value, d: [d, 0.0] }
            }
            _ => {
                let (j0, x) = split(c[0] / h0 - 0.5);
                let (l0, y) = split(c[1] / h1);
                let (wx, dwx) = lagrange(x);
                let (wy, dwy) = lagrange(y);
                let mut value = 0.0;
                let mut dth = 0.0;
                let mut dph = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        let v = values[self.chart_index(j0 + a as isize - 1, l0 + b as isize - 1)];
                        value += wx[a] * wy[b] * v;
                        dth += dwx[a] * wy[b] * v;
                        dph += wx[a] * dwy[b] * v;
                    }
                }
                Interpolated {
                    value,
                    d: [dth / h0, dph / h1],
                }
            }
        }
    }

    /// Tangent basis at chart coordinates `c` (orthonormal away from the poles).
    pub(crate) fn chart_frame(&self, c: [f64; 2]) -> [[f64; 3]; 2] {
        match self.dim() {
            1 => {
                let (s, co) = c[0].sin_cos();
                [[-s, co, 0.0], [0.0; 3]]
            }
            _ => {
                let (st, ct) = c[0].sin_cos();
                let (sp, cp) = c[1].sin_cos();
                [[ct * cp, ct * sp, -st], [-sp, cp, 0.0]]
            }
        }
    }

    /// Finds chart coordinates `c` with the interpolated ambient field
    /// `V(c) = (comps[0], comps[1], comps[2])(c)` parallel to the unit vector
    /// `y` and pointing the same way. Newton iteration from the chart of `y`.
    pub(crate) fn locate_parallel(&self, comps: &[Vec<f64>; 3], y: &[f64; 3]) -> Option<[f64; 2]> {
        let n = self.dim();
        let mut c = self.chart_of(y);
        let basis = self.chart_frame(c);
        let spacing = self.spacing();
        for _ in 0..60 {
            let vi = [
                self.interpolate(&comps[0], c),
                self.interpolate(&comps[1], c),
                self.interpolate(&comps[2], c),
            ];
            let v = [vi[0].value, vi[1].value, vi[2].value];
            let vnorm = dot(&v, &v).sqrt();
            let eq = [dot(&v, &basis[0]), dot(&v, &basis[1])];
            let resid = eq[0].abs().max(eq[1].abs());
            if resid <= 1e-13 * vnorm {
                return (dot(&v, y) > 0.0).then_some(c);
            }
            // J[b][a] = ⟨∂_a V, e_b(y)⟩
            let dv = |a: usize| [vi[0].d[a], vi[1].d[a], vi[2].d[a]];
            let mut step = if n == 1 {
                let j = dot(&dv(0), &basis[0]);
                if j == 0.0 {
                    return None;
                }
                [-eq[0] / j, 0.0]
            } else {
                let (d0, d1) = (dv(0), dv(1));
                let j00 = dot(&d0, &basis[0]);
                let j01 = dot(&d1, &basis[0]);
                let j10 = dot(&d0, &basis[1]);
                let j11 = dot(&d1, &basis[1]);
                let det = j00 * j11 - j01 * j10;
                if det == 0.0 || !det.is_finite() {
                    return None;
                }
                [
                    -(j11 * eq[0] - j01 * eq[1]) / det,
                    -(-j10 * eq[0] + j00 * eq[1]) / det,
                ]
            };
            let mut ratio: f64 = 1.0;
            for a in 0..n {
                ratio = ratio.max(step[a].abs() / (2.0 * spacing[a]));
            }
            for s in step.iter_mut() {
                *s /= ratio;
            }
            c = [c[0] + step[0], c[1] + step[1]];
            if !(c[0].is_finite() && c[1].is_finite()) {
                return None;
            }
        }
        None
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScalarField;

    #[test]
    fn cubic_weights_partition_unity() {
        for x in [0.0, 0.25, 0.5, 0.9] {
            let (w, dw) = lagrange(x);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(dw.iter().sum::<f64>().abs() < 1e-14);
        }
        let (w, _) = lagrange(0.0);
        assert_eq!(w, [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let grid = SphereGrid::sphere_with(12, 24).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| (x[0] - 0.3 * x[2]).exp());
        for (i, c) in grid.coords().iter().enumerate() {
            assert!((grid.interpolate(u.values(), *c).value - u.values()[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn interpolation_error_off_nodes() {
        let grid = SphereGrid::sphere_with(32, 64).unwrap();
        let f = |x: &[f64; 3]| (0.5 * x[0] + 0.2 * x[1] * x[2]).exp();
        let u = ScalarField::from_fn(grid.clone(), f);
        for y in [[0.3, 0.4, 0.866], [0.0, 0.0, 1.0], [-0.1, 0.05, -0.99], [1.0, 0.0, 0.0]] {
            let n = dot(&y, &y).sqrt();
            let y = [y[0] / n, y[1] / n, y[2] / n];
            assert!((u.sample(&y) - f(&y)).abs() < 1e-4, "{y:?}");
        }
        let circle = SphereGrid::circle_with(64).unwrap();
        let v = ScalarField::from_fn(circle, |x| (x[0] + 0.5 * x[1]).exp());
        let y = [0.6, -0.8, 0.0];
        assert!((v.sample(&y) - (0.6f64 - 0.4).exp()).abs() < 1e-12);
    }

    #[test]
    fn chart_derivatives_match_analytic() {
        let grid = SphereGrid::sphere_with(48, 96).unwrap();
        // u = cos θ, ∂_θ u = −sin θ
        let u = ScalarField::from_fn(grid.clone(), |x| x[2]);
        let c = [1.1, 0.37];
        let r = grid.interpolate(u.values(), c);
        assert!((r.value - c[0].cos()).abs() < 1e-6);
        assert!((r.d[0] + c[0].sin()).abs() < 1e-4);
        assert!(r.d[1].abs() < 1e-10);
    }

    #[test]
    fn locate_parallel_on_identity_field() {
        // V(x) = x is parallel to y exactly at y itself
        let grid = SphereGrid::sphere_with(16, 32).unwrap();
        let comps = [0, 1, 2].map(|d| grid.nodes().iter().map(|x| x[d]).collect::<Vec<_>>());
        let y = [0.48, -0.6, 0.64];
        let c = grid.locate_parallel(&comps, &y).unwrap();
        let p = grid.point_of_chart(c);
        for d in 0..3 {
            assert!((p[d] - y[d]).abs() < 1e-4);
        }
        let minus = [-0.48, 0.6, -0.64];
        let c = grid.locate_parallel(&comps, &minus).unwrap();
        let p = grid.point_of_chart(c);
        assert!(dot(&p, &minus) > 0.9999);
    }
}
