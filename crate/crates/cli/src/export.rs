//! Text artifacts: meshes and CSV tables.

use sigmak_core::eigen::EigenReport;
use sigmak_core::flow::FlowRecord;
use sigmak_core::grid::{GridError, Resolution, ScalarField};
use sigmak_core::surface::{embed_support, SurfaceError};

/// Triangle mesh of the hypersurface with support function `u` on S².
///
/// Vertices are the grid points `X(ν) = u ν + ∇u`; faces are outward
/// oriented and 1-based. Each polar cap is closed by a fan over its ring.
pub fn obj_mesh(u: &ScalarField) -> Result<String, SurfaceError> {
    let Resolution::Sphere { n_theta, n_phi } = u.grid().resolution() else {
        return Err(SurfaceError::Grid(GridError::Dimension(u.grid().dim())));
    };
    let points = embed_support(u)?;
    let mut out = String::with_capacity(points.len() * 64);
    for x in &points {
        out.push_str(&format!("v {} {} {}\n", x[0], x[1], x[2]));
    }
    let id = |j: usize, l: usize| j * n_phi + l % n_phi + 1;
    for l in 1..n_phi - 1 {
        out.push_str(&format!("f {} {} {}\n", id(0, 0), id(0, l), id(0, l + 1)));
    }
    for j in 0..n_theta - 1 {
        for l in 0..n_phi {
            let (a, b, c, d) = (id(j, l), id(j, l + 1), id(j + 1, l + 1), id(j + 1, l));
            out.push_str(&format!("f {a} {d} {c}\nf {a} {c} {b}\n"));
        }
    }
    let s = n_theta - 1;
    for l in 1..n_phi - 1 {
        out.push_str(&format!("f {} {} {}\n", id(s, 0), id(s, l + 1), id(s, l)));
    }
    Ok(out)
}

/// Closed polyline `x,y` of the curve with support function `u` on S¹.
pub fn polyline_csv(u: &ScalarField) -> Result<String, SurfaceError> {
    let points = embed_support(u)?;
    let mut out = String::from("x,y\n");
    for x in &points {
        out.push_str(&format!("{},{}\n", x[0], x[1]));
    }
    Ok(out)
}

/// `p, lambda_p, V, residual, symmetry_defect` per continuation step; `V` is
/// the volume of the `λ = 1` solution, written as `ln V` when it would
/// overflow or underflow.
pub fn lambda_table_csv(report: &EigenReport) -> String {
    let mut out = String::from("p,lambda_p,V,log_V,residual,symmetry_defect\n");
    for s in &report.steps {
        let v = s.log_volume.exp();
        let v = if v.is_normal() { v.to_string() } else { String::new() };
        out.push_str(&format!("{},{},{},{},{},{}\n", s.p, s.lambda_p, v, s.log_volume, s.residual, s.symmetry_defect));
    }
    out
}

pub fn trajectory_csv(history: &[FlowRecord]) -> String {
    let mut out = String::from("t,V,residual\n");
    for r in history {
        out.push_str(&format!("{},{},{}\n", r.t, r.volume, r.residual));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use sigmak_core::grid::SphereGrid;

    fn signed_volume(obj: &str) -> f64 {
        let mut v: Vec<[f64; 3]> = Vec::new();
        let mut vol = 0.0;
        for line in obj.lines() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts[0] {
                "v" => v.push([parts[1].parse().unwrap(), parts[2].parse().unwrap(), parts[3].parse().unwrap()]),
                "f" => {
                    let i: Vec<usize> = parts[1..].iter().map(|s| s.parse::<usize>().unwrap() - 1).collect();
                    let (a, b, c) = (v[i[0]], v[i[1]], v[i[2]]);
                    vol += (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                        + a[2] * (b[0] * c[1] - b[1] * c[0]))
                        / 6.0;
                }
                _ => unreachable!(),
            }
        }
        vol
    }

    #[test]
    fn mesh_of_unit_sphere_is_closed_and_outward() {
        let grid = SphereGrid::sphere_with(24, 48).unwrap();
        let obj = obj_mesh(&ScalarField::constant(grid, 1.0)).unwrap();
        let faces = obj.lines().filter(|l| l.starts_with("f ")).count();
        // Euler characteristic 2: F = 2V − 4
        assert_eq!(faces, 2 * 24 * 48 - 4);
        let vol = signed_volume(&obj);
        assert!(vol > 0.0 && (vol - 4.0 * std::f64::consts::PI / 3.0).abs() < 0.05, "{vol}");
    }

    #[test]
    fn polyline_of_circle() {
        let grid = SphereGrid::circle_with(16).unwrap();
        let csv = polyline_csv(&ScalarField::constant(grid, 2.0)).unwrap();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "x,y");
        assert_eq!(rows.len(), 17);
        for r in &rows[1..] {
            let (x, y) = r.split_once(',').unwrap();
            let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
            assert!((x.hypot(y) - 2.0).abs() < 1e-12);
        }
    }
}
