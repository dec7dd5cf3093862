//! Numerical solver for L_p-type σ_k curvature problems on closed convex
//! hypersurfaces in R² and R³, parametrized by the support function on S^n.
//!
//! The equation `u^{1−p} σ_k(κ(ν⁻¹)) = f/λ` is solved by damped Newton
//! iteration in the Hessian quotient form
//! `F(∇²u + u I) = (f/λ)^{1/k} u^{(p−1)/k}`. The eigenvalue problem at
//! `p = k+1` is reached by continuation in `p`, and an expanding/contracting
//! σ_k curvature flow offers an independent route to the same solutions.

pub mod algebra;
pub mod grid;
pub mod sparse;
pub mod solver;
pub mod surface;
pub mod bounds;
pub mod eigen;
pub mod flow;
