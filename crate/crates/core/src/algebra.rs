//! Elementary symmetric polynomials, the Gårding cones Γ_k and the Hessian
//! quotient `F(A) = (σ_n(A)/σ_{n−k}(A))^{1/k}` with its matrix derivative.
//!
//! The generic routines work for any `n`; the `*_packed` variants are the
//! closed-form 1×1 / 2×2 paths used pointwise by the solvers, with symmetric
//! tensors stored as `(a₁₁, a₁₂, a₂₂)`.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("degree k={k} out of range for n={n}")]
    DegreeOutOfRange { k: usize, n: usize },
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("spectrum has a zero entry")]
    ZeroEntry,
    #[error("non-finite input")]
    NonFinite,
}

/// Eigenvalues of a symmetric matrix (principal radii or curvatures).
#[derive(Clone, Debug, PartialEq)]
pub struct SymSpectrum {
    values: Vec<f64>,
}

impl SymSpectrum {
    pub fn new(values: Vec<f64>) -> Result<Self, AlgebraError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AlgebraError::NonFinite);
        }
        Ok(Self { values })
    }

    pub fn from_matrix(a: &DMatrix<f64>) -> Result<Self, AlgebraError> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(AlgebraError::NonFinite);
        }
        let eig = SymmetricEigen::new(a.clone());
        Self::new(eig.eigenvalues.iter().copied().collect())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entry-wise reciprocal (radii ↔ curvatures).
    pub fn reciprocal(&self) -> Result<Self, AlgebraError> {
        if self.values.iter().any(|&v| v == 0.0) {
            return Err(AlgebraError::ZeroEntry);
        }
        Self::new(self.values.iter().map(|v| 1.0 / v).collect())
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All of `σ₀, …, σ_n` from the coefficients of `∏(1 + κᵢ t)`.
pub fn sigma_all(values: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (m, &x) in values.iter().enumerate() {
        for j in (1..=m + 1).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

fn sigma_raw(values: &[f64], k: usize) -> f64 {
    sigma_all(values)[k]
}

/// σ_{k}(κ with entry i removed); zero for k < 0.
fn sigma_without(values: &[f64], i: usize, k: isize) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let rest: Vec<f64> = values
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .collect();
    sigma_all(&rest).get(k as usize).copied().unwrap_or(0.0)
}

pub fn sigma_k(s: &SymSpectrum, k: usize) -> Result<f64, AlgebraError> {
    if k > s.n() {
        return Err(AlgebraError::DegreeOutOfRange { k, n: s.n() });
    }
    Ok(sigma_raw(&s.values, k))
}

/// `∂σ_k/∂κᵢ = σ_{k−1}(κ | i)`.
pub fn sigma_k_gradient(s: &SymSpectrum, k: usize) -> Result<Vec<f64>, AlgebraError> {
    if k == 0 || k > s.n() {
        return Err(AlgebraError::DegreeOutOfRange { k, n: s.n() });
    }
    Ok((0..s.n()).map(|i| sigma_without(&s.values, i, k as isize - 1)).collect())
}

/// Strict membership `σ₁, …, σ_k > 0`.
pub fn in_gamma_k(s: &SymSpectrum, k: usize) -> bool {
    let e = sigma_all(&s.values);
    k <= s.n() && e[1..=k].iter().all(|&v| v > 0.0)
}

/// Normalized means `(σ_j/C(n,j))^{1/j}` for `j = 1..n`; non-increasing on Γ_n.
pub fn normalized_means(s: &SymSpectrum) -> Vec<f64> {
    let n = s.n();
    let e = sigma_all(&s.values);
    (1..=n)
        .map(|j| (e[j] / binomial(n, j)).powf(1.0 / j as f64))
        .collect()
}

/// `|σ_k(κ) − σ_{n−k}(κ⁻¹)/σ_n(κ⁻¹)|`.
pub fn reciprocal_identity_check(s: &SymSpectrum, k: usize) -> Result<f64, AlgebraError> {
    let n = s.n();
    if k > n {
        return Err(AlgebraError::DegreeOutOfRange { k, n });
    }
    let inv = s.reciprocal()?;
    let e = sigma_all(&inv.values);
    Ok((sigma_raw(&s.values, k) - e[n - k] / e[n]).abs())
}

/// `F(μ)` and `∂F/∂μᵢ` for a spectrum of radii in Γ_n.
pub fn quotient_with_gradient(mu: &[f64], k: usize) -> Result<(f64, Vec<f64>), AlgebraError> {
    let n = mu.len();
    if k == 0 || k > n {
        return Err(AlgebraError::DegreeOutOfRange { k, n });
    }
    let min = mu.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(AlgebraError::NonFinite);
    }
    if min <= 0.0 {
        return Err(AlgebraError::NotPositiveDefinite { min_eigenvalue: min });
    }
    let e = sigma_all(mu);
    let (top, bottom) = (e[n], e[n - k]);
    let kf = k as f64;
    let f = (top / bottom).powf(1.0 / kf);
    let grad = (0..n)
        .map(|i| {
            let a = sigma_without(mu, i, n as isize - 1) / top;
            let b = sigma_without(mu, i, (n - k) as isize - 1) / bottom;
            f / kf * (a - b)
        })
        .collect();
    Ok((f, grad))
}

pub fn quotient_f(a: &DMatrix<f64>, k: usize) -> Result<f64, AlgebraError> {
    let s = SymSpectrum::from_matrix(a)?;
    quotient_with_gradient(s.values(), k).map(|(f, _)| f)
}

/// Matrix gradient `F^{ij} = ∂F/∂a_{ij}`, so that `dF = Σ F^{ij} da_{ij}`.
pub fn quotient_f_gradient(a: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>, AlgebraError> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(AlgebraError::NonFinite);
    }
    let eig = SymmetricEigen::new(a.clone());
    let mu: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let (_, g) = quotient_with_gradient(&mu, k)?;
    let q = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(g));
    Ok(q * d * q.transpose())
}

/// Eigen-decomposition of a packed symmetric tensor: eigenvalues in ascending
/// order and the rotation angle of the eigenbasis. For `n = 1` the tensor is
/// the scalar `a₁₁`.
#[derive(Clone, Copy, Debug)]
pub struct PackedEigen {
    pub values: [f64; 2],
    pub cos: f64,
    pub sin: f64,
}

pub fn eigen_packed(n: usize, a: [f64; 3]) -> PackedEigen {
    if n == 1 {
        return PackedEigen {
            values: [a[0], a[0]],
            cos: 1.0,
            sin: 0.0,
        };
    }
    let [p, b, c] = a;
    let m = 0.5 * (p + c);
    let d = (0.5 * (p - c)).hypot(b);
    let hi = m + d;
    // product form avoids cancellation in the small eigenvalue
    let lo = if hi > 0.0 { (p * c - b * b) / hi } else { m - d };
    let theta = 0.5 * (2.0 * b).atan2(p - c);
    PackedEigen {
        values: [lo, hi],
        cos: theta.cos(),
        sin: theta.sin(),
    }
}

impl PackedEigen {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    /// Recombines per-eigenvalue weights into a packed tensor
    /// `g₀ v₀v₀ᵀ + g₁ v₁v₁ᵀ`, where `v₁ = (cos, sin)` belongs to the larger
    /// eigenvalue.
    pub fn compose(&self, g: [f64; 2]) -> [f64; 3] {
        let (c, s) = (self.cos, self.sin);
        [
            g[0] * s * s + g[1] * c * c,
            (g[1] - g[0]) * c * s,
            g[0] * c * c + g[1] * s * s,
        ]
    }
}

/// `F(h)` and the packed gradient `(F¹¹, F¹², F²²)` at a point.
pub fn quotient_packed(n: usize, k: usize, h: [f64; 3]) -> Result<(f64, [f64; 3]), AlgebraError> {
    let eig = eigen_packed(n, h);
    if n == 1 {
        let (f, g) = quotient_with_gradient(&[h[0]], k)?;
        return Ok((f, [g[0], 0.0, 0.0]));
    }
    let (f, g) = quotient_with_gradient(&eig.values, k)?;
    Ok((f, eig.compose([g[0], g[1]])))
}

/// Eigenvalues of `h` relative to the metric `g` (roots of `det(h − κg) = 0`),
/// ascending. For `n = 1` this is `h₁₁/g₁₁`.
pub fn relative_eigenvalues(n: usize, h: [f64; 3], g: [f64; 3]) -> [f64; 2] {
    if n == 1 {
        let v = h[0] / g[0];
        return [v, v];
    }
    // reduce to a standard problem with the Cholesky factor g = L Lᵀ
    let l11 = g[0].sqrt();
    let l21 = g[1] / l11;
    let l22 = (g[2] - l21 * l21).sqrt();
    // rows of L⁻¹
    let a = [1.0 / l11, 0.0];
    let b = [-l21 / (l11 * l22), 1.0 / l22];
    let quad = |r: [f64; 2], s: [f64; 2]| {
        r[0] * (h[0] * s[0] + h[1] * s[1]) + r[1] * (h[1] * s[0] + h[2] * s[1])
    };
    eigen_packed(2, [quad(a, a), quad(a, b), quad(b, b)]).values
}
