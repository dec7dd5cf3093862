//! Named data functions on the sphere.
//!
//! Syntax is `name:param,param,...`:
//!
//! - `constant:c`
//! - `harmonic_even:c,eps,axis`: `c + eps ⟨x,axis⟩²`
//! - `harmonic_odd:c,eps,axis`: `c + eps ⟨x,axis⟩`, needs `c > |eps|`
//! - `band:c,eps,m`: `c + eps Re((x₁ + i x₂)^m)`, i.e. `c + eps cos(mφ) sin^m θ`, even `m`
//! - `zpoly:c0,c1,...`: `Σ c_i t^i` with `t` the last ambient coordinate
//!
//! `axis` is `x`, `y`, `z` or three numbers `a;b;c` (normalized).

use std::fmt;
use std::sync::Arc;

use sigmak_core::grid::{ScalarField, SphereGrid};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PresetError {
    #[error("unknown preset '{0}' (expected constant, harmonic_even, harmonic_odd, band or zpoly)")]
    Unknown(String),
    #[error("preset '{name}': {message}")]
    Params { name: String, message: String },
    #[error("preset '{name}' is not strictly positive on the grid (min {min})")]
    NonPositive { name: String, min: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    Constant(f64),
    HarmonicEven { c: f64, eps: f64, axis: [f64; 3] },
    HarmonicOdd { c: f64, eps: f64, axis: [f64; 3] },
    Band { c: f64, eps: f64, m: u32 },
    ZPoly(Vec<f64>),
}

fn params_error(name: &str, message: impl Into<String>) -> PresetError {
    PresetError::Params { name: name.into(), message: message.into() }
}

fn parse_axis(name: &str, s: &str) -> Result<[f64; 3], PresetError> {
    let a = match s {
        "x" => [1.0, 0.0, 0.0],
        "y" => [0.0, 1.0, 0.0],
        "z" => [0.0, 0.0, 1.0],
        _ => {
            let parts: Vec<f64> = s
                .split(';')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| params_error(name, format!("bad axis '{s}'")))?;
            if parts.len() != 3 {
                return Err(params_error(name, format!("axis needs three components, got '{s}'")));
            }
            [parts[0], parts[1], parts[2]]
        }
    };
    let norm = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(params_error(name, "axis must be a nonzero vector"));
    }
    Ok([a[0] / norm, a[1] / norm, a[2] / norm])
}

fn axis_string(a: &[f64; 3]) -> String {
    format!("{};{};{}", a[0], a[1], a[2])
}

impl std::str::FromStr for Preset {
    type Err = PresetError;

    fn from_str(text: &str) -> Result<Self, PresetError> {
        let (name, rest) = text.trim().split_once(':').unwrap_or((text.trim(), ""));
        let fields: Vec<&str> = if rest.trim().is_empty() {
            Vec::new()
        } else {
            rest.split(',').map(str::trim).collect()
        };
        let number = |i: usize| -> Result<f64, PresetError> {
            let s = fields.get(i).ok_or_else(|| params_error(name, format!("missing parameter {}", i + 1)))?;
            let v: f64 = s.parse().map_err(|_| params_error(name, format!("bad number '{s}'")))?;
            if !v.is_finite() {
                return Err(params_error(name, format!("parameter {} is not finite", i + 1)));
            }
            Ok(v)
        };
        let arity = |n: usize| -> Result<(), PresetError> {
            if fields.len() != n {
                return Err(params_error(name, format!("expected {n} parameters, got {}", fields.len())));
            }
            Ok(())
        };
        match name {
            "constant" => {
                arity(1)?;
                Ok(Preset::Constant(number(0)?))
            }
            "harmonic_even" | "harmonic_odd" => {
                arity(3)?;
                let (c, eps, axis) = (number(0)?, number(1)?, parse_axis(name, fields[2])?);
                if name == "harmonic_even" {
                    Ok(Preset::HarmonicEven { c, eps, axis })
                } else {
                    if !(c > eps.abs()) {
                        return Err(params_error(name, format!("needs c > |eps|, got c={c}, eps={eps}")));
                    }
                    Ok(Preset::HarmonicOdd { c, eps, axis })
                }
            }
            "band" => {
                arity(3)?;
                let m: u32 = fields[2].parse().map_err(|_| params_error(name, format!("bad order '{}'", fields[2])))?;
                if m == 0 || m % 2 != 0 {
                    return Err(params_error(name, format!("order m must be even and positive, got {m}")));
                }
                Ok(Preset::Band { c: number(0)?, eps: number(1)?, m })
            }
            "zpoly" => {
                if fields.is_empty() {
                    return Err(params_error(name, "needs at least one coefficient"));
                }
                Ok(Preset::ZPoly((0..fields.len()).map(number).collect::<Result<_, _>>()?))
            }
            _ => Err(PresetError::Unknown(name.to_string())),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Constant(c) => write!(f, "constant:{c}"),
            Preset::HarmonicEven { c, eps, axis } => write!(f, "harmonic_even:{c},{eps},{}", axis_string(axis)),
            Preset::HarmonicOdd { c, eps, axis } => write!(f, "harmonic_odd:{c},{eps},{}", axis_string(axis)),
            Preset::Band { c, eps, m } => write!(f, "band:{c},{eps},{m}"),
            Preset::ZPoly(cs) => {
                let parts: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
                write!(f, "zpoly:{}", parts.join(","))
            }
        }
    }
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Constant(_) => "constant",
            Preset::HarmonicEven { .. } => "harmonic_even",
            Preset::HarmonicOdd { .. } => "harmonic_odd",
            Preset::Band { .. } => "band",
            Preset::ZPoly(_) => "zpoly",
        }
    }

    /// Whether the function is even for every choice of parameters.
    pub fn is_even(&self) -> bool {
        match self {
            Preset::HarmonicOdd { eps, .. } => *eps == 0.0,
            Preset::ZPoly(cs) => cs.iter().skip(1).step_by(2).all(|&c| c == 0.0),
            _ => true,
        }
    }

    pub fn eval(&self, x: &[f64; 3], dim: usize) -> f64 {
        let dot = |a: &[f64; 3]| a[0] * x[0] + a[1] * x[1] + a[2] * x[2];
        match self {
            Preset::Constant(c) => *c,
            Preset::HarmonicEven { c, eps, axis } => c + eps * dot(axis).powi(2),
            Preset::HarmonicOdd { c, eps, axis } => c + eps * dot(axis),
            Preset::Band { c, eps, m } => {
                let (mut re, mut im) = (1.0, 0.0);
                for _ in 0..*m {
                    (re, im) = (re * x[0] - im * x[1], re * x[1] + im * x[0]);
                }
                c + eps * re
            }
            Preset::ZPoly(cs) => {
                let t = x[dim];
                cs.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
        }
    }
}

/// Samples the preset on the grid and checks strict positivity.
pub fn preset_function(preset: &Preset, grid: &Arc<SphereGrid>) -> Result<ScalarField, PresetError> {
    let dim = grid.dim();
    let field = ScalarField::from_fn(grid.clone(), |x| preset.eval(x, dim));
    let min = field.min();
    if !(min > 0.0) {
        return Err(PresetError::NonPositive { name: preset.name().into(), min });
    }
    Ok(field)
}
