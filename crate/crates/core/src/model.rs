//! Plant description and validation.
//!
//! A plant is a cascade of `m` one-dimensional heat equations on `[0, L]`,
//! Neumann at `x = 0` and Robin/Dirichlet at `x = L`, coupled through an
//! upper-Hessenberg matrix `Q` and actuated only in the first equation
//! through the shape functions `b_j(x)`.

use std::ops::Deref;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Spatial distribution of one scalar actuator on `[0, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum ShapeFunction<T> {
    /// `1` on `[a, b]`, `0` elsewhere.
    Indicator { a: T, b: T },
    /// `Σ_k c_k x^k`, coefficients in ascending powers.
    Polynomial { coefficients: Vec<T> },
    /// Piecewise-linear interpolant of samples on a strictly increasing grid.
    Samples { grid: Vec<T>, values: Vec<T> },
}

impl<T: Real> ShapeFunction<T> {
    pub fn eval(&self, x: T) -> T {
        match self {
            ShapeFunction::Indicator { a, b } => {
                if x >= *a && x <= *b {
                    T::one()
                } else {
                    T::zero()
                }
            }
            ShapeFunction::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
            }
            ShapeFunction::Samples { grid, values } => {
                if x <= grid[0] {
                    return values[0];
                }
                let last = grid.len() - 1;
                if x >= grid[last] {
                    return values[last];
                }
                let hi = grid.partition_point(|&g| g <= x).min(last);
                let lo = hi - 1;
                let w = (x - grid[lo]) / (grid[hi] - grid[lo]);
                values[lo] + (values[hi] - values[lo]) * w
            }
        }
    }

    /// `∫₀ᴸ b(x)² dx`, exact for every kind.
    pub fn norm_sq(&self, length: T) -> T {
        match self {
            ShapeFunction::Indicator { a, b } => *b - *a,
            ShapeFunction::Polynomial { coefficients } => {
                let mut total = T::zero();
                for (i, &ci) in coefficients.iter().enumerate() {
                    for (j, &cj) in coefficients.iter().enumerate() {
                        let p = i + j + 1;
                        total += ci * cj * length.powi(p as i32) / T::from_count(p);
                    }
                }
                total
            }
            ShapeFunction::Samples { grid, values } => grid
                .windows(2)
                .zip(values.windows(2))
                .map(|(g, v)| (g[1] - g[0]) * (v[0] * v[0] + v[0] * v[1] + v[1] * v[1]) / T::lit(3.0))
                .sum(),
        }
    }

    fn check(&self, length: T) -> std::result::Result<(), String> {
        let slack = T::tol(1e-12) * length.max(T::one());
        match self {
            ShapeFunction::Indicator { a, b } => {
                if !(a.is_finite() && b.is_finite()) {
                    return Err("indicator bounds must be finite".into());
                }
                if *a < T::zero() || *b > length + slack || a >= b {
                    return Err(format!("indicator needs 0 <= a < b <= L, got [{a}, {b}]"));
                }
            }
            ShapeFunction::Polynomial { coefficients } => {
                if coefficients.is_empty() {
                    return Err("polynomial has no coefficients".into());
                }
                if coefficients.iter().any(|c| !c.is_finite()) {
                    return Err("polynomial coefficients must be finite".into());
                }
            }
            ShapeFunction::Samples { grid, values } => {
                if grid.len() < 2 || grid.len() != values.len() {
                    return Err("samples need at least two points and equal-length grid/values".into());
                }
                if grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err("sample grid must be strictly increasing".into());
                }
                if grid[0].abs() > slack || (grid[grid.len() - 1] - length).abs() > slack {
                    return Err("sample grid must cover [0, L] exactly".into());
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err("sample values must be finite".into());
                }
            }
        }
        Ok(())
    }
}

/// Raw plant data as supplied by the user.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec<T> {
    /// Diffusion coefficients `d_1..d_m`.
    pub diffusion: Vec<T>,
    /// Coupling matrix `Q` (m × m).
    pub coupling: DMatrix<T>,
    /// Domain length `L`.
    pub length: T,
    pub gamma1: T,
    pub gamma2: T,
    pub shapes: Vec<ShapeFunction<T>>,
}

impl<T: Real> PlantSpec<T> {
    /// Number of coupled equations.
    pub fn m(&self) -> usize {
        self.diffusion.len()
    }

    /// `D` as a diagonal matrix.
    pub fn diffusion_matrix(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diffusion))
    }

    /// Last diffusion coefficient `d_m`.
    pub fn d_last(&self) -> T {
        self.diffusion[self.m() - 1]
    }
}

/// Ordering indices of the diffusion coefficients.
///
/// `sigma` is the first (1-based) index from which all trailing coefficients
/// coincide; `sigma_bar` is the polynomial degree of the modal transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffusionIndices {
    pub sigma: usize,
    pub sigma_bar: usize,
}

/// Computes `σ` and `σ̄ = max(0, min(2σ − 3, 2m − 4))`.
///
/// With `tol = None` coefficients are compared exactly; otherwise `d_i` and
/// `d_m` are grouped when `|d_i − d_m| ≤ tol · max(|d_i|, |d_m|)`.
pub fn diffusion_indices<T: Real>(d: &[T], tol: Option<T>) -> DiffusionIndices {
    let m = d.len();
    let last = d[m - 1];
    let same = |x: T| match tol {
        None => x == last,
        Some(eps) => (x - last).abs() <= eps * x.abs().max(last.abs()),
    };
    let trailing = d.iter().rev().take_while(|&&x| same(x)).count();
    let sigma = m - trailing + 1;
    let sigma_bar = (2 * sigma as i64 - 3).min(2 * m as i64 - 4).max(0) as usize;
    DiffusionIndices { sigma, sigma_bar }
}

/// A plant whose invariants have been checked.
#[derive(Debug, Clone)]
pub struct ValidatedPlant<T> {
    spec: PlantSpec<T>,
    indices: DiffusionIndices,
}

impl<T> ValidatedPlant<T> {
    pub fn spec(&self) -> &PlantSpec<T> {
        &self.spec
    }

    pub fn indices(&self) -> DiffusionIndices {
        self.indices
    }

    pub fn into_spec(self) -> PlantSpec<T> {
        self.spec
    }
}

impl<T> Deref for ValidatedPlant<T> {
    type Target = PlantSpec<T>;

    fn deref(&self) -> &PlantSpec<T> {
        &self.spec
    }
}

/// Checks every plant invariant and computes the diffusion indices.
pub fn validate_plant<T: Real>(spec: PlantSpec<T>, diffusion_tol: Option<T>) -> Result<ValidatedPlant<T>> {
    let m = spec.m();
    if m == 0 {
        return Err(Error::DimensionMismatch("plant has no equations".into()));
    }
    if spec.coupling.nrows() != m || spec.coupling.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "Q is {}x{} but D has {m} entries",
            spec.coupling.nrows(),
            spec.coupling.ncols()
        )));
    }
    for (index, &d) in spec.diffusion.iter().enumerate() {
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::NonPositiveDiffusion { index, value: d.as_f64() });
        }
    }
    if spec.coupling.iter().any(|q| !q.is_finite()) {
        return Err(Error::InvalidParameter("Q has non-finite entries".into()));
    }
    if !(spec.length > T::zero()) || !spec.length.is_finite() {
        return Err(Error::InvalidParameter(format!("domain length must be positive, got {}", spec.length)));
    }
    if !spec.gamma1.is_finite() || !spec.gamma2.is_finite() {
        return Err(Error::InvalidParameter("boundary coefficients must be finite".into()));
    }
    if spec.gamma1 == T::zero() && spec.gamma2 == T::zero() {
        return Err(Error::DegenerateBoundary);
    }
    if spec.gamma1 * spec.gamma2 < T::zero() {
        return Err(Error::NegativeEigenvalueBoundary { gamma1: spec.gamma1.as_f64(), gamma2: spec.gamma2.as_f64() });
    }
    for col in 0..m {
        for row in col + 2..m {
            let v = spec.coupling[(row, col)];
            if v != T::zero() {
                return Err(Error::CascadeViolation { row, col, value: v.as_f64() });
            }
        }
    }
    for index in 0..m.saturating_sub(1) {
        if spec.coupling[(index + 1, index)] == T::zero() {
            return Err(Error::ControllabilityViolation { index });
        }
    }
    for (index, shape) in spec.shapes.iter().enumerate() {
        shape.check(spec.length).map_err(|reason| Error::BadShape { index, reason })?;
    }
    let indices = diffusion_indices(&spec.diffusion, diffusion_tol);
    Ok(ValidatedPlant { spec, indices })
}
