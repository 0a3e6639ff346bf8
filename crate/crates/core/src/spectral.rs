//! Eigenbasis of `φ'' + λφ = 0`, `φ'(0) = 0`, `γ₁φ(L) + γ₂φ'(L) = 0`.
//!
//! Eigenfunctions are `φ_n(x) = c_n cos(s_n x)` with `s_n = √λ_n` the n-th
//! nonnegative root of `γ₁ cos(sL) − γ₂ s sin(sL)`. Roots are isolated one
//! per interval `(kπ/L, (k+1)π/L)` and refined by bisection; the pure
//! Dirichlet and pure Neumann cases use their closed forms.
//!
//! Mode indices `n` are 1-based throughout, matching `λ_1 < λ_2 < …`.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ShapeFunction;
use crate::scalar::Real;

/// One eigenpair: `λ = s²`, `φ(x) = c cos(s x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenpair<T> {
    pub lambda: T,
    pub s: T,
    pub c: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralBasis<T> {
    pub length: T,
    pub gamma1: T,
    pub gamma2: T,
    pub eigen: Vec<Eigenpair<T>>,
}

/// Absolute tolerance of the adaptive quadrature used for general integrands.
pub const QUADRATURE_TOL: f64 = 1e-10;

fn characteristic<T: Real>(s: T, length: T, gamma1: T, gamma2: T) -> T {
    gamma1 * (s * length).cos() - gamma2 * s * (s * length).sin()
}

/// The n-th (1-based) nonnegative root `s_n` of the characteristic function.
pub fn eigen_root<T: Real>(length: T, gamma1: T, gamma2: T, n: usize) -> Result<T> {
    if n == 0 {
        return Err(Error::InvalidParameter("mode indices start at 1".into()));
    }
    let k = T::from_count(n - 1);
    let step = T::pi() / length;
    if gamma1 == T::zero() {
        return Ok(k * step);
    }
    if gamma2 == T::zero() {
        return Ok((k + T::lit(0.5)) * step);
    }
    let mut lo = k * step;
    let mut hi = lo + step;
    let f = |s: T| characteristic(s, length, gamma1, gamma2);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == T::zero() {
        return Ok(lo);
    }
    if flo * fhi > T::zero() {
        return Err(Error::RootBracketingFailure { n });
    }
    let rel = T::tol(1e-14);
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        let fm = f(mid);
        if fm == T::zero() {
            return Ok(mid);
        }
        if (fm > T::zero()) == (flo > T::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo <= rel * mid {
            break;
        }
    }
    Ok((lo + hi) * T::lit(0.5))
}

fn eigenpair<T: Real>(length: T, gamma1: T, gamma2: T, n: usize) -> Result<Eigenpair<T>> {
    let s = eigen_root(length, gamma1, gamma2, n)?;
    let norm_sq = if s == T::zero() {
        length
    } else {
        length * T::lit(0.5) + (T::lit(2.0) * s * length).sin() / (T::lit(4.0) * s)
    };
    Ok(Eigenpair { lambda: s * s, s, c: T::one() / norm_sq.sqrt() })
}

/// First `count` eigenpairs.
pub fn build_basis<T: Real>(length: T, gamma1: T, gamma2: T, count: usize) -> Result<SpectralBasis<T>> {
    if count == 0 {
        return Err(Error::InvalidParameter("basis needs at least one mode".into()));
    }
    if !(length > T::zero()) {
        return Err(Error::InvalidParameter("domain length must be positive".into()));
    }
    if gamma1 == T::zero() && gamma2 == T::zero() {
        return Err(Error::DegenerateBoundary);
    }
    let eigen = (1..=count).map(|n| eigenpair(length, gamma1, gamma2, n)).collect::<Result<Vec<_>>>()?;
    Ok(SpectralBasis { length, gamma1, gamma2, eigen })
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T) -> Result<T> {
    fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
        (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<T: Real, F: Fn(T) -> T>(
        f: &F,
        a: T,
        b: T,
        fa: T,
        fm: T,
        fb: T,
        whole: T,
        tol: T,
        depth: u32,
    ) -> std::result::Result<T, ()> {
        let half = T::lit(0.5);
        let m = (a + b) * half;
        let lm = (a + m) * half;
        let rm = (m + b) * half;
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        let delta = left + right - whole;
        if delta.abs() <= T::lit(15.0) * tol {
            return Ok(left + right + delta / T::lit(15.0));
        }
        if depth == 0 {
            return Err(());
        }
        Ok(recurse(f, a, m, fa, flm, fm, left, tol * half, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, tol * half, depth - 1)?)
    }
    if a == b {
        return Ok(T::zero());
    }
    // Split once up front so that integrands vanishing at the three initial
    // nodes are not mistaken for zero.
    let pieces = 8;
    let h = (b - a) / T::from_count(pieces);
    let mut total = T::zero();
    for p in 0..pieces {
        let lo = a + h * T::from_count(p);
        let hi = if p + 1 == pieces { b } else { lo + h };
        let (fa, fm, fb) = (f(lo), f((lo + hi) * T::lit(0.5)), f(hi));
        let whole = simpson(lo, hi, fa, fm, fb);
        total += recurse(&f, lo, hi, fa, fm, fb, whole, tol / T::from_count(pieces), 48)
            .map_err(|_| Error::QuadratureNonConvergence { a: lo.as_f64(), b: hi.as_f64() })?;
    }
    Ok(total)
}

/// `∫_a^b x^p cos(s x) dx` in closed form.
fn monomial_cos_integral<T: Real>(p: usize, s: T, a: T, b: T) -> T {
    if s == T::zero() {
        let q = T::from_count(p + 1);
        return (b.powi(p as i32 + 1) - a.powi(p as i32 + 1)) / q;
    }
    // Antiderivative Σ_k p!/(p−k)! x^{p−k} s^{−(k+1)} sin(s x + kπ/2).
    let antiderivative = |x: T| {
        let (sn, cs) = (s * x).sin_cos();
        let phase = [sn, cs, -sn, -cs];
        let mut falling = T::one();
        let mut spow = s;
        let mut acc = T::zero();
        for k in 0..=p {
            acc += falling * x.powi((p - k) as i32) / spow * phase[k % 4];
            falling *= T::from_count(p - k);
            spow *= s;
        }
        acc
    };
    antiderivative(b) - antiderivative(a)
}

impl<T: Real> SpectralBasis<T> {
    pub fn len(&self) -> usize {
        self.eigen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigen.is_empty()
    }

    /// Stored eigenpair for mode `n` (1-based).
    pub fn pair(&self, n: usize) -> &Eigenpair<T> {
        &self.eigen[n - 1]
    }

    pub fn lambda(&self, n: usize) -> T {
        self.pair(n).lambda
    }

    /// `λ_n`, computed on demand when `n` exceeds the stored modes.
    pub fn lambda_at(&self, n: usize) -> Result<T> {
        if n >= 1 && n <= self.len() {
            Ok(self.lambda(n))
        } else {
            Ok(eigenpair(self.length, self.gamma1, self.gamma2, n)?.lambda)
        }
    }

    /// Returns a basis holding at least `count` modes.
    pub fn extended(&self, count: usize) -> Result<SpectralBasis<T>> {
        let mut out = self.clone();
        for n in self.len() + 1..=count {
            out.eigen.push(eigenpair(self.length, self.gamma1, self.gamma2, n)?);
        }
        Ok(out)
    }

    pub fn phi(&self, n: usize, x: T) -> T {
        let e = self.pair(n);
        e.c * (e.s * x).cos()
    }

    pub fn dphi(&self, n: usize, x: T) -> T {
        let e = self.pair(n);
        -e.c * e.s * (e.s * x).sin()
    }

    /// `⟨f, φ_n⟩` by adaptive quadrature.
    pub fn project_fn<F: Fn(T) -> T>(&self, f: F, n: usize) -> Result<T> {
        adaptive_simpson(|x| f(x) * self.phi(n, x), T::zero(), self.length, T::tol(QUADRATURE_TOL))
    }

    /// `b_{j,n} = ⟨b_j, φ_n⟩`; exact for indicator and polynomial shapes.
    pub fn project_shape(&self, shape: &ShapeFunction<T>, n: usize) -> Result<T> {
        let e = *self.pair(n);
        match shape {
            ShapeFunction::Indicator { a, b } => Ok(e.c * monomial_cos_integral(0, e.s, *a, *b)),
            ShapeFunction::Polynomial { coefficients } => Ok(e.c
                * coefficients
                    .iter()
                    .enumerate()
                    .map(|(p, &cp)| cp * monomial_cos_integral(p, e.s, T::zero(), self.length))
                    .sum::<T>()),
            ShapeFunction::Samples { grid, .. } => {
                let tol = T::tol(QUADRATURE_TOL) / T::from_count(grid.len());
                grid.windows(2).try_fold(T::zero(), |acc, w| {
                    let piece = adaptive_simpson(|x| shape.eval(x) * self.phi(n, x), w[0], w[1], tol)?;
                    Ok(acc + piece)
                })
            }
        }
    }

    /// `ℬ_n = (b_{1,n}, …, b_{N,n})`.
    pub fn input_projection_row(&self, shapes: &[ShapeFunction<T>], n: usize) -> Result<RowDVector<T>> {
        let entries = shapes.iter().map(|b| self.project_shape(b, n)).collect::<Result<Vec<_>>>()?;
        Ok(RowDVector::from_vec(entries))
    }

    /// Partial sums `Σ_n z_n φ_n(x)`; returns an `m × grid.len()` array.
    pub fn expand(&self, coeffs: &[DVector<T>], grid: &[T]) -> Result<DMatrix<T>> {
        if coeffs.len() > self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} modal coefficients but only {} basis functions",
                coeffs.len(),
                self.len()
            )));
        }
        let m = coeffs.first().map_or(0, |c| c.len());
        let mut out = DMatrix::<T>::zeros(m, grid.len());
        for (col, &x) in grid.iter().enumerate() {
            for (idx, z) in coeffs.iter().enumerate() {
                let phi = self.phi(idx + 1, x);
                for i in 0..m {
                    out[(i, col)] += z[i] * phi;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn dirichlet_pi() -> SpectralBasis<f64> {
        build_basis(PI, 1.0, 0.0, 10).unwrap()
    }

    #[test]
    fn dirichlet_eigenvalues_and_functions() {
        let basis = build_basis(PI, 1.0, 0.0, 3).unwrap();
        for (n, want) in [(1, 0.25), (2, 2.25), (3, 6.25)] {
            assert_relative_eq!(basis.lambda(n), want, max_relative = 1e-12);
            assert_relative_eq!(basis.pair(n).c, 2f64.sqrt() / PI.sqrt(), max_relative = 1e-12);
        }
        // φ_n = √(2/π) cos((n−½)x) on [0, π]; unit norm.
        assert_relative_eq!(basis.phi(1, 0.0), (2.0 / PI).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn neumann_has_constant_mode() {
        let basis = build_basis(1.0, 0.0, 1.0, 2).unwrap();
        assert_eq!(basis.lambda(1), 0.0);
        assert_relative_eq!(basis.phi(1, 0.3), 1.0, epsilon = 1e-15);
        assert_relative_eq!(basis.lambda(2), PI * PI, max_relative = 1e-14);
    }

    #[test]
    fn robin_root_matches_brute_force_scan() {
        // Independent oracle: fine sign-change scan of cos(sπ) − s sin(sπ), then bisection.
        let f = |s: f64| (s * PI).cos() - s * (s * PI).sin();
        let mut s = 1e-4;
        while f(s) * f(s + 1e-4) > 0.0 {
            s += 1e-4;
        }
        let (mut lo, mut hi) = (s, s + 1e-4);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let basis = build_basis(PI, 1.0, 1.0, 1).unwrap();
        assert_relative_eq!(basis.pair(1).s, 0.5 * (lo + hi), max_relative = 1e-12);
    }

    #[test]
    fn boundary_residuals_and_monotonicity() {
        for (g1, g2) in [(1.0f64, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 0.3), (0.1, 5.0)] {
            let basis = build_basis(2.0, g1, g2, 12).unwrap();
            for n in 1..=12 {
                assert!(basis.dphi(n, 0.0).abs() <= 1e-10);
                let r = g1 * basis.phi(n, 2.0) + g2 * basis.dphi(n, 2.0);
                assert!(r.abs() <= 1e-10, "residual {r} for ({g1},{g2}) n={n}");
                if n > 1 {
                    assert!(basis.lambda(n) > basis.lambda(n - 1));
                }
            }
            assert!(basis.lambda(1) >= 0.0);
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        for (g1, g2) in [(1.0, 0.0), (1.0, 1.0), (0.0, 1.0)] {
            let basis = build_basis(PI, g1, g2, 10).unwrap();
            for i in 1..=10 {
                for j in i..=10 {
                    let g = basis.project_fn(|x| basis.phi(i, x), j).unwrap();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g - want).abs() <= 1e-8, "<phi_{i}, phi_{j}> = {g}");
                }
            }
        }
    }

    #[test]
    fn projections() {
        let basis = dirichlet_pi();
        let p = basis.project_fn(|x| basis.phi(2, x), 2).unwrap();
        assert!((p - 1.0).abs() < 1e-8);

        // ∫_{0.1}^{0.2} √(2/π) cos(x/2) dx = 2√(2/π)(sin 0.1 − sin 0.05)
        let ind = ShapeFunction::Indicator { a: 0.1, b: 0.2 };
        let want = 2.0 * (2.0 / PI).sqrt() * (0.1f64.sin() - 0.05f64.sin());
        assert_relative_eq!(basis.project_shape(&ind, 1).unwrap(), want, max_relative = 1e-13);

        // ∫₀^π √(2/π) cos(x/2) dx = 2√(2/π)
        let one = ShapeFunction::Polynomial { coefficients: vec![1.0] };
        assert_relative_eq!(basis.project_shape(&one, 1).unwrap(), 2.0 * (2.0 / PI).sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn polynomial_projection_matches_quadrature() {
        let basis = build_basis(2.0, 1.0, 0.5, 6).unwrap();
        let poly = ShapeFunction::Polynomial { coefficients: vec![0.5f64, -1.0, 0.25, 0.125] };
        for n in 1..=6 {
            let exact = basis.project_shape(&poly, n).unwrap();
            let quad = basis.project_fn(|x| poly.eval(x), n).unwrap();
            assert!((exact - quad).abs() < 1e-9);
        }
    }

    #[test]
    fn sampled_shape_projection() {
        let basis = dirichlet_pi();
        let grid: Vec<f64> = (0..=200).map(|i| PI * i as f64 / 200.0).collect();
        let values: Vec<f64> = grid.iter().map(|&x| basis.phi(1, x)).collect();
        let shape = ShapeFunction::Samples { grid, values };
        assert!((basis.project_shape(&shape, 1).unwrap() - 1.0).abs() < 1e-4);
        assert!(basis.project_shape(&shape, 2).unwrap().abs() < 1e-4);
    }

    #[test]
    fn input_projection_rows() {
        let basis = dirichlet_pi();
        let shapes: Vec<_> =
            (1..=3).map(|j| ShapeFunction::Indicator { a: 0.1 * j as f64, b: 0.1 * j as f64 + 0.1 }).collect();
        let row = basis.input_projection_row(&shapes, 1).unwrap();
        let want = 2.0 * (2.0 / PI).sqrt() * (0.1f64.sin() - 0.05f64.sin());
        assert_relative_eq!(row[0], want, max_relative = 1e-12);
        assert_eq!(row.len(), 3);

        let grid: Vec<f64> = (0..=400).map(|i| PI * i as f64 / 400.0).collect();
        let phi1 = ShapeFunction::Samples { values: grid.iter().map(|&x| basis.phi(1, x)).collect(), grid };
        assert!((basis.input_projection_row(std::slice::from_ref(&phi1), 1).unwrap()[0] - 1.0).abs() < 1e-4);
        assert!(basis.input_projection_row(&[phi1], 2).unwrap()[0].abs() < 1e-4);
    }

    #[test]
    fn expand_examples() {
        let basis = dirichlet_pi();
        let coeffs = vec![DVector::from_column_slice(&[1.0, 0.0, 0.0])];
        let field = basis.expand(&coeffs, &[0.0]).unwrap();
        assert_relative_eq!(field[(0, 0)], basis.phi(1, 0.0));
        assert_eq!(field[(1, 0)], 0.0);

        let zeros = vec![DVector::<f64>::zeros(3); 4];
        let grid = [0.0, 0.5, 1.0, PI];
        assert!(basis.expand(&zeros, &grid).unwrap().iter().all(|&v| v == 0.0));

        // Band-limited round trip.
        let f = |x: f64| 0.3 * basis.phi(1, x) - 1.2 * basis.phi(4, x) + 0.7 * basis.phi(7, x);
        let coeffs: Vec<_> = (1..=10).map(|n| DVector::from_element(1, basis.project_fn(f, n).unwrap())).collect();
        let grid: Vec<f64> = (0..=20).map(|i| PI * i as f64 / 20.0).collect();
        let field = basis.expand(&coeffs, &grid).unwrap();
        for (k, &x) in grid.iter().enumerate() {
            assert!((field[(0, k)] - f(x)).abs() < 1e-6);
        }

        assert!(basis.expand(&vec![DVector::zeros(1); 11], &grid).is_err());
    }

    #[test]
    fn extension_and_on_demand_eigenvalues() {
        let basis = build_basis(PI, 1.0, 1.0, 2).unwrap();
        let big = basis.extended(6).unwrap();
        assert_eq!(big.len(), 6);
        assert_eq!(big.lambda(6), basis.lambda_at(6).unwrap());
    }

    #[test]
    fn single_precision_basis() {
        let basis = build_basis(std::f32::consts::PI, 1.0f32, 0.0, 4).unwrap();
        assert!((basis.lambda(4) - 12.25).abs() < 1e-4);
    }
}
