//! Dense linear-algebra kernels used by the synthesis and simulation layers.
//!
//! Everything here works on `nalgebra` dynamic matrices and is generic over
//! [`Real`]. Eigen/Schur/SVD factorizations come from `nalgebra`; the
//! Lyapunov, pole-placement and Riccati solvers are built on top of them.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Symmetric part `(A + Aᵀ) / 2`.
pub fn sym<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    (a + a.transpose()) * T::lit(0.5)
}

/// Largest eigenvalue of the symmetric part of `a`.
pub fn max_sym_eigenvalue<T: Real>(a: &DMatrix<T>) -> T {
    sym(a).symmetric_eigenvalues().iter().copied().fold(T::min_value().unwrap(), |acc, x| if x > acc { x } else { acc })
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_sym_eigenvalue<T: Real>(a: &DMatrix<T>) -> T {
    sym(a).symmetric_eigenvalues().iter().copied().fold(T::max_value().unwrap(), |acc, x| if x < acc { x } else { acc })
}

/// Maximum real part over the eigenvalues of `a`.
pub fn spectral_abscissa<T: Real>(a: &DMatrix<T>) -> T {
    if a.is_empty() {
        return T::min_value().unwrap();
    }
    a.complex_eigenvalues().iter().map(|z| z.re).fold(T::min_value().unwrap(), |acc, x| if x > acc { x } else { acc })
}

/// Induced 2-norm (largest singular value). Zero for empty matrices.
pub fn spectral_norm<T: Real>(a: &DMatrix<T>) -> T {
    if a.is_empty() {
        return T::zero();
    }
    a.singular_values().max()
}

/// Ratio of extreme singular values; `+inf` for a singular matrix.
pub fn condition_number<T: Real>(a: &DMatrix<T>) -> T {
    if a.is_empty() {
        return T::one();
    }
    let sv = a.singular_values();
    let smin = sv.min();
    if smin <= T::zero() {
        return T::max_value().unwrap();
    }
    sv.max() / smin
}

/// Largest absolute entry.
pub fn max_abs<T: Real>(a: &DMatrix<T>) -> T {
    a.iter().fold(T::zero(), |acc, x| if x.abs() > acc { x.abs() } else { acc })
}

/// Largest absolute entry together with its (row, column) position.
pub fn argmax_abs<T: Real>(a: &DMatrix<T>) -> (usize, usize, T) {
    let mut best = (0, 0, T::zero());
    for c in 0..a.ncols() {
        for r in 0..a.nrows() {
            let v = a[(r, c)].abs();
            if v > best.2 {
                best = (r, c, v);
            }
        }
    }
    best
}

/// Monic polynomial coefficients `[1, c1, ..., cn]` (descending powers)
/// with the given real roots.
pub fn poly_from_roots<T: Real>(roots: &[T]) -> Vec<T> {
    let mut coeffs = vec![T::one()];
    for &r in roots {
        let mut next = vec![T::zero(); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        coeffs = next;
    }
    coeffs
}

/// Evaluates a polynomial (descending coefficients) at a square matrix by Horner's rule.
pub fn poly_matrix<T: Real>(coeffs: &[T], a: &DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    let mut acc = DMatrix::<T>::zeros(n, n);
    for &c in coeffs {
        acc = &acc * a + DMatrix::<T>::identity(n, n) * c;
    }
    acc
}

/// Single-input pole placement by Ackermann's formula.
///
/// Returns the row gain `k` such that `a + b k` has the requested real
/// eigenvalues.
pub fn place_single_input<T: Real>(a: &DMatrix<T>, b: &DVector<T>, poles: &[T]) -> Result<RowDVector<T>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n || poles.len() != n {
        return Err(Error::DimensionMismatch(format!("pole placement needs square A, matching b and {n} poles")));
    }
    let mut ctrb = DMatrix::<T>::zeros(n, n);
    let mut col = b.clone();
    for j in 0..n {
        ctrb.set_column(j, &col);
        col = a * &col;
    }
    // w solves ctrbᵀ w = e_n, i.e. wᵀ is the last row of ctrb⁻¹.
    let mut e_last = DVector::<T>::zeros(n);
    e_last[n - 1] = T::one();
    let w = ctrb.transpose().lu().solve(&e_last).ok_or(Error::PolePlacementSingular)?;
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::PolePlacementSingular);
    }
    let p_of_a = poly_matrix(&poly_from_roots(poles), a);
    Ok(-(w.transpose() * p_of_a))
}

/// Dimension at or below which [`solve_lyapunov`] uses the Kronecker system.
pub const KRONECKER_LIMIT: usize = 8;

/// Solves `aᵀ X + X a = c`.
///
/// Small systems go through the `n² × n²` Kronecker formulation; larger ones
/// use Bartels–Stewart on the real Schur form of `a`.
pub fn solve_lyapunov<T: Real>(a: &DMatrix<T>, c: &DMatrix<T>) -> Result<DMatrix<T>> {
    if a.nrows() <= KRONECKER_LIMIT {
        lyapunov_kronecker(a, c)
    } else {
        lyapunov_bartels_stewart(a, c)
    }
}

pub fn lyapunov_kronecker<T: Real>(a: &DMatrix<T>, c: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let eye = DMatrix::<T>::identity(n, n);
    let at = a.transpose();
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_column_slice(c.as_slice());
    let x = op.lu().solve(&rhs).ok_or(Error::LyapunovSingular)?;
    Ok(DMatrix::from_column_slice(n, n, x.as_slice()))
}

pub fn lyapunov_bartels_stewart<T: Real>(a: &DMatrix<T>, c: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let (u, t) = a.clone().schur().unpack();
    let f = u.transpose() * c * &u;

    // Diagonal blocks of the quasi-triangular factor: (start, size).
    let scale = max_abs(&t).max(T::one());
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > T::default_epsilon() * scale {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }

    // Tᵀ Y + Y T = F, solved block by block in increasing (p, q).
    let mut y = DMatrix::<T>::zeros(n, n);
    for &(p0, ps) in &blocks {
        for &(q0, qs) in &blocks {
            let mut rhs = f.view((p0, q0), (ps, qs)).clone_owned();
            for &(r0, rs) in blocks.iter().take_while(|b| b.0 < p0) {
                rhs -= t.view((r0, p0), (rs, ps)).transpose() * y.view((r0, q0), (rs, qs));
            }
            for &(r0, rs) in blocks.iter().take_while(|b| b.0 < q0) {
                rhs -= y.view((p0, r0), (ps, rs)) * t.view((r0, q0), (rs, qs));
            }
            let tpp_t = t.view((p0, p0), (ps, ps)).transpose();
            let tqq = t.view((q0, q0), (qs, qs)).clone_owned();
            let small = DMatrix::<T>::identity(qs, qs).kronecker(&tpp_t)
                + tqq.transpose().kronecker(&DMatrix::<T>::identity(ps, ps));
            let sol = small.lu().solve(&DVector::from_column_slice(rhs.as_slice())).ok_or(Error::LyapunovSingular)?;
            y.view_mut((p0, q0), (ps, qs)).copy_from(&DMatrix::from_column_slice(ps, qs, sol.as_slice()));
        }
    }
    Ok(&u * y * u.transpose())
}

/// Matrix exponential by scaling and squaring with Padé approximants
/// (delegates to `nalgebra`).
pub fn expm<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    a.clone().exp()
}

/// Stabilizing solution of `aᵀX + Xa − X b bᵀ X + q = 0` (unit input weight).
///
/// Uses the Hamiltonian matrix sign function with determinant scaling; the
/// stable invariant subspace is the null space of `sign(H) + I`.
pub fn care<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let g = b * b.transpose();
    let mut h = DMatrix::<T>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let two_n = T::from_count(2 * n);
    let tol = T::tol(1e-13) * T::lit(10.0);
    let mut z = h;
    let mut converged = false;
    for _ in 0..100 {
        let lu = z.clone().lu();
        let det = lu.determinant();
        let zinv = lu
            .try_inverse()
            .ok_or_else(|| Error::RiccatiFailure("Hamiltonian has imaginary-axis eigenvalues".into()))?;
        let c = if det.abs() > T::zero() && det.is_finite() {
            (T::one() / det.abs()).powf(T::one() / two_n)
        } else {
            T::one()
        };
        let next = (&z * c + zinv * (T::one() / c)) * T::lit(0.5);
        let change = (&next - &z).abs().sum();
        let size = next.abs().sum();
        z = next;
        if change <= tol * size {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::RiccatiFailure("sign iteration did not converge".into()));
    }

    let w11 = z.view((0, 0), (n, n));
    let w12 = z.view((0, n), (n, n));
    let w21 = z.view((n, 0), (n, n));
    let w22 = z.view((n, n), (n, n));
    let eye = DMatrix::<T>::identity(n, n);
    let mut lhs = DMatrix::<T>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w22 + &eye));
    let mut rhs = DMatrix::<T>::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w11 + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));

    let normal = lhs.transpose() * &lhs;
    let x = normal
        .cholesky()
        .map(|ch| ch.solve(&(lhs.transpose() * &rhs)))
        .ok_or_else(|| Error::RiccatiFailure("stable subspace is not a graph".into()))?;
    Ok(sym(&x))
}
