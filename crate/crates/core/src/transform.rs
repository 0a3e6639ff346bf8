//! Polynomial modal transform `T_n = I + Σ_i λ_n^i T̄_i`.
//!
//! The coefficient matrices `T̄_1..T̄_σ̄` are strictly upper triangular and
//! solve the masked generalized Sylvester equations
//!
//! ```text
//! (I − B Bᵀ)(Q T̄_i − T̄_i Q + T̄_{i−1}(D − d_m I)) = 0,   T̄_0 = I,
//! ```
//!
//! with `B = e_1`. Matrix rows and columns are 0-based here; the transform
//! order `i` is 1-based since `T̄_0` is the identity.

use nalgebra::{DMatrix, RowDVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{argmax_abs, max_abs};
use crate::model::ValidatedPlant;
use crate::scalar::Real;

/// Absolute tolerance on the masked Sylvester residual.
pub const SYLVESTER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TransformFamily<T: Real> {
    pub m: usize,
    pub sigma_bar: usize,
    /// `tbar[i - 1]` holds `T̄_i`.
    pub tbar: Vec<DMatrix<T>>,
}

/// Per-mode transform and its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalTransform<T: Real> {
    pub n: usize,
    pub t: DMatrix<T>,
    pub t_inv: DMatrix<T>,
}

/// `⌈i/2⌉`, the column offset of the support of `T̄_i`.
fn offset(order: usize) -> usize {
    order.div_ceil(2)
}

/// Support of `T̄_i`: rows `0 ..= m−2−⌈i/2⌉`, and in row `j` the columns
/// `j+⌈i/2⌉ ..= m−1`.
pub fn in_support(m: usize, order: usize, row: usize, col: usize) -> bool {
    let c = offset(order);
    m >= 2 + c && row + c + 2 <= m && col >= row + c && col < m
}

/// Masked residual `(I − BBᵀ)(Q T̄_i − T̄_i Q + T̄_{i−1}(D − d_m I))`.
pub fn sylvester_residual<T: Real>(
    plant: &ValidatedPlant<T>,
    current: &DMatrix<T>,
    previous: &DMatrix<T>,
) -> DMatrix<T> {
    let q = &plant.coupling;
    let m = plant.m();
    let shifted = plant.diffusion_matrix() - DMatrix::<T>::identity(m, m) * plant.d_last();
    let mut r = q * current - current * q + previous * shifted;
    r.row_mut(0).fill(T::zero());
    r
}

/// One Sylvester check: the largest masked residual entry for a given order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SylvesterCheck<T> {
    pub order: usize,
    pub row: usize,
    pub col: usize,
    pub max_abs: T,
    pub tolerance: T,
}

impl<T: Real> SylvesterCheck<T> {
    pub fn passed(&self) -> bool {
        self.max_abs <= self.tolerance
    }
}

impl<T: Real> TransformFamily<T> {
    /// Empty family: `T_n = I` for every mode.
    pub fn identity(m: usize) -> Self {
        TransformFamily { m, sigma_bar: 0, tbar: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.tbar.is_empty()
    }

    /// `T̄_i`, with `T̄_0 = I`.
    pub fn coefficient(&self, order: usize) -> DMatrix<T> {
        if order == 0 {
            DMatrix::identity(self.m, self.m)
        } else {
            self.tbar[order - 1].clone()
        }
    }

    /// Verifies every masked Sylvester equation of the family.
    pub fn check(&self, plant: &ValidatedPlant<T>) -> Vec<SylvesterCheck<T>> {
        let qmax = max_abs(&plant.coupling);
        (1..=self.tbar.len())
            .map(|order| {
                let current = &self.tbar[order - 1];
                let r = sylvester_residual(plant, current, &self.coefficient(order - 1));
                let (row, col, v) = argmax_abs(&r);
                let scale = (qmax * max_abs(current)).max(T::one());
                SylvesterCheck { order, row, col, max_abs: v, tolerance: T::tol(SYLVESTER_TOL) * scale }
            })
            .collect()
    }

    /// `Σ_i λ^i T̄_i`.
    pub fn nilpotent_part(&self, lambda: T) -> DMatrix<T> {
        let mut acc = DMatrix::<T>::zeros(self.m, self.m);
        let mut power = T::one();
        for tb in &self.tbar {
            power *= lambda;
            acc += tb * power;
        }
        acc
    }

    /// `T_n` for mode `n` (1-based) given `N` stabilized modes; identity for `n > N`.
    pub fn assemble(&self, lambda: T, n: usize, stabilized: usize) -> ModalTransform<T> {
        let m = self.m;
        let eye = DMatrix::<T>::identity(m, m);
        if n > stabilized || self.tbar.is_empty() {
            return ModalTransform { n, t: eye.clone(), t_inv: eye };
        }
        let s = self.nilpotent_part(lambda);
        // (I + S)⁻¹ = Σ_k (−S)^k, finite because S is strictly upper triangular.
        let mut t_inv = eye.clone();
        let mut term = eye.clone();
        for _ in 1..m {
            term = -(&term * &s);
            t_inv += &term;
        }
        ModalTransform { n, t: eye + s, t_inv }
    }
}

/// Computes `T̄_1..T̄_σ̄` by successive elimination.
///
/// For each order `i` the unknowns `κ^i_{j,k}` are visited row by row from
/// the bottom of the support upward, right to left within a row. Entry
/// `(j+1, k)` of the masked residual depends on `κ^i_{j,k}` with coefficient
/// `q_{j+1,j}` and otherwise only on entries already fixed, so each unknown
/// is the value that zeroes that entry.
pub fn solve_transform_family<T: Real>(plant: &ValidatedPlant<T>) -> Result<TransformFamily<T>> {
    let m = plant.m();
    let sigma_bar = plant.indices().sigma_bar;
    let mut family = TransformFamily { m, sigma_bar, tbar: Vec::with_capacity(sigma_bar) };
    for order in 1..=sigma_bar {
        let previous = family.coefficient(order - 1);
        let mut current = DMatrix::<T>::zeros(m, m);
        let c = offset(order);
        for row in (0..m.saturating_sub(c + 1)).rev() {
            for col in (row + c..m).rev() {
                current[(row, col)] = T::zero();
                let r = entry_residual(plant, &current, &previous, row + 1, col);
                current[(row, col)] = -r / plant.coupling[(row + 1, row)];
            }
        }
        family.tbar.push(current);
    }
    if let Some(bad) = family.check(plant).into_iter().find(|c| !c.passed()) {
        return Err(Error::ResidualNonzero {
            order: bad.order,
            row: bad.row,
            col: bad.col,
            value: bad.max_abs.as_f64(),
        });
    }
    Ok(family)
}

/// Single entry `(row, col)` of `Q T̄ − T̄ Q + T̄_prev (D − d_m I)`.
fn entry_residual<T: Real>(
    plant: &ValidatedPlant<T>,
    current: &DMatrix<T>,
    previous: &DMatrix<T>,
    row: usize,
    col: usize,
) -> T {
    let q = &plant.coupling;
    let qt = (q.row(row) * current.column(col))[(0, 0)];
    let tq = (current.row(row) * q.column(col))[(0, 0)];
    qt - tq + previous[(row, col)] * (plant.diffusion[col] - plant.d_last())
}

/// Closed-form recursion for `κ^i_{j,k}` (0-based `row = j−1`, `col = k−1`).
///
/// Reads the already-determined entries of `current` (rows below `row`) and
/// the previous-order coefficient `previous`:
///
/// ```text
/// κ^i_{j,k} = ( Σ_l κ^i_{j+1, j+c+1+l} q_{j+c+1+l, k}
///             − Σ_l q_{j+1, j+1+l} κ^i_{j+1+l, k}
///             + κ^{i−1}_{j+1,k} (d_m − d_k) ) / q_{j+1,j},   c = ⌈i/2⌉,
/// ```
///
/// with both sums over `l = 0 ..= m−j−1−c`.
pub fn kappa_closed_form<T: Real>(
    plant: &ValidatedPlant<T>,
    current: &DMatrix<T>,
    previous: &DMatrix<T>,
    order: usize,
    row: usize,
    col: usize,
) -> Result<T> {
    let m = plant.m();
    if order == 0 || !in_support(m, order, row, col) {
        return Err(Error::IndexOutOfSupport { order, row, col });
    }
    let q = &plant.coupling;
    let c = offset(order);
    // 1-based indices of the displayed recursion.
    let (j, k) = (row + 1, col + 1);
    let kappa = |r: usize, s: usize| current[(r - 1, s - 1)];
    let qq = |r: usize, s: usize| q[(r - 1, s - 1)];
    let upper = m - j - 1 - c;
    let mut acc = T::zero();
    for l in 0..=upper {
        acc += kappa(j + 1, j + c + 1 + l) * qq(j + c + 1 + l, k);
        acc -= qq(j + 1, j + 1 + l) * kappa(j + 1 + l, k);
    }
    acc += previous[(j, k - 1)] * (plant.d_last() - plant.diffusion[k - 1]);
    Ok(acc / qq(j + 1, j))
}

/// `G_n = −Bᵀ[(Q − λ d_m I) S + S(λ D − Q) + (D − d_m I) λ] T_n⁻¹` with `S = Σ λ^i T̄_i`.
pub fn compute_gn<T: Real>(
    plant: &ValidatedPlant<T>,
    family: &TransformFamily<T>,
    lambda: T,
    modal: &ModalTransform<T>,
) -> RowDVector<T> {
    let m = plant.m();
    let eye = DMatrix::<T>::identity(m, m);
    let q = &plant.coupling;
    let d = plant.diffusion_matrix();
    let s = family.nilpotent_part(lambda);
    let bracket =
        (q - &eye * (lambda * plant.d_last())) * &s + &s * (&d * lambda - q) + (&d - &eye * plant.d_last()) * lambda;
    -(bracket.row(0) * &modal.t_inv)
}

/// `(Q − λ d_m I) T + T(λ D − Q) + B G T`, which vanishes for a consistent family.
pub fn cancellation_residual<T: Real>(
    plant: &ValidatedPlant<T>,
    lambda: T,
    modal: &ModalTransform<T>,
    gn: &RowDVector<T>,
) -> DMatrix<T> {
    let m = plant.m();
    let eye = DMatrix::<T>::identity(m, m);
    let q = &plant.coupling;
    let t = &modal.t;
    let mut r = (q - &eye * (lambda * plant.d_last())) * t + t * (plant.diffusion_matrix() * lambda - q);
    let gt = gn * t;
    for col in 0..m {
        r[(0, col)] += gt[col];
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::validate_plant;
    use nalgebra::DVector;

    fn reference() -> ValidatedPlant<f64> {
        validate_plant(fixtures::reference_plant(), None).unwrap()
    }

    #[test]
    fn reference_family() {
        let plant = reference();
        let fam = solve_transform_family(&plant).unwrap();
        assert_eq!(fam.tbar.len(), 2);
        // κ = (d₃ − d₂)/q₂₁ = 1 at (0, 1); everything else vanishes.
        let mut want = DMatrix::zeros(3, 3);
        want[(0, 1)] = 1.0;
        assert!(max_abs(&(&fam.tbar[0] - &want)) < 1e-14);
        assert!(max_abs(&fam.tbar[1]) < 1e-14);
        assert!(fam.check(&plant).iter().all(|c| c.passed()));
    }

    #[test]
    fn equal_diffusions_give_empty_family() {
        let mut spec = fixtures::reference_plant();
        spec.diffusion = vec![2.0; 3];
        let fam = solve_transform_family(&validate_plant(spec, None).unwrap()).unwrap();
        assert!(fam.is_empty());
        let t = fam.assemble(3.0, 1, 3);
        assert_eq!(t.t, DMatrix::identity(3, 3));
    }

    #[test]
    fn two_equation_plant_gives_empty_family() {
        let spec = crate::model::PlantSpec {
            diffusion: vec![2.0, 1.0],
            coupling: DMatrix::from_row_slice(2, 2, &[0.3, 1.0, -0.7, 0.2]),
            length: 1.0,
            gamma1: 1.0,
            gamma2: 0.0,
            shapes: vec![],
        };
        let fam = solve_transform_family(&validate_plant(spec, None).unwrap()).unwrap();
        assert!(fam.is_empty());
    }

    #[test]
    fn closed_form_matches_elimination_on_reference() {
        let plant = reference();
        let fam = solve_transform_family(&plant).unwrap();
        let k = kappa_closed_form(&plant, &fam.tbar[0], &DMatrix::identity(3, 3), 1, 0, 1).unwrap();
        assert!((k - 1.0).abs() < 1e-14);
        assert!(matches!(
            kappa_closed_form(&plant, &fam.tbar[0], &DMatrix::identity(3, 3), 1, 1, 2),
            Err(Error::IndexOutOfSupport { .. })
        ));
    }

    #[test]
    fn closed_form_vanishes_for_equal_diffusions() {
        let mut spec = fixtures::random_cascade(3, 4);
        spec.diffusion = vec![1.5; 4];
        let plant = validate_plant(spec, None).unwrap();
        let zero = DMatrix::zeros(4, 4);
        for row in 0..4 {
            for col in 0..4 {
                if in_support(4, 1, row, col) {
                    let k = kappa_closed_form(&plant, &zero, &DMatrix::identity(4, 4), 1, row, col).unwrap();
                    assert_eq!(k, 0.0);
                }
            }
        }
    }

    #[test]
    fn assembled_transform_for_first_reference_mode() {
        let plant = reference();
        let fam = solve_transform_family(&plant).unwrap();
        let t1 = fam.assemble(0.25, 1, 3);
        let want = DMatrix::from_row_slice(3, 3, &[1.0, 0.25, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(max_abs(&(&t1.t - &want)) < 1e-15);
        assert!(max_abs(&(&t1.t * &t1.t_inv - DMatrix::identity(3, 3))) <= 1e-12);
        assert_eq!(fam.assemble(12.25, 4, 3).t, DMatrix::identity(3, 3));
        assert_eq!(fam.assemble(0.0, 1, 3).t, DMatrix::identity(3, 3));
    }

    #[test]
    fn gn_examples() {
        // σ = 2: G_n = λ (d₂ − d₁) Bᵀ.
        let spec = crate::model::PlantSpec {
            diffusion: vec![3.0, 1.0, 1.0],
            coupling: DMatrix::from_row_slice(3, 3, &[0.3, 1.0, 2.0, -0.7, 0.2, 0.1, 0.0, 0.4, -1.0]),
            length: 1.0,
            gamma1: 1.0,
            gamma2: 0.0,
            shapes: vec![],
        };
        let plant = validate_plant(spec, None).unwrap();
        let fam = solve_transform_family(&plant).unwrap();
        let lambda = 2.5f64;
        let g = compute_gn(&plant, &fam, lambda, &fam.assemble(lambda, 1, 1));
        assert!((g[0] - lambda * (1.0 - 3.0)).abs() < 1e-13);
        assert!(g[1].abs() < 1e-13 && g[2].abs() < 1e-13);

        // Equal diffusions: zero row.
        let mut spec = plant.spec().clone();
        spec.diffusion = vec![1.0; 3];
        let plant = validate_plant(spec, None).unwrap();
        let fam = solve_transform_family(&plant).unwrap();
        let g = compute_gn(&plant, &fam, 7.0, &fam.assemble(7.0, 1, 1));
        assert!(g.iter().all(|&x| x == 0.0));

        // Reference plant, first mode: full cancellation.
        let plant = reference();
        let fam = solve_transform_family(&plant).unwrap();
        let t1 = fam.assemble(0.25, 1, 3);
        let g1 = compute_gn(&plant, &fam, 0.25, &t1);
        assert!(max_abs(&cancellation_residual(&plant, 0.25, &t1, &g1)) < 1e-9);
    }

    #[test]
    fn corrupted_family_is_located() {
        let plant = reference();
        let mut fam = solve_transform_family(&plant).unwrap();
        fam.tbar[0][(0, 2)] += 0.5;
        let checks = fam.check(&plant);
        assert!(!checks[0].passed());
        assert_eq!((checks[0].row, checks[0].col), (1, 2));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn closed_form_family(plant: &ValidatedPlant<f64>) -> Vec<DMatrix<f64>> {
            let m = plant.m();
            let mut out: Vec<DMatrix<f64>> = Vec::new();
            for order in 1..=plant.indices().sigma_bar {
                let previous = if order == 1 { DMatrix::identity(m, m) } else { out[order - 2].clone() };
                let mut current = DMatrix::zeros(m, m);
                for row in (0..m).rev() {
                    for col in (0..m).rev() {
                        if in_support(m, order, row, col) {
                            current[(row, col)] =
                                kappa_closed_form(plant, &current, &previous, order, row, col).unwrap();
                        }
                    }
                }
                out.push(current);
            }
            out
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn family_invariants(seed in any::<u64>(), m in 2usize..7) {
                let plant = validate_plant(fixtures::random_cascade(seed, m), None).unwrap();
                let fam = solve_transform_family(&plant).unwrap();
                for check in fam.check(&plant) {
                    prop_assert!(check.passed(), "order {} residual {}", check.order, check.max_abs);
                }
                for (i, tb) in fam.tbar.iter().enumerate() {
                    for r in 0..m {
                        for c in 0..m {
                            if !in_support(m, i + 1, r, c) {
                                prop_assert_eq!(tb[(r, c)], 0.0);
                            }
                        }
                    }
                }
                let closed = closed_form_family(&plant);
                for (a, b) in fam.tbar.iter().zip(&closed) {
                    for (x, y) in a.iter().zip(b.iter()) {
                        prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(y.abs()).max(1.0));
                    }
                }
                for n in 1..=4usize {
                    let lambda = ((n as f64) - 0.5).powi(2) * std::f64::consts::PI.powi(2);
                    let t = fam.assemble(lambda, n, 4);
                    prop_assert!((t.t.determinant() - 1.0).abs() <= 1e-10 * t.t.norm().powi(m as i32).max(1.0));
                    let g = compute_gn(&plant, &fam, lambda, &t);
                    let res = cancellation_residual(&plant, lambda, &t, &g);
                    let scale = t.t.norm() * (plant.coupling.norm() + lambda * DVector::from_column_slice(&plant.diffusion).amax());
                    prop_assert!(max_abs(&res) <= 1e-9 * scale.max(1.0));
                }
            }
        }
    }
}
