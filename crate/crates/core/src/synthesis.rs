//! Controller synthesis: mode-count selection, the `m`-dimensional gain
//! `K_Q`, per-mode gains `K̄_n`, the actuator matrix `ℬ_{N×N}`, the final
//! feedback `u = K z^N`, and the Lyapunov certificate of the closed loop.
//!
//! The design inequality for `K_Q` is certified constructively: `K_Q` places
//! the poles of `Q + B K_Q + (δ − λ₁ d_m) I` at `−offset_k`, and `P` solves
//! `ĀᵀP + PĀ = −I` for that shifted matrix.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    care, condition_number, max_abs, max_sym_eigenvalue, min_sym_eigenvalue, place_single_input, solve_lyapunov,
    spectral_abscissa, spectral_norm, sym,
};
use crate::model::{ShapeFunction, ValidatedPlant};
use crate::scalar::Real;
use crate::spectral::SpectralBasis;
use crate::transform::{compute_gn, solve_transform_family, TransformFamily};

/// Hypothesis (H) fails above this condition number of `ℬ_{N×N}`.
pub const MAX_INPUT_CONDITION: f64 = 1e12;

/// Upper bound on the automatically selected mode count.
pub const MODE_LIMIT: usize = 100_000;

/// Residual tolerance of the Lyapunov solve certifying `K_Q`.
pub const LYAPUNOV_TOL: f64 = 1e-8;

/// `−λ D + Sym(Q) + δ I`.
pub fn residual_mode_matrix<T: Real>(plant: &ValidatedPlant<T>, lambda: T, delta: T) -> DMatrix<T> {
    let m = plant.m();
    sym(&plant.coupling) - plant.diffusion_matrix() * lambda + DMatrix::<T>::identity(m, m) * delta
}

/// Largest eigenvalue of [`residual_mode_matrix`]; negative means mode
/// decays at rate at least `δ` without actuation.
pub fn residual_mode_margin<T: Real>(plant: &ValidatedPlant<T>, lambda: T, delta: T) -> T {
    max_sym_eigenvalue(&residual_mode_matrix(plant, lambda, delta))
}

/// Smallest `N ≥ 0` with `−λ_{N+1} D + Sym(Q) + δ I ≺ 0`.
pub fn select_n<T: Real>(plant: &ValidatedPlant<T>, basis: &SpectralBasis<T>, delta: T) -> Result<usize> {
    for n in 0..MODE_LIMIT {
        let lambda = basis.lambda_at(n + 1)?;
        if residual_mode_margin(plant, lambda, delta) < T::zero() {
            return Ok(n);
        }
    }
    Err(Error::BasisExhausted { limit: MODE_LIMIT })
}

/// Pole offsets `k δ / m`, `k = 1..=m`.
///
/// Offsets are rates, so they scale with `δ`. Spacing them by `δ/m` lets the
/// cross-terms between the placed poles settle on the `1/δ` time scale;
/// unit spacing leaves a `(1 − e^{−t})^{m−1}`-type transient that masks the
/// target rate over short horizons.
pub fn default_pole_offsets<T: Real>(m: usize, delta: T) -> Vec<T> {
    let step = delta / T::from_count(m.max(1));
    (1..=m).map(|k| step * T::from_count(k)).collect()
}

fn check_offsets<T: Real>(offsets: &[T], m: usize) -> Result<()> {
    if offsets.len() != m {
        return Err(Error::InvalidParameter(format!("{m} pole offsets required, got {}", offsets.len())));
    }
    for (i, &a) in offsets.iter().enumerate() {
        if !(a > T::zero()) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!("pole offset {a} must be positive")));
        }
        if offsets[..i].contains(&a) {
            return Err(Error::InvalidParameter(format!("pole offset {a} repeated")));
        }
    }
    Ok(())
}

/// `K_Q` and `P` such that `Ā = Q + B K_Q + (δ − λ₁ d_m) I` has eigenvalues
/// `−offsets` and `ĀᵀP + PĀ = −I`.
pub fn stabilize_q<T: Real>(
    plant: &ValidatedPlant<T>,
    delta: T,
    lambda1: T,
    offsets: &[T],
) -> Result<(RowDVector<T>, DMatrix<T>)> {
    let m = plant.m();
    check_offsets(offsets, m)?;
    let shift = delta - lambda1 * plant.d_last();
    let poles: Vec<T> = offsets.iter().map(|&a| -shift - a).collect();
    let mut b = DVector::<T>::zeros(m);
    b[0] = T::one();
    let k_q = place_single_input(&plant.coupling, &b, &poles)?;
    let abar = shifted_target(plant, &k_q, shift);
    let eye = DMatrix::<T>::identity(m, m);
    let p = sym(&solve_lyapunov(&abar, &(-&eye))?);
    let residual = abar.transpose() * &p + &p * &abar + &eye;
    // Backward-error scale of the Lyapunov operator.
    let scale = T::lit(2.0) * max_abs(&abar) * max_abs(&p) + T::one();
    if max_abs(&residual) > T::tol(LYAPUNOV_TOL) * scale || min_sym_eigenvalue(&p) <= T::zero() {
        return Err(Error::LyapunovSingular);
    }
    Ok((k_q, p))
}

/// `Q + B K_Q + shift · I`.
fn shifted_target<T: Real>(plant: &ValidatedPlant<T>, k_q: &RowDVector<T>, shift: T) -> DMatrix<T> {
    let m = plant.m();
    let mut a = plant.coupling.clone() + DMatrix::<T>::identity(m, m) * shift;
    for c in 0..m {
        a[(0, c)] += k_q[c];
    }
    a
}

/// Target block `H_n = −λ_n d_m I + Q + B K_Q`.
pub fn target_block<T: Real>(plant: &ValidatedPlant<T>, k_q: &RowDVector<T>, lambda: T) -> DMatrix<T> {
    shifted_target(plant, k_q, -lambda * plant.d_last())
}

/// `K̄_n = Bᵀ((Q − λ_n d_m I) T_n + T_n(λ_n D − Q)) + K_Q T_n` for `n = 1..=N`.
pub fn modal_gains<T: Real>(
    plant: &ValidatedPlant<T>,
    family: &TransformFamily<T>,
    basis: &SpectralBasis<T>,
    k_q: &RowDVector<T>,
    modes: usize,
) -> Vec<RowDVector<T>> {
    let m = plant.m();
    let eye = DMatrix::<T>::identity(m, m);
    let q = &plant.coupling;
    (1..=modes)
        .map(|n| {
            let lambda = basis.lambda(n);
            let t = family.assemble(lambda, n, modes).t;
            let bracket = (q - &eye * (lambda * plant.d_last())) * &t + &t * (plant.diffusion_matrix() * lambda - q);
            bracket.row(0).clone_owned() + k_q * &t
        })
        .collect()
}

/// `K̄_n = (−G_n + K_Q) T_n`, the second route to the per-mode gains.
pub fn modal_gains_via_gn<T: Real>(
    plant: &ValidatedPlant<T>,
    family: &TransformFamily<T>,
    basis: &SpectralBasis<T>,
    k_q: &RowDVector<T>,
    modes: usize,
) -> Vec<RowDVector<T>> {
    (1..=modes)
        .map(|n| {
            let lambda = basis.lambda(n);
            let modal = family.assemble(lambda, n, modes);
            (k_q - compute_gn(plant, family, lambda, &modal)) * &modal.t
        })
        .collect()
}

/// `ℬ_{N×N}` with entry `(n, j) = b_{j,n}` and its condition number.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMatrix<T: Real> {
    pub matrix: DMatrix<T>,
    pub condition: T,
}

/// Builds `ℬ_{N×N}` from the first `N` shapes and checks hypothesis (H).
pub fn input_matrix<T: Real>(
    shapes: &[ShapeFunction<T>],
    basis: &SpectralBasis<T>,
    modes: usize,
) -> Result<InputMatrix<T>> {
    if shapes.len() < modes {
        return Err(Error::InsufficientShapes { needed: modes, available: shapes.len() });
    }
    let shapes = &shapes[..modes];
    let mut matrix = DMatrix::<T>::zeros(modes, modes);
    for n in 1..=modes {
        matrix.set_row(n - 1, &basis.input_projection_row(shapes, n)?);
    }
    let condition = condition_number(&matrix);
    if !(condition <= T::lit(MAX_INPUT_CONDITION)) {
        return Err(Error::HypothesisHViolated { condition: condition.as_f64() });
    }
    Ok(InputMatrix { matrix, condition })
}

/// Stacks `K̄_1..K̄_N` into the `N × mN` block-diagonal row matrix.
pub fn diag_rows<T: Real>(kbar: &[RowDVector<T>], m: usize) -> DMatrix<T> {
    let n = kbar.len();
    let mut out = DMatrix::<T>::zeros(n, m * n);
    for (i, row) in kbar.iter().enumerate() {
        out.view_mut((i, i * m), (1, m)).copy_from(row);
    }
    out
}

/// Full synthesis result.
#[derive(Debug, Clone)]
pub struct Controller<T: Real> {
    pub delta: T,
    /// Number of stabilized modes `N`.
    pub modes: usize,
    /// Smallest admissible `N` for this `δ`.
    pub min_modes: usize,
    pub pole_offsets: Vec<T>,
    pub k_q: RowDVector<T>,
    pub p: DMatrix<T>,
    pub transform: TransformFamily<T>,
    /// `K̄_1..K̄_N`.
    pub kbar: Vec<RowDVector<T>>,
    /// `ℬ_{N×N}`.
    pub bmat: DMatrix<T>,
    pub bmat_condition: T,
    /// `K` (`N × mN`), `u = K z^N`.
    pub gain: DMatrix<T>,
}

impl<T: Real> Controller<T> {
    pub fn m(&self) -> usize {
        self.k_q.len()
    }

    /// Spectral abscissas of `H_1..H_N`.
    pub fn block_abscissas(&self, plant: &ValidatedPlant<T>, basis: &SpectralBasis<T>) -> Vec<T> {
        (1..=self.modes).map(|n| spectral_abscissa(&target_block(plant, &self.k_q, basis.lambda(n)))).collect()
    }
}

/// Options that shape the synthesis but not its correctness.
#[derive(Debug, Clone, Default)]
pub struct SynthesisOptions<T> {
    /// Forces `N`; must be at least the minimal admissible value.
    pub modes: Option<usize>,
    /// Offsets placing the eigenvalues of `Ā` at `−offset_k`.
    pub pole_offsets: Option<Vec<T>>,
}

/// Runs the whole modal synthesis for decay rate `δ`.
pub fn build_controller<T: Real>(
    plant: &ValidatedPlant<T>,
    basis: &SpectralBasis<T>,
    delta: T,
    options: &SynthesisOptions<T>,
) -> Result<Controller<T>> {
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("decay rate must be positive, got {delta}")));
    }
    let m = plant.m();
    let min_modes = select_n(plant, basis, delta)?;
    let modes = match options.modes {
        Some(n) if n < min_modes => return Err(Error::ModeCountTooSmall { requested: n, minimum: min_modes }),
        Some(n) => n,
        None => min_modes,
    };
    let basis = if basis.len() < modes.max(1) { basis.extended(modes.max(1))? } else { basis.clone() };
    let offsets = options.pole_offsets.clone().unwrap_or_else(|| default_pole_offsets(m, delta));
    let (k_q, p) = stabilize_q(plant, delta, basis.lambda(1), &offsets)?;
    let transform = solve_transform_family(plant)?;
    let kbar = modal_gains(plant, &transform, &basis, &k_q, modes);
    let input = input_matrix(&plant.shapes, &basis, modes)?;
    let gain = if modes == 0 {
        DMatrix::zeros(0, 0)
    } else {
        input
            .matrix
            .clone()
            .lu()
            .solve(&diag_rows(&kbar, m))
            .ok_or(Error::HypothesisHViolated { condition: f64::INFINITY })?
    };
    Ok(Controller {
        delta,
        modes,
        min_modes,
        pole_offsets: offsets,
        k_q,
        p,
        transform,
        kbar,
        bmat: input.matrix,
        bmat_condition: input.condition,
        gain,
    })
}

/// Constants of the closed-loop Lyapunov certificate and its sign checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate<T> {
    pub rho: T,
    pub rho_bar: T,
    pub beta: T,
    pub rho0: T,
    pub c_lower: T,
    pub c_upper: T,
    /// Overshoot constant `M` in `‖z(t)‖ ≤ M e^{−δt} ‖z(0)‖`.
    pub overshoot: T,
    /// `λ_max(Γ_n)` for `n = 1..=N`.
    pub gamma_margins: Vec<T>,
    /// `λ_max(Ω_n)` for `n = N+1..=M_modes`.
    pub omega_margins: Vec<T>,
}

impl<T: Real> Certificate<T> {
    pub fn gamma_margin(&self) -> T {
        self.gamma_margins.iter().copied().fold(T::min_value().unwrap(), T::max)
    }

    pub fn omega_margin(&self) -> T {
        self.omega_margins.iter().copied().fold(T::min_value().unwrap(), T::max)
    }

    pub fn holds(&self) -> bool {
        self.gamma_margins.iter().chain(&self.omega_margins).all(|&v| v < T::zero())
    }
}

/// `ρ₀ = 2 / (ρ ρ̄ β ‖K‖²)`.
pub fn rho0_formula<T: Real>(rho: T, rho_bar: T, beta: T, gain_norm: T) -> T {
    T::lit(2.0) / (rho * rho_bar * beta * gain_norm * gain_norm)
}

/// Computes the certificate constants without judging the sign conditions.
pub fn certificate_constants<T: Real>(
    plant: &ValidatedPlant<T>,
    controller: &Controller<T>,
    basis: &SpectralBasis<T>,
    m_modes: usize,
) -> Result<Certificate<T>> {
    let m = plant.m();
    let modes = controller.modes;
    let delta = controller.delta;
    let eye = DMatrix::<T>::identity(m, m);
    let two = T::lit(2.0);

    // ρ: residual-mode inequality −λ_{N+1}D + Sym(Q) + δI ⪯ −μ I, take ρ = 1/μ.
    let mu = -residual_mode_margin(plant, basis.lambda_at(modes + 1)?, delta);
    if !(mu > T::zero()) {
        return Err(Error::CertificateViolation(format!("mode {} is not dominated at rate δ", modes + 1)));
    }
    let rho = T::one() / mu;

    // ρ̄: Sym(PĀ) + I/ρ̄ ≺ 0; twice the Schur-complement minimum.
    let shift = delta - basis.lambda(1) * plant.d_last();
    let abar = shifted_target(plant, &controller.k_q, shift);
    let nu = -max_sym_eigenvalue(&(&controller.p * &abar));
    if !(nu > T::zero()) {
        return Err(Error::CertificateViolation("Sym(P Ā) is not negative definite".into()));
    }
    let rho_bar = two / nu;

    let mut max_t = T::one();
    let mut max_t_inv = T::one();
    for n in 1..=modes {
        let tn = controller.transform.assemble(basis.lambda(n), n, modes);
        max_t = max_t.max(spectral_norm(&tn.t));
        max_t_inv = max_t_inv.max(spectral_norm(&tn.t_inv));
    }
    let shape_energy: T = plant.shapes.iter().take(modes).map(|b| b.norm_sq(plant.length)).sum();
    let beta = max_t_inv * max_t_inv * shape_energy;
    let c_lower = T::one() / (max_t_inv * max_t_inv);
    let c_upper = max_t * max_t;

    let (rho0, overshoot) = if modes == 0 {
        (T::one(), (c_upper / c_lower).sqrt())
    } else {
        let rho0 = rho0_formula(rho, rho_bar, beta, spectral_norm(&controller.gain));
        let p_max = max_sym_eigenvalue(&controller.p);
        let p_min = min_sym_eigenvalue(&controller.p);
        let overshoot = (c_upper * p_max.max(rho0) / (c_lower * p_min.min(rho0))).sqrt();
        (rho0, overshoot)
    };

    let gamma_margins = (1..=modes)
        .map(|n| {
            let h = target_block(plant, &controller.k_q, basis.lambda(n));
            let gamma = sym(&(&controller.p * h)) + &controller.p * delta + &eye / rho_bar;
            max_sym_eigenvalue(&gamma)
        })
        .collect();
    let omega_margins = (modes + 1..=m_modes)
        .map(|n| {
            let lambda = basis.lambda_at(n)?;
            Ok(residual_mode_margin(plant, lambda, delta) + T::one() / (two * rho))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Certificate { rho, rho_bar, beta, rho0, c_lower, c_upper, overshoot, gamma_margins, omega_margins })
}

/// Certificate constants, failing if any of `Γ ≺ 0`, `Ω_n ≺ 0` does not hold.
pub fn certificate<T: Real>(
    plant: &ValidatedPlant<T>,
    controller: &Controller<T>,
    basis: &SpectralBasis<T>,
    m_modes: usize,
) -> Result<Certificate<T>> {
    let cert = certificate_constants(plant, controller, basis, m_modes)?;
    if let Some((n, v)) = cert.gamma_margins.iter().enumerate().find(|(_, &v)| v >= T::zero()) {
        return Err(Error::CertificateViolation(format!("Γ block {} has eigenvalue {v}", n + 1)));
    }
    if let Some((n, v)) = cert.omega_margins.iter().enumerate().find(|(_, &v)| v >= T::zero()) {
        return Err(Error::CertificateViolation(format!("Ω_{} has eigenvalue {v}", controller.modes + 1 + n)));
    }
    Ok(cert)
}

/// Open-loop modal pair `(A, B̃)` of the first `N` modes:
/// `A = blockdiag{−λ_n D + Q}`, `B̃ = col{B ℬ_n}`.
pub fn modal_pair<T: Real>(
    plant: &ValidatedPlant<T>,
    basis: &SpectralBasis<T>,
    modes: usize,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    if plant.shapes.len() < modes {
        return Err(Error::InsufficientShapes { needed: modes, available: plant.shapes.len() });
    }
    let m = plant.m();
    let dim = m * modes;
    let mut a = DMatrix::<T>::zeros(dim, dim);
    let mut b = DMatrix::<T>::zeros(dim, modes);
    for n in 1..=modes {
        let lambda = basis.lambda_at(n)?;
        let block = &plant.coupling - plant.diffusion_matrix() * lambda;
        a.view_mut(((n - 1) * m, (n - 1) * m), (m, m)).copy_from(&block);
        let row = if n <= basis.len() {
            basis.input_projection_row(&plant.shapes[..modes], n)?
        } else {
            basis.extended(n)?.input_projection_row(&plant.shapes[..modes], n)?
        };
        b.row_mut((n - 1) * m).copy_from(&row);
    }
    Ok((a, b))
}

/// Direct `mN`-dimensional synthesis used as a timing baseline.
///
/// Solves the Riccati equation of the shifted pair `(A + δI, B̃)` with unit
/// weights and returns `K = −B̃ᵀX` together with the wall time spent.
pub fn direct_baseline<T: Real>(
    plant: &ValidatedPlant<T>,
    basis: &SpectralBasis<T>,
    delta: T,
    modes: usize,
) -> Result<(DMatrix<T>, Duration)> {
    if modes == 0 {
        return Err(Error::InvalidParameter("direct baseline needs at least one mode".into()));
    }
    let start = Instant::now();
    let (a, b) = modal_pair(plant, basis, modes)?;
    let dim = a.nrows();
    let eye = DMatrix::<T>::identity(dim, dim);
    let x = care(&(a + &eye * delta), &b, &eye)?;
    let k = -(b.transpose() * x);
    Ok((k, start.elapsed()))
}
