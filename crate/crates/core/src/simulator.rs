//! Modal Galerkin simulation of the open or closed loop.
//!
//! The state is the stacked vector `(z_1, …, z_M)` of modal coefficients,
//! each `z_n ∈ ℝ^m`. The truncated system is linear time-invariant, so it is
//! stepped exactly with the matrix exponential of the output interval.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::expm;
use crate::model::{ShapeFunction, ValidatedPlant};
use crate::scalar::Real;
use crate::spectral::SpectralBasis;
use crate::synthesis::{target_block, Controller};

/// One additive term of an initial profile component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileTerm<T> {
    Constant {
        value: T,
    },
    /// `amplitude · cos(frequency · x)`.
    Cosine {
        amplitude: T,
        frequency: T,
    },
    Shape {
        shape: ShapeFunction<T>,
    },
}

impl<T: Real> ProfileTerm<T> {
    pub fn eval(&self, x: T) -> T {
        match self {
            ProfileTerm::Constant { value } => *value,
            ProfileTerm::Cosine { amplitude, frequency } => *amplitude * (*frequency * x).cos(),
            ProfileTerm::Shape { shape } => shape.eval(x),
        }
    }

    fn project(&self, basis: &SpectralBasis<T>, n: usize) -> Result<T> {
        match self {
            ProfileTerm::Constant { value } => {
                let unit = ShapeFunction::Polynomial { coefficients: vec![T::one()] };
                Ok(*value * basis.project_shape(&unit, n)?)
            }
            ProfileTerm::Cosine { .. } => basis.project_fn(|x| self.eval(x), n),
            ProfileTerm::Shape { shape } => basis.project_shape(shape, n),
        }
    }
}

/// Initial profile `z(·, 0)`, one sum of terms per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition<T> {
    pub components: Vec<Vec<ProfileTerm<T>>>,
}

impl<T: Real> InitialCondition<T> {
    pub fn eval(&self, component: usize, x: T) -> T {
        self.components[component].iter().map(|t| t.eval(x)).sum()
    }
}

/// Projects the initial profile onto the first `modes` eigenfunctions.
pub fn project_initial<T: Real>(
    ic: &InitialCondition<T>,
    basis: &SpectralBasis<T>,
    modes: usize,
) -> Result<Vec<DVector<T>>> {
    if modes > basis.len() {
        return Err(Error::DimensionMismatch(format!("{modes} modes requested, basis holds {}", basis.len())));
    }
    (1..=modes)
        .map(|n| {
            let entries = ic
                .components
                .iter()
                .map(|terms| terms.iter().try_fold(T::zero(), |acc, t| Ok(acc + t.project(basis, n)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(DVector::from_vec(entries))
        })
        .collect()
}

/// Concatenates per-mode vectors into the stacked state.
pub fn stack<T: Real>(coeffs: &[DVector<T>]) -> DVector<T> {
    let parts: Vec<T> = coeffs.iter().flat_map(|z| z.iter().copied()).collect();
    DVector::from_vec(parts)
}

/// Splits a stacked state back into per-mode vectors of length `m`.
pub fn unstack<T: Real>(state: &DVector<T>, m: usize) -> Vec<DVector<T>> {
    state.as_slice().chunks(m).map(DVector::from_column_slice).collect()
}

/// Closed-loop (or, without a controller, open-loop) system matrix of the
/// first `m_modes` modes: `ż_n = (−λ_n D + Q) z_n + B ℬ_n K z^N`.
pub fn assemble_closed_loop<T: Real>(
    plant: &ValidatedPlant<T>,
    controller: Option<&Controller<T>>,
    basis: &SpectralBasis<T>,
    m_modes: usize,
) -> Result<DMatrix<T>> {
    let m = plant.m();
    if m_modes > basis.len() {
        return Err(Error::DimensionMismatch(format!("{m_modes} modes requested, basis holds {}", basis.len())));
    }
    let dim = m * m_modes;
    let mut a = DMatrix::<T>::zeros(dim, dim);
    for n in 1..=m_modes {
        let block = &plant.coupling - plant.diffusion_matrix() * basis.lambda(n);
        a.view_mut(((n - 1) * m, (n - 1) * m), (m, m)).copy_from(&block);
    }
    if let Some(ctrl) = controller.filter(|c| c.modes > 0) {
        let big_n = ctrl.modes;
        if m_modes < big_n {
            return Err(Error::DimensionMismatch(format!("{m_modes} simulated modes, {big_n} controlled")));
        }
        let shapes = &plant.shapes[..big_n];
        for n in 1..=m_modes {
            let bn = basis.input_projection_row(shapes, n)?;
            let feedback = bn * &ctrl.gain;
            let mut row = a.view_mut(((n - 1) * m, 0), (1, m * big_n));
            row += feedback;
        }
    }
    Ok(a)
}

/// Sampled trajectory of the stacked modal state.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub m: usize,
    pub times: Vec<T>,
    pub states: Vec<DVector<T>>,
    /// `‖z(t)‖_{L²}`, equal to the Euclidean norm of the coefficients.
    pub l2_norm: Vec<T>,
    pub fitted_decay: Option<T>,
    pub bound_satisfied: Option<bool>,
}

impl<T: Real> Trajectory<T> {
    pub fn modes(&self) -> usize {
        self.states.first().map_or(0, |s| s.len() / self.m.max(1))
    }

    pub fn t_final(&self) -> T {
        *self.times.last().unwrap_or(&T::zero())
    }
}

/// Integrates `ż = A z` on a uniform grid of `round(t_final/dt_out)` steps.
pub fn integrate<T: Real>(
    system: &DMatrix<T>,
    z0: &DVector<T>,
    m: usize,
    t_final: T,
    dt_out: T,
) -> Result<Trajectory<T>> {
    if !(t_final > T::zero()) || !(dt_out > T::zero()) || !t_final.is_finite() {
        return Err(Error::InvalidParameter(format!("t_final {t_final} and dt_out {dt_out} must be positive")));
    }
    if system.nrows() != z0.len() || !system.is_square() {
        return Err(Error::DimensionMismatch(format!("system {:?} vs state {}", system.shape(), z0.len())));
    }
    let steps = (t_final / dt_out).round().to_usize().unwrap_or(0).max(1);
    let dt = t_final / T::from_count(steps);
    let step = expm(&(system * dt));
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut z = z0.clone();
    for k in 0..=steps {
        times.push(dt * T::from_count(k));
        states.push(z.clone());
        if k < steps {
            z = &step * z;
        }
    }
    let l2_norm = states.iter().map(|s| s.norm()).collect();
    Ok(Trajectory { m, times, states, l2_norm, fitted_decay: None, bound_satisfied: None })
}

/// Exponential rate `−slope` of the least-squares line through
/// `ln ‖z(t)‖` over `t ∈ [lo·t_f, hi·t_f]`.
///
/// If the norm underflows to zero inside the window, the window is cut at
/// the first such sample.
pub fn estimate_decay<T: Real>(traj: &Trajectory<T>, window: (T, T)) -> Result<T> {
    let tf = traj.t_final();
    let (lo, hi) = (window.0 * tf, window.1 * tf);
    let mut pts = Vec::new();
    for (&t, &v) in traj.times.iter().zip(&traj.l2_norm) {
        if t < lo || t > hi {
            continue;
        }
        let ln = v.ln();
        if !(v > T::zero()) || !ln.is_finite() {
            break;
        }
        pts.push((t, ln));
    }
    if pts.len() < 2 {
        return Err(Error::ZeroNorm);
    }
    let k = T::from_count(pts.len());
    let tm = pts.iter().map(|p| p.0).sum::<T>() / k;
    let ym = pts.iter().map(|p| p.1).sum::<T>() / k;
    let sxy: T = pts.iter().map(|&(t, y)| (t - tm) * (y - ym)).sum();
    let sxx: T = pts.iter().map(|&(t, _)| (t - tm) * (t - tm)).sum();
    Ok(-sxy / sxx)
}

/// Largest ratio `‖z(t)‖ / (M e^{−δt} ‖z(0)‖)` along the trajectory; zero
/// samples count as ratio zero.
pub fn bound_ratio<T: Real>(traj: &Trajectory<T>, overshoot: T, delta: T) -> T {
    let z0 = traj.l2_norm[0];
    traj.times
        .iter()
        .zip(&traj.l2_norm)
        .map(|(&t, &v)| if v > T::zero() { v / (overshoot * (-delta * t).exp() * z0) } else { T::zero() })
        .fold(T::zero(), T::max)
}

/// `M e^{−δt} ‖z(0)‖` at every sample time.
pub fn bound_curve<T: Real>(traj: &Trajectory<T>, overshoot: T, delta: T) -> Vec<T> {
    let z0 = traj.l2_norm[0];
    traj.times.iter().map(|&t| overshoot * (-delta * t).exp() * z0).collect()
}

/// Consistency of the target coordinates `y_n = T_n z_n`, `n ≤ N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetResidual<T> {
    /// `max_t ‖ẏ − H y‖ / max_t ‖H y‖` with `ẏ` taken from the closed loop.
    pub derivative: T,
    /// `max_t ‖y(t) − e^{Ht} y(0)‖ / max_t ‖y(t)‖`.
    pub propagation: T,
}

fn target_coordinates<T: Real>(
    controller: &Controller<T>,
    basis: &SpectralBasis<T>,
    state: &DVector<T>,
    m: usize,
) -> Vec<DVector<T>> {
    (1..=controller.modes)
        .map(|n| {
            let tn = controller.transform.assemble(basis.lambda(n), n, controller.modes);
            tn.t * state.rows((n - 1) * m, m)
        })
        .collect()
}

/// Checks that the closed loop, seen through `T_n`, obeys `ẏ_n = H_n y_n`.
pub fn target_residual<T: Real>(
    plant: &ValidatedPlant<T>,
    controller: &Controller<T>,
    basis: &SpectralBasis<T>,
    system: &DMatrix<T>,
    traj: &Trajectory<T>,
) -> TargetResidual<T> {
    let m = plant.m();
    let blocks: Vec<DMatrix<T>> =
        (1..=controller.modes).map(|n| target_block(plant, &controller.k_q, basis.lambda(n))).collect();
    let y0 = target_coordinates(controller, basis, &traj.states[0], m);

    let (mut res_num, mut res_den) = (T::zero(), T::zero());
    let (mut prop_num, mut prop_den) = (T::zero(), T::zero());
    for (&t, state) in traj.times.iter().zip(&traj.states) {
        let y = target_coordinates(controller, basis, state, m);
        let ydot = target_coordinates(controller, basis, &(system * state), m);
        let (mut r, mut h, mut p, mut yn) = (T::zero(), T::zero(), T::zero(), T::zero());
        for (n, block) in blocks.iter().enumerate() {
            let hy = block * &y[n];
            r += (&ydot[n] - &hy).norm_squared();
            h += hy.norm_squared();
            let pred = expm(&(block * t)) * &y0[n];
            p += (pred - &y[n]).norm_squared();
            yn += y[n].norm_squared();
        }
        res_num = res_num.max(r.sqrt());
        res_den = res_den.max(h.sqrt());
        prop_num = prop_num.max(p.sqrt());
        prop_den = prop_den.max(yn.sqrt());
    }
    let ratio = |a: T, b: T| if b > T::zero() { a / b } else { a };
    TargetResidual { derivative: ratio(res_num, res_den), propagation: ratio(prop_num, prop_den) }
}

/// Field values `z_i(x_k, t)` at every stored time; each entry is `m × grid`.
pub fn reconstruct_field<T: Real>(
    traj: &Trajectory<T>,
    basis: &SpectralBasis<T>,
    grid: &[T],
) -> Result<Vec<DMatrix<T>>> {
    traj.states.iter().map(|s| basis.expand(&unstack(s, traj.m), grid)).collect()
}

/// Uniform grid of `points` nodes on `[0, length]`.
pub fn uniform_grid<T: Real>(length: T, points: usize) -> Vec<T> {
    let last = T::from_count(points.saturating_sub(1).max(1));
    (0..points).map(|k| length * T::from_count(k) / last).collect()
}

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T> {
    pub m_modes: usize,
    pub t_final: T,
    pub dt_out: T,
    pub grid_points: usize,
    /// Fractions of `t_final` bounding the decay fit.
    pub fit_window: (T, T),
}

impl<T: Real> SimConfig<T> {
    pub fn new(t_final: T) -> Self {
        SimConfig {
            m_modes: 30,
            t_final,
            dt_out: t_final / T::lit(400.0),
            grid_points: 101,
            fit_window: (T::lit(0.2), T::one()),
        }
    }
}

/// Projects, assembles, integrates and fits the decay rate. When a
/// controller and its overshoot constant are given, the certified bound is
/// checked as well.
pub fn simulate<T: Real>(
    plant: &ValidatedPlant<T>,
    controller: Option<&Controller<T>>,
    basis: &SpectralBasis<T>,
    ic: &InitialCondition<T>,
    config: &SimConfig<T>,
    overshoot: Option<T>,
) -> Result<Trajectory<T>> {
    if ic.components.len() != plant.m() {
        return Err(Error::DimensionMismatch(format!(
            "initial condition has {} components, plant has {}",
            ic.components.len(),
            plant.m()
        )));
    }
    let basis = if basis.len() < config.m_modes { basis.extended(config.m_modes)? } else { basis.clone() };
    let z0 = stack(&project_initial(ic, &basis, config.m_modes)?);
    let system = assemble_closed_loop(plant, controller, &basis, config.m_modes)?;
    let mut traj = integrate(&system, &z0, plant.m(), config.t_final, config.dt_out)?;
    traj.fitted_decay = estimate_decay(&traj, config.fit_window).ok();
    if let (Some(ctrl), Some(m_bound)) = (controller, overshoot) {
        let slack = T::one() + T::tol(1e-12);
        traj.bound_satisfied = Some(bound_ratio(&traj, m_bound, ctrl.delta) <= slack);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::validate_plant;
    use crate::spectral::build_basis;
    use crate::synthesis::{build_controller, certificate, SynthesisOptions};
    use std::f64::consts::PI;

    fn reference() -> (ValidatedPlant<f64>, SpectralBasis<f64>, Controller<f64>) {
        let plant = validate_plant(fixtures::reference_plant(), None).unwrap();
        let basis = build_basis(PI, 1.0, 0.0, 60).unwrap();
        let opts = SynthesisOptions { modes: Some(3), ..Default::default() };
        let ctrl = build_controller(&plant, &basis, 9.0, &opts).unwrap();
        (plant, basis, ctrl)
    }

    #[test]
    fn projection_of_reference_profile() {
        let (_, basis, _) = reference();
        let z = project_initial(&fixtures::reference_initial_condition(), &basis, 2).unwrap();
        // ⟨6cos(x/2) + 3, c cos(x/2)⟩ on [0, π] with c = √(2/π).
        let c = (2.0 / PI).sqrt();
        assert!((z[0][1] - c * (3.0 * PI + 6.0)).abs() < 1e-8);
        // ⟨cos x, cos(x/2)⟩ = 2/3, ⟨1, cos(x/2)⟩ = 2.
        assert!((z[0][0] - c * (2.0 / 3.0 + 2.0)).abs() < 1e-8);
    }

    #[test]
    fn parseval_on_reference_profile() {
        let (plant, basis, _) = reference();
        let ic = fixtures::reference_initial_condition();
        let z = project_initial(&ic, &basis, 60).unwrap();
        let coeff_energy: f64 = z.iter().map(|v| v.norm_squared()).sum();
        let mut field_energy = 0.0;
        for i in 0..plant.m() {
            field_energy += crate::spectral::adaptive_simpson(|x| ic.eval(i, x).powi(2), 0.0, PI, 1e-12).unwrap();
        }
        assert!((coeff_energy - field_energy).abs() / field_energy < 1e-3);
    }

    #[test]
    fn reconstruction_matches_profile() {
        let (_, basis, _) = reference();
        let ic = fixtures::reference_initial_condition();
        let z = project_initial(&ic, &basis, 60).unwrap();
        // Components 2 and 3 do not vanish at the Dirichlet end, so the partial
        // sums converge only like 1/n in the interior.
        let grid = [0.3, 1.2, 2.5];
        let field = basis.expand(&z, &grid).unwrap();
        for (k, &x) in grid.iter().enumerate() {
            for i in 0..3 {
                assert!((field[(i, k)] - ic.eval(i, x)).abs() < 1e-1);
            }
        }
    }

    #[test]
    fn open_loop_grows() {
        let (plant, basis, _) = reference();
        let ic = fixtures::reference_initial_condition();
        let traj = simulate(&plant, None, &basis, &ic, &SimConfig::new(1.0), None).unwrap();
        assert!(traj.l2_norm.last().unwrap() > &traj.l2_norm[0]);
        assert!(traj.fitted_decay.unwrap() < 0.0);
    }

    #[test]
    fn closed_loop_decays_within_bound() {
        let (plant, basis, ctrl) = reference();
        let cert = certificate(&plant, &ctrl, &basis, 30).unwrap();
        let ic = fixtures::reference_initial_condition();
        let traj = simulate(&plant, Some(&ctrl), &basis, &ic, &SimConfig::new(2.0), Some(cert.overshoot)).unwrap();
        assert!(traj.fitted_decay.unwrap() >= 9.0 * 0.95);
        assert_eq!(traj.bound_satisfied, Some(true));
        assert_eq!(traj.times.len(), 401);
        assert_eq!(traj.modes(), 30);
    }

    #[test]
    fn truncation_is_converged() {
        let (plant, basis, ctrl) = reference();
        let ic = fixtures::reference_initial_condition();
        let run = |m_modes| {
            let cfg = SimConfig { m_modes, ..SimConfig::new(1.0) };
            simulate(&plant, Some(&ctrl), &basis, &ic, &cfg, None).unwrap()
        };
        let (a, b) = (run(30).fitted_decay.unwrap(), run(60).fitted_decay.unwrap());
        assert!((a - b).abs() <= 0.01 * b);
    }

    #[test]
    fn target_residual_vanishes_for_synthesized_gain() {
        let (plant, basis, ctrl) = reference();
        let ic = fixtures::reference_initial_condition();
        let basis30 = basis.extended(30).unwrap();
        let z0 = stack(&project_initial(&ic, &basis30, 30).unwrap());
        let system = assemble_closed_loop(&plant, Some(&ctrl), &basis30, 30).unwrap();
        let traj = integrate(&system, &z0, 3, 1.0, 1.0 / 200.0).unwrap();
        let clean = target_residual(&plant, &ctrl, &basis30, &system, &traj);
        assert!(clean.derivative < 1e-8, "{clean:?}");
        assert!(clean.propagation < 1e-6, "{clean:?}");

        let mut bad = ctrl.clone();
        bad.gain *= 1.1;
        let system = assemble_closed_loop(&plant, Some(&bad), &basis30, 30).unwrap();
        let traj = integrate(&system, &z0, 3, 1.0, 1.0 / 200.0).unwrap();
        let perturbed = target_residual(&plant, &bad, &basis30, &system, &traj);
        assert!(perturbed.derivative > 1e3 * clean.derivative.max(1e-12));
    }

    #[test]
    fn decay_fit_recovers_rate_and_survives_underflow() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        let l2_norm: Vec<f64> = times.iter().map(|t| (-3.0 * t).exp()).collect();
        let mut traj = Trajectory { m: 1, states: vec![], times, l2_norm, fitted_decay: None, bound_satisfied: None };
        assert!((estimate_decay(&traj, (0.2, 1.0)).unwrap() - 3.0).abs() < 1e-10);
        for v in traj.l2_norm.iter_mut().skip(50) {
            *v = 0.0;
        }
        assert!((estimate_decay(&traj, (0.2, 1.0)).unwrap() - 3.0).abs() < 1e-10);
        for v in traj.l2_norm.iter_mut().skip(10) {
            *v = 0.0;
        }
        assert!(matches!(estimate_decay(&traj, (0.2, 1.0)), Err(Error::ZeroNorm)));
    }

    #[test]
    fn profile_terms_roundtrip_json() {
        let ic = fixtures::reference_initial_condition();
        let text = serde_json::to_string(&ic).unwrap();
        assert!(text.contains("\"kind\":\"cosine\""));
        let back: InitialCondition<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ic);
    }
}
