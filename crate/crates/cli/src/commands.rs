use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;

use cascade_stab::bench::{bench_csv, run_benchmark};
use cascade_stab::fixtures::step_shapes;
use cascade_stab::io::{self, GainsFile};
use cascade_stab::linalg::spectral_abscissa;
use cascade_stab::simulator::{
    assemble_closed_loop, bound_curve, integrate, reconstruct_field, simulate as run_simulation, target_residual,
    uniform_grid, SimConfig,
};
use cascade_stab::synthesis::{modal_gains, modal_gains_via_gn, target_block};
use cascade_stab::{
    build_basis, build_controller, certificate, validate_plant, Basis, Cert, Error, Gains, Initial, Result,
    SynthesisOptions, Validated,
};

use crate::output::{write_atomic, write_json};
use crate::{BenchArgs, DesignArgs, PlantArgs, SimulateArgs, SynthesizeArgs, VerifyArgs};

pub enum Status {
    Ok,
    ChecksFailed,
}

fn load_plant(args: &PlantArgs) -> Result<Validated> {
    let text = fs::read_to_string(&args.plant)?;
    validate_plant(io::parse_plant(&text)?, args.diffusion_tol)
}

fn basis_for(plant: &Validated, modes: usize) -> Result<Basis> {
    build_basis(plant.length, plant.gamma1, plant.gamma2, modes.max(1))
}

fn require_delta(design: &DesignArgs) -> Result<f64> {
    design.delta.ok_or_else(|| Error::InvalidParameter("--delta is required".into()))
}

fn design(plant: &Validated, basis: &Basis, design: &DesignArgs) -> Result<(Gains, Cert)> {
    let delta = require_delta(design)?;
    let options = SynthesisOptions { modes: design.n, pole_offsets: design.pole_offsets.clone() };
    let ctrl = build_controller(plant, basis, delta, &options)?;
    if design.m_modes <= ctrl.modes {
        return Err(Error::InvalidParameter(format!("--m-modes {} must exceed N = {}", design.m_modes, ctrl.modes)));
    }
    let cert = certificate(plant, &ctrl, basis, design.m_modes)?;
    Ok((ctrl, cert))
}

fn fmt_list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn report(plant: &Validated, basis: &Basis, ctrl: &Gains, cert: &Cert) -> String {
    let idx = plant.indices();
    let abscissas = ctrl.block_abscissas(plant, basis);
    let mut out = String::new();
    let _ = writeln!(out, "m                 {}", plant.m());
    let _ = writeln!(out, "sigma, sigma_bar  {}, {}", idx.sigma, idx.sigma_bar);
    let _ = writeln!(out, "delta             {}", ctrl.delta);
    let _ = writeln!(out, "N_min             {}", ctrl.min_modes);
    let _ = writeln!(out, "N                 {}", ctrl.modes);
    let _ = writeln!(out, "cond(B_NxN)       {:.6e}", ctrl.bmat_condition);
    let _ = writeln!(out, "pole offsets      {}", fmt_list(&ctrl.pole_offsets));
    let _ = writeln!(out, "K_Q               {}", fmt_list(ctrl.k_q.as_slice()));
    let _ = writeln!(out, "block abscissas   {}", fmt_list(&abscissas));
    let _ = writeln!(out, "rho, rho_bar      {:.6e}, {:.6e}", cert.rho, cert.rho_bar);
    let _ = writeln!(out, "beta, rho0        {:.6e}, {:.6e}", cert.beta, cert.rho0);
    let _ = writeln!(out, "c_lower, c_upper  {:.6e}, {:.6e}", cert.c_lower, cert.c_upper);
    let _ = writeln!(out, "M                 {:.6e}", cert.overshoot);
    let _ = writeln!(out, "max eig Gamma_n   {}", fmt_list(&cert.gamma_margins));
    if !cert.omega_margins.is_empty() {
        let _ = writeln!(
            out,
            "max eig Omega_n   {:.6} (n = {}..{})",
            cert.omega_margin(),
            ctrl.modes + 1,
            ctrl.modes + cert.omega_margins.len()
        );
    }
    out
}

pub fn synthesize(args: SynthesizeArgs) -> Result<Status> {
    let plant = load_plant(&args.plant)?;
    let basis = basis_for(&plant, args.design.m_modes)?;
    let (ctrl, cert) = design(&plant, &basis, &args.design)?;
    write_json(&args.out, "gains.json", &GainsFile::new(&ctrl, &cert))?;
    let text = report(&plant, &basis, &ctrl, &cert);
    write_atomic(&args.out, "report.txt", &text)?;
    if args.dump_basis {
        write_json(&args.out, "basis.json", &basis)?;
    }
    if args.dump_transform {
        write_json(&args.out, "transform.json", &io::transform_dump(&ctrl.transform, &basis, ctrl.modes))?;
    }
    print!("{text}");
    Ok(Status::Ok)
}

/// Controller and overshoot constant from a gains file, re-deriving the
/// transform and `K_Q` from the stored design parameters.
fn controller_from_file(plant: &Validated, basis: &Basis, path: &Path) -> Result<(Gains, f64)> {
    let file: GainsFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    let options = SynthesisOptions { modes: Some(file.n), pole_offsets: Some(file.pole_offsets.clone()) };
    let mut ctrl = build_controller(plant, basis, file.delta, &options)?;
    ctrl.gain = file.gain_matrix(plant.m())?;
    Ok((ctrl, file.certificate.overshoot))
}

pub fn simulate(args: SimulateArgs) -> Result<Status> {
    let plant = load_plant(&args.plant)?;
    let m_modes = args.design.m_modes;
    let basis = basis_for(&plant, m_modes)?;
    let ic: Initial = serde_json::from_str(&fs::read_to_string(&args.initial)?)?;

    let controller = if args.open_loop {
        None
    } else if let Some(path) = &args.gains {
        Some(controller_from_file(&plant, &basis, path)?)
    } else {
        let (ctrl, cert) = design(&plant, &basis, &args.design)?;
        Some((ctrl, cert.overshoot))
    };

    let config = SimConfig {
        m_modes,
        t_final: args.t_final,
        dt_out: args.dt_out.unwrap_or(args.t_final / 400.0),
        grid_points: args.grid_points,
        ..SimConfig::new(args.t_final)
    };
    let traj = run_simulation(
        &plant,
        controller.as_ref().map(|c| &c.0),
        &basis,
        &ic,
        &config,
        controller.as_ref().map(|c| c.1),
    )?;

    let grid = uniform_grid(plant.length, config.grid_points);
    let fields = reconstruct_field(&traj, &basis, &grid)?;
    let bound = controller.as_ref().map(|(c, m)| bound_curve(&traj, *m, c.delta));
    write_atomic(&args.out, "modal.csv", &io::modal_csv(&traj))?;
    write_atomic(&args.out, "field.csv", &io::field_csv(&traj.times, &grid, &fields))?;
    write_atomic(&args.out, "norms.csv", &io::norms_csv(&traj, bound.as_deref()))?;

    match traj.fitted_decay {
        Some(rate) => println!("fitted decay      {rate:.6}"),
        None => println!("fitted decay      n/a (zero norm)"),
    }
    println!("initial norm      {:.6e}", traj.l2_norm[0]);
    println!("final norm        {:.6e}", traj.l2_norm.last().copied().unwrap_or(0.0));
    if let Some(ok) = traj.bound_satisfied {
        println!("certified bound   {}", if ok { "holds" } else { "VIOLATED" });
    }
    Ok(Status::Ok)
}

struct Check {
    name: String,
    passed: bool,
    detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

fn corrupt(ctrl: &mut Gains, spec: &[f64]) -> Result<()> {
    if spec.len() != 4 {
        return Err(Error::InvalidParameter("--corrupt-tbar takes order,row,col,value".into()));
    }
    let as_index = |v: f64| {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::InvalidParameter(format!("--corrupt-tbar index {v} is not a non-negative integer")))
        }
    };
    let (order, row, col) = (as_index(spec[0])?, as_index(spec[1])?, as_index(spec[2])?);
    let m = ctrl.m();
    if order == 0 || order > ctrl.transform.tbar.len() || row >= m || col >= m {
        return Err(Error::InvalidParameter(format!(
            "--corrupt-tbar ({order}, {row}, {col}) does not address a stored coefficient"
        )));
    }
    ctrl.transform.tbar[order - 1][(row, col)] += spec[3];
    Ok(())
}

pub fn verify(args: VerifyArgs) -> Result<Status> {
    let plant = load_plant(&args.plant)?;
    let m = plant.m();
    let m_modes = args.design.m_modes;
    let basis = basis_for(&plant, m_modes)?;
    let delta = require_delta(&args.design)?;
    let options = SynthesisOptions { modes: args.design.n, pole_offsets: args.design.pole_offsets.clone() };
    let mut ctrl = build_controller(&plant, &basis, delta, &options)?;
    if let Some(spec) = &args.corrupt_tbar {
        corrupt(&mut ctrl, spec)?;
    }
    let big_n = ctrl.modes;
    let mut checks = Vec::new();

    for c in ctrl.transform.check(&plant) {
        checks.push(check(
            format!("sylvester[{}]", c.order),
            c.passed(),
            format!("max|R|={:.3e} at ({}, {}) tol={:.1e}", c.max_abs, c.row, c.col, c.tolerance),
        ));
    }

    let det_gap = (1..=big_n)
        .map(|n| (ctrl.transform.assemble(basis.lambda(n), n, big_n).t.determinant() - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(check("det T_n = 1", det_gap <= 1e-10, format!("max|det-1|={det_gap:.3e}")));

    let direct = modal_gains(&plant, &ctrl.transform, &basis, &ctrl.k_q, big_n);
    let via_gn = modal_gains_via_gn(&plant, &ctrl.transform, &basis, &ctrl.k_q, big_n);
    let route_gap = direct.iter().zip(&via_gn).map(|(a, b)| (a - b).amax() / a.amax().max(1.0)).fold(0.0, f64::max);
    checks.push(check("gain routes agree", route_gap <= 1e-9, format!("max rel gap={route_gap:.3e}")));

    let worst_abscissa = (1..=big_n)
        .map(|n| spectral_abscissa(&target_block(&plant, &ctrl.k_q, basis.lambda(n))))
        .fold(f64::NEG_INFINITY, f64::max);
    if big_n > 0 {
        checks.push(check(
            "block abscissas <= -delta",
            worst_abscissa <= -delta * (1.0 - 1e-9),
            format!("max abscissa={worst_abscissa:.6}"),
        ));
    }

    if big_n > 0 && m_modes > big_n {
        let z0 = DVector::from_fn(m * m_modes, |k, _| 1.0 / ((k / m + 1) as f64).powi(2));
        let system = assemble_closed_loop(&plant, Some(&ctrl), &basis, m_modes)?;
        let traj = integrate(&system, &z0, m, args.t_final, args.t_final / 400.0)?;
        let r = target_residual(&plant, &ctrl, &basis, &system, &traj);
        checks.push(check(
            "target dynamics",
            r.derivative <= 1e-6 && r.propagation <= 1e-6,
            format!("rel residual={:.3e} rel propagation={:.3e}", r.derivative, r.propagation),
        ));
    }

    match cascade_stab::synthesis::certificate_constants(&plant, &ctrl, &basis, m_modes) {
        Ok(cert) => {
            if big_n > 0 {
                let g = cert.gamma_margin();
                checks.push(check("Gamma < 0", g < 0.0, format!("max eig={g:.6}")));
            }
            if !cert.omega_margins.is_empty() {
                let o = cert.omega_margin();
                checks.push(check("Omega_n < 0", o < 0.0, format!("max eig={o:.6} over n={}..{}", big_n + 1, m_modes)));
            }
        }
        Err(e) => checks.push(check("certificate", false, e.to_string())),
    }

    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        println!("{} {:<26} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    Ok(if failed == 0 { Status::Ok } else { Status::ChecksFailed })
}

pub fn bench(args: BenchArgs) -> Result<Status> {
    let text = fs::read_to_string(&args.plant.plant)?;
    let mut spec = io::parse_plant(&text)?;
    let needed = args.ns.iter().copied().max().unwrap_or(0);
    if spec.shapes.len() < needed {
        eprintln!(
            "note: plant has {} shapes; using {needed} indicators of width {}",
            spec.shapes.len(),
            args.shape_width
        );
        spec.shapes = step_shapes(needed, args.shape_width);
    }
    let plant = validate_plant(spec, args.plant.diffusion_tol)?;
    let rows = run_benchmark(&plant, args.delta, &args.ns, args.repeats)?;
    let csv = bench_csv(&rows);
    write_atomic(&args.out, "bench.csv", &csv)?;
    println!("{:>4} {:>14} {:>14} {:>10}", "N", "t_modal [s]", "t_direct [s]", "ratio");
    for r in &rows {
        println!("{:>4} {:>14.6e} {:>14.6e} {:>10.2}", r.n, r.t_modal, r.t_direct, r.ratio);
    }
    Ok(Status::Ok)
}
