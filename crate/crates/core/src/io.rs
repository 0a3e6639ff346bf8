//! JSON and CSV artifacts.
//!
//! All reals are written with the shortest representation that parses back
//! to the same `f64`, so files round-trip bit-exactly and identical runs
//! produce identical bytes.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PlantSpec, ShapeFunction};
use crate::simulator::Trajectory;
use crate::spectral::SpectralBasis;
use crate::synthesis::{Certificate, Controller};
use crate::transform::TransformFamily;

fn rows_of(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!("{what}: every row must have {ncols} entries")));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.iter().flatten().copied()))
}

/// On-disk plant description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantFile {
    pub m: usize,
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "L")]
    pub l: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    #[serde(default)]
    pub shapes: Vec<ShapeFunction<f64>>,
}

impl PlantFile {
    pub fn from_spec(spec: &PlantSpec<f64>) -> Self {
        PlantFile {
            m: spec.m(),
            d: spec.diffusion.clone(),
            q: rows_of(&spec.coupling),
            l: spec.length,
            gamma1: spec.gamma1,
            gamma2: spec.gamma2,
            shapes: spec.shapes.clone(),
        }
    }

    pub fn into_spec(self) -> Result<PlantSpec<f64>> {
        if self.d.len() != self.m || self.q.len() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "m = {} but D has {} entries and Q has {} rows",
                self.m,
                self.d.len(),
                self.q.len()
            )));
        }
        Ok(PlantSpec {
            coupling: matrix_from_rows(&self.q, self.m, "Q")?,
            diffusion: self.d,
            length: self.l,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            shapes: self.shapes,
        })
    }
}

pub fn parse_plant(text: &str) -> Result<PlantSpec<f64>> {
    serde_json::from_str::<PlantFile>(text)?.into_spec()
}

pub fn plant_to_json(spec: &PlantSpec<f64>) -> Result<String> {
    Ok(serde_json::to_string_pretty(&PlantFile::from_spec(spec))?)
}

/// On-disk synthesis result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainsFile {
    pub delta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K_Q")]
    pub k_q: Vec<f64>,
    #[serde(rename = "Kbar")]
    pub kbar: Vec<Vec<f64>>,
    #[serde(rename = "Bmat")]
    pub bmat: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    pub pole_offsets: Vec<f64>,
    pub certificate: CertificateFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub rho: f64,
    pub rho_bar: f64,
    pub beta: f64,
    pub rho0: f64,
    pub c_lower: f64,
    pub c_upper: f64,
    #[serde(rename = "M")]
    pub overshoot: f64,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub gamma_margin: f64,
    pub omega_margin: f64,
}

impl GainsFile {
    pub fn new(controller: &Controller<f64>, cert: &Certificate<f64>) -> Self {
        GainsFile {
            delta: controller.delta,
            n: controller.modes,
            k_q: controller.k_q.iter().copied().collect(),
            kbar: controller.kbar.iter().map(|r| r.iter().copied().collect()).collect(),
            bmat: rows_of(&controller.bmat),
            k: rows_of(&controller.gain),
            pole_offsets: controller.pole_offsets.clone(),
            certificate: CertificateFile {
                rho: cert.rho,
                rho_bar: cert.rho_bar,
                beta: cert.beta,
                rho0: cert.rho0,
                c_lower: cert.c_lower,
                c_upper: cert.c_upper,
                overshoot: cert.overshoot,
                p: rows_of(&controller.p),
                gamma_margin: if cert.gamma_margins.is_empty() { f64::MIN } else { cert.gamma_margin() },
                omega_margin: if cert.omega_margins.is_empty() { f64::MIN } else { cert.omega_margin() },
            },
        }
    }

    /// `K` as an `N × mN` matrix.
    pub fn gain_matrix(&self, m: usize) -> Result<DMatrix<f64>> {
        if self.k.len() != self.n {
            return Err(Error::DimensionMismatch(format!("K has {} rows, N = {}", self.k.len(), self.n)));
        }
        matrix_from_rows(&self.k, m * self.n, "K")
    }
}

/// Per-mode transform dump.
#[derive(Debug, Clone, Serialize)]
pub struct TransformDump {
    pub family: Vec<Vec<Vec<f64>>>,
    pub sigma_bar: usize,
    pub modes: Vec<ModeTransformDump>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeTransformDump {
    pub n: usize,
    pub lambda: f64,
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    #[serde(rename = "T_inv")]
    pub t_inv: Vec<Vec<f64>>,
}

pub fn transform_dump(family: &TransformFamily<f64>, basis: &SpectralBasis<f64>, modes: usize) -> TransformDump {
    TransformDump {
        family: family.tbar.iter().map(rows_of).collect(),
        sigma_bar: family.sigma_bar,
        modes: (1..=modes.min(basis.len()))
            .map(|n| {
                let tn = family.assemble(basis.lambda(n), n, modes);
                ModeTransformDump { n, lambda: basis.lambda(n), t: rows_of(&tn.t), t_inv: rows_of(&tn.t_inv) }
            })
            .collect(),
    }
}

/// Modal CSV: `t,z1_1,z2_1,…,zm_M`, where `zi_n` is component `i` of mode `n`.
pub fn modal_csv(traj: &Trajectory<f64>) -> String {
    let mut out = String::from("t");
    for n in 1..=traj.modes() {
        for i in 1..=traj.m {
            let _ = write!(out, ",z{i}_{n}");
        }
    }
    out.push('\n');
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let _ = write!(out, "{t}");
        for v in s.iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Field CSV: `t,x,z1,…,zm`, one row per time and grid node.
pub fn field_csv(times: &[f64], grid: &[f64], fields: &[DMatrix<f64>]) -> String {
    let m = fields.first().map_or(0, |f| f.nrows());
    let mut out = String::from("t,x");
    for i in 1..=m {
        let _ = write!(out, ",z{i}");
    }
    out.push('\n');
    for (t, field) in times.iter().zip(fields) {
        for (k, x) in grid.iter().enumerate() {
            let _ = write!(out, "{t},{x}");
            for i in 0..m {
                let _ = write!(out, ",{}", field[(i, k)]);
            }
            out.push('\n');
        }
    }
    out
}

/// Norms CSV: `t,l2norm,bound`; the bound column is empty without a certificate.
pub fn norms_csv(traj: &Trajectory<f64>, bound: Option<&[f64]>) -> String {
    let mut out = String::from("t,l2norm,bound\n");
    for (k, (t, v)) in traj.times.iter().zip(&traj.l2_norm).enumerate() {
        match bound {
            Some(b) => {
                let _ = writeln!(out, "{t},{v},{}", b[k]);
            }
            None => {
                let _ = writeln!(out, "{t},{v},");
            }
        }
    }
    out
}
