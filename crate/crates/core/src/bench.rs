//! Wall-clock comparison of the modal synthesis against the direct
//! `mN`-dimensional Riccati design.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::Result;
use crate::model::ValidatedPlant;
use crate::spectral::{build_basis, SpectralBasis};
use crate::synthesis::{build_controller, direct_baseline, SynthesisOptions};

/// Minimum wall time of one timing sample; fast calls are repeated until
/// a sample reaches it.
pub const MIN_SAMPLE: Duration = Duration::from_millis(5);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    #[serde(rename = "N")]
    pub n: usize,
    /// Seconds per modal synthesis (median).
    pub t_modal: f64,
    /// Seconds per direct synthesis (median).
    pub t_direct: f64,
    pub ratio: f64,
}

/// Median seconds per call of `f` over `repeats` samples.
pub fn time_median<F: FnMut() -> Result<()>>(repeats: usize, mut f: F) -> Result<f64> {
    let mut samples = Vec::with_capacity(repeats.max(1));
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let mut calls = 0u32;
        while calls == 0 || start.elapsed() < MIN_SAMPLE {
            f()?;
            calls += 1;
        }
        samples.push(start.elapsed().as_secs_f64() / f64::from(calls));
    }
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    Ok(if samples.len() % 2 == 1 { samples[mid] } else { 0.5 * (samples[mid - 1] + samples[mid]) })
}

/// Times both syntheses for one `N`. The modal timing covers the transform
/// family, `K_Q`, the per-mode gains and the `ℬ_{N×N}` solve; the basis is
/// shared by both methods and built beforehand.
pub fn bench_one(
    plant: &ValidatedPlant<f64>,
    basis: &SpectralBasis<f64>,
    delta: f64,
    n: usize,
    repeats: usize,
) -> Result<BenchRow> {
    let opts = SynthesisOptions { modes: Some(n), ..Default::default() };
    let t_modal = time_median(repeats, || build_controller(plant, basis, delta, &opts).map(drop))?;
    let t_direct = time_median(repeats, || direct_baseline(plant, basis, delta, n).map(drop))?;
    Ok(BenchRow { n, t_modal, t_direct, ratio: t_direct / t_modal })
}

/// Runs [`bench_one`] for every entry of `ns`.
pub fn run_benchmark(plant: &ValidatedPlant<f64>, delta: f64, ns: &[usize], repeats: usize) -> Result<Vec<BenchRow>> {
    let max_n = ns.iter().copied().max().unwrap_or(0);
    let basis = build_basis(plant.length, plant.gamma1, plant.gamma2, max_n + 1)?;
    ns.iter().map(|&n| bench_one(plant, &basis, delta, n, repeats)).collect()
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("N,t_modal,t_direct,ratio\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.n, r.t_modal, r.t_direct, r.ratio));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even_counts() {
        let mut k = 0;
        let t = time_median(3, || {
            k += 1;
            Ok(())
        })
        .unwrap();
        assert!(t >= 0.0 && k >= 3);
    }

    #[test]
    fn csv_header() {
        let rows = [BenchRow { n: 2, t_modal: 1.0, t_direct: 2.0, ratio: 2.0 }];
        assert_eq!(bench_csv(&rows), "N,t_modal,t_direct,ratio\n2,1,2,2\n");
    }
}
