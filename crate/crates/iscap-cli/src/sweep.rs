//! Region sweeps over constraint grids and channel realizations.

use std::io::Write;

use iscap_core::{generate_channels, optimize_nested, Constraints, DesignResult, Family, Scenario, SolverConfig};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::SweepSpec;
use crate::CliError;

pub const CSV_HEADER: [&str; 7] = ["family", "c_min", "s_max", "zdc_mean", "zdc_std", "feasible_frac", "seed"];

/// Averaged outcome of one family at one constraint point.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPoint {
    pub family: Family,
    pub c_min: f64,
    pub s_max: f64,
    /// Mean and standard deviation of `zDC` over feasible realizations.
    pub zdc_mean: f64,
    pub zdc_std: f64,
    pub feasible_frac: f64,
    pub seed: u64,
    /// Per-realization `zDC`, zero where infeasible.
    pub per_realization: Vec<f64>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    family: &'a str,
    c_min: f64,
    s_max: f64,
    zdc_mean: f64,
    zdc_std: f64,
    feasible_frac: f64,
    seed: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Channel seed of realization `r`.
pub fn realization_seed(seed: u64, r: usize) -> u64 {
    splitmix(seed ^ splitmix(r as u64))
}

/// Channel realization `r` of a sweep.
pub fn scenario(spec: &SweepSpec, r: usize) -> Result<Scenario, CliError> {
    let (pc, cc) = generate_channels(&spec.channel, &spec.ofdm, realization_seed(spec.seed, r))?;
    Ok(Scenario::new(&spec.ofdm, &pc, &cc, spec.rect)?)
}

/// Constraint points in sweep order: `C_min` outer, `S_max` inner.
pub fn points(spec: &SweepSpec) -> Vec<(f64, f64)> {
    spec.c_min.iter().flat_map(|&c| spec.s_max.iter().map(move |&s| (c, s))).collect()
}

fn solver_for(spec: &SweepSpec, r: usize) -> SolverConfig {
    SolverConfig { seed: realization_seed(spec.seed, r).wrapping_add(1), ..spec.solver.clone() }
}

/// One design per (point, realization) for every requested family, in
/// `(point, realization)` order.
pub fn solve_all(spec: &SweepSpec) -> Result<Vec<Vec<DesignResult>>, CliError> {
    let scenarios: Vec<Scenario> =
        (0..spec.realizations).into_par_iter().map(|r| scenario(spec, r)).collect::<Result<_, _>>()?;
    let pts = points(spec);
    let tasks: Vec<(usize, usize)> =
        (0..pts.len()).flat_map(|p| (0..spec.realizations).map(move |r| (p, r))).collect();
    info!("sweep: {} points x {} realizations, families {:?}", pts.len(), spec.realizations, spec.families);
    tasks
        .par_iter()
        .map(|&(p, r)| {
            let (c_min, s_max) = pts[p];
            let cons = Constraints::new(spec.p_max_w, c_min, s_max)?;
            Ok(optimize_nested(&scenarios[r], &cons, &solver_for(spec, r), &spec.families)?)
        })
        .collect()
}

/// Runs the sweep and aggregates in `(family, point)` order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<RegionPoint>, CliError> {
    let results = solve_all(spec)?;
    let pts = points(spec);
    let nr = spec.realizations;
    let mut out = Vec::with_capacity(spec.families.len() * pts.len());
    for (fi, &family) in spec.families.iter().enumerate() {
        for (p, &(c_min, s_max)) in pts.iter().enumerate() {
            let rs: Vec<&DesignResult> = (0..nr).map(|r| &results[p * nr + r][fi]).collect();
            let per_realization: Vec<f64> = rs.iter().map(|d| if d.feasible { d.achieved_zdc } else { 0.0 }).collect();
            let feasible: Vec<f64> = rs.iter().filter(|d| d.feasible).map(|d| d.achieved_zdc).collect();
            let n = feasible.len();
            let (mean, std) = if n == 0 {
                (0.0, 0.0)
            } else {
                let mean = feasible.iter().sum::<f64>() / n as f64;
                let var = feasible.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / n as f64;
                (mean, var.sqrt())
            };
            out.push(RegionPoint {
                family,
                c_min,
                s_max,
                zdc_mean: mean,
                zdc_std: std,
                feasible_frac: n as f64 / nr as f64,
                seed: spec.seed,
                per_realization,
            });
        }
    }
    Ok(out)
}

pub fn write_csv<W: Write>(points: &[RegionPoint], w: W) -> Result<(), CliError> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for p in points {
        wr.serialize(CsvRow {
            family: p.family.name(),
            c_min: p.c_min,
            s_max: p.s_max,
            zdc_mean: p.zdc_mean,
            zdc_std: p.zdc_std,
            feasible_frac: p.feasible_frac,
            seed: p.seed,
        })?;
    }
    wr.flush()?;
    Ok(())
}

/// CSV text of a sweep.
pub fn sweep_csv(spec: &SweepSpec) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write_csv(&run_sweep(spec)?, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
