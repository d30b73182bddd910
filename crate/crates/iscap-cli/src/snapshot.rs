//! Per-subcarrier distribution records for ellipse plots: the centre is the
//! mean `(μ^R_k, μ^I_k)` and the axes follow the variances.

use std::io::{Read, Write};

use iscap_core::{optimize_family, Constraints, DesignResult, GaussianInput};

use crate::config::{SnapshotSpec, SweepSpec};
use crate::sweep::scenario;
use crate::CliError;

pub const SNAPSHOT_HEADER: [&str; 5] = ["k", "mu_r", "mu_i", "var_r", "var_i"];

/// Designs the configured family on the configured realization.
pub fn run_snapshot(spec: &SweepSpec, snap: &SnapshotSpec) -> Result<DesignResult, CliError> {
    let scn = scenario(spec, snap.realization)?;
    let cons = Constraints::new(spec.p_max_w, snap.c_min, snap.s_max)?;
    let solver = iscap_core::SolverConfig {
        seed: crate::sweep::realization_seed(spec.seed, snap.realization).wrapping_add(1),
        ..spec.solver.clone()
    };
    Ok(optimize_family(&scn, &cons, &solver, snap.family, &[])?)
}

/// Writes one row per subcarrier; an infeasible result gives the header
/// only.
pub fn write_snapshot<W: Write>(result: &DesignResult, w: W) -> Result<(), CliError> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(SNAPSHOT_HEADER)?;
    if result.feasible {
        let input = &result.input;
        let k = input.k();
        for i in 0..k {
            wr.serialize((i, input.mu[i], input.mu[i + k], input.sigma[i], input.sigma[i + k]))?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Parses a snapshot file back into the input it describes, or `None` for
/// a header-only file.
pub fn read_snapshot<R: Read>(r: R) -> Result<Option<GaussianInput>, CliError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().ne(SNAPSHOT_HEADER) {
        return Err(CliError::Config(format!("unexpected snapshot header {:?}", header)));
    }
    let mut rows: Vec<(usize, f64, f64, f64, f64)> = Vec::new();
    for rec in rd.deserialize() {
        rows.push(rec?);
    }
    if rows.is_empty() {
        return Ok(None);
    }
    rows.sort_by_key(|r| r.0);
    let k = rows.len();
    if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
        return Err(CliError::Config("snapshot rows must cover k = 0..K-1".into()));
    }
    let mut mu = vec![0.0; 2 * k];
    let mut sigma = vec![0.0; 2 * k];
    for (i, &(_, mr, mi, vr, vi)) in rows.iter().enumerate() {
        mu[i] = mr;
        mu[i + k] = mi;
        sigma[i] = vr;
        sigma[i + k] = vi;
    }
    Ok(Some(GaussianInput::new(mu, sigma)?))
}
