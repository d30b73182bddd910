//! Input-distribution design by ADMM over the power matrix `P`, the mean
//! matrix `U` and the variances `σ`, followed by rank-one recovery of the
//! mean vector.
//!
//! Internally powers are expressed in units of `P_max` and the objective in
//! units of the zero-mean uniform allocation's `zDC` (see [`problem`]).

pub mod init;
pub mod objective;
pub mod p_step;
pub mod problem;
pub mod randomization;
pub mod u_step;

use std::fmt;
use std::str::FromStr;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::{CommChannel, PoweringChannel};
use crate::error::{Error, Result};
use crate::linalg::outer;
use crate::metrics::powering::{PoweringCoefficients, RectennaModel};
use crate::metrics::rate::{achievable_rate, capacity, composite_gains, min_power_water_filling};
use crate::metrics::sensing::{normalized_ub, ub_fap, SensingGrid};
use crate::signal::{GaussianInput, OfdmConfig};

pub use objective::{taylor_grad_p, taylor_grad_u, Objective};
pub use p_step::{linearize_ub, solve_p_step, PStepOutput, UbSurrogate};
pub use problem::Problem;
pub use randomization::gaussian_randomization;
pub use u_step::{project_psd_halfspace, sensing_radius, solve_u_sigma_step, UStepOutput};

/// Rate slack accepted on a feasible result.
pub const RATE_TOL: f64 = 1e-6;
/// Slack on the normalized sidelobe bound accepted on a feasible result.
pub const SENSING_TOL: f64 = 1e-6;
/// Relative slack on the power budget accepted on a feasible result.
pub const POWER_TOL: f64 = 1e-9;

/// Input family: the full asymmetric design and the three baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    /// Independent real/imaginary means and variances.
    Opt,
    /// Real and imaginary parts tied.
    Symmetric,
    /// Zero mean, tied variances.
    Cscg,
    /// Minimum-power water-filling plus uniform means.
    Coexist,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Opt, Family::Symmetric, Family::Cscg, Family::Coexist];

    pub fn name(self) -> &'static str {
        match self {
            Family::Opt => "OPT",
            Family::Symmetric => "Symmetric",
            Family::Cscg => "CSCG",
            Family::Coexist => "Coexist",
        }
    }

    /// Whether every input of `other` is also an input of `self`.
    pub fn contains(self, other: Family) -> bool {
        match self {
            Family::Opt => true,
            Family::Symmetric => other != Family::Opt,
            Family::Cscg => other == Family::Cscg,
            Family::Coexist => other == Family::Coexist,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "opt" => Ok(Family::Opt),
            "symmetric" => Ok(Family::Symmetric),
            "cscg" => Ok(Family::Cscg),
            "coexist" => Ok(Family::Coexist),
            _ => Err(Error::InvalidConfig(format!("unknown input family '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    /// Transmit power budget in W.
    pub p_max: f64,
    /// Minimum rate in bits/s/Hz.
    pub c_min: f64,
    /// Bound on the normalized sidelobe metric.
    pub s_max: f64,
}

impl Constraints {
    pub fn new(p_max: f64, c_min: f64, s_max: f64) -> Result<Self> {
        let c = Self { p_max, c_min, s_max };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_max > 0.0) || !self.p_max.is_finite() {
            return Err(Error::InvalidConfig(format!("P_max must be positive, got {}", self.p_max)));
        }
        if !(self.c_min >= 0.0) {
            return Err(Error::InvalidConfig(format!("C_min must be non-negative, got {}", self.c_min)));
        }
        if !(self.s_max >= -1.0) {
            return Err(Error::InvalidConfig(format!("S_max must be at least -1, got {}", self.s_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// ADMM penalty in units of the curvature scale of the normalized
    /// objective.
    pub rho: f64,
    /// Factor applied to the penalty after every sweep.
    pub rho_growth: f64,
    pub eps0: f64,
    pub max_admm_iters: usize,
    pub max_sca_iters: usize,
    pub u2_lo: f64,
    pub u2_hi: f64,
    pub n_rand: usize,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 0.3,
            rho_growth: 1.6,
            eps0: 1e-4,
            max_admm_iters: 20,
            max_sca_iters: 50,
            u2_lo: 0.0,
            u2_hi: 1e6,
            n_rand: 100,
            inner_tol: 1e-7,
            inner_max_iters: 500,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::InvalidConfig("rho must be positive".into()));
        }
        if !(self.rho_growth >= 1.0) {
            return Err(Error::InvalidConfig("rho growth must be at least 1".into()));
        }
        if !(self.eps0 > 0.0) || !(self.inner_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if !(self.u2_lo >= 0.0 && self.u2_lo < self.u2_hi) {
            return Err(Error::InvalidConfig(format!("bad multiplier bracket [{}, {}]", self.u2_lo, self.u2_hi)));
        }
        if self.n_rand == 0 || self.max_admm_iters == 0 || self.max_sca_iters == 0 || self.inner_max_iters == 0 {
            return Err(Error::InvalidConfig("iteration counts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything about one channel realization that the design depends on.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: OfdmConfig,
    pub rect: RectennaModel,
    pub coeffs: PoweringCoefficients,
    pub grid: SensingGrid,
    pub cchan: CommChannel,
}

impl Scenario {
    pub fn new(cfg: &OfdmConfig, pchan: &PoweringChannel, cchan: &CommChannel, rect: RectennaModel) -> Result<Self> {
        cfg.validate()?;
        if cchan.response.len() != cfg.k {
            return Err(Error::LengthMismatch { expected: cfg.k, got: cchan.response.len() });
        }
        Ok(Self {
            cfg: *cfg,
            rect,
            coeffs: PoweringCoefficients::build(pchan, cfg)?,
            grid: SensingGrid::new(cfg),
            cchan: cchan.clone(),
        })
    }

    pub fn problem(&self, cons: &Constraints, family: Family) -> Problem {
        let gains = composite_gains(&self.cchan, &self.cfg);
        Problem::new(&self.coeffs, &self.rect, &self.grid, &gains, cons.p_max, cons.c_min, cons.s_max, family)
    }
}

/// ADMM iterate in normalized units.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub p: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
    pub primal_residual: Vec<f64>,
    pub objective: Vec<f64>,
}

impl AdmmState {
    pub fn new(u: DMatrix<f64>, sigma: Vec<f64>) -> Self {
        let p = problem::with_diag_added(&u, &sigma);
        let n = p.nrows();
        Self { p, u, sigma, v: DMatrix::zeros(n, n), primal_residual: Vec::new(), objective: Vec::new() }
    }

    /// `‖U + diag σ − P‖ / ‖P‖`.
    pub fn residual(&self) -> f64 {
        let r = problem::with_diag_added(&self.u, &self.sigma) - &self.p;
        r.norm() / self.p.norm().max(f64::MIN_POSITIVE)
    }
}

/// Which candidate a result came from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    #[default]
    Admm,
    StartPoint,
    /// Solution of a contained family.
    Nested(Family),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub primal_residual: Vec<f64>,
    pub objective: Vec<f64>,
    pub converged: bool,
    pub p_sca_iters: usize,
    pub u_sca_iters: usize,
    pub inner_iters: usize,
    pub feasible_candidates: usize,
    pub repaired: bool,
    pub source: Source,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub family: Family,
    pub input: GaussianInput,
    /// Harvested-power surrogate; zero for infeasible results.
    pub achieved_zdc: f64,
    pub achieved_rate: f64,
    /// Normalized sidelobe bound.
    pub achieved_ub: f64,
    pub feasible: bool,
    pub iterations: usize,
    pub diagnostics: Diagnostics,
}

impl DesignResult {
    fn infeasible(family: Family, k: usize, note: String) -> Self {
        debug!("{family}: infeasible ({note})");
        Self {
            family,
            input: GaussianInput::zeros(k),
            achieved_zdc: 0.0,
            achieved_rate: 0.0,
            achieved_ub: 0.0,
            feasible: false,
            iterations: 0,
            diagnostics: Diagnostics { note: Some(note), ..Default::default() },
        }
    }
}

/// Rate, normalized bound and `zDC` of a physical input, and whether the
/// constraints hold within the result tolerances.
pub fn assess(scn: &Scenario, cons: &Constraints, input: &GaussianInput) -> Result<(f64, f64, f64, bool)> {
    let power = input.power();
    let total: f64 = power.iter().sum();
    let rate = achievable_rate(&input.sigma, &scn.cchan, &scn.cfg)?;
    let ub = normalized_ub(ub_fap(&power, &input.mu, &scn.grid)?, total, &scn.grid);
    let alloc = input.allocation();
    let zdc = scn.coeffs.zdc_total(&scn.rect, &alloc.p, &alloc.u)?;
    let ok = rate >= cons.c_min - RATE_TOL && ub <= cons.s_max + SENSING_TOL && total <= cons.p_max * (1.0 + POWER_TOL);
    Ok((rate, ub, zdc, ok))
}

fn finish(
    scn: &Scenario,
    cons: &Constraints,
    family: Family,
    input: GaussianInput,
    iterations: usize,
    diagnostics: Diagnostics,
) -> Result<DesignResult> {
    let (rate, ub, zdc, ok) = assess(scn, cons, &input)?;
    if !ok {
        let mut r = DesignResult::infeasible(
            family,
            scn.cfg.k,
            format!("final point violates constraints: rate {rate:.6e}, bound {ub:.6e}"),
        );
        r.iterations = iterations;
        r.diagnostics.primal_residual = diagnostics.primal_residual;
        r.diagnostics.objective = diagnostics.objective;
        return Ok(r);
    }
    Ok(DesignResult {
        family,
        input,
        achieved_zdc: zdc,
        achieved_rate: rate,
        achieved_ub: ub,
        feasible: true,
        iterations,
        diagnostics,
    })
}

fn physical(prob: &Problem, mu: &[f64], sigma: &[f64]) -> Result<GaussianInput> {
    let s = prob.power_scale;
    GaussianInput::new(mu.iter().map(|m| m * s.sqrt()).collect(), sigma.iter().map(|v| v * s).collect())
}

/// Normalized minimum-power variances for the rate constraint, or `None`
/// when the budget cannot carry `C_min`.
fn min_power_sigma(prob: &Problem) -> Option<Vec<f64>> {
    if capacity(&prob.gains, 1.0) < prob.c_min {
        return None;
    }
    let sigma = min_power_water_filling(&prob.gains, prob.c_min).ok()?;
    (sigma.iter().sum::<f64>() <= 1.0 + 1e-12).then_some(sigma)
}

fn uniform_mean(prob: &Problem, power: f64) -> Vec<f64> {
    vec![(power.max(0.0) / prob.dim() as f64).sqrt(); prob.dim()]
}

/// Runs the ADMM sweeps from `state` until the consensus residual drops
/// below `eps0` or the sweep cap is hit. Subproblem infeasibility stops the
/// sweeps and is reported in the returned note.
pub fn run_admm(prob: &Problem, mut state: AdmmState, cfg: &SolverConfig, diag: &mut Diagnostics) -> AdmmState {
    let scale = prob.obj.quad_lipschitz().max(1.0);
    let mut sweep_cfg = cfg.clone();
    sweep_cfg.rho = cfg.rho * scale;
    for sweep in 0..cfg.max_admm_iters {
        if sweep > 0 {
            let next = sweep_cfg.rho * cfg.rho_growth;
            state.v *= sweep_cfg.rho / next;
            sweep_cfg.rho = next;
        }
        let cfg = &sweep_cfg;
        let pstep = match solve_p_step(prob, &state.u, &state.sigma, &state.v, &state.p, cfg) {
            Ok(s) => s,
            Err(e) => {
                diag.note = Some(format!("P-step: {e}"));
                break;
            }
        };
        diag.p_sca_iters += pstep.sca_iters;
        state.p = pstep.p;
        let ustep = match solve_u_sigma_step(prob, &state.p, &state.v, &state.u, cfg) {
            Ok(s) => s,
            Err(e) => {
                diag.note = Some(format!("U-step: {e}"));
                break;
            }
        };
        diag.u_sca_iters += ustep.sca_iters;
        diag.inner_iters += ustep.inner_iters;
        state.u = ustep.u;
        state.sigma = ustep.sigma;
        let gap = &state.p - problem::with_diag_added(&state.u, &state.sigma);
        state.v += &gap;
        let res = state.residual();
        state.primal_residual.push(res);
        state.objective.push(prob.obj.value(&state.p, &state.u));
        debug!("{}: sweep {} residual {res:.3e}", prob.family, state.primal_residual.len());
        if res < cfg.eps0 {
            diag.converged = true;
            break;
        }
    }
    state
}

/// Keeps the total variance within the budget by blending toward the
/// minimum-power allocation, which preserves the rate constraint.
fn repair_variance(sigma: &[f64], floor: &[f64]) -> Vec<f64> {
    let total: f64 = sigma.iter().sum();
    if total <= 1.0 {
        return sigma.to_vec();
    }
    let base: f64 = floor.iter().sum();
    let t = ((total - 1.0) / (total - base).max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
    sigma.iter().zip(floor).map(|(s, f)| (1.0 - t) * s + t * f).collect()
}

fn coexist(scn: &Scenario, cons: &Constraints, prob: &Problem) -> Result<DesignResult> {
    let Some(sigma) = min_power_sigma(prob) else {
        return Ok(DesignResult::infeasible(Family::Coexist, scn.cfg.k, "rate exceeds capacity".into()));
    };
    let rem = 1.0 - sigma.iter().sum::<f64>();
    let mu = uniform_mean(prob, rem);
    finish(scn, cons, Family::Coexist, physical(prob, &mu, &sigma)?, 0, Diagnostics::default())
}

/// Whether `input` lies in `family`'s parameterization.
pub fn in_family(input: &GaussianInput, family: Family) -> bool {
    let k = input.k();
    let tied = (0..k).all(|i| input.mu[i] == input.mu[i + k] && input.sigma[i] == input.sigma[i + k]);
    match family {
        Family::Opt => true,
        Family::Symmetric => tied,
        Family::Cscg => tied && input.mu.iter().all(|&m| m == 0.0),
        Family::Coexist => false,
    }
}

/// Designs the input of `family`, also considering the feasible points in
/// `nested` that belong to `family`'s parameterization. The best feasible
/// point is returned.
pub fn optimize_family(
    scn: &Scenario,
    cons: &Constraints,
    cfg: &SolverConfig,
    family: Family,
    nested: &[&DesignResult],
) -> Result<DesignResult> {
    cons.validate()?;
    cfg.validate()?;
    let prob = scn.problem(cons, family);
    if family == Family::Coexist {
        return coexist(scn, cons, &prob);
    }
    let Some(sigma0) = min_power_sigma(&prob) else {
        return Ok(DesignResult::infeasible(family, scn.cfg.k, "rate exceeds capacity".into()));
    };
    let rem = 1.0 - sigma0.iter().sum::<f64>();
    let start = init::start_point(&prob, &sigma0);
    let (mu0, sig0) = match &start {
        Some(s) => (s.mu.clone(), s.sigma.clone()),
        None if family == Family::Cscg => {
            (vec![0.0; prob.dim()], sigma0.iter().map(|s| s + rem / prob.dim() as f64).collect())
        }
        None => (uniform_mean(&prob, rem), sigma0.clone()),
    };
    let mu0 = DVector::from_vec(mu0);
    let state0 = AdmmState::new(outer(&mu0, &mu0), sig0);

    let mut diag = Diagnostics::default();
    let state = run_admm(&prob, state0, cfg, &mut diag);
    let iterations = state.primal_residual.len();
    diag.primal_residual = state.primal_residual.clone();
    diag.objective = state.objective.clone();

    let sigma = repair_variance(&state.sigma, &sigma0);
    let own = match gaussian_randomization(&prob, &state.u, &sigma, cfg.n_rand, cfg.seed) {
        Ok(r) => {
            diag.feasible_candidates = r.feasible_candidates;
            diag.repaired = r.repaired;
            let mu = match init::polish(&prob, &r.mu, &sigma) {
                Some(p) if p.value > r.value => p.mu,
                _ => r.mu,
            };
            finish(scn, cons, family, physical(&prob, &mu, &sigma)?, iterations, diag)?
        }
        Err(e) => {
            let mut r = DesignResult::infeasible(family, scn.cfg.k, e.to_string());
            r.iterations = iterations;
            r.diagnostics.primal_residual = diag.primal_residual;
            r.diagnostics.objective = diag.objective;
            r
        }
    };

    let mut best = own;
    let mut others: Vec<(Source, DesignResult)> =
        nested.iter().map(|r| (Source::Nested(r.family), (*r).clone())).collect();
    if family != Family::Cscg {
        others.push((Source::Nested(Family::Coexist), coexist(scn, cons, &prob)?));
    }
    if let Some(s) = start {
        let r = finish(scn, cons, family, physical(&prob, &s.mu, &s.sigma)?, 0, Diagnostics::default())?;
        others.push((Source::StartPoint, r));
    }
    for (source, other) in others {
        if !other.feasible || !(family.contains(other.family) || in_family(&other.input, family)) {
            continue;
        }
        if !best.feasible || other.achieved_zdc > best.achieved_zdc {
            let mut d = best.diagnostics.clone();
            d.source = source;
            best = DesignResult { family, iterations: best.iterations, diagnostics: d, ..other };
        }
    }
    Ok(best)
}

/// Optimized asymmetric design.
pub fn optimize(scn: &Scenario, cons: &Constraints, cfg: &SolverConfig) -> Result<DesignResult> {
    optimize_family(scn, cons, cfg, Family::Opt, &[])
}

/// One of the reference families, run on its own.
pub fn baseline(kind: Family, scn: &Scenario, cons: &Constraints, cfg: &SolverConfig) -> Result<DesignResult> {
    optimize_family(scn, cons, cfg, kind, &[])
}

/// All requested families at one constraint point, each seeded with the
/// solutions of the families it contains.
pub fn optimize_nested(
    scn: &Scenario,
    cons: &Constraints,
    cfg: &SolverConfig,
    families: &[Family],
) -> Result<Vec<DesignResult>> {
    let order = [Family::Coexist, Family::Cscg, Family::Symmetric, Family::Opt];
    let mut done: Vec<DesignResult> = Vec::new();
    for f in order {
        let needed = families.contains(&f) || families.iter().any(|g| *g != f && g.contains(f));
        if !needed {
            continue;
        }
        let nested: Vec<&DesignResult> = done.iter().filter(|r| f.contains(r.family) && r.family != f).collect();
        let r = optimize_family(scn, cons, cfg, f, &nested)?;
        done.push(r);
    }
    Ok(families.iter().map(|f| done.iter().find(|r| r.family == *f).cloned().expect("family computed")).collect())
}
