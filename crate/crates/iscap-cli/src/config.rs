//! Run configuration: a flat TOML file with one table per concern.
//!
//! ```toml
//! seed = 7
//! m = 16
//! realizations = 20
//! families = ["OPT", "Symmetric", "CSCG", "Coexist"]
//!
//! [ofdm]
//! k = 8
//! k_g = 4
//!
//! [sweep]
//! region = "SP"
//! c_min = [0.5]
//! s_max = [-0.9, -0.5, 0.0]
//! ```
//!
//! Every key is optional. Power and noise levels are given in dBm / dB and
//! converted to linear units while parsing.

use std::path::Path;

use iscap_core::channel::{db_to_linear, dbm_to_watts};
use iscap_core::oracle::{McRunConfig, OracleSuite};
use iscap_core::{ChannelGenConfig, Family, OfdmConfig, RectennaModel, SnrNormalization, SolverConfig};
use log::info;
use serde::Deserialize;

use crate::CliError;

/// Stand-in for an unconstrained sidelobe bound.
pub const LOOSE_S_MAX: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    /// Sensing-powering trade-off: `S_max` swept at fixed rate targets.
    Sp,
    /// Communication-powering trade-off: `C_min` swept with sensing loose.
    Cp,
    /// Full grid over both constraints.
    Scp,
}

impl RegionKind {
    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SP" => Some(RegionKind::Sp),
            "CP" => Some(RegionKind::Cp),
            "SCP" => Some(RegionKind::Scp),
            _ => None,
        }
    }

    fn default_c_min(self) -> Vec<f64> {
        match self {
            RegionKind::Sp => vec![0.0],
            RegionKind::Cp | RegionKind::Scp => vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }

    fn default_s_max(self) -> Vec<f64> {
        match self {
            RegionKind::Cp => vec![LOOSE_S_MAX],
            RegionKind::Sp | RegionKind::Scp => vec![-1.0, -0.9, -0.7, -0.5, -0.3, 0.0],
        }
    }
}

/// Constraint grid and model for a region sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub region: RegionKind,
    pub c_min: Vec<f64>,
    pub s_max: Vec<f64>,
    pub realizations: usize,
    pub families: Vec<Family>,
    pub ofdm: OfdmConfig,
    pub channel: ChannelGenConfig,
    pub solver: SolverConfig,
    pub rect: RectennaModel,
    pub p_max_w: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSpec {
    pub family: Family,
    pub c_min: f64,
    pub s_max: f64,
    pub realization: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub sweep: SweepSpec,
    pub oracle: OracleSuite,
    pub snapshot: SnapshotSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    seed: u64,
    m: usize,
    realizations: usize,
    families: Vec<String>,
    ofdm: RawOfdm,
    power: RawPower,
    rectenna: RawRectenna,
    channel: RawChannel,
    sweep: RawSweep,
    solver: SolverConfig,
    oracle: RawOracle,
    snapshot: RawSnapshot,
}

impl Default for RawConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            m: 16,
            realizations: 20,
            families: Family::ALL.iter().map(|f| f.name().to_string()).collect(),
            ofdm: RawOfdm::default(),
            power: RawPower::default(),
            rectenna: RawRectenna::default(),
            channel: RawChannel::default(),
            sweep: RawSweep::default(),
            solver: SolverConfig::default(),
            oracle: RawOracle::default(),
            snapshot: RawSnapshot::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOfdm {
    k: usize,
    k_g: usize,
    bandwidth_hz: f64,
    carrier_hz: f64,
}

impl Default for RawOfdm {
    fn default() -> Self {
        Self { k: 8, k_g: 4, bandwidth_hz: 30e6, carrier_hz: 5.18e9 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPower {
    p_max_dbm: f64,
}

impl Default for RawPower {
    fn default() -> Self {
        Self { p_max_dbm: 40.0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRectenna {
    k2: f64,
    k4: f64,
}

impl Default for RawRectenna {
    fn default() -> Self {
        let r = RectennaModel::default();
        Self { k2: r.k2, k4: r.k4 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawChannel {
    tap_count: usize,
    decay_taps: f64,
    powering_path_loss_db: f64,
    comm_path_loss_db: f64,
    powering_noise_dbm: f64,
    comm_noise_dbm: f64,
    /// `average`, `per_realization` or `path_loss`.
    snr_mode: String,
    snr_db: f64,
    zero_powering_noise: bool,
}

impl Default for RawChannel {
    fn default() -> Self {
        Self {
            tap_count: 3,
            decay_taps: 3.0,
            powering_path_loss_db: 58.0,
            comm_path_loss_db: 108.0,
            powering_noise_dbm: -78.0,
            comm_noise_dbm: -80.0,
            snr_mode: "average".into(),
            snr_db: 0.0,
            zero_powering_noise: false,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSweep {
    region: String,
    c_min: Option<Vec<f64>>,
    s_max: Option<Vec<f64>>,
}

impl Default for RawSweep {
    fn default() -> Self {
        Self { region: "SP".into(), c_min: None, s_max: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOracle {
    instances: usize,
    k: usize,
    k_g: usize,
    taps: usize,
    m: usize,
    frames: usize,
    include_noise: bool,
    oversample_half: bool,
}

impl Default for RawOracle {
    fn default() -> Self {
        let s = OracleSuite::default();
        Self {
            instances: s.instances,
            k: s.k,
            k_g: s.k_g,
            taps: s.taps,
            m: s.m,
            frames: s.mc.frame_count,
            include_noise: s.mc.include_noise,
            oversample_half: s.mc.oversample_half,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSnapshot {
    family: String,
    c_min: f64,
    s_max: f64,
    realization: usize,
}

impl Default for RawSnapshot {
    fn default() -> Self {
        Self { family: "OPT".into(), c_min: 0.0, s_max: LOOSE_S_MAX, realization: 0 }
    }
}

/// Line of `key` inside `[table]` (or at top level for an empty table).
fn locate(src: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == table && t.split('=').next().map(str::trim) == Some(key) {
            return Some(i + 1);
        }
    }
    None
}

struct Checker<'a> {
    src: &'a str,
}

impl Checker<'_> {
    fn fail(&self, table: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
        let path = if table.is_empty() { key.to_string() } else { format!("{table}.{key}") };
        match locate(self.src, table, key) {
            Some(line) => CliError::Config(format!("line {line}: {path}: {msg}")),
            None => CliError::Config(format!("{path}: {msg}")),
        }
    }

    fn require(&self, ok: bool, table: &str, key: &str, msg: &str) -> Result<(), CliError> {
        if ok {
            Ok(())
        } else {
            Err(self.fail(table, key, msg))
        }
    }
}

fn dbm(name: &str, v: f64) -> f64 {
    let w = dbm_to_watts(v);
    info!("{name}: {v} dBm -> {w:e} W");
    w
}

impl Config {
    /// Parses and validates configuration text.
    pub fn parse(src: &str) -> Result<Self, CliError> {
        if src.trim().is_empty() {
            return Err(CliError::Config(
                "configuration file is empty; give at least one key or omit --config for the defaults".into(),
            ));
        }
        let raw: RawConfig = toml::from_str(src).map_err(|e| CliError::Config(e.to_string()))?;
        Self::build(raw, src)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&src)
    }

    fn build(raw: RawConfig, src: &str) -> Result<Self, CliError> {
        let c = Checker { src };
        let o = &raw.ofdm;
        c.require(o.k >= 1, "ofdm", "k", "must be at least 1")?;
        c.require(o.k_g >= 1 && o.k_g <= o.k, "ofdm", "k_g", "must lie in 1..=k")?;
        c.require(raw.m >= 1, "", "m", "must be at least 1")?;
        c.require(o.bandwidth_hz > 0.0 && o.bandwidth_hz.is_finite(), "ofdm", "bandwidth_hz", "must be positive")?;
        c.require(o.carrier_hz > 0.0, "ofdm", "carrier_hz", "must be positive")?;
        let ofdm = OfdmConfig::new(o.k, o.k_g, raw.m, o.bandwidth_hz, o.carrier_hz)
            .map_err(|e| c.fail("ofdm", "k", e))?;

        c.require(raw.power.p_max_dbm.is_finite(), "power", "p_max_dbm", "must be finite")?;
        let p_max_w = dbm("transmit power", raw.power.p_max_dbm);
        let rect = RectennaModel::new(raw.rectenna.k2, raw.rectenna.k4).map_err(|e| c.fail("rectenna", "k2", e))?;

        let ch = &raw.channel;
        c.require(ch.tap_count >= 1 && ch.tap_count <= o.k_g, "channel", "tap_count", "must lie in 1..=k_g")?;
        c.require(ch.decay_taps > 0.0, "channel", "decay_taps", "must be positive")?;
        let comm_snr = match ch.snr_mode.as_str() {
            "average" => SnrNormalization::Average { snr_db: ch.snr_db },
            "per_realization" => SnrNormalization::PerRealization { snr_db: ch.snr_db },
            "path_loss" => SnrNormalization::PathLoss,
            other => {
                return Err(c.fail(
                    "channel",
                    "snr_mode",
                    format!("unknown mode '{other}' (expected average, per_realization or path_loss)"),
                ))
            }
        };
        if !matches!(comm_snr, SnrNormalization::PathLoss) {
            info!("communication SNR target: {} dB -> {:e}", ch.snr_db, db_to_linear(ch.snr_db));
        }
        let powering_noise_w = if ch.zero_powering_noise { 0.0 } else { dbm("powering noise", ch.powering_noise_dbm) };
        let channel = ChannelGenConfig {
            tap_count: ch.tap_count,
            decay_taps: ch.decay_taps,
            powering_path_loss_db: ch.powering_path_loss_db,
            comm_path_loss_db: ch.comm_path_loss_db,
            powering_noise_w,
            comm_noise_w: dbm("communication noise", ch.comm_noise_dbm),
            comm_snr,
            reference_power_w: p_max_w,
        };
        channel.validate(&ofdm).map_err(|e| c.fail("channel", "tap_count", e))?;

        let families = raw
            .families
            .iter()
            .map(|s| s.parse::<Family>().map_err(|e| c.fail("", "families", e)))
            .collect::<Result<Vec<_>, _>>()?;
        c.require(!families.is_empty(), "", "families", "must name at least one family")?;
        c.require(raw.realizations >= 1, "", "realizations", "must be at least 1")?;

        let region = RegionKind::parse(&raw.sweep.region)
            .ok_or_else(|| c.fail("sweep", "region", format!("unknown region '{}' (expected SP, CP or SCP)", raw.sweep.region)))?;
        let c_min = raw.sweep.c_min.clone().unwrap_or_else(|| region.default_c_min());
        let s_max = raw.sweep.s_max.clone().unwrap_or_else(|| region.default_s_max());
        c.require(!c_min.is_empty(), "sweep", "c_min", "grid must be nonempty")?;
        c.require(!s_max.is_empty(), "sweep", "s_max", "grid must be nonempty")?;
        c.require(c_min.iter().all(|&x| x >= 0.0 && x.is_finite()), "sweep", "c_min", "rates must be finite and non-negative")?;
        c.require(s_max.iter().all(|&x| x >= -1.0), "sweep", "s_max", "bounds must be at least -1")?;
        raw.solver.validate().map_err(|e| c.fail("solver", "rho", e))?;

        let r = &raw.oracle;
        let oracle = OracleSuite {
            instances: r.instances,
            k: r.k,
            k_g: r.k_g,
            taps: r.taps,
            m: r.m,
            mc: McRunConfig {
                frame_count: r.frames,
                seed: raw.seed,
                include_noise: r.include_noise,
                oversample_half: r.oversample_half,
            },
        };
        c.require(r.frames >= 1, "oracle", "frames", "must be at least 1")?;
        c.require(r.instances >= 1, "oracle", "instances", "must be at least 1")?;
        oracle.validate().map_err(|e| c.fail("oracle", "k", e))?;

        let s = &raw.snapshot;
        let snapshot = SnapshotSpec {
            family: s.family.parse().map_err(|e| c.fail("snapshot", "family", e))?,
            c_min: s.c_min,
            s_max: s.s_max,
            realization: s.realization,
        };
        c.require(s.c_min >= 0.0, "snapshot", "c_min", "must be non-negative")?;
        c.require(s.s_max >= -1.0, "snapshot", "s_max", "must be at least -1")?;

        Ok(Config {
            sweep: SweepSpec {
                region,
                c_min,
                s_max,
                realizations: raw.realizations,
                families,
                ofdm,
                channel,
                solver: raw.solver,
                rect,
                p_max_w,
                seed: raw.seed,
            },
            oracle,
            snapshot,
        })
    }

    /// Built-in defaults, as if every key were omitted.
    pub fn defaults() -> Self {
        Self::build(RawConfig::default(), "").expect("defaults are valid")
    }

    /// Replaces every seed with `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sweep.seed = seed;
        self.oracle.mc.seed = seed;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_setup() {
        let c = Config::defaults();
        assert_eq!((c.sweep.ofdm.k, c.sweep.ofdm.k_g, c.sweep.ofdm.m), (8, 4, 16));
        assert_eq!(c.sweep.ofdm.bandwidth_hz, 30e6);
        assert_eq!(c.sweep.ofdm.carrier_hz, 5.18e9);
        assert!((c.sweep.p_max_w - 10.0).abs() < 1e-12);
        assert_eq!(c.sweep.realizations, 20);
        assert_eq!(c.sweep.families, Family::ALL.to_vec());
        assert_eq!(c.sweep.s_max.iter().cloned().fold(f64::INFINITY, f64::min), -1.0);
    }

    #[test]
    fn empty_file_is_rejected() {
        assert!(matches!(Config::parse("  \n"), Err(CliError::Config(_))));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let src = "seed = 1\n[ofdm]\nk = 8\nk_g = 9\n";
        let CliError::Config(msg) = Config::parse(src).unwrap_err() else { panic!() };
        assert!(msg.starts_with("line 4: ofdm.k_g"), "{msg}");
        let CliError::Config(msg) = Config::parse("[sweep]\nregion = 3\n").unwrap_err() else { panic!() };
        assert!(msg.contains("line 2"), "{msg}");
        let CliError::Config(msg) = Config::parse("[ofdm]\nkk = 3\n").unwrap_err() else { panic!() };
        assert!(msg.contains("kk"), "{msg}");
    }

    #[test]
    fn region_defaults_and_overrides() {
        let c = Config::parse("[sweep]\nregion = \"CP\"\n").unwrap();
        assert_eq!(c.sweep.region, RegionKind::Cp);
        assert_eq!(c.sweep.s_max, vec![LOOSE_S_MAX]);
        let c = Config::parse("families = [\"cscg\"]\n[sweep]\nc_min = [1.5]\ns_max = [-1.0]\n").unwrap();
        assert_eq!(c.sweep.c_min, vec![1.5]);
        assert_eq!(c.sweep.families, vec![Family::Cscg]);
        assert!(Config::parse("[sweep]\ns_max = [-2.0]\n").is_err());
    }

    #[test]
    fn powering_noise_can_be_zeroed() {
        let c = Config::parse("[channel]\nzero_powering_noise = true\n").unwrap();
        assert_eq!(c.sweep.channel.powering_noise_w, 0.0);
        let c = Config::parse("[channel]\npowering_noise_dbm = -70.0\n").unwrap();
        assert!((c.sweep.channel.powering_noise_w - 1e-10).abs() < 1e-22);
    }
}
