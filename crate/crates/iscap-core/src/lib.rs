//! Input-distribution design for CP-OFDM waveforms that jointly serve
//! sensing, communication and wireless powering.
//!
//! The transmit symbols on each subcarrier are asymmetric complex Gaussians
//! with independently chosen real/imaginary means and variances. The crate
//! evaluates the harvested-power surrogate, the sensing sidelobe bound and
//! the achievable rate in closed form, optimizes the distribution under rate
//! and sensing constraints, and checks the closed forms against a
//! Monte-Carlo simulation of the received samples.

pub mod channel;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod oracle;
pub mod signal;

pub use channel::{
    generate_channels, ChannelGenConfig, CommChannel, PoweringChannel, SnrNormalization,
};
pub use error::{Error, Result};
pub use metrics::powering::{Branch, PoweringCoefficients, RectennaModel};
pub use metrics::rate::achievable_rate;
pub use metrics::sensing::{normalized_ub, ub_fap, ub_fap_matrix, SensingGrid};
pub use optimizer::{
    baseline, optimize, optimize_family, optimize_nested, Constraints, DesignResult, Family, Scenario,
    SolverConfig,
};
pub use signal::{GaussianInput, OfdmConfig, PowerAllocationPair, RealCompositeVector};
