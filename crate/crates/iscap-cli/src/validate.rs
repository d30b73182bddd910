//! Moment validation against the Monte-Carlo oracle.

use iscap_core::oracle::{run_suite, OracleSuite, ValidationReport};
use iscap_core::RectennaModel;

use crate::CliError;

/// Relative corruption of `k4` applied to the closed form in self-test mode.
pub const K4_FAULT: f64 = 0.10;

/// Runs the oracle suite. With `inject_k4_fault` the closed-form side uses
/// a `k4` that is 10% too large, which the end-to-end check must catch.
pub fn run_validation(suite: &OracleSuite, rect: &RectennaModel, inject_k4_fault: bool) -> Result<ValidationReport, CliError> {
    let closed = if inject_k4_fault {
        RectennaModel { k4: rect.k4 * (1.0 + K4_FAULT), ..*rect }
    } else {
        *rect
    };
    Ok(run_suite(suite, rect, &closed)?)
}
