use alloc::vec::Vec;

use num_complex::Complex64;

use super::cavity::{CavityTrajectory, QubitState};
use crate::{Error, Result};

/// SNR and SNR-limited error against integration time.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrCurve {
    pub tau: Vec<f64>,
    pub snr: Vec<f64>,
    pub err_snr_limited: Vec<f64>,
}

impl SnrCurve {
    /// Shift every integration time by `offset`, e.g. to align a simulated
    /// curve with a delayed acquisition window.
    pub fn offset(mut self, offset: f64) -> Self {
        self.tau.iter_mut().for_each(|t| *t += offset);
        self
    }
}

/// `½ erfc(SNR/2)`
pub fn snr_limited_error(snr: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return Err(Error::arg(alloc::format!(
            "SNR must be non-negative, got {snr}"
        )));
    }
    Ok(0.5 * libm::erfc(0.5 * snr))
}

pub(crate) fn interpolate(time: &[f64], values: &[Complex64], t: f64) -> Complex64 {
    let dt = time[1] - time[0];
    let x = t / dt;
    let k = (libm::floor(x) as usize).min(time.len() - 2);
    let w = x - k as f64;
    values[k] * (1.0 - w) + values[k + 1] * w
}

fn check_tau(traj: &CavityTrajectory, tau: f64) -> Result<()> {
    let end = traj.duration() * (1.0 + 1e-12);
    if !(tau >= 0.0 && tau <= end) {
        return Err(Error::arg(alloc::format!(
            "integration time {tau:e} s outside trajectory [0, {:e}] s",
            traj.duration()
        )));
    }
    Ok(())
}

/// Boxcar-integrated heterodyne SNR
///
/// `SNR(τ) = √(2η/τ) · |∫₀^τ (α_out,1 − α_out,0) dt|`
pub fn snr_vs_time(traj: &CavityTrajectory, eta: f64, taus: &[f64]) -> Result<SnrCurve> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::arg(alloc::format!(
            "efficiency must lie in (0, 1], got {eta}"
        )));
    }
    let c0 = traj.cumulative_output(QubitState::Ground);
    let c1 = traj.cumulative_output(QubitState::Excited);
    let diff: Vec<Complex64> = c1.iter().zip(&c0).map(|(a, b)| a - b).collect();

    let mut snr = Vec::with_capacity(taus.len());
    let mut err = Vec::with_capacity(taus.len());
    for &tau in taus {
        check_tau(traj, tau)?;
        let s = if tau == 0.0 {
            0.0
        } else {
            libm::sqrt(2.0 * eta / tau) * interpolate(&traj.time, &diff, tau).norm()
        };
        snr.push(s);
        err.push(snr_limited_error(s)?);
    }
    Ok(SnrCurve {
        tau: taus.to_vec(),
        snr,
        err_snr_limited: err,
    })
}
