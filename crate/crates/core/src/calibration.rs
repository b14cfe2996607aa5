//! Calibration arithmetic: measurement efficiency from SNR slope and
//! measurement-induced dephasing, Ramsey contrast, DAC amplitude to photon
//! number, DC flux-crosstalk compensation and resonator linewidth.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::fit::{levenberg_marquardt, LmOptions};
use crate::{Error, Result};

fn check_pairs(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::arg(alloc::format!(
            "{} x values but {} y values",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min {
        return Err(Error::arg(alloc::format!(
            "need at least {min} points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::arg("non-finite input"));
    }
    Ok(())
}

/// Least-squares slope of `snr = a·ε` through the origin.
pub fn fit_snr_slope(amplitudes: &[f64], snr: &[f64]) -> Result<f64> {
    check_pairs(amplitudes, snr, 2)?;
    let sxx: f64 = amplitudes.iter().map(|x| x * x).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all amplitudes are zero".into()));
    }
    let sxy: f64 = amplitudes.iter().zip(snr).map(|(x, y)| x * y).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceFit {
    /// Coherence at zero amplitude.
    pub amplitude: f64,
    pub sigma_v: f64,
}

impl CoherenceFit {
    pub fn eval(&self, epsilon: f64) -> f64 {
        self.amplitude * libm::exp(-epsilon * epsilon / (2.0 * self.sigma_v * self.sigma_v))
    }
}

/// Fit `|ρ01(ε)| = A exp(−ε²/(2σ²))`.
pub fn fit_coherence_gaussian(amplitudes: &[f64], coherence: &[f64]) -> Result<CoherenceFit> {
    check_pairs(amplitudes, coherence, 3)?;
    if coherence.iter().any(|c| *c <= 0.0) {
        return Err(Error::arg("coherence values must be positive"));
    }
    // ln c = ln A − ε²/(2σ²) is linear in ε²
    let n = amplitudes.len() as f64;
    let u: Vec<f64> = amplitudes.iter().map(|e| e * e).collect();
    let v: Vec<f64> = coherence.iter().map(|c| libm::log(*c)).collect();
    let (mu, mv) = (u.iter().sum::<f64>() / n, v.iter().sum::<f64>() / n);
    let suu: f64 = u.iter().map(|x| (x - mu) * (x - mu)).sum();
    let suv: f64 = u.iter().zip(&v).map(|(x, y)| (x - mu) * (y - mv)).sum();
    if suu == 0.0 {
        return Err(Error::Fit("all amplitudes have the same magnitude".into()));
    }
    let slope = suv / suu;
    if !(slope < 0.0) {
        return Err(Error::Fit("coherence does not decay with amplitude".into()));
    }
    let a0 = libm::exp(mv - slope * mu);
    let s0 = libm::sqrt(-1.0 / (2.0 * slope));

    // refine in units of the initial guess so both parameters are O(1)
    let residuals = |p: &[f64]| -> Vec<f64> {
        amplitudes
            .iter()
            .zip(coherence)
            .map(|(e, c)| {
                let z = e / (s0 * p[1]);
                p[0] * libm::exp(-0.5 * z * z) - c / a0
            })
            .collect()
    };
    let jacobian = |p: &[f64]| -> DMatrix<f64> {
        DMatrix::from_fn(amplitudes.len(), 2, |i, k| {
            let z = amplitudes[i] / (s0 * p[1]);
            let g = libm::exp(-0.5 * z * z);
            if k == 0 {
                g
            } else {
                p[0] * g * z * z / p[1]
            }
        })
    };
    let sol = levenberg_marquardt(&[1.0, 1.0], residuals, jacobian, LmOptions::default())?;
    let fit = CoherenceFit {
        amplitude: sol.params[0] * a0,
        sigma_v: (sol.params[1] * s0).abs(),
    };
    if !(fit.sigma_v.is_finite() && fit.amplitude > 0.0) {
        return Err(Error::Fit("coherence fit diverged".into()));
    }
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamseyFit {
    /// Non-negative contrast `A` of `A cos(φ + φ0) + B`.
    pub amplitude: f64,
    pub phi0: f64,
    pub offset: f64,
    /// Set when the data carry no oscillation; `amplitude` is then 0.
    pub flat: bool,
}

impl RamseyFit {
    /// `|ρ01| = A/2`
    pub fn coherence(&self) -> f64 {
        0.5 * self.amplitude
    }
}

/// Linear least squares on `c cos φ + s sin φ + B`, which is the same model
/// as `A cos(φ + φ0) + B` with `A cos φ0 = c`, `A sin φ0 = −s`.
pub fn fit_ramsey(phases: &[f64], sigma_z: &[f64]) -> Result<RamseyFit> {
    check_pairs(phases, sigma_z, 3)?;
    let (lo, hi) = phases
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(*p), hi.max(*p))
        });
    if hi - lo < 2.0 * core::f64::consts::PI * (1.0 - 1e-9) {
        return Err(Error::arg("Ramsey phases must span at least 2π"));
    }
    let a = DMatrix::from_fn(phases.len(), 3, |i, k| match k {
        0 => libm::cos(phases[i]),
        1 => libm::sin(phases[i]),
        _ => 1.0,
    });
    let b = DVector::from_column_slice(sigma_z);
    let x = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Fit(e.into()))?;
    let (c, s, offset) = (x[0], x[1], x[2]);
    let amplitude = libm::sqrt(c * c + s * s);
    let scale = sigma_z
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    if amplitude <= 1e-12 * scale {
        return Ok(RamseyFit {
            amplitude: 0.0,
            phi0: 0.0,
            offset,
            flat: true,
        });
    }
    Ok(RamseyFit {
        amplitude,
        phi0: libm::atan2(-s, c),
        offset,
        flat: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyFit {
    pub a: f64,
    pub sigma_v: f64,
    pub eta: f64,
}

impl EfficiencyFit {
    /// False when η falls outside (0, 1], which points at a bad calibration.
    pub fn is_physical(&self) -> bool {
        self.eta > 0.0 && self.eta <= 1.0
    }
}

/// `η = a²σ²`
pub fn efficiency(a: f64, sigma_v: f64) -> EfficiencyFit {
    EfficiencyFit {
        a,
        sigma_v,
        eta: a * a * sigma_v * sigma_v,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonConversion {
    pub epsilon_v: f64,
    pub kappa: f64,
    pub chi: f64,
    pub sigma_v: f64,
    pub tau_total: f64,
    pub tau_pulse: f64,
    pub n_bar_total: f64,
    pub n_bar_active: f64,
}

/// Photon number from the measurement-induced dephasing at DAC amplitude
/// `ε`: `n̄ = ε²κ/(32σ²χ²τ_total)`, and the same photons concentrated in the
/// pulse, `n̄_active = n̄·τ_total/τ_pulse`. κ and χ are angular.
pub fn photons_from_dac(
    epsilon_v: f64,
    kappa: f64,
    chi: f64,
    sigma_v: f64,
    tau_total: f64,
    tau_pulse: f64,
) -> Result<PhotonConversion> {
    if chi == 0.0 {
        return Err(Error::arg(
            "chi = 0 makes the photon conversion meaningless",
        ));
    }
    for (name, v) in [
        ("kappa", kappa),
        ("sigma_v", sigma_v),
        ("tau_total", tau_total),
        ("tau_pulse", tau_pulse),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::arg(alloc::format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    if !(epsilon_v >= 0.0 && epsilon_v.is_finite()) {
        return Err(Error::arg("epsilon_v must be non-negative"));
    }
    let n_bar_total =
        epsilon_v * epsilon_v * kappa / (32.0 * sigma_v * sigma_v * chi * chi * tau_total);
    Ok(PhotonConversion {
        epsilon_v,
        kappa,
        chi,
        sigma_v,
        tau_total,
        tau_pulse,
        n_bar_total,
        n_bar_active: n_bar_total * tau_total / tau_pulse,
    })
}

/// Maps bias-channel settings to the flux threading each loop.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkMatrix {
    pub m: DMatrix<f64>,
}

/// Above this the matrix is treated as singular.
pub const MAX_CROSSTALK_CONDITION: f64 = 1e12;

impl CrosstalkMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::arg("crosstalk matrix must be square and nonempty"));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("non-finite crosstalk matrix entry"));
        }
        Ok(Self { m })
    }

    /// 2-norm condition number; infinite for a singular matrix.
    pub fn condition_number(&self) -> f64 {
        let sv = self.m.singular_values();
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Bias vector `b` with `m·b = target_flux`.
    pub fn compensate(&self, target_flux: &[f64]) -> Result<Vec<f64>> {
        if target_flux.len() != self.m.nrows() {
            return Err(Error::arg("target dimension does not match matrix"));
        }
        let condition = self.condition_number();
        if !(condition <= MAX_CROSSTALK_CONDITION) {
            return Err(Error::Singular { condition });
        }
        let b = self
            .m
            .clone()
            .lu()
            .solve(&DVector::from_column_slice(target_flux))
            .ok_or(Error::Singular { condition })?;
        Ok(b.iter().copied().collect())
    }
}

pub fn crosstalk_compensate(m: &CrosstalkMatrix, target_flux: &[f64]) -> Result<Vec<f64>> {
    m.compensate(target_flux)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinewidthFit {
    pub center: f64,
    /// Full width at half maximum, in the units of the frequency axis.
    pub kappa: f64,
    pub depth: f64,
    pub baseline: f64,
}

/// Lorentzian `B + D / (1 + (2(f − f0)/κ)²)` fitted to transmission
/// magnitudes. `D` is positive for a peak and negative for a dip.
pub fn fit_linewidth(freqs: &[f64], magnitude: &[f64]) -> Result<LinewidthFit> {
    check_pairs(freqs, magnitude, 5)?;
    let n = freqs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| freqs[*a].total_cmp(&freqs[*b]));
    let f: Vec<f64> = order.iter().map(|i| freqs[*i]).collect();
    let y: Vec<f64> = order.iter().map(|i| magnitude[*i]).collect();

    let span = f[n - 1] - f[0];
    if !(span > 0.0) {
        return Err(Error::arg("frequencies must not all coincide"));
    }
    let (f_mid, y_scale) = (
        0.5 * (f[0] + f[n - 1]),
        y.iter().fold(0.0f64, |m, v| m.max(v.abs())),
    );
    if y_scale == 0.0 {
        return Err(Error::Fit(
            "no extremum: transmission is identically zero".into(),
        ));
    }
    // scaled coordinates: x in units of the span, y in units of the largest magnitude
    let x: Vec<f64> = f.iter().map(|v| (v - f_mid) / span).collect();
    let ys: Vec<f64> = y.iter().map(|v| v / y_scale).collect();

    let mut sorted = ys.clone();
    sorted.sort_by(f64::total_cmp);
    let baseline = 0.5 * (sorted[n / 2] + sorted[(n - 1) / 2]);
    let (imax, imin) = (0..n).fold((0, 0), |(hi, lo), i| {
        (
            if ys[i] > ys[hi] { i } else { hi },
            if ys[i] < ys[lo] { i } else { lo },
        )
    });
    let peak = ys[imax] - baseline >= baseline - ys[imin];
    let ext = if peak { imax } else { imin };
    if ext == 0 || ext == n - 1 {
        return Err(Error::Fit("no extremum inside the frequency range".into()));
    }
    let depth = ys[ext] - baseline;
    if depth == 0.0 {
        return Err(Error::Fit("flat transmission".into()));
    }
    // width guess: points beyond half depth on either side of the extremum
    let half = baseline + 0.5 * depth;
    let beyond = |i: usize| if peak { ys[i] < half } else { ys[i] > half };
    let left = (0..ext).rev().find(|i| beyond(*i)).unwrap_or(0);
    let right = (ext + 1..n).find(|i| beyond(*i)).unwrap_or(n - 1);
    let width = (x[right] - x[left]).max(2.0 / n as f64);

    let residuals = |p: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(&ys)
            .map(|(xi, yi)| {
                let z = 2.0 * (xi - p[0]) / p[1];
                p[3] + p[2] / (1.0 + z * z) - yi
            })
            .collect()
    };
    let jacobian = |p: &[f64]| -> DMatrix<f64> {
        DMatrix::from_fn(n, 4, |i, k| {
            let z = 2.0 * (x[i] - p[0]) / p[1];
            let l = 1.0 / (1.0 + z * z);
            match k {
                0 => p[2] * l * l * 4.0 * z / p[1],
                1 => p[2] * l * l * 2.0 * z * z / p[1],
                2 => l,
                _ => 1.0,
            }
        })
    };
    let sol = levenberg_marquardt(
        &[x[ext], width, depth, baseline],
        residuals,
        jacobian,
        LmOptions::default(),
    )?;
    let p = &sol.params;
    let fit = LinewidthFit {
        center: f_mid + p[0] * span,
        kappa: p[1].abs() * span,
        depth: p[2] * y_scale,
        baseline: p[3] * y_scale,
    };
    if !(fit.kappa > 0.0 && fit.kappa.is_finite() && fit.center >= f[0] && fit.center <= f[n - 1]) {
        return Err(Error::Fit("Lorentzian fit left the frequency range".into()));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn slope_through_origin() {
        let eps = [0.1, 0.2, 0.3, 0.4];
        let snr: Vec<f64> = eps.iter().map(|e| 35.47 * e).collect();
        assert!((fit_snr_slope(&eps, &snr).unwrap() - 35.47).abs() < 1e-12);
        assert!(matches!(
            fit_snr_slope(&[0.0, 0.0], &[1.0, 2.0]),
            Err(Error::Fit(_))
        ));
        // repeated amplitude: mean(snr)/ε
        let a = fit_snr_slope(&[0.5, 0.5, 0.5], &[1.0, 1.2, 1.4]).unwrap();
        assert!((a - 1.2 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_coherence_is_error() {
        let eps = [0.0, 0.01, 0.02, 0.03];
        assert!(matches!(
            fit_coherence_gaussian(&eps, &[0.4; 4]),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn ramsey_exact_cosine() {
        let phases: Vec<f64> = (0..41).map(|k| 4.0 * PI * k as f64 / 40.0).collect();
        let z: Vec<f64> = phases.iter().map(|p| libm::cos(*p)).collect();
        let fit = fit_ramsey(&phases, &z).unwrap();
        assert!((fit.amplitude - 1.0).abs() < 1e-12);
        assert!(fit.phi0.abs() < 1e-12 && fit.offset.abs() < 1e-12);
        assert!((fit.coherence() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ramsey_flat_and_short_span() {
        let phases: Vec<f64> = (0..21).map(|k| 2.0 * PI * k as f64 / 20.0).collect();
        let fit = fit_ramsey(&phases, &[0.3; 21]).unwrap();
        assert!(fit.flat && fit.amplitude == 0.0);
        assert!((fit.offset - 0.3).abs() < 1e-12);
        assert!(fit_ramsey(&[0.0, 1.0, 2.0, 3.0], &[1.0, 0.5, -0.4, -1.0]).is_err());
    }

    #[test]
    fn efficiency_edges() {
        assert_eq!(efficiency(0.0, 0.5).eta, 0.0);
        assert_eq!(efficiency(1.0, 1.0).eta, 1.0);
        assert!(!efficiency(100.0, 1.0).is_physical());
    }

    #[test]
    fn zero_chi_rejected() {
        assert!(photons_from_dac(0.4, 1.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert_eq!(
            photons_from_dac(0.0, 1.0, 1.0, 1.0, 1.0, 1.0)
                .unwrap()
                .n_bar_total,
            0.0
        );
    }

    #[test]
    fn crosstalk_diagonal_and_singular() {
        let m = CrosstalkMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![
            2.0, 4.0
        ])))
        .unwrap();
        assert_eq!(m.compensate(&[1.0, 1.0]).unwrap(), alloc::vec![0.5, 0.25]);
        assert!((m.condition_number() - 2.0).abs() < 1e-12);
        let s = CrosstalkMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0])).unwrap();
        assert!(matches!(
            s.compensate(&[1.0, 0.0]),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn linewidth_edge_extremum_rejected() {
        let f: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let y: Vec<f64> = f.iter().map(|v| 1.0 + v).collect();
        assert!(matches!(fit_linewidth(&f, &y), Err(Error::Fit(_))));
        assert!(fit_linewidth(&f[..4], &y[..4]).is_err());
    }
}
