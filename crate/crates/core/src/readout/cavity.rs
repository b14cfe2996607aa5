use alloc::vec::Vec;

use num_complex::Complex64;

use super::pulse::FluxPulse;
use crate::coupled::DispersiveModel;
use crate::fluxonium::FluxBias;
use crate::{Error, Result};

/// Flux grid used to tabulate dressed frequencies along a pulse.
pub const DISPERSIVE_TABLE_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitState {
    Ground,
    Excited,
}

/// Drive amplitude `ε` that gives a state-averaged steady photon number
/// `n_bar` for detunings `Δ±` of the two pointer states:
///
/// `ε = √(2 n̄ / [(Δ₊² + κ²/4)⁻¹ + (Δ₋² + κ²/4)⁻¹])`
pub fn drive_from_photons(
    n_bar: f64,
    delta_plus: f64,
    delta_minus: f64,
    kappa: f64,
) -> Result<f64> {
    if !(n_bar >= 0.0 && n_bar.is_finite()) {
        return Err(Error::arg(alloc::format!(
            "n_bar must be non-negative, got {n_bar}"
        )));
    }
    if !(kappa > 0.0) {
        return Err(Error::arg("kappa must be positive"));
    }
    let q = kappa * kappa / 4.0;
    let denom = 1.0 / (delta_plus * delta_plus + q) + 1.0 / (delta_minus * delta_minus + q);
    Ok(libm::sqrt(2.0 * n_bar / denom))
}

/// Characteristic ring-up window `5/κ`.
pub fn ring_up_window(kappa: f64) -> f64 {
    5.0 / kappa
}

/// Fraction of the steady photon number reached after `t` by a resonantly
/// driven cavity starting empty: `(1 − e^{−κt/2})²`.
pub fn photon_ring_up_fraction(kappa: f64, t: f64) -> f64 {
    let a = 1.0 - libm::exp(-0.5 * kappa * t);
    a * a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    pub omega_ro: f64,
    pub n_bar: f64,
    /// Angular-frequency units; the input field is `α_in = −ε/√κ`.
    pub epsilon: f64,
    /// Drive switches on at this time (s).
    pub delay: f64,
}

impl DriveSpec {
    /// Drive calibrated to `n_bar` photons at the given dressed frequencies.
    pub fn for_photons(
        omega_ro: f64,
        n_bar: f64,
        omega_r0: f64,
        omega_r1: f64,
        kappa: f64,
    ) -> Result<Self> {
        let epsilon = drive_from_photons(n_bar, omega_r1 - omega_ro, omega_r0 - omega_ro, kappa)?;
        Ok(Self {
            omega_ro,
            n_bar,
            epsilon,
            delay: 0.0,
        })
    }

    pub fn with_delay(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    fn epsilon_at(&self, t: f64) -> f64 {
        if t >= self.delay {
            self.epsilon
        } else {
            0.0
        }
    }
}

/// Detuning, in units of the coupling `g|n_ij|`, below which the dispersive
/// picture is not trusted when a pulse steps over a resonance.
pub const DISPERSIVE_VALIDITY: f64 = 10.0;

/// What to do when a flux pulse passes a transition resonant with the
/// resonator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Traversal {
    /// Fail with the crossing flux and transition.
    Reject,
    /// Leave out tabulation points within `DISPERSIVE_VALIDITY · g|n_ij|` of
    /// resonance and interpolate across them. The endpoints of the excursion
    /// must still be valid.
    StepOver,
}

/// Dressed resonator frequencies tabulated against flux, linearly
/// interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersiveTable {
    flux: Vec<f64>,
    omega_r0: Vec<f64>,
    omega_r1: Vec<f64>,
}

impl DispersiveTable {
    pub fn constant(omega_r0: f64, omega_r1: f64) -> Self {
        Self {
            flux: alloc::vec![0.0],
            omega_r0: alloc::vec![omega_r0],
            omega_r1: alloc::vec![omega_r1],
        }
    }

    /// Tabulate over the flux excursion of `pulse`, rejecting any excursion
    /// that crosses a transition resonant with the resonator.
    pub fn along_pulse(model: &DispersiveModel, pulse: &FluxPulse, points: usize) -> Result<Self> {
        Self::along_pulse_with(model, pulse, points, Traversal::Reject)
    }

    pub fn along_pulse_with(
        model: &DispersiveModel,
        pulse: &FluxPulse,
        points: usize,
        traversal: Traversal,
    ) -> Result<Self> {
        let lo = pulse
            .base_flux
            .phi()
            .min(pulse.base_flux.phi() + pulse.delta_flux);
        let hi = pulse
            .base_flux
            .phi()
            .max(pulse.base_flux.phi() + pulse.delta_flux);
        let fluxes: Vec<f64> = if pulse.delta_flux == 0.0 {
            alloc::vec![pulse.base_flux.phi()]
        } else {
            let n = points.max(2) - 1;
            (0..=n)
                .map(|k| lo + (hi - lo) * k as f64 / n as f64)
                .collect()
        };
        let p = *model.params();
        let levels = model.n_levels();
        let transitions: Vec<(usize, usize)> = (0..2)
            .flat_map(|i| (i + 1..levels).map(move |j| (i, j)))
            .collect();
        let mut table = Self {
            flux: Vec::with_capacity(fluxes.len()),
            omega_r0: Vec::with_capacity(fluxes.len()),
            omega_r1: Vec::with_capacity(fluxes.len()),
        };
        let mut above: Option<Vec<bool>> = None;
        for (k, &phi) in fluxes.iter().enumerate() {
            let spectrum = model.solver().spectrum(FluxBias::new(phi)?, levels)?;
            let w = |(i, j): (usize, usize)| spectrum.energies[j] - spectrum.energies[i];
            let endpoint = k == 0 || k == fluxes.len() - 1;
            match traversal {
                Traversal::Reject => {
                    // a sign change of ω_ij − ω_r between neighbours is a crossing the grid stepped over
                    let now: Vec<bool> =
                        transitions.iter().map(|t| w(*t) > p.omega_r_bare).collect();
                    if let Some(prev) = &above {
                        if *prev != now {
                            if let Some(f) =
                                model.divergences((fluxes[k - 1], phi))?.into_iter().next()
                            {
                                return Err(Error::Divergence {
                                    flux: f.flux.phi(),
                                    transition: f.transition,
                                    detuning: f.detuning,
                                });
                            }
                        }
                    }
                    above = Some(now);
                }
                Traversal::StepOver => {
                    let invalid = transitions.iter().find(|&&(i, j)| {
                        let coupling = p.g * spectrum.n_elements[(i, j)];
                        (w((i, j)) - p.omega_r_bare).abs() < DISPERSIVE_VALIDITY * coupling
                    });
                    if let Some(&transition) = invalid {
                        if endpoint {
                            return Err(Error::Divergence {
                                flux: phi,
                                transition,
                                detuning: (w(transition) - p.omega_r_bare).abs(),
                            });
                        }
                        continue;
                    }
                }
            }
            let point = match model.point_from_spectrum(&spectrum) {
                Err(Error::Divergence { .. }) if traversal == Traversal::StepOver && !endpoint => {
                    continue
                }
                other => other?,
            };
            table.flux.push(phi);
            table.omega_r0.push(point.omega_r0);
            table.omega_r1.push(point.omega_r1);
        }
        Ok(table)
    }

    /// `(omega_r0, omega_r1)` at `phi`, clamped to the tabulated range.
    pub fn at(&self, phi: f64) -> (f64, f64) {
        let n = self.flux.len();
        if n == 1 || phi <= self.flux[0] {
            return (self.omega_r0[0], self.omega_r1[0]);
        }
        if phi >= self.flux[n - 1] {
            return (self.omega_r0[n - 1], self.omega_r1[n - 1]);
        }
        let k = self.flux.partition_point(|&f| f <= phi) - 1;
        let w = (phi - self.flux[k]) / (self.flux[k + 1] - self.flux[k]);
        (
            self.omega_r0[k] + w * (self.omega_r0[k + 1] - self.omega_r0[k]),
            self.omega_r1[k] + w * (self.omega_r1[k + 1] - self.omega_r1[k]),
        )
    }

    fn max_abs_detuning(&self, omega_ro: f64) -> f64 {
        self.omega_r0
            .iter()
            .chain(&self.omega_r1)
            .map(|w| (w - omega_ro).abs())
            .fold(0.0, f64::max)
    }
}

/// Intracavity and output fields for both qubit states on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityTrajectory {
    pub time: Vec<f64>,
    pub alpha0: Vec<Complex64>,
    pub alpha1: Vec<Complex64>,
    pub alpha_in: Vec<Complex64>,
    pub alpha_out0: Vec<Complex64>,
    pub alpha_out1: Vec<Complex64>,
    pub kappa: f64,
}

impl CavityTrajectory {
    pub fn dt(&self) -> f64 {
        self.time[1] - self.time[0]
    }

    pub fn duration(&self) -> f64 {
        *self.time.last().expect("trajectory is nonempty")
    }

    pub fn alpha(&self, state: QubitState) -> &[Complex64] {
        match state {
            QubitState::Ground => &self.alpha0,
            QubitState::Excited => &self.alpha1,
        }
    }

    pub fn output(&self, state: QubitState) -> &[Complex64] {
        match state {
            QubitState::Ground => &self.alpha_out0,
            QubitState::Excited => &self.alpha_out1,
        }
    }

    /// Trapezoidal running integral of the output field, one entry per sample.
    pub fn cumulative_output(&self, state: QubitState) -> Vec<Complex64> {
        let out = self.output(state);
        let dt = self.dt();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut cumulative = Vec::with_capacity(out.len());
        cumulative.push(acc);
        for w in out.windows(2) {
            acc += (w[0] + w[1]) * (0.5 * dt);
            cumulative.push(acc);
        }
        cumulative
    }
}

/// Integrate
///
/// `α̇ = −i Δ±(t) α − κα/2 − √κ α_in`,  `α_out = α_in + √κ α`
///
/// with `Δ₊ = ω_r1(t) − ω_RO` for |1> and `Δ₋ = ω_r0(t) − ω_RO` for |0>,
/// from an empty cavity, using fixed-step RK4.
pub fn integrate_with_table(
    table: &DispersiveTable,
    kappa: f64,
    pulse: &FluxPulse,
    drive: &DriveSpec,
    duration: f64,
    dt: f64,
) -> Result<CavityTrajectory> {
    if !(duration > 0.0 && dt > 0.0 && duration.is_finite()) {
        return Err(Error::arg("duration and dt must be positive"));
    }
    let max_detuning = table.max_abs_detuning(drive.omega_ro);
    let mut limit = 1.0 / kappa;
    if max_detuning > 0.0 {
        limit = limit.min(core::f64::consts::TAU / max_detuning);
    }
    if dt > limit / 20.0 {
        return Err(Error::Resolution(alloc::format!(
            "dt {dt:e} s exceeds {:e} s",
            limit / 20.0
        )));
    }

    let steps = libm::round(duration / dt) as usize;
    let sqrt_kappa = libm::sqrt(kappa);
    let half_kappa = 0.5 * kappa;
    let detunings = |t: f64| {
        let (r0, r1) = table.at(pulse.flux_at(t));
        (r0 - drive.omega_ro, r1 - drive.omega_ro)
    };
    let rhs =
        |alpha: Complex64, delta: f64, eps: f64| Complex64::new(-half_kappa, -delta) * alpha + eps;

    let mut time = Vec::with_capacity(steps + 1);
    let mut alpha0 = Vec::with_capacity(steps + 1);
    let mut alpha1 = Vec::with_capacity(steps + 1);
    let mut a0 = Complex64::new(0.0, 0.0);
    let mut a1 = a0;
    for k in 0..=steps {
        let t = k as f64 * dt;
        time.push(t);
        alpha0.push(a0);
        alpha1.push(a1);
        if k == steps {
            break;
        }
        let (d0_a, d1_a) = detunings(t);
        let (d0_b, d1_b) = detunings(t + 0.5 * dt);
        let (d0_c, d1_c) = detunings(t + dt);
        let (e_a, e_b, e_c) = (
            drive.epsilon_at(t),
            drive.epsilon_at(t + 0.5 * dt),
            drive.epsilon_at(t + dt),
        );
        for (a, (da, db, dc)) in [(&mut a0, (d0_a, d0_b, d0_c)), (&mut a1, (d1_a, d1_b, d1_c))] {
            let k1 = rhs(*a, da, e_a);
            let k2 = rhs(*a + k1 * (0.5 * dt), db, e_b);
            let k3 = rhs(*a + k2 * (0.5 * dt), db, e_b);
            let k4 = rhs(*a + k3 * dt, dc, e_c);
            *a += (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
        }
    }

    let alpha_in: Vec<Complex64> = time
        .iter()
        .map(|&t| Complex64::new(-drive.epsilon_at(t) / sqrt_kappa, 0.0))
        .collect();
    let out = |alpha: &[Complex64]| -> Vec<Complex64> {
        alpha
            .iter()
            .zip(&alpha_in)
            .map(|(a, i)| i + a * sqrt_kappa)
            .collect()
    };
    Ok(CavityTrajectory {
        alpha_out0: out(&alpha0),
        alpha_out1: out(&alpha1),
        time,
        alpha0,
        alpha1,
        alpha_in,
        kappa,
    })
}

/// Tabulate dressed frequencies along `pulse` and integrate both pointer
/// states. Pulses that cross a resonance are rejected.
pub fn integrate_cavity(
    model: &DispersiveModel,
    pulse: &FluxPulse,
    drive: &DriveSpec,
    duration: f64,
    dt: f64,
) -> Result<CavityTrajectory> {
    integrate_cavity_with(model, pulse, drive, duration, dt, Traversal::Reject)
}

pub fn integrate_cavity_with(
    model: &DispersiveModel,
    pulse: &FluxPulse,
    drive: &DriveSpec,
    duration: f64,
    dt: f64,
    traversal: Traversal,
) -> Result<CavityTrajectory> {
    let table =
        DispersiveTable::along_pulse_with(model, pulse, DISPERSIVE_TABLE_POINTS, traversal)?;
    integrate_with_table(&table, model.params().kappa, pulse, drive, duration, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{mhz, NS};

    #[test]
    fn resonant_drive_formula() {
        let kappa = mhz(6.04);
        let eps = drive_from_photons(75.0, 0.0, 0.0, kappa).unwrap();
        assert!((eps - libm::sqrt(75.0) * kappa / 2.0).abs() < 1e-9 * eps);
        assert_eq!(drive_from_photons(0.0, 1.0, 2.0, kappa).unwrap(), 0.0);
        assert!(drive_from_photons(-1.0, 0.0, 0.0, kappa).is_err());
    }

    #[test]
    fn table_interpolates_linearly() {
        let t = DispersiveTable {
            flux: alloc::vec![0.0, 1.0],
            omega_r0: alloc::vec![0.0, 10.0],
            omega_r1: alloc::vec![5.0, 5.0],
        };
        assert_eq!(t.at(0.25), (2.5, 5.0));
        assert_eq!(t.at(-1.0), (0.0, 5.0));
        assert_eq!(t.at(2.0), (10.0, 5.0));
    }

    #[test]
    fn coarse_step_rejected() {
        let kappa = mhz(6.04);
        let table = DispersiveTable::constant(0.0, 0.0);
        let pulse = FluxPulse::static_bias(FluxBias::SWEET_SPOT, 1.0 * NS);
        let drive = DriveSpec {
            omega_ro: 0.0,
            n_bar: 1.0,
            epsilon: 1.0,
            delay: 0.0,
        };
        let err =
            integrate_with_table(&table, kappa, &pulse, &drive, 100.0 * NS, 5.0 * NS).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)));
    }

    #[test]
    fn ring_up_window_value() {
        let w = ring_up_window(mhz(6.04));
        assert!((w / NS - 131.7).abs() < 0.5, "{}", w / NS);
    }
}
