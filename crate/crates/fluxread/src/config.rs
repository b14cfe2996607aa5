//! Experiment configuration. Frequencies are in Hz (`_hz` keys), times in
//! seconds (`_s` keys) and flux in units of Φ₀.

use std::path::{Path, PathBuf};

use fluxread_core::coupled::DispersiveModel;
use fluxread_core::shots::NoiseModel;
use fluxread_core::units::hz;
use fluxread_core::{FluxoniumParams, FluxoniumSolver};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub device: DeviceConfig,
    pub solver: SolverConfig,
    pub spectrum: SpectrumConfig,
    pub chi: ChiConfig,
    pub readout: ReadoutConfig,
    pub noise: NoiseConfig,
    pub shots: ShotsConfig,
    pub sweep: SweepConfig,
    pub calibration: CalibrationConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub e_j_hz: f64,
    pub e_c_hz: f64,
    pub e_l_hz: f64,
    pub g_hz: f64,
    pub omega_r_hz: f64,
    pub kappa_hz: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            e_j_hz: 3.82e9,
            e_c_hz: 0.865e9,
            e_l_hz: 0.822e9,
            g_hz: 37.2e6,
            omega_r_hz: 5.175e9,
            kappa_hz: 6.04e6,
        }
    }
}

impl DeviceConfig {
    pub fn params(&self) -> FluxoniumParams {
        FluxoniumParams {
            e_j: hz(self.e_j_hz),
            e_c: hz(self.e_c_hz),
            e_l: hz(self.e_l_hz),
            g: hz(self.g_hz),
            omega_r_bare: hz(self.omega_r_hz),
            kappa: hz(self.kappa_hz),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub basis_size: usize,
    pub n_levels: usize,
    /// Transitions closer than this to the resonator are flagged, not evaluated.
    pub resonance_guard_hz: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            basis_size: fluxread_core::fluxonium::DEFAULT_BASIS_SIZE,
            n_levels: fluxread_core::fluxonium::DEFAULT_LEVELS,
            resonance_guard_hz: 100e3,
        }
    }
}

/// Either an explicit list of values or an inclusive linear range.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Points(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        points: usize,
    },
}

impl Grid {
    pub fn range(start: f64, stop: f64, points: usize) -> Self {
        Grid::Range {
            start,
            stop,
            points,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Points(v) => v.clone(),
            Grid::Range {
                start,
                stop,
                points,
            } => match points {
                0 => vec![],
                1 => vec![*start],
                n => (0..*n)
                    .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let v = self.values();
        if v.is_empty() {
            return Err(CliError::Config(format!("{name}: grid is empty")));
        }
        if let Some(x) = v.iter().find(|x| !x.is_finite()) {
            return Err(CliError::Config(format!("{name}: non-finite value {x}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub flux: Grid,
    /// Columns omega_01_hz .. omega_0k_hz.
    pub transitions: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            flux: Grid::range(0.0, 1.0, 201),
            transitions: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChiConfig {
    pub flux: Grid,
}

impl Default for ChiConfig {
    fn default() -> Self {
        Self {
            flux: Grid::range(0.45, 0.75, 601),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Crossing {
    Reject,
    StepOver,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutConfig {
    pub base_flux: f64,
    pub delta_flux: f64,
    pub rise_time_s: f64,
    /// Defaults to the sweet-spot midpoint ω_r,0 + χ.
    pub readout_frequency_hz: Option<f64>,
    pub n_bar: f64,
    pub drive_delay_s: f64,
    pub eta: f64,
    /// Divides the simulated SNR; applied as η / c².
    pub noise_normalization: f64,
    /// Added to every simulated integration time in the output.
    pub acquisition_offset_s: f64,
    pub dt_s: f64,
    pub tau_step_s: f64,
    pub tau_max_s: f64,
    pub crossing: Crossing,
    /// Also write the static sweet-spot readout for comparison.
    pub sweet_spot_comparison: bool,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self {
            base_flux: 0.5,
            delta_flux: 0.1567,
            rise_time_s: 50e-9,
            readout_frequency_hz: None,
            n_bar: 75.0,
            drive_delay_s: 0.0,
            eta: 0.0604,
            noise_normalization: 1.0,
            acquisition_offset_s: 40e-9,
            dt_s: 0.5e-9,
            tau_step_s: 10e-9,
            tau_max_s: 440e-9,
            crossing: Crossing::StepOver,
            sweet_spot_comparison: true,
        }
    }
}

impl ReadoutConfig {
    pub fn eta_eff(&self) -> f64 {
        self.eta / (self.noise_normalization * self.noise_normalization)
    }

    /// Simulated integration times; the reported ones add the acquisition offset.
    pub fn tau_sim(&self) -> Vec<f64> {
        let span = self.tau_max_s - self.acquisition_offset_s;
        let n = ((span / self.tau_step_s) * (1.0 + 1e-12)).floor() as usize;
        (1..=n).map(|k| k as f64 * self.tau_step_s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub p_init0: f64,
    pub p_init1: f64,
    /// T1 at the readout point.
    pub t1_s: f64,
    pub t1_sweet_spot_s: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            p_init0: 0.03,
            p_init1: 0.03,
            t1_s: 10e-6,
            t1_sweet_spot_s: 10e-6,
        }
    }
}

impl NoiseConfig {
    pub fn model(&self, t1: f64, eta: f64) -> NoiseModel {
        NoiseModel {
            p_init0: self.p_init0,
            p_init1: self.p_init1,
            t1,
            eta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShotsConfig {
    pub n_shots: usize,
    pub seed: u64,
    /// Reported integration time of the dumped shot set.
    pub dump_tau_s: f64,
}

impl Default for ShotsConfig {
    fn default() -> Self {
        Self {
            n_shots: 20_000,
            seed: 1,
            dump_tau_s: 280e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub delta_flux: Grid,
    pub n_bar: Grid,
    /// Reported integration time.
    pub tau_s: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            delta_flux: Grid::range(0.1367, 0.1767, 5),
            n_bar: Grid::Points(vec![25.0, 50.0, 75.0, 100.0]),
            tau_s: 200e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// SNR against DAC amplitude.
    pub snr_csv: Option<PathBuf>,
    /// Qubit coherence |ρ01| against DAC amplitude.
    pub coherence_csv: Option<PathBuf>,
    /// Ramsey z against phase (rad), optional.
    pub ramsey_csv: Option<PathBuf>,
    /// Transmission magnitude against frequency (Hz), optional; sets κ.
    pub linewidth_csv: Option<PathBuf>,
    pub amplitude_v: f64,
    pub chi_hz: f64,
    pub tau_total_s: f64,
    pub tau_pulse_s: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            snr_csv: None,
            coherence_csv: None,
            ramsey_csv: None,
            linewidth_csv: None,
            amplitude_v: 0.4,
            chi_hz: 0.92e6,
            tau_total_s: 3.79e-6,
            tau_pulse_s: 2.27e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{name} must be non-negative and finite, got {v}"
        )))
    }
}

fn config_err(section: &str) -> impl Fn(fluxread_core::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{section}: {e}"))
}

impl Config {
    /// Parse and validate; relative calibration paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Input {
            path: path.into(),
            source,
        })?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Parse {
                path: path.into(),
                msg,
            },
            e => e,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let c = &mut cfg.calibration;
        for p in [
            &mut c.snr_csv,
            &mut c.coherence_csv,
            &mut c.ramsey_csv,
            &mut c.linewidth_csv,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn solver(&self) -> Result<FluxoniumSolver> {
        FluxoniumSolver::new(self.device.params(), self.solver.basis_size)
            .map_err(config_err("solver"))
    }

    pub fn model(&self) -> Result<DispersiveModel> {
        let guard = hz(self.solver.resonance_guard_hz);
        Ok(
            DispersiveModel::with_solver(self.solver()?, self.solver.n_levels)
                .map_err(config_err("solver"))?
                .with_guard(guard),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.device
            .params()
            .validate()
            .map_err(config_err("device"))?;
        positive("solver.resonance_guard_hz", self.solver.resonance_guard_hz)?;
        self.model()?;

        self.spectrum.flux.validate("spectrum.flux")?;
        let t = self.spectrum.transitions;
        if t == 0 || t >= self.solver.n_levels {
            return Err(CliError::Config(format!(
                "spectrum.transitions must be in 1..{}, got {t}",
                self.solver.n_levels
            )));
        }
        self.chi.flux.validate("chi.flux")?;

        let r = &self.readout;
        for (name, v) in [
            ("readout.base_flux", r.base_flux),
            ("readout.delta_flux", r.delta_flux),
        ] {
            if !v.is_finite() {
                return Err(CliError::Config(format!("{name} must be finite, got {v}")));
            }
        }
        non_negative("readout.rise_time_s", r.rise_time_s)?;
        if let Some(f) = r.readout_frequency_hz {
            positive("readout.readout_frequency_hz", f)?;
        }
        non_negative("readout.n_bar", r.n_bar)?;
        non_negative("readout.drive_delay_s", r.drive_delay_s)?;
        positive("readout.eta", r.eta)?;
        if r.eta > 1.0 {
            return Err(CliError::Config(format!(
                "readout.eta must not exceed 1, got {}",
                r.eta
            )));
        }
        positive("readout.noise_normalization", r.noise_normalization)?;
        non_negative("readout.acquisition_offset_s", r.acquisition_offset_s)?;
        positive("readout.dt_s", r.dt_s)?;
        positive("readout.tau_step_s", r.tau_step_s)?;
        positive("readout.tau_max_s", r.tau_max_s)?;
        if r.tau_sim().is_empty() {
            return Err(CliError::Config(
                "readout: tau_max_s must exceed acquisition_offset_s by at least one tau_step_s"
                    .into(),
            ));
        }

        let n = &self.noise;
        for t1 in [n.t1_s, n.t1_sweet_spot_s] {
            n.model(t1, r.eta_eff())
                .validate()
                .map_err(config_err("noise"))?;
        }
        let dump = self.shots.dump_tau_s - r.acquisition_offset_s;
        if !(dump > 0.0 && dump <= r.tau_max_s - r.acquisition_offset_s) {
            return Err(CliError::Config(format!(
                "shots.dump_tau_s must lie in ({}, {}] s",
                r.acquisition_offset_s, r.tau_max_s
            )));
        }

        self.sweep.delta_flux.validate("sweep.delta_flux")?;
        self.sweep.n_bar.validate("sweep.n_bar")?;
        for v in self.sweep.n_bar.values() {
            non_negative("sweep.n_bar", v)?;
        }
        if !(self.sweep.tau_s > r.acquisition_offset_s && self.sweep.tau_s.is_finite()) {
            return Err(CliError::Config(format!(
                "sweep.tau_s must exceed readout.acquisition_offset_s, got {}",
                self.sweep.tau_s
            )));
        }

        let c = &self.calibration;
        positive("calibration.amplitude_v", c.amplitude_v)?;
        positive("calibration.chi_hz", c.chi_hz.abs())?;
        positive("calibration.tau_total_s", c.tau_total_s)?;
        positive("calibration.tau_pulse_s", c.tau_pulse_s)?;
        Ok(())
    }
}
