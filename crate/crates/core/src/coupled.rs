//! Qubit-state-dependent resonator pulls, the dispersive shift and the
//! flux points where a qubit transition meets (a multiple of) the resonator.
//!
//! Pulls are second order in the coupling `g n (a + a†)`, counter-rotating
//! terms included:
//!
//! ```text
//! χ_i = g² Σ_{j≠i} |n_ij|² · 2 ω_ji / (ω_r² − ω_ji²),   ω_ji = E_j − E_i
//! ```
//!
//! so a transition just below the resonator pushes it up.

use alloc::vec::Vec;

use crate::fluxonium::{
    FluxBias, FluxoniumParams, FluxoniumSolver, SpectrumResult, DEFAULT_LEVELS,
};
use crate::units::{hz, mhz};
use crate::{Error, Result};

/// Minimum levels: the |2>->|0> and |3>->|1> contributions must be present.
pub const MIN_LEVELS: usize = 6;
pub const MIN_MIST_LEVELS: usize = 8;
/// Pre-scan step used to bracket crossings before bisection.
pub const CROSSING_SCAN_STEP: f64 = 1e-4;
pub const MIST_SCAN_STEP: f64 = 1e-3;
const BISECTION_FLUX_TOL: f64 = 1e-10;

pub fn default_resonance_guard() -> f64 {
    hz(100e3)
}

pub fn default_mist_window() -> f64 {
    mhz(50.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersivePoint {
    pub flux: FluxBias,
    /// Resonator pull with the qubit in |0>.
    pub chi0: f64,
    pub chi1: f64,
    /// `(omega_r1 − omega_r0) / 2`
    pub chi: f64,
    pub omega_r0: f64,
    pub omega_r1: f64,
}

impl DispersivePoint {
    fn from_pulls(flux: FluxBias, omega_r_bare: f64, chi0: f64, chi1: f64) -> Self {
        let omega_r0 = omega_r_bare + chi0;
        let omega_r1 = omega_r_bare + chi1;
        Self {
            flux,
            chi0,
            chi1,
            chi: (omega_r1 - omega_r0) / 2.0,
            omega_r0,
            omega_r1,
        }
    }
}

/// Transition `transition.0 -> transition.1` within `detuning` of
/// `harmonic × ω_r` at `flux`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceFlag {
    pub flux: FluxBias,
    pub transition: (usize, usize),
    pub harmonic: u32,
    pub detuning: f64,
}

/// One entry of a χ scan. Points inside the resonance guard carry the
/// offending transition instead of a pull.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub flux: FluxBias,
    pub point: Option<DispersivePoint>,
    pub divergence: Option<ResonanceFlag>,
}

#[derive(Debug, Clone)]
pub struct DispersiveModel {
    solver: FluxoniumSolver,
    n_levels: usize,
    guard: f64,
}

impl DispersiveModel {
    pub fn new(params: FluxoniumParams, n_levels: usize) -> Result<Self> {
        Self::with_solver(FluxoniumSolver::with_defaults(params)?, n_levels)
    }

    pub fn with_solver(solver: FluxoniumSolver, n_levels: usize) -> Result<Self> {
        if n_levels < MIN_LEVELS {
            return Err(Error::arg(alloc::format!(
                "n_levels must be at least {MIN_LEVELS}"
            )));
        }
        if solver.basis_size() < 4 * n_levels {
            return Err(Error::arg("basis_size is below 4 x n_levels"));
        }
        Ok(Self {
            solver,
            n_levels,
            guard: default_resonance_guard(),
        })
    }

    pub fn with_guard(mut self, guard: f64) -> Self {
        self.guard = guard;
        self
    }

    pub fn params(&self) -> &FluxoniumParams {
        self.solver.params()
    }

    pub fn solver(&self) -> &FluxoniumSolver {
        &self.solver
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn point(&self, flux: FluxBias) -> Result<DispersivePoint> {
        let spectrum = self.solver.spectrum(flux, self.n_levels)?;
        self.point_from_spectrum(&spectrum)
    }

    pub fn point_from_spectrum(&self, spectrum: &SpectrumResult) -> Result<DispersivePoint> {
        let p = self.params();
        let wr = p.omega_r_bare;
        let g2 = p.g * p.g;
        let levels = spectrum.n_levels();
        let mut pulls = [0.0; 2];
        for (i, pull) in pulls.iter_mut().enumerate() {
            for j in 0..levels {
                if j == i {
                    continue;
                }
                let w = spectrum.energies[j] - spectrum.energies[i];
                let detuning = (w - wr).abs();
                if w > 0.0 && detuning < self.guard {
                    return Err(Error::Divergence {
                        flux: spectrum.flux.phi(),
                        transition: (i, j),
                        detuning,
                    });
                }
                let n = spectrum.n_elements[(i, j)];
                *pull += g2 * n * n * 2.0 * w / (wr * wr - w * w);
            }
        }
        Ok(DispersivePoint::from_pulls(
            spectrum.flux,
            wr,
            pulls[0],
            pulls[1],
        ))
    }

    /// Per-point pulls; guard violations are flagged rather than fatal.
    pub fn scan(&self, flux_grid: &[f64]) -> Result<Vec<ScanPoint>> {
        flux_grid
            .iter()
            .enumerate()
            .map(|(index, &phi)| {
                let flux = FluxBias::new(phi).map_err(|e| e.at_grid_point(index))?;
                match self.point(flux) {
                    Ok(point) => Ok(ScanPoint {
                        flux,
                        point: Some(point),
                        divergence: None,
                    }),
                    Err(Error::Divergence {
                        transition,
                        detuning,
                        ..
                    }) => Ok(ScanPoint {
                        flux,
                        point: None,
                        divergence: Some(ResonanceFlag {
                            flux,
                            transition,
                            harmonic: 1,
                            detuning,
                        }),
                    }),
                    Err(e) => Err(e.at_grid_point(index)),
                }
            })
            .collect()
    }

    /// Fluxes in `range` where a transition out of |0> or |1> equals ω_r.
    pub fn divergences(&self, range: (f64, f64)) -> Result<Vec<ResonanceFlag>> {
        let fast = self.fast_solver();
        let mut flags = Vec::new();
        let grid = scan_grid(range, CROSSING_SCAN_STEP)?;
        let wr = self.params().omega_r_bare;
        let detunings = self.transition_table(&fast, &grid, |w| w - wr)?;
        for (col, &(i, j)) in self.transitions().iter().enumerate() {
            for k in 0..grid.len() - 1 {
                let (a, b) = (detunings[k][col], detunings[k + 1][col]);
                if a == 0.0 || a.signum() != b.signum() {
                    flags.push(self.bisect(&fast, (i, j), 1, (grid[k], grid[k + 1]), a)?);
                }
            }
        }
        flags.sort_by(|a, b| a.flux.phi().total_cmp(&b.flux.phi()));
        Ok(flags)
    }

    /// Transitions out of |0>/|1> within `window` of `m ω_r`, `m ≤ max_harmonic`,
    /// sorted by ascending detuning. One flag per transition and harmonic at the
    /// closest approach inside the range (or each crossing).
    pub fn mist(
        &self,
        range: (f64, f64),
        max_harmonic: u32,
        window: f64,
    ) -> Result<Vec<ResonanceFlag>> {
        if max_harmonic < 1 {
            return Err(Error::arg("max_harmonic must be at least 1"));
        }
        if self.n_levels < MIN_MIST_LEVELS {
            return Err(Error::arg(alloc::format!(
                "MIST scan needs at least {MIN_MIST_LEVELS} levels"
            )));
        }
        let fast = self.fast_solver();
        let grid = scan_grid(range, MIST_SCAN_STEP)?;
        let wr = self.params().omega_r_bare;
        let energies = self.transition_table(&fast, &grid, |w| w)?;
        let mut flags = Vec::new();
        for (col, &transition) in self.transitions().iter().enumerate() {
            for m in 1..=max_harmonic {
                let target = m as f64 * wr;
                let d: Vec<f64> = energies.iter().map(|row| row[col] - target).collect();
                let mut candidates = Vec::new();
                for k in 0..grid.len() - 1 {
                    if d[k] == 0.0 || d[k].signum() != d[k + 1].signum() {
                        candidates.push(self.bisect(
                            &fast,
                            transition,
                            m,
                            (grid[k], grid[k + 1]),
                            d[k],
                        )?);
                    }
                }
                if candidates.is_empty() {
                    // closest approach on the grid
                    let (k, best) = d
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                        .expect("grid is nonempty");
                    candidates.push(ResonanceFlag {
                        flux: FluxBias::new(grid[k])?,
                        transition,
                        harmonic: m,
                        detuning: best.abs(),
                    });
                }
                flags.extend(candidates.into_iter().filter(|f| f.detuning < window));
            }
        }
        flags.sort_by(|a, b| a.detuning.total_cmp(&b.detuning));
        Ok(flags)
    }

    fn fast_solver(&self) -> FluxoniumSolver {
        self.solver.clone().without_convergence_check()
    }

    fn transitions(&self) -> Vec<(usize, usize)> {
        (0..2)
            .flat_map(|i| (i + 1..self.n_levels).map(move |j| (i, j)))
            .collect()
    }

    fn transition_table(
        &self,
        solver: &FluxoniumSolver,
        grid: &[f64],
        f: impl Fn(f64) -> f64,
    ) -> Result<Vec<Vec<f64>>> {
        let transitions = self.transitions();
        grid.iter()
            .map(|&phi| {
                let e = solver.energies(FluxBias::new(phi)?, self.n_levels)?;
                Ok(transitions.iter().map(|&(i, j)| f(e[j] - e[i])).collect())
            })
            .collect()
    }

    fn bisect(
        &self,
        solver: &FluxoniumSolver,
        (i, j): (usize, usize),
        harmonic: u32,
        (mut lo, mut hi): (f64, f64),
        mut f_lo: f64,
    ) -> Result<ResonanceFlag> {
        let target = harmonic as f64 * self.params().omega_r_bare;
        let eval = |phi: f64| -> Result<f64> {
            let e = solver.energies(FluxBias::new(phi)?, self.n_levels)?;
            Ok(e[j] - e[i] - target)
        };
        if f_lo != 0.0 {
            while hi - lo > BISECTION_FLUX_TOL {
                let mid = 0.5 * (lo + hi);
                let f_mid = eval(mid)?;
                if f_mid == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if f_mid.signum() == f_lo.signum() {
                    lo = mid;
                    f_lo = f_mid;
                } else {
                    hi = mid;
                }
            }
        }
        let root = 0.5 * (lo + hi);
        Ok(ResonanceFlag {
            flux: FluxBias::new(root)?,
            transition: (i, j),
            harmonic,
            detuning: eval(root)?.abs(),
        })
    }
}

fn scan_grid((lo, hi): (f64, f64), step: f64) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(Error::arg("flux range must be finite with lo < hi"));
    }
    if hi - lo > 1.0 {
        return Err(Error::arg("flux range must lie within one period"));
    }
    let n = libm::ceil((hi - lo) / step) as usize;
    Ok((0..=n)
        .map(|k| lo + (hi - lo) * k as f64 / n as f64)
        .collect())
}

/// Pulls at one flux with the default basis.
pub fn dispersive_point(
    params: &FluxoniumParams,
    flux: FluxBias,
    n_levels: usize,
) -> Result<DispersivePoint> {
    DispersiveModel::new(*params, n_levels)?.point(flux)
}

/// `(omega_r0, omega_r1)` at one flux.
pub fn dressed_frequencies(params: &FluxoniumParams, flux: FluxBias) -> Result<(f64, f64)> {
    let p = dispersive_point(params, flux, DEFAULT_LEVELS)?;
    Ok((p.omega_r0, p.omega_r1))
}

pub fn chi_vs_flux(
    params: &FluxoniumParams,
    flux_grid: &[f64],
    n_levels: usize,
) -> Result<Vec<ScanPoint>> {
    DispersiveModel::new(*params, n_levels)?.scan(flux_grid)
}

pub fn divergence_scan(
    params: &FluxoniumParams,
    flux_range: (f64, f64),
    n_levels: usize,
) -> Result<Vec<ResonanceFlag>> {
    DispersiveModel::new(*params, n_levels)?.divergences(flux_range)
}

pub fn mist_scan(
    params: &FluxoniumParams,
    flux_range: (f64, f64),
    n_levels: usize,
    max_harmonic: u32,
) -> Result<Vec<ResonanceFlag>> {
    DispersiveModel::new(*params, n_levels)?.mist(flux_range, max_harmonic, default_mist_window())
}
