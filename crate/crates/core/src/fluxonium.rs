//! Single fluxonium circuit: Hamiltonian in the LC oscillator basis, spectra
//! and charge matrix elements at arbitrary external flux.
//!
//! The Hamiltonian is
//!
//! ```text
//! H = 4 E_C n² − E_J cos(φ − 2π Φ_ext/Φ₀) + ½ E_L φ²
//! ```
//!
//! with the external flux in the cosine. In the eigenbasis of the inductive
//! and capacitive part, `H_LC = ω_p (a†a + ½)` with `ω_p = √(8 E_C E_L)`, and
//! `φ = φ_osc (a + a†)/√2`, `n = i (a† − a)/(√2 φ_osc)`, `φ_osc = (8 E_C/E_L)^¼`.
//! Matrix elements of `cos φ` and `sin φ` come from the closed form of the
//! displacement operator `exp(iφ)`, so no truncated matrix exponential is
//! involved.

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::units::{ghz, mhz};
use crate::{Error, Result};

pub const DEFAULT_BASIS_SIZE: usize = 120;
pub const DEFAULT_LEVELS: usize = 12;
/// Relative energy shift tolerated when the basis grows by 25%.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-8;
/// Above this the displacement matrix elements lose precision.
pub const MAX_BASIS_SIZE: usize = 400;

/// Circuit energies, coupling and bare resonator of the device.
///
/// All fields are angular frequencies in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxoniumParams {
    pub e_j: f64,
    pub e_c: f64,
    pub e_l: f64,
    /// Qubit-resonator coupling, multiplying the bare charge operator.
    pub g: f64,
    pub omega_r_bare: f64,
    pub kappa: f64,
}

impl FluxoniumParams {
    /// The measured device: E_J = 3.82 GHz, E_C = 0.865 GHz, E_L = 0.822 GHz,
    /// g = 37.2 MHz, ω_r = 5.175 GHz, κ = 6.04 MHz (all over 2π).
    pub fn paper_device() -> Self {
        Self {
            e_j: ghz(3.82),
            e_c: ghz(0.865),
            e_l: ghz(0.822),
            g: mhz(37.2),
            omega_r_bare: ghz(5.175),
            kappa: mhz(6.04),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("e_j", self.e_j),
            ("e_c", self.e_c),
            ("e_l", self.e_l),
            ("omega_r_bare", self.omega_r_bare),
            ("kappa", self.kappa),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::arg(alloc::format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !self.g.is_finite() {
            return Err(Error::arg("g must be finite"));
        }
        Ok(())
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    /// `√(8 E_C E_L)`
    pub fn plasma_frequency(&self) -> f64 {
        libm::sqrt(8.0 * self.e_c * self.e_l)
    }

    /// Oscillator length of the phase, `(8 E_C / E_L)^¼`.
    pub fn phase_osc(&self) -> f64 {
        libm::sqrt(libm::sqrt(8.0 * self.e_c / self.e_l))
    }
}

impl Default for FluxoniumParams {
    fn default() -> Self {
        Self::paper_device()
    }
}

/// External flux in units of Φ₀.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FluxBias(f64);

impl FluxBias {
    pub fn new(phi: f64) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::arg(alloc::format!("flux must be finite, got {phi}")));
        }
        Ok(Self(phi))
    }

    pub const SWEET_SPOT: FluxBias = FluxBias(0.5);

    pub fn phi(self) -> f64 {
        self.0
    }

    /// Flux folded into `[0, 1)`.
    pub fn reduced(self) -> f64 {
        let r = self.0 - libm::floor(self.0);
        if r >= 1.0 {
            0.0
        } else {
            r
        }
    }
}

/// Spectrum at one flux bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    /// Eigen-angular-frequencies referenced to the ground state.
    pub energies: Vec<f64>,
    /// `|⟨i|n|j⟩|`
    pub n_elements: DMatrix<f64>,
    /// Expectation of the parity `φ → −φ` per eigenstate. Exactly ±1 only
    /// where the potential is even (Φ = 0 or ½).
    pub parity: Vec<f64>,
    pub basis_size: usize,
    pub flux: FluxBias,
}

impl SpectrumResult {
    pub fn n_levels(&self) -> usize {
        self.energies.len()
    }

    /// `ω_ij = E_j − E_i` for `i ≤ j`.
    pub fn transition_frequency(&self, i: usize, j: usize) -> Result<f64> {
        if i > j || j >= self.n_levels() {
            return Err(Error::arg(alloc::format!(
                "transition ({i},{j}) needs i <= j < {}",
                self.n_levels()
            )));
        }
        Ok(self.energies[j] - self.energies[i])
    }

    pub fn charge_element(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.n_levels();
        if i >= n || j >= n {
            return Err(Error::arg(alloc::format!(
                "level index ({i},{j}) out of range for {n} levels"
            )));
        }
        Ok(self.n_elements[(i, j)])
    }
}

/// Operators of a truncated oscillator basis. They depend on the circuit but
/// not on the flux, so they are built once per solver.
#[derive(Debug, Clone)]
struct Operators {
    oscillator: Vec<f64>,
    cos_phi: DMatrix<f64>,
    sin_phi: DMatrix<f64>,
    /// Real antisymmetric matrix `N` with `n = i N`.
    charge: DMatrix<f64>,
}

impl Operators {
    fn new(params: &FluxoniumParams, dim: usize) -> Self {
        let omega_p = params.plasma_frequency();
        let phi_osc = params.phase_osc();
        let b = phi_osc / core::f64::consts::SQRT_2;
        let x = b * b;

        let oscillator = (0..dim).map(|n| omega_p * (n as f64 + 0.5)).collect();

        // exp(iφ) = D(ib). For m = n + k:
        //   ⟨m|D|n⟩ = i^k b^k e^{-x/2} √(n!/m!) L_n^(k)(x)
        // The recurrence below runs on f_n = √(n!/(n+k)!) L_n^(k) so nothing
        // overflows for large k.
        let mut cos_phi = DMatrix::zeros(dim, dim);
        let mut sin_phi = DMatrix::zeros(dim, dim);
        let mut ln_fact = 0.0;
        for k in 0..dim {
            if k > 0 {
                ln_fact += libm::log(k as f64);
            }
            let lead = if k == 0 {
                libm::exp(-0.5 * x)
            } else {
                libm::exp(k as f64 * libm::log(b) - 0.5 * ln_fact - 0.5 * x)
            };
            let kf = k as f64;
            let mut prev = 0.0;
            let mut cur = lead;
            for n in 0..dim - k {
                let value = match k % 4 {
                    0 | 1 => cur,
                    _ => -cur,
                };
                let m = n + k;
                if k % 2 == 0 {
                    cos_phi[(m, n)] = value;
                    cos_phi[(n, m)] = value;
                } else {
                    sin_phi[(m, n)] = value;
                    sin_phi[(n, m)] = value;
                }
                let nf = n as f64;
                let next = ((2.0 * nf + 1.0 + kf - x) * cur - libm::sqrt(nf * (nf + kf)) * prev)
                    / libm::sqrt((nf + 1.0) * (nf + 1.0 + kf));
                prev = cur;
                cur = next;
            }
        }

        let mut charge = DMatrix::zeros(dim, dim);
        let scale = 1.0 / (core::f64::consts::SQRT_2 * phi_osc);
        for m in 0..dim - 1 {
            let v = scale * libm::sqrt(m as f64 + 1.0);
            charge[(m + 1, m)] = v;
            charge[(m, m + 1)] = -v;
        }

        Self {
            oscillator,
            cos_phi,
            sin_phi,
            charge,
        }
    }

    fn dim(&self) -> usize {
        self.oscillator.len()
    }

    fn hamiltonian(&self, e_j: f64, flux: FluxBias) -> DMatrix<f64> {
        let theta = core::f64::consts::TAU * flux.reduced();
        let (s, c) = (libm::sin(theta), libm::cos(theta));
        let mut h = &self.cos_phi * (-e_j * c) + &self.sin_phi * (-e_j * s);
        for (n, w) in self.oscillator.iter().enumerate() {
            h[(n, n)] += w;
        }
        h
    }
}

fn sorted_eigenvalues(h: DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Reusable diagonalizer for one device and basis size.
#[derive(Debug, Clone)]
pub struct FluxoniumSolver {
    params: FluxoniumParams,
    ops: Operators,
    extended: Option<Operators>,
    tolerance: f64,
}

impl FluxoniumSolver {
    /// Solver that verifies every spectrum against a basis 25% larger.
    pub fn new(params: FluxoniumParams, basis_size: usize) -> Result<Self> {
        params.validate()?;
        if !(8..=MAX_BASIS_SIZE).contains(&basis_size) {
            return Err(Error::arg(alloc::format!(
                "basis_size must lie in 8..={MAX_BASIS_SIZE}, got {basis_size}"
            )));
        }
        let extended_size = (basis_size * 5)
            .div_ceil(4)
            .min(MAX_BASIS_SIZE + MAX_BASIS_SIZE / 4);
        Ok(Self {
            params,
            ops: Operators::new(&params, basis_size),
            extended: Some(Operators::new(&params, extended_size)),
            tolerance: CONVERGENCE_TOLERANCE,
        })
    }

    pub fn with_defaults(params: FluxoniumParams) -> Result<Self> {
        Self::new(params, DEFAULT_BASIS_SIZE)
    }

    /// Skip the enlarged-basis comparison. Scans that have already checked
    /// convergence at representative points use this.
    pub fn without_convergence_check(mut self) -> Self {
        self.extended = None;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn params(&self) -> &FluxoniumParams {
        &self.params
    }

    pub fn basis_size(&self) -> usize {
        self.ops.dim()
    }

    fn check_levels(&self, n_levels: usize) -> Result<()> {
        if n_levels < 2 {
            return Err(Error::arg("n_levels must be at least 2"));
        }
        if self.basis_size() < 4 * n_levels {
            return Err(Error::arg(alloc::format!(
                "basis_size {} is below 4 x n_levels = {}",
                self.basis_size(),
                4 * n_levels
            )));
        }
        Ok(())
    }

    /// Ground-referenced eigen-angular-frequencies only.
    pub fn energies(&self, flux: FluxBias, n_levels: usize) -> Result<Vec<f64>> {
        self.check_levels(n_levels)?;
        let mut values = sorted_eigenvalues(self.ops.hamiltonian(self.params.e_j, flux));
        values.truncate(n_levels);
        let e0 = values[0];
        values.iter_mut().for_each(|v| *v -= e0);
        Ok(values)
    }

    pub fn spectrum(&self, flux: FluxBias, n_levels: usize) -> Result<SpectrumResult> {
        self.check_levels(n_levels)?;
        let h = self.ops.hamiltonian(self.params.e_j, flux);
        let eig = SymmetricEigen::new(h);

        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        order.truncate(n_levels);

        let e0 = eig.eigenvalues[order[0]];
        let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k] - e0).collect();

        let dim = self.basis_size();
        let vectors = DMatrix::from_fn(dim, n_levels, |r, c| eig.eigenvectors[(r, order[c])]);
        let projected = vectors.transpose() * &self.ops.charge * &vectors;
        let n_elements = DMatrix::from_fn(n_levels, n_levels, |i, j| {
            // projected is antisymmetric up to rounding
            0.5 * (projected[(i, j)].abs() + projected[(j, i)].abs())
        });
        let parity = (0..n_levels)
            .map(|c| {
                (0..dim)
                    .map(|r| {
                        let v = vectors[(r, c)];
                        if r % 2 == 0 {
                            v * v
                        } else {
                            -v * v
                        }
                    })
                    .sum()
            })
            .collect();

        if let Some(ext) = &self.extended {
            let mut big = sorted_eigenvalues(ext.hamiltonian(self.params.e_j, flux));
            let b0 = big[0];
            big.iter_mut().for_each(|v| *v -= b0);
            let shift = energies
                .iter()
                .zip(&big)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let scale = energies[n_levels - 1].max(self.params.plasma_frequency());
            if shift > self.tolerance * scale {
                return Err(Error::Truncation {
                    basis_size: dim,
                    shift,
                });
            }
        }

        Ok(SpectrumResult {
            energies,
            n_elements,
            parity,
            basis_size: dim,
            flux,
        })
    }

    pub fn spectrum_vs_flux(
        &self,
        flux_grid: &[f64],
        n_levels: usize,
    ) -> Result<Vec<SpectrumResult>> {
        if flux_grid.is_empty() {
            return Err(Error::arg("flux grid is empty"));
        }
        flux_grid
            .iter()
            .enumerate()
            .map(|(index, &phi)| {
                FluxBias::new(phi)
                    .and_then(|f| self.spectrum(f, n_levels))
                    .map_err(|e| e.at_grid_point(index))
            })
            .collect()
    }
}

/// One-shot diagonalization with a fresh solver.
pub fn diagonalize(
    params: &FluxoniumParams,
    flux: FluxBias,
    basis_size: usize,
    n_levels: usize,
) -> Result<SpectrumResult> {
    FluxoniumSolver::new(*params, basis_size)?.spectrum(flux, n_levels)
}

/// Spectra on a flux grid at the default basis size, in grid order.
pub fn spectrum_vs_flux(
    params: &FluxoniumParams,
    flux_grid: &[f64],
    n_levels: usize,
) -> Result<Vec<SpectrumResult>> {
    FluxoniumSolver::with_defaults(*params)?.spectrum_vs_flux(flux_grid, n_levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::to_hz;

    fn sweet_spot() -> SpectrumResult {
        diagonalize(
            &FluxoniumParams::paper_device(),
            FluxBias::SWEET_SPOT,
            DEFAULT_BASIS_SIZE,
            DEFAULT_LEVELS,
        )
        .unwrap()
    }

    #[test]
    fn ground_referenced_and_sorted() {
        let s = sweet_spot();
        assert_eq!(s.energies[0], 0.0);
        assert!(s.energies.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(s.n_levels(), DEFAULT_LEVELS);
    }

    #[test]
    fn transition_identity_and_range() {
        let s = sweet_spot();
        assert_eq!(s.transition_frequency(3, 3).unwrap(), 0.0);
        assert!(s.transition_frequency(2, 1).is_err());
        assert!(s.transition_frequency(0, DEFAULT_LEVELS).is_err());
        assert!(s.charge_element(0, DEFAULT_LEVELS).is_err());
    }

    #[test]
    fn charge_elements_symmetric() {
        let s = sweet_spot();
        for i in 0..s.n_levels() {
            for j in 0..s.n_levels() {
                assert_eq!(
                    s.charge_element(i, j).unwrap(),
                    s.charge_element(j, i).unwrap()
                );
            }
        }
    }

    #[test]
    fn sweet_spot_parities_alternate() {
        let s = sweet_spot();
        for (k, p) in s.parity.iter().enumerate() {
            assert!((p.abs() - 1.0).abs() < 1e-9, "level {k} parity {p}");
        }
        assert!(s.parity[0] * s.parity[1] < 0.0);
    }

    #[test]
    fn basis_too_small() {
        let p = FluxoniumParams::paper_device();
        assert!(matches!(
            diagonalize(&p, FluxBias::SWEET_SPOT, 40, 12),
            Err(Error::InvalidArgument(_))
        ));
        assert!(diagonalize(&p, FluxBias::SWEET_SPOT, 120, 1).is_err());
    }

    #[test]
    fn coarse_basis_reports_truncation() {
        let p = FluxoniumParams::paper_device();
        let err = diagonalize(&p, FluxBias::new(0.6).unwrap(), 12, 3).unwrap_err();
        assert!(
            matches!(err, Error::Truncation { basis_size: 12, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = FluxoniumParams::paper_device();
        p.kappa = 0.0;
        assert!(FluxoniumSolver::with_defaults(p).is_err());
        assert!(FluxBias::new(f64::NAN).is_err());
    }

    #[test]
    fn sweet_spot_qubit_frequency_near_measured() {
        let f01 = to_hz(sweet_spot().transition_frequency(0, 1).unwrap());
        // standard Hamiltonian with the rounded device card
        assert!((f01 - 373.09e6).abs() < 0.1e6, "{f01}");
    }

    #[test]
    fn grid_errors_carry_index() {
        let solver = FluxoniumSolver::with_defaults(FluxoniumParams::paper_device()).unwrap();
        let err = solver
            .spectrum_vs_flux(&[0.5, f64::INFINITY], 4)
            .unwrap_err();
        assert!(matches!(err, Error::GridPoint { index: 1, .. }));
        assert!(solver.spectrum_vs_flux(&[], 4).is_err());
    }
}
