//! Monte-Carlo single-shot readout: preparation errors, relaxation during the
//! measurement, additive heterodyne noise, then Gaussian fits and
//! threshold assignment.
//!
//! Shots are generated in chunks of [`SHOT_CHUNK`]. Chunk `c` draws from a
//! ChaCha8 stream seeded with the shot-set seed and stream id `c`, so a shot
//! set is identical whether chunks run sequentially or on many threads.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::fit::{levenberg_marquardt, LmOptions};
use crate::readout::{CavityTrajectory, QubitState};
use crate::{Error, Result};

pub const SHOT_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Probability that a shot targeting |0> starts in |1>.
    pub p_init0: f64,
    /// Probability that a shot targeting |1> starts in |0>.
    pub p_init1: f64,
    /// Relaxation time during the measurement (s); `f64::INFINITY` disables decay.
    pub t1: f64,
    pub eta: f64,
}

impl NoiseModel {
    /// Only amplifier noise.
    pub fn ideal(eta: f64) -> Self {
        Self {
            p_init0: 0.0,
            p_init1: 0.0,
            t1: f64::INFINITY,
            eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_init0", self.p_init0), ("p_init1", self.p_init1)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::arg(alloc::format!(
                    "{name} must be a probability, got {p}"
                )));
            }
        }
        if !(self.t1 > 0.0) {
            return Err(Error::arg("t1 must be positive"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::arg("eta must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Integrated heterodyne results with their target labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSet {
    pub prepared: Vec<u8>,
    pub integrated: Vec<Complex64>,
    pub tau: f64,
    pub seed: u64,
}

impl ShotSet {
    pub fn len(&self) -> usize {
        self.prepared.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prepared.is_empty()
    }

    fn append(&mut self, (prepared, integrated): (Vec<u8>, Vec<Complex64>)) {
        self.prepared.extend(prepared);
        self.integrated.extend(integrated);
    }
}

/// Everything a chunk of shots needs, precomputed once per integration time.
#[derive(Debug, Clone)]
pub struct ShotSampler {
    time: Vec<f64>,
    cumulative: [Vec<Complex64>; 2],
    noise: NoiseModel,
    tau: f64,
    sigma: f64,
    seed: u64,
}

impl ShotSampler {
    pub fn new(traj: &CavityTrajectory, noise: NoiseModel, tau: f64, seed: u64) -> Result<Self> {
        noise.validate()?;
        if !(tau > 0.0 && tau <= traj.duration() * (1.0 + 1e-12)) {
            return Err(Error::arg(alloc::format!(
                "tau {tau:e} s outside trajectory"
            )));
        }
        Ok(Self {
            time: traj.time.clone(),
            cumulative: [
                traj.cumulative_output(QubitState::Ground),
                traj.cumulative_output(QubitState::Excited),
            ],
            noise,
            tau,
            // per quadrature, so that |ΔS| / √(2σ²) equals √(2η/τ)|ΔS|
            sigma: libm::sqrt(tau / (4.0 * noise.eta)),
            seed,
        })
    }

    fn integral(&self, state: usize, t: f64) -> Complex64 {
        crate::readout::interpolate(&self.time, &self.cumulative[state], t)
    }

    /// Noise-free integrated signal of a shot that starts in `state` and, if
    /// excited, decays at `t_decay`.
    pub fn signal(&self, state: u8, t_decay: f64) -> Complex64 {
        let tau = self.tau;
        if state == 0 {
            self.integral(0, tau)
        } else if t_decay >= tau {
            self.integral(1, tau)
        } else {
            self.integral(1, t_decay) + self.integral(0, tau) - self.integral(0, t_decay)
        }
    }

    pub fn noise_sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n_chunks(n_shots: usize) -> usize {
        n_shots.div_ceil(SHOT_CHUNK)
    }

    /// Shots `[chunk·SHOT_CHUNK, min((chunk+1)·SHOT_CHUNK, n_shots))`.
    /// Shot `s` targets `s mod 2`.
    pub fn chunk(&self, chunk: usize, n_shots: usize) -> (Vec<u8>, Vec<Complex64>) {
        let start = chunk * SHOT_CHUNK;
        let end = ((chunk + 1) * SHOT_CHUNK).min(n_shots);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chunk as u64);
        let mut prepared = Vec::with_capacity(end.saturating_sub(start));
        let mut integrated = Vec::with_capacity(end.saturating_sub(start));
        for s in start..end {
            let target = (s % 2) as u8;
            let p_flip = if target == 0 {
                self.noise.p_init0
            } else {
                self.noise.p_init1
            };
            let u: f64 = rng.random();
            let actual = if u < p_flip { 1 - target } else { target };
            let e: f64 = rng.sample(Exp1);
            let t_decay = self.noise.t1 * e;
            let nr: f64 = rng.sample(StandardNormal);
            let ni: f64 = rng.sample(StandardNormal);
            prepared.push(target);
            integrated.push(self.signal(actual, t_decay) + Complex64::new(nr, ni) * self.sigma);
        }
        (prepared, integrated)
    }

    pub fn empty_set(&self) -> ShotSet {
        ShotSet {
            prepared: Vec::new(),
            integrated: Vec::new(),
            tau: self.tau,
            seed: self.seed,
        }
    }

    /// Assemble chunks produced elsewhere (e.g. in parallel), in chunk order.
    pub fn assemble(&self, chunks: impl IntoIterator<Item = (Vec<u8>, Vec<Complex64>)>) -> ShotSet {
        let mut set = self.empty_set();
        chunks.into_iter().for_each(|c| set.append(c));
        set
    }
}

pub fn sample_shots(
    traj: &CavityTrajectory,
    noise: NoiseModel,
    tau: f64,
    n_shots: usize,
    seed: u64,
) -> Result<ShotSet> {
    if n_shots == 0 {
        return Err(Error::arg("n_shots must be at least 1"));
    }
    let sampler = ShotSampler::new(traj, noise, tau, seed)?;
    Ok(sampler.assemble((0..ShotSampler::n_chunks(n_shots)).map(|c| sampler.chunk(c, n_shots))))
}

/// Single-Gaussian fits of both labels along the axis through the cluster
/// means, and the threshold between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    /// Unit vector from the |0> cluster towards the |1> cluster.
    pub axis: Complex64,
    pub origin: Complex64,
    pub mu0: f64,
    pub mu1: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub threshold: f64,
}

impl GaussianFit {
    pub fn project(&self, z: Complex64) -> f64 {
        ((z - self.origin) * self.axis.conj()).re
    }

    /// `|μ1 − μ0| / √(σ0² + σ1²)`
    pub fn snr(&self) -> f64 {
        (self.mu1 - self.mu0).abs()
            / libm::sqrt(self.sigma0 * self.sigma0 + self.sigma1 * self.sigma1)
    }

    pub fn classify(&self, z: Complex64) -> u8 {
        let x = self.project(z);
        let above = x > self.threshold;
        if (self.mu1 >= self.mu0) == above {
            1
        } else {
            0
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Fit `A exp(−(x−μ)²/(2σ²))` to the histogram of `xs`. The histogram spans
/// ±5 robust widths around the median so distant outliers do not pull it.
pub fn fit_single_gaussian(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 8 {
        return Err(Error::Fit("need at least 8 samples".into()));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = median(&sorted);
    let mut dev: Vec<f64> = sorted.iter().map(|x| (x - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mut width = 1.482_602_218_505_602 * median(&dev);
    if width == 0.0 {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        width =
            libm::sqrt(xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64);
    }
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Fit(
            "degenerate distribution (all samples identical)".into(),
        ));
    }

    let bins = (libm::sqrt(xs.len() as f64) as usize).clamp(16, 160);
    let lo = med - 5.0 * width;
    let hi = med + 5.0 * width;
    let bw = (hi - lo) / bins as f64;
    let mut counts = alloc::vec![0.0; bins];
    for &x in xs {
        if x >= lo && x < hi {
            counts[(((x - lo) / bw) as usize).min(bins - 1)] += 1.0;
        }
    }
    let centers: Vec<f64> = (0..bins).map(|k| lo + (k as f64 + 0.5) * bw).collect();
    let peak = counts.iter().copied().fold(0.0, f64::max);

    // fit in units of the robust width around the median
    let u: Vec<f64> = centers.iter().map(|c| (c - med) / width).collect();
    let residuals = |p: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(&counts)
            .map(|(x, y)| {
                let z = (x - p[1]) / p[2];
                p[0] * libm::exp(-0.5 * z * z) - y
            })
            .collect()
    };
    let jacobian = |p: &[f64]| -> DMatrix<f64> {
        DMatrix::from_fn(u.len(), 3, |i, k| {
            let z = (u[i] - p[1]) / p[2];
            let e = libm::exp(-0.5 * z * z);
            match k {
                0 => e,
                1 => p[0] * e * z / p[2],
                _ => p[0] * e * z * z / p[2],
            }
        })
    };
    let sol = levenberg_marquardt(&[peak, 0.0, 1.0], residuals, jacobian, LmOptions::default())?;
    let (mu, sigma) = (med + sol.params[1] * width, sol.params[2].abs() * width);
    if !(sigma > 0.0 && mu.is_finite() && sigma.is_finite()) {
        return Err(Error::Fit("histogram fit diverged".into()));
    }
    Ok((mu, sigma))
}

/// Point between the means where the two normalized Gaussians are equal;
/// the midpoint if no such point lies between them.
pub fn minimal_overlap_threshold(mu0: f64, sigma0: f64, mu1: f64, sigma1: f64) -> f64 {
    let mid = 0.5 * (mu0 + mu1);
    let (lo, hi) = if mu0 <= mu1 { (mu0, mu1) } else { (mu1, mu0) };
    let (v0, v1) = (sigma0 * sigma0, sigma1 * sigma1);
    let a = 1.0 / v0 - 1.0 / v1;
    let b = -2.0 * (mu0 / v0 - mu1 / v1);
    let c = mu0 * mu0 / v0 - mu1 * mu1 / v1 + 2.0 * libm::log(sigma0 / sigma1);
    let scale = 1.0 / v0 + 1.0 / v1;
    let roots: Vec<f64> = if a.abs() <= 1e-12 * scale {
        if b == 0.0 {
            Vec::new()
        } else {
            alloc::vec![-c / b]
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            Vec::new()
        } else {
            let s = libm::sqrt(disc);
            alloc::vec![(-b + s) / (2.0 * a), (-b - s) / (2.0 * a)]
        }
    };
    roots
        .into_iter()
        .find(|r| *r >= lo && *r <= hi)
        .unwrap_or(mid)
}

pub fn fit_gaussians(shots: &ShotSet) -> Result<GaussianFit> {
    let (mut sum0, mut sum1, mut n0, mut n1) = (
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        0usize,
        0usize,
    );
    for (&label, &z) in shots.prepared.iter().zip(&shots.integrated) {
        if label == 0 {
            sum0 += z;
            n0 += 1;
        } else {
            sum1 += z;
            n1 += 1;
        }
    }
    if n0 == 0 || n1 == 0 {
        return Err(Error::Fit("both prepared labels must be present".into()));
    }
    let m0 = sum0 / n0 as f64;
    let m1 = sum1 / n1 as f64;
    let d = m1 - m0;
    let axis = if d.norm() > 0.0 {
        d / d.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };

    let project = |z: Complex64| ((z - m0) * axis.conj()).re;
    let split = |label: u8| -> Vec<f64> {
        shots
            .prepared
            .iter()
            .zip(&shots.integrated)
            .filter(|(l, _)| **l == label)
            .map(|(_, z)| project(*z))
            .collect()
    };
    let (mu0, sigma0) = fit_single_gaussian(&split(0))?;
    let (mu1, sigma1) = fit_single_gaussian(&split(1))?;
    Ok(GaussianFit {
        axis,
        origin: m0,
        mu0,
        mu1,
        sigma0,
        sigma1,
        threshold: minimal_overlap_threshold(mu0, sigma0, mu1, sigma1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    /// `(P(0|1) + P(1|0)) / 2`
    pub error: f64,
    pub p0_given1: f64,
    pub p1_given0: f64,
}

pub fn assignment_error(shots: &ShotSet, fit: &GaussianFit) -> Assignment {
    let (mut wrong0, mut wrong1, mut n0, mut n1) = (0usize, 0usize, 0usize, 0usize);
    for (&label, &z) in shots.prepared.iter().zip(&shots.integrated) {
        let assigned = fit.classify(z);
        if label == 0 {
            n0 += 1;
            wrong0 += usize::from(assigned != 0);
        } else {
            n1 += 1;
            wrong1 += usize::from(assigned != 1);
        }
    }
    let p1_given0 = if n0 > 0 {
        wrong0 as f64 / n0 as f64
    } else {
        0.0
    };
    let p0_given1 = if n1 > 0 {
        wrong1 as f64 / n1 as f64
    } else {
        0.0
    };
    Assignment {
        error: 0.5 * (p0_given1 + p1_given0),
        p0_given1,
        p1_given0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(mu: f64, sigma: f64, n: usize, seed: u64) -> ShotSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = ShotSet {
            prepared: Vec::new(),
            integrated: Vec::new(),
            tau: 1.0,
            seed,
        };
        for s in 0..n {
            let label = (s % 2) as u8;
            let centre = if label == 0 { -mu } else { mu };
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            set.prepared.push(label);
            set.integrated
                .push(Complex64::new(centre + sigma * x, sigma * y));
        }
        set
    }

    #[test]
    fn recovers_generator() {
        let shots = synthetic(1.0, 0.5, 100_000, 7);
        let fit = fit_gaussians(&shots).unwrap();
        let origin = fit.origin.re;
        assert!((fit.mu0 + origin + 1.0).abs() < 0.02, "{fit:?}");
        assert!((fit.mu1 + origin - 1.0).abs() < 0.02, "{fit:?}");
        assert!(
            (fit.sigma0 - 0.5).abs() < 0.01 && (fit.sigma1 - 0.5).abs() < 0.01,
            "{fit:?}"
        );
        assert!((fit.snr() - 2.0 / libm::sqrt(0.5)).abs() < 0.02 * 2.828);
        // symmetric input: threshold at the midpoint of the means
        assert!((fit.threshold - 0.5 * (fit.mu0 + fit.mu1)).abs() < 0.01);
    }

    #[test]
    fn separated_clusters_have_no_errors() {
        let shots = synthetic(10.0, 0.1, 2000, 3);
        let fit = fit_gaussians(&shots).unwrap();
        assert_eq!(assignment_error(&shots, &fit).error, 0.0);
    }

    #[test]
    fn identical_clusters_are_coin_flips() {
        let shots = synthetic(0.0, 1.0, 100_000, 5);
        let fit = fit_gaussians(&shots).unwrap();
        let a = assignment_error(&shots, &fit);
        // binomial standard error of the mean of two 5e4-shot rates ≈ 0.0016
        assert!((a.error - 0.5).abs() < 0.005, "{a:?}");
    }

    #[test]
    fn degenerate_input() {
        let shots = ShotSet {
            prepared: alloc::vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1],
            integrated: alloc::vec![Complex64::new(1.0, 1.0); 18],
            tau: 1.0,
            seed: 0,
        };
        assert!(matches!(fit_gaussians(&shots), Err(Error::Fit(_))));
        let one_label = ShotSet {
            prepared: alloc::vec![0; 20],
            integrated: (0..20).map(|k| Complex64::new(k as f64, 0.0)).collect(),
            tau: 1.0,
            seed: 0,
        };
        assert!(fit_gaussians(&one_label).is_err());
    }

    #[test]
    fn threshold_unequal_widths() {
        let t = minimal_overlap_threshold(0.0, 1.0, 4.0, 2.0);
        let pdf = |x: f64, m: f64, s: f64| libm::exp(-0.5 * ((x - m) / s) * ((x - m) / s)) / s;
        assert!((pdf(t, 0.0, 1.0) - pdf(t, 4.0, 2.0)).abs() < 1e-12);
        assert!(t > 0.0 && t < 2.0);
        assert_eq!(minimal_overlap_threshold(-1.0, 0.5, 1.0, 0.5), 0.0);
    }

    #[test]
    fn noise_model_validation() {
        assert!(NoiseModel::ideal(0.06).validate().is_ok());
        assert!(NoiseModel {
            p_init0: 1.5,
            ..NoiseModel::ideal(0.1)
        }
        .validate()
        .is_err());
        assert!(NoiseModel {
            t1: 0.0,
            ..NoiseModel::ideal(0.1)
        }
        .validate()
        .is_err());
        assert!(NoiseModel::ideal(0.0).validate().is_err());
    }
}
