use alloc::vec::Vec;

use crate::fluxonium::FluxBias;
use crate::{Error, Result};

/// External flux trajectory: raised-cosine ramp from `base_flux` to
/// `base_flux + delta_flux` over `rise_time`, flat for `hold_time`, then the
/// mirrored ramp back to `base_flux`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxPulse {
    pub base_flux: FluxBias,
    pub delta_flux: f64,
    pub rise_time: f64,
    pub hold_time: f64,
    pub sample_dt: f64,
}

impl FluxPulse {
    /// No flux excursion at all.
    pub fn static_bias(base_flux: FluxBias, sample_dt: f64) -> Self {
        Self {
            base_flux,
            delta_flux: 0.0,
            rise_time: 0.0,
            hold_time: f64::INFINITY,
            sample_dt,
        }
    }

    pub fn target_flux(&self) -> FluxBias {
        FluxBias::new(self.base_flux.phi() + self.delta_flux).expect("validated pulse")
    }

    fn ramp(&self, u: f64) -> f64 {
        // exactly one half at u = 1/2
        0.5 + 0.5 * libm::sin(core::f64::consts::PI * (u - 0.5))
    }

    pub fn flux_at(&self, t: f64) -> f64 {
        let base = self.base_flux.phi();
        if self.delta_flux == 0.0 || t <= 0.0 {
            return base;
        }
        if t < self.rise_time {
            return base + self.delta_flux * self.ramp(t / self.rise_time);
        }
        let fall_start = self.rise_time + self.hold_time;
        if t <= fall_start {
            return base + self.delta_flux;
        }
        if t < fall_start + self.rise_time {
            return base + self.delta_flux * self.ramp(1.0 - (t - fall_start) / self.rise_time);
        }
        base
    }

    /// `(t, Φ(t))` on the pulse's own grid, up to `duration`.
    pub fn samples(&self, duration: f64) -> Vec<(f64, f64)> {
        let n = libm::round(duration / self.sample_dt) as usize;
        (0..=n)
            .map(|k| {
                let t = k as f64 * self.sample_dt;
                (t, self.flux_at(t))
            })
            .collect()
    }
}

pub fn make_flux_pulse(
    base: FluxBias,
    delta: f64,
    rise_time: f64,
    hold_time: f64,
    dt: f64,
) -> Result<FluxPulse> {
    if !delta.is_finite() {
        return Err(Error::arg("delta_flux must be finite"));
    }
    if !(rise_time >= 0.0 && rise_time.is_finite()) {
        return Err(Error::arg("rise_time must be finite and non-negative"));
    }
    if !(hold_time >= 0.0) {
        return Err(Error::arg("hold_time must be non-negative"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::arg("sample dt must be positive"));
    }
    if rise_time > 0.0 && dt >= rise_time / 4.0 {
        return Err(Error::Resolution(alloc::format!(
            "sample dt {dt:e} s does not resolve a {rise_time:e} s rise"
        )));
    }
    Ok(FluxPulse {
        base_flux: base,
        delta_flux: delta,
        rise_time,
        hold_time,
        sample_dt: dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::NS;

    fn paper_pulse() -> FluxPulse {
        make_flux_pulse(
            FluxBias::SWEET_SPOT,
            0.1567,
            50.0 * NS,
            1000.0 * NS,
            0.5 * NS,
        )
        .unwrap()
    }

    #[test]
    fn zero_delta_is_flat() {
        let p =
            make_flux_pulse(FluxBias::SWEET_SPOT, 0.0, 50.0 * NS, 100.0 * NS, 0.5 * NS).unwrap();
        assert!(p.samples(300.0 * NS).iter().all(|&(_, f)| f == 0.5));
    }

    #[test]
    fn reaches_readout_point() {
        let p = paper_pulse();
        assert!((p.flux_at(75.0 * NS) - 0.6567).abs() < 1e-12);
        assert_eq!(p.flux_at(0.0), 0.5);
    }

    #[test]
    fn midpoint_exact() {
        let p = paper_pulse();
        assert_eq!(p.flux_at(25.0 * NS), 0.5 + 0.1567 / 2.0);
    }

    #[test]
    fn continuous_and_returns() {
        let p = make_flux_pulse(FluxBias::SWEET_SPOT, 0.1, 20.0 * NS, 50.0 * NS, 0.1 * NS).unwrap();
        let s = p.samples(200.0 * NS);
        assert!(s.windows(2).all(|w| (w[1].1 - w[0].1).abs() < 0.1 * 0.02));
        assert_eq!(s.last().unwrap().1, 0.5);
    }

    #[test]
    fn resolution_error() {
        let err =
            make_flux_pulse(FluxBias::SWEET_SPOT, 0.1, 50.0 * NS, 0.0, 12.5 * NS).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)));
        assert!(make_flux_pulse(FluxBias::SWEET_SPOT, 0.1, 0.0, 0.0, 12.5 * NS).is_ok());
        assert!(make_flux_pulse(FluxBias::SWEET_SPOT, 0.1, -1.0, 0.0, 1.0).is_err());
        assert!(make_flux_pulse(FluxBias::SWEET_SPOT, 0.1, 1.0, 0.0, 0.0).is_err());
    }
}
