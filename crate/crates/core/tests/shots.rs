use fluxread_core::readout::{
    integrate_with_table, snr_limited_error, snr_vs_time, CavityTrajectory, DispersiveTable,
    DriveSpec, FluxPulse,
};
use fluxread_core::shots::{
    assignment_error, fit_gaussians, sample_shots, NoiseModel, ShotSampler, SHOT_CHUNK,
};
use fluxread_core::units::{ghz, mhz, NS};
use fluxread_core::FluxBias;

const ETA: f64 = 0.0604;

/// Sweet-spot pointer states driven at their midpoint.
fn trajectory(n_bar: f64) -> CavityTrajectory {
    let (r0, r1, ro) = (ghz(5.1739), ghz(5.1757), ghz(5.1748));
    let kappa = mhz(6.04);
    let drive = DriveSpec::for_photons(ro, n_bar, r0, r1, kappa).unwrap();
    let pulse = FluxPulse::static_bias(FluxBias::SWEET_SPOT, 0.5 * NS);
    integrate_with_table(
        &DispersiveTable::constant(r0, r1),
        kappa,
        &pulse,
        &drive,
        600.0 * NS,
        0.5 * NS,
    )
    .unwrap()
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (
        m,
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt(),
    )
}

#[test]
fn ideal_shots_reproduce_analytic_snr() {
    let traj = trajectory(75.0);
    let tau = 320.0 * NS;
    let analytic = snr_vs_time(&traj, ETA, &[tau]).unwrap().snr[0];
    let fitted: Vec<f64> = (0..8u64)
        .map(|seed| {
            let shots = sample_shots(&traj, NoiseModel::ideal(ETA), tau, 100_000, seed).unwrap();
            fit_gaussians(&shots).unwrap().snr()
        })
        .collect();
    let (_, se) = mean_std(&fitted);
    for s in &fitted {
        assert!(
            (s - analytic).abs() < 3.0 * se,
            "{s} vs {analytic} (se {se})"
        );
    }
}

#[test]
fn ideal_assignment_matches_snr_limited_error() {
    let traj = trajectory(75.0);
    let n = 100_000;
    for tau in [160.0 * NS, 320.0 * NS, 480.0 * NS] {
        let expect = snr_limited_error(snr_vs_time(&traj, ETA, &[tau]).unwrap().snr[0]).unwrap();
        let shots = sample_shots(&traj, NoiseModel::ideal(ETA), tau, n, 11).unwrap();
        let got = assignment_error(&shots, &fit_gaussians(&shots).unwrap()).error;
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!(
            (got - expect).abs() < 3.0 * se,
            "tau {tau}: {got} vs {expect} (se {se})"
        );
    }
}

#[test]
fn undriven_cavity_gives_coin_flips() {
    let traj = trajectory(0.0);
    let n = 100_000;
    let shots = sample_shots(&traj, NoiseModel::ideal(ETA), 300.0 * NS, n, 5).unwrap();
    let e = assignment_error(&shots, &fit_gaussians(&shots).unwrap()).error;
    // the threshold adapts to noise, so allow the full binomial spread of one label
    assert!(
        (e - 0.5).abs() < 3.0 * (0.25 / (n / 2) as f64).sqrt(),
        "{e}"
    );
}

#[test]
fn same_seed_same_shots() {
    let traj = trajectory(75.0);
    let noise = NoiseModel {
        p_init0: 0.03,
        p_init1: 0.03,
        t1: 10e-6,
        eta: ETA,
    };
    let a = sample_shots(&traj, noise, 280.0 * NS, 10_001, 42).unwrap();
    let b = sample_shots(&traj, noise, 280.0 * NS, 10_001, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 10_001);
    assert_ne!(
        a.integrated,
        sample_shots(&traj, noise, 280.0 * NS, 10_001, 43)
            .unwrap()
            .integrated
    );
    assert!(a
        .prepared
        .iter()
        .enumerate()
        .all(|(s, l)| *l as usize == s % 2));
}

#[test]
fn chunk_order_does_not_matter() {
    let traj = trajectory(75.0);
    let noise = NoiseModel {
        p_init0: 0.03,
        p_init1: 0.03,
        t1: 10e-6,
        eta: ETA,
    };
    let n = 3 * SHOT_CHUNK + 17;
    let sampler = ShotSampler::new(&traj, noise, 280.0 * NS, 9).unwrap();
    let mut chunks: Vec<(usize, _)> = (0..ShotSampler::n_chunks(n))
        .rev()
        .map(|c| (c, sampler.chunk(c, n)))
        .collect();
    chunks.sort_by_key(|c| c.0);
    let assembled = sampler.assemble(chunks.into_iter().map(|c| c.1));
    assert_eq!(
        assembled,
        sample_shots(&traj, noise, 280.0 * NS, n, 9).unwrap()
    );
}

#[test]
fn stronger_drive_never_hurts() {
    let n = 100_000;
    let errors: Vec<f64> = [5.0, 20.0, 75.0]
        .iter()
        .map(|&n_bar| {
            let traj = trajectory(n_bar);
            let shots = sample_shots(&traj, NoiseModel::ideal(ETA), 320.0 * NS, n, 3).unwrap();
            assignment_error(&shots, &fit_gaussians(&shots).unwrap()).error
        })
        .collect();
    for w in errors.windows(2) {
        let se = (w[0] * (1.0 - w[0]) / n as f64).sqrt();
        assert!(w[1] <= w[0] + 3.0 * se, "{errors:?}");
    }
}

#[test]
fn preparation_errors_set_a_floor() {
    // well separated clusters: every misassignment comes from preparation
    let traj = trajectory(75.0);
    let n = 100_000;
    let noise = NoiseModel {
        p_init0: 0.04,
        p_init1: 0.06,
        t1: f64::INFINITY,
        eta: 1.0,
    };
    let shots = sample_shots(&traj, noise, 600.0 * NS, n, 8).unwrap();
    let a = assignment_error(&shots, &fit_gaussians(&shots).unwrap());
    let floor = 0.5 * (noise.p_init0 + noise.p_init1);
    let se = (floor * (1.0 - floor) / n as f64).sqrt();
    assert!(a.error >= floor - 3.0 * se, "{a:?}");
    assert!(
        (a.p1_given0 - 0.04).abs() < 4.0 * (0.04 * 0.96 / (n / 2) as f64).sqrt(),
        "{a:?}"
    );
    assert!(
        (a.p0_given1 - 0.06).abs() < 4.0 * (0.06 * 0.94 / (n / 2) as f64).sqrt(),
        "{a:?}"
    );
}

#[test]
fn relaxation_only_hurts_excited_shots() {
    let traj = trajectory(75.0);
    let n = 100_000;
    let noise = NoiseModel {
        t1: 2e-6,
        ..NoiseModel::ideal(1.0)
    };
    let shots = sample_shots(&traj, noise, 600.0 * NS, n, 8).unwrap();
    let a = assignment_error(&shots, &fit_gaussians(&shots).unwrap());
    assert!(a.p0_given1 > 0.02, "{a:?}");
    assert!(a.p1_given0 < 0.01, "{a:?}");
}

#[test]
fn bad_arguments() {
    let traj = trajectory(75.0);
    assert!(sample_shots(&traj, NoiseModel::ideal(ETA), 280.0 * NS, 0, 1).is_err());
    assert!(sample_shots(&traj, NoiseModel::ideal(ETA), 700.0 * NS, 10, 1).is_err());
    assert!(sample_shots(&traj, NoiseModel::ideal(1.5), 280.0 * NS, 10, 1).is_err());
}
