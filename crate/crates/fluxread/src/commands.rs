use std::path::{Path, PathBuf};

use fluxread_core::calibration::{
    efficiency, fit_coherence_gaussian, fit_linewidth, fit_ramsey, fit_snr_slope, photons_from_dac,
};
use fluxread_core::coupled::DispersiveModel;
use fluxread_core::readout::{
    integrate_cavity_with, make_flux_pulse, snr_limited_error, snr_vs_time, CavityTrajectory,
    DriveSpec, Traversal,
};
use fluxread_core::shots::{assignment_error, fit_gaussians, NoiseModel, ShotSampler, ShotSet};
use fluxread_core::units::{hz, to_hz};
use fluxread_core::{Error, FluxBias};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Config, Crossing};
use crate::error::{CliError, Result};
use crate::io::{ensure_dir, fmt_f64, read_xy, write_shots, write_text, Table};
use crate::svg::Plot;

pub struct Context {
    pub cfg: Config,
    pub out: PathBuf,
    pub svg: bool,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn prepare(&self) -> Result<()> {
        ensure_dir(&self.out)
    }

    fn plot(&self, name: &str, plot: Plot, written: &mut Vec<PathBuf>) -> Result<()> {
        if self.svg {
            let p = self.path(name);
            write_text(&p, &plot.render())?;
            written.push(p);
        }
        Ok(())
    }
}

fn at_grid_point(index: usize) -> impl Fn(Error) -> Error {
    move |e| Error::GridPoint {
        index,
        source: Box::new(e),
    }
}

fn flux(phi: f64) -> Result<FluxBias> {
    Ok(FluxBias::new(phi)?)
}

pub fn spectrum(ctx: &Context) -> Result<Vec<PathBuf>> {
    ctx.prepare()?;
    let solver = ctx.cfg.solver()?;
    let k = ctx.cfg.spectrum.transitions;
    let grid = ctx.cfg.spectrum.flux.values();
    let rows: Vec<Vec<f64>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &phi)| {
            let s = solver
                .spectrum(flux(phi)?, ctx.cfg.solver.n_levels)
                .map_err(at_grid_point(i))?;
            (1..=k)
                .map(|j| Ok(to_hz(s.transition_frequency(0, j)?)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut t = Table::new(
        std::iter::once("flux".to_string()).chain((1..=k).map(|j| format!("omega_0{j}_hz"))),
    );
    for (phi, r) in grid.iter().zip(&rows) {
        t.push(
            std::iter::once(*phi)
                .chain(r.iter().copied())
                .map(fmt_f64)
                .collect(),
        );
    }
    let path = ctx.path("spectrum.csv");
    t.write(&path)?;
    let mut written = vec![path];

    let mut plot = Plot::new("Fluxonium transitions", "flux (Φ0)", "frequency (GHz)");
    for j in 0..k {
        let pts = grid
            .iter()
            .zip(&rows)
            .map(|(x, r)| (*x, r[j] * 1e-9))
            .collect();
        plot = plot.series(format!("0-{}", j + 1), pts);
    }
    ctx.plot("spectrum.svg", plot, &mut written)?;
    Ok(written)
}

pub fn chi(ctx: &Context) -> Result<Vec<PathBuf>> {
    ctx.prepare()?;
    let model = ctx.cfg.model()?;
    let mut grid = ctx.cfg.chi.flux.values();
    grid.sort_by(f64::total_cmp);
    let scan: Vec<_> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &phi)| Ok(model.scan(&[phi]).map_err(at_grid_point(i))?.remove(0)))
        .collect::<Result<_>>()?;

    // rows within the guard, plus the row nearest each crossing of the range
    let mut flagged: Vec<bool> = scan.iter().map(|s| s.divergence.is_some()).collect();
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if hi > lo {
        for c in model.divergences((lo, hi))? {
            let phi = c.flux.phi();
            if let Some(i) = (0..grid.len())
                .min_by(|a, b| (grid[*a] - phi).abs().total_cmp(&(grid[*b] - phi).abs()))
            {
                flagged[i] = true;
            }
        }
    }

    let mut t = Table::new([
        "flux",
        "chi_hz",
        "omega_r0_hz",
        "omega_r1_hz",
        "divergence_flag",
    ]);
    let mut chi_mhz = vec![];
    for ((phi, s), flag) in grid.iter().zip(&scan).zip(&flagged) {
        let (c, r0, r1) = s.point.map_or((f64::NAN, f64::NAN, f64::NAN), |p| {
            (to_hz(p.chi), to_hz(p.omega_r0), to_hz(p.omega_r1))
        });
        chi_mhz.push((*phi, c * 1e-6));
        t.push(vec![
            fmt_f64(*phi),
            fmt_f64(c),
            fmt_f64(r0),
            fmt_f64(r1),
            u8::from(*flag).to_string(),
        ]);
    }
    let path = ctx.path("chi.csv");
    t.write(&path)?;
    let mut written = vec![path];

    let mut plot = Plot::new("Dispersive shift", "flux (Φ0)", "χ/2π (MHz)").series("χ", chi_mhz);
    plot.y_range = Some((-10.0, 10.0));
    ctx.plot("chi.svg", plot, &mut written)?;
    Ok(written)
}

fn traversal(c: Crossing) -> Traversal {
    match c {
        Crossing::Reject => Traversal::Reject,
        Crossing::StepOver => Traversal::StepOver,
    }
}

/// Drive tone: configured, or midway between the pointer frequencies at the base flux.
fn readout_frequency(cfg: &Config, model: &DispersiveModel) -> Result<f64> {
    match cfg.readout.readout_frequency_hz {
        Some(f) => Ok(hz(f)),
        None => {
            let p = model.point(flux(cfg.readout.base_flux)?)?;
            Ok(0.5 * (p.omega_r0 + p.omega_r1))
        }
    }
}

fn trajectory(
    cfg: &Config,
    model: &DispersiveModel,
    delta: f64,
    n_bar: f64,
    duration: f64,
) -> Result<CavityTrajectory> {
    let r = &cfg.readout;
    let pulse = make_flux_pulse(
        flux(r.base_flux)?,
        delta,
        r.rise_time_s,
        f64::INFINITY,
        r.dt_s,
    )?;
    let hold = model.point(pulse.target_flux())?;
    let drive = DriveSpec::for_photons(
        readout_frequency(cfg, model)?,
        n_bar,
        hold.omega_r0,
        hold.omega_r1,
        model.params().kappa,
    )?
    .with_delay(r.drive_delay_s);
    Ok(integrate_cavity_with(
        model,
        &pulse,
        &drive,
        duration,
        r.dt_s,
        traversal(r.crossing),
    )?)
}

fn sample_parallel(
    traj: &CavityTrajectory,
    noise: NoiseModel,
    tau: f64,
    n: usize,
    seed: u64,
) -> Result<ShotSet> {
    let sampler = ShotSampler::new(traj, noise, tau, seed)?;
    let chunks: Vec<_> = (0..ShotSampler::n_chunks(n))
        .into_par_iter()
        .map(|c| sampler.chunk(c, n))
        .collect();
    Ok(sampler.assemble(chunks))
}

fn assignment(
    traj: &CavityTrajectory,
    noise: NoiseModel,
    tau: f64,
    n: usize,
    seed: u64,
) -> Result<(f64, ShotSet)> {
    let shots = sample_parallel(traj, noise, tau, n, seed)?;
    let fit = fit_gaussians(&shots)?;
    Ok((assignment_error(&shots, &fit).error, shots))
}

pub fn readout(ctx: &Context) -> Result<Vec<PathBuf>> {
    ctx.prepare()?;
    let cfg = &ctx.cfg;
    let r = &cfg.readout;
    let model = cfg.model()?;
    let taus = r.tau_sim();
    let duration = taus[taus.len() - 1];
    let n_shots = cfg.shots.n_shots;
    let dump_sim = cfg.shots.dump_tau_s - r.acquisition_offset_s;
    let dump_row = (0..taus.len())
        .min_by(|a, b| {
            (taus[*a] - dump_sim)
                .abs()
                .total_cmp(&(taus[*b] - dump_sim).abs())
        })
        .unwrap();

    let mut cases = vec![("fpa", r.delta_flux, cfg.noise.t1_s)];
    if r.sweet_spot_comparison {
        cases.push(("ss", 0.0, cfg.noise.t1_sweet_spot_s));
    }
    let mut written = vec![];
    let mut plot = Plot::new("Readout error", "τ (ns)", "error");
    plot.log_y = true;
    for (name, delta, t1) in cases {
        let traj = trajectory(cfg, &model, delta, r.n_bar, duration)?;
        let curve = snr_vs_time(&traj, r.eta_eff(), &taus)?.offset(r.acquisition_offset_s);
        let noise = cfg.noise.model(t1, r.eta_eff());
        let assigned: Vec<(f64, ShotSet)> = if n_shots > 0 {
            taus.iter()
                .enumerate()
                .map(|(i, &tau)| {
                    assignment(
                        &traj,
                        noise,
                        tau,
                        n_shots,
                        cfg.shots.seed.wrapping_add(i as u64),
                    )
                })
                .collect::<Result<_>>()?
        } else {
            vec![]
        };

        let mut header = vec!["tau", "snr", "err_snr_limited"];
        if n_shots > 0 {
            header.push("err_assignment");
        }
        let mut t = Table::new(header);
        for i in 0..taus.len() {
            let mut row = vec![
                fmt_f64(curve.tau[i]),
                fmt_f64(curve.snr[i]),
                fmt_f64(curve.err_snr_limited[i]),
            ];
            if let Some((e, _)) = assigned.get(i) {
                row.push(fmt_f64(*e));
            }
            t.push(row);
        }
        let path = ctx.path(&format!("readout_{name}.csv"));
        t.write(&path)?;
        written.push(path);
        if let Some((_, shots)) = assigned.get(dump_row) {
            let path = ctx.path(&format!("shots_{name}.csv"));
            write_shots(&path, shots)?;
            written.push(path);
        }

        let ns: Vec<f64> = curve.tau.iter().map(|t| t * 1e9).collect();
        let label = name.to_uppercase();
        plot = plot.series(
            format!("{label} SNR-limited"),
            ns.iter()
                .copied()
                .zip(curve.err_snr_limited.iter().copied())
                .collect(),
        );
        if !assigned.is_empty() {
            plot = plot.series(
                format!("{label} assignment"),
                ns.iter()
                    .copied()
                    .zip(assigned.iter().map(|a| a.0))
                    .collect(),
            );
        }
        match curve.err_snr_limited.iter().position(|e| *e <= 1e-3) {
            Some(i) => println!(
                "{name}: err_snr_limited <= 1e-3 from tau = {} ns",
                fmt_f64(ns[i])
            ),
            None => println!(
                "{name}: err_snr_limited = {} at tau = {} ns",
                fmt_f64(curve.err_snr_limited[taus.len() - 1]),
                fmt_f64(ns[taus.len() - 1])
            ),
        }
    }
    ctx.plot("readout.svg", plot, &mut written)?;
    Ok(written)
}

struct Cell {
    delta: f64,
    n_bar: f64,
    err_snr: f64,
    err_assignment: f64,
    divergent: bool,
}

pub fn sweep(ctx: &Context) -> Result<Vec<PathBuf>> {
    ctx.prepare()?;
    let cfg = &ctx.cfg;
    let r = &cfg.readout;
    let model = cfg.model()?;
    let tau = cfg.sweep.tau_s - r.acquisition_offset_s;
    let n_shots = cfg.shots.n_shots;
    let deltas = cfg.sweep.delta_flux.values();
    let n_bars = cfg.sweep.n_bar.values();
    let grid: Vec<(f64, f64)> = deltas
        .iter()
        .flat_map(|d| n_bars.iter().map(move |n| (*d, *n)))
        .collect();

    let cells: Vec<Cell> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &(delta, n_bar))| {
            let blank = Cell {
                delta,
                n_bar,
                err_snr: f64::NAN,
                err_assignment: f64::NAN,
                divergent: true,
            };
            let traj = match trajectory(cfg, &model, delta, n_bar, tau) {
                Err(CliError::Compute(Error::Divergence { .. })) => return Ok(blank),
                other => other.map_err(|e| match e {
                    CliError::Compute(e) => CliError::Compute(at_grid_point(i)(e)),
                    e => e,
                })?,
            };
            let snr = snr_vs_time(&traj, r.eta_eff(), &[tau])?.snr[0];
            let err_assignment = if n_shots > 0 {
                let noise = cfg.noise.model(cfg.noise.t1_s, r.eta_eff());
                assignment(
                    &traj,
                    noise,
                    tau,
                    n_shots,
                    cfg.shots.seed.wrapping_add(i as u64),
                )?
                .0
            } else {
                f64::NAN
            };
            Ok(Cell {
                err_snr: snr_limited_error(snr)?,
                err_assignment,
                divergent: false,
                ..blank
            })
        })
        .collect::<Result<_>>()?;

    let mut header = vec!["delta_flux", "n_bar", "err_snr_limited"];
    if n_shots > 0 {
        header.push("err_assignment");
    }
    header.push("divergence_flag");
    let mut t = Table::new(header);
    for c in &cells {
        let mut row = vec![fmt_f64(c.delta), fmt_f64(c.n_bar), fmt_f64(c.err_snr)];
        if n_shots > 0 {
            row.push(fmt_f64(c.err_assignment));
        }
        row.push(u8::from(c.divergent).to_string());
        t.push(row);
    }
    let path = ctx.path("sweep.csv");
    t.write(&path)?;
    let mut written = vec![path];

    let score = |c: &Cell| {
        if n_shots > 0 {
            c.err_assignment
        } else {
            c.err_snr
        }
    };
    match cells
        .iter()
        .filter(|c| score(c).is_finite())
        .min_by(|a, b| score(a).total_cmp(&score(b)))
    {
        Some(c) => println!(
            "argmin: delta_flux = {}, n_bar = {}, error = {}",
            fmt_f64(c.delta),
            fmt_f64(c.n_bar),
            fmt_f64(score(c))
        ),
        None => println!("argmin: every cell hit a divergence"),
    }

    let mut plot = Plot::new("Sweep", "Δflux (Φ0)", "error");
    plot.log_y = true;
    for (j, n) in n_bars.iter().enumerate() {
        let pts = (0..deltas.len())
            .map(|i| (deltas[i], score(&cells[i * n_bars.len() + j])))
            .collect();
        plot = plot.series(format!("n = {}", fmt_f64(*n)), pts);
    }
    ctx.plot("sweep.svg", plot, &mut written)?;
    Ok(written)
}

/// Keys mirror docs/calibration_report.schema.json.
#[derive(Debug, Serialize)]
pub struct CalibrationReport {
    pub a: f64,
    pub sigma_v: f64,
    pub eta: f64,
    pub n_bar_total: f64,
    pub n_bar_active: f64,
    /// rad/s
    pub kappa: f64,
}

#[derive(Debug, Default)]
pub struct CalibrationInputs {
    pub snr: Option<PathBuf>,
    pub coherence: Option<PathBuf>,
    pub ramsey: Option<PathBuf>,
    pub linewidth: Option<PathBuf>,
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| {
        CliError::Config(format!(
            "calibrate needs {what} (flag or [calibration] key)"
        ))
    })
}

pub fn calibrate(ctx: &Context, inputs: &CalibrationInputs) -> Result<Vec<PathBuf>> {
    let c = &ctx.cfg.calibration;
    let pick = |flag: &Option<PathBuf>, key: &Option<PathBuf>| flag.clone().or_else(|| key.clone());
    let snr_path = pick(&inputs.snr, &c.snr_csv);
    let coh_path = pick(&inputs.coherence, &c.coherence_csv);
    let ramsey_path = pick(&inputs.ramsey, &c.ramsey_csv);
    let lw_path = pick(&inputs.linewidth, &c.linewidth_csv);

    // read everything before fitting so missing inputs fail fast
    let snr = read_xy(required(&snr_path, "an SNR csv")?)?;
    let coh = read_xy(required(&coh_path, "a coherence csv")?)?;
    let ramsey = ramsey_path.as_deref().map(read_xy).transpose()?;
    let lw = lw_path.as_deref().map(read_xy).transpose()?;

    let a = fit_snr_slope(&snr.0, &snr.1)?;
    let sigma_v = fit_coherence_gaussian(&coh.0, &coh.1)?.sigma_v;
    let eff = efficiency(a, sigma_v);
    if !eff.is_physical() {
        eprintln!("warning: eta = {} is outside (0, 1]", fmt_f64(eff.eta));
    }
    let kappa = match &lw {
        Some((f, m)) => 2.0 * std::f64::consts::PI * fit_linewidth(f, m)?.kappa,
        None => ctx.cfg.device.params().kappa,
    };
    let photons = photons_from_dac(
        c.amplitude_v,
        kappa,
        hz(c.chi_hz),
        sigma_v,
        c.tau_total_s,
        c.tau_pulse_s,
    )?;
    if let Some((phase, z)) = &ramsey {
        let fit = fit_ramsey(phase, z)?;
        println!(
            "ramsey: |rho01| = {}, phi0 = {}",
            fmt_f64(fit.coherence()),
            fmt_f64(fit.phi0)
        );
    }

    let report = CalibrationReport {
        a,
        sigma_v,
        eta: eff.eta,
        n_bar_total: photons.n_bar_total,
        n_bar_active: photons.n_bar_active,
        kappa,
    };
    ctx.prepare()?;
    let path = ctx.path("calibration_report.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_text(&path, &(json + "\n"))?;
    println!(
        "eta = {}, n_bar_total = {}, n_bar_active = {}",
        fmt_f64(report.eta),
        fmt_f64(report.n_bar_total),
        fmt_f64(report.n_bar_active)
    );
    Ok(vec![path])
}
