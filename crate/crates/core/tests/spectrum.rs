//! Spectrum checks against an independent finite-difference solver on a
//! phase grid, plus the symmetry properties of the fluxonium spectrum.

use fluxread_core::fluxonium::diagonalize;
use fluxread_core::units::{ghz, to_hz};
use fluxread_core::{FluxBias, FluxoniumParams, FluxoniumSolver};
use proptest::prelude::*;

mod common;
use common::PhaseGrid;

struct Oracle {
    transitions: Vec<f64>,
    n01: f64,
    n02: f64,
}

fn oracle_at(points: usize, flux: f64, levels: usize) -> Oracle {
    let grid = PhaseGrid::device(points, flux);
    let e: Vec<f64> = (0..levels).map(|k| grid.eigenvalue(k)).collect();
    let v: Vec<Vec<f64>> = e.iter().take(3).map(|l| grid.eigenvector(*l)).collect();
    Oracle {
        transitions: e[1..].iter().map(|x| x - e[0]).collect(),
        n01: grid.charge(&v[0], &v[1]),
        n02: grid.charge(&v[0], &v[2]),
    }
}

/// Richardson extrapolation of the O(h²) grid error from 4001 and 8001 points.
fn oracle(flux: f64) -> Oracle {
    let coarse = oracle_at(4001, flux, 7);
    let fine = oracle_at(8001, flux, 7);
    let rich = |c: f64, f: f64| (4.0 * f - c) / 3.0;
    Oracle {
        transitions: coarse
            .transitions
            .iter()
            .zip(&fine.transitions)
            .map(|(c, f)| rich(*c, *f))
            .collect(),
        n01: rich(coarse.n01, fine.n01),
        n02: rich(coarse.n02, fine.n02),
    }
}

fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(floor)
}

#[test]
fn transitions_and_charge_elements_match_phase_grid() {
    let params = FluxoniumParams::paper_device();
    for k in 0..11 {
        let flux = 0.4 + 0.035 * k as f64;
        let spec = diagonalize(&params, FluxBias::new(flux).unwrap(), 120, 12).unwrap();
        let o = oracle(flux);
        for j in 1..=6 {
            let ours = to_hz(spec.transition_frequency(0, j).unwrap()) / 1e9;
            let theirs = o.transitions[j - 1];
            assert!(
                close(ours, theirs, 1e-4, 0.0),
                "flux {flux}: w0{j} {ours} vs {theirs}"
            );
        }
        let n01 = spec.charge_element(0, 1).unwrap();
        let n02 = spec.charge_element(0, 2).unwrap();
        assert!(
            close(n01, o.n01, 1e-4, 1e-2),
            "flux {flux}: n01 {n01} vs {}",
            o.n01
        );
        assert!(
            close(n02, o.n02, 1e-4, 1e-2),
            "flux {flux}: n02 {n02} vs {}",
            o.n02
        );
    }
}

#[test]
fn sweet_spot_selection_rule_in_both_solvers() {
    let spec = diagonalize(
        &FluxoniumParams::paper_device(),
        FluxBias::SWEET_SPOT,
        120,
        12,
    )
    .unwrap();
    assert!(spec.charge_element(0, 2).unwrap() < 1e-6);
    assert!(oracle(0.5).n02 < 1e-6);
}

#[test]
fn qubit_frequency_rises_towards_readout_point() {
    let params = FluxoniumParams::paper_device();
    let solver = FluxoniumSolver::with_defaults(params).unwrap();
    let grid: Vec<f64> = (0..=80).map(|k| 0.5 + 0.16 * k as f64 / 80.0).collect();
    let w01: Vec<f64> = solver
        .spectrum_vs_flux(&grid, 4)
        .unwrap()
        .iter()
        .map(|s| s.transition_frequency(0, 1).unwrap())
        .collect();
    assert!(w01.windows(2).all(|p| p[1] > p[0]));
    for &k in &[0usize, 40, 80] {
        let o = oracle(grid[k]);
        assert!(close(to_hz(w01[k]) / 1e9, o.transitions[0], 1e-4, 0.0));
    }
}

#[test]
fn single_point_grid_matches_diagonalize() {
    let params = FluxoniumParams::paper_device();
    let solver = FluxoniumSolver::with_defaults(params).unwrap();
    let one = solver.spectrum_vs_flux(&[0.5], 12).unwrap();
    let direct = diagonalize(&params, FluxBias::SWEET_SPOT, 120, 12).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].energies, direct.energies);
}

#[test]
fn zero_two_transition_meets_resonator_near_seventy() {
    let params = FluxoniumParams::paper_device();
    let solver = FluxoniumSolver::with_defaults(params).unwrap();
    let w02 =
        |f: f64| solver.energies(FluxBias::new(f).unwrap(), 4).unwrap()[2] - params.omega_r_bare;
    assert!(w02(0.69) < 0.0 && w02(0.71) > 0.0);
    assert!(ghz(5.175) == params.omega_r_bare);
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .skip(1)
        .map(|(x, y)| (x - y).abs() / y.abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn periodic_in_flux(phi in -2.0f64..2.0) {
        let solver = FluxoniumSolver::with_defaults(FluxoniumParams::paper_device()).unwrap();
        let a = solver.energies(FluxBias::new(phi).unwrap(), 12).unwrap();
        let b = solver.energies(FluxBias::new(phi + 1.0).unwrap(), 12).unwrap();
        prop_assert!(rel_diff(&a, &b) < 1e-9);
    }

    #[test]
    fn reflection_about_sweet_spot(delta in 0.0f64..0.5) {
        let solver = FluxoniumSolver::with_defaults(FluxoniumParams::paper_device()).unwrap();
        let a = solver.energies(FluxBias::new(0.5 + delta).unwrap(), 12).unwrap();
        let b = solver.energies(FluxBias::new(0.5 - delta).unwrap(), 12).unwrap();
        prop_assert!(rel_diff(&a, &b) < 1e-9);
    }

    #[test]
    fn default_basis_is_converged(phi in 0.0f64..1.0) {
        let params = FluxoniumParams::paper_device();
        let small = FluxoniumSolver::new(params, 120).unwrap().without_convergence_check();
        let large = FluxoniumSolver::new(params, 150).unwrap().without_convergence_check();
        let flux = FluxBias::new(phi).unwrap();
        let a = small.energies(flux, 12).unwrap();
        let b = large.energies(flux, 12).unwrap();
        prop_assert!(rel_diff(&a, &b) < 1e-8, "{}", rel_diff(&a, &b));
    }

    #[test]
    fn sweet_spot_parity_selection(ej in 2.0f64..6.0, ec in 0.5f64..1.5, el in 0.4f64..1.5) {
        let params = FluxoniumParams {
            e_j: ghz(ej),
            e_c: ghz(ec),
            e_l: ghz(el),
            ..FluxoniumParams::paper_device()
        };
        let spec = diagonalize(&params, FluxBias::SWEET_SPOT, 120, 8).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                if spec.parity[i] * spec.parity[j] > 0.0 {
                    prop_assert!(spec.charge_element(i, j).unwrap() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn charge_elements_symmetric(phi in 0.0f64..1.0) {
        let spec = diagonalize(&FluxoniumParams::paper_device(), FluxBias::new(phi).unwrap(), 120, 12).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                prop_assert_eq!(spec.charge_element(i, j).unwrap(), spec.charge_element(j, i).unwrap());
            }
        }
    }
}
