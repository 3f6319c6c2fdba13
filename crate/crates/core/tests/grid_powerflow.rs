use gridpinn_core::grid::{build_ybus, parse_case, parse_cdf, write_case, Branch, Bus, BusKind, GridCase};
use gridpinn_core::powerflow::{injections, scheduled_injections, solve_nr, NewtonSystem, StateVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

const IEEE14: &str = include_str!("../fixtures/ieee14.case");
const IEEE14_CDF: &str = include_str!("../fixtures/ieee14.cdf");
const IEEE118: &str = include_str!("../fixtures/ieee118.case");

#[test]
fn ieee14_counts() {
    let case = parse_case(IEEE14).unwrap();
    assert_eq!(case.n_buses(), 14);
    assert_eq!(case.branches.len(), 20);
    assert_eq!(case.base_mva, 100.0);
    assert_eq!(case.slack_index(), 0);
}

#[test]
fn ieee118_counts() {
    let case = parse_case(IEEE118).unwrap();
    assert_eq!(case.n_buses(), 118);
    assert_eq!(case.branches.len(), 186);
    assert_eq!(case.bus(69).unwrap().kind, BusKind::Slack);
    assert_eq!(case.bus(26).unwrap().gen_p, 314.0);
}

#[test]
fn cdf_import_matches_native_fixture() {
    let native = parse_case(IEEE14).unwrap();
    let cdf = parse_cdf(IEEE14_CDF).unwrap();
    assert_eq!(cdf.base_mva, native.base_mva);
    assert_eq!(cdf.buses, native.buses);
    assert_eq!(cdf.branches, native.branches);
}

#[test]
fn native_serialisation_round_trips_fixtures() {
    for text in [IEEE14, IEEE118] {
        let case = parse_case(text).unwrap();
        assert_eq!(parse_case(&write_case(&case)).unwrap(), case);
    }
}

#[test]
fn ybus_pattern_matches_branch_adjacency() {
    let case = parse_case(IEEE14).unwrap();
    let y = build_ybus(&case).unwrap();
    let adjacent: HashSet<(usize, usize)> = case
        .branches
        .iter()
        .flat_map(|b| [(b.from_bus - 1, b.to_bus - 1), (b.to_bus - 1, b.from_bus - 1)])
        .collect();
    for i in 0..14 {
        for j in 0..14 {
            let nonzero = y.get(i, j).norm() > 0.0;
            if i == j {
                assert!(nonzero);
            } else {
                assert_eq!(nonzero, adjacent.contains(&(i, j)), "entry ({i},{j})");
                assert_eq!(y.is_structural(i, j), adjacent.contains(&(i, j)));
            }
        }
    }
}

#[test]
fn ybus_symmetric_without_taps() {
    let mut case = parse_case(IEEE118).unwrap();
    for b in &mut case.branches {
        b.tap = 1.0;
    }
    let y = build_ybus(&case).unwrap();
    assert_eq!(y, y.transpose());
}

#[test]
fn ybus_diagonal_is_shunt_plus_branch_sum() {
    let case = parse_case(IEEE14).unwrap();
    let y = build_ybus(&case).unwrap();
    // bus 9: shunt 0.19j, tapped from-side of 4-9 ends at 9 (to side), lines 7-9, 9-10, 9-14
    let mut expect = num_complex::Complex64::new(0.0, 0.19);
    for b in case.branches.iter().filter(|b| b.from_bus == 9 || b.to_bus == 9) {
        let ys = num_complex::Complex64::new(b.r, b.x).inv();
        let ych = num_complex::Complex64::new(0.0, b.b_charging / 2.0);
        expect += if b.from_bus == 9 { (ys + ych) / (b.tap * b.tap) } else { ys + ych };
    }
    assert!((y.get(8, 8) - expect).norm() < 1e-12);
}

proptest! {
    #[test]
    fn impedance_scaling_scales_off_diagonals(s in 0.1f64..10.0) {
        let mut case = parse_case(IEEE14).unwrap();
        for b in &mut case.buses { b.shunt_b = 0.0; b.shunt_g = 0.0; }
        for b in &mut case.branches { b.b_charging = 0.0; }
        let y = build_ybus(&case).unwrap();
        let mut scaled = case.clone();
        for b in &mut scaled.branches { b.r *= s; b.x *= s; }
        let ys = build_ybus(&scaled).unwrap();
        for i in 0..14 {
            for j in 0..14 {
                if i != j {
                    let d = (ys.get(i, j) - y.get(i, j) / s).norm();
                    prop_assert!(d <= 1e-12 * (1.0 + y.get(i, j).norm()));
                }
            }
        }
    }
}

fn ieee14_solution() -> (GridCase, gridpinn_core::powerflow::PowerFlowSolution) {
    let case = parse_case(IEEE14).unwrap();
    let sol = solve_nr(&case, 1e-8, 10).unwrap();
    (case, sol)
}

#[test]
fn ieee14_converges_from_flat_start() {
    let (case, sol) = ieee14_solution();
    assert!(sol.converged);
    assert!(sol.iterations <= 10);
    assert!(sol.max_mismatch < 1e-8);
    // published solution (degrees): bus 2 -4.98, bus 14 -16.03; |V14| 1.036
    assert!((sol.state.va[1].to_degrees() + 4.98).abs() < 0.01);
    assert!((sol.state.va[13].to_degrees() + 16.03).abs() < 0.01);
    assert!((sol.state.vm[13] - 1.036).abs() < 1e-3);
    let y = build_ybus(&case).unwrap();
    let inj = injections(&sol.state, &y).unwrap();
    let sched = scheduled_injections(&case);
    for (i, b) in case.buses.iter().enumerate() {
        if b.kind != BusKind::Slack {
            assert!((inj.p[i] - sched.p[i]).abs() < 1e-8);
        }
        if b.kind == BusKind::PQ {
            assert!((inj.q[i] - sched.q[i]).abs() < 1e-8);
        } else {
            assert_eq!(sol.state.vm[i], b.voltage_setpoint);
        }
    }
    assert_eq!(sol.state.va[0], 0.0);
}

#[test]
fn power_balance_losses_non_negative() {
    for text in [IEEE14, IEEE118] {
        let case = parse_case(text).unwrap();
        let sol = solve_nr(&case, 1e-10, 20).unwrap();
        assert!(sol.converged);
        let y = build_ybus(&case).unwrap();
        let inj = injections(&sol.state, &y).unwrap();
        let base = case.base_mva;
        let slack = case.slack_index();
        let total_gen: f64 = case
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| if i == slack { inj.p[i] + b.load_p / base } else { b.gen_p / base })
            .sum();
        let total_load: f64 = case.buses.iter().map(|b| b.load_p / base).sum();
        let losses: f64 = inj.p.iter().sum();
        assert!((total_gen - total_load - losses).abs() < 1e-8);
        assert!(losses >= -1e-8);
    }
}

#[test]
fn ieee118_converges() {
    let case = parse_case(IEEE118).unwrap();
    let sol = solve_nr(&case, 1e-8, 10).unwrap();
    assert!(sol.converged, "mismatch {}", sol.max_mismatch);
}

#[test]
fn solver_is_deterministic() {
    let (_, a) = ieee14_solution();
    let (_, b) = ieee14_solution();
    assert_eq!(a.state.vm.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
               b.state.vm.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.state.va.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
               b.state.va.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn jacobian_matches_central_differences() {
    let (case, sol) = ieee14_solution();
    let y = build_ybus(&case).unwrap();
    let sys = NewtonSystem::new(&case, &y);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-6;
    for _ in 0..5 {
        let mut state = sol.state.clone();
        for i in 1..14 {
            state.va[i] += rng.gen_range(-0.05..0.05);
            state.vm[i] += rng.gen_range(-0.03..0.03);
        }
        let jac = sys.jacobian(&state);
        let m = sys.n_unknowns();
        for col in 0..m {
            let mut dx = vec![0.0; m];
            dx[col] = h;
            let mut plus = state.clone();
            sys.apply(&mut plus, &dx);
            dx[col] = -h;
            let mut minus = state.clone();
            sys.apply(&mut minus, &dx);
            let fp = sys.mismatch(&plus);
            let fm = sys.mismatch(&minus);
            for row in 0..m {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let an = jac.get(row, col);
                let scale = an.abs().max(fd.abs()).max(1.0);
                assert!((fd - an).abs() / scale < 1e-6, "J[{row},{col}] {an} vs {fd}");
            }
        }
    }
}

/// Brute-force oracle: repeatedly grid-search the mismatch of the 2-bus
/// system over (|V2|, θ2) and zoom in around the best cell.
fn brute_force_two_bus(p_load: f64) -> (f64, f64) {
    let mismatch = |vm: f64, va: f64| {
        // slack 1∠0, line x = 0.1: P2 = 10 vm sin(va), Q2 = 10 vm² - 10 vm cos(va)
        let p = 10.0 * vm * va.sin();
        let q = 10.0 * vm * vm - 10.0 * vm * va.cos();
        (p + p_load).abs().max(q.abs())
    };
    let (mut cv, mut ca, mut span_v, mut span_a) = (1.0, 0.0, 0.5, 0.5);
    for _ in 0..80 {
        let mut best = (f64::INFINITY, cv, ca);
        for i in -20..=20 {
            for k in -20..=20 {
                let vm = cv + span_v * i as f64 / 20.0;
                let va = ca + span_a * k as f64 / 20.0;
                let m = mismatch(vm, va);
                if m < best.0 {
                    best = (m, vm, va);
                }
            }
        }
        cv = best.1;
        ca = best.2;
        span_v *= 0.6;
        span_a *= 0.6;
    }
    (cv, ca)
}

#[test]
fn two_bus_matches_brute_force_oracle() {
    let mut load = Bus::new(2, BusKind::PQ);
    load.load_p = 10.0; // 0.1 p.u.
    let case = GridCase {
        name: "two".into(),
        base_mva: 100.0,
        buses: vec![Bus::new(1, BusKind::Slack), load],
        branches: vec![Branch::line(1, 2, 0.0, 0.1)],
    };
    let sol = solve_nr(&case, 1e-12, 20).unwrap();
    assert!(sol.converged);
    let (vm, va) = brute_force_two_bus(0.1);
    assert!((sol.state.vm[1] - vm).abs() < 1e-9, "{} vs {vm}", sol.state.vm[1]);
    assert!((sol.state.va[1] - va).abs() < 1e-9, "{} vs {va}", sol.state.va[1]);
    let y = build_ybus(&case).unwrap();
    let inj = injections(&sol.state, &y).unwrap();
    assert!((inj.p[1] + 0.1).abs() < 1e-10);
    assert!(inj.q[1].abs() < 1e-10);
}

#[test]
fn flat_state_is_consistent_with_setpoints() {
    let case = parse_case(IEEE14).unwrap();
    let flat = StateVector::flat(&case);
    assert_eq!(flat.vm[0], 1.06);
    assert_eq!(flat.vm[3], 1.0);
    assert!(flat.va.iter().all(|a| *a == 0.0));
}
