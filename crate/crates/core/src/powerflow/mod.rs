//! AC power flow: bus injections and a polar Newton-Raphson solver.
//!
//! All quantities are per unit on the case base; angles are radians. Reactive
//! limits of generators are not enforced, so PV buses never switch to PQ.

mod newton;
mod operating;

pub use newton::NewtonSystem;
pub use operating::{apply_operating_point, equal_load_increase, proportional_load_increase, Adjustment};

use crate::error::{Error, Result};
use crate::grid::{build_ybus, AdmittanceMatrix, BusKind, GridCase};
use serde::{Deserialize, Serialize};

/// Per-bus voltage magnitude (p.u.) and angle (rad).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub vm: Vec<f64>,
    pub va: Vec<f64>,
}

impl StateVector {
    /// Flat start: setpoint magnitude at PV/slack buses, 1.0 elsewhere, zero angles.
    pub fn flat(case: &GridCase) -> Self {
        let vm = case
            .buses
            .iter()
            .map(|b| match b.kind {
                BusKind::PQ => 1.0,
                _ => b.voltage_setpoint,
            })
            .collect();
        Self {
            vm,
            va: vec![0.0; case.n_buses()],
        }
    }

    pub fn len(&self) -> usize {
        self.vm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vm.is_empty()
    }
}

/// Net active and reactive injections per bus, p.u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injections {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    pub state: StateVector,
    pub iterations: usize,
    /// Infinity norm of the final power mismatch, p.u.
    pub max_mismatch: f64,
    pub converged: bool,
}

/// Evaluates
/// `P_i = V_i Σ_j V_j (G_ij cos θ_ij + B_ij sin θ_ij)` and
/// `Q_i = V_i Σ_j V_j (G_ij sin θ_ij − B_ij cos θ_ij)`.
pub fn injections(state: &StateVector, y: &AdmittanceMatrix) -> Result<Injections> {
    let n = y.dim();
    if state.vm.len() != n || state.va.len() != n {
        return Err(Error::contract(format!(
            "state has {} / {} entries, admittance matrix is {n}x{n}",
            state.vm.len(),
            state.va.len()
        )));
    }
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let (mut sp, mut sq) = (0.0, 0.0);
        for j in 0..n {
            let yij = y.get(i, j);
            if yij.re == 0.0 && yij.im == 0.0 {
                continue;
            }
            let (s, c) = (state.va[i] - state.va[j]).sin_cos();
            sp += state.vm[j] * (yij.re * c + yij.im * s);
            sq += state.vm[j] * (yij.re * s - yij.im * c);
        }
        p[i] = state.vm[i] * sp;
        q[i] = state.vm[i] * sq;
    }
    Ok(Injections { p, q })
}

/// Scheduled net injections, p.u. Entries for quantities the solver does not
/// fix (slack P/Q, PV Q) hold generation minus load with zero reactive
/// generation and are informational only.
pub fn scheduled_injections(case: &GridCase) -> Injections {
    let base = case.base_mva;
    Injections {
        p: case.buses.iter().map(|b| (b.gen_p - b.load_p) / base).collect(),
        q: case.buses.iter().map(|b| -b.load_q / base).collect(),
    }
}

/// Newton-Raphson power flow from a flat start.
pub fn solve_nr(case: &GridCase, tol: f64, max_iter: usize) -> Result<PowerFlowSolution> {
    let y = build_ybus(case)?;
    solve_nr_with(case, &y, tol, max_iter)
}

/// As [`solve_nr`] with a prebuilt admittance matrix for `case`.
pub fn solve_nr_with(
    case: &GridCase,
    y: &AdmittanceMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<PowerFlowSolution> {
    if !(tol > 0.0) {
        return Err(Error::contract(format!("tolerance must be positive, got {tol}")));
    }
    if y.dim() != case.n_buses() {
        return Err(Error::contract("admittance matrix does not match case"));
    }
    let system = NewtonSystem::new(case, y);
    let mut state = StateVector::flat(case);
    let mut iterations = 0;
    loop {
        let f = system.mismatch(&state);
        let max_mismatch = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_mismatch < tol {
            return Ok(PowerFlowSolution {
                state,
                iterations,
                max_mismatch,
                converged: true,
            });
        }
        if iterations >= max_iter || !max_mismatch.is_finite() {
            return Ok(PowerFlowSolution {
                state,
                iterations,
                max_mismatch,
                converged: false,
            });
        }
        iterations += 1;
        system.newton_step(&mut state, &f, iterations)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{parse_case, Branch, Bus};
    use num_complex::Complex64;

    fn two_bus_y() -> AdmittanceMatrix {
        AdmittanceMatrix::from_dense(
            2,
            vec![
                Complex64::new(0.0, -10.0),
                Complex64::new(0.0, 10.0),
                Complex64::new(0.0, 10.0),
                Complex64::new(0.0, -10.0),
            ],
        )
    }

    #[test]
    fn flat_state_on_lossless_line_has_no_injection() {
        let s = StateVector {
            vm: vec![1.0, 1.0],
            va: vec![0.0, 0.0],
        };
        let inj = injections(&s, &two_bus_y()).unwrap();
        for v in inj.p.iter().chain(&inj.q) {
            assert!(v.abs() < 1e-15);
        }
    }

    #[test]
    fn angle_difference_drives_active_power() {
        let s = StateVector {
            vm: vec![1.0, 1.0],
            va: vec![0.1, 0.0],
        };
        let inj = injections(&s, &two_bus_y()).unwrap();
        let expect = 10.0 * 0.1f64.sin();
        assert!((inj.p[0] - expect).abs() < 1e-14);
        assert!((inj.p[1] + expect).abs() < 1e-14);
        assert!((expect - 0.9983341664682815).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix_gives_zero_injections() {
        let y = AdmittanceMatrix::zeros(3);
        let s = StateVector {
            vm: vec![1.1, 0.9, 1.0],
            va: vec![0.3, -0.2, 0.1],
        };
        let inj = injections(&s, &y).unwrap();
        assert!(inj.p.iter().chain(&inj.q).all(|v| *v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_contract_error() {
        let s = StateVector {
            vm: vec![1.0],
            va: vec![0.0],
        };
        assert!(matches!(injections(&s, &two_bus_y()), Err(Error::Contract(_))));
    }

    #[test]
    fn injections_match_complex_power() {
        let case = parse_case(include_str!("../../fixtures/ieee14.case")).unwrap();
        let y = build_ybus(&case).unwrap();
        let n = case.n_buses();
        let s = StateVector {
            vm: (0..n).map(|i| 1.0 + 0.01 * (i as f64).sin()).collect(),
            va: (0..n).map(|i| -0.02 * i as f64).collect(),
        };
        let v: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(s.vm[i], s.va[i])).collect();
        let current = y.mul_vec(&v);
        let inj = injections(&s, &y).unwrap();
        for i in 0..n {
            let sc = v[i] * current[i].conj();
            assert!((sc.re - inj.p[i]).abs() < 1e-12);
            assert!((sc.im - inj.q[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_slack_bus_needs_no_iterations() {
        let mut slack = Bus::new(1, BusKind::Slack);
        slack.voltage_setpoint = 1.03;
        let case = GridCase {
            name: "one".into(),
            base_mva: 100.0,
            buses: vec![slack],
            branches: vec![],
        };
        let sol = solve_nr(&case, 1e-10, 10).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.state.vm, vec![1.03]);
        assert_eq!(sol.state.va, vec![0.0]);
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let mut load = Bus::new(2, BusKind::PQ);
        load.load_p = 2000.0; // far beyond the line's transfer limit
        let case = GridCase {
            name: "overload".into(),
            base_mva: 100.0,
            buses: vec![Bus::new(1, BusKind::Slack), load],
            branches: vec![Branch::line(1, 2, 0.0, 0.1)],
        };
        match solve_nr(&case, 1e-8, 15) {
            Ok(sol) => assert!(!sol.converged),
            Err(Error::SingularJacobian { .. }) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        let case = parse_case(include_str!("../../fixtures/ieee14.case")).unwrap();
        assert!(matches!(solve_nr(&case, 0.0, 10), Err(Error::Contract(_))));
    }
}
