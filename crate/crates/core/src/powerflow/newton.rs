use super::{scheduled_injections, Injections, StateVector};
use crate::error::{Error, Result};
use crate::grid::{AdmittanceMatrix, BusKind, GridCase};
use crate::linalg::{DenseMatrix, LuFactors};
use num_complex::Complex64;

/// Mismatch equations of one case: `ΔP` at PV and PQ buses, `ΔQ` at PQ buses,
/// unknowns `θ` at PV and PQ buses and `|V|` at PQ buses.
#[derive(Debug, Clone)]
pub struct NewtonSystem<'a> {
    y: &'a AdmittanceMatrix,
    pvpq: Vec<usize>,
    pq: Vec<usize>,
    scheduled: Injections,
}

impl<'a> NewtonSystem<'a> {
    pub fn new(case: &GridCase, y: &'a AdmittanceMatrix) -> Self {
        let pvpq = case
            .buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.kind != BusKind::Slack)
            .map(|(i, _)| i)
            .collect();
        let pq = case
            .buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.kind == BusKind::PQ)
            .map(|(i, _)| i)
            .collect();
        Self {
            y,
            pvpq,
            pq,
            scheduled: scheduled_injections(case),
        }
    }

    pub fn n_unknowns(&self) -> usize {
        self.pvpq.len() + self.pq.len()
    }

    fn voltages(state: &StateVector) -> Vec<Complex64> {
        state
            .vm
            .iter()
            .zip(&state.va)
            .map(|(&m, &a)| Complex64::from_polar(m, a))
            .collect()
    }

    /// Calculated minus scheduled injections, ordered `[ΔP(pvpq), ΔQ(pq)]`.
    pub fn mismatch(&self, state: &StateVector) -> Vec<f64> {
        let v = Self::voltages(state);
        let current = self.y.mul_vec(&v);
        let s: Vec<Complex64> = v.iter().zip(&current).map(|(a, b)| a * b.conj()).collect();
        self.pvpq
            .iter()
            .map(|&i| s[i].re - self.scheduled.p[i])
            .chain(self.pq.iter().map(|&i| s[i].im - self.scheduled.q[i]))
            .collect()
    }

    /// Analytic Jacobian of [`Self::mismatch`] with respect to
    /// `[θ(pvpq), |V|(pq)]`.
    pub fn jacobian(&self, state: &StateVector) -> DenseMatrix {
        let v = Self::voltages(state);
        let vnorm: Vec<Complex64> = v.iter().map(|x| x / x.norm()).collect();
        let current = self.y.mul_vec(&v);
        let j = Complex64::new(0.0, 1.0);

        // dS/dθ_c and dS/d|V|_c for row r
        let ds_dva = |r: usize, c: usize| {
            let diag = if r == c { current[r] } else { Complex64::new(0.0, 0.0) };
            j * v[r] * (diag - self.y.get(r, c) * v[c]).conj()
        };
        let ds_dvm = |r: usize, c: usize| {
            let mut d = v[r] * (self.y.get(r, c) * vnorm[c]).conj();
            if r == c {
                d += current[r].conj() * vnorm[r];
            }
            d
        };

        let npvpq = self.pvpq.len();
        let mut jac = DenseMatrix::zeros(self.n_unknowns());
        for (row, &r) in self.pvpq.iter().enumerate() {
            for (col, &c) in self.pvpq.iter().enumerate() {
                jac.set(row, col, ds_dva(r, c).re);
            }
            for (col, &c) in self.pq.iter().enumerate() {
                jac.set(row, npvpq + col, ds_dvm(r, c).re);
            }
        }
        for (row, &r) in self.pq.iter().enumerate() {
            for (col, &c) in self.pvpq.iter().enumerate() {
                jac.set(npvpq + row, col, ds_dva(r, c).im);
            }
            for (col, &c) in self.pq.iter().enumerate() {
                jac.set(npvpq + row, npvpq + col, ds_dvm(r, c).im);
            }
        }
        jac
    }

    /// Adds `dx` (ordered like the unknowns) to the state.
    pub fn apply(&self, state: &mut StateVector, dx: &[f64]) {
        let npvpq = self.pvpq.len();
        for (k, &i) in self.pvpq.iter().enumerate() {
            state.va[i] += dx[k];
        }
        for (k, &i) in self.pq.iter().enumerate() {
            state.vm[i] += dx[npvpq + k];
        }
    }

    pub(super) fn newton_step(
        &self,
        state: &mut StateVector,
        mismatch: &[f64],
        iteration: usize,
    ) -> Result<()> {
        let lu = LuFactors::factor(self.jacobian(state))
            .ok_or(Error::SingularJacobian { iteration })?;
        let rhs: Vec<f64> = mismatch.iter().map(|v| -v).collect();
        let dx = lu.solve(&rhs);
        self.apply(state, &dx);
        Ok(())
    }
}
