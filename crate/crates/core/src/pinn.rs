//! Composite physics-informed loss `λd·d + λp·p + λc·c`.
//!
//! - `d`: mean squared complex-voltage error `(1/N) Σ |V_est − V_true|²`.
//! - `p`: mean squared injected-current error with `I = A·V`, where `A` is
//!   the conjugated admittance matrix by default.
//! - `c`: mean squared error between predictions and known constants.
//!
//! The physics and constants terms are evaluated on physical voltages, after
//! the network output has been mapped back through the target normalisation.

use crate::error::{Error, Result};
use crate::grid::{AdmittanceMatrix, BusKind, GridCase};
use crate::neural::{LossBreakdown, Objective};
use crate::powerflow::StateVector;
use crate::scenario::NormMeta;
use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_d: f64,
    pub lambda_p: f64,
    pub lambda_c: f64,
}

impl LossWeights {
    /// Pure data-driven baseline.
    pub const DATA_ONLY: LossWeights = LossWeights {
        lambda_d: 1.0,
        lambda_p: 0.0,
        lambda_c: 0.0,
    };

    pub fn new(lambda_d: f64, lambda_p: f64, lambda_c: f64) -> Result<Self> {
        let w = Self {
            lambda_d,
            lambda_p,
            lambda_c,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.lambda_d, self.lambda_p, self.lambda_c];
        if parts.iter().any(|l| !(0.0..=1.0).contains(l)) || (parts.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::contract(format!("loss weights {parts:?} are not on the simplex")));
        }
        Ok(())
    }

    pub fn combine(&self, d: f64, p: f64, c: f64) -> f64 {
        self.lambda_d * d + self.lambda_p * p + self.lambda_c * c
    }

    pub fn is_data_only(&self) -> bool {
        self.lambda_d == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    Vm,
    Va,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantEntry {
    /// 1-based bus id.
    pub bus: usize,
    pub quantity: Quantity,
    /// p.u. for `Vm`, rad for `Va`.
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantsSpec {
    pub entries: Vec<ConstantEntry>,
}

impl ConstantsSpec {
    /// Slack magnitude and angle always; PV magnitudes only for steady-state
    /// data, since voltage regulation may be lost during transients.
    pub fn from_case(case: &GridCase, steady_state: bool) -> Self {
        let mut entries = Vec::new();
        for b in &case.buses {
            match b.kind {
                BusKind::Slack => {
                    entries.push(ConstantEntry {
                        bus: b.id,
                        quantity: Quantity::Vm,
                        value: b.voltage_setpoint,
                    });
                    entries.push(ConstantEntry {
                        bus: b.id,
                        quantity: Quantity::Va,
                        value: 0.0,
                    });
                }
                BusKind::PV if steady_state => entries.push(ConstantEntry {
                    bus: b.id,
                    quantity: Quantity::Vm,
                    value: b.voltage_setpoint,
                }),
                _ => {}
            }
        }
        Self { entries }
    }

    pub fn validate(&self, n_buses: usize) -> Result<()> {
        match self.entries.iter().find(|e| e.bus == 0 || e.bus > n_buses) {
            Some(e) => Err(Error::contract(format!("constant refers to missing bus {}", e.bus))),
            None => Ok(()),
        }
    }
}

pub fn to_complex_voltage(vm: &[f64], va: &[f64]) -> Vec<Complex64> {
    vm.iter().zip(va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect()
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::contract(format!("length mismatch: {a} vs {b}")));
    }
    Ok(())
}

pub fn loss_data(v_est: &[Complex64], v_true: &[Complex64]) -> Result<f64> {
    check_len(v_est.len(), v_true.len())?;
    if v_est.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = v_est.iter().zip(v_true).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(s / v_est.len() as f64)
}

/// `(1/N) Σ |(A·V_est − A·V_true)_i|²` for the current operator `A`.
pub fn loss_physics(v_est: &[Complex64], v_true: &[Complex64], y_op: &AdmittanceMatrix) -> Result<f64> {
    check_len(v_est.len(), v_true.len())?;
    check_len(v_est.len(), y_op.dim())?;
    if v_est.is_empty() {
        return Ok(0.0);
    }
    let i_est = y_op.mul_vec(v_est);
    let i_true = y_op.mul_vec(v_true);
    let s: f64 = i_est.iter().zip(&i_true).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(s / v_est.len() as f64)
}

fn constant_estimate(state: &StateVector, e: &ConstantEntry) -> f64 {
    match e.quantity {
        Quantity::Vm => state.vm[e.bus - 1],
        Quantity::Va => state.va[e.bus - 1],
    }
}

pub fn loss_constants(state: &StateVector, spec: &ConstantsSpec) -> Result<f64> {
    spec.validate(state.len())?;
    if spec.entries.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = spec
        .entries
        .iter()
        .map(|e| (constant_estimate(state, e) - e.value).powi(2))
        .sum();
    Ok(s / spec.entries.len() as f64)
}

/// Operator of the physics term and the normalisation needed to reach
/// physical voltages.
#[derive(Debug, Clone)]
pub struct PhysicsContext {
    pub y_op: AdmittanceMatrix,
    pub norm_meta: NormMeta,
    rows: Vec<Vec<(usize, Complex64)>>,
    /// Rows of the conjugate transpose of `y_op`.
    adjoint_rows: Vec<Vec<(usize, Complex64)>>,
}

impl PhysicsContext {
    /// `conjugate = true` uses `Ȳ`, otherwise `Y`.
    pub fn new(y: &AdmittanceMatrix, norm_meta: NormMeta, conjugate: bool) -> Result<Self> {
        if y.dim() != norm_meta.n_buses {
            return Err(Error::contract("admittance matrix and normalisation disagree on bus count"));
        }
        let y_op = if conjugate { y.conj() } else { y.clone() };
        let rows = y_op.sparse_rows();
        let adjoint_rows = y_op.conj().transpose().sparse_rows();
        Ok(Self {
            y_op,
            norm_meta,
            rows,
            adjoint_rows,
        })
    }

    pub fn n_buses(&self) -> usize {
        self.y_op.dim()
    }
}

fn sparse_mul(rows: &[Vec<(usize, Complex64)>], v: &[Complex64]) -> Vec<Complex64> {
    rows.iter().map(|r| r.iter().map(|&(j, a)| a * v[j]).sum()).collect()
}

/// Total loss and its terms for explicit physical states, averaged over a
/// batch of (estimate, truth) pairs.
pub fn total_loss(
    estimates: &[StateVector],
    truths: &[StateVector],
    weights: &LossWeights,
    ctx: &PhysicsContext,
    constants: &ConstantsSpec,
) -> Result<LossBreakdown> {
    weights.validate()?;
    check_len(estimates.len(), truths.len())?;
    let mut acc = LossBreakdown::default();
    for (est, tru) in estimates.iter().zip(truths) {
        let ve = to_complex_voltage(&est.vm, &est.va);
        let vt = to_complex_voltage(&tru.vm, &tru.va);
        acc.d += loss_data(&ve, &vt)?;
        acc.p += loss_physics(&ve, &vt, &ctx.y_op)?;
        acc.c += loss_constants(est, constants)?;
    }
    let b = estimates.len().max(1) as f64;
    acc.d /= b;
    acc.p /= b;
    acc.c /= b;
    acc.total = weights.combine(acc.d, acc.p, acc.c);
    Ok(acc)
}

/// The composite loss as a training objective on normalised outputs.
#[derive(Debug, Clone)]
pub struct CompositeLoss {
    pub weights: LossWeights,
    pub ctx: PhysicsContext,
    pub constants: ConstantsSpec,
}

impl CompositeLoss {
    pub fn new(weights: LossWeights, ctx: PhysicsContext, constants: ConstantsSpec) -> Result<Self> {
        weights.validate()?;
        constants.validate(ctx.n_buses())?;
        if weights.lambda_c > 0.0 && constants.entries.is_empty() {
            log::warn!("constants weight {} with no known constants", weights.lambda_c);
        }
        Ok(Self {
            weights,
            ctx,
            constants,
        })
    }
}

impl Objective for CompositeLoss {
    fn evaluate(&self, outputs: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<(LossBreakdown, Array2<f64>)> {
        let n = self.ctx.n_buses();
        if outputs.dim() != targets.dim() || outputs.ncols() != 2 * n {
            return Err(Error::contract("outputs and targets must both be batch × 2N"));
        }
        let meta = &self.ctx.norm_meta;
        let batch = outputs.nrows();
        let inv_b = 1.0 / batch.max(1) as f64;
        let inv_n = 1.0 / n as f64;
        let k = self.constants.entries.len();
        let w = &self.weights;
        let mut acc = LossBreakdown::default();
        let mut grad = Array2::zeros(outputs.dim());
        for (s, (out, tgt)) in outputs.rows().into_iter().zip(targets.rows()).enumerate() {
            let est = meta.denormalize_targets(out.as_slice().expect("standard layout"));
            let tru = meta.denormalize_targets(&tgt.to_vec());
            let ve = to_complex_voltage(&est.vm, &est.va);
            let vt = to_complex_voltage(&tru.vm, &tru.va);
            let err: Vec<Complex64> = ve.iter().zip(&vt).map(|(a, b)| a - b).collect();
            let d = err.iter().map(|e| e.norm_sqr()).sum::<f64>() * inv_n;
            let a_err = sparse_mul(&self.ctx.rows, &err);
            let p = a_err.iter().map(|e| e.norm_sqr()).sum::<f64>() * inv_n;
            // Wirtinger-style gradient g = ∂L/∂Re e + j ∂L/∂Im e
            let mut g: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n];
            if w.lambda_d != 0.0 {
                for (gi, ei) in g.iter_mut().zip(&err) {
                    *gi += ei * (2.0 * inv_n * w.lambda_d);
                }
            }
            if w.lambda_p != 0.0 {
                let back = sparse_mul(&self.ctx.adjoint_rows, &a_err);
                for (gi, bi) in g.iter_mut().zip(&back) {
                    *gi += bi * (2.0 * inv_n * w.lambda_p);
                }
            }
            let mut row_grad = vec![0.0; 2 * n];
            for i in 0..n {
                let rot = Complex64::from_polar(1.0, est.va[i]);
                let gc = g[i].conj();
                row_grad[i] = (gc * rot).re;
                row_grad[n + i] = (gc * Complex64::i() * ve[i]).re;
            }
            let mut c = 0.0;
            if k > 0 {
                for e in &self.constants.entries {
                    let diff = constant_estimate(&est, e) - e.value;
                    c += diff * diff;
                    let col = match e.quantity {
                        Quantity::Vm => e.bus - 1,
                        Quantity::Va => n + e.bus - 1,
                    };
                    row_grad[col] += w.lambda_c * 2.0 * diff / k as f64;
                }
                c /= k as f64;
            }
            for (j, gj) in row_grad.iter().enumerate() {
                grad[[s, j]] = gj * meta.target_half[j] * inv_b;
            }
            acc.d += d;
            acc.p += p;
            acc.c += c;
        }
        acc.d *= inv_b;
        acc.p *= inv_b;
        acc.c *= inv_b;
        acc.total = w.combine(acc.d, acc.p, acc.c);
        Ok((acc, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_bus_y() -> AdmittanceMatrix {
        AdmittanceMatrix::from_dense(2, vec![c(0.0, -10.0), c(0.0, 10.0), c(0.0, 10.0), c(0.0, -10.0)])
    }

    #[test]
    fn complex_voltage() {
        assert_eq!(to_complex_voltage(&[1.0], &[0.0]), vec![c(1.0, 0.0)]);
        let v = to_complex_voltage(&[1.0], &[std::f64::consts::FRAC_PI_2])[0];
        assert!((v - c(0.0, 1.0)).norm() < 1e-16);
        let v = to_complex_voltage(&[1.06], &[-0.1])[0];
        assert!((v - c(1.06 * 0.1f64.cos(), -1.06 * 0.1f64.sin())).norm() < 1e-15);
    }

    #[test]
    fn data_term() {
        assert_eq!(loss_data(&[c(1.0, 0.2)], &[c(1.0, 0.2)]).unwrap(), 0.0);
        assert!((loss_data(&[c(1.3, 0.4)], &[c(1.0, 0.0)]).unwrap() - 0.25).abs() < 1e-15);
        assert!(loss_data(&[c(1.0, 0.0)], &[]).is_err());
    }

    #[test]
    fn physics_term_two_bus() {
        let y = two_bus_y().conj();
        let v_true = [c(1.0, 0.0), c(0.98, -0.05)];
        let v_est = [v_true[0] + c(0.01, 0.0), v_true[1]];
        // Ȳ·(0.01, 0) = (0.1j, −0.1j): |·|² = 0.01 each, mean 0.01
        assert!((loss_physics(&v_est, &v_true, &y).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(loss_physics(&v_true, &v_true, &y).unwrap(), 0.0);
        let zero = AdmittanceMatrix::zeros(2);
        assert_eq!(loss_physics(&v_est, &v_true, &zero).unwrap(), 0.0);
    }

    #[test]
    fn constants_term() {
        let spec = ConstantsSpec {
            entries: vec![ConstantEntry { bus: 1, quantity: Quantity::Vm, value: 1.06 }],
        };
        let st = StateVector { vm: vec![1.05], va: vec![0.0] };
        assert!((loss_constants(&st, &spec).unwrap() - 1e-4).abs() < 1e-15);
        assert_eq!(loss_constants(&st, &ConstantsSpec::default()).unwrap(), 0.0);
        let bad = ConstantsSpec {
            entries: vec![ConstantEntry { bus: 3, quantity: Quantity::Va, value: 0.0 }],
        };
        assert!(loss_constants(&st, &bad).is_err());
    }

    #[test]
    fn weights_on_simplex() {
        let w = LossWeights::new(0.2, 0.7, 0.1).unwrap();
        assert!((w.combine(1.0, 2.0, 3.0) - 1.9).abs() < 1e-15);
        assert!(LossWeights::new(0.5, 0.5, 0.1).is_err());
        assert!(LossWeights::new(1.2, -0.2, 0.0).is_err());
    }

    #[test]
    fn constants_population() {
        let case = crate::grid::builtin_case("ieee14").unwrap();
        let steady = ConstantsSpec::from_case(&case, true);
        // slack vm + va, four PV magnitudes
        assert_eq!(steady.entries.len(), 6);
        assert_eq!(ConstantsSpec::from_case(&case, false).entries.len(), 2);
    }
}
