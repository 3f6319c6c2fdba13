use super::{Gradients, MlpModel};
use ndarray::{Array1, Array2};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u32,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl AdamState {
    pub fn new(model: &MlpModel) -> Self {
        let zw: Vec<Array2<f64>> = model.weights.iter().map(|w| Array2::zeros(w.dim())).collect();
        let zb: Vec<Array1<f64>> = model.biases.iter().map(|b| Array1::zeros(b.len())).collect();
        Self {
            step: 0,
            m_w: zw.clone(),
            v_w: zw,
            m_b: zb.clone(),
            v_b: zb,
        }
    }
}

fn update<'a>(
    params: impl Iterator<Item = &'a mut f64>,
    grads: impl Iterator<Item = &'a f64>,
    m: impl Iterator<Item = &'a mut f64>,
    v: impl Iterator<Item = &'a mut f64>,
    lr: f64,
    c1: f64,
    c2: f64,
) {
    for (((p, g), m), v) in params.zip(grads).zip(m).zip(v) {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + EPS);
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(model: &mut MlpModel, grads: &Gradients, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for k in 0..model.weights.len() {
        update(
            model.weights[k].iter_mut(),
            grads.weights[k].iter(),
            state.m_w[k].iter_mut(),
            state.v_w[k].iter_mut(),
            lr,
            c1,
            c2,
        );
        update(
            model.biases[k].iter_mut(),
            grads.biases[k].iter(),
            state.m_b[k].iter_mut(),
            state.v_b[k].iter_mut(),
            lr,
            c1,
            c2,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::glorot_init;

    fn scalar_model(value: f64) -> MlpModel {
        let mut m = glorot_init(&[1, 1], 0).unwrap();
        m.weights[0][[0, 0]] = value;
        m
    }

    fn grads(gw: f64, gb: f64) -> Gradients {
        Gradients {
            weights: vec![Array2::from_elem((1, 1), gw)],
            biases: vec![Array1::from_elem(1, gb)],
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut m = scalar_model(0.5);
        let mut s = AdamState::new(&m);
        adam_step(&mut m, &grads(1.0, 0.0), &mut s, 0.01);
        // m̂ = 1, v̂ = 1 → Δ = −0.01·1/(1 + 1e-8)
        assert!((m.weights[0][[0, 0]] - (0.5 - 0.01)).abs() < 1e-9);
        assert_eq!(m.biases[0][0], 0.0);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut m = scalar_model(0.25);
        let mut s = AdamState::new(&m);
        for _ in 0..50 {
            adam_step(&mut m, &grads(0.0, 0.0), &mut s, 0.1);
        }
        assert_eq!(m.weights[0][[0, 0]], 0.25);
        assert_eq!(s.step, 50);
    }
}
