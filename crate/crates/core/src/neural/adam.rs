use serde::{Deserialize, Serialize};

use super::net::Dense;
use crate::error::{Error, Result};

/// Bias-corrected Adam moments for a list of [`Dense`] blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Dense>,
    pub v: Vec<Dense>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &[Dense]) -> Self {
        let zeros: Vec<Dense> = params.iter().map(Dense::zeros_like).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam step: `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step(params: &mut [Dense], grads: &[Dense], state: &mut AdamState, lr: f64) -> Result<()> {
    let same = params.len() == grads.len()
        && params.len() == state.m.len()
        && params
            .iter()
            .zip(grads)
            .zip(&state.m)
            .all(|((p, g), m)| p.w.dim() == g.w.dim() && p.w.dim() == m.w.dim() && p.b.len() == g.b.len() && p.b.len() == m.b.len());
    if !same {
        return Err(Error::invalid("gradient blocks do not match parameter blocks"));
    }
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
    };
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(state.m.iter_mut()).zip(state.v.iter_mut()) {
        ndarray::Zip::from(&mut p.w)
            .and(&g.w)
            .and(&mut m.w)
            .and(&mut v.w)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        ndarray::Zip::from(&mut p.b)
            .and(&g.b)
            .and(&mut m.b)
            .and(&mut v.b)
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn block() -> Vec<Dense> {
        vec![Dense {
            w: array![[1.0, -2.0]],
            b: array![0.5],
        }]
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut p = block();
        let g = vec![p[0].zeros_like()];
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 1e-3).unwrap();
        assert_eq!(p, block());
    }

    #[test]
    fn first_step_has_magnitude_lr() {
        let mut p = block();
        let g = vec![Dense {
            w: array![[3.0, -0.01]],
            b: array![1e-3],
        }];
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 1e-3).unwrap();
        assert!((p[0].w[[0, 0]] - (1.0 - 1e-3)).abs() < 1e-10);
        assert!((p[0].w[[0, 1]] - (-2.0 + 1e-3)).abs() < 1e-9);
        assert!((p[0].b[0] - (0.5 - 1e-3)).abs() < 1e-8);
    }

    #[test]
    fn deterministic() {
        let g = vec![Dense {
            w: array![[0.3, 0.7]],
            b: array![-0.2],
        }];
        let run = || {
            let mut p = block();
            let mut s = AdamState::new(&p);
            for _ in 0..10 {
                adam_step(&mut p, &g, &mut s, 1e-2).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch() {
        let mut p = block();
        let mut s = AdamState::new(&p);
        assert!(adam_step(&mut p, &[], &mut s, 1e-3).is_err());
    }
}
