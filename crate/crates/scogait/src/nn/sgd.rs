//! SGD with momentum and selective weight decay.

use ndarray::ArrayD;

use super::{Param, Scalar};

/// Momentum SGD. Weight decay touches only params flagged `decay` (conv and
/// linear weights), never biases or batch-norm scale/shift.
pub struct Sgd<A> {
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<ArrayD<A>>,
}

impl<A: Scalar> Sgd<A> {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        Sgd {
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    /// One update step. Parameter order must be stable across calls.
    pub fn step(&mut self, params: &mut [&mut Param<A>], lr: f64) {
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| ArrayD::zeros(p.value.raw_dim())).collect();
        }
        assert_eq!(self.velocity.len(), params.len());
        let mu = A::cast(self.momentum);
        let lr = A::cast(lr);
        let wd = A::cast(self.weight_decay);
        for (p, v) in params.iter_mut().zip(&mut self.velocity) {
            let decay = if p.decay { wd } else { A::zero() };
            ndarray::Zip::from(v.view_mut())
                .and(&p.grad)
                .and(&p.value)
                .for_each(|v, &g, &w| {
                    *v = mu * *v + g + decay * w;
                });
            ndarray::Zip::from(&mut p.value)
                .and(v.view())
                .for_each(|w, &v| {
                    *w = *w - lr * v;
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;

    #[test]
    fn momentum_and_decay_follow_the_standard_update() {
        let mut p = Param::new("w", arr1(&[1.0f64]).into_dyn(), true);
        let mut b = Param::new("b", arr1(&[1.0f64]).into_dyn(), false);
        p.grad.fill(0.5);
        b.grad.fill(0.5);
        let mut opt = Sgd::new(0.9, 0.1);
        opt.step(&mut [&mut p, &mut b], 0.1);
        // v = g + wd*w = 0.6; w = 1 - 0.1*0.6 = 0.94
        assert!((p.value[[0]] - 0.94).abs() < 1e-12);
        // bias: no decay, v = 0.5, b = 0.95
        assert!((b.value[[0]] - 0.95).abs() < 1e-12);

        p.grad.fill(0.0);
        b.grad.fill(0.0);
        opt.step(&mut [&mut p, &mut b], 0.1);
        // v = 0.9*0.6 + 0.1*0.94 = 0.634; w = 0.94 - 0.0634
        assert!((p.value[[0]] - (0.94 - 0.1 * (0.9 * 0.6 + 0.1 * 0.94))).abs() < 1e-12);
        assert!((b.value[[0]] - (0.95 - 0.1 * (0.9 * 0.5))).abs() < 1e-12);
    }
}
