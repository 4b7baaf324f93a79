use super::params::Params;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Global L2 norm over a set of gradients.
pub fn global_norm<'a>(grads: impl IntoIterator<Item = &'a Tensor>) -> f64 {
    grads.into_iter().map(Tensor::sum_squares).sum::<f64>().sqrt()
}

/// Scale every gradient by `max_norm / norm` when the global norm exceeds
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Params, max_norm: f32) -> f64 {
    let norm = global_norm(grads.values());
    if norm > f64::from(max_norm) {
        let s = (f64::from(max_norm) / norm) as f32;
        for g in grads.values_mut() {
            g.scale_in_place(s);
        }
    }
    norm
}

/// Step-decayed learning rate: `base * factor^(epoch / every)`.
pub fn step_decay(base: f32, factor: f32, every: usize, epoch: usize) -> f32 {
    if every == 0 {
        return base;
    }
    base * factor.powi((epoch / every) as i32)
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    step: u32,
    m: Params,
    v: Params,
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new(0.9, 0.999, 1e-8)
    }
}

impl Adam {
    pub fn new(beta1: f32, beta2: f32, eps: f32) -> Self {
        Adam {
            beta1,
            beta2,
            eps,
            step: 0,
            m: Params::new(),
            v: Params::new(),
        }
    }

    pub fn steps_taken(&self) -> u32 {
        self.step
    }

    /// One bias-corrected update of every parameter that has a gradient.
    pub fn step(&mut self, params: &mut Params, grads: &Params, lr: f32) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (name, g) in grads.iter() {
            let p = params
                .get_mut(name)
                .ok_or_else(|| Error::ShapeMismatch(format!("gradient for unknown parameter {name}")))?;
            if p.shape() != g.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: parameter {:?} vs gradient {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
            let m = self.m.entry(name).or_insert_with(|| Tensor::zeros(g.shape()));
            let v = self.v.entry(name).or_insert_with(|| Tensor::zeros(g.shape()));
            let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *pi -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one(name: &str, t: Tensor) -> Params {
        let mut p = Params::new();
        p.insert(name, t);
        p
    }

    #[test]
    fn clip_leaves_small_gradients() {
        let mut g = one("w", Tensor::vector(vec![0.3, 0.4]));
        assert_abs_diff_eq!(clip_global_norm(&mut g, 1.0), 0.5, epsilon = 1e-7);
        assert_eq!(g.get("w").unwrap().data(), &[0.3, 0.4]);
    }

    #[test]
    fn clip_scales_large_gradients() {
        let mut g = one("w", Tensor::vector(vec![1.2, 1.6]));
        clip_global_norm(&mut g, 1.0);
        assert_abs_diff_eq!(global_norm(g.values()), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(g.get("w").unwrap().data()[0], 0.6, epsilon = 1e-6);
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut p = one("w", Tensor::vector(vec![1.0, -1.0]));
        let g = one("w", Tensor::zeros(&[2]));
        Adam::default().step(&mut p, &g, 0.001).unwrap();
        assert_eq!(p.get("w").unwrap().data(), &[1.0, -1.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = one("w", Tensor::vector(vec![0.5]));
        let g = one("w", Tensor::vector(vec![1.0]));
        Adam::default().step(&mut p, &g, 0.001).unwrap();
        assert_abs_diff_eq!(p.get("w").unwrap().data()[0], 0.499, epsilon = 1e-6);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = one("w", Tensor::vector(vec![0.5]));
        let g = one("w", Tensor::vector(vec![1.0, 2.0]));
        assert!(Adam::default().step(&mut p, &g, 0.001).is_err());
    }

    #[test]
    fn halving_schedule() {
        assert_eq!(step_decay(0.001, 0.5, 20, 0), 0.001);
        assert_eq!(step_decay(0.001, 0.5, 20, 19), 0.001);
        assert_abs_diff_eq!(step_decay(0.001, 0.5, 20, 20), 0.0005, epsilon = 1e-10);
        assert_abs_diff_eq!(step_decay(0.001, 0.5, 20, 40), 0.00025, epsilon = 1e-10);
    }
}
