use super::layers::Param;
use super::tensor::Tensor;
use crate::error::{invalid, Result};

/// First and second moment estimates for one named parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub name: String,
    pub first: Tensor,
    pub second: Tensor,
}

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub moments: Vec<Moments>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, moments: Vec::new() }
    }

    /// Applies one update from the accumulated gradients.
    ///
    /// Moments are created on the first call; later calls must pass the
    /// same parameter blocks in the same order.
    pub fn step(&mut self, params: Vec<(String, &mut Param)>) -> Result<()> {
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|(name, p)| Moments {
                    name: name.clone(),
                    first: Tensor::zeros_like(&p.value),
                    second: Tensor::zeros_like(&p.value),
                })
                .collect();
        }
        if params.len() != self.moments.len() {
            return invalid(format!(
                "optimizer tracks {} parameter blocks, got {}",
                self.moments.len(),
                params.len()
            ));
        }
        for ((name, p), mom) in params.iter().zip(&self.moments) {
            if *name != mom.name || p.value.shape() != mom.first.shape() {
                return invalid(format!("parameter block {name} does not match optimizer state"));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((_, p), mom) in params.into_iter().zip(&mut self.moments) {
            let g = p.grad.data();
            let m = mom.first.data_mut();
            let v = mom.second.data_mut();
            for (i, w) in p.value.data_mut().iter_mut().enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(values: &[f64], grads: &[f64]) -> Param {
        let n = values.len();
        let mut p = Param::new(Tensor::from_vec([1, 1, 1, n], values.to_vec()).unwrap());
        p.grad = Tensor::from_vec([1, 1, 1, n], grads.to_vec()).unwrap();
        p
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = param(&[0.5, -1.0], &[0.0, 0.0]);
        let mut opt = Adam::new(1e-3);
        for _ in 0..3 {
            opt.step(vec![("p".into(), &mut p)]).unwrap();
        }
        assert_eq!(p.value.data(), &[0.5, -1.0]);
    }

    #[test]
    fn first_step_closed_form() {
        // m_hat = g, v_hat = g^2, so the step is -lr * g / (|g| + eps)
        let g = [0.3, -2.0, 1e-3];
        let mut p = param(&[0.0; 3], &g);
        let mut opt = Adam::new(0.01);
        opt.step(vec![("p".into(), &mut p)]).unwrap();
        for (w, g) in p.value.data().iter().zip(g) {
            let want = -0.01 * g / (g.abs() + 1e-8);
            assert!((w - want).abs() < 1e-15, "{w} vs {want}");
        }
    }

    #[test]
    fn rejects_mismatched_blocks() {
        let mut a = param(&[0.0], &[1.0]);
        let mut b = param(&[0.0, 0.0], &[1.0, 1.0]);
        let mut opt = Adam::new(0.01);
        opt.step(vec![("a".into(), &mut a)]).unwrap();
        assert!(opt.step(vec![("b".into(), &mut b)]).is_err());
    }
}
