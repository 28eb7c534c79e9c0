use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// First/second moment accumulators, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Real = f32> {
    pub config: AdamConfig,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Tensor<T>>) -> Self {
        let m: Vec<Tensor<T>> = params
            .into_iter()
            .map(|p| Tensor::zeros(p.dims().to_vec()))
            .collect();
        AdamState {
            config,
            v: m.clone(),
            m,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor<T>] {
        &self.v
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "adam: state tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.dims() != self.m[i].dims() || g.dims() != self.m[i].dims() {
                return Err(Error::shape(format!(
                    "adam: tensor {i} has param {:?}, grad {:?}, state {:?}",
                    p.dims(),
                    g.dims(),
                    self.m[i].dims()
                )));
            }
        }
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powf(self.t as f64);
        let c2 = 1.0 - beta2.powf(self.t as f64);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let rows = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((theta, &grad), (mi, vi)) in rows {
                let grad = grad.widen();
                let m_new = beta1 * mi.widen() + (1.0 - beta1) * grad;
                let v_new = beta2 * vi.widen() + (1.0 - beta2) * grad * grad;
                *mi = T::of(m_new);
                *vi = T::of(v_new);
                let m_hat = m_new / c1;
                let v_hat = v_new / c2;
                *theta = T::of(theta.widen() - lr * m_hat / (v_hat.sqrt() + epsilon));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_scalar_step() {
        let mut p = vec![Tensor::new([1], vec![1.0f64]).unwrap()];
        let mut s = AdamState::new(AdamConfig::default(), &p);
        s.step(&mut p, &[Tensor::new([1], vec![2.0]).unwrap()])
            .unwrap();
        let expected = 1.0 - 1e-3 * 2.0 / (2.0 + 1e-7);
        assert!((p[0].data()[0] - expected).abs() < 1e-12);
        assert!((p[0].data()[0] - 0.9990000001).abs() < 1e-9);
        assert_eq!(s.steps(), 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![Tensor::new([2, 2], vec![0.5f32, -1.0, 3.0, 0.0]).unwrap()];
        let before = p.clone();
        let mut s = AdamState::new(AdamConfig::default(), &p);
        s.step(&mut p, &[Tensor::zeros([2, 2])]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![Tensor::<f32>::zeros([2])];
        let mut s = AdamState::new(AdamConfig::default(), &p);
        assert!(s.step(&mut p, &[Tensor::zeros([3])]).is_err());
        assert!(s.step(&mut p, &[]).is_err());
        assert_eq!(s.steps(), 0);
    }

    proptest! {
        #[test]
        fn first_step_bounded_by_lr(g in prop::collection::vec(-1e3f64..1e3, 1..32)) {
            let n = g.len();
            let mut p = vec![Tensor::<f64>::zeros([n])];
            let mut s = AdamState::new(AdamConfig::default(), &p);
            s.step(&mut p, &[Tensor::new([n], g).unwrap()]).unwrap();
            prop_assert!(p[0].data().iter().all(|d| d.abs() <= 1e-3));
            prop_assert!(s.second_moments()[0].data().iter().all(|&v| v >= 0.0));
        }
    }
}
