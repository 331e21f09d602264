use crate::error::Error;
use crate::tensor::Tensor;

/// Adam update rule with bias correction. State is positional: `step` must
/// always receive the same parameter list the optimizer was built with.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, params: &[Tensor]) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
        }
    }

    /// Applies one update from the accumulated gradients, then clears them.
    /// Parameters with no gradient this step are treated as zero-gradient.
    pub fn step(&mut self, params: &[Tensor]) -> Result<(), Error> {
        if params.len() != self.m.len() {
            return Err(Error::Contract(format!(
                "optimizer built for {} parameters, step called with {}",
                self.m.len(),
                params.len()
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (pi, p) in params.iter().enumerate() {
            if p.numel() != self.m[pi].len() {
                return Err(Error::Contract(format!(
                    "parameter {pi} changed size ({} vs {})",
                    p.numel(),
                    self.m[pi].len()
                )));
            }
            let grad = p.grad().unwrap_or_else(|| vec![0.0; p.numel()]);
            let mut data = p.data();
            for i in 0..data.len() {
                let g = grad[i];
                if !g.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite gradient in parameter {pi} at index {i}"
                    )));
                }
                self.m[pi][i] = self.beta1 * self.m[pi][i] + (1.0 - self.beta1) * g;
                self.v[pi][i] = self.beta2 * self.v[pi][i] + (1.0 - self.beta2) * g * g;
                let m_hat = self.m[pi][i] / bc1;
                let v_hat = self.v[pi][i] / bc2;
                data[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            p.set_data(data)?;
            p.zero_grad();
        }
        Ok(())
    }
}
