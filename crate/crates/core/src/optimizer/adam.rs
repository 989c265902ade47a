use crate::params::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamSettings {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamSettings {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Per-agent moment estimates. Replaces the constant `α · y` step with a bias-corrected
/// elementwise rescaling of `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    u: Vec<f64>,
    t: i32,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self { m: vec![0.0; dim], u: vec![0.0; dim], t: 0 }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn scale(&mut self, y: &[f64], alpha: f64, s: &AdamSettings) -> ParamVector {
        self.t += 1;
        let c1 = 1.0 - s.beta1.powi(self.t);
        let c2 = 1.0 - s.beta2.powi(self.t);
        let mut dir = ParamVector::zeros(y.len());
        for (k, &g) in y.iter().enumerate() {
            self.m[k] = s.beta1 * self.m[k] + (1.0 - s.beta1) * g;
            self.u[k] = s.beta2 * self.u[k] + (1.0 - s.beta2) * g * g;
            let m_hat = self.m[k] / c1;
            let u_hat = self.u[k] / c2;
            dir[k] = alpha * m_hat / (u_hat.sqrt() + s.eps);
        }
        dir
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_signed_alpha() {
        let mut st = AdamState::new(3);
        let d = st.scale(&[0.3, -2.0, 1e-3], 0.01, &AdamSettings::default());
        assert!((d[0] - 0.01).abs() < 1e-9);
        assert!((d[1] + 0.01).abs() < 1e-9);
        assert!((d[2] - 0.01).abs() < 1e-7);
    }

    #[test]
    fn zero_input_zero_direction() {
        let mut st = AdamState::new(2);
        for _ in 0..5 {
            assert_eq!(st.scale(&[0.0, 0.0], 0.1, &AdamSettings::default()).as_slice(), &[0.0, 0.0]);
        }
    }
}
