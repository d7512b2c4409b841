use serde::{Deserialize, Serialize};

use super::MlpParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &MlpParams) -> Self {
        Self::with_len(config, params.param_count())
    }

    /// State for a flat vector of `d` parameters.
    pub fn with_len(config: AdamConfig, d: usize) -> Self {
        Self {
            config,
            t: 0,
            m: vec![0.0; d],
            v: vec![0.0; d],
        }
    }

    pub fn step(&mut self, params: &mut MlpParams, grad: &MlpParams) {
        self.update(params.values_mut().zip(grad.values()));
    }

    pub fn step_slice(&mut self, params: &mut [f64], grad: &[f64]) {
        self.update(params.iter_mut().zip(grad));
    }

    fn update<'a>(&mut self, pairs: impl Iterator<Item = (&'a mut f64, &'a f64)>) {
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        let moments = self.m.iter_mut().zip(self.v.iter_mut());
        for ((p, g), (m, v)) in pairs.zip(moments) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::mlp_init;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = mlp_init(3, 4, 2, 0).unwrap();
        let before = p.clone();
        let g = p.zeros_like();
        let mut opt = Adam::new(AdamConfig::default(), &p);
        for _ in 0..10 {
            opt.step(&mut p, &g);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_closed_form() {
        let mut p = mlp_init(2, 3, 1, 0).unwrap();
        let before = p.clone();
        let mut g = p.zeros_like();
        for (k, v) in g.values_mut().enumerate() {
            *v = if k % 2 == 0 { 0.3 } else { -2.0 };
        }
        let cfg = AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        };
        let mut opt = Adam::new(cfg, &p);
        opt.step(&mut p, &g);
        // m_hat = g, v_hat = g^2, so the step is -lr g / (|g| + eps)
        for ((after, b), gk) in p.values().zip(before.values()).zip(g.values()) {
            let expected = b - cfg.lr * gk / (gk.abs() + cfg.eps);
            assert!((after - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_runs_identical_trajectories() {
        let run = || {
            let mut p = mlp_init(2, 3, 1, 9).unwrap();
            let mut opt = Adam::new(AdamConfig::default(), &p);
            for s in 0..20 {
                let mut g = p.zeros_like();
                for (k, v) in g.values_mut().enumerate() {
                    *v = ((k * 7 + s) as f64).sin();
                }
                opt.step(&mut p, &g);
            }
            p
        };
        assert_eq!(run(), run());
    }
}
