//! Optimizers over flat parameter vectors.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
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

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("adam lr {} invalid", self.lr)));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::InvalidConfig(
                "adam betas must lie strictly in (0, 1)".into(),
            ));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig("adam eps must be > 0".into()));
        }
        Ok(())
    }
}

/// Adam moment accumulators for one flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    cfg: AdamConfig,
}

impl AdamState {
    pub fn new(param_len: usize, cfg: AdamConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            m: vec![0.0; param_len],
            v: vec![0.0; param_len],
            t: 0,
            cfg,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Adjusts the learning rate mid-run (for schedules); moments keep.
    pub fn set_lr(&mut self, lr: f64) {
        self.cfg.lr = lr;
    }

    /// Moment vectors `(m, v)`, mostly for tests.
    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    /// One bias-corrected Adam update in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam state len {} vs params {} / grads {}",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite gradient at coordinate {i}"
            )));
        }
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Plain SGD update: `p -= lr * g`.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::ShapeMismatch(format!(
            "sgd params {} vs grads {}",
            params.len(),
            grads.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite gradient at coordinate {i}"
        )));
    }
    for (p, g) in params.iter_mut().zip(grads.iter()) {
        *p -= lr * g;
    }
    Ok(())
}

/// Which optimizer a training loop should use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Sgd { lr: f64 },
    Adam(AdamConfig),
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam(AdamConfig::default())
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerConfig::Sgd { lr } => {
                if !(lr.is_finite() && *lr >= 0.0) {
                    return Err(Error::InvalidConfig(format!("sgd lr {lr} invalid")));
                }
                Ok(())
            }
            OptimizerConfig::Adam(cfg) => cfg.validate(),
        }
    }

    /// Learning rate currently configured, whichever the optimizer.
    pub fn lr(&self) -> f64 {
        match self {
            OptimizerConfig::Sgd { lr } => *lr,
            OptimizerConfig::Adam(cfg) => cfg.lr,
        }
    }

    /// Returns a copy with the learning rate replaced.
    pub fn with_lr(self, lr: f64) -> Self {
        match self {
            OptimizerConfig::Sgd { .. } => OptimizerConfig::Sgd { lr },
            OptimizerConfig::Adam(cfg) => OptimizerConfig::Adam(AdamConfig { lr, ..cfg }),
        }
    }

    pub fn init(&self, param_len: usize) -> Result<OptimizerState> {
        self.validate()?;
        Ok(match self {
            OptimizerConfig::Sgd { lr } => OptimizerState::Sgd { lr: *lr },
            OptimizerConfig::Adam(cfg) => OptimizerState::Adam(AdamState::new(param_len, *cfg)?),
        })
    }
}

/// Mutable optimizer state over one flat parameter vector.
#[derive(Debug, Clone)]
pub enum OptimizerState {
    Sgd { lr: f64 },
    Adam(AdamState),
}

impl OptimizerState {
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        match self {
            OptimizerState::Sgd { lr } => sgd_step(params, grads, *lr),
            OptimizerState::Adam(state) => state.step(params, grads),
        }
    }

    pub fn set_lr(&mut self, new_lr: f64) {
        match self {
            OptimizerState::Sgd { lr } => *lr = new_lr,
            OptimizerState::Adam(state) => state.set_lr(new_lr),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_are_a_fixed_point() {
        let mut params = vec![1.0, -2.5, 0.75];
        let snapshot = params.clone();
        let mut state = AdamState::new(3, AdamConfig::default()).unwrap();
        for _ in 0..10 {
            state.step(&mut params, &[0.0, 0.0, 0.0]).unwrap();
        }
        assert_eq!(params, snapshot);
        let (m, v) = state.moments();
        assert!(m.iter().all(|&x| x == 0.0));
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn first_step_is_roughly_lr() {
        // Hand evaluation at t=1 with g=1: m_hat = 1, v_hat = 1, so the
        // update is lr / (1 + eps).
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let mut params = vec![0.3];
        let mut state = AdamState::new(1, cfg).unwrap();
        state.step(&mut params, &[1.0]).unwrap();
        let decrease = 0.3 - params[0];
        assert!((decrease - 0.1).abs() < 1e-6, "decrease = {decrease}");
    }

    #[test]
    fn deterministic_across_replays() {
        let cfg = AdamConfig::default();
        let run = || {
            let mut params = vec![0.5, -0.25];
            let mut state = AdamState::new(2, cfg).unwrap();
            for k in 0..20 {
                let g = [0.1 * (k as f64 + 1.0), -0.05];
                state.step(&mut params, &g).unwrap();
            }
            params
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_non_finite_gradients() {
        let mut params = vec![0.0];
        let mut state = AdamState::new(1, AdamConfig::default()).unwrap();
        assert!(state.step(&mut params, &[f64::NAN]).is_err());
        assert!(sgd_step(&mut params, &[f64::INFINITY], 0.1).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        assert!(AdamState::new(1, AdamConfig { beta1: 1.0, ..AdamConfig::default() }).is_err());
        assert!(AdamState::new(1, AdamConfig { lr: f64::NAN, ..AdamConfig::default() }).is_err());
    }

    #[test]
    fn optimizer_config_json_round_trip() {
        let cfg = OptimizerConfig::Adam(AdamConfig::default());
        let js = serde_json::to_string(&cfg).unwrap();
        let back: OptimizerConfig = serde_json::from_str(&js).unwrap();
        assert_eq!(cfg, back);
        let sgd: OptimizerConfig = serde_json::from_str(r#"{"sgd":{"lr":0.05}}"#).unwrap();
        assert_eq!(sgd, OptimizerConfig::Sgd { lr: 0.05 });
    }
}
