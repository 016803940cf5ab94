//! First-order optimizers over named parameter groups, so the circuit angles
//! and the observables can each carry their own update rule and learning rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ANGLES_GROUP: &str = "angles";
pub const OBSERVABLES_GROUP: &str = "observables";

fn default_decay() -> f64 {
    0.99
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    /// Plain RMSProp: no momentum, no centering.
    Rmsprop {
        #[serde(default = "default_decay")]
        decay: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

impl OptimizerKind {
    pub fn rmsprop() -> Self {
        OptimizerKind::Rmsprop { decay: default_decay(), eps: default_eps() }
    }

    pub fn adam() -> Self {
        OptimizerKind::Adam { beta1: default_beta1(), beta2: default_beta2(), eps: default_eps() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        let positive = |v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("eps must be positive, got {v}")))
            }
        };
        match *self {
            OptimizerKind::Sgd => Ok(()),
            OptimizerKind::Rmsprop { decay, eps } => {
                unit("decay", decay)?;
                positive(eps)
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                unit("beta1", beta1)?;
                unit("beta2", beta2)?;
                positive(eps)
            }
        }
    }
}

/// Optimizer choice for one group, as it appears in experiment configs:
/// `{"kind": "rmsprop", "lr": 0.01}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    #[serde(flatten)]
    pub kind: OptimizerKind,
    pub lr: f64,
}

impl GroupConfig {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        GroupConfig { kind, lr }
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        // Zero is allowed: it freezes the group while keeping it in the loop.
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be non-negative, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    pub name: String,
    pub values: Vec<f64>,
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    steps: u64,
}

impl ParamGroup {
    pub fn new(name: impl Into<String>, values: Vec<f64>, config: GroupConfig) -> Result<Self> {
        config.validate()?;
        let n = values.len();
        Ok(ParamGroup {
            name: name.into(),
            values,
            kind: config.kind,
            learning_rate: config.lr,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            steps: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, grads: &[f64]) -> Result<()> {
        if grads.len() != self.values.len() {
            return Err(Error::validation(format!(
                "group '{}' has {} values but got {} gradients",
                self.name,
                self.values.len(),
                grads.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite gradient at index {i} of group '{}'",
                self.name
            )));
        }
        self.steps += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (v, g) in self.values.iter_mut().zip(grads) {
                    *v -= lr * g;
                }
            }
            OptimizerKind::Rmsprop { decay, eps } => {
                for ((v, s), g) in self.values.iter_mut().zip(&mut self.second_moment).zip(grads) {
                    *s = decay * *s + (1.0 - decay) * g * g;
                    *v -= lr * g / (s.sqrt() + eps);
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.steps as i32;
                let bias1 = 1.0 - beta1.powi(t);
                let bias2 = 1.0 - beta2.powi(t);
                for (((v, m), u), g) in self
                    .values
                    .iter_mut()
                    .zip(&mut self.first_moment)
                    .zip(&mut self.second_moment)
                    .zip(grads)
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *u = beta2 * *u + (1.0 - beta2) * g * g;
                    let m_hat = *m / bias1;
                    let u_hat = *u / bias2;
                    *v -= lr * m_hat / (u_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

/// Optimizer setup for a training run. `observables` is absent when the
/// observables are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSetup {
    pub angles: GroupConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observables: Option<GroupConfig>,
}

impl OptimizerSetup {
    /// RMSProp at 1e-2 on the angles only.
    pub fn fixed() -> Self {
        OptimizerSetup { angles: GroupConfig::new(OptimizerKind::rmsprop(), 1e-2), observables: None }
    }

    /// One RMSProp at 1e-2 for both groups.
    pub fn shared() -> Self {
        let g = GroupConfig::new(OptimizerKind::rmsprop(), 1e-2);
        OptimizerSetup { angles: g, observables: Some(g) }
    }

    /// RMSProp at 1e-2 for the angles, Adam at 1e-1 for the observables.
    pub fn separate() -> Self {
        OptimizerSetup {
            angles: GroupConfig::new(OptimizerKind::rmsprop(), 1e-2),
            observables: Some(GroupConfig::new(OptimizerKind::adam(), 1e-1)),
        }
    }

    pub fn named(&self) -> Vec<(String, GroupConfig)> {
        let mut out = vec![(ANGLES_GROUP.to_string(), self.angles)];
        if let Some(o) = self.observables {
            out.push((OBSERVABLES_GROUP.to_string(), o));
        }
        out
    }
}

/// Builds one group per `(name, config, initial values)` entry. Names must be
/// distinct and drawn from `angles` / `observables`.
pub fn make_groups(specs: Vec<(String, GroupConfig, Vec<f64>)>) -> Result<Vec<ParamGroup>> {
    if specs.is_empty() {
        return Err(Error::config("no parameter groups configured"));
    }
    let mut groups: Vec<ParamGroup> = Vec::with_capacity(specs.len());
    for (name, config, values) in specs {
        if name != ANGLES_GROUP && name != OBSERVABLES_GROUP {
            return Err(Error::config(format!("unknown parameter group '{name}'")));
        }
        if groups.iter().any(|g| g.name == name) {
            return Err(Error::config(format!("duplicate parameter group '{name}'")));
        }
        groups.push(ParamGroup::new(name, values, config)?);
    }
    Ok(groups)
}
