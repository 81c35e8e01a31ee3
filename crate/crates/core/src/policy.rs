use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_TOL: f64 = 1e-9;

/// Stationary joint policy: one distribution over joint actions per product
/// joint state. Terminal states are handled by the game (end action), so
/// their rows are never consulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPolicy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl JointPolicy {
    pub fn from_rows(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        let policy = Self {
            num_states,
            num_actions,
            probs,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    pub fn deterministic(num_states: usize, num_actions: usize, choose: impl Fn(usize) -> usize) -> Self {
        let mut probs = vec![0.0; num_states * num_actions];
        for s in 0..num_states {
            probs[s * num_actions + choose(s)] = 1.0;
        }
        Self {
            num_states,
            num_actions,
            probs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.len() != self.num_states * self.num_actions {
            return Err(Error::InvalidModel(format!(
                "policy has {} entries, expected {}",
                self.probs.len(),
                self.num_states * self.num_actions
            )));
        }
        for s in 0..self.num_states {
            let row = self.row(s);
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidModel(format!("policy row {s} has a negative entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidModel(format!("policy row {s} sums to {total}")));
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.num_actions + a]
    }

    /// Inverse-CDF draw with `u` uniform in `[0, 1)`.
    pub fn sample(&self, s: usize, u: f64) -> usize {
        let row = self.row(s);
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (a, &p) in row.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last_positive = a;
                if u < acc {
                    return a;
                }
            }
        }
        last_positive
    }

    /// Positive-probability actions at `s`.
    pub fn support(&self, s: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row(s).iter().copied().enumerate().filter(|&(_, p)| p > 0.0)
    }

    /// CSV with columns `joint_state, joint_action, prob`, positive entries
    /// only.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["joint_state", "joint_action", "prob"])?;
        for s in 0..self.num_states {
            for (a, p) in self.support(s) {
                w.write_record([s.to_string(), a.to_string(), format!("{p:.17e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(num_states: usize, num_actions: usize, input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Entry {
            joint_state: usize,
            joint_action: usize,
            prob: f64,
        }
        let mut probs = vec![0.0; num_states * num_actions];
        for entry in csv::Reader::from_reader(input).deserialize() {
            let e: Entry = entry?;
            if e.joint_state >= num_states || e.joint_action >= num_actions {
                return Err(Error::IndexOutOfRange {
                    what: "policy entry",
                    index: e.joint_state * num_actions + e.joint_action,
                    bound: probs.len(),
                });
            }
            probs[e.joint_state * num_actions + e.joint_action] = e.prob;
        }
        Self::from_rows(num_states, num_actions, probs)
    }
}
