//! Communication availability processes.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Marks a missing local action (agent stopped) in history tokens.
pub const NO_ACTION: u32 = u32::MAX;

/// Availability as a function of the true joint history.
///
/// The history is flattened per past step as the joint state index followed
/// by each agent's executed local action ([`NO_ACTION`] once stopped).
pub type HistoryFn = Arc<dyn Fn(&[u32]) -> bool + Send + Sync>;

/// When the agents can share their states.
#[derive(Clone)]
pub enum CommModel {
    /// Always available.
    Full,
    /// Available before step `t`, lost from then on.
    LossAt(usize),
    /// Lost at each step with probability `p` and never recovered.
    BernoulliPersistent(f64),
    /// Unavailable at each step with probability `q`, independently.
    BernoulliIntermittent(f64),
    /// Available at step `t` iff `schedule[t]`; available past the end.
    Schedule(Vec<bool>),
    /// Available while the function returns true; lost for good on the
    /// first false.
    History(HistoryFn),
}

impl fmt::Debug for CommModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl CommModel {
    /// No communication at all.
    pub fn none() -> Self {
        CommModel::LossAt(0)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CommModel::BernoulliPersistent(p) | CommModel::BernoulliIntermittent(p) if !(0.0..=1.0).contains(&p) => {
                Err(Error::InvalidParameter(format!(
                    "communication probability {p} outside [0, 1]"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Short human-readable name, stable across runs.
    pub fn label(&self) -> String {
        match self {
            CommModel::Full => "full".into(),
            CommModel::LossAt(t) => format!("loss-at-{t}"),
            CommModel::BernoulliPersistent(p) => format!("persistent-p{p}"),
            CommModel::BernoulliIntermittent(q) => format!("intermittent-q{q}"),
            CommModel::Schedule(s) => {
                let bits: String = s.iter().map(|&b| if b { '1' } else { '0' }).collect();
                format!("schedule-{bits}")
            }
            CommModel::History(_) => "history".into(),
        }
    }

    /// Whether the channel can be lost for good (imaginary play) rather than
    /// recovering (intermittent execution). Only matters for bookkeeping.
    fn persistent_loss(&self) -> bool {
        matches!(self, CommModel::BernoulliPersistent(_) | CommModel::History(_))
    }

    /// Outcomes at step `t` as `(available, lost afterwards, probability)`,
    /// given whether the channel was already lost.
    pub(crate) fn branches(&self, t: usize, lost: bool, history: impl FnOnce() -> Vec<u32>) -> Vec<(bool, bool, f64)> {
        if lost && self.persistent_loss() {
            return vec![(false, true, 1.0)];
        }
        let mut out = match self {
            CommModel::Full => vec![(true, false, 1.0)],
            CommModel::LossAt(at) => vec![(t < *at, t >= *at, 1.0)],
            CommModel::BernoulliPersistent(p) => vec![(true, false, 1.0 - p), (false, true, *p)],
            CommModel::BernoulliIntermittent(q) => vec![(true, false, 1.0 - q), (false, false, *q)],
            CommModel::Schedule(s) => vec![(s.get(t).copied().unwrap_or(true), false, 1.0)],
            CommModel::History(f) => {
                let up = f(&history());
                vec![(up, !up, 1.0)]
            }
        };
        out.retain(|&(_, _, p)| p > 0.0);
        out
    }

    /// Draws the availability at step `t` from `u` uniform in `[0, 1)`.
    pub(crate) fn sample(&self, t: usize, lost: &mut bool, u: f64, history: impl FnOnce() -> Vec<u32>) -> bool {
        let branches = self.branches(t, *lost, history);
        let mut acc = 0.0;
        for &(up, now_lost, p) in &branches {
            acc += p;
            if u < acc {
                *lost = now_lost;
                return up;
            }
        }
        let &(up, now_lost, _) = branches.last().expect("at least one branch");
        *lost = now_lost;
        up
    }
}

/// History function labelling every history with an independent fair-ish
/// coin derived from `seed`; available with probability `p_available`.
pub fn random_history_fn(seed: u64, p_available: f64) -> HistoryFn {
    let threshold = (p_available.clamp(0.0, 1.0) * u64::MAX as f64) as u64;
    Arc::new(move |history: &[u32]| {
        let mut h = splitmix(seed ^ 0x9e37_79b9_7f4a_7c15);
        h = splitmix(h ^ history.len() as u64);
        for &token in history {
            h = splitmix(h ^ u64::from(token));
        }
        h < threshold
    })
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
