//! Allocation strategies: four learners and one deterministic heuristic.
//!
//! All learners act on the flat `[-1, 1]` action vector; the environment's
//! decoder owns feasibility. Actor steps are driven by critic input
//! gradients, and every gradient passes a global-norm clip plus the
//! optimizer's non-finite guard before touching parameters.

pub mod buffer;
pub mod ddpg;
pub mod distributed;
pub mod greedy;
pub mod rdpg;
pub mod sac;
pub mod train;

pub use buffer::{Episode, EpisodeBuffer, ReplayBuffer, Transition};
pub use ddpg::Ddpg;
pub use distributed::Distributed;
pub use greedy::greedy_allocate;
pub use rdpg::Rdpg;
pub use sac::Sac;
pub use train::{evaluate, train, AnyAgent, EpisodeStats, EvalSummary, TrainResult};

use std::fmt;
use std::str::FromStr;

/// Ceiling for every gradient's L2 norm before an optimizer step.
pub(crate) const GRAD_CLIP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Greedy,
    Ddpg,
    Rdpg,
    Sac,
    Distributed,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Rdpg,
        Algorithm::Sac,
        Algorithm::Ddpg,
        Algorithm::Distributed,
        Algorithm::Greedy,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Greedy => "greedy",
            Algorithm::Ddpg => "ddpg",
            Algorithm::Rdpg => "rdpg",
            Algorithm::Sac => "sac",
            Algorithm::Distributed => "dist",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "greedy" => Ok(Algorithm::Greedy),
            "ddpg" => Ok(Algorithm::Ddpg),
            "rdpg" => Ok(Algorithm::Rdpg),
            "sac" => Ok(Algorithm::Sac),
            "dist" | "distributed" => Ok(Algorithm::Distributed),
            other => Err(format!(
                "unknown algorithm {other:?} (expected rdpg, sac, ddpg, dist, greedy)"
            )),
        }
    }
}

/// Reward shift/scale applied inside update rules when building TD targets.
/// Identity by default so fixed-point unit checks stay exact.
#[derive(Debug, Clone, Copy)]
pub struct TargetNorm {
    pub mean: f64,
    pub std: f64,
}

impl TargetNorm {
    pub fn identity() -> Self {
        TargetNorm { mean: 0.0, std: 1.0 }
    }

    pub fn apply(&self, r: f64) -> f64 {
        (r - self.mean) / self.std
    }
}

impl Default for TargetNorm {
    fn default() -> Self {
        Self::identity()
    }
}

/// Running mean/std over observed step rewards; hands out the identity until
/// it has seen enough data to trust its own estimate.
#[derive(Debug, Clone, Default)]
pub struct RewardStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RewardStats {
    pub fn push(&mut self, r: f64) {
        self.n += 1;
        let d = r - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (r - self.mean);
    }

    pub fn norm(&self) -> TargetNorm {
        if self.n < 100 {
            return TargetNorm::identity();
        }
        let std = (self.m2 / self.n as f64).sqrt();
        TargetNorm {
            mean: self.mean,
            std: std.max(1e-6),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_labels_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.label().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("distributed".parse::<Algorithm>().unwrap(), Algorithm::Distributed);
        assert!("sarsa".parse::<Algorithm>().is_err());
    }

    #[test]
    fn reward_stats_warm_up_to_the_data() {
        let mut s = RewardStats::default();
        for _ in 0..50 {
            s.push(5.0);
        }
        // not confident yet
        let n = s.norm();
        assert_eq!(n.mean, 0.0);
        assert_eq!(n.std, 1.0);
        for i in 0..100 {
            s.push(if i % 2 == 0 { 4.0 } else { 6.0 });
        }
        let n = s.norm();
        assert!((n.mean - 5.0).abs() < 0.1);
        assert!(n.std > 0.5 && n.std < 1.5);
        assert!(n.apply(5.0).abs() < 0.2);
    }
}
