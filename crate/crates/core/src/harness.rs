//! Experiment driver: axis sweeps across allocators and seeds, CSV export,
//! signaling-overhead accounting, and a gradient self-check. Jobs fan out
//! over a thread pool; results come back in a deterministic order.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::agents::{evaluate, train, Algorithm, EpisodeStats, EvalSummary};
use crate::config::ScenarioConfig;
use crate::env::SliceEnv;
use crate::nn::{max_rel_err, numeric_grad, LstmCell, Mlp, OutputActivation};
use crate::scenario::{BuildError, Scenario};

// ---------------------------------------------------------------------------
// Sweep axes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// User population.
    Users,
    /// Demand uncertainty bound, percent.
    Demand,
    /// Channel estimation error bound, percent.
    Csi,
    /// Delay budget applied to every slice, milliseconds.
    Delay,
    /// Rate floor applied to every slice, bps/Hz.
    Rmin,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 5] = [
        SweepAxis::Users,
        SweepAxis::Demand,
        SweepAxis::Csi,
        SweepAxis::Delay,
        SweepAxis::Rmin,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Users => "users",
            SweepAxis::Demand => "demand",
            SweepAxis::Csi => "csi",
            SweepAxis::Delay => "delay",
            SweepAxis::Rmin => "rmin",
        }
    }

    /// Points this axis visits, from the sweep lists in the config.
    pub fn values(self, cfg: &ScenarioConfig) -> Vec<f64> {
        match self {
            SweepAxis::Users => cfg.sweep_users.iter().map(|&u| u as f64).collect(),
            SweepAxis::Demand => cfg.sweep_demand_pct.clone(),
            SweepAxis::Csi => cfg.sweep_csi_pct.clone(),
            SweepAxis::Delay => cfg.sweep_delay_ms.clone(),
            SweepAxis::Rmin => cfg.sweep_rmin_bps_hz.clone(),
        }
    }

    /// A copy of the config with this axis pinned to `value`.
    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut c = cfg.clone();
        match self {
            SweepAxis::Users => c.users = value.round() as usize,
            SweepAxis::Demand => c.demand_bound = value / 100.0,
            SweepAxis::Csi => c.csi_bound = value / 100.0,
            SweepAxis::Delay => c.tau_max_ms = vec![value; c.slice_count],
            SweepAxis::Rmin => c.rmin_bps_hz = vec![value; c.slice_count],
        }
        c
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| format!("unknown sweep axis {s:?} (users|demand|csi|delay|rmin)"))
    }
}

// ---------------------------------------------------------------------------
// Sweep execution
// ---------------------------------------------------------------------------

/// One (axis value, allocator, seed) cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepJobResult {
    pub value: f64,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub summary: EvalSummary,
    pub curve: Vec<EpisodeStats>,
}

/// Trains and evaluates every (value, allocator, seed) combination. The
/// heuristic needs no training, so its jobs only play evaluation episodes.
/// Jobs run in parallel; the returned order is value-major, then allocator,
/// then seed.
pub fn run_sweep(
    cfg: &ScenarioConfig,
    axis: SweepAxis,
    algos: &[Algorithm],
    seeds: &[u64],
) -> Result<Vec<SweepJobResult>, BuildError> {
    let mut jobs = Vec::new();
    for value in axis.values(cfg) {
        let point_cfg = axis.apply(cfg, value);
        let scn = Arc::new(Scenario::generate(&point_cfg)?);
        for &algo in algos {
            for &seed in seeds {
                jobs.push((jobs.len(), value, Arc::clone(&scn), algo, seed));
            }
        }
    }
    let agent_cfg = cfg.agent.clone();
    let eval_episodes = cfg.eval_episodes;
    let mut results: Vec<(usize, SweepJobResult)> = jobs
        .into_par_iter()
        .map(|(order, value, scn, algorithm, seed)| {
            let mut env = SliceEnv::new(scn);
            let episodes = match algorithm {
                Algorithm::Greedy => 0,
                _ => agent_cfg.episodes,
            };
            let trained = train(algorithm, &mut env, &agent_cfg, episodes, seed);
            let summary = evaluate(&trained.agent, &mut env, eval_episodes, seed);
            (
                order,
                SweepJobResult { value, algorithm, seed, summary, curve: trained.curve },
            )
        })
        .collect();
    results.sort_by_key(|(order, _)| *order);
    Ok(results.into_iter().map(|(_, r)| r).collect())
}

/// Mean reward over the last tenth of a learning curve.
pub fn final_decile_mean(curve: &[EpisodeStats]) -> f64 {
    if curve.is_empty() {
        return f64::NAN;
    }
    let take = curve.len().div_ceil(10);
    let tail = &curve[curve.len() - take..];
    tail.iter().map(|s| s.reward).sum::<f64>() / take as f64
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

pub fn write_sweep_csv(
    path: &Path,
    axis: SweepAxis,
    rows: &[SweepJobResult],
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "axis,value,algorithm,seed,reward,utility,sum_rate_bps,served_users,violations"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            axis,
            r.value,
            r.algorithm,
            r.seed,
            r.summary.reward,
            r.summary.utility,
            r.summary.sum_rate_bps,
            r.summary.served_users,
            r.summary.violations
        )?;
    }
    w.flush()
}

pub fn write_curves_csv(
    path: &Path,
    axis: SweepAxis,
    rows: &[SweepJobResult],
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "axis,value,algorithm,seed,episode,reward,utility,sum_rate_bps,served_users,violations"
    )?;
    for r in rows {
        for s in &r.curve {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                axis,
                r.value,
                r.algorithm,
                r.seed,
                s.episode,
                s.reward,
                s.utility,
                s.sum_rate_bps,
                s.served_users,
                s.violations
            )?;
        }
    }
    w.flush()
}

// ---------------------------------------------------------------------------
// Signaling overhead
// ---------------------------------------------------------------------------

/// Bits per reported scalar in the control plane.
pub const BITS_PER_SCALAR: u64 = 16;

/// Control-plane traffic a decision round costs, in bits. The radio domain
/// reports one channel coefficient per (cell, user, subchannel); the core
/// domain reports one state word per VM and per link. A centralized
/// controller needs both; each local agent only its own side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignalingOverhead {
    pub ran_bits: u64,
    pub core_bits: u64,
}

impl SignalingOverhead {
    pub fn total_bits(&self) -> u64 {
        self.ran_bits + self.core_bits
    }
}

pub fn signaling_overhead(scn: &Scenario) -> SignalingOverhead {
    let ran = scn.radio.n_bs * scn.n_users() * scn.radio.n_subchannels;
    let core = scn.graph.node_count() * scn.cfg.vms_per_node + scn.graph.link_count();
    SignalingOverhead {
        ran_bits: BITS_PER_SCALAR * ran as u64,
        core_bits: BITS_PER_SCALAR * core as u64,
    }
}

// ---------------------------------------------------------------------------
// Gradient self-check
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub label: String,
    pub max_rel_err: f64,
}

/// Compares analytic parameter gradients against central differences
/// (step 1e-5) on randomly shaped networks: even cases are dense stacks,
/// odd cases are recurrent rollouts.
pub fn gradient_check(cases: usize, seed: u64) -> Vec<GradCheckCase> {
    (0..cases)
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(i as u64));
            if i % 2 == 0 {
                dense_case(i, &mut rng)
            } else {
                recurrent_case(i, &mut rng)
            }
        })
        .collect()
}

fn dense_case(i: usize, rng: &mut ChaCha12Rng) -> GradCheckCase {
    let in_dim = rng.gen_range(2..5);
    let layers = rng.gen_range(1..3);
    let hidden: Vec<usize> = (0..layers).map(|_| rng.gen_range(3..8)).collect();
    let out_dim = rng.gen_range(1..4);
    let out_act = if rng.gen_bool(0.5) {
        OutputActivation::Identity
    } else {
        OutputActivation::Tanh
    };
    let net = Mlp::new(in_dim, &hidden, out_dim, out_act, rng);
    let x: Vec<f64> = (0..in_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..out_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let cache = net.forward_cache(&x);
    let (analytic, _) = net.backward(&cache, &w);

    let mut probe = net.clone();
    let mut f = |theta: &[f64]| {
        probe.theta.copy_from_slice(theta);
        probe
            .forward(&x)
            .iter()
            .zip(&w)
            .map(|(&o, &wv)| o * wv)
            .sum::<f64>()
    };
    let numeric = numeric_grad(&mut f, &net.theta, 1e-5);
    GradCheckCase {
        label: format!("dense[{i}] {in_dim}x{hidden:?}x{out_dim} {out_act:?}"),
        max_rel_err: max_rel_err(&analytic, &numeric),
    }
}

fn recurrent_case(i: usize, rng: &mut ChaCha12Rng) -> GradCheckCase {
    let in_dim = rng.gen_range(2..4);
    let hidden = rng.gen_range(3..6);
    let steps = rng.gen_range(3..6);
    let cell = LstmCell::new(in_dim, hidden, rng);
    let xs: Vec<Vec<f64>> = (0..steps)
        .map(|_| (0..in_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let w: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();

    // analytic: cached forward, then a reverse sweep feeding the per-step
    // loss weight into the hidden gradient
    let (mut h, mut c) = cell.zero_state();
    let mut caches = Vec::with_capacity(steps);
    for x in &xs {
        let (h2, c2, cache) = cell.forward_step(x, &h, &c);
        caches.push(cache);
        h = h2;
        c = c2;
    }
    let mut analytic = vec![0.0; cell.param_count()];
    let mut d_h = vec![0.0; hidden];
    let mut d_c = vec![0.0; hidden];
    for t in (0..steps).rev() {
        for (dh, &wv) in d_h.iter_mut().zip(&w) {
            *dh += wv;
        }
        let (_, dh_prev, dc_prev) = cell.backward_step(&caches[t], &d_h, &d_c, &mut analytic);
        d_h = dh_prev;
        d_c = dc_prev;
    }

    let mut probe = cell.clone();
    let mut f = |theta: &[f64]| {
        probe.theta.copy_from_slice(theta);
        probe
            .forward_sequence(&xs)
            .iter()
            .map(|hs| hs.iter().zip(&w).map(|(&a, &b)| a * b).sum::<f64>())
            .sum::<f64>()
    };
    let numeric = numeric_grad(&mut f, &cell.theta, 1e-5);
    GradCheckCase {
        label: format!("recurrent[{i}] {in_dim}->{hidden} over {steps} steps"),
        max_rel_err: max_rel_err(&analytic, &numeric),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_labels_round_trip() {
        for axis in SweepAxis::ALL {
            assert_eq!(axis.label().parse::<SweepAxis>().unwrap(), axis);
        }
        assert!("bogus".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn axis_application_pins_the_right_knob() {
        let cfg = ScenarioConfig::desk();
        assert_eq!(SweepAxis::Users.apply(&cfg, 4.0).users, 4);
        assert_eq!(SweepAxis::Demand.apply(&cfg, 15.0).demand_bound, 0.15);
        assert_eq!(SweepAxis::Csi.apply(&cfg, 6.0).csi_bound, 0.06);
        let d = SweepAxis::Delay.apply(&cfg, 200.0);
        assert_eq!(d.tau_max_ms, vec![200.0; 3]);
        let r = SweepAxis::Rmin.apply(&cfg, 1.4);
        assert_eq!(r.rmin_bps_hz, vec![1.4; 3]);
    }

    #[test]
    fn paper_dimensions_cost_the_expected_bits() {
        let scn = Scenario::generate(&ScenarioConfig::paper()).unwrap();
        let oh = signaling_overhead(&scn);
        assert_eq!(oh.ran_bits, 15_360);
        assert_eq!(oh.core_bits, 1_392);
        assert_eq!(oh.total_bits(), 16_752);
    }

    #[test]
    fn sweep_covers_every_cell_in_order() {
        let mut cfg = ScenarioConfig::desk();
        cfg.episode_len = 4;
        cfg.eval_episodes = 2;
        cfg.sweep_users = vec![2, 4];
        cfg.agent.episodes = 2;
        cfg.agent.warmup_steps = 4;
        cfg.agent.batch = 4;
        cfg.agent.hidden_width = 8;
        cfg.agent.hidden_layers = 1;
        let rows = run_sweep(
            &cfg,
            SweepAxis::Users,
            &[Algorithm::Greedy, Algorithm::Ddpg],
            &[1, 2],
        )
        .unwrap();
        assert_eq!(rows.len(), 2 * 2 * 2);
        let key: Vec<(f64, Algorithm, u64)> =
            rows.iter().map(|r| (r.value, r.algorithm, r.seed)).collect();
        assert_eq!(key[0], (2.0, Algorithm::Greedy, 1));
        assert_eq!(key[1], (2.0, Algorithm::Greedy, 2));
        assert_eq!(key[2], (2.0, Algorithm::Ddpg, 1));
        assert_eq!(key[7], (4.0, Algorithm::Ddpg, 2));
        // the heuristic trains nothing, the learner leaves a curve
        assert!(rows[0].curve.is_empty());
        assert_eq!(rows[2].curve.len(), 2);
        assert!(rows.iter().all(|r| r.summary.reward.is_finite()));
    }

    #[test]
    fn csv_export_writes_one_line_per_row() {
        let mut cfg = ScenarioConfig::desk();
        cfg.episode_len = 3;
        cfg.eval_episodes = 1;
        cfg.sweep_users = vec![2];
        cfg.agent.episodes = 2;
        cfg.agent.warmup_steps = 2;
        cfg.agent.batch = 2;
        cfg.agent.hidden_width = 8;
        cfg.agent.hidden_layers = 1;
        let rows =
            run_sweep(&cfg, SweepAxis::Users, &[Algorithm::Ddpg], &[1]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let sweep_path = dir.path().join("sweep.csv");
        let curve_path = dir.path().join("curves.csv");
        write_sweep_csv(&sweep_path, SweepAxis::Users, &rows).unwrap();
        write_curves_csv(&curve_path, SweepAxis::Users, &rows).unwrap();
        let sweep = std::fs::read_to_string(&sweep_path).unwrap();
        assert_eq!(sweep.lines().count(), 1 + rows.len());
        assert!(sweep.starts_with("axis,value,algorithm,seed,"));
        assert!(sweep.lines().nth(1).unwrap().starts_with("users,2,ddpg,1,"));
        let curves = std::fs::read_to_string(&curve_path).unwrap();
        assert_eq!(curves.lines().count(), 1 + 2);
    }

    #[test]
    fn final_decile_takes_the_tail() {
        let curve: Vec<EpisodeStats> = (0..20)
            .map(|episode| EpisodeStats {
                episode,
                reward: episode as f64,
                utility: 0.0,
                sum_rate_bps: 0.0,
                served_users: 0.0,
                violations: 0.0,
            })
            .collect();
        // last two of twenty
        assert_eq!(final_decile_mean(&curve), 18.5);
        assert!(final_decile_mean(&[]).is_nan());
    }

    #[test]
    fn gradients_stay_near_central_differences() {
        let worst = gradient_check(6, 99)
            .into_iter()
            .map(|c| c.max_rel_err)
            .fold(0.0f64, f64::max);
        assert!(worst <= 1e-4, "worst relative error {worst}");
    }
}
