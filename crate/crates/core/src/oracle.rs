//! Exhaustive search over a discretized action space. On a hand-sized
//! instance it grades every combination of scheduling, power level,
//! placement, and routing with the same evaluator the environment uses,
//! so the best feasible utility it returns bounds what any allocator can
//! earn from those choices.

use thiserror::Error;

use crate::config::{GraphSource, ScenarioConfig};
use crate::corenet::{Placement, Routing, VmId};
use crate::env::{Allocation, SliceEnv};
use crate::radio::{RadioAllocation, UserId};
use crate::topology::NodeId;

/// Refuse to grind through more combinations than this.
pub const ENUMERATION_CAP: u128 = 10_000_000;

/// Transmit power fractions of the per-channel budget tried on every
/// assigned subchannel. Idle channels carry zero.
pub const POWER_LEVELS: [f64; 3] = [1.0 / 3.0, 2.0 / 3.0, 1.0];

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{combinations} combinations exceed the enumeration cap of {cap}")]
    TooLarge { combinations: u128, cap: u128 },
    #[error("no enumerated allocation satisfies every constraint")]
    NothingFeasible,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Best utility over the feasible enumerated allocations.
    pub utility: f64,
    /// Environment reward of that same allocation.
    pub reward: f64,
    pub allocation: Allocation,
    pub evaluated: u64,
    pub feasible: u64,
    /// Best reward over every enumerated allocation, infeasible ones
    /// included (those pay the violation penalty).
    pub best_reward_any: f64,
}

/// Counts the full combination space; `None` means past any sane cap.
fn combination_count(env: &SliceEnv) -> Option<u128> {
    let scn = env.scenario();
    let k = scn.radio.n_subchannels;
    let mut total: u128 = 1;
    for bs in 0..scn.radio.n_bs {
        let m = 1 + 3 * scn.radio.users_of_bs(bs).count() as u128;
        for _ in 0..k {
            total = total.checked_mul(m)?;
        }
    }
    let nv = (scn.graph.node_count() * scn.cfg.vms_per_node) as u128;
    let kp = scn.cfg.k_paths.max(1) as u128;
    for user in 0..scn.n_users() {
        let len = scn.chain_of(user).len() as u32;
        total = total.checked_mul(nv.checked_pow(len)?)?;
        for _ in 1..len {
            total = total.checked_mul(kp)?;
        }
    }
    Some(total)
}

struct Search<'a> {
    env: &'a SliceEnv,
    pools: Vec<Vec<UserId>>,
    /// Flattened `(user, position)` placement jobs, user-major and in
    /// chain order so each user's VM list builds front to back.
    jobs: Vec<(usize, usize)>,
    chain_lens: Vec<usize>,
    n_nodes: usize,
    vms_per_node: usize,
    slot_cap: usize,
    k_paths: usize,
    per_channel_w: f64,
    evaluated: u64,
    feasible: u64,
    best_reward_any: f64,
    best: Option<(f64, f64, Allocation)>,
}

impl Search<'_> {
    fn walk_radio(&mut self, radio: &mut RadioAllocation, d: usize) {
        let (n_bs, k) = (radio.n_bs(), radio.n_subchannels());
        if d == n_bs * k {
            let mut vm = vec![Vec::new(); self.chain_lens.len()];
            let mut occupancy = vec![0usize; self.n_nodes];
            self.walk_place(radio, &mut vm, &mut occupancy, 0);
            return;
        }
        let (bs, ch) = (d / k, d % k);
        radio.assign[bs][ch] = None;
        radio.power_w[bs][ch] = 0.0;
        self.walk_radio(radio, d + 1);
        let pool = self.pools[bs].clone();
        for user in pool {
            radio.assign[bs][ch] = Some(user);
            for level in POWER_LEVELS {
                radio.power_w[bs][ch] = level * self.per_channel_w;
                self.walk_radio(radio, d + 1);
            }
        }
        radio.assign[bs][ch] = None;
        radio.power_w[bs][ch] = 0.0;
    }

    fn walk_place(
        &mut self,
        radio: &RadioAllocation,
        vm: &mut Vec<Vec<VmId>>,
        occupancy: &mut [usize],
        j: usize,
    ) {
        if j == self.jobs.len() {
            let placement = Placement { vm: vm.clone() };
            self.walk_routes(radio, &placement);
            return;
        }
        let (user, _) = self.jobs[j];
        for node in 0..self.n_nodes {
            if occupancy[node] >= self.slot_cap {
                continue;
            }
            occupancy[node] += 1;
            for v in 0..self.vms_per_node {
                vm[user].push(VmId { node: NodeId(node), vm: v });
                self.walk_place(radio, vm, occupancy, j + 1);
                vm[user].pop();
            }
            occupancy[node] -= 1;
        }
    }

    fn walk_routes(&mut self, radio: &RadioAllocation, placement: &Placement) {
        // hops between distinct nodes choose a path; co-located hops stay None
        let mut hops = Vec::new();
        {
            let paths = &self.env.scenario().paths;
            for (user, &len) in self.chain_lens.iter().enumerate() {
                for h in 0..len.saturating_sub(1) {
                    let (a, b) = (placement.vm[user][h].node, placement.vm[user][h + 1].node);
                    if a != b {
                        let n = paths.paths(a, b).len().min(self.k_paths);
                        if n == 0 {
                            return; // no route can realize this placement
                        }
                        hops.push((user, h, n));
                    }
                }
            }
        }
        let mut routing = Routing {
            path: self.chain_lens.iter().map(|&l| vec![None; l.saturating_sub(1)]).collect(),
        };
        self.walk_hop(radio, placement, &mut routing, &hops, 0);
    }

    fn walk_hop(
        &mut self,
        radio: &RadioAllocation,
        placement: &Placement,
        routing: &mut Routing,
        hops: &[(usize, usize, usize)],
        i: usize,
    ) {
        if i == hops.len() {
            self.grade(radio, placement, routing);
            return;
        }
        let (user, h, n) = hops[i];
        for choice in 0..n {
            routing.path[user][h] = Some(choice);
            self.walk_hop(radio, placement, routing, hops, i + 1);
        }
        routing.path[user][h] = None;
    }

    fn grade(&mut self, radio: &RadioAllocation, placement: &Placement, routing: &Routing) {
        let alloc = Allocation {
            radio: radio.clone(),
            placement: placement.clone(),
            routing: routing.clone(),
        };
        let ev = self
            .env
            .evaluate(&alloc)
            .expect("enumerated allocations are structurally valid");
        self.evaluated += 1;
        self.best_reward_any = self.best_reward_any.max(ev.reward);
        if !ev.violations.is_empty() {
            return;
        }
        self.feasible += 1;
        if self.best.as_ref().is_none_or(|(u, ..)| ev.utility > *u) {
            self.best = Some((ev.utility, ev.reward, alloc));
        }
    }
}

/// Grades every combination for the environment's current slot and returns
/// the best feasible one.
pub fn enumerate_best(env: &SliceEnv) -> Result<OracleResult, OracleError> {
    let combinations = combination_count(env).unwrap_or(u128::MAX);
    if combinations > ENUMERATION_CAP {
        return Err(OracleError::TooLarge { combinations, cap: ENUMERATION_CAP });
    }
    let scn = env.scenario();
    let slot_cap = (scn.cfg.node_ram_mb / scn.cfg.vnf_ram_mb)
        .min(scn.cfg.node_storage_mb / scn.cfg.vnf_storage_mb)
        .floor() as usize;
    let mut search = Search {
        env,
        pools: (0..scn.radio.n_bs)
            .map(|b| scn.radio.users_of_bs(b).collect())
            .collect(),
        jobs: (0..scn.n_users())
            .flat_map(|u| (0..scn.chain_of(u).len()).map(move |p| (u, p)))
            .collect(),
        chain_lens: (0..scn.n_users()).map(|u| scn.chain_of(u).len()).collect(),
        n_nodes: scn.graph.node_count(),
        vms_per_node: scn.cfg.vms_per_node,
        slot_cap,
        k_paths: scn.cfg.k_paths,
        per_channel_w: scn.radio.p_max_w / scn.radio.n_subchannels as f64,
        evaluated: 0,
        feasible: 0,
        best_reward_any: f64::NEG_INFINITY,
        best: None,
    };
    let mut radio = RadioAllocation::empty(scn.radio.n_bs, scn.radio.n_subchannels);
    search.walk_radio(&mut radio, 0);

    let (utility, reward, allocation) =
        search.best.ok_or(OracleError::NothingFeasible)?;
    Ok(OracleResult {
        utility,
        reward,
        allocation,
        evaluated: search.evaluated,
        feasible: search.feasible,
        best_reward_any: search.best_reward_any,
    })
}

/// Hand-sized instances with room in every constraint, small enough for the
/// search to sweep in well under a minute.
pub fn tiny(variant: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::paper();
    cfg.users = 2;
    cfg.base_stations = 1;
    cfg.subchannels = 2;
    cfg.area_m = 120.0;
    cfg.episode_len = 1;
    cfg.graph = GraphSource::Synthetic { nodes: 3 };
    cfg.vms_per_node = 1;
    cfg.k_paths = 2;
    cfg.node_cpu_cycles_per_s = 4.0e8;
    cfg.chains = vec![vec![0], vec![1], vec![0, 1]];
    cfg.rmin_bps_hz = vec![0.05, 0.05, 0.05];
    cfg.tau_max_ms = vec![500.0, 500.0, 500.0];
    cfg.demand_mean_mbps = vec![1.0, 1.0, 1.0];
    cfg.scenario_seed = 11;
    match variant {
        0 => {}
        1 => {
            // three single-user slices need a channel each to be servable
            cfg.users = 3;
            cfg.subchannels = 3;
            cfg.scenario_seed = 22;
            cfg.demand_mean_mbps = vec![2.0, 1.0, 0.5];
        }
        2 => {
            cfg.subchannels = 3;
            cfg.p_max_w = 2.0;
            cfg.scenario_seed = 33;
            cfg.revenue_per_mbps = vec![3.0, 1.0, 0.5];
        }
        other => panic!("only three hand-sized variants exist, asked for {other}"),
    }
    cfg
}
