//! Decision environment: one slot per second, one flat action vector in
//! `[-1, 1]^d` per slot.
//!
//! The decoder turns that vector into a complete allocation in which every
//! structural rule holds by construction: each (bs, subchannel) pair serves
//! at most one of that station's own users, per-channel powers respect the
//! station budget, every chain position lands on exactly one existing VM
//! within node memory budgets, and every separated hop picks exactly one
//! candidate route. What remains soft, and is graded into the reward, are
//! the service guarantees: per-slice rate floors, per-user delay budgets,
//! and robust link capacity.
//!
//! Observations carry the current channel magnitudes, residual link
//! bandwidth and node CPU left by the previous slot's allocation, and the
//! current demand realizations. Residual node CPU is an extension beyond the
//! minimum observable set; it gives the core half of the decision the same
//! kind of congestion signal the radio half gets from channel magnitudes.
//! All entries are shifted and scaled by statistics gathered from a fixed
//! number of warm-up draws at build time.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::corenet::{
    self, check_node_capacity, check_placement_structure, check_route_structure, DelayBreakdown,
    Placement, Routing, SfcChain, VmId,
};
use crate::economics;
use crate::radio::{
    self, check_assignment_ownership, check_power_budget, check_subchannel_exclusivity,
    ChannelState, RadioAllocation, UserId,
};
use crate::scenario::Scenario;
use crate::topology::NodeId;

const WARMUP_DRAWS: usize = 1000;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode is over; reset before stepping")]
    EpisodeOver,
    #[error("allocation rejected: {0}")]
    MalformedAllocation(String),
    #[error("action has {got} entries, layout needs {want}")]
    ActionSize { got: usize, want: usize },
}

/// Complete per-slot decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub radio: RadioAllocation,
    pub placement: Placement,
    pub routing: Routing,
}

// ---------------------------------------------------------------------------
// Action layout
// ---------------------------------------------------------------------------

/// Fixed geometry of the flat action vector:
///
/// ```text
/// [ powers        I*K                 ]  scaled to [0, p_max/K] each
/// [ user select   I*K*user_slots      ]  argmax; last slot means idle
/// [ placement     C*F*(N*V)           ]  argmax over (node, vm), RAM-masked
/// [ routing       C*(F-1)*k_paths     ]  argmax over candidate routes
/// ```
///
/// `F` is the longest chain over all slices; users with shorter chains
/// simply never read their trailing blocks. `user_slots` is the largest
/// per-station population plus the idle slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionLayout {
    pub n_bs: usize,
    pub n_subchannels: usize,
    pub user_slots: usize,
    pub n_users: usize,
    pub chain_slots: usize,
    pub n_nodes: usize,
    pub vms_per_node: usize,
    pub k_paths: usize,
    pub off_select: usize,
    pub off_place: usize,
    pub off_route: usize,
    pub dim: usize,
}

impl ActionLayout {
    pub fn for_scenario(scn: &Scenario) -> Self {
        let n_bs = scn.radio.n_bs;
        let n_subchannels = scn.radio.n_subchannels;
        let user_slots = scn.radio.max_users_per_bs() + 1;
        let n_users = scn.n_users();
        let chain_slots = scn.max_chain_len();
        let n_nodes = scn.graph.node_count();
        let vms_per_node = scn.cfg.vms_per_node;
        let k_paths = scn.cfg.k_paths;

        let off_select = n_bs * n_subchannels;
        let off_place = off_select + n_bs * n_subchannels * user_slots;
        let off_route = off_place + n_users * chain_slots * n_nodes * vms_per_node;
        let dim = off_route + n_users * chain_slots.saturating_sub(1) * k_paths;
        ActionLayout {
            n_bs,
            n_subchannels,
            user_slots,
            n_users,
            chain_slots,
            n_nodes,
            vms_per_node,
            k_paths,
            off_select,
            off_place,
            off_route,
            dim,
        }
    }

    pub fn power_idx(&self, bs: usize, k: usize) -> usize {
        bs * self.n_subchannels + k
    }

    pub fn select_range(&self, bs: usize, k: usize) -> std::ops::Range<usize> {
        let start = self.off_select + (bs * self.n_subchannels + k) * self.user_slots;
        start..start + self.user_slots
    }

    pub fn place_range(&self, user: usize, j: usize) -> std::ops::Range<usize> {
        let block = self.n_nodes * self.vms_per_node;
        let start = self.off_place + (user * self.chain_slots + j) * block;
        start..start + block
    }

    pub fn route_range(&self, user: usize, j: usize) -> std::ops::Range<usize> {
        let start = self.off_route + (user * (self.chain_slots - 1) + j) * self.k_paths;
        start..start + self.k_paths
    }

    /// Boundary between the radio-facing prefix (powers + user selection)
    /// and the core-facing suffix (placement + routing); the split the
    /// two-agent variant trains across.
    pub fn radio_prefix_len(&self) -> usize {
        self.off_place
    }
}

/// First index holding the largest value: ties go to the lowest index.
fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut at = 0;
    for (i, v) in values.enumerate() {
        if v > best {
            best = v;
            at = i;
        }
    }
    at
}

fn clamp_unit(x: f64) -> f64 {
    debug_assert!(x.is_finite(), "action entries must be finite");
    x.clamp(-1.0, 1.0)
}

/// Decodes a flat action vector into a structurally valid allocation.
pub fn decode_action(scn: &Scenario, layout: &ActionLayout, action: &[f64]) -> Allocation {
    assert_eq!(action.len(), layout.dim, "action length mismatch");
    let users_by_bs = scn.users_by_bs();
    let per_channel_cap = scn.radio.p_max_w / layout.n_subchannels as f64;

    let mut radio_alloc = RadioAllocation::empty(layout.n_bs, layout.n_subchannels);
    for bs in 0..layout.n_bs {
        let pool = &users_by_bs[bs];
        for k in 0..layout.n_subchannels {
            // candidate slots: this station's users in id order, then idle
            let sel = &action[layout.select_range(bs, k)];
            let idle_slot = layout.user_slots - 1;
            let pick = argmax_first(
                pool.iter()
                    .enumerate()
                    .map(|(slot, _)| clamp_unit(sel[slot]))
                    .chain(std::iter::once(clamp_unit(sel[idle_slot]))),
            );
            if pick < pool.len() {
                radio_alloc.assign[bs][k] = Some(pool[pick]);
                let a = clamp_unit(action[layout.power_idx(bs, k)]);
                radio_alloc.power_w[bs][k] = (a + 1.0) / 2.0 * per_channel_cap;
            }
        }
        // per-channel caps already bound the sum by p_max; this guard only
        // matters if the cap rule ever changes
        let total: f64 = radio_alloc.power_w[bs].iter().sum();
        if total > scn.radio.p_max_w {
            let scale = scn.radio.p_max_w / total;
            for p in &mut radio_alloc.power_w[bs] {
                *p *= scale;
            }
        }
    }

    // placement: greedy argmax over (node, vm) with nodes at their memory
    // budget masked out; earlier users consume budget first
    let ram_cap = (scn.cfg.node_ram_mb / scn.cfg.vnf_ram_mb)
        .min(scn.cfg.node_storage_mb / scn.cfg.vnf_storage_mb)
        .floor() as usize;
    let mut occupancy = vec![0usize; layout.n_nodes];
    let mut placement = Vec::with_capacity(layout.n_users);
    for user in 0..layout.n_users {
        let chain_len = scn.chain_of(user).len();
        let mut row = Vec::with_capacity(chain_len);
        for j in 0..chain_len {
            let logits = &action[layout.place_range(user, j)];
            let masked = argmax_first(logits.iter().enumerate().map(|(idx, &v)| {
                let node = idx / layout.vms_per_node;
                if occupancy[node] >= ram_cap {
                    f64::NEG_INFINITY
                } else {
                    clamp_unit(v)
                }
            }));
            // every node full can only happen if the scenario-level capacity
            // check was bypassed; fall back to the unmasked choice
            let idx = if occupancy.iter().all(|&o| o >= ram_cap) {
                argmax_first(logits.iter().map(|&v| clamp_unit(v)))
            } else {
                masked
            };
            let node = idx / layout.vms_per_node;
            occupancy[node] += 1;
            row.push(VmId {
                node: NodeId(node),
                vm: idx % layout.vms_per_node,
            });
        }
        placement.push(row);
    }
    let placement = Placement { vm: placement };

    let mut routing = Vec::with_capacity(layout.n_users);
    for user in 0..layout.n_users {
        let vms = &placement.vm[user];
        let mut row = Vec::with_capacity(vms.len().saturating_sub(1));
        for j in 0..vms.len().saturating_sub(1) {
            let (a, b) = (vms[j].node, vms[j + 1].node);
            if a == b {
                row.push(None);
            } else {
                let n_routes = scn.paths.paths(a, b).len().min(layout.k_paths);
                let logits = &action[layout.route_range(user, j)];
                let pick = argmax_first(logits[..n_routes].iter().map(|&v| clamp_unit(v)));
                row.push(Some(pick));
            }
        }
        routing.push(row);
    }

    Allocation {
        radio: radio_alloc,
        placement,
        routing: Routing { path: routing },
    }
}

/// Inverse of [`decode_action`] for structurally valid allocations: the
/// returned vector decodes back to `alloc` (powers up to rounding). Blocks
/// the decoder never reads are left at -1.
pub fn encode_allocation(scn: &Scenario, layout: &ActionLayout, alloc: &Allocation) -> Vec<f64> {
    let mut action = vec![-1.0; layout.dim];
    let users_by_bs = scn.users_by_bs();
    let per_channel_cap = scn.radio.p_max_w / layout.n_subchannels as f64;

    for bs in 0..layout.n_bs {
        for k in 0..layout.n_subchannels {
            let sel_range = layout.select_range(bs, k);
            match alloc.radio.assign[bs][k] {
                Some(u) => {
                    let slot = users_by_bs[bs]
                        .iter()
                        .position(|&x| x == u)
                        .expect("assigned user must belong to this station");
                    action[sel_range.start + slot] = 1.0;
                    let p = alloc.radio.power_w[bs][k];
                    action[layout.power_idx(bs, k)] = 2.0 * (p / per_channel_cap) - 1.0;
                }
                None => {
                    action[sel_range.end - 1] = 1.0;
                }
            }
        }
    }
    for (user, vms) in alloc.placement.vm.iter().enumerate() {
        for (j, vm) in vms.iter().enumerate() {
            let range = layout.place_range(user, j);
            action[range.start + vm.node.index() * layout.vms_per_node + vm.vm] = 1.0;
        }
        for (j, sel) in alloc.routing.path[user].iter().enumerate() {
            if let Some(idx) = sel {
                let range = layout.route_range(user, j);
                action[range.start + idx] = 1.0;
            }
        }
    }
    action
}

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

/// Per-entry shift and scale fitted on warm-up draws. Entries that never
/// moved during warm-up keep scale 1 so later deviations stay visible.
#[derive(Debug, Clone)]
pub struct ObsNorm {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl ObsNorm {
    fn fit(samples: &[Vec<f64>]) -> Self {
        let dim = samples[0].len();
        let n = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            for (m, &x) in mean.iter_mut().zip(s) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for s in samples {
            for ((v, &m), &x) in var.iter_mut().zip(&mean).zip(s) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .iter()
            .map(|&v| {
                let sd = (v / n).sqrt();
                if sd < 1e-12 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        ObsNorm { mean, scale }
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((&x, &m), &s)| (x - m) / s)
            .collect()
    }
}

/// Outcome of evaluating one allocation against the current slot state.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub reward: f64,
    /// Total utility in $ across slices.
    pub utility: f64,
    pub slice_utility: Vec<f64>,
    pub revenue: Vec<f64>,
    pub cost: Vec<f64>,
    /// Guaranteed rate summed over slices, bps.
    pub sum_rate_bps: f64,
    pub served_users: usize,
    pub delays: Vec<DelayBreakdown>,
    pub violations: Vec<Violation>,
    /// Tightest signed slack per constraint family:
    /// [rate floor, delay budget, link capacity].
    pub worst_slack: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    RateFloor,
    DelayBudget,
    LinkCapacity,
}

impl ConstraintKind {
    pub fn label(self) -> &'static str {
        match self {
            ConstraintKind::RateFloor => "rate_floor",
            ConstraintKind::DelayBudget => "delay_budget",
            ConstraintKind::LinkCapacity => "link_capacity",
        }
    }
}

/// One violated service guarantee. `amount` is how far past the limit the
/// allocation landed (positive), `normalized` is that amount over the
/// constraint's own scale, saturated at [`NORMALIZED_CAP`].
#[derive(Debug, Clone)]
pub struct Violation {
    pub kind: ConstraintKind,
    /// Slice, user, or link index depending on `kind`.
    pub index: usize,
    pub amount: f64,
    pub normalized: f64,
}

/// Ceiling on a single violation's normalized size. A starved user's delay
/// overshoot grows like 1/rate and would otherwise dwarf every other term
/// in the penalty; past 10x over budget the allocation is equally worthless
/// either way.
pub const NORMALIZED_CAP: f64 = 10.0;

/// Result of advancing the environment one slot.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub eval: Evaluation,
    /// Observation of the next slot (normalized).
    pub obs: Vec<f64>,
    pub done: bool,
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

pub struct SliceEnv {
    scn: Arc<Scenario>,
    layout: ActionLayout,
    norm: ObsNorm,
    rng: ChaCha12Rng,
    t: usize,
    done: bool,
    channels: ChannelState,
    demand_bps: Vec<f64>,
    link_residual_bps: Vec<f64>,
    node_residual_cycles: Vec<f64>,
    history: Vec<(Vec<f64>, Vec<f64>)>,
    cur_obs: Vec<f64>,
}

impl SliceEnv {
    pub fn new(scn: Arc<Scenario>) -> Self {
        let layout = ActionLayout::for_scenario(&scn);
        let norm = Self::fit_norm(&scn);
        let mut env = SliceEnv {
            layout,
            norm,
            rng: ChaCha12Rng::seed_from_u64(0),
            t: 0,
            done: false,
            channels: radio::realize_channels(
                &scn.radio,
                &mut ChaCha12Rng::seed_from_u64(0),
            ),
            demand_bps: vec![0.0; scn.n_users()],
            link_residual_bps: Vec::new(),
            node_residual_cycles: Vec::new(),
            history: Vec::new(),
            cur_obs: Vec::new(),
            scn,
        };
        env.reset(0);
        env
    }

    /// Normalization statistics from fresh-state draws; tied to the scenario
    /// seed so every environment over the same scenario agrees.
    fn fit_norm(scn: &Scenario) -> ObsNorm {
        let mut rng =
            ChaCha12Rng::seed_from_u64(scn.cfg.scenario_seed ^ 0x9e37_79b9_7f4a_7c15);
        let full_links: Vec<f64> = scn
            .graph
            .links()
            .iter()
            .map(|l| l.bandwidth_bps)
            .collect();
        let full_nodes: Vec<f64> = scn.nodes.iter().map(|n| n.cpu_cycles_per_s).collect();
        let samples: Vec<Vec<f64>> = (0..WARMUP_DRAWS)
            .map(|_| {
                let ch = radio::realize_channels(&scn.radio, &mut rng);
                let demands: Vec<f64> =
                    scn.demands.iter().map(|d| d.sample(&mut rng)).collect();
                raw_observation(scn, &ch, &demands, &full_links, &full_nodes)
            })
            .collect();
        ObsNorm::fit(&samples)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scn
    }

    pub fn layout(&self) -> &ActionLayout {
        &self.layout
    }

    pub fn action_dim(&self) -> usize {
        self.layout.dim
    }

    pub fn obs_dim(&self) -> usize {
        obs_dim(&self.scn)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Channel estimates of the current slot.
    pub fn channels(&self) -> &ChannelState {
        &self.channels
    }

    /// Demand realizations of the current slot, bps per user.
    pub fn demands(&self) -> &[f64] {
        &self.demand_bps
    }

    pub fn current_obs(&self) -> &[f64] {
        &self.cur_obs
    }

    /// Starts a fresh episode. All slot randomness derives from `seed`.
    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = ChaCha12Rng::seed_from_u64(seed);
        self.t = 0;
        self.done = false;
        self.history.clear();
        self.link_residual_bps = self
            .scn
            .graph
            .links()
            .iter()
            .map(|l| l.bandwidth_bps)
            .collect();
        self.node_residual_cycles = self
            .scn
            .nodes
            .iter()
            .map(|n| n.cpu_cycles_per_s)
            .collect();
        self.draw_slot();
        self.cur_obs = self.normalized_obs();
        self.cur_obs.clone()
    }

    fn draw_slot(&mut self) {
        self.channels = radio::realize_channels(&self.scn.radio, &mut self.rng);
        self.demand_bps = self
            .scn
            .demands
            .iter()
            .map(|d| d.sample(&mut self.rng))
            .collect();
    }

    fn normalized_obs(&self) -> Vec<f64> {
        self.norm.apply(&raw_observation(
            &self.scn,
            &self.channels,
            &self.demand_bps,
            &self.link_residual_bps,
            &self.node_residual_cycles,
        ))
    }

    pub fn decode(&self, action: &[f64]) -> Result<Allocation, EnvError> {
        if action.len() != self.layout.dim {
            return Err(EnvError::ActionSize {
                got: action.len(),
                want: self.layout.dim,
            });
        }
        Ok(decode_action(&self.scn, &self.layout, action))
    }

    /// Grades an allocation against the current slot without advancing.
    pub fn evaluate(&self, alloc: &Allocation) -> Result<Evaluation, EnvError> {
        self.check_structure(alloc)?;
        Ok(self.grade(alloc))
    }

    /// Decodes, grades, advances. The decoded allocation never fails the
    /// structural check.
    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        let alloc = self.decode(action)?;
        let eval = self.grade(&alloc);
        Ok(self.advance(action.to_vec(), &alloc, eval))
    }

    /// Like [`SliceEnv::step`] but for an externally built allocation (the
    /// greedy baseline, enumeration); the equivalent action vector is
    /// recorded into the history.
    pub fn step_allocation(&mut self, alloc: &Allocation) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        self.check_structure(alloc)?;
        let eval = self.grade(alloc);
        let action = encode_allocation(&self.scn, &self.layout, alloc);
        Ok(self.advance(action, alloc, eval))
    }

    fn advance(&mut self, action: Vec<f64>, alloc: &Allocation, eval: Evaluation) -> StepOutcome {
        self.history.push((self.cur_obs.clone(), action));

        // next slot's residuals reflect what this slot consumed
        let loads = corenet::link_loads(
            &alloc.routing,
            &alloc.placement,
            &self.scn.paths,
            self.scn.graph.link_count(),
            |u| self.scn.demands[u].max_bps(),
        );
        self.link_residual_bps = self
            .scn
            .graph
            .links()
            .iter()
            .zip(&loads)
            .map(|(l, &ld)| l.bandwidth_bps - ld)
            .collect();
        let mut cycles = vec![0.0; self.scn.graph.node_count()];
        for (user, vms) in alloc.placement.vm.iter().enumerate() {
            let chain = self.scn.chain_of(user);
            let bits = self.scn.packet_bits_of(user);
            for (&f, vm) in chain.vnfs.iter().zip(vms) {
                cycles[vm.node.index()] += bits * self.scn.cfg.vnf_cycles_per_bit[f];
            }
        }
        self.node_residual_cycles = self
            .scn
            .nodes
            .iter()
            .zip(&cycles)
            .map(|(n, &c)| n.cpu_cycles_per_s - c)
            .collect();

        self.t += 1;
        self.done = self.t >= self.scn.cfg.episode_len;
        self.draw_slot();
        self.cur_obs = self.normalized_obs();
        StepOutcome {
            eval,
            obs: self.cur_obs.clone(),
            done: self.done,
        }
    }

    /// Last `window` (observation, action) pairs, oldest first, zero-padded
    /// at the front to a fixed length.
    pub fn observe_history(&self, window: usize) -> Vec<f64> {
        let (od, ad) = (self.obs_dim(), self.action_dim());
        let pair = od + ad;
        let mut out = vec![0.0; window * pair];
        let take = self.history.len().min(window);
        let start = self.history.len() - take;
        for (slot, (o, a)) in self.history[start..].iter().enumerate() {
            let base = (window - take + slot) * pair;
            out[base..base + od].copy_from_slice(o);
            out[base + od..base + pair].copy_from_slice(a);
        }
        out
    }

    pub fn history(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.history
    }

    fn check_structure(&self, alloc: &Allocation) -> Result<(), EnvError> {
        let scn = &self.scn;
        let reject = |msg: &str| Err(EnvError::MalformedAllocation(msg.into()));
        if alloc.radio.n_bs() != scn.radio.n_bs
            || alloc.radio.n_subchannels() != scn.radio.n_subchannels
        {
            return reject("radio grid shape mismatch");
        }
        if !check_assignment_ownership(&scn.radio, &alloc.radio) {
            return reject("subchannel assigned to a foreign or unknown user");
        }
        if !check_subchannel_exclusivity(&alloc.radio) {
            return reject("subchannel exclusivity or power placement violated");
        }
        if !check_power_budget(&scn.radio, &alloc.radio) {
            return reject("per-station power budget exceeded");
        }
        let chains: Vec<&SfcChain> = (0..scn.n_users()).map(|u| scn.chain_of(u)).collect();
        if !check_placement_structure(&alloc.placement, &chains, &scn.nodes) {
            return reject("placement shape or VM id out of range");
        }
        if !check_node_capacity(
            &alloc.placement,
            &scn.nodes,
            scn.cfg.vnf_ram_mb,
            scn.cfg.vnf_storage_mb,
        ) {
            return reject("node memory budget exceeded");
        }
        if !check_route_structure(&alloc.routing, &alloc.placement, &scn.paths) {
            return reject("route selection inconsistent with placement");
        }
        Ok(())
    }

    fn grade(&self, alloc: &Allocation) -> Evaluation {
        let scn = &self.scn;
        let slice_rates = radio::worst_case_slice_rates(&scn.radio, &self.channels, &alloc.radio);
        let sum_rate_bps = slice_rates.iter().sum();

        let mut delays = Vec::with_capacity(scn.n_users());
        for u in 0..scn.n_users() {
            let (ran_prop, ran_trans) = radio::ran_delays(
                &scn.radio,
                &self.channels,
                &alloc.radio,
                scn.packet_bits_of(u),
                UserId(u),
            );
            let chain = scn.chain_of(u);
            let vms = &alloc.placement.vm[u];
            let route = &alloc.routing.path[u];
            delays.push(DelayBreakdown {
                ran_prop,
                ran_trans,
                processing: corenet::processing_delay(
                    chain,
                    vms,
                    &scn.cfg.vnf_cycles_per_bit,
                    scn.packet_bits_of(u),
                    &scn.nodes,
                ),
                core_prop: corenet::core_prop_delay(route, vms, &scn.paths, &scn.graph),
                core_trans: corenet::core_trans_delay(
                    route,
                    vms,
                    &scn.paths,
                    &scn.graph,
                    self.demand_bps[u],
                ),
            });
        }

        let revenue = economics::revenue(&slice_rates, &scn.prices);
        let ran_cost = economics::ran_cost(&scn.radio, &alloc.radio, &scn.prices);
        let core_cost = economics::core_cost(
            &alloc.placement,
            &alloc.routing,
            &scn.chains,
            &scn.radio.user_slice,
            &scn.cfg.packet_bits,
            &scn.cfg.vnf_cycles_per_bit,
            &scn.paths,
            &scn.prices,
        );
        let cost: Vec<f64> = ran_cost
            .iter()
            .zip(&core_cost)
            .map(|(&a, &b)| a + b)
            .collect();
        let (slice_utility, utility) = economics::utility(&revenue, &cost, &scn.prices);

        let mut violations = Vec::new();
        let mut worst_slack = [f64::INFINITY; 3];

        // rate floors, owed only by slices that have subscribers
        let floor_slack =
            radio::rate_floor_slack(&scn.radio, &self.channels, &alloc.radio, &scn.cfg.rmin_bps_hz);
        for s in scn.populated_slices() {
            let slack = floor_slack[s];
            worst_slack[0] = worst_slack[0].min(slack);
            if slack < 0.0 {
                let scale = (scn.cfg.rmin_bps_hz[s] * scn.radio.subchannel_bw_hz).max(1e-9);
                violations.push(Violation {
                    kind: ConstraintKind::RateFloor,
                    index: s,
                    amount: -slack,
                    normalized: (-slack / scale).min(NORMALIZED_CAP),
                });
            }
        }

        for (u, d) in delays.iter().enumerate() {
            let budget = scn.tau_max_of(u);
            let slack = budget - d.total();
            worst_slack[1] = worst_slack[1].min(slack);
            if slack < 0.0 {
                violations.push(Violation {
                    kind: ConstraintKind::DelayBudget,
                    index: u,
                    amount: -slack,
                    normalized: (-slack / budget).min(NORMALIZED_CAP),
                });
            }
        }

        let cap_slack = corenet::link_capacity_slack(
            &alloc.routing,
            &alloc.placement,
            &scn.demands,
            &scn.paths,
            &scn.graph,
        );
        for (li, &slack) in cap_slack.iter().enumerate() {
            worst_slack[2] = worst_slack[2].min(slack);
            if slack < 0.0 {
                violations.push(Violation {
                    kind: ConstraintKind::LinkCapacity,
                    index: li,
                    amount: -slack,
                    normalized: (-slack / scn.graph.link(li).bandwidth_bps).min(NORMALIZED_CAP),
                });
            }
        }

        let penalty: f64 = violations.iter().map(|v| v.normalized).sum();
        let reward = scn.cfg.reward_coeff * utility - scn.cfg.penalty_weight * penalty;

        Evaluation {
            reward,
            utility,
            slice_utility,
            revenue,
            cost,
            sum_rate_bps,
            served_users: alloc.radio.served_user_count(),
            delays,
            violations,
            worst_slack,
        }
    }
}

pub fn obs_dim(scn: &Scenario) -> usize {
    scn.radio.n_bs * scn.n_users() * scn.radio.n_subchannels
        + scn.graph.link_count()
        + scn.n_users()
        + scn.graph.node_count()
}

/// Residual capacities enter as fractions of the full capacity so every
/// feature is O(1); raw bit and cycle counts would dwarf the z-scored
/// channel and demand terms and blow up freshly initialized critics.
fn raw_observation(
    scn: &Scenario,
    channels: &ChannelState,
    demand_bps: &[f64],
    link_residual_bps: &[f64],
    node_residual_cycles: &[f64],
) -> Vec<f64> {
    let mut v = Vec::with_capacity(obs_dim(scn));
    v.extend(channels.magnitudes());
    v.extend(
        link_residual_bps
            .iter()
            .zip(scn.graph.links())
            .map(|(&r, l)| r / l.bandwidth_bps),
    );
    v.extend_from_slice(demand_bps);
    v.extend(
        node_residual_cycles
            .iter()
            .zip(&scn.nodes)
            .map(|(&r, n)| r / n.cpu_cycles_per_s),
    );
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use rand::Rng;

    fn desk_env() -> SliceEnv {
        let scn = Scenario::generate(&ScenarioConfig::desk()).unwrap();
        SliceEnv::new(Arc::new(scn))
    }

    fn random_action(env: &SliceEnv, rng: &mut impl Rng) -> Vec<f64> {
        (0..env.action_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn layout_dimensions() {
        let env = desk_env();
        let scn = env.scenario();
        let l = env.layout();
        let (i, k, c) = (2usize, 4usize, 6usize);
        let slots = scn.radio.max_users_per_bs() + 1;
        let f = scn.max_chain_len();
        let (n, v, kp) = (4usize, 2usize, 2usize);
        assert_eq!(
            l.dim,
            i * k + i * k * slots + c * f * n * v + c * (f - 1) * kp
        );
        assert_eq!(
            env.obs_dim(),
            i * c * k + scn.graph.link_count() + c + n
        );
        assert_eq!(env.current_obs().len(), env.obs_dim());
        assert_eq!(l.radio_prefix_len(), i * k + i * k * slots);
    }

    #[test]
    fn random_decodes_are_structurally_sound() {
        let env = desk_env();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0x5eed);
        for _ in 0..200 {
            let action = random_action(&env, &mut rng);
            let alloc = env.decode(&action).unwrap();
            // evaluate() re-runs every structural checker
            env.evaluate(&alloc).unwrap();
        }
    }

    #[test]
    fn all_positive_powers_hit_the_budget_exactly() {
        let env = desk_env();
        let action = vec![1.0; env.action_dim()];
        let alloc = env.decode(&action).unwrap();
        for bs in 0..2 {
            let total: f64 = alloc.radio.power_w[bs].iter().sum();
            assert!((total - env.scenario().radio.p_max_w).abs() < 1e-12);
            for &p in &alloc.radio.power_w[bs] {
                assert!((p - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn equal_logits_pick_first_user() {
        let env = desk_env();
        let action = vec![0.0; env.action_dim()];
        let alloc = env.decode(&action).unwrap();
        let users = env.scenario().users_by_bs();
        for (bs, pool) in users.iter().enumerate() {
            for k in 0..4 {
                assert_eq!(alloc.radio.assign[bs][k], Some(pool[0]));
            }
        }
    }

    #[test]
    fn idle_slot_leaves_channel_dark() {
        let env = desk_env();
        let layout = env.layout().clone();
        let mut action = vec![0.0; env.action_dim()];
        let r = layout.select_range(0, 2);
        action[r.end - 1] = 1.0; // idle slot wins
        let alloc = env.decode(&action).unwrap();
        assert_eq!(alloc.radio.assign[0][2], None);
        assert_eq!(alloc.radio.power_w[0][2], 0.0);
        assert!(alloc.radio.assign[0][1].is_some());
    }

    #[test]
    fn encode_decode_round_trip() {
        let env = desk_env();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a = random_action(&env, &mut rng);
            let alloc = env.decode(&a).unwrap();
            let encoded = encode_allocation(env.scenario(), env.layout(), &alloc);
            let back = env.decode(&encoded).unwrap();
            assert_eq!(back.radio.assign, alloc.radio.assign);
            assert_eq!(back.placement, alloc.placement);
            assert_eq!(back.routing, alloc.routing);
            for (brow, arow) in back.radio.power_w.iter().zip(&alloc.radio.power_w) {
                for (&bp, &ap) in brow.iter().zip(arow) {
                    assert!((bp - ap).abs() <= 1e-12 * ap.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn feasible_reward_is_scaled_utility() {
        let env = desk_env();
        let action = vec![1.0; env.action_dim()];
        let alloc = env.decode(&action).unwrap();
        let eval = env.evaluate(&alloc).unwrap();
        if eval.violations.is_empty() {
            let expect = env.scenario().cfg.reward_coeff * eval.utility;
            assert!((eval.reward - expect).abs() < 1e-12);
        }
        // full power on every channel serves someone everywhere
        assert!(eval.served_users >= 2);
        assert!(eval.sum_rate_bps > 0.0);
    }

    #[test]
    fn dark_radio_violates_rate_floors_and_goes_negative() {
        let env = desk_env();
        let layout = env.layout().clone();
        let mut action = vec![0.0; env.action_dim()];
        for bs in 0..layout.n_bs {
            for k in 0..layout.n_subchannels {
                let r = layout.select_range(bs, k);
                action[r.end - 1] = 1.0; // all idle
            }
        }
        let alloc = env.decode(&action).unwrap();
        assert_eq!(alloc.radio.served_user_count(), 0);
        let eval = env.evaluate(&alloc).unwrap();
        let floors = eval
            .violations
            .iter()
            .filter(|v| v.kind == ConstraintKind::RateFloor)
            .count();
        assert_eq!(floors, env.scenario().populated_slices().len());
        assert!(eval.reward < 0.0);
        // every populated slice owes its whole floor: normalized amount 1
        for v in &eval.violations {
            if v.kind == ConstraintKind::RateFloor {
                assert!((v.normalized - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn episode_ends_and_stepping_past_errors() {
        let mut env = desk_env();
        env.reset(3);
        let action = vec![0.5; env.action_dim()];
        let t_max = env.scenario().cfg.episode_len;
        for t in 0..t_max {
            let out = env.step(&action).unwrap();
            assert_eq!(out.done, t + 1 == t_max);
        }
        assert!(matches!(env.step(&action), Err(EnvError::EpisodeOver)));
        env.reset(4);
        assert!(env.step(&action).is_ok());
    }

    #[test]
    fn same_seed_same_trajectory() {
        let scn = Arc::new(Scenario::generate(&ScenarioConfig::desk()).unwrap());
        let mut a = SliceEnv::new(Arc::clone(&scn));
        let mut b = SliceEnv::new(Arc::clone(&scn));
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(21);
        let o1 = a.reset(9);
        let o2 = b.reset(9);
        assert_eq!(o1, o2);
        for _ in 0..5 {
            let act = random_action(&a, &mut rng);
            let ra = a.step(&act).unwrap();
            let rb = b.step(&act).unwrap();
            assert_eq!(ra.eval.reward, rb.eval.reward);
            assert_eq!(ra.obs, rb.obs);
        }
        // different seed diverges
        let mut c = SliceEnv::new(scn);
        let o3 = c.reset(10);
        assert_ne!(o1, o3);
    }

    #[test]
    fn warmup_normalization_centers_fresh_draws() {
        let mut env = desk_env();
        // channel entries: mean near 0, sd near 1 across resets
        let n_ch = env.scenario().radio.n_bs
            * env.scenario().n_users()
            * env.scenario().radio.n_subchannels;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        let reps = 200;
        for seed in 0..reps {
            let obs = env.reset(seed);
            for &x in &obs[..n_ch] {
                acc += x;
                acc2 += x * x;
            }
        }
        let n = (reps as usize * n_ch) as f64;
        let mean = acc / n;
        let var = acc2 / n - mean * mean;
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((var - 1.0).abs() < 0.25, "var {var}");
    }

    #[test]
    fn residual_features_react_to_load() {
        let mut env = desk_env();
        let obs0 = env.reset(5);
        let act = vec![1.0; env.action_dim()];
        let out = env.step(&act).unwrap();
        let scn = env.scenario();
        let n_ch = scn.radio.n_bs * scn.n_users() * scn.radio.n_subchannels;
        let links = scn.graph.link_count();
        let nodes = scn.graph.node_count();
        // at reset the residual block sits exactly at its warm-up constant
        for &x in &obs0[n_ch..n_ch + links] {
            assert_eq!(x, 0.0);
        }
        let node_block =
            &out.obs[n_ch + links + scn.n_users()..n_ch + links + scn.n_users() + nodes];
        // some node lost CPU to placed chains
        assert!(node_block.iter().any(|&x| x < 0.0));
    }

    #[test]
    fn history_window_pads_in_front() {
        let mut env = desk_env();
        env.reset(1);
        let pair = env.obs_dim() + env.action_dim();
        let act = vec![0.3; env.action_dim()];
        let h0 = env.observe_history(4);
        assert_eq!(h0.len(), 4 * pair);
        assert!(h0.iter().all(|&x| x == 0.0));

        env.step(&act).unwrap();
        env.step(&act).unwrap();
        let h2 = env.observe_history(4);
        assert!(h2[..2 * pair].iter().all(|&x| x == 0.0));
        assert!(h2[2 * pair..].iter().any(|&x| x != 0.0));

        // window shorter than history keeps the newest entries
        let h1 = env.observe_history(1);
        assert_eq!(&h1[..], &h2[3 * pair..]);
    }

    #[test]
    fn malformed_allocations_are_rejected() {
        let env = desk_env();
        let scn = env.scenario();
        let good = env.decode(&vec![0.7; env.action_dim()]).unwrap();

        let mut foreign = good.clone();
        // hand user 0's grant to a user of the other station
        let other_bs_user = scn.users_by_bs()[1][0];
        foreign.radio.assign[0][0] = Some(other_bs_user);
        assert!(matches!(
            env.evaluate(&foreign),
            Err(EnvError::MalformedAllocation(_))
        ));

        let mut hot = good.clone();
        hot.radio.power_w[0][0] = scn.radio.p_max_w * 2.0;
        assert!(matches!(
            env.evaluate(&hot),
            Err(EnvError::MalformedAllocation(_))
        ));

        let mut silly = good;
        silly.routing.path[0] = vec![Some(999); silly.routing.path[0].len()];
        assert!(matches!(
            env.evaluate(&silly),
            Err(EnvError::MalformedAllocation(_))
        ));
    }

    #[test]
    fn wrong_action_size_is_an_error() {
        let mut env = desk_env();
        assert!(matches!(
            env.step(&[0.0; 3]),
            Err(EnvError::ActionSize { got: 3, .. })
        ));
    }

    #[test]
    fn delay_totals_decompose() {
        let env = desk_env();
        let alloc = env.decode(&vec![0.9; env.action_dim()]).unwrap();
        let eval = env.evaluate(&alloc).unwrap();
        for d in &eval.delays {
            let total = d.ran_prop + d.ran_trans + d.processing + d.core_prop + d.core_trans;
            assert!((d.total() - total).abs() <= 1e-12 * total.max(1.0));
        }
    }
}
