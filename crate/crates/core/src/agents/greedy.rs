//! Deterministic baseline allocator.
//!
//! Every decision uses a decoupled pessimistic rate: the user's worst-case
//! rate computed as if every other station were transmitting at the equal
//! split `p_max / K` on the same subchannel. That surrogate never depends
//! on what other users hold, so admission decisions cannot invalidate each
//! other, and once all stations fill their grids it coincides with the true
//! worst-case rate.
//!
//! Order of operations:
//!
//! 1. Chains are placed for every user (service or not, each VNF needs a
//!    VM): whole chain onto the least-loaded node with room, spilling VNF
//!    by VNF when no node can hold it all. Hops route over the first
//!    enumerated path whose links still carry the robust demand; if every
//!    candidate path is congested the chain is re-packed onto one node.
//! 2. Rate floors first: while a populated slice sits below its floor in
//!    pessimistic terms, grant the (user, free subchannel) pair with the
//!    highest pessimistic rate among that slice's unserved users. Slices
//!    are visited by normalized deficit, then tariff, and a user enters
//!    only if its delay budget survives the grant.
//! 3. Profit next: remaining unserved users sorted by slice tariff, then
//!    best free gain, each taking its best-gain free subchannel at its
//!    station, skipped entirely if even that channel cannot meet the
//!    user's delay budget (a lesser channel only raises the delay).
//! 4. Surplus last: leftover subchannels go to the already-admitted user
//!    with the best gain, which can only raise rates and shrink delays.
//!
//! Every assigned subchannel transmits at exactly `p_max / K`, so the power
//! budget holds with equality at a full grid.

use crate::corenet::{self, Placement, Routing, VmId};
use crate::env::Allocation;
use crate::radio::{ChannelState, RadioAllocation, UserId};
use crate::scenario::Scenario;
use crate::topology::{NodeId, SIGNAL_SPEED_M_PER_S};

/// Builds one slot's allocation from the current channel estimates and
/// demand realizations.
pub fn greedy_allocate(scn: &Scenario, channels: &ChannelState, demand_bps: &[f64]) -> Allocation {
    assert_eq!(demand_bps.len(), scn.n_users());
    let (placement, routing) = place_and_route(scn);
    let radio = assign_radio(scn, channels, demand_bps, &placement, &routing);
    Allocation {
        radio,
        placement,
        routing,
    }
}

// ---------------------------------------------------------------------------
// Core side
// ---------------------------------------------------------------------------

struct CoreState {
    /// VNF instances committed per node.
    slots_used: Vec<usize>,
    slot_cap: usize,
    /// Processing cycles committed per node, the load order key.
    cycles: Vec<f64>,
    link_residual: Vec<f64>,
}

impl CoreState {
    fn free_slots(&self, node: usize) -> usize {
        self.slot_cap - self.slots_used[node]
    }

    /// Least-loaded node with at least `need` free VNF slots.
    fn pick_node(&self, need: usize) -> Option<usize> {
        (0..self.slots_used.len())
            .filter(|&n| self.free_slots(n) >= need)
            .min_by(|&a, &b| {
                self.cycles[a]
                    .total_cmp(&self.cycles[b])
                    .then(a.cmp(&b))
            })
    }

    fn commit_vnf(&mut self, node: usize, cycles: f64, vms_per_node: usize) -> VmId {
        let vm = self.slots_used[node] % vms_per_node;
        self.slots_used[node] += 1;
        self.cycles[node] += cycles;
        VmId {
            node: NodeId(node),
            vm,
        }
    }
}

fn place_and_route(scn: &Scenario) -> (Placement, Routing) {
    let n_nodes = scn.graph.node_count();
    let slot_cap = (scn.cfg.node_ram_mb / scn.cfg.vnf_ram_mb)
        .min(scn.cfg.node_storage_mb / scn.cfg.vnf_storage_mb)
        .floor() as usize;
    let mut core = CoreState {
        slots_used: vec![0; n_nodes],
        slot_cap,
        cycles: vec![0.0; n_nodes],
        link_residual: scn
            .graph
            .links()
            .iter()
            .map(|l| l.bandwidth_bps)
            .collect(),
    };

    let mut placement = Vec::with_capacity(scn.n_users());
    let mut routing = Vec::with_capacity(scn.n_users());
    for u in 0..scn.n_users() {
        let chain = scn.chain_of(u);
        let bits = scn.packet_bits_of(u);
        let (vms, route) = place_user(scn, &mut core, chain.len(), |f| {
            bits * scn.cfg.vnf_cycles_per_bit[chain.vnfs[f]]
        }, scn.demands[u].max_bps());
        placement.push(vms);
        routing.push(route);
    }
    (Placement { vm: placement }, Routing { path: routing })
}

fn place_user(
    scn: &Scenario,
    core: &mut CoreState,
    chain_len: usize,
    cycles_of: impl Fn(usize) -> f64,
    robust_bps: f64,
) -> (Vec<VmId>, Vec<Option<usize>>) {
    // co-located chains need no routes and no link budget
    if let Some(node) = core.pick_node(chain_len) {
        let vms: Vec<VmId> = (0..chain_len)
            .map(|f| core.commit_vnf(node, cycles_of(f), scn.cfg.vms_per_node))
            .collect();
        let route = vec![None; chain_len - 1];
        return (vms, route);
    }

    // spill one VNF at a time, remembering enough to undo
    let slots_before = core.slots_used.clone();
    let cycles_before = core.cycles.clone();
    let vms: Vec<VmId> = (0..chain_len)
        .map(|f| {
            let node = core
                .pick_node(1)
                .expect("scenario-level capacity check guarantees a free slot");
            core.commit_vnf(node, cycles_of(f), scn.cfg.vms_per_node)
        })
        .collect();

    let mut route = Vec::with_capacity(chain_len - 1);
    let mut hop_loads: Vec<(usize, f64)> = Vec::new();
    let mut feasible = true;
    'hops: for w in vms.windows(2) {
        let (a, b) = (w[0].node, w[1].node);
        if a == b {
            route.push(None);
            continue;
        }
        let paths = scn.paths.paths(a, b);
        for (idx, path) in paths.iter().enumerate() {
            let fits = path
                .links
                .iter()
                .all(|&li| core.link_residual[li] >= robust_bps);
            if fits {
                for &li in &path.links {
                    core.link_residual[li] -= robust_bps;
                    hop_loads.push((li, robust_bps));
                }
                route.push(Some(idx));
                continue 'hops;
            }
        }
        feasible = false;
        break;
    }
    if feasible {
        return (vms, route);
    }

    // every candidate path for some hop is congested: undo and force the
    // chain onto whichever single node has the most room
    core.slots_used = slots_before;
    core.cycles = cycles_before;
    for (li, load) in hop_loads {
        core.link_residual[li] += load;
    }
    let node = (0..core.slots_used.len())
        .max_by(|&a, &b| {
            core.free_slots(a)
                .cmp(&core.free_slots(b))
                .then_with(|| core.cycles[b].total_cmp(&core.cycles[a]))
        })
        .expect("graph has nodes");
    let vms: Vec<VmId> = (0..chain_len)
        .map(|f| core.commit_vnf(node, cycles_of(f), scn.cfg.vms_per_node))
        .collect();
    (vms, vec![None; chain_len - 1])
}

// ---------------------------------------------------------------------------
// Radio side
// ---------------------------------------------------------------------------

/// Worst-case rate on one subchannel assuming every other station interferes
/// at the equal power split.
fn pessimistic_rate(scn: &Scenario, ch: &ChannelState, user: usize, k: usize) -> f64 {
    let r = &scn.radio;
    let p = r.p_max_w / r.n_subchannels as f64;
    let bs = r.user_bs[user];
    let gamma = r.csi_bound;
    let signal = (1.0 - gamma).powi(2) * ch.power_gain(bs, UserId(user), k) * p;
    let interference: f64 = (0..r.n_bs)
        .filter(|&i| i != bs)
        .map(|i| (1.0 + gamma).powi(2) * ch.power_gain(i, UserId(user), k) * p)
        .sum();
    r.subchannel_bw_hz * (1.0 + signal / (interference + r.noise_w)).log2()
}

/// End-to-end delay if `user` were served at `rate_bps`, core terms taken
/// from the committed placement.
fn delay_at_rate(
    scn: &Scenario,
    placement: &Placement,
    routing: &Routing,
    demand_bps: &[f64],
    user: usize,
    rate_bps: f64,
) -> f64 {
    let bits = scn.packet_bits_of(user);
    let vms = &placement.vm[user];
    let route = &routing.path[user];
    scn.radio.user_bs_dist[user] / SIGNAL_SPEED_M_PER_S
        + bits / rate_bps
        + corenet::processing_delay(
            scn.chain_of(user),
            vms,
            &scn.cfg.vnf_cycles_per_bit,
            bits,
            &scn.nodes,
        )
        + corenet::core_prop_delay(route, vms, &scn.paths, &scn.graph)
        + corenet::core_trans_delay(route, vms, &scn.paths, &scn.graph, demand_bps[user])
}

struct RadioState {
    assign: Vec<Vec<Option<UserId>>>,
    served: Vec<bool>,
    /// Pessimistic aggregate rate per slice, the floor ledger.
    slice_rate: Vec<f64>,
}

impl RadioState {
    fn free_channels<'a>(&'a self, bs: usize) -> impl Iterator<Item = usize> + 'a {
        self.assign[bs]
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_none())
            .map(|(k, _)| k)
    }

    fn grant(&mut self, scn: &Scenario, user: usize, bs: usize, k: usize, rate: f64) {
        self.assign[bs][k] = Some(UserId(user));
        self.served[user] = true;
        self.slice_rate[scn.slice_of(user)] += rate;
    }
}

fn assign_radio(
    scn: &Scenario,
    channels: &ChannelState,
    demand_bps: &[f64],
    placement: &Placement,
    routing: &Routing,
) -> RadioAllocation {
    let r = &scn.radio;
    let mut state = RadioState {
        assign: vec![vec![None; r.n_subchannels]; r.n_bs],
        served: vec![false; scn.n_users()],
        slice_rate: vec![0.0; scn.cfg.slice_count],
    };

    // best free channel for a user, by pessimistic rate then lowest index
    let best_free = |state: &RadioState, user: usize| -> Option<(usize, f64)> {
        let bs = r.user_bs[user];
        state
            .free_channels(bs)
            .map(|k| (k, pessimistic_rate(scn, channels, user, k)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
    };
    let delay_ok = |user: usize, rate: f64| {
        delay_at_rate(scn, placement, routing, demand_bps, user, rate) <= scn.tau_max_of(user)
    };

    // floors first: feed the hungriest slice its best remaining pair
    loop {
        let mut pick: Option<(f64, f64, usize, usize, f64)> = None;
        for s in scn.populated_slices() {
            let floor = scn.cfg.rmin_bps_hz[s] * r.subchannel_bw_hz;
            if floor <= 0.0 || state.slice_rate[s] >= floor {
                continue;
            }
            // absolute shortfall in bps: the slice owing the most bits eats
            // first, tariffs only break ties
            let deficit = floor - state.slice_rate[s];
            let tariff = scn.prices.revenue_per_mbps[s];
            let candidate = r
                .users_of_slice(s)
                .filter(|&u| !state.served[u.0])
                .filter_map(|u| best_free(&state, u.0).map(|(k, rate)| (u.0, k, rate)))
                .filter(|&(u, _, rate)| delay_ok(u, rate))
                .max_by(|a, b| a.2.total_cmp(&b.2));
            if let Some((u, k, rate)) = candidate {
                let key = (deficit, tariff, u, k, rate);
                let better = match &pick {
                    None => true,
                    Some(best) => {
                        (key.0, key.1).partial_cmp(&(best.0, best.1))
                            == Some(std::cmp::Ordering::Greater)
                    }
                };
                if better {
                    pick = Some(key);
                }
            }
        }
        match pick {
            Some((_, _, u, k, rate)) => state.grant(scn, u, r.user_bs[u], k, rate),
            None => break,
        }
    }

    // profit next: tariff order, best gain, delay-gated
    let mut order: Vec<usize> = (0..scn.n_users()).filter(|&u| !state.served[u]).collect();
    order.sort_by(|&a, &b| {
        let ta = scn.prices.revenue_per_mbps[scn.slice_of(a)];
        let tb = scn.prices.revenue_per_mbps[scn.slice_of(b)];
        tb.total_cmp(&ta)
            .then_with(|| {
                let ga = best_free(&state, a).map_or(0.0, |(_, rate)| rate);
                let gb = best_free(&state, b).map_or(0.0, |(_, rate)| rate);
                gb.total_cmp(&ga)
            })
            .then(a.cmp(&b))
    });
    for u in order {
        if let Some((k, rate)) = best_free(&state, u) {
            if delay_ok(u, rate) {
                state.grant(scn, u, r.user_bs[u], k, rate);
            }
        }
    }

    // surplus: leftover channels to the best admitted taker
    for bs in 0..r.n_bs {
        for k in 0..r.n_subchannels {
            if state.assign[bs][k].is_some() {
                continue;
            }
            let taker = r
                .users_of_bs(bs)
                .filter(|&u| state.served[u.0])
                .max_by(|&a, &b| {
                    pessimistic_rate(scn, channels, a.0, k)
                        .total_cmp(&pessimistic_rate(scn, channels, b.0, k))
                        .then(b.0.cmp(&a.0))
                });
            if let Some(u) = taker {
                let rate = pessimistic_rate(scn, channels, u.0, k);
                state.grant(scn, u.0, bs, k, rate);
            }
        }
    }

    let p = r.p_max_w / r.n_subchannels as f64;
    let power_w = state
        .assign
        .iter()
        .map(|row| row.iter().map(|a| if a.is_some() { p } else { 0.0 }).collect())
        .collect();
    RadioAllocation {
        assign: state.assign,
        power_w,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{GraphSource, ScenarioConfig};
    use crate::env::SliceEnv;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use std::sync::Arc;

    fn alloc_for(scn: &Scenario, seed: u64) -> (Allocation, ChannelState, Vec<f64>) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let ch = crate::radio::realize_channels(&scn.radio, &mut rng);
        let demand: Vec<f64> = scn.demands.iter().map(|d| d.sample(&mut rng)).collect();
        (greedy_allocate(scn, &ch, &demand), ch, demand)
    }

    #[test]
    fn uncontended_user_is_served_cleanly() {
        let mut cfg = ScenarioConfig::desk();
        cfg.users = 1;
        cfg.base_stations = 1;
        cfg.subchannels = 1;
        let scn = Arc::new(Scenario::generate(&cfg).unwrap());
        let env = SliceEnv::new(Arc::clone(&scn));
        let alloc = greedy_allocate(&scn, env.channels(), env.demands());
        assert_eq!(alloc.radio.served_user_count(), 1);
        let eval = env.evaluate(&alloc).unwrap();
        assert!(eval.violations.is_empty(), "{:?}", eval.violations);
        assert!(eval.utility > 0.0);
    }

    #[test]
    fn higher_tariff_user_wins_the_only_channel() {
        let mut cfg = ScenarioConfig::desk();
        cfg.users = 2;
        cfg.base_stations = 1;
        cfg.subchannels = 1;
        cfg.slice_count = 2;
        // floors negligible so admission is pure tariff order
        cfg.rmin_bps_hz = vec![1e-6, 1e-6];
        cfg.tau_max_ms = vec![100.0, 100.0];
        cfg.demand_mean_mbps = vec![1.0, 1.0];
        cfg.packet_bits = vec![400.0, 400.0];
        cfg.chains = vec![vec![0], vec![0]];
        cfg.revenue_per_mbps = vec![1.0, 5.0];
        let scn = Scenario::generate(&cfg).unwrap();
        let (alloc, _, _) = alloc_for(&scn, 3);
        // user 1 subscribes to slice 1, the richer tariff
        assert_eq!(scn.slice_of(1), 1);
        assert_eq!(alloc.radio.assign[0][0], Some(UserId(1)));
        assert!(!alloc.radio.is_served(0, UserId(0)));
    }

    #[test]
    fn deterministic_for_fixed_inputs() {
        let scn = Scenario::generate(&ScenarioConfig::desk()).unwrap();
        let (a, ch, demand) = alloc_for(&scn, 11);
        let b = greedy_allocate(&scn, &ch, &demand);
        assert_eq!(a, b);
    }

    #[test]
    fn desk_floors_are_met_and_structure_holds() {
        let scn = Arc::new(Scenario::generate(&ScenarioConfig::desk()).unwrap());
        let mut env = SliceEnv::new(Arc::clone(&scn));
        for seed in 0..6 {
            env.reset(seed);
            let alloc = greedy_allocate(&scn, env.channels(), env.demands());
            let eval = env.evaluate(&alloc).unwrap();
            assert!(
                eval.violations.is_empty(),
                "seed {seed}: {:?}",
                eval.violations
            );
            // desk has more subchannels than users per station, so everyone
            // delay-feasible is served and surplus fills the rest
            assert_eq!(alloc.radio.served_user_count(), scn.n_users());
            for row in &alloc.radio.power_w {
                let total: f64 = row.iter().sum();
                assert!(total <= scn.radio.p_max_w + 1e-12);
            }
        }
    }

    #[test]
    fn full_power_split_on_every_assigned_channel() {
        let scn = Scenario::generate(&ScenarioConfig::desk()).unwrap();
        let (alloc, _, _) = alloc_for(&scn, 5);
        let p = scn.radio.p_max_w / scn.radio.n_subchannels as f64;
        for bs in 0..scn.radio.n_bs {
            for k in 0..scn.radio.n_subchannels {
                match alloc.radio.assign[bs][k] {
                    Some(_) => assert_eq!(alloc.radio.power_w[bs][k], p),
                    None => assert_eq!(alloc.radio.power_w[bs][k], 0.0),
                }
            }
        }
    }

    #[test]
    fn congested_links_push_chains_onto_one_node() {
        let mut cfg = ScenarioConfig::desk();
        // two-hop chains and links too small for even one robust demand
        cfg.graph = GraphSource::Synthetic { nodes: 4 };
        cfg.synthetic_link_bw_bps = 1.0e6;
        cfg.demand_mean_mbps = vec![20.0, 20.0, 20.0];
        let scn = Arc::new(Scenario::generate(&cfg).unwrap());
        let env = SliceEnv::new(Arc::clone(&scn));
        let alloc = greedy_allocate(&scn, env.channels(), env.demands());
        // every chain must be co-located: no routed hops at all
        for routes in &alloc.routing.path {
            assert!(routes.iter().all(|r| r.is_none()));
        }
        let eval = env.evaluate(&alloc).unwrap();
        assert!(eval
            .violations
            .iter()
            .all(|v| v.kind != crate::env::ConstraintKind::LinkCapacity));
    }

    #[test]
    fn tight_delay_budget_rejects_users() {
        let mut cfg = ScenarioConfig::desk();
        // budget below the RAN propagation floor makes service impossible
        cfg.tau_max_ms = vec![1e-6, 1e-6, 1e-6];
        let scn = Scenario::generate(&cfg).unwrap();
        let (alloc, _, _) = alloc_for(&scn, 2);
        assert_eq!(alloc.radio.served_user_count(), 0);
        // chains are still placed for everyone
        assert!(alloc.placement.vm.iter().all(|vms| !vms.is_empty()));
    }

    #[test]
    fn floor_phase_feeds_starving_slices_before_profit() {
        let mut cfg = ScenarioConfig::desk();
        cfg.users = 2;
        cfg.base_stations = 1;
        cfg.subchannels = 1;
        cfg.slice_count = 2;
        // slice 0 is poor but starving; tariffs alone would pick user 1
        cfg.rmin_bps_hz = vec![1.0, 1e-6];
        cfg.tau_max_ms = vec![100.0, 100.0];
        cfg.demand_mean_mbps = vec![1.0, 1.0];
        cfg.packet_bits = vec![400.0, 400.0];
        cfg.chains = vec![vec![0], vec![0]];
        cfg.revenue_per_mbps = vec![1.0, 5.0];
        let scn = Scenario::generate(&cfg).unwrap();
        let (alloc, _, _) = alloc_for(&scn, 3);
        assert_eq!(alloc.radio.assign[0][0], Some(UserId(0)));
    }
}
