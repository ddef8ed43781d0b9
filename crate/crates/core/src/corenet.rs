//! Core network: service function chains placed on VMs, routed over the
//! physical substrate, with delay accounting and robust link-capacity checks.
//!
//! Traffic demand per user is uncertain: the realized load is uniform on
//! `mean * (1 ± bound)`. Delay terms use the realization of the current slot;
//! the link-capacity constraint instead charges every flow its upper extreme
//! `mean * (1 + bound)`, so an allocation accepted here survives any demand
//! the uncertainty set can produce.

use rand::Rng;

use crate::topology::{CoreGraph, NodeId, PathTable};

/// One VM slot on a physical node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VmId {
    pub node: NodeId,
    pub vm: usize,
}

/// Compute/memory envelope of one physical node. All VMs carved from a node
/// share its CPU evenly.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeResources {
    pub cpu_cycles_per_s: f64,
    pub ram_mb: f64,
    pub storage_mb: f64,
    pub vms: usize,
}

impl NodeResources {
    pub fn vm_cpu_cycles_per_s(&self) -> f64 {
        self.cpu_cycles_per_s / self.vms as f64
    }
}

/// Ordered VNF chain one slice's traffic must traverse. Entries index the
/// VNF catalog (cycles-per-bit table).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SfcChain {
    pub vnfs: Vec<usize>,
}

impl SfcChain {
    pub fn len(&self) -> usize {
        self.vnfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vnfs.is_empty()
    }

    pub fn hops(&self) -> usize {
        self.vnfs.len().saturating_sub(1)
    }
}

/// Uncertain traffic demand of one user: uniform on `mean * (1 ± bound)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandSpec {
    pub mean_bps: f64,
    pub bound: f64,
}

impl DemandSpec {
    pub fn min_bps(&self) -> f64 {
        self.mean_bps * (1.0 - self.bound)
    }

    pub fn max_bps(&self) -> f64 {
        self.mean_bps * (1.0 + self.bound)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.bound == 0.0 {
            return self.mean_bps;
        }
        rng.gen_range(self.min_bps()..=self.max_bps())
    }
}

/// VM hosting each chain position, per user: `vm[user][j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub vm: Vec<Vec<VmId>>,
}

impl Placement {
    /// Physical nodes a user's chain visits, in order.
    pub fn nodes_of(&self, user: usize) -> Vec<NodeId> {
        self.vm[user].iter().map(|v| v.node).collect()
    }

    /// VNF count hosted per physical node.
    pub fn node_occupancy(&self, n_nodes: usize) -> Vec<usize> {
        let mut occ = vec![0usize; n_nodes];
        for row in &self.vm {
            for v in row {
                occ[v.node.index()] += 1;
            }
        }
        occ
    }
}

/// Chosen route per virtual hop: `path[user][j]` indexes the candidate list
/// for the hop's endpoint pair, `None` exactly when both ends share a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Routing {
    pub path: Vec<Vec<Option<usize>>>,
}

// ---------------------------------------------------------------------------
// Delay terms
// ---------------------------------------------------------------------------

/// Additive end-to-end delay budget of one user's traffic, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DelayBreakdown {
    pub ran_prop: f64,
    pub ran_trans: f64,
    pub processing: f64,
    pub core_prop: f64,
    pub core_trans: f64,
}

impl DelayBreakdown {
    pub fn total(&self) -> f64 {
        self.ran_prop + self.ran_trans + self.processing + self.core_prop + self.core_trans
    }
}

/// Time the chain spends being processed: each VNF works `packet_bits` at its
/// cycles-per-bit cost on its VM's CPU share.
pub fn processing_delay(
    chain: &SfcChain,
    vms: &[VmId],
    cycles_per_bit: &[f64],
    packet_bits: f64,
    nodes: &[NodeResources],
) -> f64 {
    assert_eq!(chain.len(), vms.len());
    chain
        .vnfs
        .iter()
        .zip(vms)
        .map(|(&f, vm)| {
            packet_bits * cycles_per_bit[f] / nodes[vm.node.index()].vm_cpu_cycles_per_s()
        })
        .sum()
}

fn hop_path<'t>(
    route: &[Option<usize>],
    vms: &[VmId],
    table: &'t PathTable,
    j: usize,
) -> Option<&'t crate::topology::PhysicalPath> {
    let idx = route[j]?;
    Some(&table.paths(vms[j].node, vms[j + 1].node)[idx])
}

/// Signal propagation over every physical link the chain's routes traverse.
/// Co-located consecutive VNFs contribute nothing.
pub fn core_prop_delay(
    route: &[Option<usize>],
    vms: &[VmId],
    table: &PathTable,
    graph: &CoreGraph,
) -> f64 {
    (0..route.len())
        .filter_map(|j| hop_path(route, vms, table, j))
        .map(|p| p.propagation_s(graph))
        .sum()
}

/// Store-and-forward time: the realized demand crosses each link of each
/// chosen path at that link's bandwidth.
pub fn core_trans_delay(
    route: &[Option<usize>],
    vms: &[VmId],
    table: &PathTable,
    graph: &CoreGraph,
    demand_bps: f64,
) -> f64 {
    (0..route.len())
        .filter_map(|j| hop_path(route, vms, table, j))
        .flat_map(|p| p.links.iter())
        .map(|&li| demand_bps / graph.link(li).bandwidth_bps)
        .sum()
}

// ---------------------------------------------------------------------------
// Structural checkers
// ---------------------------------------------------------------------------

/// Every chain position sits on exactly one VM that exists. Shape errors mean
/// the placement was not built for these chains.
pub fn check_placement_structure(
    placement: &Placement,
    chains_by_user: &[&SfcChain],
    nodes: &[NodeResources],
) -> bool {
    placement.vm.len() == chains_by_user.len()
        && placement
            .vm
            .iter()
            .zip(chains_by_user)
            .all(|(row, chain)| {
                row.len() == chain.len()
                    && row.iter().all(|v| {
                        v.node.index() < nodes.len() && v.vm < nodes[v.node.index()].vms
                    })
            })
}

/// Per-node VNF head-count stays within the RAM and storage budgets.
pub fn check_node_capacity(
    placement: &Placement,
    nodes: &[NodeResources],
    vnf_ram_mb: f64,
    vnf_storage_mb: f64,
) -> bool {
    placement
        .node_occupancy(nodes.len())
        .iter()
        .zip(nodes)
        .all(|(&cnt, n)| {
            cnt as f64 * vnf_ram_mb <= n.ram_mb && cnt as f64 * vnf_storage_mb <= n.storage_mb
        })
}

/// Each virtual hop selects exactly one existing physical path whose ends
/// match the placement, or no path exactly when the hop is co-located.
pub fn check_route_structure(
    routing: &Routing,
    placement: &Placement,
    table: &PathTable,
) -> bool {
    if routing.path.len() != placement.vm.len() {
        return false;
    }
    routing.path.iter().zip(&placement.vm).all(|(route, vms)| {
        route.len() + 1 == vms.len().max(1)
            && route.iter().enumerate().all(|(j, sel)| {
                let (a, b) = (vms[j].node, vms[j + 1].node);
                match sel {
                    None => a == b,
                    Some(idx) => a != b && *idx < table.paths(a, b).len(),
                }
            })
    })
}

// ---------------------------------------------------------------------------
// Link capacity (robust form)
// ---------------------------------------------------------------------------

/// Traffic charged to every physical link when each user is billed at
/// `demand(user)`. A link crossed by several hops of one chain is charged
/// once per crossing.
pub fn link_loads(
    routing: &Routing,
    placement: &Placement,
    table: &PathTable,
    n_links: usize,
    demand: impl Fn(usize) -> f64,
) -> Vec<f64> {
    let mut load = vec![0.0; n_links];
    for (user, route) in routing.path.iter().enumerate() {
        let vms = &placement.vm[user];
        let d = demand(user);
        for j in 0..route.len() {
            if let Some(p) = hop_path(route, vms, table, j) {
                for &li in &p.links {
                    load[li] += d;
                }
            }
        }
    }
    load
}

/// Robust capacity slack per link: `bandwidth - sum of worst-case demands`.
/// Non-negative everywhere means no realizable demand can overload any link.
pub fn link_capacity_slack(
    routing: &Routing,
    placement: &Placement,
    demands: &[DemandSpec],
    table: &PathTable,
    graph: &CoreGraph,
) -> Vec<f64> {
    let loads = link_loads(routing, placement, table, graph.link_count(), |u| {
        demands[u].max_bps()
    });
    loads
        .iter()
        .enumerate()
        .map(|(li, &l)| graph.link(li).bandwidth_bps - l)
        .collect()
}
