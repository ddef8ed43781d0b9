//! Infrastructure-provider money flow: revenue earned on each slice's
//! guaranteed rate, set against the cost of radiated power and of the
//! compute and transport the chains consume.
//!
//! Revenue is always computed from worst-case (guaranteed) rates. Charging
//! for face-value rates would let the provider book income it may not be able
//! to deliver once the channel estimate misses.

use crate::corenet::{Placement, Routing, SfcChain};
use crate::radio::{RadioAllocation, RadioScenario};
use crate::topology::PathTable;

/// Tariffs and the revenue/cost weighting.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceBook {
    /// $ per Mbps of guaranteed slice rate, one entry per slice.
    pub revenue_per_mbps: Vec<f64>,
    /// $ per Watt of allocated downlink transmit power.
    pub ran_cost_per_w: f64,
    /// $ per CPU cycle consumed by VNF processing.
    pub node_cost_per_cycle: f64,
    /// $ per bit carried across one physical link.
    pub link_cost_per_bit: f64,
    /// Weight on revenue in the utility.
    pub theta_revenue: f64,
    /// Weight on cost in the utility.
    pub theta_cost: f64,
}

/// Per-slice revenue in $: tariff times guaranteed rate in Mbps.
pub fn revenue(slice_rates_bps: &[f64], prices: &PriceBook) -> Vec<f64> {
    assert_eq!(slice_rates_bps.len(), prices.revenue_per_mbps.len());
    slice_rates_bps
        .iter()
        .zip(&prices.revenue_per_mbps)
        .map(|(&r, &tariff)| tariff * r / 1.0e6)
        .collect()
}

/// Per-slice cost of radiated power: every assigned (bs, subchannel) pair is
/// billed its transmit power, attributed to the assigned user's slice.
pub fn ran_cost(
    scn: &RadioScenario,
    alloc: &RadioAllocation,
    prices: &PriceBook,
) -> Vec<f64> {
    let mut cost = vec![0.0; scn.n_slices];
    for (bs, row) in alloc.assign.iter().enumerate() {
        for (k, a) in row.iter().enumerate() {
            if let Some(u) = a {
                cost[scn.user_slice[u.0]] += alloc.power_w[bs][k] * prices.ran_cost_per_w;
            }
        }
    }
    cost
}

/// Per-slice cost of the core: cycles burned per VNF plus bits carried per
/// link crossing, both priced on the slice's fixed packet size.
#[allow(clippy::too_many_arguments)]
pub fn core_cost(
    placement: &Placement,
    routing: &Routing,
    chains: &[SfcChain],
    user_slice: &[usize],
    packet_bits: &[f64],
    cycles_per_bit: &[f64],
    table: &PathTable,
    prices: &PriceBook,
) -> Vec<f64> {
    let n_slices = packet_bits.len();
    let mut cost = vec![0.0; n_slices];
    for (user, vms) in placement.vm.iter().enumerate() {
        let s = user_slice[user];
        let chain = &chains[s];
        let bits = packet_bits[s];
        for (&f, _vm) in chain.vnfs.iter().zip(vms) {
            cost[s] += bits * cycles_per_bit[f] * prices.node_cost_per_cycle;
        }
        for (j, sel) in routing.path[user].iter().enumerate() {
            if let Some(idx) = sel {
                let p = &table.paths(vms[j].node, vms[j + 1].node)[*idx];
                cost[s] += bits * p.hops() as f64 * prices.link_cost_per_bit;
            }
        }
    }
    cost
}

/// Per-slice utility `theta_revenue * revenue - theta_cost * cost` and its
/// total.
pub fn utility(revenue: &[f64], cost: &[f64], prices: &PriceBook) -> (Vec<f64>, f64) {
    assert_eq!(revenue.len(), cost.len());
    let per: Vec<f64> = revenue
        .iter()
        .zip(cost)
        .map(|(&r, &c)| prices.theta_revenue * r - prices.theta_cost * c)
        .collect();
    let total = per.iter().sum();
    (per, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corenet::VmId;
    use crate::radio::UserId;
    use crate::topology::{CoreGraph, NodeId, PathTable};

    fn prices(n_slices: usize) -> PriceBook {
        PriceBook {
            revenue_per_mbps: vec![1.0; n_slices],
            ran_cost_per_w: 0.5,
            node_cost_per_cycle: 1.0e-9,
            link_cost_per_bit: 1.0e-8,
            theta_revenue: 60.0,
            theta_cost: 1.0,
        }
    }

    #[test]
    fn revenue_is_tariff_times_mbps() {
        let p = prices(2);
        let rev = revenue(&[1.0e6, 2.5e6], &p);
        assert_eq!(rev, vec![1.0, 2.5]);
    }

    #[test]
    fn ran_cost_single_assignment() {
        let scn = RadioScenario::new(
            vec![(0.0, 0.0)],
            vec![(10.0, 0.0)],
            vec![0],
            1,
            2,
            20_000.0,
            -174.0,
            4.0,
            0.0,
            -38.0,
            3.5,
        );
        let mut alloc = RadioAllocation::empty(1, 2);
        alloc.assign[0][0] = Some(UserId(0));
        alloc.power_w[0][0] = 2.0;
        let cost = ran_cost(&scn, &alloc, &prices(1));
        // 2 W at 0.5 $/W
        assert_eq!(cost, vec![1.0]);
    }

    #[test]
    fn core_cost_counts_cycles_and_crossings() {
        let g = CoreGraph::synthetic(4, 100_000.0, 1.0e9);
        let table = PathTable::build(&g, 4);
        let chains = vec![SfcChain { vnfs: vec![0, 1] }];
        let placement = Placement {
            vm: vec![vec![
                VmId {
                    node: NodeId(0),
                    vm: 0,
                },
                VmId {
                    node: NodeId(2),
                    vm: 0,
                },
            ]],
        };
        // the second-sorted 0 -> 2 route is the two-hop ring detour
        let routing = Routing {
            path: vec![vec![Some(1)]],
        };
        let p = prices(1);
        let cost = core_cost(
            &placement,
            &routing,
            &chains,
            &[0],
            &[1.0e6],
            &[2.0, 3.0],
            &table,
            &p,
        );
        // cycles: 1e6 * (2 + 3) at 1e-9 $/cycle = 5e-3
        // links: 1e6 bits * 2 crossings at 1e-8 $/bit = 2e-2
        assert!((cost[0] - (5.0e-3 + 2.0e-2)).abs() < 1e-15);
    }

    #[test]
    fn co_located_chain_pays_no_link_cost() {
        let g = CoreGraph::synthetic(4, 100_000.0, 1.0e9);
        let table = PathTable::build(&g, 4);
        let chains = vec![SfcChain { vnfs: vec![0, 0] }];
        let placement = Placement {
            vm: vec![vec![
                VmId {
                    node: NodeId(1),
                    vm: 0,
                },
                VmId {
                    node: NodeId(1),
                    vm: 1,
                },
            ]],
        };
        let routing = Routing {
            path: vec![vec![None]],
        };
        let p = prices(1);
        let cost = core_cost(
            &placement,
            &routing,
            &chains,
            &[0],
            &[1.0e6],
            &[2.0],
            &table,
            &p,
        );
        assert!((cost[0] - 4.0e-3).abs() < 1e-15);
    }

    #[test]
    fn utility_weighting() {
        let p = prices(1);
        let (per, total) = utility(&[1.0], &[10.0], &p);
        assert_eq!(per, vec![50.0]);
        assert_eq!(total, 50.0);
    }

    #[test]
    fn utility_sums_slices() {
        let p = PriceBook {
            revenue_per_mbps: vec![1.0; 3],
            theta_revenue: 2.0,
            theta_cost: 1.0,
            ..prices(3)
        };
        let (per, total) = utility(&[1.0, 2.0, 3.0], &[0.5, 0.5, 0.5], &p);
        assert_eq!(per, vec![1.5, 3.5, 5.5]);
        assert!((total - 10.5).abs() < 1e-15);
    }
}
