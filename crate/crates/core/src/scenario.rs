//! Scenario assembly: one immutable, fully materialized system instance
//! built from a [`ScenarioConfig`] and a seed.
//!
//! The seed fixes everything static: user drop, slice membership, nearest-BS
//! association, mean path gains, candidate route tables, and per-slice
//! ingress/egress anchors. Fast fading and demand realizations are drawn per
//! slot by the environment, not here.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::config::{GraphSource, ScenarioConfig};
use crate::corenet::{DemandSpec, NodeResources, SfcChain};
use crate::economics::PriceBook;
use crate::radio::RadioScenario;
use crate::topology::{CoreGraph, GraphError, NodeId, PathTable};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("core cannot host the workload: {placed} VNF instances need {need_mb} Mb of {what}, nodes offer {have_mb} Mb")]
    Capacity {
        placed: usize,
        need_mb: f64,
        have_mb: f64,
        what: &'static str,
    },
}

/// Fully built system instance. Construction is deterministic in
/// `(config, config.scenario_seed)`.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub graph: CoreGraph,
    pub nodes: Vec<NodeResources>,
    pub paths: PathTable,
    pub radio: RadioScenario,
    /// Chain per slice.
    pub chains: Vec<SfcChain>,
    /// Demand model per user.
    pub demands: Vec<DemandSpec>,
    pub prices: PriceBook,
    /// Delay budget per slice, seconds.
    pub tau_max_s: Vec<f64>,
    /// Traffic anchors per slice, recorded for reporting; delays and costs
    /// accrue between chain VNFs only.
    pub ingress: Vec<NodeId>,
    pub egress: Vec<NodeId>,
}

impl Scenario {
    pub fn generate(cfg: &ScenarioConfig) -> Result<Self, BuildError> {
        cfg.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.scenario_seed);

        let graph = match &cfg.graph {
            GraphSource::Abilene => CoreGraph::abilene(),
            GraphSource::Synthetic { nodes } => CoreGraph::synthetic(
                *nodes,
                cfg.synthetic_link_distance_m,
                cfg.synthetic_link_bw_bps,
            ),
            GraphSource::File(p) => CoreGraph::load(std::path::Path::new(p))?,
        };
        graph.ensure_connected()?;

        let nodes = vec![
            NodeResources {
                cpu_cycles_per_s: cfg.node_cpu_cycles_per_s,
                ram_mb: cfg.node_ram_mb,
                storage_mb: cfg.node_storage_mb,
                vms: cfg.vms_per_node,
            };
            graph.node_count()
        ];

        let chains: Vec<SfcChain> = cfg
            .chains
            .iter()
            .map(|vnfs| SfcChain { vnfs: vnfs.clone() })
            .collect();

        // round-robin slice membership keeps per-slice populations balanced
        let user_slice: Vec<usize> = (0..cfg.users).map(|u| u % cfg.slice_count).collect();

        let placed: usize = user_slice.iter().map(|&s| chains[s].len()).sum();
        for (what, per_vnf, per_node) in [
            ("RAM", cfg.vnf_ram_mb, cfg.node_ram_mb),
            ("storage", cfg.vnf_storage_mb, cfg.node_storage_mb),
        ] {
            let need = placed as f64 * per_vnf;
            let have = graph.node_count() as f64 * per_node;
            if need > have {
                return Err(BuildError::Capacity {
                    placed,
                    need_mb: need,
                    have_mb: have,
                    what,
                });
            }
        }

        let bs_pos = bs_grid(cfg.base_stations, cfg.area_m);
        let user_pos: Vec<(f64, f64)> = (0..cfg.users)
            .map(|_| {
                (
                    rng.gen_range(0.0..cfg.area_m),
                    rng.gen_range(0.0..cfg.area_m),
                )
            })
            .collect();

        let radio = RadioScenario::new(
            bs_pos,
            user_pos,
            user_slice.clone(),
            cfg.slice_count,
            cfg.subchannels,
            cfg.subchannel_bw_hz,
            cfg.noise_dbm_per_hz,
            cfg.p_max_w,
            cfg.csi_bound,
            cfg.reference_gain_db,
            cfg.pathloss_exponent,
        );

        let demands = user_slice
            .iter()
            .map(|&s| DemandSpec {
                mean_bps: cfg.demand_mean_mbps[s] * 1.0e6,
                bound: cfg.demand_bound,
            })
            .collect();

        let mut ingress = Vec::with_capacity(cfg.slice_count);
        let mut egress = Vec::with_capacity(cfg.slice_count);
        let all: Vec<NodeId> = graph.nodes().collect();
        for _ in 0..cfg.slice_count {
            let pick: Vec<NodeId> = all.choose_multiple(&mut rng, 2).copied().collect();
            ingress.push(pick[0]);
            egress.push(pick[1]);
        }

        Ok(Scenario {
            paths: PathTable::build(&graph, cfg.k_paths),
            nodes,
            radio,
            chains,
            demands,
            prices: PriceBook {
                revenue_per_mbps: cfg.revenue_per_mbps.clone(),
                ran_cost_per_w: cfg.ran_cost_per_w,
                node_cost_per_cycle: cfg.node_cost_per_cycle,
                link_cost_per_bit: cfg.link_cost_per_bit,
                theta_revenue: cfg.theta_revenue,
                theta_cost: cfg.theta_cost,
            },
            tau_max_s: cfg.tau_max_ms.iter().map(|ms| ms / 1000.0).collect(),
            ingress,
            egress,
            graph,
            cfg: cfg.clone(),
        })
    }

    pub fn n_users(&self) -> usize {
        self.cfg.users
    }

    pub fn n_slices(&self) -> usize {
        self.cfg.slice_count
    }

    pub fn slice_of(&self, user: usize) -> usize {
        self.radio.user_slice[user]
    }

    pub fn chain_of(&self, user: usize) -> &SfcChain {
        &self.chains[self.slice_of(user)]
    }

    pub fn packet_bits_of(&self, user: usize) -> f64 {
        self.cfg.packet_bits[self.slice_of(user)]
    }

    pub fn tau_max_of(&self, user: usize) -> f64 {
        self.tau_max_s[self.slice_of(user)]
    }

    /// Longest chain over all slices; fixes the action layout.
    pub fn max_chain_len(&self) -> usize {
        self.chains.iter().map(|c| c.len()).max().unwrap_or(0)
    }

    /// Slices that actually have subscribers. Only these owe a rate floor.
    pub fn populated_slices(&self) -> Vec<usize> {
        (0..self.n_slices())
            .filter(|&s| self.radio.users_of_slice(s).next().is_some())
            .collect()
    }

    /// Users of one base station in ascending id order; the action decoder
    /// and its inverse both rely on this ordering.
    pub fn users_by_bs(&self) -> Vec<Vec<crate::radio::UserId>> {
        (0..self.radio.n_bs)
            .map(|bs| self.radio.users_of_bs(bs).collect())
            .collect()
    }
}

/// Base stations on a near-square grid of cell centers covering the square
/// deployment area.
fn bs_grid(n: usize, area_m: f64) -> Vec<(f64, f64)> {
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let (cw, ch) = (area_m / cols as f64, area_m / rows as f64);
    (0..n)
        .map(|i| {
            let (cx, cy) = (i % cols, i / cols);
            ((cx as f64 + 0.5) * cw, (cy as f64 + 0.5) * ch)
        })
        .collect()
}
