//! Run configuration: a sectioned plain-text `key = value` format, two named
//! presets, and validation.
//!
//! The `paper` preset carries the full-scale defaults (24 users, 4 cells, 10
//! subchannels, the Abilene core, 4000 training episodes). The `desk` preset
//! is the same system shrunk until a full training comparison fits in
//! minutes on one machine; it is what the integration tests run.
//!
//! Parsing is strict: unknown keys, missing keys, and malformed values are
//! all errors. Serialize-then-parse returns an identical config, which keeps
//! files written by one build readable by the next.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("[{section}] {key}: {msg}")]
    Value {
        section: String,
        key: String,
        msg: String,
    },
    #[error("missing key {key} in [{section}]")]
    Missing { section: String, key: String },
    #[error("unknown key {key} in [{section}]")]
    Unknown { section: String, key: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where the core substrate comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphSource {
    /// The bundled Abilene backbone.
    Abilene,
    /// Ring-plus-chord on `nodes` nodes, geometry from the `[core]` section.
    Synthetic { nodes: usize },
    /// A graph file on disk.
    File(String),
}

impl GraphSource {
    fn to_value(&self) -> String {
        match self {
            GraphSource::Abilene => "abilene".into(),
            GraphSource::Synthetic { nodes } => format!("synthetic:{nodes}"),
            GraphSource::File(p) => format!("file:{p}"),
        }
    }

    fn parse(v: &str) -> Result<Self, String> {
        if v == "abilene" {
            return Ok(GraphSource::Abilene);
        }
        if let Some(n) = v.strip_prefix("synthetic:") {
            return n
                .parse()
                .map(|nodes| GraphSource::Synthetic { nodes })
                .map_err(|_| format!("bad node count {n:?}"));
        }
        if let Some(p) = v.strip_prefix("file:") {
            return Ok(GraphSource::File(p.to_string()));
        }
        Err(format!(
            "expected `abilene`, `synthetic:<nodes>` or `file:<path>`, got {v:?}"
        ))
    }
}

/// Learner hyperparameters, shared by every algorithm that trains.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub batch: usize,
    /// Polyak factor for target-network tracking.
    pub soft_tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Inverse-time decay rate: `lr(ep) = lr0 / (1 + lr_decay * ep)`.
    pub lr_decay: f64,
    /// Initial exploration noise scale on [-1, 1] actions.
    pub explore_noise: f64,
    /// Per-episode multiplicative decay of the exploration scale. Noise has
    /// its own schedule because late-episode rewards are a deliverable (the
    /// learning curve): it must fade faster than the learning rates.
    pub explore_decay: f64,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub buffer_capacity: usize,
    pub episodes: usize,
    /// Episodes per recurrent update minibatch.
    pub rdpg_episode_batch: usize,
    pub rdpg_updates_per_episode: usize,
    /// Environment steps driven by uniform random actions before updates start.
    pub warmup_steps: usize,
    pub sac_init_temperature: f64,
    /// Entropy target per action dimension (total target = dim * this).
    pub sac_entropy_target_per_dim: f64,
    /// Scale critic targets by a running reward deviation.
    pub normalize_targets: bool,
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must be in [0, 1), got {}", self.gamma));
        }
        if self.batch == 0 {
            return bad("batch must be positive".into());
        }
        if !(self.soft_tau > 0.0 && self.soft_tau <= 1.0) {
            return bad(format!("soft_tau must be in (0, 1], got {}", self.soft_tau));
        }
        // actor on the slow timescale, critic on the fast one
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0 && self.actor_lr < self.critic_lr) {
            return bad(format!(
                "learning rates must satisfy 0 < actor_lr < critic_lr, got {} / {}",
                self.actor_lr, self.critic_lr
            ));
        }
        if self.lr_decay < 0.0 {
            return bad("lr_decay must be non-negative".into());
        }
        if self.hidden_layers == 0 || self.hidden_width == 0 {
            return bad("hidden_layers and hidden_width must be positive".into());
        }
        if self.buffer_capacity < self.batch {
            return bad("buffer_capacity must hold at least one batch".into());
        }
        if self.rdpg_episode_batch == 0 || self.rdpg_updates_per_episode == 0 {
            return bad("recurrent update settings must be positive".into());
        }
        if !(self.explore_decay > 0.0 && self.explore_decay <= 1.0) {
            return bad(format!(
                "explore_decay must be in (0, 1], got {}",
                self.explore_decay
            ));
        }
        if self.sac_init_temperature <= 0.0 {
            return bad("sac_init_temperature must be positive".into());
        }
        Ok(())
    }

    /// Learning rate after `episode` episodes of inverse-time decay.
    pub fn lr_at(&self, base: f64, episode: usize) -> f64 {
        base / (1.0 + self.lr_decay * episode as f64)
    }

    /// Exploration noise scale after `episode` episodes.
    pub fn noise_at(&self, episode: usize) -> f64 {
        self.explore_noise * self.explore_decay.powi(episode as i32)
    }
}

/// Everything needed to build a scenario and run experiments on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    // [scenario]
    pub users: usize,
    pub base_stations: usize,
    pub subchannels: usize,
    pub slice_count: usize,
    pub subchannel_bw_hz: f64,
    pub noise_dbm_per_hz: f64,
    pub p_max_w: f64,
    pub area_m: f64,
    /// Relative CSI estimation-error bound.
    pub csi_bound: f64,
    /// Relative demand uncertainty bound.
    pub demand_bound: f64,
    pub pathloss_exponent: f64,
    pub reference_gain_db: f64,
    pub episode_len: usize,
    /// Scales utility into reward units.
    pub reward_coeff: f64,
    /// Weight on normalized constraint violations in the reward.
    pub penalty_weight: f64,
    pub scenario_seed: u64,

    // [core]
    pub graph: GraphSource,
    pub vms_per_node: usize,
    pub node_cpu_cycles_per_s: f64,
    pub node_ram_mb: f64,
    pub node_storage_mb: f64,
    pub vnf_ram_mb: f64,
    pub vnf_storage_mb: f64,
    pub synthetic_link_bw_bps: f64,
    pub synthetic_link_distance_m: f64,
    pub k_paths: usize,
    pub vnf_cycles_per_bit: Vec<f64>,

    // [slices]
    pub rmin_bps_hz: Vec<f64>,
    pub tau_max_ms: Vec<f64>,
    pub demand_mean_mbps: Vec<f64>,
    pub packet_bits: Vec<f64>,
    pub chains: Vec<Vec<usize>>,

    // [prices]
    pub revenue_per_mbps: Vec<f64>,
    pub ran_cost_per_w: f64,
    pub node_cost_per_cycle: f64,
    pub link_cost_per_bit: f64,
    pub theta_revenue: f64,
    pub theta_cost: f64,

    // [agent]
    pub agent: AgentConfig,

    // [sweep]
    pub sweep_users: Vec<usize>,
    pub sweep_demand_pct: Vec<f64>,
    pub sweep_csi_pct: Vec<f64>,
    pub sweep_delay_ms: Vec<f64>,
    pub sweep_rmin_bps_hz: Vec<f64>,
    pub eval_episodes: usize,
}

impl ScenarioConfig {
    /// Full-scale defaults: 24 users over 4 cells and 10 subchannels on the
    /// Abilene core, trained for 4000 episodes with wide networks.
    pub fn paper() -> Self {
        ScenarioConfig {
            users: 24,
            base_stations: 4,
            subchannels: 10,
            slice_count: 3,
            subchannel_bw_hz: 20_000.0,
            noise_dbm_per_hz: -174.0,
            p_max_w: 4.0,
            area_m: 1000.0,
            csi_bound: 0.02,
            demand_bound: 0.05,
            pathloss_exponent: 3.5,
            reference_gain_db: -38.0,
            episode_len: 50,
            reward_coeff: 1.0e-3,
            penalty_weight: 1.0,
            scenario_seed: 1,

            graph: GraphSource::Abilene,
            vms_per_node: 6,
            node_cpu_cycles_per_s: 1.2e9,
            node_ram_mb: 1000.0,
            node_storage_mb: 1000.0,
            vnf_ram_mb: 100.0,
            vnf_storage_mb: 100.0,
            synthetic_link_bw_bps: 1.0e9,
            synthetic_link_distance_m: 100_000.0,
            k_paths: 4,
            // NAT, FW, TM, WOC, IDPS, VOC
            vnf_cycles_per_bit: vec![0.5, 1.0, 1.5, 2.0, 3.0, 4.0],

            rmin_bps_hz: vec![2.0, 1.0, 1.0],
            tau_max_ms: vec![100.0, 60.0, 500.0],
            demand_mean_mbps: vec![20.0, 5.0, 1.0],
            packet_bits: vec![4000.0, 400.0, 1000.0],
            chains: vec![vec![0, 1, 5], vec![0, 1], vec![0, 2]],

            revenue_per_mbps: vec![1.0, 1.0, 1.0],
            ran_cost_per_w: 1.0e-4,
            node_cost_per_cycle: 1.0e-9,
            link_cost_per_bit: 1.0e-8,
            theta_revenue: 60.0,
            theta_cost: 1.0,

            agent: AgentConfig {
                gamma: 0.80,
                batch: 64,
                soft_tau: 0.001,
                actor_lr: 1.0e-5,
                critic_lr: 5.0e-5,
                lr_decay: 0.002,
                explore_noise: 0.1,
                explore_decay: 0.999,
                hidden_layers: 2,
                hidden_width: 512,
                buffer_capacity: 600_000,
                episodes: 4000,
                rdpg_episode_batch: 16,
                rdpg_updates_per_episode: 4,
                warmup_steps: 500,
                sac_init_temperature: 0.2,
                sac_entropy_target_per_dim: -1.0,
                normalize_targets: true,
            },

            sweep_users: vec![4, 8, 12, 16, 20, 24],
            sweep_demand_pct: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            sweep_csi_pct: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
            sweep_delay_ms: vec![60.0, 100.0, 200.0, 300.0, 400.0, 500.0],
            sweep_rmin_bps_hz: vec![1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 3.0, 4.0, 5.0],
            eval_episodes: 20,
        }
    }

    /// Shrunk system for fast local runs and the integration tests: 6 users,
    /// 2 cells, 4 subchannels, a 4-node core, short chains, narrow networks,
    /// 500 episodes. Learning rates are raised to suit the short budget.
    ///
    /// Service targets are looser and transmit power is priced at desk scale:
    /// the 30x shorter training budget needs a reward surface where steady
    /// improvements exist (power efficiency) and a single faded slot is not
    /// an episode-ending cliff.
    pub fn desk() -> Self {
        let mut cfg = Self::paper();
        cfg.users = 6;
        cfg.base_stations = 2;
        cfg.subchannels = 4;
        cfg.episode_len = 20;
        cfg.graph = GraphSource::Synthetic { nodes: 4 };
        cfg.vms_per_node = 2;
        cfg.node_cpu_cycles_per_s = 4.0e8;
        cfg.k_paths = 2;
        cfg.chains = vec![vec![0, 5], vec![0, 1], vec![0, 2]];
        cfg.sweep_users = vec![2, 4, 6];
        cfg.rmin_bps_hz = vec![0.5, 0.25, 0.25];
        cfg.tau_max_ms = vec![400.0, 400.0, 800.0];
        cfg.packet_bits = vec![400.0, 200.0, 300.0];
        cfg.ran_cost_per_w = 3.0;
        cfg.reward_coeff = 0.02;
        cfg.agent = AgentConfig {
            gamma: 0.35,
            batch: 64,
            soft_tau: 0.005,
            actor_lr: 3.0e-4,
            critic_lr: 1.0e-3,
            lr_decay: 0.004,
            explore_noise: 0.2,
            explore_decay: 0.99,
            hidden_width: 64,
            buffer_capacity: 60_000,
            episodes: 500,
            rdpg_episode_batch: 8,
            rdpg_updates_per_episode: 8,
            warmup_steps: 500,
            sac_init_temperature: 0.05,
            ..cfg.agent
        };
        cfg
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            other => Err(ConfigError::Invalid(format!(
                "unknown preset {other:?} (expected `paper` or `desk`)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.users == 0 || self.base_stations == 0 || self.subchannels == 0 {
            return bad("users, base_stations and subchannels must be positive".into());
        }
        if self.slice_count == 0 {
            return bad("slice_count must be positive".into());
        }
        for (name, v) in [
            ("rmin_bps_hz", self.rmin_bps_hz.len()),
            ("tau_max_ms", self.tau_max_ms.len()),
            ("demand_mean_mbps", self.demand_mean_mbps.len()),
            ("packet_bits", self.packet_bits.len()),
            ("chains", self.chains.len()),
            ("revenue_per_mbps", self.revenue_per_mbps.len()),
        ] {
            if v != self.slice_count {
                return bad(format!(
                    "{name} must have one entry per slice ({}), got {v}",
                    self.slice_count
                ));
            }
        }
        if self.chains.iter().any(|c| c.is_empty()) {
            return bad("every slice chain needs at least one VNF".into());
        }
        let n_vnf_types = self.vnf_cycles_per_bit.len();
        if let Some(&f) = self.chains.iter().flatten().find(|&&f| f >= n_vnf_types) {
            return bad(format!(
                "chain references VNF type {f} but only {n_vnf_types} types are priced"
            ));
        }
        if !(self.csi_bound >= 0.0 && self.csi_bound < 1.0) {
            return bad(format!("csi_bound must be in [0, 1), got {}", self.csi_bound));
        }
        if !(self.demand_bound >= 0.0 && self.demand_bound < 1.0) {
            return bad(format!(
                "demand_bound must be in [0, 1), got {}",
                self.demand_bound
            ));
        }
        if self.p_max_w <= 0.0 || self.subchannel_bw_hz <= 0.0 || self.area_m <= 0.0 {
            return bad("p_max_w, subchannel_bw_hz and area_m must be positive".into());
        }
        if self.vms_per_node == 0 || self.k_paths == 0 {
            return bad("vms_per_node and k_paths must be positive".into());
        }
        if self.episode_len == 0 {
            return bad("episode_len must be positive".into());
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive".into());
        }
        if matches!(self.graph, GraphSource::Synthetic { nodes } if nodes < 3) {
            return bad("synthetic core needs at least 3 nodes".into());
        }
        self.agent.validate()
    }

    // -- file format ---------------------------------------------------------

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let f = |x: f64| format!("{x}");
        let fl = |xs: &[f64]| {
            xs.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let ul = |xs: &[usize]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let chains = self
            .chains
            .iter()
            .map(|c| {
                c.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join(" | ");

        let _ = write!(
            s,
            "[scenario]\n\
             users = {}\n\
             base_stations = {}\n\
             subchannels = {}\n\
             slice_count = {}\n\
             subchannel_bw_hz = {}\n\
             noise_dbm_per_hz = {}\n\
             p_max_w = {}\n\
             area_m = {}\n\
             csi_bound = {}\n\
             demand_bound = {}\n\
             pathloss_exponent = {}\n\
             reference_gain_db = {}\n\
             episode_len = {}\n\
             reward_coeff = {}\n\
             penalty_weight = {}\n\
             scenario_seed = {}\n\n",
            self.users,
            self.base_stations,
            self.subchannels,
            self.slice_count,
            f(self.subchannel_bw_hz),
            f(self.noise_dbm_per_hz),
            f(self.p_max_w),
            f(self.area_m),
            f(self.csi_bound),
            f(self.demand_bound),
            f(self.pathloss_exponent),
            f(self.reference_gain_db),
            self.episode_len,
            f(self.reward_coeff),
            f(self.penalty_weight),
            self.scenario_seed,
        );
        let _ = write!(
            s,
            "[core]\n\
             graph = {}\n\
             vms_per_node = {}\n\
             node_cpu_cycles_per_s = {}\n\
             node_ram_mb = {}\n\
             node_storage_mb = {}\n\
             vnf_ram_mb = {}\n\
             vnf_storage_mb = {}\n\
             synthetic_link_bw_bps = {}\n\
             synthetic_link_distance_m = {}\n\
             k_paths = {}\n\
             vnf_cycles_per_bit = {}\n\n",
            self.graph.to_value(),
            self.vms_per_node,
            f(self.node_cpu_cycles_per_s),
            f(self.node_ram_mb),
            f(self.node_storage_mb),
            f(self.vnf_ram_mb),
            f(self.vnf_storage_mb),
            f(self.synthetic_link_bw_bps),
            f(self.synthetic_link_distance_m),
            self.k_paths,
            fl(&self.vnf_cycles_per_bit),
        );
        let _ = write!(
            s,
            "[slices]\n\
             rmin_bps_hz = {}\n\
             tau_max_ms = {}\n\
             demand_mean_mbps = {}\n\
             packet_bits = {}\n\
             chains = {}\n\n",
            fl(&self.rmin_bps_hz),
            fl(&self.tau_max_ms),
            fl(&self.demand_mean_mbps),
            fl(&self.packet_bits),
            chains,
        );
        let _ = write!(
            s,
            "[prices]\n\
             revenue_per_mbps = {}\n\
             ran_cost_per_w = {}\n\
             node_cost_per_cycle = {}\n\
             link_cost_per_bit = {}\n\
             theta_revenue = {}\n\
             theta_cost = {}\n\n",
            fl(&self.revenue_per_mbps),
            f(self.ran_cost_per_w),
            f(self.node_cost_per_cycle),
            f(self.link_cost_per_bit),
            f(self.theta_revenue),
            f(self.theta_cost),
        );
        let a = &self.agent;
        let _ = write!(
            s,
            "[agent]\n\
             gamma = {}\n\
             batch = {}\n\
             soft_tau = {}\n\
             actor_lr = {}\n\
             critic_lr = {}\n\
             lr_decay = {}\n\
             explore_noise = {}\n\
             explore_decay = {}\n\
             hidden_layers = {}\n\
             hidden_width = {}\n\
             buffer_capacity = {}\n\
             episodes = {}\n\
             rdpg_episode_batch = {}\n\
             rdpg_updates_per_episode = {}\n\
             warmup_steps = {}\n\
             sac_init_temperature = {}\n\
             sac_entropy_target_per_dim = {}\n\
             normalize_targets = {}\n\n",
            f(a.gamma),
            a.batch,
            f(a.soft_tau),
            f(a.actor_lr),
            f(a.critic_lr),
            f(a.lr_decay),
            f(a.explore_noise),
            f(a.explore_decay),
            a.hidden_layers,
            a.hidden_width,
            a.buffer_capacity,
            a.episodes,
            a.rdpg_episode_batch,
            a.rdpg_updates_per_episode,
            a.warmup_steps,
            f(a.sac_init_temperature),
            f(a.sac_entropy_target_per_dim),
            a.normalize_targets,
        );
        let _ = write!(
            s,
            "[sweep]\n\
             users = {}\n\
             demand_pct = {}\n\
             csi_pct = {}\n\
             delay_ms = {}\n\
             rmin_bps_hz = {}\n\
             eval_episodes = {}\n",
            ul(&self.sweep_users),
            fl(&self.sweep_demand_pct),
            fl(&self.sweep_csi_pct),
            fl(&self.sweep_delay_ms),
            fl(&self.sweep_rmin_bps_hz),
            self.eval_episodes,
        );
        s
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut kv = Kv::scan(text)?;

        let cfg = ScenarioConfig {
            users: kv.get("scenario", "users")?,
            base_stations: kv.get("scenario", "base_stations")?,
            subchannels: kv.get("scenario", "subchannels")?,
            slice_count: kv.get("scenario", "slice_count")?,
            subchannel_bw_hz: kv.get("scenario", "subchannel_bw_hz")?,
            noise_dbm_per_hz: kv.get("scenario", "noise_dbm_per_hz")?,
            p_max_w: kv.get("scenario", "p_max_w")?,
            area_m: kv.get("scenario", "area_m")?,
            csi_bound: kv.get("scenario", "csi_bound")?,
            demand_bound: kv.get("scenario", "demand_bound")?,
            pathloss_exponent: kv.get("scenario", "pathloss_exponent")?,
            reference_gain_db: kv.get("scenario", "reference_gain_db")?,
            episode_len: kv.get("scenario", "episode_len")?,
            reward_coeff: kv.get("scenario", "reward_coeff")?,
            penalty_weight: kv.get("scenario", "penalty_weight")?,
            scenario_seed: kv.get("scenario", "scenario_seed")?,

            graph: {
                let raw: String = kv.get("core", "graph")?;
                GraphSource::parse(&raw).map_err(|msg| ConfigError::Value {
                    section: "core".into(),
                    key: "graph".into(),
                    msg,
                })?
            },
            vms_per_node: kv.get("core", "vms_per_node")?,
            node_cpu_cycles_per_s: kv.get("core", "node_cpu_cycles_per_s")?,
            node_ram_mb: kv.get("core", "node_ram_mb")?,
            node_storage_mb: kv.get("core", "node_storage_mb")?,
            vnf_ram_mb: kv.get("core", "vnf_ram_mb")?,
            vnf_storage_mb: kv.get("core", "vnf_storage_mb")?,
            synthetic_link_bw_bps: kv.get("core", "synthetic_link_bw_bps")?,
            synthetic_link_distance_m: kv.get("core", "synthetic_link_distance_m")?,
            k_paths: kv.get("core", "k_paths")?,
            vnf_cycles_per_bit: kv.get_f64_list("core", "vnf_cycles_per_bit")?,

            rmin_bps_hz: kv.get_f64_list("slices", "rmin_bps_hz")?,
            tau_max_ms: kv.get_f64_list("slices", "tau_max_ms")?,
            demand_mean_mbps: kv.get_f64_list("slices", "demand_mean_mbps")?,
            packet_bits: kv.get_f64_list("slices", "packet_bits")?,
            chains: kv.get_chains("slices", "chains")?,

            revenue_per_mbps: kv.get_f64_list("prices", "revenue_per_mbps")?,
            ran_cost_per_w: kv.get("prices", "ran_cost_per_w")?,
            node_cost_per_cycle: kv.get("prices", "node_cost_per_cycle")?,
            link_cost_per_bit: kv.get("prices", "link_cost_per_bit")?,
            theta_revenue: kv.get("prices", "theta_revenue")?,
            theta_cost: kv.get("prices", "theta_cost")?,

            agent: AgentConfig {
                gamma: kv.get("agent", "gamma")?,
                batch: kv.get("agent", "batch")?,
                soft_tau: kv.get("agent", "soft_tau")?,
                actor_lr: kv.get("agent", "actor_lr")?,
                critic_lr: kv.get("agent", "critic_lr")?,
                lr_decay: kv.get("agent", "lr_decay")?,
                explore_noise: kv.get("agent", "explore_noise")?,
                explore_decay: kv.get("agent", "explore_decay")?,
                hidden_layers: kv.get("agent", "hidden_layers")?,
                hidden_width: kv.get("agent", "hidden_width")?,
                buffer_capacity: kv.get("agent", "buffer_capacity")?,
                episodes: kv.get("agent", "episodes")?,
                rdpg_episode_batch: kv.get("agent", "rdpg_episode_batch")?,
                rdpg_updates_per_episode: kv.get("agent", "rdpg_updates_per_episode")?,
                warmup_steps: kv.get("agent", "warmup_steps")?,
                sac_init_temperature: kv.get("agent", "sac_init_temperature")?,
                sac_entropy_target_per_dim: kv.get("agent", "sac_entropy_target_per_dim")?,
                normalize_targets: kv.get("agent", "normalize_targets")?,
            },

            sweep_users: kv.get_usize_list("sweep", "users")?,
            sweep_demand_pct: kv.get_f64_list("sweep", "demand_pct")?,
            sweep_csi_pct: kv.get_f64_list("sweep", "csi_pct")?,
            sweep_delay_ms: kv.get_f64_list("sweep", "delay_ms")?,
            sweep_rmin_bps_hz: kv.get_f64_list("sweep", "rmin_bps_hz")?,
            eval_episodes: kv.get("sweep", "eval_episodes")?,
        };

        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Low-level key/value scanning
// ---------------------------------------------------------------------------

trait FromValue: Sized {
    fn from_value(v: &str) -> Result<Self, String>;
}

macro_rules! from_value_via_parse {
    ($($t:ty),*) => {$(
        impl FromValue for $t {
            fn from_value(v: &str) -> Result<Self, String> {
                v.parse().map_err(|_| format!("cannot parse {v:?}"))
            }
        }
    )*};
}
from_value_via_parse!(usize, u64, f64, bool);

impl FromValue for String {
    fn from_value(v: &str) -> Result<Self, String> {
        Ok(v.to_string())
    }
}

struct Kv {
    entries: BTreeMap<(String, String), (String, bool)>,
}

impl Kv {
    fn scan(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                msg: format!("expected `key = value`, got {body:?}"),
            })?;
            if section.is_empty() {
                return Err(ConfigError::Parse {
                    line,
                    msg: "key before any [section]".into(),
                });
            }
            let prev = entries.insert(
                (section.clone(), key.trim().to_string()),
                (value.trim().to_string(), false),
            );
            if prev.is_some() {
                return Err(ConfigError::Parse {
                    line,
                    msg: format!("duplicate key {}", key.trim()),
                });
            }
        }
        Ok(Kv { entries })
    }

    fn take(&mut self, section: &str, key: &str) -> Result<String, ConfigError> {
        match self.entries.get_mut(&(section.to_string(), key.to_string())) {
            Some((v, used)) => {
                *used = true;
                Ok(v.clone())
            }
            None => Err(ConfigError::Missing {
                section: section.into(),
                key: key.into(),
            }),
        }
    }

    fn get<T: FromValue>(&mut self, section: &str, key: &str) -> Result<T, ConfigError> {
        let raw = self.take(section, key)?;
        T::from_value(&raw).map_err(|msg| ConfigError::Value {
            section: section.into(),
            key: key.into(),
            msg,
        })
    }

    fn get_list<T: FromValue>(&mut self, section: &str, key: &str) -> Result<Vec<T>, ConfigError> {
        let raw = self.take(section, key)?;
        raw.split(',')
            .map(|item| T::from_value(item.trim()))
            .collect::<Result<_, _>>()
            .map_err(|msg| ConfigError::Value {
                section: section.into(),
                key: key.into(),
                msg,
            })
    }

    fn get_f64_list(&mut self, section: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.get_list(section, key)
    }

    fn get_usize_list(&mut self, section: &str, key: &str) -> Result<Vec<usize>, ConfigError> {
        self.get_list(section, key)
    }

    /// Pipe-separated chains of space-separated VNF type ids.
    fn get_chains(&mut self, section: &str, key: &str) -> Result<Vec<Vec<usize>>, ConfigError> {
        let raw = self.take(section, key)?;
        raw.split('|')
            .map(|chain| {
                chain
                    .split_whitespace()
                    .map(usize::from_value)
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()
            .map_err(|msg| ConfigError::Value {
                section: section.into(),
                key: key.into(),
                msg,
            })
    }

    /// Errors if any scanned key was never consumed.
    fn finish(self) -> Result<(), ConfigError> {
        for ((section, key), (_, used)) in self.entries {
            if !used {
                return Err(ConfigError::Unknown { section, key });
            }
        }
        Ok(())
    }
}
