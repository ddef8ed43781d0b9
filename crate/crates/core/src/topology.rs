//! Physical core-network topology: nodes, weighted links, and simple-path
//! enumeration.
//!
//! Graphs are loaded from a small plain-text format (see [`CoreGraph::parse`])
//! or built synthetically for tests and small presets. The bundled Abilene
//! backbone (12 nodes, 15 links) is the default substrate.
//!
//! Path enumeration is exhaustive: every simple path between a node pair is
//! generated, sorted, and truncated to the `k` best. That is deliberate; the
//! cores this simulator targets are backbone-sized (tens of nodes), where
//! exhaustive enumeration is cheap and removes any doubt about which paths
//! exist and in what order.

use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Propagation speed used for all distance-to-delay conversions, in m/s.
pub const SIGNAL_SPEED_M_PER_S: f64 = 3.0e8;

/// Index of a node in a [`CoreGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Undirected physical link. `a < b` always holds after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub distance_m: f64,
    pub bandwidth_bps: f64,
}

impl Link {
    /// Signal propagation time across this link, in seconds.
    pub fn propagation_s(&self) -> f64 {
        self.distance_m / SIGNAL_SPEED_M_PER_S
    }

    pub fn touches(&self, n: NodeId) -> bool {
        self.a == n || self.b == n
    }

    pub fn other_end(&self, n: NodeId) -> NodeId {
        if self.a == n {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate node id {0}")]
    DuplicateNode(usize),
    #[error("node ids must be dense 0..n, missing {0}")]
    SparseNodeIds(usize),
    #[error("link references unknown node {0}")]
    UnknownNode(usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate link between {0} and {1}")]
    DuplicateLink(usize, usize),
    #[error("link {a}-{b} has non-positive {what}")]
    BadLinkValue { a: usize, b: usize, what: &'static str },
    #[error("graph is not connected ({reachable} of {total} nodes reachable from node 0)")]
    Disconnected { reachable: usize, total: usize },
    #[error("graph has no nodes")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Undirected multigraph-free core network.
#[derive(Debug, Clone)]
pub struct CoreGraph {
    names: Vec<String>,
    links: Vec<Link>,
    // adj[n] sorted by neighbor id; second element indexes `links`.
    adj: Vec<Vec<(NodeId, usize)>>,
}

impl CoreGraph {
    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn node_name(&self, n: NodeId) -> &str {
        &self.names[n.0]
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, idx: usize) -> &Link {
        &self.links[idx]
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.names.len()).map(NodeId)
    }

    pub fn neighbors(&self, n: NodeId) -> &[(NodeId, usize)] {
        &self.adj[n.0]
    }

    /// Link index joining `a` and `b`, if one exists.
    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<usize> {
        self.adj[a.0]
            .iter()
            .find(|(nb, _)| *nb == b)
            .map(|(_, li)| *li)
    }

    /// Symmetric boolean adjacency matrix.
    pub fn connectivity_matrix(&self) -> Vec<Vec<bool>> {
        let n = self.node_count();
        let mut m = vec![vec![false; n]; n];
        for l in &self.links {
            m[l.a.0][l.b.0] = true;
            m[l.b.0][l.a.0] = true;
        }
        m
    }

    pub fn is_connected(&self) -> bool {
        self.reachable_from_zero() == self.node_count()
    }

    pub fn ensure_connected(&self) -> Result<(), GraphError> {
        let reachable = self.reachable_from_zero();
        if reachable == self.node_count() {
            Ok(())
        } else {
            Err(GraphError::Disconnected {
                reachable,
                total: self.node_count(),
            })
        }
    }

    fn reachable_from_zero(&self) -> usize {
        if self.names.is_empty() {
            return 0;
        }
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![NodeId(0)];
        seen[0] = true;
        let mut count = 1;
        while let Some(n) = stack.pop() {
            for &(nb, _) in &self.adj[n.0] {
                if !seen[nb.0] {
                    seen[nb.0] = true;
                    count += 1;
                    stack.push(nb);
                }
            }
        }
        count
    }

    /// Builds a graph from explicit parts. Node ids in `links` must be dense
    /// `0..names.len()`.
    pub fn from_parts(
        names: Vec<String>,
        raw_links: Vec<(usize, usize, f64, f64)>,
    ) -> Result<Self, GraphError> {
        if names.is_empty() {
            return Err(GraphError::Empty);
        }
        let n = names.len();
        let mut links = Vec::with_capacity(raw_links.len());
        for (a, b, dist, bw) in raw_links {
            if a >= n {
                return Err(GraphError::UnknownNode(a));
            }
            if b >= n {
                return Err(GraphError::UnknownNode(b));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            // NaN must fail too, hence the positive-form check
            if !(dist.is_finite() && dist > 0.0) {
                return Err(GraphError::BadLinkValue { a, b, what: "distance" });
            }
            if !(bw.is_finite() && bw > 0.0) {
                return Err(GraphError::BadLinkValue { a, b, what: "bandwidth" });
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if links
                .iter()
                .any(|l: &Link| l.a.0 == lo && l.b.0 == hi)
            {
                return Err(GraphError::DuplicateLink(lo, hi));
            }
            links.push(Link {
                a: NodeId(lo),
                b: NodeId(hi),
                distance_m: dist,
                bandwidth_bps: bw,
            });
        }
        let mut adj = vec![Vec::new(); n];
        for (li, l) in links.iter().enumerate() {
            adj[l.a.0].push((l.b, li));
            adj[l.b.0].push((l.a, li));
        }
        for row in &mut adj {
            row.sort_by_key(|(nb, _)| *nb);
        }
        Ok(CoreGraph { names, links, adj })
    }

    /// Parses the plain-text graph format:
    ///
    /// ```text
    /// [nodes]
    /// 0 SEAT
    /// 1 DENV
    /// [links]
    /// 0 1 1300000 1000000000    # id_a id_b distance_m bandwidth_bps
    /// ```
    ///
    /// `#` starts a comment. Node names are optional; ids must be dense.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Nodes,
            Links,
        }
        let mut section = Section::None;
        let mut nodes: Vec<(usize, String)> = Vec::new();
        let mut raw_links = Vec::new();

        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            match body {
                "[nodes]" => {
                    section = Section::Nodes;
                    continue;
                }
                "[links]" => {
                    section = Section::Links;
                    continue;
                }
                _ => {}
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            match section {
                Section::None => {
                    return Err(GraphError::Parse {
                        line,
                        msg: "content before any [nodes]/[links] section".into(),
                    })
                }
                Section::Nodes => {
                    let id: usize = fields[0].parse().map_err(|_| GraphError::Parse {
                        line,
                        msg: format!("bad node id {:?}", fields[0]),
                    })?;
                    let name = fields
                        .get(1)
                        .map(|s| s.to_string())
                        .unwrap_or_else(|| format!("n{id}"));
                    if nodes.iter().any(|(i, _)| *i == id) {
                        return Err(GraphError::DuplicateNode(id));
                    }
                    nodes.push((id, name));
                }
                Section::Links => {
                    if fields.len() != 4 {
                        return Err(GraphError::Parse {
                            line,
                            msg: format!(
                                "expected `id_a id_b distance_m bandwidth_bps`, got {} fields",
                                fields.len()
                            ),
                        });
                    }
                    let mut nums = [0f64; 2];
                    let a: usize = fields[0].parse().map_err(|_| GraphError::Parse {
                        line,
                        msg: format!("bad node id {:?}", fields[0]),
                    })?;
                    let b: usize = fields[1].parse().map_err(|_| GraphError::Parse {
                        line,
                        msg: format!("bad node id {:?}", fields[1]),
                    })?;
                    for (slot, f) in nums.iter_mut().zip(&fields[2..]) {
                        *slot = f.parse().map_err(|_| GraphError::Parse {
                            line,
                            msg: format!("bad number {f:?}"),
                        })?;
                    }
                    raw_links.push((a, b, nums[0], nums[1]));
                }
            }
        }

        if nodes.is_empty() {
            return Err(GraphError::Empty);
        }
        nodes.sort_by_key(|(id, _)| *id);
        for (want, (got, _)) in nodes.iter().enumerate() {
            if *got != want {
                return Err(GraphError::SparseNodeIds(want));
            }
        }
        let names = nodes.into_iter().map(|(_, name)| name).collect();
        Self::from_parts(names, raw_links)
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// The bundled Abilene backbone: 12 nodes, 15 links, 1 Gbps everywhere.
    pub fn abilene() -> Self {
        Self::parse(include_str!("../assets/abilene.graph"))
            .expect("bundled abilene.graph must parse")
    }

    /// Ring over `n` nodes plus one cross chord (0 to n/2), giving `n + 1`
    /// links and at least three routes between chord endpoints. Used by the
    /// desk-scale preset and tests.
    pub fn synthetic(n: usize, link_distance_m: f64, bandwidth_bps: f64) -> Self {
        assert!(n >= 3, "synthetic core needs at least 3 nodes");
        let names = (0..n).map(|i| format!("n{i}")).collect();
        let mut raw = Vec::with_capacity(n + 1);
        for i in 0..n {
            raw.push(((i), (i + 1) % n, link_distance_m, bandwidth_bps));
        }
        if n >= 4 {
            raw.push((0, n / 2, link_distance_m, bandwidth_bps));
        }
        Self::from_parts(names, raw).expect("synthetic graph construction")
    }
}

/// A loop-free walk through the graph. `links[j]` joins `nodes[j]` and
/// `nodes[j + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhysicalPath {
    pub nodes: Vec<NodeId>,
    pub links: Vec<usize>,
}

impl PhysicalPath {
    pub fn hops(&self) -> usize {
        self.links.len()
    }

    pub fn source(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn target(&self) -> NodeId {
        *self.nodes.last().unwrap()
    }

    pub fn distance_m(&self, g: &CoreGraph) -> f64 {
        self.links.iter().map(|&li| g.link(li).distance_m).sum()
    }

    /// Total propagation time along the path, in seconds.
    pub fn propagation_s(&self, g: &CoreGraph) -> f64 {
        self.distance_m(g) / SIGNAL_SPEED_M_PER_S
    }

    pub fn uses_link(&self, li: usize) -> bool {
        self.links.contains(&li)
    }
}

/// Up to `k` shortest simple paths from `from` to `to`.
///
/// Ordering is total and deterministic: fewest hops first, then shortest
/// total distance, then lexicographically smallest node sequence. Returns an
/// empty vector when `from == to`; co-located endpoints need no path.
pub fn enumerate_paths(g: &CoreGraph, from: NodeId, to: NodeId, k: usize) -> Vec<PhysicalPath> {
    if from == to || k == 0 {
        return Vec::new();
    }
    let mut all = Vec::new();
    let mut visited = vec![false; g.node_count()];
    visited[from.0] = true;
    let mut nodes = vec![from];
    let mut links = Vec::new();
    dfs_paths(g, to, &mut visited, &mut nodes, &mut links, &mut all);
    all.sort_by(|p, q| {
        p.hops()
            .cmp(&q.hops())
            .then_with(|| {
                p.distance_m(g)
                    .partial_cmp(&q.distance_m(g))
                    .expect("path distances are finite")
            })
            .then_with(|| p.nodes.cmp(&q.nodes))
    });
    all.truncate(k);
    all
}

/// Candidate routes for every ordered node pair, enumerated once per
/// scenario. `paths(a, b)` is empty exactly when `a == b`.
#[derive(Debug, Clone)]
pub struct PathTable {
    k: usize,
    table: Vec<Vec<Vec<PhysicalPath>>>,
}

impl PathTable {
    pub fn build(g: &CoreGraph, k: usize) -> Self {
        let n = g.node_count();
        let table = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| enumerate_paths(g, NodeId(a), NodeId(b), k))
                    .collect()
            })
            .collect();
        PathTable { k, table }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn paths(&self, from: NodeId, to: NodeId) -> &[PhysicalPath] {
        &self.table[from.0][to.0]
    }
}

fn dfs_paths(
    g: &CoreGraph,
    to: NodeId,
    visited: &mut [bool],
    nodes: &mut Vec<NodeId>,
    links: &mut Vec<usize>,
    out: &mut Vec<PhysicalPath>,
) {
    let here = *nodes.last().unwrap();
    if here == to {
        out.push(PhysicalPath {
            nodes: nodes.clone(),
            links: links.clone(),
        });
        return;
    }
    for &(nb, li) in g.neighbors(here) {
        if visited[nb.0] {
            continue;
        }
        visited[nb.0] = true;
        nodes.push(nb);
        links.push(li);
        dfs_paths(g, to, visited, nodes, links, out);
        links.pop();
        nodes.pop();
        visited[nb.0] = false;
    }
}
