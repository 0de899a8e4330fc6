//! Acquaintance graphs and the k-hop social filter.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::population::CommuterId;

/// Nodes with more acquaintances than this are treated as services and dropped.
pub const DEFAULT_DEGREE_CAP: usize = 1000;

#[derive(Debug, Error)]
pub enum SocialError {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("bad header: expected `user_a,user_b`")]
    Header,
    #[error("invalid generator parameters: {0}")]
    Generator(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Maximum acquaintance distance allowed between two riders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SocialHops {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl SocialHops {
    pub fn from_count(k: u32) -> Option<Self> {
        match k {
            1 => Some(SocialHops::One),
            2 => Some(SocialHops::Two),
            _ => None,
        }
    }

    pub fn count(self) -> u32 {
        match self {
            SocialHops::One => 1,
            SocialHops::Two => 2,
        }
    }
}

/// One phone call between two users.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallRecord {
    pub caller: CommuterId,
    pub callee: CommuterId,
}

/// Undirected simple graph; adjacency lists are kept sorted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SocialGraph {
    adjacency: HashMap<CommuterId, Vec<CommuterId>>,
}

impl SocialGraph {
    /// Builds a graph from unordered pairs, dropping self-loops and duplicates.
    pub fn from_edges<I>(edges: I) -> Self
    where
        I: IntoIterator<Item = (CommuterId, CommuterId)>,
    {
        let mut adjacency: HashMap<CommuterId, Vec<CommuterId>> = HashMap::new();
        for (a, b) in edges {
            if a == b {
                continue;
            }
            adjacency.entry(a).or_default().push(b);
            adjacency.entry(b).or_default().push(a);
        }
        for list in adjacency.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        Self { adjacency }
    }

    /// One edge per pair of users with at least one call in either direction.
    ///
    /// Nodes whose degree exceeds `degree_cap` are removed together with their
    /// edges, in a single pass over the finished graph.
    pub fn build_from_calls(calls: &[CallRecord], degree_cap: usize) -> Self {
        let mut g = Self::from_edges(calls.iter().map(|c| (c.caller, c.callee)));
        let hubs: BTreeSet<CommuterId> =
            g.adjacency.iter().filter(|(_, adj)| adj.len() > degree_cap).map(|(&n, _)| n).collect();
        if hubs.is_empty() {
            return g;
        }
        g.adjacency.retain(|n, _| !hubs.contains(n));
        for list in g.adjacency.values_mut() {
            list.retain(|n| !hubs.contains(n));
        }
        g.adjacency.retain(|_, adj| !adj.is_empty());
        g
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn contains(&self, node: CommuterId) -> bool {
        self.adjacency.contains_key(&node)
    }

    pub fn neighbors(&self, node: CommuterId) -> &[CommuterId] {
        self.adjacency.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn degree(&self, node: CommuterId) -> usize {
        self.neighbors(node).len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.values().map(Vec::len).max().unwrap_or(0)
    }

    pub fn nodes(&self) -> impl Iterator<Item = CommuterId> + '_ {
        self.adjacency.keys().copied()
    }

    /// Edges as `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(CommuterId, CommuterId)> {
        let mut out: Vec<_> = self
            .adjacency
            .iter()
            .flat_map(|(&a, adj)| adj.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
            .collect();
        out.sort_unstable();
        out
    }

    /// True iff the shortest path between `u` and `v` has at most `hops` edges.
    pub fn within_k_hops(&self, u: CommuterId, v: CommuterId, hops: SocialHops) -> bool {
        let (Some(nu), Some(nv)) = (self.adjacency.get(&u), self.adjacency.get(&v)) else {
            return false;
        };
        if u == v || nu.binary_search(&v).is_ok() {
            return true;
        }
        hops == SocialHops::Two && sorted_intersect(nu, nv)
    }

    /// For every node with at least one neighbour: mean neighbour degree divided
    /// by its own degree. Sorted ascending.
    pub fn friendship_paradox_cdf(&self) -> Vec<f64> {
        let mut ratios: Vec<f64> = self
            .adjacency
            .values()
            .filter(|adj| !adj.is_empty())
            .map(|adj| {
                let mean = adj.iter().map(|&n| self.degree(n) as f64).sum::<f64>() / adj.len() as f64;
                mean / adj.len() as f64
            })
            .collect();
        ratios.sort_by(f64::total_cmp);
        ratios
    }

    /// Barabási–Albert style preferential attachment over `nodes`.
    ///
    /// Each arriving node attaches to `mean_degree / 2` distinct earlier nodes
    /// (randomly rounded when fractional) with probability proportional to degree.
    /// Arrival order is a seeded shuffle of `nodes`.
    pub fn preferential_attachment(nodes: &[CommuterId], mean_degree: f64, seed: u64) -> Result<Self, SocialError> {
        let half = mean_degree / 2.0;
        if !(half >= 1.0 && half.is_finite()) {
            return Err(SocialError::Generator(format!("mean degree {mean_degree} must be at least 2")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order = nodes.to_vec();
        order.sort_unstable();
        order.dedup();
        order.shuffle(&mut rng);
        let seed_size = (half.ceil() as usize + 1).min(order.len());
        let mut edges = Vec::new();
        // Every edge endpoint appears once here; uniform picks are degree-proportional.
        let mut endpoints: Vec<CommuterId> = Vec::new();
        for i in 0..seed_size {
            for j in (i + 1)..seed_size {
                edges.push((order[i], order[j]));
                endpoints.extend([order[i], order[j]]);
            }
        }
        let frac = half.fract();
        for (i, &node) in order.iter().enumerate().skip(seed_size) {
            let m = (half.floor() as usize + usize::from(rng.random_bool(frac))).min(i);
            let mut targets: Vec<CommuterId> = Vec::with_capacity(m);
            while targets.len() < m {
                let t = endpoints[rng.random_range(0..endpoints.len())];
                if !targets.contains(&t) {
                    targets.push(t);
                }
            }
            for t in targets {
                edges.push((node, t));
                endpoints.extend([node, t]);
            }
        }
        Ok(Self::from_edges(edges))
    }
}

fn sorted_intersect(a: &[CommuterId], b: &[CommuterId]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

pub fn read_edge_list<R: Read>(reader: R) -> Result<SocialGraph, SocialError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?;
    if header.iter().map(str::trim).ne(["user_a", "user_b"]) {
        return Err(SocialError::Header);
    }
    let mut edges = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse = |i: usize| -> Result<CommuterId, SocialError> {
            let raw = record.get(i).unwrap_or("");
            raw.trim()
                .parse()
                .map(CommuterId)
                .map_err(|e| SocialError::Row { line, message: format!("`{raw}`: {e}") })
        };
        edges.push((parse(0)?, parse(1)?));
    }
    Ok(SocialGraph::from_edges(edges))
}

pub fn write_edge_list<W: Write>(graph: &SocialGraph, writer: W) -> Result<(), SocialError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_a", "user_b"])?;
    for (a, b) in graph.edges() {
        w.write_record([a.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<SocialGraph, SocialError> {
    read_edge_list(std::fs::File::open(path)?)
}

pub fn save_edge_list(graph: &SocialGraph, path: impl AsRef<Path>) -> Result<(), SocialError> {
    write_edge_list(graph, std::fs::File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(n: u64) -> CommuterId {
        CommuterId(n)
    }

    fn call(a: u64, b: u64) -> CallRecord {
        CallRecord { caller: id(a), callee: id(b) }
    }

    #[test]
    fn no_calls_no_graph() {
        let g = SocialGraph::build_from_calls(&[], DEFAULT_DEGREE_CAP);
        assert!(g.is_empty());
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn one_call_one_undirected_edge() {
        let g = SocialGraph::build_from_calls(&[call(1, 2), call(2, 1), call(1, 2)], DEFAULT_DEGREE_CAP);
        assert_eq!(g.edges(), vec![(id(1), id(2))]);
        assert!(g.within_k_hops(id(2), id(1), SocialHops::One));
    }

    #[test]
    fn hub_over_cap_is_removed() {
        let mut calls: Vec<_> = (1..=1001).map(|n| call(0, n)).collect();
        calls.push(call(1, 2));
        let g = SocialGraph::build_from_calls(&calls, DEFAULT_DEGREE_CAP);
        assert!(!g.contains(id(0)));
        assert_eq!(g.edges(), vec![(id(1), id(2))]);
        assert!(g.max_degree() <= DEFAULT_DEGREE_CAP);

        let calls: Vec<_> = (1..=1000).map(|n| call(0, n)).collect();
        assert_eq!(SocialGraph::build_from_calls(&calls, DEFAULT_DEGREE_CAP).degree(id(0)), 1000);
    }

    #[test]
    fn hop_queries() {
        let g = SocialGraph::from_edges([(id(1), id(2)), (id(2), id(3)), (id(5), id(6))]);
        assert!(g.within_k_hops(id(1), id(2), SocialHops::One));
        assert!(!g.within_k_hops(id(1), id(3), SocialHops::One));
        assert!(g.within_k_hops(id(1), id(3), SocialHops::Two));
        assert!(!g.within_k_hops(id(1), id(5), SocialHops::Two));
        assert!(!g.within_k_hops(id(1), id(99), SocialHops::Two));
    }

    #[test]
    fn star_ratios() {
        let n = 6u64;
        let g = SocialGraph::from_edges((1..n).map(|leaf| (id(0), id(leaf))));
        let r = g.friendship_paradox_cdf();
        assert_eq!(r.len(), n as usize);
        assert_eq!(r[0], 1.0 / (n - 1) as f64);
        assert!(r[1..].iter().all(|&x| x == (n - 1) as f64));
    }

    #[test]
    fn complete_graph_ratios_are_one() {
        let edges = (0..7u64).flat_map(|a| ((a + 1)..7).map(move |b| (id(a), id(b))));
        let g = SocialGraph::from_edges(edges);
        assert!(g.friendship_paradox_cdf().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn preferential_attachment_degree_and_paradox() {
        let nodes: Vec<_> = (0..10_000).map(id).collect();
        let g = SocialGraph::preferential_attachment(&nodes, 6.0, 11).unwrap();
        assert_eq!(g.node_count(), 10_000);
        let mean = 2.0 * g.edge_count() as f64 / g.node_count() as f64;
        assert!((mean - 6.0).abs() < 0.05, "mean degree {mean}");
        let r = g.friendship_paradox_cdf();
        let above = r.iter().filter(|&&x| x > 1.0).count() as f64 / r.len() as f64;
        assert!(above >= 0.85, "only {above} of nodes see the paradox");
        assert_eq!(g, SocialGraph::preferential_attachment(&nodes, 6.0, 11).unwrap());
    }

    #[test]
    fn fractional_mean_degree() {
        let nodes: Vec<_> = (0..5_000).map(id).collect();
        let g = SocialGraph::preferential_attachment(&nodes, 10.95, 2).unwrap();
        let mean = 2.0 * g.edge_count() as f64 / g.node_count() as f64;
        assert!((mean - 10.95).abs() < 0.2, "mean degree {mean}");
        assert!(SocialGraph::preferential_attachment(&nodes, 1.0, 2).is_err());
    }

    #[test]
    fn edge_list_round_trip_dedups() {
        let text = "user_a,user_b\n1,2\n2,1\n3,4\n3,3\n";
        let g = read_edge_list(text.as_bytes()).unwrap();
        assert_eq!(g.edges(), vec![(id(1), id(2)), (id(3), id(4))]);
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "user_a,user_b\n1,2\n3,4\n");
        assert!(read_edge_list("a,b\n".as_bytes()).is_err());
        assert!(matches!(read_edge_list("user_a,user_b\n1,x\n".as_bytes()), Err(SocialError::Row { line: 2, .. })));
    }

    fn graph_strategy() -> impl Strategy<Value = SocialGraph> {
        prop::collection::vec((0u64..30, 0u64..30), 0..80)
            .prop_map(|e| SocialGraph::from_edges(e.into_iter().map(|(a, b)| (id(a), id(b)))))
    }

    // Breadth-first distance, independent of the neighbour-intersection shortcut.
    fn bfs_distance(g: &SocialGraph, u: CommuterId, v: CommuterId) -> Option<usize> {
        if !g.contains(u) || !g.contains(v) {
            return None;
        }
        let mut dist = HashMap::from([(u, 0usize)]);
        let mut queue = std::collections::VecDeque::from([u]);
        while let Some(x) = queue.pop_front() {
            if x == v {
                return dist.get(&x).copied();
            }
            for &y in g.neighbors(x) {
                if !dist.contains_key(&y) {
                    dist.insert(y, dist[&x] + 1);
                    queue.push_back(y);
                }
            }
        }
        None
    }

    proptest! {
        #[test]
        fn hop_filter_matches_bfs(g in graph_strategy(), u in 0u64..30, v in 0u64..30) {
            let d = bfs_distance(&g, id(u), id(v));
            for hops in [SocialHops::One, SocialHops::Two] {
                let expected = d.is_some_and(|d| d <= hops.count() as usize);
                prop_assert_eq!(g.within_k_hops(id(u), id(v), hops), expected);
                prop_assert_eq!(g.within_k_hops(id(u), id(v), hops), g.within_k_hops(id(v), id(u), hops));
            }
            if g.within_k_hops(id(u), id(v), SocialHops::One) {
                prop_assert!(g.within_k_hops(id(u), id(v), SocialHops::Two));
            }
        }

        #[test]
        fn simple_graph_invariants(g in graph_strategy()) {
            for n in g.nodes() {
                let adj = g.neighbors(n);
                prop_assert!(!adj.contains(&n));
                prop_assert!(adj.windows(2).all(|w| w[0] < w[1]));
                for m in adj {
                    prop_assert!(g.neighbors(*m).contains(&n));
                }
            }
        }
    }
}
