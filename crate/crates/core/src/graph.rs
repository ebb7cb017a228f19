//! Simple undirected bounded-degree graphs.
//!
//! Vertices are dense indices `0..n`. Adjacency lists are sorted ascending so
//! that every traversal is deterministic. Shortest-path distances are computed
//! by breadth-first search on demand and memoized per source vertex.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Default retry budget of the pairing-model generator.
pub const DEFAULT_RETRY_BUDGET: usize = 1000;

/// Marker for unreachable vertices in a BFS distance table.
const UNREACHED: u32 = u32::MAX;

/// Fingerprint identifying the graph a [`VertexSet`] was taken from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphId(pub u64);

#[derive(Debug)]
pub struct Graph {
    n: usize,
    adjacency: Vec<Vec<usize>>,
    max_degree: usize,
    seed: Option<u64>,
    id: GraphId,
    bfs_cache: Vec<OnceLock<Vec<u32>>>,
}

impl Clone for Graph {
    fn clone(&self) -> Self {
        Graph {
            n: self.n,
            adjacency: self.adjacency.clone(),
            max_degree: self.max_degree,
            seed: self.seed,
            id: self.id,
            bfs_cache: (0..self.n).map(|_| OnceLock::new()).collect(),
        }
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.adjacency == other.adjacency
    }
}

impl Eq for Graph {}

fn fingerprint(n: usize, adjacency: &[Vec<usize>]) -> GraphId {
    // FNV-1a over the canonical adjacency.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    feed(n as u64);
    for nbrs in adjacency {
        feed(nbrs.len() as u64);
        for &y in nbrs {
            feed(y as u64);
        }
    }
    GraphId(h)
}

impl Graph {
    /// Build a graph from an edge list, rejecting loops, repeated edges,
    /// out-of-range endpoints and disconnected results.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Graph> {
        if n == 0 {
            return Err(Error::MalformedGraph("graph has no vertices".into()));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidVertex {
                    vertex: u.max(v),
                    n,
                });
            }
            if u == v {
                return Err(Error::MalformedGraph(format!("self-loop at {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for (x, nbrs) in adjacency.iter_mut().enumerate() {
            nbrs.sort_unstable();
            if nbrs.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::MalformedGraph(format!("parallel edge at vertex {x}")));
            }
        }
        let g = Self::from_sorted_adjacency(adjacency, None);
        if !g.is_connected() {
            return Err(Error::MalformedGraph("graph is not connected".into()));
        }
        Ok(g)
    }

    fn from_sorted_adjacency(adjacency: Vec<Vec<usize>>, seed: Option<u64>) -> Graph {
        let n = adjacency.len();
        let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        let id = fingerprint(n, &adjacency);
        Graph {
            n,
            adjacency,
            max_degree,
            seed,
            id,
            bfs_cache: (0..n).map(|_| OnceLock::new()).collect(),
        }
    }

    /// Uniform random `degree`-regular simple connected graph on `n` vertices.
    ///
    /// Pairing model: the `n * degree` half-edges are shuffled and matched
    /// consecutively; any draw containing a loop or a repeated edge, or giving
    /// a disconnected graph, is discarded in full.
    pub fn random_regular(n: usize, degree: usize, seed: u64) -> Result<Graph> {
        Self::random_regular_with_budget(n, degree, seed, DEFAULT_RETRY_BUDGET)
    }

    pub fn random_regular_with_budget(
        n: usize,
        degree: usize,
        seed: u64,
        attempts: usize,
    ) -> Result<Graph> {
        if (n * degree) % 2 == 1 {
            return Err(Error::Parity { n, degree });
        }
        if degree < 2 {
            return Err(Error::InvalidGraphParams(format!(
                "degree must be at least 2, got {degree}"
            )));
        }
        if n <= degree {
            return Err(Error::InvalidGraphParams(format!(
                "need n > degree, got n = {n}, degree = {degree}"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let mut stubs: Vec<usize> = (0..n)
            .flat_map(|x| std::iter::repeat_n(x, degree))
            .collect();
        'attempt: for _ in 0..attempts {
            stubs.shuffle(&mut rng);
            let mut adjacency = vec![Vec::with_capacity(degree); n];
            for pair in stubs.chunks_exact(2) {
                let (u, v) = (pair[0], pair[1]);
                if u == v || adjacency[u].contains(&v) {
                    continue 'attempt;
                }
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
            for nbrs in &mut adjacency {
                nbrs.sort_unstable();
            }
            let g = Self::from_sorted_adjacency(adjacency, Some(seed));
            if g.is_connected() {
                return Ok(g);
            }
        }
        Err(Error::GenerationFailed { attempts })
    }

    /// Cycle on `n ≥ 3` vertices.
    pub fn cycle(n: usize) -> Result<Graph> {
        if n < 3 {
            return Err(Error::InvalidGraphParams("cycle needs n >= 3".into()));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges)
    }

    /// Path on `n ≥ 1` vertices.
    pub fn path(n: usize) -> Result<Graph> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges)
    }

    /// Complete graph on `n ≥ 1` vertices.
    pub fn complete(n: usize) -> Result<Graph> {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::from_edges(n, &edges)
    }

    /// Ball of radius `depth` in the infinite `(K+1)`-regular tree: the root
    /// has `K + 1` children and every other internal vertex has `K`. Vertices
    /// are numbered in breadth-first order, so vertex 0 is the root.
    pub fn regular_tree(branching: usize, depth: usize) -> Result<Graph> {
        if branching < 1 {
            return Err(Error::InvalidGraphParams("branching must be >= 1".into()));
        }
        let mut edges = Vec::new();
        let mut frontier = vec![0usize];
        let mut next_id = 1usize;
        for level in 0..depth {
            let children = if level == 0 { branching + 1 } else { branching };
            let mut next = Vec::with_capacity(frontier.len() * children);
            for &p in &frontier {
                for _ in 0..children {
                    edges.push((p, next_id));
                    next.push(next_id);
                    next_id += 1;
                }
            }
            frontier = next;
        }
        Self::from_edges(next_id, &edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `K = max_degree - 1`.
    pub fn branching(&self) -> usize {
        self.max_degree.saturating_sub(1)
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn id(&self) -> GraphId {
        self.id
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| nbrs.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn check_vertex(&self, x: usize) -> Result<()> {
        if x < self.n {
            Ok(())
        } else {
            Err(Error::InvalidVertex { vertex: x, n: self.n })
        }
    }

    fn is_connected(&self) -> bool {
        self.n == 0 || self.bfs_uncached(0).iter().all(|&d| d != UNREACHED)
    }

    fn bfs_uncached(&self, source: usize) -> Vec<u32> {
        let mut dist = vec![UNREACHED; self.n];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u];
            for &v in &self.adjacency[u] {
                if dist[v] == UNREACHED {
                    dist[v] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Hop distances from `source` to every vertex (memoized).
    pub fn distances_from(&self, source: usize) -> Result<&[u32]> {
        self.check_vertex(source)?;
        Ok(self.bfs_cache[source].get_or_init(|| self.bfs_uncached(source)))
    }

    pub fn distance(&self, x: usize, y: usize) -> Result<usize> {
        self.check_vertex(y)?;
        let d = self.distances_from(x)?[y];
        if d == UNREACHED {
            Err(Error::Disconnected { x, y })
        } else {
            Ok(d as usize)
        }
    }

    /// `{ y : d(x, y) ≤ r }`.
    ///
    /// Uses a radius-limited BFS rather than the memoized full table, since
    /// balls are typically tiny compared with the graph.
    pub fn ball(&self, x: usize, r: usize) -> Result<VertexSet> {
        self.check_vertex(x)?;
        let mut seen = std::collections::HashMap::new();
        let mut queue = VecDeque::new();
        seen.insert(x, 0usize);
        queue.push_back(x);
        while let Some(u) = queue.pop_front() {
            let du = seen[&u];
            if du == r {
                continue;
            }
            for &v in &self.adjacency[u] {
                if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(v) {
                    e.insert(du + 1);
                    queue.push_back(v);
                }
            }
        }
        let mut members: Vec<usize> = seen.into_keys().collect();
        members.sort_unstable();
        Ok(VertexSet {
            members,
            graph: self.id,
        })
    }

    /// Vertices of `b` with at least one neighbor outside `b`.
    pub fn inner_boundary(&self, b: &VertexSet) -> VertexSet {
        let members = b
            .members
            .iter()
            .copied()
            .filter(|&x| self.adjacency[x].iter().any(|y| !b.contains(*y)))
            .collect();
        VertexSet {
            members,
            graph: self.id,
        }
    }

    pub fn all_vertices(&self) -> VertexSet {
        VertexSet {
            members: (0..self.n).collect(),
            graph: self.id,
        }
    }

    /// Build a vertex set, sorting and deduplicating the input.
    pub fn vertex_set(&self, members: impl IntoIterator<Item = usize>) -> Result<VertexSet> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if let Some(&last) = members.last() {
            self.check_vertex(last)?;
        }
        Ok(VertexSet {
            members,
            graph: self.id,
        })
    }

    pub fn eccentricity(&self, x: usize) -> Result<usize> {
        Ok(self.distances_from(x)?.iter().copied().max().unwrap_or(0) as usize)
    }

    pub fn diameter(&self) -> usize {
        (0..self.n)
            .map(|x| self.eccentricity(x).unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Check `|B_r(x)| ≤ 3 K^r` and `|∂B_r(x)| ≤ (3/2) K^r` for every vertex
    /// and every `1 ≤ r ≤ diameter`. Requires `K ≥ 2`.
    pub fn check_volume_bounds(&self) -> Result<()> {
        let k = self.branching();
        if k < 2 {
            return Err(Error::Precondition(format!(
                "volume bounds need K >= 2, graph has K = {k}"
            )));
        }
        let diam = self.diameter();
        for x in 0..self.n {
            let dist = self.distances_from(x)?;
            // sphere sizes, accumulated into ball sizes
            let mut sphere = vec![0usize; diam + 1];
            for &d in dist {
                sphere[d as usize] += 1;
            }
            let mut ball = 1usize;
            for (r, &s) in sphere.iter().enumerate().skip(1) {
                ball += s;
                let kr = (k as f64).powi(r as i32);
                if ball as f64 > 3.0 * kr {
                    return Err(Error::Precondition(format!(
                        "|B_{r}({x})| = {ball} exceeds 3 K^r = {}",
                        3.0 * kr
                    )));
                }
                let b = self.ball(x, r)?;
                let surface = self.inner_boundary(&b).len();
                if surface as f64 > 1.5 * kr {
                    return Err(Error::Precondition(format!(
                        "|dB_{r}({x})| = {surface} exceeds 1.5 K^r = {}",
                        1.5 * kr
                    )));
                }
            }
        }
        Ok(())
    }

    /// Serialize as `n degree seed` header followed by one `u v` edge per line.
    /// An absent seed is written as `-`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let seed = self.seed.map_or_else(|| "-".to_string(), |s| s.to_string());
        let _ = writeln!(out, "{} {} {}", self.n, self.max_degree, seed);
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Graph> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: hline,
                msg: "header must be `n degree seed`".into(),
            });
        }
        let parse_usize = |s: &str, line: usize| {
            s.parse::<usize>().map_err(|e| Error::Parse {
                line,
                msg: format!("`{s}`: {e}"),
            })
        };
        let n = parse_usize(fields[0], hline)?;
        let degree = parse_usize(fields[1], hline)?;
        let seed = match fields[2] {
            "-" => None,
            s => Some(s.parse::<u64>().map_err(|e| Error::Parse {
                line: hline,
                msg: format!("seed `{s}`: {e}"),
            })?),
        };
        let mut seen = std::collections::HashSet::new();
        let mut edges = Vec::new();
        for (line, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 2 {
                return Err(Error::Parse {
                    line,
                    msg: "expected `u v`".into(),
                });
            }
            let (u, v) = (parse_usize(f[0], line)?, parse_usize(f[1], line)?);
            if u >= n || v >= n {
                return Err(Error::Parse {
                    line,
                    msg: format!("edge ({u}, {v}) out of range for n = {n}"),
                });
            }
            if u == v {
                return Err(Error::Parse {
                    line,
                    msg: format!("self-loop at {u}"),
                });
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate edge ({u}, {v})"),
                });
            }
            edges.push((u, v));
        }
        let mut g = Graph::from_edges(n, &edges)?;
        if g.max_degree != degree {
            return Err(Error::Parse {
                line: hline,
                msg: format!(
                    "header degree {degree} does not match maximal degree {}",
                    g.max_degree
                ),
            });
        }
        g.seed = seed;
        Ok(g)
    }
}

/// Sorted, deduplicated set of vertices of one graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexSet {
    members: Vec<usize>,
    graph: GraphId,
}

impl VertexSet {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn graph_id(&self) -> GraphId {
        self.graph
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    /// Position of `x` in the sorted member list.
    pub fn position(&self, x: usize) -> Option<usize> {
        self.members.binary_search(&x).ok()
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.members.iter().all(|&x| other.contains(x))
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        let mut members = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.members, &other.members);
        while i < a.len() || j < b.len() {
            let next = match (a.get(i), b.get(j)) {
                (Some(&x), Some(&y)) if x == y => {
                    i += 1;
                    j += 1;
                    x
                }
                (Some(&x), Some(&y)) if x < y => {
                    i += 1;
                    x
                }
                (Some(_), Some(&y)) => {
                    j += 1;
                    y
                }
                (Some(&x), None) => {
                    i += 1;
                    x
                }
                (None, Some(&y)) => {
                    j += 1;
                    y
                }
                (None, None) => unreachable!(),
            };
            members.push(next);
        }
        VertexSet {
            members,
            graph: self.graph,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive BFS oracle on an explicit cycle: the distance between `i`
    /// and `j` is `min(|i - j|, n - |i - j|)`.
    fn cycle_distance(n: usize, i: usize, j: usize) -> usize {
        let d = i.abs_diff(j);
        d.min(n - d)
    }

    #[test]
    fn k4_is_the_only_cubic_graph_on_four_vertices() {
        for seed in 0..5 {
            let g = Graph::random_regular(4, 3, seed).unwrap();
            assert_eq!(g, Graph::complete(4).unwrap());
        }
    }

    #[test]
    fn triangle_from_two_regular() {
        let g = Graph::random_regular(3, 2, 17).unwrap();
        assert_eq!(g, Graph::complete(3).unwrap());
    }

    #[test]
    fn parity_error() {
        assert!(matches!(
            Graph::random_regular(5, 3, 0),
            Err(Error::Parity { n: 5, degree: 3 })
        ));
    }

    #[test]
    fn retry_budget_exhaustion() {
        // 2-regular on many vertices is connected only when the pairing forms
        // one Hamiltonian cycle; one attempt is almost never enough.
        let r = Graph::random_regular_with_budget(400, 2, 3, 1);
        assert!(matches!(r, Err(Error::GenerationFailed { attempts: 1 })));
    }

    #[test]
    fn random_regular_is_deterministic_and_regular() {
        let a = Graph::random_regular(200, 3, 99).unwrap();
        let b = Graph::random_regular(200, 3, 99).unwrap();
        assert_eq!(a, b);
        assert!((0..200).all(|x| a.neighbors(x).len() == 3));
        assert_eq!(a.edge_count(), 300);
    }

    #[test]
    fn distances_on_six_cycle() {
        let g = Graph::cycle(6).unwrap();
        assert_eq!(g.distance(2, 2).unwrap(), 0);
        assert_eq!(g.distance(2, 3).unwrap(), 1);
        assert_eq!(g.distance(0, 3).unwrap(), 3);
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(g.distance(i, j).unwrap(), cycle_distance(6, i, j));
            }
        }
    }

    #[test]
    fn balls_on_six_cycle() {
        let g = Graph::cycle(6).unwrap();
        assert_eq!(g.ball(4, 0).unwrap().members(), &[4]);
        assert_eq!(g.ball(0, 2).unwrap().len(), 5);
        assert_eq!(g.ball(0, 2).unwrap().members(), &[0, 1, 2, 4, 5]);
        assert_eq!(g.ball(0, 3).unwrap().len(), 6);
    }

    #[test]
    fn inner_boundary_cases() {
        let g = Graph::random_regular(50, 3, 5).unwrap();
        assert!(g.inner_boundary(&g.all_vertices()).is_empty());
        let single = g.vertex_set([7]).unwrap();
        assert_eq!(g.inner_boundary(&single).members(), &[7]);
        let c = Graph::cycle(6).unwrap();
        let b = c.ball(0, 1).unwrap();
        assert_eq!(c.inner_boundary(&b).members(), &[1, 5]);
    }

    #[test]
    fn invalid_vertex() {
        let g = Graph::cycle(6).unwrap();
        assert!(matches!(g.distance(0, 6), Err(Error::InvalidVertex { .. })));
        assert!(g.ball(9, 1).is_err());
    }

    #[test]
    fn tree_has_expected_shape() {
        let t = Graph::regular_tree(2, 3).unwrap();
        // 1 + 3 + 6 + 12
        assert_eq!(t.n(), 22);
        assert_eq!(t.max_degree(), 3);
        assert_eq!(t.ball(0, 3).unwrap().len(), 22);
        assert_eq!(t.inner_boundary(&t.ball(0, 2).unwrap()).len(), 6);
        t.check_volume_bounds().unwrap();
    }

    #[test]
    fn volume_bounds_require_k_at_least_two() {
        assert!(Graph::cycle(8).unwrap().check_volume_bounds().is_err());
    }

    #[test]
    fn edge_list_round_trip_and_rejections() {
        let g = Graph::random_regular(30, 3, 11).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("30 3 11\n"));
        let h = Graph::from_edge_list(&text).unwrap();
        assert_eq!(g, h);
        assert_eq!(h.seed(), Some(11));

        assert!(Graph::from_edge_list("3 2 -\n0 1\n1 2\n2 0\n0 1\n").is_err());
        assert!(Graph::from_edge_list("3 2 -\n0 1\n1 3\n").is_err());
        assert!(Graph::from_edge_list("3 2 -\n0 0\n").is_err());
        assert!(Graph::from_edge_list("3 3 -\n0 1\n1 2\n2 0\n").is_err());
        let tri = Graph::from_edge_list("3 2 -\n0 1\n1 2\n2 0\n").unwrap();
        assert_eq!(tri.seed(), None);
    }

    #[test]
    fn union_of_sets() {
        let g = Graph::cycle(10).unwrap();
        let a = g.ball(0, 1).unwrap();
        let b = g.ball(2, 1).unwrap();
        assert_eq!(a.union(&b).members(), &[0, 1, 2, 3, 9]);
    }
}
