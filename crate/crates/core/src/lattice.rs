//! Interaction graphs, regions, graph distances and boundaries.
//!
//! Vertices are labeled `0..N`; that labeling is also the tensor-factor
//! ordering used by every dense operator (vertex 0 is the most significant
//! digit of a basis index).

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, LabError, Result};

/// Upper bound on the vertex count of generated graphs. The all-pairs
/// distance table is `N^2` entries.
pub const MAX_GRAPH_VERTICES: usize = 4096;

const UNREACHABLE: u32 = u32::MAX;

/// A set of sites, kept sorted and deduplicated.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Region(Vec<usize>);

impl Region {
    pub fn new(sites: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = sites.into_iter().collect();
        Region(set.into_iter().collect())
    }

    pub fn empty() -> Self {
        Region(Vec::new())
    }

    pub fn sites(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.0.iter().all(|&v| other.contains(v))
    }

    pub fn union(&self, other: &Region) -> Region {
        Region::new(self.0.iter().chain(other.0.iter()).copied())
    }

    pub fn difference(&self, other: &Region) -> Region {
        Region(self.0.iter().copied().filter(|&v| !other.contains(v)).collect())
    }

    pub fn intersects(&self, other: &Region) -> bool {
        self.0.iter().any(|&v| other.contains(v))
    }
}

impl FromIterator<usize> for Region {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Region::new(iter)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

/// Boundary conditions for generated lattices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

/// Serialized form: `{"vertices": [...], "edges": [[u, v], ...], "spatial_dim": D}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct GraphDocument {
    vertices: Vec<usize>,
    edges: Vec<[usize; 2]>,
    spatial_dim: usize,
}

/// Finite interaction graph with a precomputed graph metric.
///
/// Immutable once built, so it can be shared freely across worker threads.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "GraphDocument", into = "GraphDocument")]
pub struct InteractionGraph {
    n: usize,
    edges: Vec<[usize; 2]>,
    spatial_dim: usize,
    adjacency: Vec<Vec<usize>>,
    dist: Vec<u32>,
}

impl TryFrom<GraphDocument> for InteractionGraph {
    type Error = LabError;

    fn try_from(doc: GraphDocument) -> Result<Self> {
        let n = doc.vertices.len();
        if doc.vertices.iter().enumerate().any(|(k, &v)| k != v) {
            return domain("graph vertices must be labeled 0..N in order");
        }
        Self::from_edges(n, doc.edges, doc.spatial_dim)
    }
}

impl From<InteractionGraph> for GraphDocument {
    fn from(g: InteractionGraph) -> Self {
        GraphDocument { vertices: (0..g.n).collect(), edges: g.edges, spatial_dim: g.spatial_dim }
    }
}

impl PartialEq for InteractionGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges && self.spatial_dim == other.spatial_dim
    }
}

impl InteractionGraph {
    /// Builds a graph on vertices `0..n` from an edge list. Edges are
    /// normalized to `[min, max]`, sorted and deduplicated.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = [usize; 2]>, spatial_dim: usize) -> Result<Self> {
        if n > MAX_GRAPH_VERTICES {
            return Err(LabError::Resource { what: format!("graph with {n} vertices"), limit: MAX_GRAPH_VERTICES });
        }
        let mut set = BTreeSet::new();
        for [u, v] in edges {
            if u >= n || v >= n {
                return domain(format!("edge [{u}, {v}] references a vertex outside 0..{n}"));
            }
            if u == v {
                return domain(format!("edge [{u}, {v}] is not a two-element subset"));
            }
            set.insert([u.min(v), u.max(v)]);
        }
        let edges: Vec<[usize; 2]> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for &[u, v] in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let dist = all_pairs_bfs(n, &adjacency);
        Ok(InteractionGraph { n, edges, spatial_dim, adjacency, dist })
    }

    /// Open chain `0 - 1 - ... - (n-1)`.
    pub fn chain(n: usize) -> Result<Self> {
        Self::cubic(n, 1, Boundary::Open)
    }

    /// Cubic lattice `[n]^D`; sites at L1 distance one are joined.
    pub fn cubic(n: usize, spatial_dim: usize, boundary: Boundary) -> Result<Self> {
        if n == 0 || spatial_dim == 0 {
            return domain("cubic lattice needs n >= 1 and D >= 1");
        }
        let total = u32::try_from(spatial_dim)
            .ok()
            .and_then(|d| n.checked_pow(d))
            .filter(|&t| t <= MAX_GRAPH_VERTICES)
            .ok_or_else(|| LabError::Resource {
                what: format!("cubic lattice [{n}]^{spatial_dim}"),
                limit: MAX_GRAPH_VERTICES,
            })?;
        let mut edges = Vec::new();
        for v in 0..total {
            // Coordinate k of v has stride n^(D-1-k): the first coordinate is
            // the most significant, matching the tensor ordering.
            let mut stride = 1;
            for _ in 0..spatial_dim {
                let coord = (v / stride) % n;
                if coord + 1 < n {
                    edges.push([v, v + stride]);
                } else if boundary == Boundary::Periodic && n > 2 {
                    edges.push([v + stride - n * stride, v]);
                }
                stride *= n;
            }
        }
        Self::from_edges(total, edges, spatial_dim)
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> Region {
        Region((0..self.n).collect())
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial_dim
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&[u.min(v), u.max(v)]).is_ok()
    }

    /// True when the graph is a path `0 - 1 - ... - (n-1)` (no wraparound).
    pub fn is_open_chain(&self) -> bool {
        self.edges.len() + 1 == self.n.max(1) && self.edges.iter().enumerate().all(|(k, &e)| e == [k, k + 1])
    }

    /// Shortest-path distance between two vertices; `None` when disconnected.
    pub fn vertex_distance(&self, u: usize, v: usize) -> Option<usize> {
        match self.dist[u * self.n + v] {
            UNREACHABLE => None,
            d => Some(d as usize),
        }
    }

    /// `min_{s in a, e in b} d(s, e)`; `None` means infinite distance.
    pub fn distance(&self, a: &Region, b: &Region) -> Result<Option<usize>> {
        if a.is_empty() || b.is_empty() {
            return domain("graph distance needs nonempty regions");
        }
        self.check_region(a)?;
        self.check_region(b)?;
        Ok(a.sites()
            .iter()
            .flat_map(|&u| b.sites().iter().map(move |&v| (u, v)))
            .filter_map(|(u, v)| self.vertex_distance(u, v))
            .min())
    }

    /// Distance of every vertex to a nonempty region.
    pub fn distances_to(&self, s: &Region) -> Result<Vec<Option<usize>>> {
        (0..self.n).map(|v| self.distance(&Region(vec![v]), s)).collect()
    }

    /// Sites of `s` adjacent to the complement of `s`.
    pub fn boundary(&self, s: &Region) -> Region {
        Region(
            s.sites()
                .iter()
                .copied()
                .filter(|&v| v < self.n && self.adjacency[v].iter().any(|&w| !s.contains(w)))
                .collect(),
        )
    }

    /// Induced subgraph on `keep`, relabeled `0..|keep|` in increasing order.
    pub fn induced(&self, keep: &Region) -> Result<InteractionGraph> {
        self.check_region(keep)?;
        let pos = |v: usize| keep.sites().binary_search(&v).ok();
        let edges = self.edges.iter().filter_map(|&[u, v]| Some([pos(u)?, pos(v)?]));
        InteractionGraph::from_edges(keep.len(), edges.collect::<Vec<_>>(), self.spatial_dim)
    }

    pub fn check_region(&self, r: &Region) -> Result<()> {
        match r.sites().last() {
            Some(&v) if v >= self.n => domain(format!("site {v} is not a vertex of a {}-site graph", self.n)),
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn all_pairs_bfs(n: usize, adjacency: &[Vec<usize>]) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; n * n];
    let mut queue = VecDeque::new();
    for src in 0..n {
        let row = &mut dist[src * n..(src + 1) * n];
        row[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &w in &adjacency[u] {
                if row[w] == UNREACHABLE {
                    row[w] = row[u] + 1;
                    queue.push_back(w);
                }
            }
        }
    }
    dist
}

/// Bound `alpha <= 2 D e` on the lattice-animal growth constant of a
/// `D`-dimensional lattice. Used as the default `alpha` in clustering bounds.
pub fn growth_constant_bound(spatial_dim: usize) -> f64 {
    2.0 * spatial_dim as f64 * std::f64::consts::E
}
