//! Undirected simple graphs: random geometric and circulant generators,
//! edge-list files, connectivity, neighborhoods, and the per-graph metrics
//! reported alongside simulation results.
//!
//! Graphs are immutable after construction and freely shareable across
//! threads; generators take an owned random stream.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::rng::SimRng;
use rand::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("neighbor count must be even, got {0}")]
    OddNeighborCount(usize),
    #[error("neighbor count {l} out of range for {n} vertices (need 2 <= l <= n-1)")]
    NeighborCountOutOfRange { n: usize, l: usize },
    #[error(
        "no connected geometric graph with radius {radius} after {attempts} attempts; \
         the radius is likely too small for {n} vertices"
    )]
    ConnectivityFailure { n: usize, radius: f64, attempts: usize },
    #[error("vertex id {id} out of range for {n} vertices")]
    VertexOutOfRange { id: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph has no stored positions")]
    NoPositions,
}

/// Errors from the edge-list and positions file formats.
#[derive(Debug, Error)]
pub enum FileFormatError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing 'n <count>' header line")]
    MissingHeader,
    #[error("line {line}: expected {expected}, got '{got}'")]
    Malformed {
        line: usize,
        expected: &'static str,
        got: String,
    },
    #[error("line {line}: {source}")]
    Graph { line: usize, source: GraphError },
}

/// An undirected simple graph with vertices `0..n`, stored as sorted
/// per-vertex neighbor lists. Geometric graphs also carry their planar
/// positions in the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    positions: Option<Vec<(f64, f64)>>,
}

/// Edge predicate of the geometric model: strictly closer than `radius`.
/// Shared between construction and tests so the stored positions always
/// reproduce the edge set exactly.
pub fn within_radius(a: (f64, f64), b: (f64, f64), radius: f64) -> bool {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy < radius * radius
}

impl Graph {
    /// Build from an explicit edge list. Rejects out-of-range ids,
    /// self-loops, and duplicate edges (in either orientation).
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n {
                return Err(GraphError::VertexOutOfRange { id: u, n });
            }
            if v >= n {
                return Err(GraphError::VertexOutOfRange { id: v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for (v, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                let dup = list.windows(2).find(|w| w[0] == w[1]).unwrap()[0];
                return Err(GraphError::DuplicateEdge(v.min(dup), v.max(dup)));
            }
        }
        Ok(Self { adjacency, positions: None })
    }

    /// Build a geometric graph from given unit-square positions: vertices
    /// are connected iff [`within_radius`] holds.
    pub fn from_positions(positions: Vec<(f64, f64)>, radius: f64) -> Self {
        let n = positions.len();
        let mut adjacency = vec![Vec::new(); n];
        for u in 0..n {
            for v in (u + 1)..n {
                if within_radius(positions[u], positions[v], radius) {
                    adjacency[u].push(v);
                    adjacency[v].push(u);
                }
            }
        }
        Self { adjacency, positions: Some(positions) }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn contains_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Unit-square positions, present for geometric graphs.
    pub fn positions(&self) -> Option<&[(f64, f64)]> {
        self.positions.as_deref()
    }
}

/// Sample a random geometric graph: `n` positions uniform in the unit
/// square, edges between pairs strictly closer than `radius`.
///
/// Positions are drawn x-then-y in ascending vertex order, so a seed pins
/// the graph exactly.
pub fn random_geometric(n: usize, radius: f64, rng: &mut SimRng) -> Graph {
    assert!(n >= 1, "need at least one vertex");
    assert!(
        radius > 0.0 && radius < 1.0,
        "radius must lie in (0, 1), got {radius}"
    );
    let positions: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
    Graph::from_positions(positions, radius)
}

/// Rejection-sample geometric graphs until one is connected.
///
/// Returns the accepted graph together with the number of attempts used.
/// Fails after `max_attempts` rejections, which usually signals a radius
/// too small for the vertex count.
pub fn connected_random_geometric(
    n: usize,
    radius: f64,
    rng: &mut SimRng,
    max_attempts: usize,
) -> Result<(Graph, usize), GraphError> {
    assert!(max_attempts >= 1);
    for attempt in 1..=max_attempts {
        let g = random_geometric(n, radius, rng);
        if is_connected(&g) {
            return Ok((g, attempt));
        }
    }
    Err(GraphError::ConnectivityFailure { n, radius, attempts: max_attempts })
}

/// Default rejection budget for [`connected_random_geometric`].
pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

/// Ring of `n` vertices, each connected to its `neighbor_count` nearest
/// neighbors (`neighbor_count / 2` on each side). `neighbor_count` must be
/// even and lie in `2..=n-1`; every vertex then has that exact degree.
pub fn circulant(n: usize, neighbor_count: usize) -> Result<Graph, GraphError> {
    if neighbor_count % 2 != 0 {
        return Err(GraphError::OddNeighborCount(neighbor_count));
    }
    if neighbor_count < 2 || neighbor_count + 1 > n {
        return Err(GraphError::NeighborCountOutOfRange { n, l: neighbor_count });
    }
    let mut edges = Vec::with_capacity(n * neighbor_count / 2);
    for i in 0..n {
        for offset in 1..=neighbor_count / 2 {
            edges.push((i, (i + offset) % n));
        }
    }
    Graph::from_edges(n, &edges)
}

/// True iff a traversal from vertex 0 reaches every vertex. Graphs with
/// zero or one vertex count as connected.
pub fn is_connected(g: &Graph) -> bool {
    let n = g.vertex_count();
    if n <= 1 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut reached = 1;
    while let Some(u) = stack.pop() {
        for &v in g.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                reached += 1;
                stack.push(v);
            }
        }
    }
    reached == n
}

/// The vertex together with all its neighbors, sorted. This is the
/// participant set of a round whose focal player is `v`.
pub fn closed_neighborhood(g: &Graph, v: usize) -> Vec<usize> {
    assert!(v < g.vertex_count(), "vertex {v} out of range");
    let adj = g.neighbors(v);
    let pos = adj.partition_point(|&u| u < v);
    let mut out = Vec::with_capacity(adj.len() + 1);
    out.extend_from_slice(&adj[..pos]);
    out.push(v);
    out.extend_from_slice(&adj[pos..]);
    out
}

/// Summary statistics of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMetrics {
    pub mean_degree: f64,
    pub triangle_count: u64,
    pub max_degree: usize,
    pub edge_count: usize,
    pub connected: bool,
}

/// Compute [`GraphMetrics`]. Triangles are counted once each by
/// intersecting sorted neighbor lists over ordered vertex triples.
pub fn compute_metrics(g: &Graph) -> GraphMetrics {
    let n = g.vertex_count();
    let edge_count = g.edge_count();
    let mut triangles = 0u64;
    for u in 0..n {
        let nu = g.neighbors(u);
        for &v in nu.iter().filter(|&&v| v > u) {
            let nv = g.neighbors(v);
            // common neighbors w with w > v
            let (mut i, mut j) = (nu.partition_point(|&w| w <= v), nv.partition_point(|&w| w <= v));
            while i < nu.len() && j < nv.len() {
                match nu[i].cmp(&nv[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        triangles += 1;
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
    }
    GraphMetrics {
        mean_degree: if n == 0 { 0.0 } else { 2.0 * edge_count as f64 / n as f64 },
        triangle_count: triangles,
        max_degree: g.max_degree(),
        edge_count,
        connected: is_connected(g),
    }
}

/// Write the edge-list format: a header line `n <count>`, then one
/// `u v` line per edge with `u < v`, ascending.
pub fn save_edge_list<W: Write>(g: &Graph, mut sink: W) -> std::io::Result<()> {
    writeln!(sink, "n {}", g.vertex_count())?;
    for u in 0..g.vertex_count() {
        for &v in g.neighbors(u).iter().filter(|&&v| v > u) {
            writeln!(sink, "{u} {v}")?;
        }
    }
    Ok(())
}

/// Parse the edge-list format written by [`save_edge_list`]. Empty lines
/// and `#` comments are skipped; anything else malformed is reported with
/// its line number.
pub fn load_edge_list<R: BufRead>(source: R) -> Result<Graph, FileFormatError> {
    let mut n: Option<usize> = None;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        match n {
            None => {
                if parts.next() != Some("n") {
                    return Err(FileFormatError::Malformed {
                        line: lineno,
                        expected: "header 'n <count>'",
                        got: trimmed.to_string(),
                    });
                }
                let count = parts
                    .next()
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or(FileFormatError::Malformed {
                        line: lineno,
                        expected: "header 'n <count>'",
                        got: trimmed.to_string(),
                    })?;
                n = Some(count);
            }
            Some(count) => {
                let (u, v) = match (
                    parts.next().and_then(|s| s.parse::<usize>().ok()),
                    parts.next().and_then(|s| s.parse::<usize>().ok()),
                    parts.next(),
                ) {
                    (Some(u), Some(v), None) => (u, v),
                    _ => {
                        return Err(FileFormatError::Malformed {
                            line: lineno,
                            expected: "edge 'u v'",
                            got: trimmed.to_string(),
                        })
                    }
                };
                if u >= v {
                    return Err(FileFormatError::Malformed {
                        line: lineno,
                        expected: "edge with u < v",
                        got: trimmed.to_string(),
                    });
                }
                if v >= count {
                    return Err(FileFormatError::Graph {
                        line: lineno,
                        source: GraphError::VertexOutOfRange { id: v, n: count },
                    });
                }
                if !seen.insert((u, v)) {
                    return Err(FileFormatError::Graph {
                        line: lineno,
                        source: GraphError::DuplicateEdge(u, v),
                    });
                }
                edges.push((u, v));
            }
        }
    }
    let n = n.ok_or(FileFormatError::MissingHeader)?;
    Graph::from_edges(n, &edges).map_err(|source| FileFormatError::Graph { line: 0, source })
}

/// Write the companion positions file: one `v x y` line per vertex.
/// Coordinates use the shortest decimal form that parses back exactly.
pub fn save_positions<W: Write>(g: &Graph, mut sink: W) -> Result<(), FileFormatError> {
    let positions = g.positions().ok_or_else(|| FileFormatError::Graph {
        line: 0,
        source: GraphError::NoPositions,
    })?;
    for (v, (x, y)) in positions.iter().enumerate() {
        writeln!(sink, "{v} {x} {y}")?;
    }
    Ok(())
}

/// Parse a positions file; vertex ids must be exactly `0..n` in order.
pub fn load_positions<R: BufRead>(source: R) -> Result<Vec<(f64, f64)>, FileFormatError> {
    let mut positions = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let parsed = (
            parts.next().and_then(|s| s.parse::<usize>().ok()),
            parts.next().and_then(|s| s.parse::<f64>().ok()),
            parts.next().and_then(|s| s.parse::<f64>().ok()),
        );
        match parsed {
            (Some(v), Some(x), Some(y)) if v == positions.len() => positions.push((x, y)),
            _ => {
                return Err(FileFormatError::Malformed {
                    line: lineno,
                    expected: "'v x y' with consecutive vertex ids",
                    got: trimmed.to_string(),
                })
            }
        }
    }
    Ok(positions)
}
