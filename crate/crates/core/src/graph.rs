//! Cycle-graph view of a parity-check matrix with all column weights 2:
//! one vertex per check, one edge per code symbol.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::construction::SparseFieldMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleGraph {
    n_vertices: usize,
    /// Edge `e` joins `edges[e].0` and `edges[e].1`; edge index = column index.
    edges: Vec<(usize, usize)>,
    /// `adj[v]` lists `(edge, other endpoint)`.
    adj: Vec<Vec<(usize, usize)>>,
}

impl CycleGraph {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>) -> CycleGraph {
        let mut adj = vec![Vec::new(); n_vertices];
        for (e, &(a, b)) in edges.iter().enumerate() {
            adj[a].push((e, b));
            adj[b].push((e, a));
        }
        CycleGraph {
            n_vertices,
            edges,
            adj,
        }
    }

    /// Graph of the 2K x 3K parallel-construction matrix for interleaver
    /// `mapping`, without building the matrix. Vertices `0..K` are the first
    /// accumulator's checks, `K..2K` the second's.
    pub fn pccc(mapping: &[usize]) -> CycleGraph {
        let k = mapping.len();
        let mut inv = vec![0; k];
        for (i, &p) in mapping.iter().enumerate() {
            inv[p] = i;
        }
        let mut edges = Vec::with_capacity(3 * k);
        for j in 0..k {
            edges.push((j, k + inv[j]));
        }
        for j in 0..k {
            edges.push((j, (j + 1) % k));
        }
        for j in 0..k {
            edges.push((k + j, k + (j + 1) % k));
        }
        CycleGraph::new(2 * k, edges)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    /// `Some(d)` when every vertex has degree `d`.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = self.adj.first()?.len();
        self.adj.iter().all(|a| a.len() == d).then_some(d)
    }

    pub fn has_parallel_edges(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.edges
            .iter()
            .any(|&(a, b)| !seen.insert((a.min(b), a.max(b))))
    }

    /// Length of the shortest cycle, `None` for an acyclic graph. Two
    /// parallel edges form a cycle of length 2.
    pub fn girth(&self) -> Option<usize> {
        let mut best = usize::MAX;
        let mut dist = vec![usize::MAX; self.n_vertices];
        let mut parent_edge = vec![usize::MAX; self.n_vertices];
        let mut queue = VecDeque::new();
        for root in 0..self.n_vertices {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            parent_edge.iter_mut().for_each(|p| *p = usize::MAX);
            dist[root] = 0;
            queue.clear();
            queue.push_back(root);
            while let Some(x) = queue.pop_front() {
                if 2 * dist[x] + 1 >= best {
                    break;
                }
                for &(e, y) in &self.adj[x] {
                    if e == parent_edge[x] {
                        continue;
                    }
                    if dist[y] == usize::MAX {
                        dist[y] = dist[x] + 1;
                        parent_edge[y] = e;
                        queue.push_back(y);
                    } else {
                        best = best.min(dist[x] + dist[y] + 1);
                    }
                }
            }
        }
        (best != usize::MAX).then_some(best)
    }

    /// Girth of the corresponding Tanner graph, twice the cycle-graph girth.
    pub fn tanner_girth(&self) -> Option<usize> {
        self.girth().map(|g| 2 * g)
    }

    /// Number of distinct cycles of exactly `len` edges, by exhaustive
    /// enumeration. Cycles are rooted at their smallest vertex and counted
    /// once per direction, hence the final halving.
    pub fn count_cycles(&self, len: usize) -> u64 {
        if len < 2 {
            return 0;
        }
        let mut total = 0u64;
        let mut on_path = vec![false; self.n_vertices];
        let mut used_edge = vec![false; self.edges.len()];
        for start in 0..self.n_vertices {
            on_path[start] = true;
            total += self.extend(start, start, 0, len, &mut on_path, &mut used_edge);
            on_path[start] = false;
        }
        total / 2
    }

    fn extend(
        &self,
        start: usize,
        at: usize,
        depth: usize,
        len: usize,
        on_path: &mut [bool],
        used_edge: &mut [bool],
    ) -> u64 {
        let mut found = 0;
        for &(e, y) in &self.adj[at] {
            if used_edge[e] {
                continue;
            }
            if y == start {
                if depth + 1 == len {
                    found += 1;
                }
                continue;
            }
            if y < start || on_path[y] || depth + 1 >= len {
                continue;
            }
            on_path[y] = true;
            used_edge[e] = true;
            found += self.extend(start, y, depth + 1, len, on_path, used_edge);
            used_edge[e] = false;
            on_path[y] = false;
        }
        found
    }

    /// Whether the edges in `subset` form one cycle through every vertex.
    pub fn is_hamiltonian_cycle(&self, subset: &[usize]) -> bool {
        if subset.len() != self.n_vertices || self.n_vertices == 0 {
            return false;
        }
        let mut adj = vec![Vec::new(); self.n_vertices];
        for &e in subset {
            let (a, b) = self.edges[e];
            adj[a].push((e, b));
            adj[b].push((e, a));
        }
        if adj.iter().any(|a| a.len() != 2) {
            return false;
        }
        // Walk the cycle from vertex 0 and check it closes after n steps.
        let (mut prev_edge, mut at) = (usize::MAX, 0);
        for step in 0..self.n_vertices {
            let &(e, next) = adj[at]
                .iter()
                .find(|(e, _)| *e != prev_edge)
                .unwrap_or(&adj[at][0]);
            prev_edge = e;
            at = next;
            if at == 0 {
                return step + 1 == self.n_vertices;
            }
        }
        false
    }

    /// Line-oriented text dump: header, one `v` line per vertex, one `e` line
    /// per edge.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "graph {} {}", self.n_vertices, self.edges.len()).unwrap();
        for (v, a) in self.adj.iter().enumerate() {
            writeln!(out, "v {} {}", v, a.len()).unwrap();
        }
        for (e, (a, b)) in self.edges.iter().enumerate() {
            writeln!(out, "e {} {} {}", e, a, b).unwrap();
        }
        out
    }
}

/// One edge per column, joining the two rows the column touches.
pub fn build_cycle_graph(h: &SparseFieldMatrix) -> Result<CycleGraph> {
    let cols = h.column_lists();
    let mut edges = Vec::with_capacity(cols.len());
    for (c, entries) in cols.iter().enumerate() {
        if entries.len() != 2 {
            return Err(Error::ColumnWeight {
                col: c,
                weight: entries.len(),
            });
        }
        edges.push((entries[0].0, entries[1].0));
    }
    Ok(CycleGraph::new(h.rows(), edges))
}
