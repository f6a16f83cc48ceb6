use std::fmt::Write as _;

use super::prior::{eval_prior, PriorSpec};
use crate::error::{Error, Result};
use crate::memory::{Metadata, Observation};

/// The knowledge graph `(V, E, t)`: stored observations in insertion order and
/// directed edges `(j, i)` from older vertex `j` to newer vertex `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryState {
    dim: usize,
    vertices: Vec<f32>,
    metadata: Vec<Metadata>,
    edges: Vec<(usize, usize)>,
    in_neighbors: Vec<Vec<usize>>,
}

impl MemoryState {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vertices: Vec::new(),
            metadata: Vec::new(),
            edges: Vec::new(),
            in_neighbors: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Vertex count `t`.
    pub fn len(&self) -> usize {
        self.metadata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metadata.is_empty()
    }

    /// Row-major `t×d` vertex matrix.
    pub fn vertices(&self) -> &[f32] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &[f32] {
        &self.vertices[i * self.dim..(i + 1) * self.dim]
    }

    pub fn metadata(&self, i: usize) -> Option<&Metadata> {
        self.metadata.get(i)
    }

    /// Edges in insertion order: grouped by target, sources ascending.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// In-neighbors of vertex `i`, ascending.
    pub fn neighborhood(&self, i: usize) -> Result<&[usize]> {
        self.in_neighbors
            .get(i)
            .map(Vec::as_slice)
            .ok_or(Error::Index {
                op: "neighborhood",
                index: i,
                extent: self.len(),
            })
    }

    /// Appends `obs` as vertex `t` and links every earlier vertex the prior
    /// accepts.
    pub fn insert(&mut self, obs: &Observation, prior: &PriorSpec) -> Result<()> {
        if obs.features.len() != self.dim {
            return Err(Error::dim(
                "insert_observation",
                format!("observation has {} features, graph stores {}", obs.features.len(), self.dim),
            ));
        }
        let t = self.len();
        let first = match prior.temporal_horizon() {
            Some(h) => t.saturating_sub(h),
            None => 0,
        };
        let mut linked = Vec::new();
        for j in first..t {
            if eval_prior(prior, j, t, self, &obs.meta)? {
                linked.push(j);
            }
        }
        self.vertices.extend_from_slice(&obs.features);
        self.metadata.push(obs.meta.clone());
        self.edges.extend(linked.iter().map(|&j| (j, t)));
        self.in_neighbors.push(linked);
        Ok(())
    }

    /// Edge-list export: a `t d` header line followed by one `j i` line per
    /// edge.
    pub fn export_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dim);
        for (j, i) in &self.edges {
            let _ = writeln!(out, "{} {}", j, i);
        }
        out
    }

    /// Replaces a stored observation's features. Test support for
    /// perturbation studies; not part of the memory update.
    #[doc(hidden)]
    pub fn overwrite_vertex(&mut self, i: usize, features: &[f32]) {
        self.vertices[i * self.dim..(i + 1) * self.dim].copy_from_slice(features);
    }
}

/// Functional form of [`MemoryState::insert`].
pub fn insert_observation(mut state: MemoryState, obs: &Observation, prior: &PriorSpec) -> Result<MemoryState> {
    state.insert(obs, prior)?;
    Ok(state)
}

/// Parses the edge-list export back into `(t, d, edges)`.
pub fn parse_edge_list(text: &str) -> Result<(usize, usize, Vec<(usize, usize)>)> {
    let mut lines = text.lines().enumerate();
    let bad = |line: usize, msg: &str| Error::Parse {
        line: line + 1,
        column: 1,
        message: msg.to_string(),
    };
    let pair = |line: usize, s: &str| -> Result<(usize, usize)> {
        let mut it = s.split_whitespace().map(str::parse::<usize>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
            _ => Err(bad(line, "expected two unsigned integers")),
        }
    };
    let (n, header) = lines.next().ok_or_else(|| bad(0, "missing header"))?;
    let (t, d) = pair(n, header)?;
    let mut edges = Vec::new();
    for (n, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        edges.push(pair(n, l)?);
    }
    Ok((t, d, edges))
}
