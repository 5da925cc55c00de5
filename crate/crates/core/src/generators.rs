//! Random hypergraph constructions: bi-uniform household/workplace
//! partitions, cliques of preferential-attachment graphs, and the half-edge
//! configuration model. All generators are deterministic functions of
//! `(spec, rng)`.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::hypercore::{Hypergraph, WeightedGraph};

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("household size {h} and workplace size {w} must both divide N={n}")]
    Divisibility { n: usize, h: usize, w: usize },
    #[error("attachment count m={m} must satisfy 1 <= m < N={n}")]
    BadAttachment { n: usize, m: usize },
    #[error("half-edge conservation violated: sum of edge sizes {edge_stubs} != sum of node degrees {node_stubs}")]
    Conservation {
        edge_stubs: usize,
        node_stubs: usize,
    },
    #[error("all prescribed sizes and degrees must be >= 1")]
    ZeroEntry,
    #[error("clique extraction requires a simple graph (all weights 1)")]
    NotSimple,
    #[error("regular spec N*d={stubs} must be divisible by e={e}")]
    NotRegularizable { stubs: usize, e: usize },
    #[error(transparent)]
    Hyper(#[from] crate::hypercore::HyperError),
}

/// Union of a partition into households of size `H` and a partition into
/// workplaces of size `W`; every node gets degree exactly 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BiUniformSpec {
    pub n: usize,
    pub household_size: usize,
    pub workplace_size: usize,
}

impl BiUniformSpec {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.household_size == 0
            || self.workplace_size == 0
            || self.n == 0
            || self.n % self.household_size != 0
            || self.n % self.workplace_size != 0
        {
            return Err(GeneratorError::Divisibility {
                n: self.n,
                h: self.household_size,
                w: self.workplace_size,
            });
        }
        Ok(())
    }
}

/// Preferential-attachment graph on `n` nodes, `m` edges per arriving node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BaCliquesSpec {
    pub n: usize,
    pub m: usize,
}

impl BaCliquesSpec {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.m == 0 || self.m >= self.n {
            return Err(GeneratorError::BadAttachment {
                n: self.n,
                m: self.m,
            });
        }
        Ok(())
    }
}

/// Prescribed hyperedge sizes and node degrees for the configuration model.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConfigSpec {
    pub edge_sizes: Vec<usize>,
    pub node_degrees: Vec<usize>,
}

impl ConfigSpec {
    /// Regular spec: `N` nodes of degree `d`, `N*d/e` edges of size `e`.
    pub fn regular(n: usize, d: usize, e: usize) -> Result<Self, GeneratorError> {
        if d == 0 || e == 0 {
            return Err(GeneratorError::ZeroEntry);
        }
        if (n * d) % e != 0 {
            return Err(GeneratorError::NotRegularizable { stubs: n * d, e });
        }
        Ok(Self {
            edge_sizes: vec![e; n * d / e],
            node_degrees: vec![d; n],
        })
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self
            .edge_sizes
            .iter()
            .chain(&self.node_degrees)
            .any(|&x| x == 0)
        {
            return Err(GeneratorError::ZeroEntry);
        }
        let edge_stubs: usize = self.edge_sizes.iter().sum();
        let node_stubs: usize = self.node_degrees.iter().sum();
        if edge_stubs != node_stubs {
            return Err(GeneratorError::Conservation {
                edge_stubs,
                node_stubs,
            });
        }
        Ok(())
    }
}

/// Sample a bi-uniform hypergraph: household edges first, then workplace
/// edges. Each family is a uniformly random partition of the node set.
pub fn gen_bi_uniform<R: Rng>(
    spec: &BiUniformSpec,
    rng: &mut R,
) -> Result<Hypergraph, GeneratorError> {
    spec.validate()?;
    let mut edges = Vec::with_capacity(spec.n / spec.household_size + spec.n / spec.workplace_size);
    for block in [spec.household_size, spec.workplace_size] {
        // A shuffled permutation chopped into consecutive blocks is a
        // uniformly random partition into blocks of the given size.
        let mut perm: Vec<usize> = (0..spec.n).collect();
        perm.shuffle(rng);
        for chunk in perm.chunks(block) {
            edges.push(chunk.to_vec());
        }
    }
    Ok(Hypergraph::new(spec.n, edges)?)
}

/// Grow a Barabasi-Albert graph from a complete seed on `m + 1` nodes; each
/// arriving node attaches to `m` distinct existing nodes with probability
/// proportional to their current degree.
pub fn gen_ba_graph<R: Rng>(
    spec: &BaCliquesSpec,
    rng: &mut R,
) -> Result<WeightedGraph, GeneratorError> {
    spec.validate()?;
    let mut g = WeightedGraph::new(spec.n);
    // One entry per half-edge; sampling an index uniformly is
    // degree-proportional sampling of a node.
    let mut stubs: Vec<usize> = Vec::with_capacity(2 * spec.n * spec.m);
    let seed = (spec.m + 1).min(spec.n);
    for i in 0..seed {
        for j in i + 1..seed {
            g.add_weight(i, j, 1);
            stubs.push(i);
            stubs.push(j);
        }
    }
    let mut targets = Vec::with_capacity(spec.m);
    for v in seed..spec.n {
        targets.clear();
        while targets.len() < spec.m {
            let candidate = stubs[rng.gen_range(0..stubs.len())];
            if !targets.contains(&candidate) {
                targets.push(candidate);
            }
        }
        for &t in &targets {
            g.add_weight(v, t, 1);
            stubs.push(v);
            stubs.push(t);
        }
    }
    Ok(g)
}

/// Hyperedges are the maximal cliques (size >= 2) of a simple graph,
/// enumerated with Bron-Kerbosch pivoting and listed in lexicographic order.
pub fn cliques_to_hypergraph(g: &WeightedGraph) -> Result<Hypergraph, GeneratorError> {
    if !g.is_simple() {
        return Err(GeneratorError::NotSimple);
    }
    let adj: Vec<Vec<usize>> = (0..g.num_nodes())
        .map(|i| g.neighbors(i).map(|(j, _)| j).collect())
        .collect();
    let mut cliques = Vec::new();
    let p: Vec<usize> = (0..g.num_nodes()).collect();
    bron_kerbosch(&adj, &mut Vec::new(), p, Vec::new(), &mut cliques);
    cliques.retain(|c| c.len() >= 2);
    for c in &mut cliques {
        c.sort_unstable();
    }
    cliques.sort();
    Ok(Hypergraph::new(g.num_nodes(), cliques)?)
}

fn bron_kerbosch(
    adj: &[Vec<usize>],
    r: &mut Vec<usize>,
    p: Vec<usize>,
    x: Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() && x.is_empty() {
        out.push(r.clone());
        return;
    }
    // Pivot on the candidate covering the most of P.
    let pivot = p
        .iter()
        .chain(&x)
        .copied()
        .max_by_key(|&u| p.iter().filter(|&&v| adj[u].binary_search(&v).is_ok()).count())
        .unwrap();
    let candidates: Vec<usize> = p
        .iter()
        .copied()
        .filter(|&v| adj[pivot].binary_search(&v).is_err())
        .collect();
    let mut p = p;
    let mut x = x;
    for v in candidates {
        let neigh = &adj[v];
        let next_p: Vec<usize> = p
            .iter()
            .copied()
            .filter(|&u| neigh.binary_search(&u).is_ok())
            .collect();
        let next_x: Vec<usize> = x
            .iter()
            .copied()
            .filter(|&u| neigh.binary_search(&u).is_ok())
            .collect();
        r.push(v);
        bron_kerbosch(adj, r, next_p, next_x, out);
        r.pop();
        p.retain(|&u| u != v);
        x.push(v);
    }
}

/// Configuration-model hypergraph: uniformly match node half-edges to
/// hyperedge half-edges, then collapse parallel incidences. Realized degrees
/// and sizes can fall short of the prescription where collisions occurred.
pub fn gen_configuration<R: Rng>(
    spec: &ConfigSpec,
    rng: &mut R,
) -> Result<Hypergraph, GeneratorError> {
    spec.validate()?;
    let mut node_stubs: Vec<usize> = spec
        .node_degrees
        .iter()
        .enumerate()
        .flat_map(|(i, &d)| std::iter::repeat(i).take(d))
        .collect();
    node_stubs.shuffle(rng);
    let mut edges: Vec<Vec<usize>> = spec.edge_sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
    let mut stub_iter = node_stubs.into_iter();
    for (j, &size) in spec.edge_sizes.iter().enumerate() {
        for _ in 0..size {
            let node = stub_iter.next().expect("stub counts validated equal");
            if !edges[j].contains(&node) {
                edges[j].push(node);
            }
        }
    }
    Ok(Hypergraph::new(spec.node_degrees.len(), edges)?)
}
