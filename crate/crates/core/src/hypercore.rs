//! Core hypergraph and epidemic-state types plus the infection-pressure
//! primitives everything else is built from.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HyperError {
    #[error("state has {state} nodes but hypergraph has {nodes}")]
    DimensionMismatch { state: usize, nodes: usize },
    #[error("node {0} out of range")]
    NodeOutOfRange(usize),
    #[error("node {0} is infected; infection rate is only defined for susceptible nodes")]
    NodeInfected(usize),
    #[error("hypergraph must have at least one node")]
    NoNodes,
    #[error("hyperedge {edge}: {reason}")]
    BadHyperedge { edge: usize, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Node set `{0..N-1}` plus an ordered list of hyperedges, each a nonempty
/// duplicate-free subset of the nodes. Edge order is stable: it defines the
/// column order of the incidence matrix and survives serialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    num_nodes: usize,
    edges: Vec<Vec<usize>>,
    memberships: Vec<Vec<usize>>,
}

impl Hypergraph {
    /// Build a hypergraph, validating and sorting each edge. Duplicate node
    /// ids within an edge are rejected; duplicate edges are allowed and kept
    /// as distinct columns.
    pub fn new(num_nodes: usize, edges: Vec<Vec<usize>>) -> Result<Self, HyperError> {
        if num_nodes == 0 {
            return Err(HyperError::NoNodes);
        }
        let mut sorted_edges = Vec::with_capacity(edges.len());
        for (j, mut e) in edges.into_iter().enumerate() {
            if e.is_empty() {
                return Err(HyperError::BadHyperedge {
                    edge: j,
                    reason: "empty edge".into(),
                });
            }
            e.sort_unstable();
            if e.windows(2).any(|w| w[0] == w[1]) {
                return Err(HyperError::BadHyperedge {
                    edge: j,
                    reason: "duplicate node id within edge".into(),
                });
            }
            if *e.last().unwrap() >= num_nodes {
                return Err(HyperError::BadHyperedge {
                    edge: j,
                    reason: format!("node id {} out of range", e.last().unwrap()),
                });
            }
            sorted_edges.push(e);
        }
        let mut memberships = vec![Vec::new(); num_nodes];
        for (j, e) in sorted_edges.iter().enumerate() {
            for &i in e {
                memberships[i].push(j);
            }
        }
        Ok(Self {
            num_nodes,
            edges: sorted_edges,
            memberships,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, j: usize) -> &[usize] {
        &self.edges[j]
    }

    pub fn edges(&self) -> impl Iterator<Item = &[usize]> {
        self.edges.iter().map(|e| e.as_slice())
    }

    /// Hyperedge ids containing node `i`.
    pub fn memberships(&self, i: usize) -> &[usize] {
        &self.memberships[i]
    }

    pub fn max_edge_size(&self) -> usize {
        self.edges.iter().map(|e| e.len()).max().unwrap_or(0)
    }

    /// Node degree in the hypergraph sense: number of hyperedges containing it.
    pub fn degree(&self, i: usize) -> usize {
        self.memberships[i].len()
    }

    /// Parse the line-oriented text format: first line `N M`, then `M` lines
    /// of space-separated node ids. `#` starts a comment; blank lines are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self, HyperError> {
        let mut lines = text.lines().enumerate().filter_map(|(no, raw)| {
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                None
            } else {
                Some((no + 1, body))
            }
        });
        let (line, header) = lines.next().ok_or(HyperError::Parse {
            line: 0,
            reason: "missing `N M` header".into(),
        })?;
        let mut it = header.split_whitespace();
        let parse_num = |tok: Option<&str>, line: usize| -> Result<usize, HyperError> {
            tok.ok_or(HyperError::Parse {
                line,
                reason: "expected two integers `N M`".into(),
            })?
            .parse()
            .map_err(|_| HyperError::Parse {
                line,
                reason: "invalid integer".into(),
            })
        };
        let n = parse_num(it.next(), line)?;
        let m = parse_num(it.next(), line)?;
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let (line, body) = lines.next().ok_or(HyperError::Parse {
                line: 0,
                reason: format!("expected {m} hyperedge lines"),
            })?;
            let edge: Result<Vec<usize>, _> = body
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>().map_err(|_| HyperError::Parse {
                        line,
                        reason: format!("invalid node id `{tok}`"),
                    })
                })
                .collect();
            edges.push(edge?);
        }
        Self::new(n, edges)
    }

    /// Serialize to the text format parsed by [`Hypergraph::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.num_nodes, self.edges.len());
        for e in &self.edges {
            let ids: Vec<String> = e.iter().map(|i| i.to_string()).collect();
            out.push_str(&ids.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Binary infection state of every node: bit `i` is 1 iff node `i` is
/// infected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpidemicState {
    bits: Vec<bool>,
}

impl EpidemicState {
    pub fn all_susceptible(num_nodes: usize) -> Self {
        Self {
            bits: vec![false; num_nodes],
        }
    }

    pub fn all_infected(num_nodes: usize) -> Self {
        Self {
            bits: vec![true; num_nodes],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn with_infected(num_nodes: usize, infected: &[usize]) -> Self {
        let mut s = Self::all_susceptible(num_nodes);
        for &i in infected {
            s.bits[i] = true;
        }
        s
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_infected(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, infected: bool) {
        self.bits[i] = infected;
    }

    pub fn infected_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn infected_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    /// The infected set of `self` contains that of `other`.
    pub fn dominates(&self, other: &EpidemicState) -> bool {
        self.bits.len() == other.bits.len()
            && self
                .bits
                .iter()
                .zip(&other.bits)
                .all(|(&a, &b)| a || !b)
    }
}

impl fmt::Display for EpidemicState {
    /// `S`/`I` word with node 0 first, matching the master-equation listing.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "I" } else { "S" })?;
        }
        Ok(())
    }
}

/// The piecewise-linear infection-pressure discount `f(x) = min(x, c)`,
/// defined on nonnegative reals so that mean-field closures can evaluate it
/// at fractional expected counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfectionFunction {
    threshold: f64,
}

impl InfectionFunction {
    /// `c` must be positive.
    pub fn new(threshold: f64) -> Self {
        assert!(
            threshold > 0.0 && threshold.is_finite(),
            "threshold c must be positive and finite"
        );
        Self { threshold }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        x.min(self.threshold)
    }
}

/// Per-unit-time rates of the SIS process together with the discount `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    pub tau: f64,
    pub gamma: f64,
    pub f: InfectionFunction,
}

impl EpidemicParams {
    pub fn new(tau: f64, gamma: f64, f: InfectionFunction) -> Self {
        assert!(tau >= 0.0 && gamma >= 0.0, "rates must be nonnegative");
        Self { tau, gamma, f }
    }
}

/// Undirected weighted graph with positive integer weights and no self-loops.
/// Produced by [`clique_expand`] (weights count hyperedge co-memberships) and
/// by the preferential-attachment generator (all weights 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedGraph {
    num_nodes: usize,
    adj: Vec<BTreeMap<usize, u32>>,
}

impl WeightedGraph {
    pub fn new(num_nodes: usize) -> Self {
        Self {
            num_nodes,
            adj: vec![BTreeMap::new(); num_nodes],
        }
    }

    /// Add `w` to the weight of `{i, j}`.
    pub fn add_weight(&mut self, i: usize, j: usize, w: u32) {
        assert!(i != j, "self-loops are not allowed");
        assert!(i < self.num_nodes && j < self.num_nodes);
        *self.adj[i].entry(j).or_insert(0) += w;
        *self.adj[j].entry(i).or_insert(0) += w;
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of node pairs with positive weight.
    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    pub fn weight(&self, i: usize, j: usize) -> u32 {
        self.adj[i].get(&j).copied().unwrap_or(0)
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.adj[i].iter().map(|(&j, &w)| (j, w))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    /// Sum of incident edge weights.
    pub fn weight_degree(&self, i: usize) -> u64 {
        self.adj[i].values().map(|&w| w as u64).sum()
    }

    /// All weights equal to 1.
    pub fn is_simple(&self) -> bool {
        self.adj.iter().all(|a| a.values().all(|&w| w == 1))
    }

    /// Edges as `(i, j, w)` with `i < j`, in lexicographic order.
    pub fn edge_list(&self) -> Vec<(usize, usize, u32)> {
        let mut out = Vec::new();
        for (i, a) in self.adj.iter().enumerate() {
            for (&j, &w) in a {
                if i < j {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Weighted number of infected neighbours of `i`.
    pub fn weighted_infected_count(&self, s: &EpidemicState, i: usize) -> u64 {
        self.adj[i]
            .iter()
            .filter(|(&j, _)| s.is_infected(j))
            .map(|(_, &w)| w as u64)
            .sum()
    }
}

fn check_paired(h: &Hypergraph, s: &EpidemicState) -> Result<(), HyperError> {
    if s.len() != h.num_nodes() {
        return Err(HyperError::DimensionMismatch {
            state: s.len(),
            nodes: h.num_nodes(),
        });
    }
    Ok(())
}

/// Number of infected nodes in each hyperedge: the product `x J` with the
/// incidence matrix `J`.
pub fn edge_infected_counts(h: &Hypergraph, s: &EpidemicState) -> Result<Vec<usize>, HyperError> {
    check_paired(h, s)?;
    Ok(h.edges()
        .map(|e| e.iter().filter(|&&i| s.is_infected(i)).count())
        .collect())
}

/// Infection rate `tau * sum over hyperedges containing `node` of f(k_h)`
/// for a susceptible node.
pub fn infection_rate(
    h: &Hypergraph,
    s: &EpidemicState,
    node: usize,
    p: &EpidemicParams,
) -> Result<f64, HyperError> {
    check_paired(h, s)?;
    if node >= h.num_nodes() {
        return Err(HyperError::NodeOutOfRange(node));
    }
    if s.is_infected(node) {
        return Err(HyperError::NodeInfected(node));
    }
    let pressure: f64 = h
        .memberships(node)
        .iter()
        .map(|&j| {
            let k = h.edge(j).iter().filter(|&&i| s.is_infected(i)).count();
            p.f.eval(k as f64)
        })
        .sum();
    Ok(p.tau * pressure)
}

/// Same rate given precomputed [`edge_infected_counts`]; the hot path of the
/// simulation step.
pub fn infection_rate_from_counts(
    h: &Hypergraph,
    counts: &[usize],
    node: usize,
    p: &EpidemicParams,
) -> f64 {
    let pressure: f64 = h
        .memberships(node)
        .iter()
        .map(|&j| p.f.eval(counts[j] as f64))
        .sum();
    p.tau * pressure
}

/// The generalized SI-pair count `N_SI^f`: sum over susceptible nodes of the
/// f-discounted infected counts of their hyperedges. Equals `1/tau` times the
/// total infection rate of the state.
pub fn n_si_f(h: &Hypergraph, s: &EpidemicState, f: &InfectionFunction) -> Result<f64, HyperError> {
    check_paired(h, s)?;
    let counts = edge_infected_counts(h, s)?;
    let mut total = 0.0;
    for node in 0..h.num_nodes() {
        if !s.is_infected(node) {
            for &j in h.memberships(node) {
                total += f.eval(counts[j] as f64);
            }
        }
    }
    Ok(total)
}

/// Weighted clique expansion: `w(i,j)` counts the hyperedges containing both
/// `i` and `j`.
pub fn clique_expand(h: &Hypergraph) -> WeightedGraph {
    let mut g = WeightedGraph::new(h.num_nodes());
    for e in h.edges() {
        for (a, &i) in e.iter().enumerate() {
            for &j in &e[a + 1..] {
                g.add_weight(i, j, 1);
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// The 4-node, 3-hyperedge example hypergraph: edges {0,1,3}, {1,2}, {2,3}.
    pub(crate) fn fig1() -> Hypergraph {
        Hypergraph::new(4, vec![vec![0, 1, 3], vec![1, 2], vec![2, 3]]).unwrap()
    }

    fn params(tau: f64, gamma: f64, c: f64) -> EpidemicParams {
        EpidemicParams::new(tau, gamma, InfectionFunction::new(c))
    }

    #[test]
    fn incidence_consistency() {
        let h = fig1();
        for i in 0..h.num_nodes() {
            for j in 0..h.num_edges() {
                assert_eq!(
                    h.edge(j).contains(&i),
                    h.memberships(i).contains(&j),
                    "node {i} edge {j}"
                );
            }
        }
    }

    #[test]
    fn edge_counts_worked_example() {
        let h = fig1();
        // SISI: nodes 1 and 3 infected.
        let s = EpidemicState::with_infected(4, &[1, 3]);
        assert_eq!(edge_infected_counts(&h, &s).unwrap(), vec![2, 1, 1]);
        let none = EpidemicState::all_susceptible(4);
        assert_eq!(edge_infected_counts(&h, &none).unwrap(), vec![0, 0, 0]);
        let all = EpidemicState::all_infected(4);
        assert_eq!(edge_infected_counts(&h, &all).unwrap(), vec![3, 2, 2]);
    }

    #[test]
    fn infection_rate_worked_example() {
        let h = fig1();
        let s = EpidemicState::with_infected(4, &[1, 3]);
        let p = params(0.7, 1.0, 5.0);
        // Node 0 is only in edge {0,1,3} which has two infected members.
        assert_eq!(infection_rate(&h, &s, 0, &p).unwrap(), 0.7 * 2.0);
        let none = EpidemicState::all_susceptible(4);
        for i in 0..4 {
            assert_eq!(infection_rate(&h, &none, i, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn infection_rate_discounted() {
        // Node 0 in two edges with 1 and 3 infected members; c=2 gives f(1)+f(3)=1+2.
        let h = Hypergraph::new(5, vec![vec![0, 1], vec![0, 2, 3, 4]]).unwrap();
        let s = EpidemicState::with_infected(5, &[1, 2, 3, 4]);
        let p = params(1.0, 1.0, 2.0);
        assert_eq!(infection_rate(&h, &s, 0, &p).unwrap(), 3.0);
    }

    #[test]
    fn infection_rate_errors() {
        let h = fig1();
        let s = EpidemicState::with_infected(4, &[1]);
        let p = params(1.0, 1.0, 2.0);
        assert!(matches!(
            infection_rate(&h, &s, 9, &p),
            Err(HyperError::NodeOutOfRange(9))
        ));
        assert!(matches!(
            infection_rate(&h, &s, 1, &p),
            Err(HyperError::NodeInfected(1))
        ));
        let short = EpidemicState::all_susceptible(3);
        assert!(matches!(
            infection_rate(&h, &short, 0, &p),
            Err(HyperError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn n_si_f_worked_example() {
        let h = fig1();
        let s = EpidemicState::with_infected(4, &[1, 3]);
        // Susceptible nodes 0 and 2: node 0 sees k=2 in {0,1,3}; node 2 sees
        // k=1 in {1,2} and k=1 in {2,3}. Total 2 f(1) + f(2).
        for c in [1.0, 2.0, 5.0] {
            let f = InfectionFunction::new(c);
            let expected = 2.0 * f.eval(1.0) + f.eval(2.0);
            assert_eq!(n_si_f(&h, &s, &f).unwrap(), expected);
        }
        let f = InfectionFunction::new(2.0);
        assert_eq!(n_si_f(&h, &EpidemicState::all_infected(4), &f).unwrap(), 0.0);
        assert_eq!(
            n_si_f(&h, &EpidemicState::all_susceptible(4), &f).unwrap(),
            0.0
        );
    }

    #[test]
    fn clique_expand_fig1() {
        let g = clique_expand(&fig1());
        let expected = [(0, 1, 1), (0, 3, 1), (1, 2, 1), (1, 3, 1), (2, 3, 1)];
        assert_eq!(g.edge_list(), expected.to_vec());
        assert_eq!(g.weight(0, 2), 0);
    }

    #[test]
    fn clique_expand_single_edge_is_complete() {
        let h = Hypergraph::new(5, vec![vec![0, 1, 2, 3, 4]]).unwrap();
        let g = clique_expand(&h);
        assert_eq!(g.num_edges(), 10);
        assert!(g.is_simple());
    }

    #[test]
    fn clique_expand_duplicate_edges_weight_two() {
        let h = Hypergraph::new(3, vec![vec![0, 1], vec![0, 1]]).unwrap();
        let g = clique_expand(&h);
        assert_eq!(g.weight(0, 1), 2);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Hypergraph::new(3, vec![vec![0, 0]]).is_err());
        assert!(Hypergraph::new(3, vec![vec![3]]).is_err());
        assert!(Hypergraph::new(3, vec![vec![]]).is_err());
        assert!(Hypergraph::new(0, vec![]).is_err());
    }

    #[test]
    fn parse_round_trip_and_comments() {
        let text = "# example\n4 3\n0 1 3\n1 2 # workplace\n\n2 3\n";
        let h = Hypergraph::parse(text).unwrap();
        assert_eq!(h, fig1());
        assert_eq!(Hypergraph::parse(&h.to_text()).unwrap(), h);
    }

    #[test]
    fn parse_errors() {
        assert!(Hypergraph::parse("").is_err());
        assert!(Hypergraph::parse("4").is_err());
        assert!(Hypergraph::parse("4 2\n0 1\n").is_err());
        assert!(Hypergraph::parse("4 1\n0 x\n").is_err());
    }

    fn arb_hypergraph() -> impl Strategy<Value = Hypergraph> {
        (2usize..8).prop_flat_map(|n| {
            proptest::collection::vec(
                proptest::collection::btree_set(0..n, 1..=n.min(4)),
                1..6,
            )
            .prop_map(move |edges| {
                let edges = edges.into_iter().map(|e| e.into_iter().collect()).collect();
                Hypergraph::new(n, edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn f_is_min_monotone_bounded(c in 0.5f64..20.0, x in 0.0f64..100.0, y in 0.0f64..100.0) {
            let f = InfectionFunction::new(c);
            prop_assert_eq!(f.eval(x), x.min(c));
            prop_assert!(f.eval(x) <= x && f.eval(x) <= c);
            if x <= y {
                prop_assert!(f.eval(x) <= f.eval(y));
            }
            prop_assert_eq!(f.eval(0.0), 0.0);
        }

        #[test]
        fn rate_decomposition(h in arb_hypergraph(), mask in any::<u64>(), c in 1.0f64..6.0) {
            let n = h.num_nodes();
            let bits = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let s = EpidemicState::from_bits(bits);
            let p = params(0.37, 1.0, c);
            let total: f64 = (0..n)
                .filter(|&i| !s.is_infected(i))
                .map(|i| infection_rate(&h, &s, i, &p).unwrap())
                .sum();
            let nsif = n_si_f(&h, &s, &p.f).unwrap();
            prop_assert!((p.tau * nsif - total).abs() < 1e-12);
        }

        #[test]
        fn clique_expansion_degree_identity(h in arb_hypergraph()) {
            let g = clique_expand(&h);
            for i in 0..h.num_nodes() {
                let expected: u64 = h
                    .memberships(i)
                    .iter()
                    .map(|&j| (h.edge(j).len() - 1) as u64)
                    .sum();
                prop_assert_eq!(g.weight_degree(i), expected);
            }
        }

        #[test]
        fn large_c_rates_match_clique_expansion(h in arb_hypergraph(), mask in any::<u64>()) {
            let n = h.num_nodes();
            let bits = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let s = EpidemicState::from_bits(bits);
            let c = h.max_edge_size().max(1) as f64;
            let p = params(0.9, 1.0, c);
            let g = clique_expand(&h);
            for i in 0..n {
                if !s.is_infected(i) {
                    let hyper = infection_rate(&h, &s, i, &p).unwrap();
                    let graph = p.tau * g.weighted_infected_count(&s, i) as f64;
                    prop_assert_eq!(hyper, graph);
                }
            }
        }

        #[test]
        fn text_round_trip(h in arb_hypergraph()) {
            let back = Hypergraph::parse(&h.to_text()).unwrap();
            prop_assert_eq!(back, h);
        }
    }
}
