//! Exact Kolmogorov master equations of the hypergraph SIS process.
//!
//! The `2^N` configurations are grouped into classes `S^0..S^N` by infected
//! count; within a class, states are ordered by increasing binary value of
//! the state word with node 0 as the most significant bit. The generator `P`
//! is block tridiagonal: infection blocks `A^k` (class `k-1` to `k`),
//! diagonal blocks `B^k`, recovery blocks `C^k` (class `k+1` to `k`), and
//! every column of `P` sums to zero.

use serde::Serialize;
use thiserror::Error;

use crate::hypercore::{EpidemicParams, EpidemicState, HyperError, Hypergraph};
use crate::ode::{self, OdeError};
use crate::simulate::{self, SimConfig};

pub const DEFAULT_N_MAX: usize = 20;

#[derive(Debug, Error)]
pub enum MasterError {
    #[error("hypergraph has {n} nodes, exceeding the master-equation cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("hypergraph has no hyperedges")]
    NoEdges,
    #[error("distribution has {got} entries, expected {expected}")]
    BadDistribution { got: usize, expected: usize },
    #[error("probability mass drifted to {sum} (renormalization error above 1e-7)")]
    MassDrift { sum: f64 },
    #[error("time grid needs at least 3 uniformly spaced points")]
    GridTooCoarse,
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Hyper(#[from] HyperError),
    #[error(transparent)]
    Sim(#[from] crate::simulate::SimError),
}

/// Canonical bijection between state words and (class, within-class index).
///
/// A state word has bit `N-1-i` set iff node `i` is infected, so the
/// susceptible/infected letters of a state read in node order are the binary
/// digits of the word.
#[derive(Debug, Clone)]
pub struct StateIndex {
    n: usize,
    class_offsets: Vec<usize>,
    states: Vec<u32>,
    position: Vec<u32>,
}

impl StateIndex {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1 && n <= 30);
        let total = 1usize << n;
        let mut by_class: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
        for word in 0..total as u32 {
            by_class[word.count_ones() as usize].push(word);
        }
        let mut class_offsets = Vec::with_capacity(n + 2);
        let mut states = Vec::with_capacity(total);
        let mut position = vec![0u32; total];
        class_offsets.push(0);
        for class in &by_class {
            // Words arrive in increasing order already.
            for (j, &w) in class.iter().enumerate() {
                position[w as usize] = j as u32;
                states.push(w);
            }
            class_offsets.push(states.len());
        }
        Self {
            n,
            class_offsets,
            states,
            position,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn class_size(&self, k: usize) -> usize {
        self.class_offsets[k + 1] - self.class_offsets[k]
    }

    pub fn class_offset(&self, k: usize) -> usize {
        self.class_offsets[k]
    }

    /// Word of the `j`-th state of class `k`.
    pub fn word(&self, k: usize, j: usize) -> u32 {
        self.states[self.class_offsets[k] + j]
    }

    /// Within-class index of a word.
    pub fn within_class(&self, word: u32) -> usize {
        self.position[word as usize] as usize
    }

    pub fn global_index(&self, word: u32) -> usize {
        self.class_offsets[word.count_ones() as usize] + self.within_class(word)
    }

    pub fn word_of(&self, s: &EpidemicState) -> u32 {
        assert_eq!(s.len(), self.n);
        let mut word = 0u32;
        for i in 0..self.n {
            if s.is_infected(i) {
                word |= 1 << (self.n - 1 - i);
            }
        }
        word
    }

    pub fn state_of(&self, word: u32) -> EpidemicState {
        let bits = (0..self.n)
            .map(|i| word >> (self.n - 1 - i) & 1 == 1)
            .collect();
        EpidemicState::from_bits(bits)
    }
}

/// Sparse rectangular block stored column-wise.
#[derive(Debug, Clone)]
pub struct Block {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<(u32, f64)>>,
}

impl Block {
    fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Vec::new(); cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[j]
            .iter()
            .find(|&&(r, _)| r as usize == i)
            .map_or(0.0, |&(_, v)| v)
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        self.entries[j].iter().map(|&(_, v)| v).sum()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.entries.iter().map(|c| c.len()).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.cols]; self.rows];
        for (j, col) in self.entries.iter().enumerate() {
            for &(i, v) in col {
                m[i as usize][j] = v;
            }
        }
        m
    }

    /// Triplets sorted by (column, row).
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.num_nonzeros());
        for (j, col) in self.entries.iter().enumerate() {
            let mut col: Vec<_> = col.clone();
            col.sort_by_key(|&(r, _)| r);
            for (i, v) in col {
                out.push((i as usize, j, v));
            }
        }
        out
    }

    /// `y += block * x`.
    fn matvec_add(&self, x: &[f64], y: &mut [f64]) {
        for (j, col) in self.entries.iter().enumerate() {
            let xj = x[j];
            if xj != 0.0 {
                for &(i, v) in col {
                    y[i as usize] += v * xj;
                }
            }
        }
    }
}

/// Assembled block-tridiagonal generator together with the per-state
/// `N_SI^f` values needed for the `[SI]` expectation.
pub struct MasterSystem {
    index: StateIndex,
    params: EpidemicParams,
    /// `a[k]`: infection block into class `k`, `k = 1..=N` (`a[0]` is empty).
    a: Vec<Block>,
    /// Diagonal of `B^k` per class.
    b: Vec<Vec<f64>>,
    /// `c[k]`: recovery block into class `k`, `k = 0..N` (`c[N]` is empty).
    c: Vec<Block>,
    /// `N_SI^f` of each state, in global canonical order (no `tau` factor).
    nsif: Vec<f64>,
}

/// Build the master system for a hypergraph, rejecting node counts above
/// `n_max`.
pub fn build_master_capped(
    h: &Hypergraph,
    p: &EpidemicParams,
    n_max: usize,
) -> Result<MasterSystem, MasterError> {
    let n = h.num_nodes();
    if n > n_max {
        return Err(MasterError::TooLarge { n, cap: n_max });
    }
    if h.num_edges() == 0 {
        return Err(MasterError::NoEdges);
    }
    let index = StateIndex::new(n);
    let mut a: Vec<Block> = (0..=n)
        .map(|k| {
            let cols = if k == 0 { 0 } else { index.class_size(k - 1) };
            Block::new(index.class_size(k), cols)
        })
        .collect();
    let mut c: Vec<Block> = (0..=n)
        .map(|k| {
            let cols = if k == n { 0 } else { index.class_size(k + 1) };
            Block::new(index.class_size(k), cols)
        })
        .collect();
    let mut b: Vec<Vec<f64>> = (0..=n).map(|k| vec![0.0; index.class_size(k)]).collect();
    let mut nsif = vec![0.0; index.num_states()];

    let mut counts = vec![0usize; h.num_edges()];
    for word in 0..index.num_states() as u32 {
        let k = word.count_ones() as usize;
        let col = index.within_class(word);
        for (j, e) in h.edges().enumerate() {
            counts[j] = e
                .iter()
                .filter(|&&i| word >> (n - 1 - i) & 1 == 1)
                .count();
        }
        let mut out_rate = 0.0;
        let mut state_nsif = 0.0;
        for node in 0..n {
            let bit = 1u32 << (n - 1 - node);
            if word & bit == 0 {
                let pressure: f64 = h
                    .memberships(node)
                    .iter()
                    .map(|&j| p.f.eval(counts[j] as f64))
                    .sum();
                state_nsif += pressure;
                let rate = p.tau * pressure;
                if rate > 0.0 {
                    let row = index.within_class(word | bit) as u32;
                    a[k + 1].entries[col].push((row, rate));
                    out_rate += rate;
                }
            } else if p.gamma > 0.0 {
                let row = index.within_class(word & !bit) as u32;
                c[k - 1].entries[col].push((row, p.gamma));
                out_rate += p.gamma;
            }
        }
        nsif[index.global_index(word)] = state_nsif;
        b[k][col] = -out_rate;
    }
    Ok(MasterSystem {
        index,
        params: *p,
        a,
        b,
        c,
        nsif,
    })
}

pub fn build_master(h: &Hypergraph, p: &EpidemicParams) -> Result<MasterSystem, MasterError> {
    build_master_capped(h, p, DEFAULT_N_MAX)
}

impl MasterSystem {
    pub fn index(&self) -> &StateIndex {
        &self.index
    }

    pub fn num_nodes(&self) -> usize {
        self.index.num_nodes()
    }

    pub fn params(&self) -> &EpidemicParams {
        &self.params
    }

    pub fn a_block(&self, k: usize) -> &Block {
        &self.a[k]
    }

    pub fn b_diag(&self, k: usize) -> &[f64] {
        &self.b[k]
    }

    pub fn c_block(&self, k: usize) -> &Block {
        &self.c[k]
    }

    /// `N_SI^f` of the `j`-th state of class `k`.
    pub fn nsif(&self, k: usize, j: usize) -> f64 {
        self.nsif[self.index.class_offset(k) + j]
    }

    /// `dx = P x` over the full state space.
    pub fn apply(&self, x: &[f64], dx: &mut [f64]) {
        let n = self.num_nodes();
        dx.fill(0.0);
        for k in 0..=n {
            let off = self.index.class_offset(k);
            let len = self.index.class_size(k);
            let target = &mut dx[off..off + len];
            for (j, &bv) in self.b[k].iter().enumerate() {
                target[j] = bv * x[off + j];
            }
            if k > 0 {
                let prev = self.index.class_offset(k - 1);
                self.a[k].matvec_add(&x[prev..prev + self.index.class_size(k - 1)], target);
            }
            if k < n {
                let next = self.index.class_offset(k + 1);
                self.c[k].matvec_add(&x[next..next + self.index.class_size(k + 1)], target);
            }
        }
    }

    /// Point-mass distribution on a configuration.
    pub fn point_mass(&self, s: &EpidemicState) -> Distribution {
        let mut probs = vec![0.0; self.index.num_states()];
        probs[self.index.global_index(self.index.word_of(s))] = 1.0;
        Distribution { probs }
    }

    /// Uniform distribution over class `k`.
    pub fn uniform_over_class(&self, k: usize) -> Distribution {
        let mut probs = vec![0.0; self.index.num_states()];
        let off = self.index.class_offset(k);
        let size = self.index.class_size(k);
        for p in &mut probs[off..off + size] {
            *p = 1.0 / size as f64;
        }
        Distribution { probs }
    }

    /// Sparse-triplet text dump of every block, for golden-file comparisons.
    pub fn dump_blocks(&self) -> String {
        let n = self.num_nodes();
        let mut out = format!(
            "# master blocks N={} tau={} gamma={} c={}\n",
            n,
            self.params.tau,
            self.params.gamma,
            self.params.f.threshold()
        );
        for k in 1..=n {
            let blk = &self.a[k];
            out.push_str(&format!("A {} {} {}\n", k, blk.rows(), blk.cols()));
            for (i, j, v) in blk.triplets() {
                out.push_str(&format!("{i} {j} {v}\n"));
            }
        }
        for (k, diag) in self.b.iter().enumerate() {
            out.push_str(&format!("B {} {}\n", k, diag.len()));
            for (i, v) in diag.iter().enumerate() {
                out.push_str(&format!("{i} {v}\n"));
            }
        }
        for k in 0..n {
            let blk = &self.c[k];
            out.push_str(&format!("C {} {} {}\n", k, blk.rows(), blk.cols()));
            for (i, j, v) in blk.triplets() {
                out.push_str(&format!("{i} {j} {v}\n"));
            }
        }
        out
    }
}

/// Probability vector over the canonical state ordering.
#[derive(Debug, Clone)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn from_probs(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Integrate `dX = P X` from `x0` and return the distribution at every grid
/// point. Absolute tolerance 1e-9; total mass must stay within 1e-7 of 1.
pub fn integrate_master(
    ms: &MasterSystem,
    x0: &Distribution,
    t_grid: &[f64],
) -> Result<Vec<Distribution>, MasterError> {
    if x0.probs.len() != ms.index.num_states() {
        return Err(MasterError::BadDistribution {
            got: x0.probs.len(),
            expected: ms.index.num_states(),
        });
    }
    let sol = ode::integrate_grid(
        |_, x, dx| ms.apply(x, dx),
        &x0.probs,
        t_grid,
        1e-9,
    )?;
    let mut out = Vec::with_capacity(sol.len());
    for probs in sol {
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-7 {
            return Err(MasterError::MassDrift { sum });
        }
        out.push(Distribution { probs });
    }
    Ok(out)
}

/// Expected prevalence `[I]`, susceptibles `[S]` and generalized SI count
/// `[SI]` along an integrated trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct ExpectedSeries {
    pub infected: Vec<f64>,
    pub susceptible: Vec<f64>,
    pub si: Vec<f64>,
}

pub fn expected_series(ms: &MasterSystem, traj: &[Distribution]) -> ExpectedSeries {
    let n = ms.num_nodes();
    let mut infected = Vec::with_capacity(traj.len());
    let mut susceptible = Vec::with_capacity(traj.len());
    let mut si = Vec::with_capacity(traj.len());
    for dist in traj {
        let mut i_exp = 0.0;
        let mut si_exp = 0.0;
        for k in 0..=n {
            let off = ms.index.class_offset(k);
            for j in 0..ms.index.class_size(k) {
                let p = dist.probs[off + j];
                i_exp += k as f64 * p;
                si_exp += ms.nsif[off + j] * p;
            }
        }
        infected.push(i_exp);
        susceptible.push(n as f64 - i_exp);
        si.push(si_exp);
    }
    ExpectedSeries {
        infected,
        susceptible,
        si,
    }
}

/// Per-column report of the structural identities of the generator:
/// `sum_i A^k_{i,j} = tau N_SI^f(source)`, `sum_i C^k_{i,j} = gamma (k+1)`
/// (equivalently `S_{k-1} C^{k-1} = gamma k S_k`), and zero column sums of
/// the assembled `P`.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub max_a_colsum_dev: f64,
    pub max_c_colsum_dev: f64,
    pub max_proposition_dev: f64,
    pub max_p_colsum_dev: f64,
}

impl IdentityReport {
    pub fn max_deviation(&self) -> f64 {
        self.max_a_colsum_dev
            .max(self.max_c_colsum_dev)
            .max(self.max_proposition_dev)
            .max(self.max_p_colsum_dev)
    }
}

pub fn column_identities(ms: &MasterSystem) -> IdentityReport {
    let n = ms.num_nodes();
    let p = &ms.params;
    let mut report = IdentityReport {
        max_a_colsum_dev: 0.0,
        max_c_colsum_dev: 0.0,
        max_proposition_dev: 0.0,
        max_p_colsum_dev: 0.0,
    };
    for k in 0..=n {
        for j in 0..ms.index.class_size(k) {
            // Column j of A^{k+1} is sourced at state j of class k.
            if k < n {
                let dev = (ms.a[k + 1].col_sum(j) - p.tau * ms.nsif(k, j)).abs();
                report.max_a_colsum_dev = report.max_a_colsum_dev.max(dev);
            }
            // Column j of C^{k-1} is sourced at state j of class k, which
            // has k infected nodes: column sum gamma*k. This is both the
            // Eq.-level column identity and the proposition
            // S_{k-1} C^{k-1} = gamma k S_k.
            if k > 0 {
                let dev = (ms.c[k - 1].col_sum(j) - p.gamma * k as f64).abs();
                report.max_c_colsum_dev = report.max_c_colsum_dev.max(dev);
                report.max_proposition_dev = report.max_proposition_dev.max(dev);
            }
            let mut total = ms.b[k][j];
            if k < n {
                total += ms.a[k + 1].col_sum(j);
            }
            if k > 0 {
                total += ms.c[k - 1].col_sum(j);
            }
            report.max_p_colsum_dev = report.max_p_colsum_dev.max(total.abs());
        }
    }
    report
}

/// Max residual of the exact expectation identity
/// `d[I]/dt = tau [SI] - gamma [I]`, with the derivative taken by finite
/// differences on a uniform grid: a fourth-order five-point stencil on
/// interior points, second-order central differences next to the ends.
pub fn verify_theorem1(
    ms: &MasterSystem,
    traj: &[Distribution],
    t_grid: &[f64],
) -> Result<f64, MasterError> {
    if t_grid.len() < 3 || traj.len() != t_grid.len() {
        return Err(MasterError::GridTooCoarse);
    }
    let h = t_grid[1] - t_grid[0];
    if t_grid
        .windows(2)
        .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h)
    {
        return Err(MasterError::GridTooCoarse);
    }
    let series = expected_series(ms, traj);
    let p = &ms.params;
    let mut max_residual: f64 = 0.0;
    let i = &series.infected;
    for t in 1..t_grid.len() - 1 {
        let len = t_grid.len();
        let deriv = if t >= 2 && t + 2 < len {
            (i[t - 2] - 8.0 * i[t - 1] + 8.0 * i[t + 1] - i[t + 2]) / (12.0 * h)
        } else if t + 3 < len {
            // Fourth-order stencil offset one point from the left end.
            (-3.0 * i[t - 1] - 10.0 * i[t] + 18.0 * i[t + 1] - 6.0 * i[t + 2] + i[t + 3])
                / (12.0 * h)
        } else if t >= 3 {
            // Mirrored stencil one point from the right end.
            (3.0 * i[t + 1] + 10.0 * i[t] - 18.0 * i[t - 1] + 6.0 * i[t - 2] - i[t - 3])
                / (12.0 * h)
        } else {
            (i[t + 1] - i[t - 1]) / (2.0 * h)
        };
        let rhs = p.tau * series.si[t] - p.gamma * i[t];
        max_residual = max_residual.max((deriv - rhs).abs());
    }
    Ok(max_residual)
}

/// z-scores of simulated ensemble prevalence against the exact expectation.
#[derive(Debug, Clone, Serialize)]
pub struct MasterComparison {
    pub times: Vec<f64>,
    pub sim_mean: Vec<f64>,
    pub exact: Vec<f64>,
    pub z_scores: Vec<f64>,
}

impl MasterComparison {
    pub fn fraction_within(&self, limit: f64) -> f64 {
        let ok = self.z_scores.iter().filter(|z| z.abs() < limit).count();
        ok as f64 / self.z_scores.len() as f64
    }

    pub fn max_abs_z(&self) -> f64 {
        self.z_scores.iter().fold(0.0, |m, z| m.max(z.abs()))
    }
}

/// Cross-validate the stochastic simulation against the master equations:
/// both start from the deterministic initial state of `cfg`.
pub fn ensemble_vs_master(
    h: &Hypergraph,
    cfg: &SimConfig,
) -> Result<MasterComparison, MasterError> {
    cfg.validate(h.num_nodes())?;
    let ms = build_master(h, &cfg.params)?;
    let initial = cfg.initial_state(h.num_nodes());
    let ts = simulate::run(h, cfg)?;
    let traj = integrate_master(&ms, &ms.point_mass(&initial), &ts.times)?;
    let series = expected_series(&ms, &traj);
    let z_scores = ts
        .mean
        .iter()
        .zip(&series.infected)
        .zip(&ts.std_err)
        .map(|((&m, &exact), &se)| {
            let diff = m - exact;
            if se > 0.0 {
                diff / se
            } else if diff.abs() < 1e-9 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(MasterComparison {
        times: ts.times,
        sim_mean: ts.mean,
        exact: series.infected,
        z_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercore::InfectionFunction;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn fig1() -> Hypergraph {
        Hypergraph::new(4, vec![vec![0, 1, 3], vec![1, 2], vec![2, 3]]).unwrap()
    }

    fn params(tau: f64, gamma: f64, c: f64) -> EpidemicParams {
        EpidemicParams::new(tau, gamma, InfectionFunction::new(c))
    }

    fn random_hypergraph<R: Rng>(rng: &mut R, max_nodes: usize) -> Hypergraph {
        let n = rng.gen_range(2..=max_nodes);
        let m = rng.gen_range(1..=4);
        let edges = (0..m)
            .map(|_| {
                let size = rng.gen_range(2..=n.min(4));
                let mut ids: Vec<usize> = (0..n).collect();
                for i in 0..size {
                    let j = rng.gen_range(i..n);
                    ids.swap(i, j);
                }
                ids.truncate(size);
                ids
            })
            .collect();
        Hypergraph::new(n, edges).unwrap()
    }

    #[test]
    fn canonical_ordering_matches_listing() {
        let index = StateIndex::new(4);
        let class1: Vec<String> = (0..4).map(|j| index.state_of(index.word(1, j)).to_string()).collect();
        assert_eq!(class1, ["SSSI", "SSIS", "SISS", "ISSS"]);
        let class2: Vec<String> = (0..6).map(|j| index.state_of(index.word(2, j)).to_string()).collect();
        assert_eq!(class2, ["SSII", "SISI", "SIIS", "ISSI", "ISIS", "IISS"]);
        for k in 0..=4usize {
            assert_eq!(index.class_size(k), [1, 4, 6, 4, 1][k]);
        }
        // Round trip through word_of.
        for w in 0..16u32 {
            assert_eq!(index.word_of(&index.state_of(w)), w);
        }
    }

    #[test]
    fn fig1_a4_and_a3_row3() {
        for (c, f1, f2) in [(1.0, 1.0, 1.0), (2.0, 1.0, 2.0)] {
            let p = params(0.6, 1.0, c);
            let ms = build_master(&fig1(), &p).unwrap();
            let a4 = ms.a_block(4).to_dense();
            let expected = [f2, f1 + f2, 2.0 * f1, f1 + f2].map(|v| 0.6 * v);
            assert_eq!(a4[0], expected.to_vec());
            let a3 = ms.a_block(3).to_dense();
            let row3 = [0.0, f2, 0.0, f2, 0.0, f2].map(|v| 0.6 * v);
            assert_eq!(a3[2], row3.to_vec());
        }
    }

    #[test]
    fn fig1_recovery_blocks() {
        let p = params(1.0, 0.9, 2.0);
        let ms = build_master(&fig1(), &p).unwrap();
        let g = 0.9;
        assert_eq!(ms.c_block(0).to_dense(), vec![vec![g, g, g, g]]);
        let c2 = [
            [g, g, 0.0, 0.0],
            [g, 0.0, g, 0.0],
            [g, 0.0, 0.0, g],
            [0.0, g, g, 0.0],
            [0.0, g, 0.0, g],
            [0.0, 0.0, g, g],
        ];
        assert_eq!(
            ms.c_block(2).to_dense(),
            c2.iter().map(|r| r.to_vec()).collect::<Vec<_>>()
        );
        assert_eq!(ms.c_block(3).to_dense(), vec![vec![g]; 4]);
        assert_eq!(ms.b_diag(0), &[0.0]);
    }

    #[test]
    fn identities_on_fig1() {
        let ms = build_master(&fig1(), &params(0.8, 1.3, 2.0)).unwrap();
        let report = column_identities(&ms);
        assert!(report.max_deviation() < 1e-12, "{report:?}");
        // Column sums of C^2 are 3 gamma.
        for j in 0..4 {
            assert!((ms.c_block(2).col_sum(j) - 3.0 * 1.3).abs() < 1e-12);
        }
        // Column 0 of A^4 sums to tau f(2) = tau * nsif(SIII).
        let s = EpidemicState::with_infected(4, &[1, 2, 3]);
        let nsif = crate::hypercore::n_si_f(&fig1(), &s, &ms.params().f).unwrap();
        assert!((ms.a_block(4).col_sum(0) - 0.8 * nsif).abs() < 1e-12);
        assert_eq!(nsif, 2.0);
    }

    #[test]
    fn tau_zero_kills_infection_blocks() {
        let ms = build_master(&fig1(), &params(0.0, 1.0, 2.0)).unwrap();
        for k in 1..=4 {
            assert_eq!(ms.a_block(k).num_nonzeros(), 0);
        }
    }

    #[test]
    fn structural_nonzeros_are_single_flips_with_infected_cohabitant() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..10 {
            let h = random_hypergraph(&mut rng, 6);
            let n = h.num_nodes();
            let ms = build_master(&h, &params(0.7, 1.0, 2.0)).unwrap();
            for k in 1..=n {
                let dense = ms.a_block(k).to_dense();
                for (i, row) in dense.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        let target = ms.index().word(k, i);
                        let source = ms.index().word(k - 1, j);
                        if v != 0.0 {
                            let diff = target ^ source;
                            assert_eq!(diff.count_ones(), 1);
                            assert_eq!(target & diff, diff, "flip must be S to I");
                            let node = n - 1 - diff.trailing_zeros() as usize;
                            let has_infected_cohabitant = h.memberships(node).iter().any(|&e| {
                                h.edge(e)
                                    .iter()
                                    .any(|&o| o != node && source >> (n - 1 - o) & 1 == 1)
                            });
                            assert!(has_infected_cohabitant);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pure_death_expectation() {
        let h = fig1();
        let gamma = 1.4;
        let ms = build_master(&h, &params(0.0, gamma, 2.0)).unwrap();
        let x0 = ms.point_mass(&EpidemicState::with_infected(4, &[0, 2, 3]));
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 * 0.04).collect();
        let traj = integrate_master(&ms, &x0, &grid).unwrap();
        let series = expected_series(&ms, &traj);
        for (t, i_exp) in grid.iter().zip(&series.infected) {
            let exact = 3.0 * (-gamma * t).exp();
            assert!((i_exp - exact).abs() < 1e-7, "t={t}: {i_exp} vs {exact}");
        }
    }

    #[test]
    fn absorbing_all_susceptible() {
        let ms = build_master(&fig1(), &params(1.0, 1.0, 2.0)).unwrap();
        let x0 = ms.point_mass(&EpidemicState::all_susceptible(4));
        let grid = [0.0, 1.0, 5.0];
        let traj = integrate_master(&ms, &x0, &grid).unwrap();
        for dist in &traj {
            assert!((dist.probs()[0] - 1.0).abs() < 1e-9);
        }
        let series = expected_series(&ms, &traj);
        assert!(series.infected.iter().all(|&v| v.abs() < 1e-9));
        assert!(series.si.iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn mass_conservation_and_complement() {
        let ms = build_master(&fig1(), &params(1.0, 1.0, 2.0)).unwrap();
        let x0 = ms.uniform_over_class(1);
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        let traj = integrate_master(&ms, &x0, &grid).unwrap();
        let series = expected_series(&ms, &traj);
        for (dist, (&i_exp, &s_exp)) in traj
            .iter()
            .zip(series.infected.iter().zip(&series.susceptible))
        {
            assert!((dist.sum() - 1.0).abs() < 1e-7);
            assert!((i_exp + s_exp - 4.0).abs() < 1e-9);
            assert!(dist.probs().iter().all(|&p| p > -1e-9));
        }
        // Uniform over class 1 starts at [I] = 1 exactly.
        assert!((series.infected[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theorem1_residual_small() {
        let ms = build_master(&fig1(), &params(1.0, 1.0, 2.0)).unwrap();
        let x0 = ms.uniform_over_class(2);
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
        let traj = integrate_master(&ms, &x0, &grid).unwrap();
        let residual = verify_theorem1(&ms, &traj, &grid).unwrap();
        assert!(residual < 1e-5, "residual {residual}");
    }

    #[test]
    fn theorem1_grid_errors() {
        let ms = build_master(&fig1(), &params(1.0, 1.0, 2.0)).unwrap();
        let x0 = ms.point_mass(&EpidemicState::all_susceptible(4));
        let grid = [0.0, 0.5];
        let traj = integrate_master(&ms, &x0, &grid).unwrap();
        assert!(matches!(
            verify_theorem1(&ms, &traj, &grid),
            Err(MasterError::GridTooCoarse)
        ));
    }

    #[test]
    fn cap_and_empty_errors() {
        let h = fig1();
        assert!(matches!(
            build_master_capped(&h, &params(1.0, 1.0, 2.0), 3),
            Err(MasterError::TooLarge { .. })
        ));
        let lonely = Hypergraph::new(3, vec![]).unwrap();
        assert!(matches!(
            build_master(&lonely, &params(1.0, 1.0, 2.0)),
            Err(MasterError::NoEdges)
        ));
    }

    #[test]
    fn ensemble_vs_master_pure_death() {
        let h = fig1();
        let mut cfg = SimConfig::new(params(0.0, 1.0, 2.0), 3.0, 15);
        cfg.dt = 0.01;
        cfg.runs = 2000;
        cfg.sampling_interval = 0.25;
        cfg.initial = crate::simulate::InitialCondition::Nodes(vec![0, 1, 2]);
        let cmp = ensemble_vs_master(&h, &cfg).unwrap();
        assert!(cmp.fraction_within(4.0) >= 0.95, "max |z| = {}", cmp.max_abs_z());
    }

    #[test]
    fn dump_blocks_round_trips_determinism() {
        let ms = build_master(&fig1(), &params(0.5, 1.0, 2.0)).unwrap();
        let a = ms.dump_blocks();
        let ms2 = build_master(&fig1(), &params(0.5, 1.0, 2.0)).unwrap();
        assert_eq!(a, ms2.dump_blocks());
        assert!(a.starts_with("# master blocks N=4"));
    }
}
