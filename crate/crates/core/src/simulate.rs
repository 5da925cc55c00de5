//! Discrete-time individual-based SIS simulation with ensemble averaging.
//!
//! Each step is synchronous: one uniform per node is drawn in node order,
//! all transition tests are evaluated against the state at the start of the
//! step. A susceptible node with infection rate `r` flips with probability
//! `1 - exp(-r dt)` (tested against the upper tail of its uniform), an
//! infected node recovers with probability `1 - exp(-gamma dt)` (lower
//! tail). Per-run RNG streams are derived from the master
//! seed so ensembles are reproducible and path-wise couplings (same uniforms
//! under different parameters) are well defined.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypercore::{
    edge_infected_counts, infection_rate_from_counts, EpidemicParams, EpidemicState, HyperError,
    Hypergraph, WeightedGraph,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Hyper(#[from] HyperError),
}

/// How the shared initial state of an ensemble is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    /// Infect `round(fraction * N)` nodes chosen uniformly from a dedicated
    /// RNG stream of the master seed.
    Fraction(f64),
    Nodes(Vec<usize>),
    State(EpidemicState),
}

/// Per-node infection rate on a weighted graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphMode {
    /// `tau * W_i` with `W_i` the weighted infected-neighbour count.
    Linear,
    /// `tau * f(W_i)`: the whole neighbourhood shares one discount.
    Discounted,
}

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_INITIAL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub params: EpidemicParams,
    pub initial: InitialCondition,
    pub runs: usize,
    pub rng_seed: u64,
    /// Must be a multiple of `dt`; prevalence is recorded at these times.
    pub sampling_interval: f64,
    /// Keep every run's sampled trajectory in the result.
    pub record_runs: bool,
}

impl SimConfig {
    pub fn new(params: EpidemicParams, t_max: f64, rng_seed: u64) -> Self {
        Self {
            dt: DEFAULT_DT,
            t_max,
            params,
            initial: InitialCondition::Fraction(DEFAULT_INITIAL_FRACTION),
            runs: DEFAULT_RUNS,
            rng_seed,
            sampling_interval: 10.0 * DEFAULT_DT,
            record_runs: false,
        }
    }

    pub fn validate(&self, num_nodes: usize) -> Result<(), SimError> {
        if !(self.dt > 0.0) {
            return Err(SimError::Invalid("dt must be positive".into()));
        }
        if self.t_max < self.dt {
            return Err(SimError::Invalid("t_max must be at least dt".into()));
        }
        if self.runs == 0 {
            return Err(SimError::Invalid("ensemble size must be >= 1".into()));
        }
        if self.sampling_interval < self.dt {
            return Err(SimError::Invalid(
                "sampling_interval must be at least dt".into(),
            ));
        }
        let stride = self.sampling_interval / self.dt;
        if (stride - stride.round()).abs() > 1e-9 * stride.max(1.0) {
            return Err(SimError::Invalid(
                "sampling_interval must be a multiple of dt".into(),
            ));
        }
        match &self.initial {
            InitialCondition::Fraction(f) => {
                if !(0.0..=1.0).contains(f) {
                    return Err(SimError::Invalid(
                        "initial fraction must be in [0, 1]".into(),
                    ));
                }
            }
            InitialCondition::Nodes(nodes) => {
                if nodes.iter().any(|&i| i >= num_nodes) {
                    return Err(SimError::Invalid("initial node id out of range".into()));
                }
            }
            InitialCondition::State(s) => {
                if s.len() != num_nodes {
                    return Err(SimError::Invalid(format!(
                        "initial state has {} nodes, hypergraph has {num_nodes}",
                        s.len()
                    )));
                }
            }
        }
        Ok(())
    }

    fn num_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    fn sample_stride(&self) -> usize {
        (self.sampling_interval / self.dt).round() as usize
    }

    /// The times at which an ensemble run records prevalence.
    pub fn sample_times(&self) -> Vec<f64> {
        let stride = self.sample_stride();
        (0..=self.num_steps() / stride)
            .map(|k| k as f64 * stride as f64 * self.dt)
            .collect()
    }

    /// The ensemble's shared initial state, deterministic in the master seed.
    pub fn initial_state(&self, num_nodes: usize) -> EpidemicState {
        match &self.initial {
            InitialCondition::State(s) => s.clone(),
            InitialCondition::Nodes(nodes) => EpidemicState::with_infected(num_nodes, nodes),
            InitialCondition::Fraction(f) => {
                let count = (f * num_nodes as f64).round() as usize;
                let mut rng = stream_rng(self.rng_seed, 0);
                let mut ids: Vec<usize> = (0..num_nodes).collect();
                // Partial Fisher-Yates: the first `count` entries are a
                // uniform sample without replacement.
                for i in 0..count.min(num_nodes) {
                    let j = rng.gen_range(i..num_nodes);
                    ids.swap(i, j);
                }
                EpidemicState::with_infected(num_nodes, &ids[..count])
            }
        }
    }
}

/// Run index 0 is reserved for the initial condition; run `r` uses stream
/// `r + 1`.
fn stream_rng(master_seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub engine: String,
    pub config: serde_json::Value,
}

/// Sampled prevalence trajectory with ensemble statistics.
#[derive(Debug, Clone, Serialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Run-major matrix of per-run prevalence samples, if recorded.
    pub per_run: Option<Vec<Vec<f64>>>,
    pub metadata: Metadata,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Engine-agnostic CSV: `t,value[,stderr]`.
    pub fn to_csv(&self, with_stderr: bool) -> String {
        let mut out = String::from(if with_stderr { "t,value,stderr\n" } else { "t,value\n" });
        for i in 0..self.times.len() {
            if with_stderr {
                out.push_str(&format!(
                    "{},{},{}\n",
                    self.times[i], self.mean[i], self.std_err[i]
                ));
            } else {
                out.push_str(&format!("{},{}\n", self.times[i], self.mean[i]));
            }
        }
        out
    }

    /// Simulation CSV: `t,mean_I,stderr_I[,run_k...]`.
    pub fn to_sim_csv(&self) -> String {
        let mut out = String::from("t,mean_I,stderr_I");
        if let Some(runs) = &self.per_run {
            for k in 0..runs.len() {
                out.push_str(&format!(",run_{k}"));
            }
        }
        out.push('\n');
        for i in 0..self.times.len() {
            out.push_str(&format!(
                "{},{},{}",
                self.times[i], self.mean[i], self.std_err[i]
            ));
            if let Some(runs) = &self.per_run {
                for run in runs {
                    out.push_str(&format!(",{}", run[i]));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// One synchronous step given the per-node uniforms for this step.
pub fn step_with_uniforms(
    h: &Hypergraph,
    s: &EpidemicState,
    p: &EpidemicParams,
    dt: f64,
    uniforms: &[f64],
) -> Result<EpidemicState, SimError> {
    if uniforms.len() != h.num_nodes() {
        return Err(SimError::Invalid(format!(
            "expected {} uniforms, got {}",
            h.num_nodes(),
            uniforms.len()
        )));
    }
    let counts = edge_infected_counts(h, s)?;
    let recovery_prob = 1.0 - (-p.gamma * dt).exp();
    let mut next = s.clone();
    for i in 0..h.num_nodes() {
        if s.is_infected(i) {
            if uniforms[i] < recovery_prob {
                next.set(i, false);
            }
        } else {
            let rate = infection_rate_from_counts(h, &counts, i, p);
            // Infection uses the upper tail of the uniform (recovery the
            // lower) so that coupled runs with ordered rates stay ordered.
            if rate > 0.0 && uniforms[i] > (-rate * dt).exp() {
                next.set(i, true);
            }
        }
    }
    Ok(next)
}

/// One synchronous step, drawing one uniform per node in node order.
pub fn step<R: Rng>(
    h: &Hypergraph,
    s: &EpidemicState,
    p: &EpidemicParams,
    dt: f64,
    rng: &mut R,
) -> Result<EpidemicState, SimError> {
    let uniforms: Vec<f64> = (0..h.num_nodes()).map(|_| rng.gen::<f64>()).collect();
    step_with_uniforms(h, s, p, dt, &uniforms)
}

/// Largest per-step event probability possible under `cfg`, used to warn
/// about too-coarse time steps.
fn max_event_probability(h: &Hypergraph, cfg: &SimConfig) -> f64 {
    let p = &cfg.params;
    let max_rate = (0..h.num_nodes())
        .map(|i| {
            let pressure: f64 = h
                .memberships(i)
                .iter()
                .map(|&j| p.f.eval((h.edge(j).len() - 1) as f64))
                .sum();
            p.tau * pressure
        })
        .fold(p.gamma, f64::max);
    1.0 - (-max_rate * cfg.dt).exp()
}

/// Ensemble simulation on a hypergraph: `runs` independent trajectories from
/// the shared initial state, sampled every `sampling_interval`.
pub fn run(h: &Hypergraph, cfg: &SimConfig) -> Result<TimeSeries, SimError> {
    cfg.validate(h.num_nodes())?;
    if max_event_probability(h, cfg) > 0.1 {
        eprintln!(
            "warning: per-step event probability exceeds 0.1; consider a smaller dt than {}",
            cfg.dt
        );
    }
    let initial = cfg.initial_state(h.num_nodes());
    let per_node_rate = |_: &EpidemicState, counts: &Vec<usize>, i: usize| {
        infection_rate_from_counts(h, counts, i, &cfg.params)
    };
    let count_edges = |s: &EpidemicState| edge_infected_counts(h, s).expect("state paired");
    ensemble(cfg, h.num_nodes(), initial, count_edges, per_node_rate, "sim")
}

/// Ensemble simulation on a weighted graph with linear or discounted
/// per-node rates; the comparator engine for the clique expansion.
pub fn graph_run(g: &WeightedGraph, cfg: &SimConfig, mode: GraphMode) -> Result<TimeSeries, SimError> {
    cfg.validate(g.num_nodes())?;
    let initial = cfg.initial_state(g.num_nodes());
    let count_edges = |_: &EpidemicState| Vec::new();
    let per_node_rate = |s: &EpidemicState, _: &Vec<usize>, i: usize| {
        graph_node_rate(g, s, i, &cfg.params, mode)
    };
    let engine = match mode {
        GraphMode::Linear => "graphsim_linear",
        GraphMode::Discounted => "graphsim_discounted",
    };
    ensemble(cfg, g.num_nodes(), initial, count_edges, per_node_rate, engine)
}

/// Infection rate of susceptible node `i` on a weighted graph.
pub fn graph_node_rate(
    g: &WeightedGraph,
    s: &EpidemicState,
    i: usize,
    p: &EpidemicParams,
    mode: GraphMode,
) -> f64 {
    let w = g.weighted_infected_count(s, i) as f64;
    match mode {
        GraphMode::Linear => p.tau * w,
        GraphMode::Discounted => p.tau * p.f.eval(w),
    }
}

fn ensemble<C, F>(
    cfg: &SimConfig,
    num_nodes: usize,
    initial: EpidemicState,
    count_edges: C,
    per_node_rate: F,
    engine: &str,
) -> Result<TimeSeries, SimError>
where
    C: Fn(&EpidemicState) -> Vec<usize> + Sync,
    F: Fn(&EpidemicState, &Vec<usize>, usize) -> f64 + Sync,
{
    let num_steps = cfg.num_steps();
    let stride = cfg.sample_stride();
    let recovery_prob = 1.0 - (-cfg.params.gamma * cfg.dt).exp();

    let trajectories: Vec<Vec<f64>> = (0..cfg.runs)
        .into_par_iter()
        .map(|run_idx| {
            let mut rng = stream_rng(cfg.rng_seed, run_idx as u64 + 1);
            let mut state = initial.clone();
            let mut next = state.clone();
            let mut samples = Vec::with_capacity(num_steps / stride + 1);
            samples.push(state.infected_count() as f64);
            for step_idx in 1..=num_steps {
                let counts = count_edges(&state);
                next.clone_from(&state);
                for i in 0..num_nodes {
                    let u: f64 = rng.gen();
                    if state.is_infected(i) {
                        if u < recovery_prob {
                            next.set(i, false);
                        }
                    } else {
                        let rate = per_node_rate(&state, &counts, i);
                        if rate > 0.0 && u > (-rate * cfg.dt).exp() {
                            next.set(i, true);
                        }
                    }
                }
                std::mem::swap(&mut state, &mut next);
                if step_idx % stride == 0 {
                    samples.push(state.infected_count() as f64);
                }
            }
            samples
        })
        .collect();

    let num_samples = trajectories[0].len();
    let times: Vec<f64> = (0..num_samples)
        .map(|k| k as f64 * stride as f64 * cfg.dt)
        .collect();
    let r = cfg.runs as f64;
    let mut mean = vec![0.0; num_samples];
    let mut std_err = vec![0.0; num_samples];
    for k in 0..num_samples {
        let m: f64 = trajectories.iter().map(|t| t[k]).sum::<f64>() / r;
        mean[k] = m;
        if cfg.runs > 1 {
            let var: f64 =
                trajectories.iter().map(|t| (t[k] - m).powi(2)).sum::<f64>() / (r - 1.0);
            std_err[k] = (var / r).sqrt();
        }
    }
    Ok(TimeSeries {
        times,
        mean,
        std_err,
        per_run: cfg.record_runs.then_some(trajectories),
        metadata: Metadata {
            engine: engine.to_string(),
            config: serde_json::to_value(cfg).expect("config serializes"),
        },
    })
}

/// Trailing-window time average of the ensemble mean, with the standard
/// error propagated assuming independent samples.
pub fn steady_state_estimate(ts: &TimeSeries, window: f64) -> Result<(f64, f64), SimError> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(SimError::Invalid("window must be in (0, 1]".into()));
    }
    let n = ts.len();
    let k = ((window * n as f64).ceil() as usize).clamp(1, n);
    if k == 0 || n == 0 {
        return Err(SimError::Invalid("empty series".into()));
    }
    let tail_mean = &ts.mean[n - k..];
    let tail_err = &ts.std_err[n - k..];
    let mean = tail_mean.iter().sum::<f64>() / k as f64;
    let err = tail_err.iter().map(|e| e * e).sum::<f64>().sqrt() / k as f64;
    Ok((mean, err))
}
