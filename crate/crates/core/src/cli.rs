//! Experiment orchestration: generate or load a hypergraph, run a sweep of
//! parameter variants through the selected engines, and write one CSV per
//! (variant, engine) plus a manifest that makes every output reproducible.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generators::{
    self, BaCliquesSpec, BiUniformSpec, ConfigSpec, GeneratorError,
};
use crate::hypercore::{
    clique_expand, EpidemicParams, Hypergraph, HyperError, InfectionFunction,
};
use crate::masterq::{self, MasterError};
use crate::meanfield::{MeanFieldError, MeanFieldModel, MeanFieldVariant};
use crate::simulate::{
    self, GraphMode, InitialCondition, SimConfig, SimError, TimeSeries,
};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid experiment spec: {0}")]
    Invalid(String),
    #[error("series do not overlap in time")]
    DisjointSeries,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Hyper(#[from] HyperError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Master(#[from] MasterError),
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
}

/// Hypergraph construction recipe, deterministic under the experiment seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    BiUniform {
        n: usize,
        household_size: usize,
        workplace_size: usize,
    },
    BaCliques {
        n: usize,
        m: usize,
    },
    Regular {
        n: usize,
        degree: usize,
        edge_size: usize,
    },
    Config {
        edge_sizes: Vec<usize>,
        node_degrees: Vec<usize>,
    },
}

impl GeneratorSpec {
    pub fn generate(&self, seed: u64) -> Result<Hypergraph, GeneratorError> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        match self {
            GeneratorSpec::BiUniform {
                n,
                household_size,
                workplace_size,
            } => generators::gen_bi_uniform(
                &BiUniformSpec {
                    n: *n,
                    household_size: *household_size,
                    workplace_size: *workplace_size,
                },
                &mut rng,
            ),
            GeneratorSpec::BaCliques { n, m } => {
                let g = generators::gen_ba_graph(&BaCliquesSpec { n: *n, m: *m }, &mut rng)?;
                generators::cliques_to_hypergraph(&g)
            }
            GeneratorSpec::Regular {
                n,
                degree,
                edge_size,
            } => {
                let spec = ConfigSpec::regular(*n, *degree, *edge_size)?;
                generators::gen_configuration(&spec, &mut rng)
            }
            GeneratorSpec::Config {
                edge_sizes,
                node_degrees,
            } => generators::gen_configuration(
                &ConfigSpec {
                    edge_sizes: edge_sizes.clone(),
                    node_degrees: node_degrees.clone(),
                },
                &mut rng,
            ),
        }
    }

    /// Mean-field closure matching this generator, when one exists.
    pub fn mean_field_variant(&self) -> Option<MeanFieldVariant> {
        match self {
            GeneratorSpec::BiUniform {
                n,
                household_size,
                workplace_size,
            } => Some(MeanFieldVariant::BiUniform {
                n: *n,
                household_size: *household_size,
                workplace_size: *workplace_size,
            }),
            GeneratorSpec::Regular {
                n,
                degree,
                edge_size,
            } => Some(MeanFieldVariant::Regular {
                n: *n,
                degree: *degree,
                edge_size: *edge_size,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypergraphSource {
    Generator(GeneratorSpec),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Sim,
    GraphSim,
    GraphSimDiscounted,
    MeanField,
    Master,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Sim => "sim",
            Engine::GraphSim => "graphsim",
            Engine::GraphSimDiscounted => "graphsim_discounted",
            Engine::MeanField => "meanfield",
            Engine::Master => "master",
        }
    }
}

/// One parameter combination of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub label: String,
    pub tau: f64,
    pub gamma: f64,
    pub c: f64,
}

impl Variant {
    pub fn params(&self) -> EpidemicParams {
        EpidemicParams::new(self.tau, self.gamma, InfectionFunction::new(self.c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub dt: f64,
    pub t_max: f64,
    pub runs: usize,
    pub initial_fraction: f64,
    pub sampling_interval: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: simulate::DEFAULT_DT,
            t_max: 15.0,
            runs: simulate::DEFAULT_RUNS,
            initial_fraction: simulate::DEFAULT_INITIAL_FRACTION,
            sampling_interval: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub source: HypergraphSource,
    pub variants: Vec<Variant>,
    pub engines: Vec<Engine>,
    #[serde(default)]
    pub sim: SimSettings,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.variants.is_empty() {
            return Err(CliError::Invalid("no variants".into()));
        }
        if self.engines.is_empty() {
            return Err(CliError::Invalid("no engines".into()));
        }
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|ch| ch.is_ascii_alphanumeric() || ch == '-' || ch == '_')
        {
            return Err(CliError::Invalid(
                "name must be a nonempty [A-Za-z0-9_-]+ token".into(),
            ));
        }
        Ok(())
    }

    fn sim_config(&self, variant: &Variant) -> SimConfig {
        SimConfig {
            dt: self.sim.dt,
            t_max: self.sim.t_max,
            params: variant.params(),
            initial: InitialCondition::Fraction(self.sim.initial_fraction),
            runs: self.sim.runs,
            rng_seed: self.seed,
            sampling_interval: self.sim.sampling_interval,
            record_runs: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub variant: String,
    pub engine: &'static str,
    pub file: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    pub spec: ExperimentSpec,
    pub num_nodes: usize,
    pub num_hyperedges: usize,
    pub outputs: Vec<ManifestEntry>,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub manifest_path: PathBuf,
    pub csv_paths: Vec<PathBuf>,
}

/// Run every (variant, engine) combination and write the CSVs plus
/// `manifest.json` under `out_dir`.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<ExperimentOutput, CliError> {
    spec.validate()?;
    let started = Instant::now();
    let h = match &spec.source {
        HypergraphSource::Generator(g) => g.generate(spec.seed)?,
        HypergraphSource::File(path) => Hypergraph::parse(&fs::read_to_string(path)?)?,
    };
    if spec.engines.contains(&Engine::Master) && h.num_nodes() > masterq::DEFAULT_N_MAX {
        return Err(CliError::Invalid(format!(
            "master engine needs N <= {}, hypergraph has {}",
            masterq::DEFAULT_N_MAX,
            h.num_nodes()
        )));
    }
    fs::create_dir_all(out_dir)?;

    let mut outputs = Vec::new();
    let mut csv_paths = Vec::new();
    for variant in &spec.variants {
        let cfg = spec.sim_config(variant);
        for engine in &spec.engines {
            let csv = render_engine(&h, spec, variant, &cfg, *engine)?;
            let file = format!("{}__{}__{}.csv", spec.name, variant.label, engine.name());
            let path = out_dir.join(&file);
            fs::write(&path, csv)?;
            outputs.push(ManifestEntry {
                variant: variant.label.clone(),
                engine: engine.name(),
                file,
            });
            csv_paths.push(path);
        }
    }
    let manifest = Manifest {
        name: spec.name.clone(),
        seed: spec.seed,
        spec: spec.clone(),
        num_nodes: h.num_nodes(),
        num_hyperedges: h.num_edges(),
        outputs,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    let manifest_path = out_dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(ExperimentOutput {
        manifest_path,
        csv_paths,
    })
}

fn render_engine(
    h: &Hypergraph,
    spec: &ExperimentSpec,
    variant: &Variant,
    cfg: &SimConfig,
    engine: Engine,
) -> Result<String, CliError> {
    match engine {
        Engine::Sim => Ok(simulate::run(h, cfg)?.to_csv(true)),
        Engine::GraphSim => {
            Ok(simulate::graph_run(&clique_expand(h), cfg, GraphMode::Linear)?.to_csv(true))
        }
        Engine::GraphSimDiscounted => {
            Ok(simulate::graph_run(&clique_expand(h), cfg, GraphMode::Discounted)?.to_csv(true))
        }
        Engine::MeanField => {
            let mf_variant = match &spec.source {
                HypergraphSource::Generator(g) => g.mean_field_variant(),
                HypergraphSource::File(_) => None,
            }
            .ok_or_else(|| {
                CliError::Invalid(
                    "meanfield engine needs a bi-uniform or regular generator source".into(),
                )
            })?;
            let model = MeanFieldModel::new(mf_variant, variant.params())?;
            let i0 = spec.sim.initial_fraction * h.num_nodes() as f64;
            let ts = model.integrate(i0, &cfg.sample_times())?;
            Ok(ts.to_csv(false))
        }
        Engine::Master => {
            let ms = masterq::build_master(h, &variant.params())?;
            let initial = cfg.initial_state(h.num_nodes());
            let times = cfg.sample_times();
            let traj = masterq::integrate_master(&ms, &ms.point_mass(&initial), &times)?;
            let series = masterq::expected_series(&ms, &traj);
            let mut out = String::from("t,I_expected,S_expected,SI_expected\n");
            for (k, t) in times.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    t, series.infected[k], series.susceptible[k], series.si[k]
                ));
            }
            Ok(out)
        }
    }
}

/// Pointwise comparison of two series; `b` is resampled onto `a`'s grid by
/// linear interpolation over the overlapping time range.
#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub times: Vec<f64>,
    pub diffs: Vec<f64>,
    pub max_abs_diff: f64,
    /// Difference of trailing-window (25%) means.
    pub steady_state_delta: f64,
    /// z-scores at points where either series carries a standard error.
    pub z_scores: Vec<f64>,
}

pub fn compare(a: &TimeSeries, b: &TimeSeries) -> Result<CompareReport, CliError> {
    let start = a.times.first().copied().unwrap_or(0.0).max(
        b.times.first().copied().unwrap_or(0.0),
    );
    let end = a
        .times
        .last()
        .copied()
        .unwrap_or(0.0)
        .min(b.times.last().copied().unwrap_or(0.0));
    if a.is_empty() || b.is_empty() || end < start {
        return Err(CliError::DisjointSeries);
    }
    let mut times = Vec::new();
    let mut diffs = Vec::new();
    let mut z_scores = Vec::new();
    let mut a_window = Vec::new();
    let mut b_window = Vec::new();
    for (idx, &t) in a.times.iter().enumerate() {
        if t < start || t > end {
            continue;
        }
        let bv = interpolate(&b.times, &b.mean, t);
        let be = interpolate(&b.times, &b.std_err, t);
        let diff = a.mean[idx] - bv;
        times.push(t);
        diffs.push(diff);
        a_window.push(a.mean[idx]);
        b_window.push(bv);
        let err = (a.std_err[idx].powi(2) + be.powi(2)).sqrt();
        if err > 0.0 {
            z_scores.push(diff / err);
        }
    }
    if times.is_empty() {
        return Err(CliError::DisjointSeries);
    }
    let max_abs_diff = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let k = (times.len() / 4).max(1);
    let tail_mean = |v: &[f64]| v[v.len() - k..].iter().sum::<f64>() / k as f64;
    let steady_state_delta = tail_mean(&a_window) - tail_mean(&b_window);
    Ok(CompareReport {
        times,
        diffs,
        max_abs_diff,
        steady_state_delta,
        z_scores,
    })
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => ys[i],
        Err(0) => ys[0],
        Err(i) if i >= xs.len() => ys[xs.len() - 1],
        Err(i) => {
            let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            ys[i - 1] * (1.0 - w) + ys[i] * w
        }
    }
}

/// Named experiment presets for the standard parameter studies.
pub fn preset(name: &str) -> Option<ExperimentSpec> {
    let sweep = |cs: &[f64], tau: f64| -> Vec<Variant> {
        cs.iter()
            .map(|&c| Variant {
                label: format!("c{c}"),
                tau,
                gamma: 1.0,
                c,
            })
            .collect()
    };
    match name {
        // Households H=5, workplaces W=10: c sweep vs the weighted graph.
        "fig_households_c" => Some(ExperimentSpec {
            name: name.into(),
            source: HypergraphSource::Generator(GeneratorSpec::BiUniform {
                n: 500,
                household_size: 5,
                workplace_size: 10,
            }),
            variants: sweep(&[2.0, 5.0, 10.0], 0.18),
            engines: vec![Engine::Sim, Engine::GraphSim],
            sim: SimSettings::default(),
            seed: 1,
        }),
        // Cliques of a preferential-attachment graph, m=4.
        "fig_ba_cliques_c" => Some(ExperimentSpec {
            name: name.into(),
            source: HypergraphSource::Generator(GeneratorSpec::BaCliques { n: 500, m: 4 }),
            variants: sweep(&[3.0, 5.0, 8.0], 0.02),
            engines: vec![Engine::Sim, Engine::GraphSim],
            sim: SimSettings::default(),
            seed: 1,
        }),
        // Regular random hypergraph d=8, e=10.
        "fig_regular_c" => Some(ExperimentSpec {
            name: name.into(),
            source: HypergraphSource::Generator(GeneratorSpec::Regular {
                n: 500,
                degree: 8,
                edge_size: 10,
            }),
            variants: sweep(&[5.0, 10.0], 0.05),
            engines: vec![Engine::Sim, Engine::GraphSim],
            sim: SimSettings::default(),
            seed: 1,
        }),
        // Regular d=16, e=20 against the mean-field closure.
        "fig_regular_meanfield" => Some(ExperimentSpec {
            name: name.into(),
            source: HypergraphSource::Generator(GeneratorSpec::Regular {
                n: 500,
                degree: 16,
                edge_size: 20,
            }),
            variants: sweep(&[10.0, 15.0], 0.03),
            engines: vec![Engine::Sim, Engine::MeanField],
            sim: SimSettings::default(),
            seed: 1,
        }),
        _ => None,
    }
}

pub fn preset_names() -> &'static [&'static str] {
    &[
        "fig_households_c",
        "fig_ba_cliques_c",
        "fig_regular_c",
        "fig_regular_meanfield",
    ]
}
