//! Command-line front end: hypergraph generation, stochastic simulation,
//! master-equation integration, mean-field solving, and experiment sweeps.
//!
//! Exit codes: 0 on success, 2 on validation errors (bad flags, bad config,
//! out-of-range parameters), 3 on runtime failures (I/O, numerics).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hypersis::cli::{self, CliError, ExperimentSpec, GeneratorSpec};
use hypersis::generators::GeneratorError;
use hypersis::hypercore::{clique_expand, EpidemicParams, Hypergraph, InfectionFunction};
use hypersis::masterq::{self, MasterError};
use hypersis::meanfield::{MeanFieldError, MeanFieldModel, MeanFieldVariant, Stability};
use hypersis::simulate::{self, GraphMode, InitialCondition, SimConfig, SimError};

#[derive(Parser)]
#[command(name = "hypersis", version, about = "SIS epidemics on hypergraphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a hypergraph and print it in the text format.
    Generate(GenerateArgs),
    /// Ensemble simulation on a hypergraph.
    Simulate(SimulateArgs),
    /// Ensemble simulation on the weighted clique expansion.
    Graphsim(GraphsimArgs),
    /// Integrate the exact master equations (small N only).
    Master(MasterArgs),
    /// Solve a mean-field closure ODE.
    Meanfield(MeanfieldArgs),
    /// Run a preset or config-file experiment sweep.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    BiUniform,
    BaCliques,
    Regular,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Number of nodes.
    #[arg(long, short = 'n')]
    nodes: usize,
    /// Household size (bi-uniform).
    #[arg(long, default_value_t = 5)]
    household: usize,
    /// Workplace size (bi-uniform).
    #[arg(long, default_value_t = 10)]
    workplace: usize,
    /// Edges added per new node (ba-cliques).
    #[arg(long, default_value_t = 4)]
    m: usize,
    /// Node degree (regular).
    #[arg(long, default_value_t = 8)]
    degree: usize,
    /// Hyperedge size (regular).
    #[arg(long, default_value_t = 10)]
    edge_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DynamicsArgs {
    /// Hypergraph file in the text format.
    #[arg(long)]
    hypergraph: PathBuf,
    #[arg(long)]
    tau: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Infection-pressure threshold c.
    #[arg(long, short = 'c')]
    threshold: f64,
    #[arg(long, default_value_t = simulate::DEFAULT_DT)]
    dt: f64,
    #[arg(long, default_value_t = 15.0)]
    t_max: f64,
    #[arg(long, default_value_t = 0.1)]
    sampling_interval: f64,
    /// Fraction of nodes infected at t = 0.
    #[arg(long, default_value_t = simulate::DEFAULT_INITIAL_FRACTION)]
    initial_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl DynamicsArgs {
    fn params(&self) -> EpidemicParams {
        EpidemicParams::new(self.tau, self.gamma, InfectionFunction::new(self.threshold))
    }

    fn sim_config(&self, runs: usize, record_runs: bool) -> SimConfig {
        SimConfig {
            dt: self.dt,
            t_max: self.t_max,
            params: self.params(),
            initial: InitialCondition::Fraction(self.initial_fraction),
            runs,
            rng_seed: self.seed,
            sampling_interval: self.sampling_interval,
            record_runs,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    dynamics: DynamicsArgs,
    #[arg(long, default_value_t = simulate::DEFAULT_RUNS)]
    runs: usize,
    /// Append one column per run to the CSV.
    #[arg(long)]
    record_runs: bool,
}

#[derive(Args)]
struct GraphsimArgs {
    #[command(flatten)]
    sim: SimulateArgs,
    /// Apply f to the weighted infected-neighbour count instead of scaling it
    /// linearly.
    #[arg(long)]
    discounted: bool,
}

#[derive(Args)]
struct MasterArgs {
    #[command(flatten)]
    dynamics: DynamicsArgs,
    /// Write the generator blocks in sparse-triplet text to this file.
    #[arg(long)]
    dump_blocks: Option<PathBuf>,
}

#[derive(Args)]
struct MeanfieldArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long, short = 'n')]
    nodes: usize,
    #[arg(long, default_value_t = 5)]
    household: usize,
    #[arg(long, default_value_t = 10)]
    workplace: usize,
    #[arg(long, default_value_t = 8)]
    degree: usize,
    #[arg(long, default_value_t = 10)]
    edge_size: usize,
    #[arg(long)]
    tau: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, short = 'c')]
    threshold: f64,
    #[arg(long, default_value_t = 15.0)]
    t_max: f64,
    #[arg(long, default_value_t = 0.1)]
    sampling_interval: f64,
    #[arg(long, default_value_t = simulate::DEFAULT_INITIAL_FRACTION)]
    initial_fraction: f64,
    /// Print fixed points with stability instead of a trajectory.
    #[arg(long)]
    fixed_points: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Named preset; see `--list-presets`.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// JSON experiment spec file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Override the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    list_presets: bool,
}

/// Distinguishes bad input (exit 2) from failures while running (exit 3).
enum AppError {
    Validation(String),
    Runtime(String),
}

impl From<CliError> for AppError {
    fn from(e: CliError) -> Self {
        match &e {
            CliError::Invalid(_)
            | CliError::Hyper(_)
            | CliError::Generator(_)
            | CliError::Sim(SimError::Invalid(_))
            | CliError::MeanField(_)
            | CliError::Master(MasterError::TooLarge { .. }) => AppError::Validation(e.to_string()),
            _ => AppError::Runtime(e.to_string()),
        }
    }
}

impl From<SimError> for AppError {
    fn from(e: SimError) -> Self {
        AppError::from(CliError::from(e))
    }
}

impl From<MasterError> for AppError {
    fn from(e: MasterError) -> Self {
        AppError::from(CliError::from(e))
    }
}

impl From<MeanFieldError> for AppError {
    fn from(e: MeanFieldError) -> Self {
        AppError::from(CliError::from(e))
    }
}

impl From<GeneratorError> for AppError {
    fn from(e: GeneratorError) -> Self {
        AppError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), AppError> {
    match cmd {
        Command::Generate(args) => generate(args),
        Command::Simulate(args) => simulate_cmd(args),
        Command::Graphsim(args) => graphsim(args),
        Command::Master(args) => master(args),
        Command::Meanfield(args) => meanfield(args),
        Command::Experiment(args) => experiment(args),
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), AppError> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_hypergraph(path: &PathBuf) -> Result<Hypergraph, AppError> {
    let text = fs::read_to_string(path)?;
    Hypergraph::parse(&text).map_err(|e| AppError::Validation(e.to_string()))
}

fn generator_spec(
    model: Model,
    nodes: usize,
    household: usize,
    workplace: usize,
    m: usize,
    degree: usize,
    edge_size: usize,
) -> GeneratorSpec {
    match model {
        Model::BiUniform => GeneratorSpec::BiUniform {
            n: nodes,
            household_size: household,
            workplace_size: workplace,
        },
        Model::BaCliques => GeneratorSpec::BaCliques { n: nodes, m },
        Model::Regular => GeneratorSpec::Regular {
            n: nodes,
            degree,
            edge_size,
        },
    }
}

fn generate(args: GenerateArgs) -> Result<(), AppError> {
    let spec = generator_spec(
        args.model,
        args.nodes,
        args.household,
        args.workplace,
        args.m,
        args.degree,
        args.edge_size,
    );
    let h = spec.generate(args.seed)?;
    emit(args.out.as_ref(), &h.to_text())
}

fn simulate_cmd(args: SimulateArgs) -> Result<(), AppError> {
    let h = load_hypergraph(&args.dynamics.hypergraph)?;
    let cfg = args.dynamics.sim_config(args.runs, args.record_runs);
    let ts = simulate::run(&h, &cfg)?;
    emit(args.dynamics.out.as_ref(), &ts.to_sim_csv())
}

fn graphsim(args: GraphsimArgs) -> Result<(), AppError> {
    let h = load_hypergraph(&args.sim.dynamics.hypergraph)?;
    let g = clique_expand(&h);
    let cfg = args.sim.dynamics.sim_config(args.sim.runs, args.sim.record_runs);
    let mode = if args.discounted {
        GraphMode::Discounted
    } else {
        GraphMode::Linear
    };
    let ts = simulate::graph_run(&g, &cfg, mode)?;
    emit(args.sim.dynamics.out.as_ref(), &ts.to_sim_csv())
}

fn master(args: MasterArgs) -> Result<(), AppError> {
    let h = load_hypergraph(&args.dynamics.hypergraph)?;
    let ms = masterq::build_master(&h, &args.dynamics.params())?;
    if let Some(path) = &args.dump_blocks {
        fs::write(path, ms.dump_blocks())?;
    }
    let cfg = args.dynamics.sim_config(1, false);
    cfg.validate(h.num_nodes())?;
    let times = cfg.sample_times();
    let x0 = ms.point_mass(&cfg.initial_state(h.num_nodes()));
    let traj = masterq::integrate_master(&ms, &x0, &times)?;
    let series = masterq::expected_series(&ms, &traj);
    let mut out = String::from("t,I_expected,S_expected,SI_expected\n");
    for (k, t) in times.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            t, series.infected[k], series.susceptible[k], series.si[k]
        ));
    }
    emit(args.dynamics.out.as_ref(), &out)
}

fn meanfield(args: MeanfieldArgs) -> Result<(), AppError> {
    let variant = match args.model {
        Model::BiUniform => MeanFieldVariant::BiUniform {
            n: args.nodes,
            household_size: args.household,
            workplace_size: args.workplace,
        },
        Model::Regular => MeanFieldVariant::Regular {
            n: args.nodes,
            degree: args.degree,
            edge_size: args.edge_size,
        },
        Model::BaCliques => {
            return Err(AppError::Validation(
                "no mean-field closure for ba-cliques; use bi-uniform or regular".into(),
            ))
        }
    };
    let params = EpidemicParams::new(args.tau, args.gamma, InfectionFunction::new(args.threshold));
    let model = MeanFieldModel::new(variant, params)?;
    if args.fixed_points {
        let mut out = String::from("prevalence,stability\n");
        for fp in model.fixed_points() {
            let label = match fp.stability {
                Stability::Stable => "stable",
                Stability::Unstable => "unstable",
                Stability::Semistable => "semistable",
            };
            out.push_str(&format!("{},{}\n", fp.prevalence, label));
        }
        return emit(args.out.as_ref(), &out);
    }
    if args.sampling_interval <= 0.0 || args.t_max < args.sampling_interval {
        return Err(AppError::Validation(
            "need 0 < sampling_interval <= t_max".into(),
        ));
    }
    let steps = (args.t_max / args.sampling_interval).round() as usize;
    let times: Vec<f64> = (0..=steps)
        .map(|k| k as f64 * args.sampling_interval)
        .collect();
    let ts = model.integrate(args.initial_fraction * args.nodes as f64, &times)?;
    let mut out = String::from("t,I_mf\n");
    for (t, v) in ts.times.iter().zip(&ts.mean) {
        out.push_str(&format!("{t},{v}\n"));
    }
    emit(args.out.as_ref(), &out)
}

fn experiment(args: ExperimentArgs) -> Result<(), AppError> {
    if args.list_presets {
        for name in cli::preset_names() {
            println!("{name}");
        }
        return Ok(());
    }
    let mut spec: ExperimentSpec = match (&args.preset, &args.config) {
        (Some(name), None) => cli::preset(name)
            .ok_or_else(|| AppError::Validation(format!("unknown preset '{name}'")))?,
        (None, Some(path)) => serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| AppError::Validation(format!("bad experiment config: {e}")))?,
        _ => {
            return Err(AppError::Validation(
                "pass exactly one of --preset or --config".into(),
            ))
        }
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let out = cli::run_experiment(&spec, &args.out_dir)?;
    println!("wrote {} CSV files and {}", out.csv_paths.len(), out.manifest_path.display());
    Ok(())
}
