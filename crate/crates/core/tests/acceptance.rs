//! End-to-end acceptance suite. Each test prints a single `criterion k:
//! PASS|FAIL` line (visible with `cargo test --test acceptance -- --nocapture`)
//! and asserts the same condition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use hypersis::cli::{
    self, Engine, ExperimentSpec, GeneratorSpec, HypergraphSource, SimSettings, Variant,
};
use hypersis::generators::{self, BiUniformSpec, ConfigSpec};
use hypersis::hypercore::{
    clique_expand, infection_rate, EpidemicParams, EpidemicState, Hypergraph, InfectionFunction,
};
use hypersis::masterq::{
    build_master, column_identities, ensemble_vs_master, integrate_master, verify_theorem1,
};
use hypersis::meanfield::{logistic_solution, MeanFieldModel, MeanFieldVariant, Stability};
use hypersis::simulate::{
    self, graph_node_rate, step_with_uniforms, GraphMode, InitialCondition, SimConfig,
};

fn report(criterion: usize, what: &str, ok: bool) {
    println!(
        "criterion {criterion} ({what}): {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {what}");
}

fn fig1() -> Hypergraph {
    Hypergraph::new(4, vec![vec![0, 1, 3], vec![1, 2], vec![2, 3]]).unwrap()
}

fn params(tau: f64, gamma: f64, c: f64) -> EpidemicParams {
    EpidemicParams::new(tau, gamma, InfectionFunction::new(c))
}

fn random_hypergraph<R: Rng>(rng: &mut R, max_nodes: usize, max_edges: usize) -> Hypergraph {
    let n = rng.gen_range(2..=max_nodes);
    let m = rng.gen_range(1..=max_edges);
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

/// Criterion 1: the assembled generator blocks of the 4-node example
/// hypergraph match the hand-derived matrices entry for entry, at two values
/// of c where f(1) and f(2) differ.
#[test]
fn criterion_1_golden_blocks() {
    let tau = 0.6;
    let gamma = 0.9;
    let mut ok = true;
    for (c, f1, f2) in [(1.0, 1.0, 1.0), (2.0, 1.0, 2.0)] {
        let ms = build_master(&fig1(), &params(tau, gamma, c)).unwrap();
        let t = |v: f64| tau * v;
        let a2 = vec![
            vec![t(f1), t(f1), 0.0, 0.0],
            vec![t(f1), 0.0, t(f1), 0.0],
            vec![0.0, t(f1), t(f1), 0.0],
            vec![t(f1), 0.0, 0.0, t(f1)],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, t(f1), t(f1)],
        ];
        let a3 = vec![
            vec![t(2.0 * f1), t(2.0 * f1), t(2.0 * f1), 0.0, 0.0, 0.0],
            vec![t(f1), 0.0, 0.0, t(f1), t(2.0 * f1), 0.0],
            vec![0.0, t(f2), 0.0, t(f2), 0.0, t(f2)],
            vec![0.0, 0.0, t(f1), 0.0, t(2.0 * f1), t(f1)],
        ];
        let a4 = vec![vec![t(f2), t(f1 + f2), t(2.0 * f1), t(f1 + f2)]];
        let g = gamma;
        let c0 = vec![vec![g, g, g, g]];
        let c1 = vec![
            vec![g, g, 0.0, g, 0.0, 0.0],
            vec![g, 0.0, g, 0.0, g, 0.0],
            vec![0.0, g, g, 0.0, 0.0, g],
            vec![0.0, 0.0, 0.0, g, g, g],
        ];
        let c2 = vec![
            vec![g, g, 0.0, 0.0],
            vec![g, 0.0, g, 0.0],
            vec![g, 0.0, 0.0, g],
            vec![0.0, g, g, 0.0],
            vec![0.0, g, 0.0, g],
            vec![0.0, 0.0, g, g],
        ];
        let c3 = vec![vec![g], vec![g], vec![g], vec![g]];
        ok &= ms.a_block(2).to_dense() == a2;
        ok &= ms.a_block(3).to_dense() == a3;
        ok &= ms.a_block(4).to_dense() == a4;
        ok &= ms.c_block(0).to_dense() == c0;
        ok &= ms.c_block(1).to_dense() == c1;
        ok &= ms.c_block(2).to_dense() == c2;
        ok &= ms.c_block(3).to_dense() == c3;
        ok &= ms.b_diag(0) == [0.0];
    }
    report(1, "golden master-equation blocks", ok);
}

/// Criterion 2: generator-column conservation identities on random
/// hypergraphs with N <= 10.
#[test]
fn criterion_2_conservation_identities() {
    let mut rng = ChaCha12Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let h = random_hypergraph(&mut rng, 10, 6);
        let p = params(
            rng.gen_range(0.05..2.0),
            rng.gen_range(0.05..2.0),
            rng.gen_range(1..=4) as f64,
        );
        let ms = build_master(&h, &p).unwrap();
        worst = worst.max(column_identities(&ms).max_deviation());
    }
    report(2, "conservation identities < 1e-12", worst < 1e-12);
}

/// Criterion 3: the exact prevalence identity d[I]/dt = tau [SI] - gamma [I]
/// holds along integrated trajectories to 1e-5 with grid step 1e-3.
#[test]
fn criterion_3_theorem_residual() {
    let grid: Vec<f64> = (0..=2000).map(|i| i as f64 * 1e-3).collect();
    let mut hypergraphs = vec![fig1()];
    let mut rng = ChaCha12Rng::seed_from_u64(303);
    for _ in 0..10 {
        hypergraphs.push(random_hypergraph(&mut rng, 8, 4));
    }
    let mut worst: f64 = 0.0;
    for h in &hypergraphs {
        for tau in [0.5, 1.0] {
            for c in [1.0, 2.0, 3.0] {
                let ms = build_master(h, &params(tau, 1.0, c)).unwrap();
                let x0 = ms.uniform_over_class(1);
                let traj = integrate_master(&ms, &x0, &grid).unwrap();
                worst = worst.max(verify_theorem1(&ms, &traj, &grid).unwrap());
            }
        }
    }
    report(3, "prevalence identity residual < 1e-5", worst < 1e-5);
}

/// Criterion 4: ensemble simulation agrees with the exact master-equation
/// expectation within |z| < 4 at >= 99% of sample times.
#[test]
fn criterion_4_simulation_master_agreement() {
    let h = fig1();
    let mut cfg = SimConfig::new(params(1.0, 1.0, 2.0), 10.0, 404);
    cfg.dt = 0.005;
    cfg.runs = 10_000;
    cfg.sampling_interval = 0.1;
    cfg.initial = InitialCondition::State(EpidemicState::with_infected(4, &[1, 3]));
    let cmp = ensemble_vs_master(&h, &cfg).unwrap();
    let frac = cmp.fraction_within(4.0);
    report(4, "simulation vs master |z| < 4 at >= 99% of times", frac >= 0.99);
}

/// Criterion 5: with c at least the maximum hyperedge size, per-node
/// infection rates on the hypergraph equal the linear weighted-graph rates
/// exactly, state by state.
#[test]
fn criterion_5_clique_expansion_equivalence() {
    let mut rng = ChaCha12Rng::seed_from_u64(505);
    let mut ok = true;
    for _ in 0..20 {
        let h = random_hypergraph(&mut rng, 25, 8);
        let g = clique_expand(&h);
        let p = params(0.37, 1.0, h.max_edge_size() as f64);
        for _ in 0..500 {
            let s = EpidemicState::from_bits((0..h.num_nodes()).map(|_| rng.gen()).collect());
            for i in 0..h.num_nodes() {
                if s.is_infected(i) {
                    continue;
                }
                let hyper = infection_rate(&h, &s, i, &p).unwrap();
                let graph = graph_node_rate(&g, &s, i, &p, GraphMode::Linear);
                ok &= hyper == graph;
            }
        }
    }
    report(5, "clique-expansion rate equality (exact)", ok);
}

/// Criterion 6: with shared per-step uniforms, the infected set under c=10
/// contains the infected set under c=3 at every step of every run.
#[test]
fn criterion_6_monotone_in_c() {
    let mut rng = ChaCha12Rng::seed_from_u64(606);
    let h = generators::gen_bi_uniform(
        &BiUniformSpec {
            n: 500,
            household_size: 5,
            workplace_size: 10,
        },
        &mut rng,
    )
    .unwrap();
    let p_lo = params(0.18, 1.0, 3.0);
    let p_hi = params(0.18, 1.0, 10.0);
    let dt = 0.01;
    let steps = 1500; // t_max = 15
    let initial = EpidemicState::with_infected(500, &(0..50).collect::<Vec<_>>());
    let mut ok = true;
    let mut uniforms = vec![0.0; 500];
    for run in 0..100u64 {
        let mut stream = ChaCha12Rng::seed_from_u64(606);
        stream.set_stream(run + 1);
        let mut lo = initial.clone();
        let mut hi = initial.clone();
        for _ in 0..steps {
            for u in uniforms.iter_mut() {
                *u = stream.gen();
            }
            lo = step_with_uniforms(&h, &lo, &p_lo, dt, &uniforms).unwrap();
            hi = step_with_uniforms(&h, &hi, &p_hi, dt, &uniforms).unwrap();
            if !hi.dominates(&lo) {
                ok = false;
                break;
            }
        }
        if !ok {
            break;
        }
    }
    report(6, "path-wise monotonicity in c (c=3 vs c=10)", ok);
}

/// Criterion 7: the regular closure reduces to a logistic equation when
/// c >= e-1; trajectory and endemic fixed point match the closed form.
#[test]
fn criterion_7_meanfield_logistic_oracle() {
    let (n, d, e) = (500.0, 16usize, 20usize);
    let (tau, gamma) = (0.03, 1.0);
    let model = MeanFieldModel::new(
        MeanFieldVariant::Regular {
            n: n as usize,
            degree: d,
            edge_size: e,
        },
        params(tau, gamma, (e - 1) as f64),
    )
    .unwrap();
    let rate = tau * d as f64 * (e - 1) as f64;
    let growth = rate - gamma;
    let saturation = rate / n; // I' = growth I - saturation I^2
    let endemic = n * (1.0 - gamma / rate);
    let grid: Vec<f64> = (0..=300).map(|k| k as f64 * 0.01).collect();
    let ts = model.integrate(5.0, &grid).unwrap();
    let mut ok = growth > 0.0;
    for (t, v) in grid.iter().zip(&ts.mean) {
        let exact = logistic_solution(growth, saturation, 5.0, *t);
        ok &= (v - exact).abs() <= 1e-6 * exact.abs().max(1.0);
    }
    let fps = model.fixed_points();
    ok &= fps.iter().any(|fp| {
        (fp.prevalence - endemic).abs() < 1e-8 * n && fp.stability == Stability::Stable
    });
    report(7, "mean-field logistic closed form + endemic root", ok);
}

/// Criterion 8: on the regular N=500, d=16, e=20 hypergraph the closure and
/// the simulation reach steady states within 5% of N of each other, and the
/// closure's transient rises at least as fast.
#[test]
fn criterion_8_meanfield_vs_simulation() {
    let mut rng = ChaCha12Rng::seed_from_u64(808);
    let spec = ConfigSpec::regular(500, 16, 20).unwrap();
    let h = generators::gen_configuration(&spec, &mut rng).unwrap();
    let mut ok = true;
    for c in [10.0, 15.0] {
        let p = params(0.03, 1.0, c);
        let mut cfg = SimConfig::new(p, 15.0, 808);
        cfg.sampling_interval = 0.1;
        let sim = simulate::run(&h, &cfg).unwrap();
        let model = MeanFieldModel::new(
            MeanFieldVariant::Regular {
                n: 500,
                degree: 16,
                edge_size: 20,
            },
            p,
        )
        .unwrap();
        let mf = model.integrate(50.0, &sim.times).unwrap();
        let (sim_ss, _) = simulate::steady_state_estimate(&sim, 1.0 / 3.0).unwrap();
        let (mf_ss, _) = simulate::steady_state_estimate(&mf, 1.0 / 3.0).unwrap();
        ok &= (sim_ss - mf_ss).abs() <= 0.05 * 500.0;
        // "Rises at least as fast": the closure reaches half its own steady
        // state no later than the simulation mean reaches half of its own.
        let half_time = |times: &[f64], vals: &[f64], target: f64| {
            times
                .iter()
                .zip(vals)
                .find(|(_, &v)| v >= target)
                .map(|(&t, _)| t)
        };
        let t_mf = half_time(&mf.times, &mf.mean, mf_ss / 2.0);
        let t_sim = half_time(&sim.times, &sim.mean, sim_ss / 2.0);
        ok &= match (t_mf, t_sim) {
            (Some(a), Some(b)) => a <= b,
            _ => false,
        };
    }
    report(8, "mean-field vs simulation steady state within 5% of N", ok);
}

/// Criterion 9: structural guarantees of the generators over many seeds.
#[test]
fn criterion_9_generator_structure() {
    let mut ok = true;
    // Bi-uniform: exact two-partition structure, every node degree 2.
    for seed in 0..50u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let (n, hh, w) = match seed % 3 {
            0 => (500, 5, 10),
            1 => (120, 4, 6),
            _ => (60, 3, 5),
        };
        let h = generators::gen_bi_uniform(
            &BiUniformSpec {
                n,
                household_size: hh,
                workplace_size: w,
            },
            &mut rng,
        )
        .unwrap();
        ok &= h.num_edges() == n / hh + n / w;
        ok &= (0..n).all(|i| h.degree(i) == 2);
        // Each partition covers every node exactly once.
        for (edges, size) in [(0..n / hh, hh), (n / hh..h.num_edges(), w)] {
            let mut seen = vec![false; n];
            for j in edges {
                ok &= h.edge(j).len() == size;
                for &i in h.edge(j) {
                    ok &= !std::mem::replace(&mut seen[i], true);
                }
            }
            ok &= seen.iter().all(|&s| s);
        }
    }
    // Configuration model: expected half-edge loss below 2%.
    let spec = ConfigSpec::regular(500, 16, 20).unwrap();
    let prescribed = (500 * 16) as f64;
    let mut total_loss = 0.0;
    for seed in 0..50u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(1000 + seed);
        let h = generators::gen_configuration(&spec, &mut rng).unwrap();
        let realized: usize = h.edges().map(|e| e.len()).sum();
        total_loss += 1.0 - realized as f64 / prescribed;
    }
    ok &= total_loss / 50.0 < 0.02;
    report(9, "generator structure + half-edge loss < 2%", ok);
}

/// Criterion 10: identical (spec, seed) produce byte-identical CSVs for
/// every engine.
#[test]
fn criterion_10_determinism() {
    let spec = ExperimentSpec {
        name: "determinism".into(),
        source: HypergraphSource::Generator(GeneratorSpec::BiUniform {
            n: 12,
            household_size: 4,
            workplace_size: 6,
        }),
        variants: vec![Variant {
            label: "base".into(),
            tau: 0.3,
            gamma: 1.0,
            c: 2.0,
        }],
        engines: vec![
            Engine::Sim,
            Engine::GraphSim,
            Engine::GraphSimDiscounted,
            Engine::MeanField,
            Engine::Master,
        ],
        sim: SimSettings {
            dt: 0.01,
            t_max: 2.0,
            runs: 50,
            initial_fraction: 0.25,
            sampling_interval: 0.1,
        },
        seed: 42,
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let out_a = cli::run_experiment(&spec, dir_a.path()).unwrap();
    let out_b = cli::run_experiment(&spec, dir_b.path()).unwrap();
    let mut ok = out_a.csv_paths.len() == out_b.csv_paths.len();
    for (a, b) in out_a.csv_paths.iter().zip(&out_b.csv_paths) {
        ok &= std::fs::read(a).unwrap() == std::fs::read(b).unwrap();
    }
    report(10, "byte-identical CSVs for every engine", ok);
}
