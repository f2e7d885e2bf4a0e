use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dsa_core::inference::{
    replicate_study, run_chains, summarize_chains, Chain, DataGenerator, Observations, ParamName, Posterior,
};
use dsa_core::likelihood::{density_infection, solve_tau};
use dsa_core::model::{default_min_steps, solve_through};
use dsa_core::simulate::{aggregate_counts, sellke_simulate, sellke_simulate_frailty, simulate_dsa_counts};
use dsa_core::{CountData, EventRecord, ModelParams, SeededGenerator, Variant};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::{LikelihoodChoice, RunConfig};
use crate::csv_io::{parse_counts_csv, write_counts_csv};
use crate::error::{CliError, Result};

pub const DENSITY_POINTS: usize = 500;
const INIT_GRID_POINTS: usize = 10;

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    outputs: Vec<String>,
    config: RunConfig,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serialisable") + "\n"
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir()?;
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

/// Writes `manifest.json`: the effective configuration (with absolute data
/// paths) plus the seed and the list of files produced.
fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig, mut outputs: Vec<String>) -> Result<PathBuf> {
    let mut config = cfg.clone();
    config.seed = Some(cfg.seed());
    for p in [&mut config.data.counts, &mut config.data.events, &mut config.out].into_iter().flatten() {
        *p = std::path::absolute(&*p).map_err(|e| CliError::io(&*p, e))?;
    }
    outputs.push("manifest.json".into());
    let manifest = Manifest { command, version: env!("CARGO_PKG_VERSION"), seed: cfg.seed(), outputs, config };
    let path = dir.join("manifest.json");
    write_file(&path, &to_json(&manifest))?;
    Ok(path)
}

/// Simulates one data set from the `[scenario]` section. Writes `counts.csv`
/// and, for exact (Sellke) simulations, `events.json`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let scenario = cfg.scenario_section()?;
    let truth = cfg.truth()?;
    let schedule = cfg.schedule()?;
    let m = scenario.m.unwrap_or_else(|| (truth.rho * scenario.n as f64).round() as u64);
    let dir = prepare_out(cfg)?;
    let mut gen = SeededGenerator::new(cfg.seed());
    let mut written = Vec::new();
    let counts = match scenario.generator {
        DataGenerator::Dsa => simulate_dsa_counts(&truth, scenario.n, m, scenario.t_end, &schedule, &mut gen)?,
        DataGenerator::Sellke => {
            let events = match truth.variant {
                Variant::StandardSir => sellke_simulate(&truth, scenario.n, m, scenario.t_end, &mut gen)?,
                Variant::GammaFrailty => sellke_simulate_frailty(&truth, scenario.n, m, scenario.t_end, &mut gen)?,
                Variant::PoissonNetwork => {
                    return Err(dsa_core::Error::Unsupported(
                        "exact simulation of the network model is not provided; use generator = \"dsa\"".into(),
                    )
                    .into())
                }
            };
            let path = dir.join("events.json");
            write_file(&path, &to_json(&events))?;
            written.push(path);
            aggregate_counts(&events, &schedule)?
        }
    };
    let path = dir.join("counts.csv");
    write_counts_csv(&path, &counts)?;
    written.push(path);
    let names = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    written.push(write_manifest(&dir, "simulate", cfg, names)?);
    Ok(written)
}

fn load_observations(cfg: &RunConfig) -> Result<Observations> {
    match cfg.likelihood {
        LikelihoodChoice::Counts => {
            let path = cfg.data.counts.as_ref().ok_or_else(|| {
                CliError::Config("the count likelihood needs a counts file: set data.counts or pass --data".into())
            })?;
            let mut data: CountData = parse_counts_csv(path)?;
            for (file, conf, key) in [(&mut data.n, cfg.data.n, "N"), (&mut data.m, cfg.data.m, "M")] {
                match (*file, conf) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(CliError::Config(format!(
                            "{key} = {a} in {} but {b} in the configuration",
                            path.display()
                        )))
                    }
                    (None, Some(b)) => *file = Some(b),
                    _ => {}
                }
            }
            data.validate()?;
            Ok(Observations::Counts(data))
        }
        _ => {
            let path = cfg.data.events.as_ref().ok_or_else(|| {
                CliError::Config("time-based likelihoods need an event record: set data.events".into())
            })?;
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let events: EventRecord = serde_json::from_str(&text).map_err(|e| CliError::Parse {
                path: path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?;
            events.validate()?;
            Ok(Observations::Events(events))
        }
    }
}

fn t_end_of(data: &Observations) -> f64 {
    match data {
        Observations::Counts(c) => c.t_end(),
        Observations::Events(e) => e.t_end,
    }
}

fn initial_points(cfg: &RunConfig, posterior: &Posterior) -> Result<Vec<Vec<f64>>> {
    let free = posterior.free();
    let mut start = if free.iter().all(|p| cfg.init.contains_key(p.key())) {
        vec![0.0; free.len()]
    } else {
        posterior.grid_init(INIT_GRID_POINTS)?
    };
    for (i, p) in free.iter().enumerate() {
        if let Some(v) = cfg.init.get(p.key()) {
            start[i] = *v;
        }
    }
    let transforms = posterior.transforms();
    let mut jitter = SeededGenerator::new(cfg.seed()).substream(u64::MAX);
    let mut inits = vec![start.clone()];
    for _ in 1..cfg.sampler.chains {
        inits.push(
            start
                .iter()
                .zip(&transforms)
                .map(|(x, t)| {
                    let e: f64 = jitter.sample(StandardNormal);
                    t.to_constrained(t.to_unconstrained(*x) + 0.1 * e)
                })
                .collect(),
        );
    }
    Ok(inits)
}

fn draws_csv(chains: &[Chain]) -> String {
    let mut out = String::from("chain,iteration");
    for name in &chains[0].names {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",log_posterior\n");
    for (c, chain) in chains.iter().enumerate() {
        for (k, row) in chain.retained().iter().enumerate() {
            let _ = write!(out, "{c},{}", chain.burn_in + k);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", chain.log_posterior[chain.burn_in + k]);
        }
    }
    out
}

/// Conditional infection-time density `f(t; T)` at `points` evenly spaced times.
pub fn density_curve(params: &ModelParams, t_end: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    let traj = solve_through(params, &[0.0, t_end], default_min_steps(1))?;
    (0..points)
        .map(|i| {
            let t = t_end * i as f64 / (points - 1) as f64;
            Ok((t, density_infection(&traj, t, t_end)?))
        })
        .collect()
}

/// Fits the configured model. Writes `draws.csv`, `summary.json`,
/// `summary.txt`, `density.csv` and the manifest.
pub fn cmd_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load_observations(cfg)?;
    let t_end = t_end_of(&data);
    let posterior = Posterior::new(cfg.model, cfg.prior_spec()?, data, cfg.likelihood.kind(), cfg.fixed_params()?)?;
    let inits = initial_points(cfg, &posterior)?;
    let sampler = cfg.sampler_config(cfg.seed())?;
    let chains =
        run_chains(|x| posterior.log_density(x), &posterior.labels(), &posterior.transforms(), &inits, &sampler)?;
    let summary = summarize_chains(&chains, cfg.alpha)?;

    let dir = prepare_out(cfg)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, contents: String| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    emit("draws.csv", draws_csv(&chains))?;
    emit("summary.json", to_json(&summary))?;
    emit("summary.txt", summary.to_table())?;

    let mean_params = posterior.params(&summary.means());
    let mut density = String::from("t,density\n");
    for (t, f) in density_curve(&mean_params, t_end, DENSITY_POINTS)? {
        let _ = writeln!(density, "{t},{f}");
    }
    emit("density.csv", density)?;

    let names = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    written.push(write_manifest(&dir, "fit", cfg, names)?);
    Ok(written)
}

/// Runs the replication study of the `[scenario]` section. Writes
/// `coverage.json`, `coverage.txt` and the manifest.
pub fn cmd_replicate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let scenario = cfg.scenario()?;
    let report = replicate_study(&scenario, cfg.seed())?;
    let dir = prepare_out(cfg)?;
    let json = dir.join("coverage.json");
    write_file(&json, &to_json(&report))?;
    let txt = dir.join("coverage.txt");
    write_file(&txt, &report.to_table())?;
    let manifest = write_manifest(&dir, "replicate", cfg, vec!["coverage.json".into(), "coverage.txt".into()])?;
    Ok(vec![json, txt, manifest])
}

/// Writes `density.csv` for the `[scenario]` parameters on `[0, t_end]`.
pub fn cmd_density(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let t_end = cfg.scenario_section()?.t_end;
    let curve = density_curve(&cfg.truth()?, t_end, DENSITY_POINTS)?;
    let dir = prepare_out(cfg)?;
    let mut text = String::from("t,density\n");
    for (t, f) in curve {
        let _ = writeln!(text, "{t},{f}");
    }
    let path = dir.join("density.csv");
    write_file(&path, &text)?;
    let manifest = write_manifest(&dir, "density", cfg, vec!["density.csv".into()])?;
    Ok(vec![path, manifest])
}

/// Final size `tau` for `R0` and `rho`.
pub fn cmd_tau(r0: f64, rho: f64) -> Result<f64> {
    Ok(solve_tau(r0, rho)?.tau)
}

/// Names of the sampled parameters, in draw-file column order.
pub fn sampled_labels(cfg: &RunConfig) -> Result<Vec<String>> {
    let fixed = cfg.fixed_params()?;
    Ok(ParamName::for_variant(cfg.model)
        .into_iter()
        .filter(|p| !fixed.contains_key(p))
        .map(|p| p.label(cfg.model).to_string())
        .collect())
}
