//! Command-line front end.
//!
//! Every command writes into its own output directory together with a
//! `manifest.json` holding the resolved configuration and seed.

pub mod io;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{discover, DiscoverConfig};
use crate::dgp::{generate, DgpConfig, MechanismKind};
use crate::diffusion::Checkpoint;
use crate::error::{Error, Result};
use crate::eval::{
    mean_ci, ordering_study, run_ablation, score_graph, Ablation, AblationRow, StudyConfig,
};
use crate::graph::{
    parse_edge_list, write_adjacency_csv, write_edge_list, write_summary_csv, NodeId, TemporalDag,
};
use io::{output_dir, read, read_series, write, write_json, write_manifest, InputFile};

/// Environment variable read for the seed when neither a flag nor the
/// config file sets one.
pub const SEED_ENV: &str = "TCD_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "tcd",
    version,
    about = "Temporal causal discovery from multiple causal orderings"
)]
pub struct Cli {
    /// Worker threads for sweeps and per-scale work; defaults to all cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate series from random temporal structural equation models.
    Simulate(SimulateArgs),
    /// Learn a window causal graph from a series.
    Discover(DiscoverArgs),
    /// Score a predicted graph against a reference graph.
    Evaluate(EvaluateArgs),
    /// Intersect growing subsets of all valid orderings of random graphs.
    Study(StudyArgs),
    /// Sweep one hyperparameter over simulated datasets with known graphs.
    Ablate(AblateArgs),
}

/// Options shared by commands that write an output directory.
#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, short)]
    pub out: PathBuf,
    /// TOML file with `[simulate]`, `[discover]` and `[study]` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub tau: Option<usize>,
    /// piecewise-linear, trigonometric or mixed.
    #[arg(long)]
    pub mechanism: Option<MechanismKind>,
    #[arg(long)]
    pub density: Option<f64>,
    /// Simulate the full grid of lengths, sizes, lags and seeds.
    #[arg(long)]
    pub grid: bool,
    #[arg(long, value_delimiter = ',')]
    pub ts: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub ds: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<usize>>,
    /// Seeds per grid cell, counted up from the base seed.
    #[arg(long)]
    pub repeats: Option<u64>,
}

/// Flags overriding the `[discover]` section.
#[derive(Debug, Args)]
pub struct DiscoverFlags {
    #[arg(long)]
    pub tau_max: Option<usize>,
    /// Number of orderings.
    #[arg(long)]
    pub orderings: Option<usize>,
    /// Explicit noise steps, overriding --orderings.
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<usize>>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Keep contemporaneous candidate edges.
    #[arg(long)]
    pub contemporaneous: bool,
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[command(flatten)]
    pub common: Common,
    /// Series CSV with a header row.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Column whose value changes mark the start of a new trajectory.
    #[arg(long)]
    pub trajectory_column: Option<String>,
    #[command(flatten)]
    pub flags: DiscoverFlags,
    /// Also write the trained network.
    #[arg(long)]
    pub save_net: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Write the scores as JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a tidy CSV of the scores.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long)]
    pub tau_max: Option<usize>,
    #[arg(long)]
    pub density: Option<f64>,
    /// Percentages of all orderings.
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    #[arg(long)]
    pub repetitions: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblateParam {
    Orderings,
    Theta,
    TauMax,
    Scale,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directories holding `series.csv` and `truth.edges`.
    #[arg(long, num_args = 1.., required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub param: AblateParam,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    #[command(flatten)]
    pub flags: DiscoverFlags,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub t: usize,
    pub d: usize,
    pub tau: usize,
    pub mechanism: MechanismKind,
    /// `None` picks about 1.5 expected parents per variable.
    pub density: Option<f64>,
    pub noise_var_range: (f64, f64),
    pub grid_t: Vec<usize>,
    pub grid_d: Vec<usize>,
    pub grid_tau: Vec<usize>,
    pub grid_repeats: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            t: 1000,
            d: 3,
            tau: 1,
            mechanism: MechanismKind::Mixed,
            density: None,
            noise_var_range: (0.01, 0.05),
            grid_t: vec![200, 1000, 2000, 5000],
            grid_d: vec![3, 4, 5, 6],
            grid_tau: vec![1, 2, 3],
            grid_repeats: 10,
        }
    }
}

impl SimulateConfig {
    fn dgp(&self, t: usize, d: usize, tau: usize, seed: u64) -> DgpConfig {
        let base = DgpConfig::new(t, d, tau, seed);
        DgpConfig {
            mechanism: self.mechanism,
            noise_var_range: self.noise_var_range,
            edge_density: self.density.unwrap_or(base.edge_density),
            ..base
        }
    }
}

/// Contents of a config file. Missing sections and keys take defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub simulate: SimulateConfig,
    pub discover: DiscoverConfig,
    pub study: StudyConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                toml::from_str(&read(p)?).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
            }
        }
    }
}

/// Flag, then config file, then environment, then 0.
fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn apply_flags(cfg: &mut DiscoverConfig, f: &DiscoverFlags) {
    if let Some(v) = f.tau_max {
        cfg.tau_max = v;
    }
    if let Some(v) = f.orderings {
        cfg.orderings = v;
        cfg.scales = None;
    }
    if let Some(v) = &f.scales {
        cfg.scales = Some(v.clone());
    }
    if let Some(v) = f.theta {
        cfg.theta = v;
    }
    if let Some(v) = f.alpha {
        cfg.prune.alpha = v;
    }
    if let Some(v) = f.k_max {
        cfg.train.k_max = v;
    }
    if let Some(v) = f.max_epochs {
        cfg.train.max_epochs = v;
    }
    if f.contemporaneous {
        cfg.strict = false;
    }
    if f.no_standardize {
        cfg.standardize = false;
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::invalid("--workers must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::invalid(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Discover(a) => cmd_discover(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Study(a) => cmd_study(&a),
        Command::Ablate(a) => cmd_ablate(&a),
    }
}

fn write_instance(dir: &Path, cfg: &DgpConfig) -> Result<()> {
    let inst = generate(cfg)?;
    write(&dir.join("series.csv"), &io::series_csv(&inst.series)?)?;
    write(
        &dir.join("truth.edges"),
        &write_edge_list(inst.dag.space(), inst.dag.edges()),
    )?;
    write_manifest(dir, "simulate", cfg.seed, Vec::new(), cfg)
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let file = RunConfig::load(a.common.config.as_deref())?;
    let seed = resolve_seed(a.common.seed, file.seed)?;
    let mut sim = file.simulate;
    if let Some(v) = a.t {
        sim.t = v;
    }
    if let Some(v) = a.d {
        sim.d = v;
    }
    if let Some(v) = a.tau {
        sim.tau = v;
    }
    if let Some(v) = a.mechanism {
        sim.mechanism = v;
    }
    if a.density.is_some() {
        sim.density = a.density;
    }
    if let Some(v) = &a.ts {
        sim.grid_t = v.clone();
    }
    if let Some(v) = &a.ds {
        sim.grid_d = v.clone();
    }
    if let Some(v) = &a.taus {
        sim.grid_tau = v.clone();
    }
    if let Some(v) = a.repeats {
        sim.grid_repeats = v;
    }
    let out = &a.common.out;
    if !a.grid {
        let cfg = sim.dgp(sim.t, sim.d, sim.tau, seed);
        cfg.validate()?;
        output_dir(out, a.common.force)?;
        return write_instance(out, &cfg);
    }
    let mut cells = Vec::new();
    for &t in &sim.grid_t {
        for &d in &sim.grid_d {
            for &tau in &sim.grid_tau {
                for r in 0..sim.grid_repeats {
                    let cfg = sim.dgp(t, d, tau, seed + r);
                    cfg.validate()?;
                    cells.push((format!("T{t}_d{d}_tau{tau}_seed{}", seed + r), cfg));
                }
            }
        }
    }
    output_dir(out, a.common.force)?;
    cells.par_iter().try_for_each(|(name, cfg)| {
        let dir = out.join(name);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_instance(&dir, cfg)
    })?;
    let names: Vec<&str> = cells.iter().map(|(n, _)| n.as_str()).collect();
    write_json(&out.join("instances.json"), &names)?;
    write_manifest(out, "simulate", seed, Vec::new(), &sim)
}

fn node_pairs(dag: &TemporalDag, seq: &[usize]) -> Vec<NodeId> {
    seq.iter().map(|&i| dag.space().node(i)).collect()
}

#[derive(Serialize)]
struct OrderingRecord {
    k: usize,
    ordering: Vec<NodeId>,
    leaf_variances: Vec<f64>,
}

pub fn cmd_discover(a: &DiscoverArgs) -> Result<()> {
    let file = RunConfig::load(a.common.config.as_deref())?;
    let mut cfg = file.discover;
    cfg.seed = resolve_seed(a.common.seed, file.seed)?;
    apply_flags(&mut cfg, &a.flags);
    cfg.validate()?;
    let (names, trajectories) = read_series(&a.input, a.trajectory_column.as_deref())?;
    output_dir(&a.common.out, a.common.force)?;
    let views: Vec<ArrayView2<f64>> = trajectories.iter().map(|t| t.view()).collect();
    let result = discover(&views, &cfg)?;
    let out = &a.common.out;
    let space = result.window.space();
    write(
        &out.join("window.edges"),
        &write_edge_list(space, result.window.edges()),
    )?;
    write(
        &out.join("window_adjacency.csv"),
        &write_adjacency_csv(space, result.window.edges()),
    )?;
    write(
        &out.join("summary.csv"),
        &write_summary_csv(&result.summary),
    )?;
    let orderings: Vec<OrderingRecord> = result
        .diagnostics
        .orderings
        .iter()
        .map(|o| OrderingRecord {
            k: o.k,
            ordering: node_pairs(&result.window, o.ordering.sequence()),
            leaf_variances: o.leaf_variances.clone(),
        })
        .collect();
    write_json(&out.join("orderings.json"), &orderings)?;
    #[derive(Serialize)]
    struct Report<'a> {
        variables: &'a [String],
        theta: f64,
        graph: &'a TemporalDag,
        diagnostics: &'a crate::aggregate::Diagnostics,
    }
    write_json(
        &out.join("report.json"),
        &Report {
            variables: &names,
            theta: cfg.theta,
            graph: &result.window,
            diagnostics: &result.diagnostics,
        },
    )?;
    if a.save_net {
        Checkpoint::new(
            result.net.net.clone(),
            cfg.train.clone(),
            Some(result.net.report.clone()),
        )
        .save(&out.join("net.json"))?;
    }
    write_manifest(
        out,
        "discover",
        cfg.seed,
        vec![InputFile::of(&a.input)?],
        &cfg,
    )
}

fn load_graph(path: &Path) -> Result<TemporalDag> {
    let (space, edges) = parse_edge_list(&read(path)?, None)?;
    TemporalDag::from_edges(space, edges)
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let pred = load_graph(&a.pred)?;
    let truth = load_graph(&a.truth)?;
    let scores = score_graph(&pred, &truth)?;
    match &a.out {
        Some(p) => write_json(p, &scores)?,
        None => {
            use std::io::Write;
            let text =
                serde_json::to_string_pretty(&scores).map_err(|e| Error::Parse(e.to_string()))?;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    return Err(Error::io("<stdout>", e))
                }
                _ => {}
            }
        }
    }
    if let Some(p) = &a.csv {
        let mut text = String::from("graph,metric,value\n");
        for (graph, s) in [("window", scores.window), ("summary", scores.summary)] {
            for (metric, v) in [
                ("precision", s.precision),
                ("recall", s.recall),
                ("f1", s.f1),
            ] {
                text.push_str(&format!("{graph},{metric},{v}\n"));
            }
        }
        write(p, &text)?;
    }
    Ok(())
}

pub fn cmd_study(a: &StudyArgs) -> Result<()> {
    let file = RunConfig::load(a.common.config.as_deref())?;
    let mut cfg = file.study;
    cfg.seed = resolve_seed(a.common.seed, file.seed)?;
    if let Some(v) = a.d {
        cfg.d = v;
    }
    if let Some(v) = a.tau {
        cfg.tau = v;
    }
    if let Some(v) = a.tau_max {
        cfg.tau_max = v;
    }
    if let Some(v) = a.density {
        cfg.density = v;
    }
    if let Some(v) = &a.fractions {
        cfg.fractions = v.clone();
    }
    if let Some(v) = a.repetitions {
        cfg.repetitions = v;
    }
    cfg.validate()?;
    output_dir(&a.common.out, a.common.force)?;
    let outcome = ordering_study(&cfg)?;
    let mut text = String::from("repetition,fraction,m,total,constrained,metric,value\n");
    for r in &outcome.records {
        let prefix = format!(
            "{},{},{},{},{}",
            r.repetition, r.fraction, r.m, r.total, r.constrained
        );
        text.push_str(&format!("{prefix},f1,{}\n", r.f1));
        text.push_str(&format!("{prefix},exact,{}\n", u8::from(r.exact)));
    }
    let out = &a.common.out;
    write(&out.join("study.csv"), &text)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        unconstrained: &'a crate::eval::StudyCurve,
        constrained: &'a crate::eval::StudyCurve,
        skipped: &'a [(usize, String)],
    }
    write_json(
        &out.join("summary.json"),
        &Summary {
            unconstrained: &outcome.unconstrained,
            constrained: &outcome.constrained,
            skipped: &outcome.skipped,
        },
    )?;
    write_manifest(out, "study", cfg.seed, Vec::new(), &cfg)
}

fn ablation_of(param: AblateParam, values: &[f64]) -> Result<Ablation> {
    let counts = || -> Result<Vec<usize>> {
        values
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(Error::invalid(format!("{v} is not a whole number")))
                }
            })
            .collect()
    };
    Ok(match param {
        AblateParam::Orderings => Ablation::Orderings(counts()?),
        AblateParam::Theta => Ablation::Theta(values.to_vec()),
        AblateParam::TauMax => Ablation::TauMax(counts()?),
        AblateParam::Scale => Ablation::Scale(counts()?),
    })
}

pub fn cmd_ablate(a: &AblateArgs) -> Result<()> {
    let file = RunConfig::load(a.common.config.as_deref())?;
    let mut cfg = file.discover;
    cfg.seed = resolve_seed(a.common.seed, file.seed)?;
    apply_flags(&mut cfg, &a.flags);
    cfg.validate()?;
    let ablation = ablation_of(a.param, &a.values)?;
    let mut inputs = Vec::new();
    for dir in &a.data {
        inputs.push(InputFile::of(&dir.join("series.csv"))?);
        inputs.push(InputFile::of(&dir.join("truth.edges"))?);
    }
    output_dir(&a.common.out, a.common.force)?;
    let rows: Vec<(String, Vec<AblationRow>)> = a
        .data
        .par_iter()
        .map(|dir| {
            let (_, trajectories) = read_series(&dir.join("series.csv"), None)?;
            let truth = load_graph(&dir.join("truth.edges"))?;
            let views: Vec<ArrayView2<f64>> = trajectories.iter().map(|t| t.view()).collect();
            let rows = run_ablation(&views, &truth, &cfg, &ablation)?;
            Ok((dir.display().to_string(), rows))
        })
        .collect::<Result<_>>()?;
    let mut text = String::from("dataset,parameter,value,graph,metric,score\n");
    for (name, rs) in &rows {
        for r in rs {
            for (graph, s) in [("window", r.scores.window), ("summary", r.scores.summary)] {
                for (metric, v) in [
                    ("precision", s.precision),
                    ("recall", s.recall),
                    ("f1", s.f1),
                ] {
                    text.push_str(&format!(
                        "{name},{},{},{graph},{metric},{v}\n",
                        r.parameter, r.value
                    ));
                }
            }
        }
    }
    let out = &a.common.out;
    write(&out.join("ablation.csv"), &text)?;
    #[derive(Serialize)]
    struct Point {
        value: f64,
        f1_window_mean: f64,
        f1_window_ci: f64,
        precision_window_mean: f64,
        f1_summary_mean: f64,
    }
    let summary: Vec<Point> = a
        .values
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let pick = |f: &dyn Fn(&AblationRow) -> f64| -> Vec<f64> {
                rows.iter().map(|(_, rs)| f(&rs[i])).collect()
            };
            let (f1w, ci) = mean_ci(&pick(&|r| r.scores.window.f1));
            Point {
                value,
                f1_window_mean: f1w,
                f1_window_ci: ci,
                precision_window_mean: mean_ci(&pick(&|r| r.scores.window.precision)).0,
                f1_summary_mean: mean_ci(&pick(&|r| r.scores.summary.f1)).0,
            }
        })
        .collect();
    write_json(&out.join("summary.json"), &summary)?;
    #[derive(Serialize)]
    struct AblateManifest<'a> {
        param: AblateParam,
        values: &'a [f64],
        discover: &'a DiscoverConfig,
    }
    write_manifest(
        out,
        "ablate",
        cfg.seed,
        inputs,
        &AblateManifest {
            param: a.param,
            values: &a.values,
            discover: &cfg,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_sections_override_defaults() {
        let cfg: RunConfig = toml::from_str(
            "seed = 7\n[discover]\ntau_max = 2\ntheta = 0.5\n[discover.train]\nmax_epochs = 5\n[simulate]\nd = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.discover.tau_max, 2);
        assert_eq!(cfg.discover.train.max_epochs, 5);
        assert_eq!(cfg.discover.train.k_max, 100);
        assert_eq!(cfg.simulate.d, 4);
        assert_eq!(cfg.study, StudyConfig::default());
    }

    #[test]
    fn unknown_mechanism_is_a_parse_error() {
        assert!(toml::from_str::<RunConfig>("[simulate]\nmechanism = \"cubic\"\n").is_err());
    }

    #[test]
    fn flag_seed_wins() {
        assert_eq!(resolve_seed(Some(3), Some(4)).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some(4)).unwrap(), 4);
    }

    #[test]
    fn whole_numbers_for_count_sweeps() {
        assert!(ablation_of(AblateParam::Orderings, &[1.0, 4.0]).is_ok());
        assert!(ablation_of(AblateParam::Orderings, &[1.5]).is_err());
        assert_eq!(
            ablation_of(AblateParam::Theta, &[0.5]).unwrap(),
            Ablation::Theta(vec![0.5])
        );
    }
}
