// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use meetsvd_core::experiment::{
    concentration_study, rank_k_error_curve, summarize, write_json_lines, write_rank_k_plot_data, write_records_csv,
    write_size_plot_data,
};
use meetsvd_core::meeting::{solve_pair_system, SolveOptions};
use meetsvd_core::perturb::nu_from_eps;
use meetsvd_core::{
    compute_tmeet, er_sample, perturbation_report, run_er_experiment, srw_from_graph, stationary, svd_killed,
    EdgeProbability, ErParams, ExperimentConfig, Graph, Method, TransitionMatrix,
};

#[derive(Parser)]
#[command(name = "meetsvd", version, about = "Meeting times of random walks via the SVD of the killed pair generator")]
struct Cli {
    /// Master seed for sampling and simulation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an Erdős–Rényi graph and write it in edge-list form.
    Sample(SampleArgs),
    /// Expected meeting time from stationarity for one chain.
    Meet(MeetArgs),
    /// Perturbation diagnostics for one chain.
    Perturb(PerturbArgs),
    /// Sweep Erdős–Rényi graphs over sizes and seeds.
    ErSweep(SweepArgs),
    /// Frequencies of the degree, codegree and spectral events.
    Concentration(ConcentrationArgs),
}

#[derive(Args)]
struct ErArgs {
    #[arg(long)]
    p: Option<f64>,
    /// Density exponent: p = min(c·n^(β−1), 1).
    #[arg(long, conflicts_with = "p")]
    beta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
}

impl ErArgs {
    fn edge_probability(&self) -> Result<EdgeProbability> {
        match (self.p, self.beta) {
            (Some(p), None) => Ok(EdgeProbability::Fixed { p }),
            (None, Some(beta)) => Ok(EdgeProbability::Beta { beta, c: self.c }),
            _ => bail!("give exactly one of --p or --beta"),
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    er: ErArgs,
}

#[derive(Args)]
struct ChainArgs {
    /// Graph in edge-list form; the chain is its simple random walk.
    #[arg(long, conflicts_with = "transition")]
    graph: Option<PathBuf>,
    /// Transition matrix as headerless CSV.
    #[arg(long)]
    transition: Option<PathBuf>,
    /// Use (I + P)/2 instead of P.
    #[arg(long)]
    lazy: bool,
}

impl ChainArgs {
    fn load(&self) -> Result<TransitionMatrix> {
        let p = match (&self.graph, &self.transition) {
            (Some(path), None) => {
                let g = Graph::read_text(BufReader::new(open(path)?)).with_context(|| format!("reading {}", path.display()))?;
                srw_from_graph(&g)?
            }
            (None, Some(path)) => {
                TransitionMatrix::read_csv(open(path)?).with_context(|| format!("reading {}", path.display()))?
            }
            _ => bail!("give exactly one of --graph or --transition"),
        };
        Ok(if self.lazy { p.lazy() } else { p })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Exact,
    Spectral,
    RankK,
    Mc,
}

#[derive(Args)]
struct MethodArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    method: MethodArg,
    /// Rank for `--method rank-k`.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Replicas for `--method mc`.
    #[arg(long, default_value_t = 100_000)]
    replicas: u64,
}

impl MethodArgs {
    fn method(&self) -> Method {
        match self.method {
            MethodArg::Exact => Method::Exact,
            MethodArg::Spectral => Method::Spectral,
            MethodArg::RankK => Method::RankK { k: self.k },
            MethodArg::Mc => Method::Mc { replicas: self.replicas },
        }
    }
}

#[derive(Args)]
struct MeetArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    method: MethodArgs,
    /// Also write the meeting-time matrix as CSV (exact method).
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Also write the singular values of the killed generator as CSV.
    #[arg(long)]
    singular_values: Option<PathBuf>,
}

#[derive(Args)]
struct PerturbArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// Tolerance for the norm-estimate checks.
    #[arg(long, default_value_t = 0.5)]
    eps1: f64,
    /// Compute the least singular triplet of the killed generator and compare.
    #[arg(long)]
    with_svd: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[command(flatten)]
    er: ErArgs,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[command(flatten)]
    method: MethodArgs,
    /// Tolerance on |t/n − 1|.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    eps1: f64,
    #[arg(long)]
    lazy: bool,
    /// Attach a perturbation report to every record.
    #[arg(long)]
    perturb: bool,
    /// Directory for two-column plot data files.
    #[arg(long)]
    plot_data: Option<PathBuf>,
    /// Per-size summary file (JSON lines); standard error when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct ConcentrationArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 100)]
    seeds: usize,
    /// Degree threshold; derived from --eps1 when absent.
    #[arg(long)]
    nu1: Option<f64>,
    /// Codegree threshold; derived from --eps1 when absent.
    #[arg(long)]
    nu2: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    eps1: f64,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_value(mut w: impl Write, value: &serde_json::Value, format: Format) -> Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
        Format::Csv => {
            let obj = value.as_object().context("CSV output needs a flat object")?;
            let keys: Vec<&String> = obj.keys().collect();
            writeln!(w, "{}", keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(","))?;
            let cells: Vec<String> = obj
                .values()
                .map(|v| match v {
                    serde_json::Value::Null => String::new(),
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect();
            writeln!(w, "{}", cells.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_sample(cli: &Cli, args: &SampleArgs) -> Result<()> {
    let params = args.er.edge_probability()?.params(args.n)?;
    let g = er_sample(&params, cli.seed);
    let mut w = output(&cli.out)?;
    g.write_text(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_meet(cli: &Cli, args: &MeetArgs) -> Result<()> {
    let p = args.chain.load()?;
    let pi = stationary(&p)?;
    let method = args.method.method();
    let est = compute_tmeet(&p, &pi, method, cli.seed)?;
    if let Some(path) = &args.matrix {
        let sol = solve_pair_system(&p, &SolveOptions::default())?;
        sol.meeting_times().write_csv(create(path)?)?;
    }
    if let Some(path) = &args.singular_values {
        svd_killed(&p, None)?.write_csv(create(path)?)?;
    }
    let value = serde_json::json!({
        "n": p.n(),
        "method": method.label(),
        "tmeet_pi": est.tmeet_pi,
        "tmeet_over_n": est.tmeet_pi / p.n() as f64,
        "uncertainty": est.uncertainty,
        "censored": est.censored,
    });
    write_value(output(&cli.out)?, &value, cli.format)
}

fn cmd_perturb(cli: &Cli, args: &PerturbArgs) -> Result<()> {
    let p = args.chain.load()?;
    let pi = stationary(&p)?;
    let killed = if args.with_svd { Some(svd_killed(&p, Some(1))?) } else { None };
    let report = perturbation_report(&p, &pi, killed.as_ref(), Some(args.eps1))?;
    let mut value = serde_json::to_value(&report)?;
    if cli.format == Format::Csv {
        let mut flat = serde_json::to_value(report.blocks)?;
        let obj = flat.as_object_mut().expect("struct serialises to an object");
        for (k, v) in serde_json::to_value(report.bounds)?.as_object().expect("object") {
            obj.insert(k.clone(), v.clone());
        }
        obj.insert("sigma_min_sq".into(), serde_json::to_value(report.sigma_min_sq)?);
        obj.insert("in_sandwich".into(), serde_json::to_value(report.in_sandwich)?);
        value = flat;
    }
    write_value(output(&cli.out)?, &value, cli.format)
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<bool> {
    let mut cfg = ExperimentConfig::new(args.n.clone(), args.er.edge_probability()?, args.seeds, cli.seed);
    cfg.method = args.method.method();
    cfg.epsilon = args.epsilon;
    cfg.epsilon1 = args.eps1;
    cfg.lazy = args.lazy;
    cfg.perturb = args.perturb;
    let records = run_er_experiment(&cfg)?;
    let summaries = summarize(&cfg, &records)?;

    let mut w = output(&cli.out)?;
    match cli.format {
        Format::Json => write_json_lines(&records, &mut w)?,
        Format::Csv => write_records_csv(&records, &mut w)?,
    }
    w.flush()?;
    match &args.summary {
        Some(path) => write_json_lines(&summaries, create(path)?)?,
        None => write_json_lines(&summaries, io::stderr().lock())?,
    }

    if let Some(dir) = &args.plot_data {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_size_plot_data(&summaries, create(&dir.join("size_vs_tmeet.txt"))?)?;
        // rank-k curve on the first usable graph small enough for a dense SVD
        let first = records.iter().find(|r| r.tmeet_pi.is_some() && r.n <= 20);
        if let Some(r) = first {
            let g = er_sample(&ErParams::from_p(r.n, r.p)?, r.seed);
            let mut p = srw_from_graph(&g)?;
            if cfg.lazy {
                p = p.lazy();
            }
            let pi = stationary(&p)?;
            write_rank_k_plot_data(&rank_k_error_curve(&p, &pi)?, create(&dir.join("rank_k_error.txt"))?)?;
        }
    }
    Ok(records.iter().any(|r| r.error.is_some()))
}

fn cmd_concentration(cli: &Cli, args: &ConcentrationArgs) -> Result<()> {
    let (d1, d2) = nu_from_eps(args.eps1)?;
    let report = concentration_study(args.n, args.p, args.seeds, args.nu1.unwrap_or(d1), args.nu2.unwrap_or(d2), cli.seed)?;
    let mut value = serde_json::to_value(&report)?;
    if cli.format == Format::Csv {
        let mut flat = serde_json::Map::new();
        for (k, v) in value.as_object().expect("object") {
            match v.as_object() {
                Some(inner) => {
                    for (ik, iv) in inner {
                        flat.insert(format!("{k}_{ik}"), iv.clone());
                    }
                }
                None => {
                    flat.insert(k.clone(), v.clone());
                }
            }
        }
        value = serde_json::Value::Object(flat);
    }
    write_value(output(&cli.out)?, &value, cli.format)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Sample(a) => cmd_sample(cli, a).map(|_| false),
        Command::Meet(a) => cmd_meet(cli, a).map(|_| false),
        Command::Perturb(a) => cmd_perturb(cli, a).map(|_| false),
        Command::ErSweep(a) => cmd_sweep(cli, a),
        Command::Concentration(a) => cmd_concentration(cli, a).map(|_| false),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
