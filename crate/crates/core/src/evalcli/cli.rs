use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::evaluate::{evaluate_episodes, sweep, write_csv, Experiment, Inputs, MetricsReport, SweepParam};
use crate::error::{Error, Result};
use crate::neuralnet::{read_checkpoint, write_checkpoint};
use crate::policy::Policy;
use crate::scenarios::{Case, Dataset};
use crate::simnet::write_trace;

#[derive(Debug, Parser)]
#[command(name = "when2com", about = "Train and evaluate learned multi-agent communication on synthetic worlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model, then evaluate it on the test split.
    Train(TrainArgs),
    /// Evaluate a checkpoint under a communication policy.
    Eval(EvalArgs),
    /// Train one model per query or key width.
    Sweep(SweepArgs),
    /// Write a dataset as JSON.
    GenData(GenArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CaseArg {
    Srms,
    Mrms,
    Mrmps,
    Triplet,
}

impl From<CaseArg> for Case {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::Srms => Case::Srms,
            CaseArg::Mrms => Case::Mrms,
            CaseArg::Mrmps => Case::Mrmps,
            CaseArg::Triplet => Case::Triplet,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ParamArg {
    Query,
    Key,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InputsArg {
    Observed,
    Clean,
}

#[derive(Debug, Args)]
struct WorldArgs {
    #[arg(long, value_enum, default_value = "srms")]
    case: CaseArg,
    /// Defaults to 5, or 9 for triplet.
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long, default_value_t = 20_000)]
    episodes: usize,
    /// Seeds the class prototypes.
    #[arg(long, default_value_t = 0)]
    world_seed: u64,
}

impl WorldArgs {
    fn experiment(&self) -> Experiment {
        let mut e = Experiment::new(self.case.into());
        if let Some(n) = self.agents {
            e.world.n_agents = n;
            // Room for one viewpoint per distinct view.
            e.world.scene_dim = e.world.scene_dim.max(e.world.distinct_views());
        }
        e.episodes = self.episodes;
        e.world_seed = self.world_seed;
        e
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long, default_value_t = 5000)]
    steps: usize,
    /// Fixes the dataset, initialization, minibatches and evaluation draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint path. The training log, report and CSV are written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "when2com", value_parser = parse_policy)]
    policy: Policy,
    #[arg(long)]
    query_dim: Option<usize>,
    #[arg(long)]
    key_dim: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Defaults to the checkpoint's training policy.
    #[arg(long, value_parser = parse_policy)]
    policy: Option<Policy>,
    /// Defaults to 1/N.
    #[arg(long)]
    delta: Option<f64>,
    /// Must match the training seed to reuse its test split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report path; the CSV row goes to the same stem with `.csv`.
    #[arg(long, default_value = "report.json")]
    report: PathBuf,
    /// Dataset JSON; otherwise regenerated from the world flags and seed.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long, value_enum, default_value = "observed")]
    inputs: InputsArg,
    /// Message trace output, one JSON object per line.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Allow a policy the checkpoint was not trained under.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    param: ParamArg,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long, default_value_t = 5000)]
    steps: usize,
    /// CSV path; the JSON reports go to the same stem with `.json`.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_policy(s: &str) -> std::result::Result<Policy, String> {
    s.parse::<Policy>().map_err(|e| e.to_string())
}

/// Parses `args` (program name first) and runs the command. Returns 0 on
/// success, 2 on usage errors, 1 on any other failure.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::GenData(a) => cmd_gen(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_reports(json: &Path, csv_path: &Path, reports: &[MetricsReport]) -> Result<()> {
    let mut w = create(json)?;
    if let [single] = reports {
        single.write_json(&mut w)?;
    } else {
        serde_json::to_writer_pretty(&mut w, reports)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    let mut c = create(csv_path)?;
    write_csv(&mut c, reports)?;
    c.flush()?;
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut exp = a.world.experiment();
    exp.train.steps = a.steps;
    exp.train.policy = a.policy;
    if let Some(q) = a.query_dim {
        exp.train.dims.query_dim = q;
    }
    if let Some(k) = a.key_dim {
        exp.train.dims.key_dim = k;
    }
    let dataset = exp.dataset(a.seed)?;
    let (theta, log) = exp.train(&dataset, a.seed)?;
    let mut w = create(&a.out)?;
    write_checkpoint(&mut w, &theta, a.policy)?;
    w.flush()?;
    let mut w = create(&sibling(&a.out, ".log.csv"))?;
    log.write_csv(&mut w)?;
    w.flush()?;
    let eval = evaluate_episodes(
        a.policy,
        &theta,
        exp.world.case,
        &dataset.test,
        exp.default_delta(),
        a.seed,
        Inputs::Observed,
    )?;
    write_reports(&sibling(&a.out, ".report.json"), &sibling(&a.out, ".report.csv"), &[eval.report])
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let ckpt = read_checkpoint(BufReader::new(File::open(&a.checkpoint)?))?;
    let policy = a.policy.unwrap_or(ckpt.policy);
    if !a.force && !policy.compatible_with(ckpt.policy) {
        return Err(Error::invalid(format!(
            "checkpoint was trained under {}, not {policy}; pass --force to evaluate anyway",
            ckpt.policy
        )));
    }
    let dataset = match &a.data {
        Some(p) => Dataset::read_json(BufReader::new(File::open(p)?))?,
        None => a.world.experiment().dataset(a.seed)?,
    };
    let delta = a.delta.unwrap_or(1.0 / dataset.world.config.n_agents as f64);
    let inputs = match a.inputs {
        InputsArg::Observed => Inputs::Observed,
        InputsArg::Clean => Inputs::Clean,
    };
    let eval = evaluate_episodes(
        policy,
        &ckpt.params,
        dataset.world.config.case,
        &dataset.test,
        delta,
        a.seed,
        inputs,
    )?;
    if let Some(t) = &a.trace {
        let mut w = create(t)?;
        write_trace(&mut w, &eval.trace)?;
        w.flush()?;
    }
    write_reports(&a.report, &a.report.with_extension("csv"), &[eval.report])
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let mut exp = a.world.experiment();
    exp.train.steps = a.steps;
    let param = match a.param {
        ParamArg::Query => SweepParam::Query,
        ParamArg::Key => SweepParam::Key,
    };
    let reports = sweep(&exp, param, &a.values, a.seed)?;
    write_reports(&a.out.with_extension("json"), &a.out, &reports)
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let dataset = a.world.experiment().dataset(a.seed)?;
    let mut w = create(&a.out)?;
    dataset.write_json(&mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(cli_main(["when2com", "eval"]), 2);
        assert_eq!(cli_main(["when2com", "bogus"]), 2);
        assert_eq!(cli_main(["when2com", "train", "--out", "x", "--nope"]), 2);
        assert_eq!(cli_main(["when2com", "eval", "--checkpoint", "x", "--policy", "telepathy"]), 2);
    }

    #[test]
    fn runtime_errors_exit_one() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("none.ckpt");
        assert_eq!(cli_main(["when2com", "eval", "--checkpoint", missing.to_str().unwrap()]), 1);
    }
}
