use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{decisions_from_rows, grouping_accuracy, grouping_set_accuracy, when2com_accuracy};
use crate::densemath::{Matrix, Rng};
use crate::error::{Error, Result};
use crate::neuralnet::{train, PipelineDims, PipelineParams, TrainConfig, TrainLog};
use crate::policy::Policy;
use crate::scenarios::{generate_dataset, Case, Dataset, Episode, World, WorldConfig};
use crate::simnet::{links_per_agent, mbpf, run_episode, BandwidthLedger, TraceRecord};

/// Which observations agents see at evaluation time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Inputs {
    #[default]
    Observed,
    /// Pre-degradation views; the degraded flags still define the splits.
    Clean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub policy: Policy,
    pub case: Case,
    pub n_agents: usize,
    pub seed: u64,
    pub delta: f64,
    #[serde(rename = "Q")]
    pub query_dim: usize,
    #[serde(rename = "K")]
    pub key_dim: usize,
    #[serde(rename = "F")]
    pub feature_dim: usize,
    pub acc_all: f64,
    pub acc_degraded: Option<f64>,
    pub acc_clean: Option<f64>,
    pub when2com_acc: f64,
    pub grouping_acc: Option<f64>,
    pub mbpf: f64,
    pub links_per_agent: f64,
    pub n_episodes: usize,
    /// All surviving links inside the ground-truth support set.
    pub grouping_set_acc: Option<f64>,
    pub inputs: Inputs,
    pub counted_bytes: u64,
    pub control_bytes: u64,
}

/// Flat row; column order is part of the output contract.
#[derive(Serialize)]
struct CsvRow<'a> {
    policy: &'a str,
    case: &'a str,
    n_agents: usize,
    seed: u64,
    delta: f64,
    #[serde(rename = "Q")]
    query_dim: usize,
    #[serde(rename = "K")]
    key_dim: usize,
    #[serde(rename = "F")]
    feature_dim: usize,
    acc_all: f64,
    acc_degraded: Option<f64>,
    acc_clean: Option<f64>,
    when2com_acc: f64,
    grouping_acc: Option<f64>,
    mbpf: f64,
    links_per_agent: f64,
    n_episodes: usize,
}

pub const CSV_COLUMNS: [&str; 16] = [
    "policy",
    "case",
    "n_agents",
    "seed",
    "delta",
    "Q",
    "K",
    "F",
    "acc_all",
    "acc_degraded",
    "acc_clean",
    "when2com_acc",
    "grouping_acc",
    "mbpf",
    "links_per_agent",
    "n_episodes",
];

impl MetricsReport {
    fn csv_row(&self) -> CsvRow<'_> {
        CsvRow {
            policy: self.policy.name(),
            case: self.case.name(),
            n_agents: self.n_agents,
            seed: self.seed,
            delta: self.delta,
            query_dim: self.query_dim,
            key_dim: self.key_dim,
            feature_dim: self.feature_dim,
            acc_all: self.acc_all,
            acc_degraded: self.acc_degraded,
            acc_clean: self.acc_clean,
            when2com_acc: self.when2com_acc,
            grouping_acc: self.grouping_acc,
            mbpf: self.mbpf,
            links_per_agent: self.links_per_agent,
            n_episodes: self.n_episodes,
        }
    }

    pub fn write_json(&self, mut w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

/// Header plus one row per report. Undefined rates are empty cells.
pub fn write_csv(w: impl Write, reports: &[MetricsReport]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(CSV_COLUMNS)?;
    for r in reports {
        out.serialize(r.csv_row())?;
    }
    out.flush()?;
    Ok(())
}

/// Report plus the full message trace, one frame per episode.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub trace: Vec<TraceRecord>,
    pub ledger: BandwidthLedger,
}

/// Runs every episode through the simulator. RandCom draws come from
/// `Rng::new(seed)` in episode and agent order.
pub fn evaluate_episodes(
    policy: Policy,
    theta: &PipelineParams,
    case: Case,
    episodes: &[Episode],
    delta: f64,
    seed: u64,
    inputs: Inputs,
) -> Result<Evaluation> {
    let first = episodes.first().ok_or(Error::Empty("evaluation episodes"))?;
    let n = first.n_agents();
    if let Some(bad) = episodes.iter().find(|e| e.n_agents() != n) {
        return Err(Error::shape(format!("{n} agents"), format!("{} agents", bad.n_agents())));
    }
    let mut rng = Rng::new(seed);
    let mut ledger = BandwidthLedger::default();
    let mut trace = Vec::new();
    let mut rows: Vec<Matrix> = Vec::with_capacity(episodes.len());
    let (mut hit_all, mut hit_deg, mut n_deg, mut hit_clean, mut n_clean) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for (frame, ep) in episodes.iter().enumerate() {
        let obs = match inputs {
            Inputs::Observed => &ep.observations,
            Inputs::Clean => &ep.clean_observations,
        };
        let out = run_episode(theta, obs, policy, delta, &mut rng)?;
        for ((&p, &y), &d) in out.predictions.iter().zip(&ep.labels).zip(&ep.degraded) {
            let ok = usize::from(p == y);
            hit_all += ok;
            if d {
                hit_deg += ok;
                n_deg += 1;
            } else {
                hit_clean += ok;
                n_clean += 1;
            }
        }
        ledger.merge(&out.ledger);
        trace.extend(out.trace.into_iter().map(|mut r| {
            r.frame = frame as u64;
            r
        }));
        rows.push(out.weights);
    }
    let decisions: Vec<Vec<bool>> = rows.iter().map(decisions_from_rows).collect();
    let rate = |h: usize, t: usize| (t > 0).then(|| h as f64 / t as f64);
    let dims = theta.dims();
    let report = MetricsReport {
        policy,
        case,
        n_agents: n,
        seed,
        delta,
        query_dim: dims.query_dim,
        key_dim: dims.key_dim,
        feature_dim: dims.feature_dim,
        acc_all: hit_all as f64 / (n_deg + n_clean) as f64,
        acc_degraded: rate(hit_deg, n_deg),
        acc_clean: rate(hit_clean, n_clean),
        when2com_acc: when2com_accuracy(episodes, &decisions)?,
        grouping_acc: grouping_accuracy(episodes, &rows)?,
        mbpf: mbpf(&ledger)?,
        links_per_agent: links_per_agent(&ledger, n)?,
        n_episodes: episodes.len(),
        grouping_set_acc: grouping_set_accuracy(episodes, &rows)?,
        inputs,
        counted_bytes: ledger.counted_bytes,
        control_bytes: ledger.control_bytes,
    };
    Ok(Evaluation { report, trace, ledger })
}

/// Evaluates on the dataset's test split with observed inputs.
pub fn evaluate(policy: Policy, theta: &PipelineParams, dataset: &Dataset, delta: f64, seed: u64) -> Result<MetricsReport> {
    evaluate_episodes(
        policy,
        theta,
        dataset.world.config.case,
        &dataset.test,
        delta,
        seed,
        Inputs::Observed,
    )
    .map(|e| e.report)
}

/// World, data size and training settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub world: WorldConfig,
    /// Seeds the class prototypes; independent of the run seed.
    pub world_seed: u64,
    pub episodes: usize,
    pub train: TrainConfig,
}

/// Keeps initialization and minibatch draws off the dataset stream.
const TRAIN_STREAM: u64 = 0x7472_6169_6e00_0000;

impl Experiment {
    pub fn new(case: Case) -> Self {
        let world = WorldConfig::new(case);
        let train = TrainConfig {
            dims: PipelineDims {
                obs_dim: world.obs_dim,
                n_classes: world.n_classes,
                ..PipelineDims::default()
            },
            ..TrainConfig::default()
        };
        Self {
            world,
            world_seed: 0,
            episodes: 20_000,
            train,
        }
    }

    /// `1/N`.
    pub fn default_delta(&self) -> f64 {
        1.0 / self.world.n_agents as f64
    }

    pub fn build_world(&self) -> Result<World> {
        World::new(self.world.clone(), &mut Rng::new(self.world_seed))
    }

    /// Dataset for run `seed`; training and evaluation regenerate the same one.
    pub fn dataset(&self, seed: u64) -> Result<Dataset> {
        generate_dataset(&self.build_world()?, self.episodes, seed)
    }

    pub fn train(&self, dataset: &Dataset, seed: u64) -> Result<(PipelineParams, TrainLog)> {
        train(&self.train, dataset, &mut Rng::new(seed ^ TRAIN_STREAM))
    }
}

/// Which generator width a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Query,
    Key,
}

/// Trains one model per value and evaluates it under its training policy
/// at `δ = 1/N` on the shared test split.
pub fn sweep(config: &Experiment, param: SweepParam, values: &[usize], seed: u64) -> Result<Vec<MetricsReport>> {
    if values.is_empty() {
        return Err(Error::Empty("sweep values"));
    }
    let dataset = config.dataset(seed)?;
    values
        .iter()
        .map(|&v| {
            let mut exp = config.clone();
            match param {
                SweepParam::Query => exp.train.dims.query_dim = v,
                SweepParam::Key => exp.train.dims.key_dim = v,
            }
            let (theta, _) = exp.train(&dataset, seed)?;
            evaluate(exp.train.policy, &theta, &dataset, exp.default_delta(), seed)
        })
        .collect()
}

pub fn sweep_query_size(config: &Experiment, sizes: &[usize], seed: u64) -> Result<Vec<MetricsReport>> {
    sweep(config, SweepParam::Query, sizes, seed)
}

pub fn sweep_key_size(config: &Experiment, sizes: &[usize], seed: u64) -> Result<Vec<MetricsReport>> {
    sweep(config, SweepParam::Key, sizes, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Experiment {
        let mut e = Experiment::new(Case::Srms);
        e.episodes = 60;
        e.train.steps = 20;
        e.train.eval_every = 0;
        e
    }

    #[test]
    fn link_counts_by_policy() {
        let exp = small();
        let ds = exp.dataset(1).unwrap();
        let theta = PipelineParams::init(exp.train.dims, &mut Rng::new(2)).unwrap();
        let links = |p| evaluate(p, &theta, &ds, 0.2, 3).unwrap().links_per_agent;
        assert_eq!(links(Policy::RandCom), 1.0);
        assert_eq!(links(Policy::FullyConnected), 4.0);
        assert_eq!(links(Policy::NoCom), 0.0);
        assert!(links(Policy::When2com) <= 4.0);
    }

    #[test]
    fn nocom_reports_undefined_grouping() {
        let exp = small();
        let ds = exp.dataset(1).unwrap();
        let theta = PipelineParams::init(exp.train.dims, &mut Rng::new(2)).unwrap();
        let r = evaluate(Policy::NoCom, &theta, &ds, 0.2, 3).unwrap();
        assert_eq!(r.grouping_acc, None);
        assert_eq!(r.mbpf, 0.0);
        assert_eq!(r.when2com_acc, {
            let needs: usize = ds.test.iter().map(|e| e.needs_comm.iter().filter(|&&b| b).count()).sum();
            1.0 - needs as f64 / (5 * ds.test.len()) as f64
        });
    }

    #[test]
    fn empty_episode_list_errors() {
        let exp = small();
        let theta = PipelineParams::init(exp.train.dims, &mut Rng::new(2)).unwrap();
        assert!(evaluate_episodes(Policy::NoCom, &theta, Case::Srms, &[], 0.2, 0, Inputs::Observed).is_err());
    }

    #[test]
    fn trace_reproduces_reported_bandwidth() {
        let exp = small();
        let ds = exp.dataset(4).unwrap();
        let theta = PipelineParams::init(exp.train.dims, &mut Rng::new(5)).unwrap();
        for p in Policy::ALL {
            let e = evaluate_episodes(p, &theta, Case::Srms, &ds.test, 0.2, 6, Inputs::Observed).unwrap();
            let l = BandwidthLedger::from_trace(&e.trace, ds.test.len() as u64);
            assert_eq!(mbpf(&l).unwrap(), e.report.mbpf);
            assert_eq!(links_per_agent(&l, 5).unwrap(), e.report.links_per_agent);
        }
    }

    #[test]
    fn csv_has_exact_header_and_empty_cells() {
        let exp = small();
        let ds = exp.dataset(1).unwrap();
        let theta = PipelineParams::init(exp.train.dims, &mut Rng::new(2)).unwrap();
        let r = evaluate(Policy::NoCom, &theta, &ds, 0.2, 3).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 16);
        assert_eq!(row[0], "nocom");
        assert_eq!(row[12], "");
    }

    #[test]
    fn single_value_sweep_matches_standalone_run() {
        let mut exp = small();
        exp.train.dims.query_dim = 4;
        let rows = sweep_query_size(&exp, &[4], 9).unwrap();
        assert_eq!(rows.len(), 1);
        let ds = exp.dataset(9).unwrap();
        let (theta, _) = exp.train(&ds, 9).unwrap();
        assert_eq!(rows[0], evaluate(Policy::When2com, &theta, &ds, 0.2, 9).unwrap());
        assert!(sweep_query_size(&exp, &[], 9).is_err());
    }
}
