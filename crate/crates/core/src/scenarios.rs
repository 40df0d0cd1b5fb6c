//! Synthetic multi-agent perception episodes.
//!
//! Every observation has two channels:
//!
//! - an *appearance* block (the first `obs_dim - scene_dim` entries) holding
//!   the class prototype plus a small perturbation;
//! - a *scene* block (the last `scene_dim` entries) holding the one-hot
//!   code of the viewpoint the agent occupies, plus the same perturbation.
//!   Viewpoints are drawn without replacement per episode and are
//!   independent of the class.
//!
//! Degradation replaces the appearance block with pure noise and leaves the
//! scene block intact, the way a corrupted camera frame still comes with the
//! sensor's pose. A degraded observation therefore carries no class
//! information, but a requester can still recognise the peer that holds a
//! clean version of its view.
//!
//! Cases:
//!
//! - **SRMS**: one designated agent is degraded with `degrade_prob`; when it
//!   is, a random peer's view is replaced by the requester's clean view.
//! - **MRMS**: agents degrade independently (at most half of them); each
//!   degraded agent gets a distinct clean peer holding its clean view.
//! - **MRMPS**: same degradation; every clean agent partially overlaps one
//!   random degraded agent, and only overlaps above 0.5 count as support.
//! - **TRIPLET**: `N = 3k` agents in `k` same-object triplets; with
//!   `degrade_prob` one member of each triplet is degraded and its two
//!   peers are its support.
//!
//! Within an episode, distinct views show distinct classes.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::densemath::Rng;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Srms,
    Mrms,
    Mrmps,
    Triplet,
}

impl Case {
    pub fn name(self) -> &'static str {
        match self {
            Case::Srms => "srms",
            Case::Mrms => "mrms",
            Case::Mrmps => "mrmps",
            Case::Triplet => "triplet",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "srms" => Ok(Case::Srms),
            "mrms" => Ok(Case::Mrms),
            "mrmps" => Ok(Case::Mrmps),
            "triplet" => Ok(Case::Triplet),
            _ => Err(Error::invalid(format!("unknown case '{s}'"))),
        }
    }
}

/// Parameters of a synthetic world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub case: Case,
    pub n_agents: usize,
    pub obs_dim: usize,
    /// Number of viewpoints; also the trailing entries holding the scene code.
    pub scene_dim: usize,
    pub n_classes: usize,
    pub degrade_prob: f64,
    /// Standard deviation of the noise that replaces degraded appearance.
    pub noise_sigma: f64,
    /// Standard deviation of the per-view perturbation of clean observations.
    pub perturb_sigma: f64,
    /// Fixed MRMPS overlap; `None` draws it uniformly per supporter.
    pub overlap_frac: Option<f64>,
}

/// Overlap above which an MRMPS supporter counts as ground-truth support.
pub const OVERLAP_THRESHOLD: f64 = 0.5;

/// Minimum pairwise prototype distance enforced by rejection sampling.
pub const MIN_PROTOTYPE_DISTANCE: f64 = 0.5;

impl WorldConfig {
    pub fn new(case: Case) -> Self {
        Self {
            case,
            n_agents: if case == Case::Triplet { 9 } else { 5 },
            obs_dim: 32,
            scene_dim: 8,
            n_classes: 10,
            degrade_prob: 0.5,
            noise_sigma: 1.0,
            perturb_sigma: 0.05,
            overlap_frac: None,
        }
    }

    /// Viewpoints occupied per episode: one per agent, or one per triplet.
    pub fn distinct_views(&self) -> usize {
        match self.case {
            Case::Triplet => self.n_agents / 3,
            _ => self.n_agents,
        }
    }

    pub fn appearance_dim(&self) -> usize {
        self.obs_dim - self.scene_dim
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if self.n_agents == 0 {
            return bad("n_agents must be positive".into());
        }
        if self.scene_dim == 0 || self.scene_dim >= self.obs_dim {
            return bad(format!(
                "scene_dim {} must be in [1, obs_dim {})",
                self.scene_dim, self.obs_dim
            ));
        }
        if self.n_classes < 2 {
            return bad("need at least two classes".into());
        }
        if !(0.0..=1.0).contains(&self.degrade_prob) {
            return bad(format!("degrade_prob {} outside [0, 1]", self.degrade_prob));
        }
        if !(self.noise_sigma >= 0.0 && self.perturb_sigma >= 0.0) {
            return bad("noise levels must be nonnegative".into());
        }
        if let Some(o) = self.overlap_frac {
            if !(0.0..=1.0).contains(&o) {
                return bad(format!("overlap_frac {o} outside [0, 1]"));
            }
            if self.case != Case::Mrmps {
                return bad("overlap_frac applies to MRMPS only".into());
            }
        }
        if self.distinct_views() > self.scene_dim {
            return bad(format!(
                "{} distinct viewpoints per episode exceed scene_dim {}",
                self.distinct_views(),
                self.scene_dim
            ));
        }
        match self.case {
            Case::Srms | Case::Mrms | Case::Mrmps => {
                if self.n_agents < 2 {
                    return bad(format!("{} needs at least 2 agents", self.case));
                }
                if self.n_classes < self.n_agents {
                    return bad(format!(
                        "{} draws distinct classes per agent: n_classes {} < n_agents {}",
                        self.case, self.n_classes, self.n_agents
                    ));
                }
            }
            Case::Triplet => {
                if self.n_agents % 3 != 0 {
                    return bad(format!("triplet needs a multiple of 3 agents, got {}", self.n_agents));
                }
                if self.n_classes < self.n_agents / 3 {
                    return bad("triplet needs at least one class per triplet".into());
                }
            }
        }
        Ok(())
    }
}

/// A configured world: parameters plus the class prototypes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub config: WorldConfig,
    /// Unit-norm prototypes of length `obs_dim`, zero on the scene block.
    pub prototypes: Vec<Vec<f64>>,
}

impl World {
    pub fn new(config: WorldConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let app = config.appearance_dim();
        let mut prototypes: Vec<Vec<f64>> = Vec::with_capacity(config.n_classes);
        let mut attempts = 0;
        while prototypes.len() < config.n_classes {
            attempts += 1;
            if attempts > 100_000 {
                return Err(Error::invalid(format!(
                    "cannot place {} separated prototypes in {app} dims",
                    config.n_classes
                )));
            }
            let mut p = unit_vector(rng, app);
            if prototypes
                .iter()
                .all(|q| distance(&q[..app], &p) > MIN_PROTOTYPE_DISTANCE)
            {
                p.resize(config.obs_dim, 0.0);
                prototypes.push(p);
            }
        }
        Ok(Self { config, prototypes })
    }

    /// A clean view of `label` from the scene with code `scene`.
    fn clean_view(&self, label: usize, scene: &[f64], rng: &mut Rng) -> Vec<f64> {
        let c = &self.config;
        let app = c.appearance_dim();
        let mut x: Vec<f64> = self.prototypes[label][..app]
            .iter()
            .map(|v| v + c.perturb_sigma * rng.normal())
            .collect();
        x.extend(scene.iter().map(|v| v + c.perturb_sigma * rng.normal()));
        x
    }

    /// Appearance replaced with noise; scene block kept.
    fn degrade(&self, clean: &[f64], rng: &mut Rng) -> Vec<f64> {
        let c = &self.config;
        let app = c.appearance_dim();
        let mut x: Vec<f64> = (0..app).map(|_| c.noise_sigma * rng.normal()).collect();
        x.extend_from_slice(&clean[app..]);
        x
    }
}

fn unit_vector(rng: &mut Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// One synchronized frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub observations: Vec<Vec<f64>>,
    /// Observations before degradation; equal to `observations` for clean agents.
    pub clean_observations: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub degraded: Vec<bool>,
    pub needs_comm: Vec<bool>,
    /// Agents holding informative content for each agent; empty when no help is needed.
    pub gt_support: Vec<Vec<usize>>,
}

impl Episode {
    pub fn n_agents(&self) -> usize {
        self.labels.len()
    }
}

/// `k` distinct one-hot viewpoint codes of length `dim`.
fn viewpoints(rng: &mut Rng, dim: usize, k: usize) -> Vec<Vec<f64>> {
    let mut slots: Vec<usize> = (0..dim).collect();
    rng.shuffle(&mut slots);
    slots[..k]
        .iter()
        .map(|&s| {
            let mut v = vec![0.0; dim];
            v[s] = 1.0;
            v
        })
        .collect()
}

/// Draws `k` distinct classes.
fn distinct_labels(rng: &mut Rng, n_classes: usize, k: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n_classes).collect();
    rng.shuffle(&mut all);
    all.truncate(k);
    all
}

/// Independent degradation in random order, capped at `⌊N/2⌋` so every
/// degraded agent can be paired with a distinct clean agent.
fn capped_degradation(rng: &mut Rng, n: usize, p: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let cap = n / 2;
    let mut degraded = vec![false; n];
    let mut count = 0;
    for i in order {
        if rng.bernoulli(p) && count < cap {
            degraded[i] = true;
            count += 1;
        }
    }
    degraded
}

pub fn generate_episode(world: &World, rng: &mut Rng) -> Result<Episode> {
    let c = &world.config;
    c.validate()?;
    let n = c.n_agents;
    let scene_codes = viewpoints(rng, c.scene_dim, c.distinct_views());

    let mut labels;
    let mut views: Vec<Vec<f64>>;
    let mut degraded = vec![false; n];
    let mut gt_support = vec![Vec::new(); n];

    match c.case {
        Case::Srms => {
            labels = distinct_labels(rng, c.n_classes, n);
            views = (0..n).map(|i| world.clean_view(labels[i], &scene_codes[i], rng)).collect();
            let requester = rng.below(n);
            if rng.bernoulli(c.degrade_prob) {
                degraded[requester] = true;
                let mut supporter = rng.below(n - 1);
                if supporter >= requester {
                    supporter += 1;
                }
                views[supporter] = views[requester].clone();
                labels[supporter] = labels[requester];
                gt_support[requester].push(supporter);
            }
        }
        Case::Mrms => {
            labels = distinct_labels(rng, c.n_classes, n);
            views = (0..n).map(|i| world.clean_view(labels[i], &scene_codes[i], rng)).collect();
            degraded = capped_degradation(rng, n, c.degrade_prob);
            let mut clean: Vec<usize> = (0..n).filter(|&i| !degraded[i]).collect();
            rng.shuffle(&mut clean);
            let mut free = clean.into_iter();
            for r in 0..n {
                if degraded[r] {
                    let s = free.next().expect("degradation capped at half");
                    views[s] = views[r].clone();
                    labels[s] = labels[r];
                    gt_support[r].push(s);
                }
            }
        }
        Case::Mrmps => {
            labels = distinct_labels(rng, c.n_classes, n);
            degraded = capped_degradation(rng, n, c.degrade_prob);
            let requesters: Vec<usize> = (0..n).filter(|&i| degraded[i]).collect();
            let app = c.appearance_dim();
            // Requesters' views first; supporters mix them in.
            let mut base: Vec<Vec<f64>> = vec![Vec::new(); n];
            for &r in &requesters {
                base[r] = world.clean_view(labels[r], &scene_codes[r], rng);
            }
            for j in 0..n {
                if degraded[j] {
                    continue;
                }
                if requesters.is_empty() {
                    base[j] = world.clean_view(labels[j], &scene_codes[j], rng);
                    continue;
                }
                let r = requesters[rng.below(requesters.len())];
                let o = c.overlap_frac.unwrap_or_else(|| rng.uniform());
                let own = world.clean_view(labels[j], &scene_codes[j], rng);
                let mut mixed: Vec<f64> = Vec::with_capacity(c.obs_dim);
                for d in 0..c.obs_dim {
                    let target = if d < app {
                        world.prototypes[labels[r]][d]
                    } else {
                        scene_codes[r][d - app]
                    };
                    mixed.push(o * target + (1.0 - o) * own[d]);
                }
                base[j] = mixed;
                if o > OVERLAP_THRESHOLD {
                    labels[j] = labels[r];
                    gt_support[r].push(j);
                }
            }
            views = base;
        }
        Case::Triplet => {
            let k = n / 3;
            let classes = distinct_labels(rng, c.n_classes, k);
            let mut seats: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut seats);
            labels = vec![0; n];
            views = vec![Vec::new(); n];
            for t in 0..k {
                let members = &seats[3 * t..3 * t + 3];
                let object = &scene_codes[t];
                for &m in members {
                    labels[m] = classes[t];
                    views[m] = world.clean_view(classes[t], object, rng);
                }
                if rng.bernoulli(c.degrade_prob) {
                    let victim = members[rng.below(3)];
                    degraded[victim] = true;
                    gt_support[victim] = members.iter().copied().filter(|&m| m != victim).collect();
                    gt_support[victim].sort_unstable();
                }
            }
        }
    }

    let observations: Vec<Vec<f64>> = views
        .iter()
        .enumerate()
        .map(|(i, v)| if degraded[i] { world.degrade(v, rng) } else { v.clone() })
        .collect();
    let needs_comm = degraded.clone();
    for g in &mut gt_support {
        g.sort_unstable();
    }
    Ok(Episode {
        observations,
        clean_observations: views,
        labels,
        degraded,
        needs_comm,
        gt_support,
    })
}

/// A generated dataset with its 80/10/10 split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub world: World,
    pub seed: u64,
    pub train: Vec<Episode>,
    pub val: Vec<Episode>,
    pub test: Vec<Episode>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_json(&self, w: impl Write) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn read_json(r: impl Read) -> Result<Self> {
        let ds: Dataset = serde_json::from_reader(r)?;
        ds.world.config.validate()?;
        Ok(ds)
    }
}

/// Split sizes for `n` episodes: `⌊0.8n⌋`, `⌊0.1n⌋`, remainder.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = n * 8 / 10;
    let val = n / 10;
    (train, val, n - train - val)
}

/// Deterministic dataset: episode `i` is the `i`-th draw from `Rng::new(seed)`.
pub fn generate_dataset(world: &World, n_episodes: usize, seed: u64) -> Result<Dataset> {
    if n_episodes < 10 {
        return Err(Error::invalid(format!("need at least 10 episodes, got {n_episodes}")));
    }
    let mut rng = Rng::new(seed);
    let mut episodes = (0..n_episodes)
        .map(|_| generate_episode(world, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let (n_train, n_val, _) = split_sizes(n_episodes);
    let test = episodes.split_off(n_train + n_val);
    let val = episodes.split_off(n_train);
    Ok(Dataset {
        world: world.clone(),
        seed,
        train: episodes,
        val,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(case: Case) -> World {
        World::new(WorldConfig::new(case), &mut Rng::new(0)).unwrap()
    }

    fn check_invariants(case: Case, ep: &Episode) {
        let n = ep.n_agents();
        for i in 0..n {
            assert!(!ep.degraded[i] || ep.needs_comm[i]);
            if ep.needs_comm[i] && case != Case::Mrmps {
                assert!(!ep.gt_support[i].is_empty());
            }
            if !ep.needs_comm[i] {
                assert!(ep.gt_support[i].is_empty());
            }
            assert!(!ep.gt_support[i].contains(&i));
            assert!(ep.labels[i] < 10);
        }
    }

    #[test]
    fn prototypes_are_unit_and_separated() {
        let w = world(Case::Srms);
        for (a, p) in w.prototypes.iter().enumerate() {
            let norm: f64 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            assert!(p[24..].iter().all(|&v| v == 0.0));
            for q in &w.prototypes[a + 1..] {
                assert!(distance(p, q) > 0.1);
            }
        }
    }

    #[test]
    fn no_degradation_means_no_support() {
        for case in [Case::Srms, Case::Mrms, Case::Mrmps, Case::Triplet] {
            let mut cfg = WorldConfig::new(case);
            cfg.degrade_prob = 0.0;
            let w = World::new(cfg, &mut Rng::new(1)).unwrap();
            let mut rng = Rng::new(2);
            for _ in 0..50 {
                let ep = generate_episode(&w, &mut rng).unwrap();
                assert!(ep.needs_comm.iter().all(|b| !b));
                assert!(ep.gt_support.iter().all(Vec::is_empty));
                assert_eq!(ep.observations, ep.clean_observations);
            }
        }
    }

    #[test]
    fn srms_forced_degradation() {
        let mut cfg = WorldConfig::new(Case::Srms);
        cfg.degrade_prob = 1.0;
        let w = World::new(cfg, &mut Rng::new(1)).unwrap();
        let mut rng = Rng::new(3);
        for _ in 0..200 {
            let ep = generate_episode(&w, &mut rng).unwrap();
            let degraded: Vec<usize> = (0..5).filter(|&i| ep.degraded[i]).collect();
            assert_eq!(degraded.len(), 1);
            let r = degraded[0];
            assert_eq!(ep.gt_support[r].len(), 1);
            let s = ep.gt_support[r][0];
            assert_eq!(ep.observations[s], ep.clean_observations[r]);
            assert_eq!(ep.labels[s], ep.labels[r]);
            // Scene block survives degradation.
            assert_eq!(ep.observations[r][24..], ep.observations[s][24..]);
        }
    }

    #[test]
    fn srms_degraded_fraction() {
        let w = world(Case::Srms);
        let mut rng = Rng::new(4);
        let hits = (0..10_000)
            .filter(|_| generate_episode(&w, &mut rng).unwrap().degraded.iter().any(|&b| b))
            .count();
        let frac = hits as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn invariants_hold_for_every_case() {
        for case in [Case::Srms, Case::Mrms, Case::Mrmps, Case::Triplet] {
            let w = world(case);
            let mut rng = Rng::new(5);
            for _ in 0..2_500 {
                check_invariants(case, &generate_episode(&w, &mut rng).unwrap());
            }
        }
    }

    #[test]
    fn mrms_supporters_are_distinct_and_clean() {
        let mut cfg = WorldConfig::new(Case::Mrms);
        cfg.degrade_prob = 0.9;
        let w = World::new(cfg, &mut Rng::new(1)).unwrap();
        let mut rng = Rng::new(6);
        for _ in 0..500 {
            let ep = generate_episode(&w, &mut rng).unwrap();
            let mut used: Vec<usize> = ep.gt_support.iter().flatten().copied().collect();
            let total = used.len();
            used.sort_unstable();
            used.dedup();
            assert_eq!(used.len(), total);
            assert!(used.iter().all(|&s| !ep.degraded[s]));
            assert!(ep.degraded.iter().filter(|&&b| b).count() <= 2);
        }
    }

    #[test]
    fn triplet_support_is_the_two_peers() {
        let mut cfg = WorldConfig::new(Case::Triplet);
        cfg.degrade_prob = 1.0;
        let w = World::new(cfg, &mut Rng::new(1)).unwrap();
        let ep = generate_episode(&w, &mut Rng::new(7)).unwrap();
        assert_eq!(ep.degraded.iter().filter(|&&b| b).count(), 3);
        for i in 0..9 {
            if ep.degraded[i] {
                assert_eq!(ep.gt_support[i].len(), 2);
                for &s in &ep.gt_support[i] {
                    assert_eq!(ep.labels[s], ep.labels[i]);
                }
            }
        }
    }

    #[test]
    fn mrmps_support_requires_majority_overlap() {
        let mut cfg = WorldConfig::new(Case::Mrmps);
        cfg.overlap_frac = Some(0.4);
        let w = World::new(cfg, &mut Rng::new(1)).unwrap();
        let mut rng = Rng::new(8);
        for _ in 0..100 {
            let ep = generate_episode(&w, &mut rng).unwrap();
            assert!(ep.gt_support.iter().all(Vec::is_empty));
        }
    }

    #[test]
    fn invalid_configs_error() {
        let mut cfg = WorldConfig::new(Case::Triplet);
        cfg.n_agents = 8;
        assert!(World::new(cfg, &mut Rng::new(0)).is_err());
        let mut cfg = WorldConfig::new(Case::Srms);
        cfg.n_agents = 1;
        assert!(World::new(cfg, &mut Rng::new(0)).is_err());
        let mut cfg = WorldConfig::new(Case::Srms);
        cfg.overlap_frac = Some(0.3);
        assert!(World::new(cfg, &mut Rng::new(0)).is_err());
        let mut cfg = WorldConfig::new(Case::Mrms);
        cfg.degrade_prob = 1.5;
        assert!(World::new(cfg, &mut Rng::new(0)).is_err());
        let mut cfg = WorldConfig::new(Case::Srms);
        cfg.n_agents = 9;
        assert!(World::new(cfg, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn viewpoints_are_distinct_one_hot_codes() {
        let mut cfg = WorldConfig::new(Case::Srms);
        cfg.perturb_sigma = 0.0;
        cfg.degrade_prob = 0.0;
        let w = World::new(cfg, &mut Rng::new(1)).unwrap();
        let mut rng = Rng::new(2);
        for _ in 0..100 {
            let ep = generate_episode(&w, &mut rng).unwrap();
            let mut slots: Vec<usize> = ep
                .observations
                .iter()
                .map(|o| {
                    let scene = &o[24..];
                    assert_eq!(scene.iter().sum::<f64>(), 1.0);
                    scene.iter().position(|&v| v == 1.0).unwrap()
                })
                .collect();
            slots.sort_unstable();
            slots.dedup();
            assert_eq!(slots.len(), 5);
        }
    }

    #[test]
    fn dataset_is_deterministic_and_split() {
        let w = world(Case::Srms);
        let a = generate_dataset(&w, 10, 9).unwrap();
        let b = generate_dataset(&w, 10, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.val.len(), a.test.len()), (8, 1, 1));
        assert!(generate_dataset(&w, 9, 9).is_err());
        assert_eq!(split_sizes(100), (80, 10, 10));
    }

    #[test]
    fn dataset_json_round_trip() {
        let w = world(Case::Mrmps);
        let ds = generate_dataset(&w, 20, 3).unwrap();
        let mut buf = Vec::new();
        ds.write_json(&mut buf).unwrap();
        assert_eq!(Dataset::read_json(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn label_histogram_is_uniform() {
        let w = world(Case::Srms);
        let ds = generate_dataset(&w, 10_000, 10).unwrap();
        let mut counts = [0usize; 10];
        let mut total = 0usize;
        for ep in ds.train.iter().chain(&ds.val).chain(&ds.test) {
            // One label per episode keeps draws independent.
            counts[ep.labels[0]] += 1;
            total += 1;
        }
        let p = 0.1;
        let sd = (total as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - total as f64 * p).abs() < 3.0 * sd, "{counts:?}");
        }
    }
}
