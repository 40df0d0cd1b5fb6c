use when2com::densemath::Rng;
use when2com::evalcli::{evaluate, evaluate_episodes, Experiment, Inputs};
use when2com::neuralnet::{adam_step, argmax, batch_loss_and_grad, forward_with, AdamConfig, AdamState, Fusion, PipelineDims, PipelineParams};
use when2com::scenarios::{generate_dataset, generate_episode, Case, Episode, World, WorldConfig};
use when2com::Policy;

fn single_agent(obs: Vec<f64>, label: usize) -> Episode {
    Episode {
        observations: vec![obs.clone()],
        clean_observations: vec![obs],
        labels: vec![label],
        degraded: vec![false],
        needs_comm: vec![false],
        gt_support: vec![vec![]],
    }
}

/// Plain minibatch Adam over single-agent episodes.
fn fit(theta: &mut PipelineParams, data: &[Episode], steps: usize, rng: &mut Rng) {
    let mut state = AdamState::for_params(theta);
    let cfg = AdamConfig::default();
    for _ in 0..steps {
        let batch: Vec<&Episode> = (0..8).map(|_| &data[rng.below(data.len())]).collect();
        let (_, g) = batch_loss_and_grad(theta, &batch, Policy::NoCom, rng).unwrap();
        adam_step(theta, &g, &mut state, &cfg);
    }
}

fn accuracy(theta: &PipelineParams, data: &[Episode]) -> f64 {
    let hits = data
        .iter()
        .filter(|e| {
            let out = forward_with(theta, &e.observations, &Fusion::Fixed(when2com::densemath::Matrix::identity(1))).unwrap();
            argmax(&out.logits[0]) == e.labels[0]
        })
        .count();
    hits as f64 / data.len() as f64
}

#[test]
fn single_agent_separable_task_is_learned() {
    let dims = PipelineDims {
        obs_dim: 8,
        n_classes: 3,
        ..PipelineDims::default()
    };
    let mut rng = Rng::new(1);
    let w: Vec<Vec<f64>> = (0..3).map(|_| (0..8).map(|_| rng.normal()).collect()).collect();
    let data: Vec<Episode> = (0..400)
        .map(|_| {
            let x: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
            let scores: Vec<f64> = w.iter().map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
            single_agent(x, argmax(&scores))
        })
        .collect();
    let mut theta = PipelineParams::init(dims, &mut rng).unwrap();
    fit(&mut theta, &data, 2000, &mut rng);
    let acc = accuracy(&theta, &data);
    assert!(acc >= 0.99, "{acc}");
}

#[test]
fn probe_on_degraded_views_is_at_chance() {
    let mut cfg = WorldConfig::new(Case::Srms);
    cfg.degrade_prob = 1.0;
    let world = World::new(cfg, &mut Rng::new(0)).unwrap();
    let mut rng = Rng::new(2);
    let mut degraded = Vec::new();
    while degraded.len() < 6000 {
        let ep = generate_episode(&world, &mut rng).unwrap();
        for i in 0..5 {
            if ep.degraded[i] {
                degraded.push(single_agent(ep.observations[i].clone(), ep.labels[i]));
            }
        }
    }
    let (train, test) = degraded.split_at(5000);
    let mut theta = PipelineParams::init(PipelineDims::default(), &mut rng).unwrap();
    fit(&mut theta, train, 1000, &mut rng);
    let acc = accuracy(&theta, test);
    assert!((acc - 0.1).abs() < 0.05, "{acc}");
}

#[test]
fn clean_views_are_nearest_to_their_prototype() {
    let world = World::new(WorldConfig::new(Case::Srms), &mut Rng::new(0)).unwrap();
    let mut rng = Rng::new(3);
    let (mut hits, mut total) = (0usize, 0usize);
    for _ in 0..2000 {
        let ep = generate_episode(&world, &mut rng).unwrap();
        for i in 0..5 {
            let x = &ep.clean_observations[i];
            let d = |p: &Vec<f64>| x.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let nearest = (0..10)
                .min_by(|&a, &b| d(&world.prototypes[a]).total_cmp(&d(&world.prototypes[b])))
                .unwrap();
            hits += usize::from(nearest == ep.labels[i]);
            total += 1;
        }
    }
    assert!(hits as f64 / total as f64 > 0.99);
}

#[test]
fn trained_model_stays_silent_on_clean_frames() {
    let exp = Experiment::new(Case::Srms);
    let ds = exp.dataset(0).unwrap();
    let (theta, log) = exp.train(&ds, 0).unwrap();
    assert!(log.evals.last().unwrap().val_loss < log.evals[0].val_loss);

    let mut clean_cfg = exp.world.clone();
    clean_cfg.degrade_prob = 0.0;
    let clean_world = World::new(clean_cfg, &mut Rng::new(exp.world_seed)).unwrap();
    assert_eq!(clean_world.prototypes, ds.world.prototypes);
    let clean = generate_dataset(&clean_world, 2000, 77).unwrap();
    let delta = exp.default_delta();
    let ours = evaluate(Policy::When2com, &theta, &clean, delta, 0).unwrap();
    let nocom = evaluate(Policy::NoCom, &theta, &clean, delta, 0).unwrap();
    assert!((ours.acc_all - nocom.acc_all).abs() <= 0.02, "{} vs {}", ours.acc_all, nocom.acc_all);

    let e = evaluate_episodes(Policy::When2com, &theta, Case::Srms, &clean.test, delta, 0, Inputs::Observed).unwrap();
    let silent_majority = clean
        .test
        .iter()
        .enumerate()
        .filter(|(f, _)| {
            let links = e
                .trace
                .iter()
                .filter(|r| r.frame == *f as u64 && r.kind == when2com::simnet::MessageKind::FeatureTransfer)
                .count();
            links * 2 < 5
        })
        .count();
    assert!(silent_majority * 2 > clean.test.len());
}
