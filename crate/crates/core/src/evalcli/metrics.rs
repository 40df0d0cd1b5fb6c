use crate::densemath::Matrix;
use crate::error::{Error, Result};
use crate::neuralnet::pipeline::best_peer;
use crate::scenarios::Episode;

/// Agent `i` communicates iff its row keeps a nonzero off-diagonal weight.
pub fn decisions_from_rows(rows: &Matrix) -> Vec<bool> {
    (0..rows.rows())
        .map(|i| rows.row(i).iter().enumerate().any(|(j, &w)| j != i && w != 0.0))
        .collect()
}

/// Highest-weight surviving supporter of agent `i`, lowest index on ties.
pub fn top_supporter(row: &[f64], i: usize) -> Option<usize> {
    best_peer(row, i).filter(|&j| row[j] != 0.0)
}

/// Fraction of (episode, agent) pairs whose decision matches `needs_comm`.
pub fn when2com_accuracy(episodes: &[Episode], decisions: &[Vec<bool>]) -> Result<f64> {
    if episodes.len() != decisions.len() {
        return Err(Error::shape(
            format!("{} episodes", episodes.len()),
            format!("{} decision rows", decisions.len()),
        ));
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for (ep, d) in episodes.iter().zip(decisions) {
        if d.len() != ep.n_agents() {
            return Err(Error::shape(format!("{} agents", ep.n_agents()), format!("{} decisions", d.len())));
        }
        hits += ep.needs_comm.iter().zip(d).filter(|(a, b)| a == b).count();
        total += d.len();
    }
    if total == 0 {
        return Err(Error::Empty("agent decisions"));
    }
    Ok(hits as f64 / total as f64)
}

/// Among agents that need help and communicate, the fraction whose top
/// supporter is in `gt_support`. `None` when no agent qualifies.
pub fn grouping_accuracy(episodes: &[Episode], rows: &[Matrix]) -> Result<Option<f64>> {
    grouping_by(episodes, rows, |ep, row, i| {
        let j = top_supporter(row, i).expect("qualifying agents communicate");
        ep.gt_support[i].contains(&j)
    })
}

/// Set-valued variant: every surviving off-diagonal link lies in `gt_support`.
pub fn grouping_set_accuracy(episodes: &[Episode], rows: &[Matrix]) -> Result<Option<f64>> {
    grouping_by(episodes, rows, |ep, row, i| {
        row.iter()
            .enumerate()
            .all(|(j, &w)| j == i || w == 0.0 || ep.gt_support[i].contains(&j))
    })
}

fn grouping_by(
    episodes: &[Episode],
    rows: &[Matrix],
    correct: impl Fn(&Episode, &[f64], usize) -> bool,
) -> Result<Option<f64>> {
    if episodes.len() != rows.len() {
        return Err(Error::shape(
            format!("{} episodes", episodes.len()),
            format!("{} row matrices", rows.len()),
        ));
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for (ep, m) in episodes.iter().zip(rows) {
        let n = ep.n_agents();
        if m.shape() != (n, n) {
            return Err(Error::shape(format!("rows {:?}", m.shape()), format!("{n}x{n}")));
        }
        for i in 0..n {
            let row = m.row(i);
            if !ep.needs_comm[i] || top_supporter(row, i).is_none() {
                continue;
            }
            total += 1;
            hits += usize::from(correct(ep, row, i));
        }
    }
    Ok((total > 0).then(|| hits as f64 / total as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densemath::Rng;
    use crate::scenarios::{generate_episode, Case, World, WorldConfig};

    fn srms(n: usize, degrade_prob: f64, seed: u64) -> Vec<Episode> {
        let mut cfg = WorldConfig::new(Case::Srms);
        cfg.degrade_prob = degrade_prob;
        let world = World::new(cfg, &mut Rng::new(0)).unwrap();
        let mut rng = Rng::new(seed);
        (0..n).map(|_| generate_episode(&world, &mut rng).unwrap()).collect()
    }

    #[test]
    fn all_negative_and_all_wrong() {
        let eps = srms(50, 0.0, 1);
        let silent: Vec<Vec<bool>> = eps.iter().map(|e| vec![false; e.n_agents()]).collect();
        assert_eq!(when2com_accuracy(&eps, &silent).unwrap(), 1.0);
        let eps = srms(50, 0.5, 2);
        let flipped: Vec<Vec<bool>> = eps.iter().map(|e| e.needs_comm.iter().map(|b| !b).collect()).collect();
        assert_eq!(when2com_accuracy(&eps, &flipped).unwrap(), 0.0);
    }

    #[test]
    fn coin_flip_decisions_score_half() {
        let eps = srms(2000, 0.5, 3);
        let mut rng = Rng::new(4);
        let d: Vec<Vec<bool>> = eps
            .iter()
            .map(|e| (0..e.n_agents()).map(|_| rng.bernoulli(0.5)).collect())
            .collect();
        let acc = when2com_accuracy(&eps, &d).unwrap();
        assert!((acc - 0.5).abs() < 0.02, "{acc}");
    }

    #[test]
    fn length_mismatch_errors() {
        let eps = srms(3, 0.5, 5);
        assert!(when2com_accuracy(&eps, &[]).is_err());
        assert!(grouping_accuracy(&eps, &[]).is_err());
    }

    #[test]
    fn uniform_random_supporter_scores_a_quarter() {
        let eps = srms(10000, 1.0, 6);
        let mut rng = Rng::new(7);
        let rows: Vec<Matrix> = eps
            .iter()
            .map(|e| {
                let mut m = Matrix::identity(5);
                for i in 0..5 {
                    if e.needs_comm[i] {
                        m.set(i, i, 0.0);
                        m.set(i, crate::neuralnet::random_peer(5, i, &mut rng), 1.0);
                    }
                }
                m
            })
            .collect();
        let g = grouping_accuracy(&eps, &rows).unwrap().unwrap();
        assert!((g - 0.25).abs() < 0.02, "{g}");
    }

    #[test]
    fn perfect_selection_and_empty_denominator() {
        let eps = srms(200, 1.0, 8);
        let perfect: Vec<Matrix> = eps
            .iter()
            .map(|e| {
                let mut m = Matrix::identity(5);
                for i in 0..5 {
                    if let Some(&j) = e.gt_support[i].first() {
                        m.set(i, j, 0.6);
                        m.set(i, i, 0.4);
                    }
                }
                m
            })
            .collect();
        assert_eq!(grouping_accuracy(&eps, &perfect).unwrap(), Some(1.0));
        assert_eq!(grouping_set_accuracy(&eps, &perfect).unwrap(), Some(1.0));
        let silent: Vec<Matrix> = eps.iter().map(|_| Matrix::identity(5)).collect();
        assert_eq!(grouping_accuracy(&eps, &silent).unwrap(), None);
    }

    #[test]
    fn set_variant_is_stricter() {
        let eps = srms(100, 1.0, 9);
        let rows: Vec<Matrix> = eps.iter().map(|_| crate::neuralnet::train::uniform_rows(5)).collect();
        let top = grouping_accuracy(&eps, &rows).unwrap().unwrap();
        let set = grouping_set_accuracy(&eps, &rows).unwrap().unwrap();
        assert_eq!(set, 0.0);
        assert!(top >= set);
    }
}
