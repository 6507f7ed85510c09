//! Random small models for property tests and the oracle-equivalence suite.

use rand::Rng;

use super::{DecPomdp, ModelParts};

#[derive(Debug, Clone, Copy)]
pub struct RandomModelSpec {
    pub agents: usize,
    pub max_states: usize,
    pub max_actions: usize,
    pub max_observations: usize,
    pub reward_bound: f64,
    /// Probability that any single table entry is forced to zero before
    /// normalization, to exercise zero-weight branches.
    pub sparsity: f64,
    /// Use the maximum size for every set instead of drawing it.
    pub full_size: bool,
}

impl Default for RandomModelSpec {
    fn default() -> Self {
        RandomModelSpec {
            agents: 2,
            max_states: 3,
            max_actions: 2,
            max_observations: 2,
            reward_bound: 5.0,
            sparsity: 0.25,
            full_size: false,
        }
    }
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// A random distribution over `n` outcomes; never all-zero.
fn random_row<R: Rng>(rng: &mut R, n: usize, sparsity: f64) -> Vec<f64> {
    let mut row: Vec<f64> =
        (0..n).map(|_| if rng.random_bool(sparsity) { 0.0 } else { rng.random::<f64>() + 1e-3 }).collect();
    if row.iter().all(|&x| x == 0.0) {
        row[rng.random_range(0..n)] = 1.0;
    }
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= sum);
    row
}

/// Draws a model with every set size chosen uniformly in `1..=max`, or at
/// the maximum with `full_size`.
pub fn random_model<R: Rng>(rng: &mut R, spec: &RandomModelSpec) -> DecPomdp {
    let mut size = |max: usize| if spec.full_size { max } else { rng.random_range(1..=max) };
    let n_states = size(spec.max_states);
    let action_counts: Vec<usize> = (0..spec.agents).map(|_| size(spec.max_actions)).collect();
    let observation_counts: Vec<usize> = (0..spec.agents).map(|_| size(spec.max_observations)).collect();
    let actions: Vec<Vec<String>> =
        action_counts.iter().enumerate().map(|(i, &n)| names(&format!("a{i}_"), n)).collect();
    let observations: Vec<Vec<String>> =
        observation_counts.iter().enumerate().map(|(i, &n)| names(&format!("o{i}_"), n)).collect();
    let n_ja: usize = actions.iter().map(Vec::len).product();
    let n_jo: usize = observations.iter().map(Vec::len).product();

    let mut transition = Vec::with_capacity(n_states * n_ja * n_states);
    for _ in 0..n_states * n_ja {
        transition.extend(random_row(rng, n_states, spec.sparsity));
    }
    let mut observation = Vec::with_capacity(n_states * n_ja * n_jo);
    for _ in 0..n_states * n_ja {
        observation.extend(random_row(rng, n_jo, spec.sparsity));
    }
    let reward = (0..n_states * n_ja).map(|_| rng.random_range(-spec.reward_bound..=spec.reward_bound)).collect();
    let start = random_row(rng, n_states, spec.sparsity);

    DecPomdp::new(ModelParts {
        states: names("s", n_states),
        actions,
        observations,
        transition,
        observation,
        reward,
        start,
    })
    .expect("random rows are normalized")
}
