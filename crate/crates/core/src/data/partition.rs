use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::ClientId;

/// Assignment of sample indices to clients.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    pub assignments: BTreeMap<ClientId, Vec<usize>>,
    /// Drawn Dirichlet proportions, one row per label present.
    pub proportions: Vec<Vec<f64>>,
    pub alpha: f64,
    pub seed: u64,
}

impl PartitionPlan {
    pub fn sizes(&self) -> BTreeMap<ClientId, usize> {
        self.assignments.iter().map(|(&c, v)| (c, v.len())).collect()
    }
}

/// Label-skewed split: each label's samples are divided across clients by a
/// Dirichlet(alpha) draw, rounded with largest remainders, then any empty
/// client takes one sample from the currently largest one.
pub fn dirichlet_partition(
    labels: &[usize],
    n_clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<PartitionPlan> {
    if n_clients < 2 {
        return Err(Error::InvalidValue(format!(
            "need at least 2 clients, got {n_clients}"
        )));
    }
    if n_clients > labels.len() {
        return Err(Error::InfeasiblePartition {
            samples: labels.len(),
            clients: n_clients,
        });
    }
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::InvalidValue(format!("dirichlet concentration {alpha}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_label = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        by_label[y].push(i);
    }

    let mut assignments: BTreeMap<ClientId, Vec<usize>> =
        (0..n_clients).map(|c| (c, Vec::new())).collect();
    let mut proportions = Vec::new();
    for mut indices in by_label.into_iter().filter(|v| !v.is_empty()) {
        indices.shuffle(&mut rng);
        let mut draw: Vec<f64> = (0..n_clients).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = draw.iter().sum();
        if total > 0.0 && total.is_finite() {
            draw.iter_mut().for_each(|p| *p /= total);
        } else {
            // every gamma draw underflowed; give the label to one client
            draw = vec![0.0; n_clients];
            draw[indices[0] % n_clients] = 1.0;
        }
        let counts = largest_remainder(&draw, indices.len());
        let mut cursor = 0;
        for (client, count) in counts.into_iter().enumerate() {
            assignments
                .get_mut(&client)
                .expect("client exists")
                .extend_from_slice(&indices[cursor..cursor + count]);
            cursor += count;
        }
        proportions.push(draw);
    }

    for empty in 0..n_clients {
        if !assignments[&empty].is_empty() {
            continue;
        }
        let donor = assignments
            .iter()
            .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(a.0)))
            .map(|(&c, _)| c)
            .expect("non-empty map");
        let moved = assignments.get_mut(&donor).and_then(Vec::pop).expect("donor has samples");
        assignments.get_mut(&empty).expect("client exists").push(moved);
    }
    for v in assignments.values_mut() {
        v.sort_unstable();
    }

    Ok(PartitionPlan {
        assignments,
        proportions,
        alpha,
        seed,
    })
}

/// Integer counts summing to `total`: floors first, then the leftover units
/// go to the largest fractional parts (lowest index on ties).
fn largest_remainder(shares: &[f64], total: usize) -> Vec<usize> {
    let exact: Vec<f64> = shares.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}
