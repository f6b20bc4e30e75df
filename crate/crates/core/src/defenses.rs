//! Aggregation rules. Each consumes one round's client updates and produces
//! the global update.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kde;
use crate::trust::TrustLedger;
use crate::vector::{check_len, cosine_similarity, norm, squared_distance, weighted_mean, UpdateVector};
use crate::ClientId;

/// One round's uploads plus the side information aggregators may use.
#[derive(Debug, Clone, Copy)]
pub struct AggregationContext<'a> {
    pub updates: &'a BTreeMap<ClientId, UpdateVector>,
    pub dataset_sizes: &'a BTreeMap<ClientId, usize>,
    /// Attackers the rule is told to tolerate (`c` for Krum, `k` for Trim-Mean).
    pub assumed_attackers: usize,
}

impl AggregationContext<'_> {
    fn ids(&self) -> Vec<ClientId> {
        self.updates.keys().copied().collect()
    }

    fn vectors(&self) -> Vec<&[f64]> {
        self.updates.values().map(|u| u.as_slice()).collect()
    }

    fn dim(&self) -> Result<usize> {
        let dim = self
            .updates
            .values()
            .next()
            .ok_or(Error::EmptyAggregate)?
            .len();
        for u in self.updates.values() {
            check_len(dim, u.len())?;
        }
        Ok(dim)
    }

    fn size_of(&self, id: ClientId) -> Result<f64> {
        match self.dataset_sizes.get(&id) {
            Some(&n) if n > 0 => Ok(n as f64),
            _ => Err(Error::InvalidValue(format!("client {id} has no dataset size"))),
        }
    }

    /// Dataset-size weighted mean over `ids`.
    fn weighted_over(&self, ids: &[ClientId]) -> Result<UpdateVector> {
        let vs: Vec<&[f64]> = ids.iter().map(|id| self.updates[id].as_slice()).collect();
        let ws = ids.iter().map(|&id| self.size_of(id)).collect::<Result<Vec<f64>>>()?;
        weighted_mean(&vs, &ws)
    }
}

/// Dataset-size weighted average of every update.
pub fn fed_avg(ctx: &AggregationContext) -> Result<UpdateVector> {
    ctx.dim()?;
    ctx.weighted_over(&ctx.ids())
}

/// Krum score of each vector: sum of squared distances to its `n - c - 2`
/// nearest other vectors.
pub fn krum_scores(vectors: &[&[f64]], c: usize) -> Result<Vec<f64>> {
    let n = vectors.len();
    if n < c + 3 {
        return Err(Error::InsufficientClients { needed: c + 3, got: n });
    }
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = squared_distance(vectors[i], vectors[j])?;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let neighbors = n - c - 2;
    Ok((0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[i][j]).collect();
            row.sort_by(f64::total_cmp);
            row[..neighbors].iter().sum()
        })
        .collect())
}

/// Position of the minimal Krum score; ties go to the earliest position.
pub fn krum_index(vectors: &[&[f64]], c: usize) -> Result<usize> {
    let scores = krum_scores(vectors, c)?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Single-update Krum selection. Returns the chosen update and its client.
pub fn krum_select(ctx: &AggregationContext) -> Result<(UpdateVector, ClientId)> {
    ctx.dim()?;
    let ids = ctx.ids();
    let pick = krum_index(&ctx.vectors(), ctx.assumed_attackers)?;
    Ok((ctx.updates[&ids[pick]].clone(), ids[pick]))
}

fn coordinate_wise(ctx: &AggregationContext, reduce: impl Fn(&mut [f64]) -> f64) -> Result<UpdateVector> {
    let dim = ctx.dim()?;
    let vs = ctx.vectors();
    let mut column = vec![0.0; vs.len()];
    let out = (0..dim)
        .map(|j| {
            for (slot, v) in column.iter_mut().zip(&vs) {
                *slot = v[j];
            }
            column.sort_by(f64::total_cmp);
            reduce(&mut column)
        })
        .collect();
    Ok(UpdateVector::from_vec_unchecked(out))
}

/// Per coordinate: drop the `k` smallest and `k` largest values, average the rest.
pub fn trim_mean(ctx: &AggregationContext) -> Result<UpdateVector> {
    let n = ctx.updates.len();
    let k = ctx.assumed_attackers;
    if n == 0 {
        return Err(Error::EmptyAggregate);
    }
    if n <= 2 * k {
        return Err(Error::InsufficientClients { needed: 2 * k + 1, got: n });
    }
    // clamping keeps rounding from leaving the kept range, so equal values
    // come back unchanged
    coordinate_wise(ctx, |sorted| {
        let kept = &sorted[k..n - k];
        let avg = kept.iter().sum::<f64>() / kept.len() as f64;
        avg.clamp(kept[0], kept[kept.len() - 1])
    })
}

/// Per-coordinate median; even counts average the two middle values.
pub fn coordinate_median(ctx: &AggregationContext) -> Result<UpdateVector> {
    let n = ctx.updates.len();
    coordinate_wise(ctx, |sorted| {
        if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        }
    })
}

#[derive(Debug, Clone)]
pub struct FlTrustOutcome {
    pub update: UpdateVector,
    /// Clients with a strictly positive trust weight.
    pub accepted: Vec<ClientId>,
}

/// Cosine-trust weighting against the server's own update `server_update`.
///
/// Each update is rescaled to the server update's norm and weighted by
/// `max(0, cos)`. If no client earns weight the result is the zero vector.
pub fn fltrust_aggregate(ctx: &AggregationContext, server_update: Option<&UpdateVector>) -> Result<FlTrustOutcome> {
    let server = server_update.ok_or_else(|| Error::Config("FLTrust requires a root dataset".into()))?;
    let dim = ctx.dim()?;
    check_len(dim, server.len())?;
    let server_norm = norm(server);
    let mut acc = vec![0.0; dim];
    let mut total = 0.0;
    let mut accepted = Vec::new();
    for (&id, u) in ctx.updates {
        let weight = match cosine_similarity(u, server) {
            Ok(cos) => cos.max(0.0),
            Err(Error::ZeroNorm) => 0.0,
            Err(e) => return Err(e),
        };
        if weight == 0.0 {
            continue;
        }
        let scale = weight * server_norm / u.norm();
        for (a, x) in acc.iter_mut().zip(u.iter()) {
            *a += scale * x;
        }
        total += weight;
        accepted.push(id);
    }
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
    }
    Ok(FlTrustOutcome {
        update: UpdateVector::from_vec_unchecked(acc),
        accepted,
    })
}

#[derive(Debug, Clone)]
pub struct KetsOutcome {
    pub update: UpdateVector,
    pub honest: Vec<ClientId>,
    pub penalties: BTreeMap<ClientId, f64>,
}

/// Trust update for every submitting client, density segmentation of the
/// resulting scores, then dataset-size weighted averaging over the honest
/// segment. Clients at zero trust are never aggregated.
pub fn kets_aggregate(
    ctx: &AggregationContext,
    ledger: &mut TrustLedger,
    beta: f64,
    quantile: f64,
) -> Result<KetsOutcome> {
    ctx.dim()?;
    let mut penalties = BTreeMap::new();
    for (&id, u) in ctx.updates {
        penalties.insert(id, ledger.observe(id, u, beta)?);
    }
    let sampled = ctx.ids();
    let honest: Vec<ClientId> = kde::segment_honest(&ledger.scores(), &sampled, quantile)?
        .into_iter()
        .filter(|&id| !ledger.is_excluded(id))
        .collect();
    if honest.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    Ok(KetsOutcome {
        update: ctx.weighted_over(&honest)?,
        honest,
        penalties,
    })
}

#[derive(Debug, Clone)]
pub struct KetsV2Outcome {
    pub kept: Vec<ClientId>,
    pub update: UpdateVector,
    pub reference: UpdateVector,
}

/// Direction filter against a momentum reference of past global updates.
///
/// Keeps clients whose cosine with `reference` is at least `threshold`
/// (falling back to the single best-aligned client when none qualify),
/// averages them by dataset size, and blends the result into the reference:
/// `(1 - mu) * reference + mu * update`. A zero reference disables filtering.
pub fn ketsv2_filter(
    ctx: &AggregationContext,
    reference: &UpdateVector,
    threshold: f64,
    mu: f64,
) -> Result<KetsV2Outcome> {
    let dim = ctx.dim()?;
    check_len(dim, reference.len())?;
    let kept = if reference.norm() == 0.0 {
        ctx.ids()
    } else {
        let cosines: Vec<(ClientId, f64)> = ctx
            .updates
            .iter()
            .map(|(&id, u)| match cosine_similarity(u, reference) {
                Ok(c) => Ok((id, c)),
                Err(Error::ZeroNorm) => Ok((id, f64::NEG_INFINITY)),
                Err(e) => Err(e),
            })
            .collect::<Result<_>>()?;
        let passing: Vec<ClientId> = cosines
            .iter()
            .filter(|(_, c)| *c >= threshold)
            .map(|(id, _)| *id)
            .collect();
        if passing.is_empty() {
            let mut best = cosines[0];
            for &(id, c) in &cosines[1..] {
                if c > best.1 {
                    best = (id, c);
                }
            }
            vec![best.0]
        } else {
            passing
        }
    };
    let update = ctx.weighted_over(&kept)?;
    let blended = reference.scaled(1.0 - mu).axpy(mu, &update)?;
    Ok(KetsV2Outcome {
        kept,
        update,
        reference: blended,
    })
}
