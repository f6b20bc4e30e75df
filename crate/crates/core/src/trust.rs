//! Per-client trust bookkeeping: consecutive-update penalties, the clipped
//! linear trust decay, and trust-weighted client sampling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vector::{cosine_similarity, l2_distance, UpdateVector};
use crate::ClientId;

pub const DEFAULT_BETA: f64 = 0.1;
pub const INITIAL_TRUST: f64 = 1.0;

/// Penalty for a client whose update moved from `previous` to `current`.
///
/// A non-negative cosine yields `(1 - cos) + ||current - previous||`. A
/// negative cosine (or a zero-norm vector, where the angle is undefined)
/// yields `trust_prev / beta`, which drives the trust to zero in
/// [`update_trust`].
pub fn compute_penalty(
    current: &[f64],
    previous: &[f64],
    trust_prev: f64,
    beta: f64,
) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidValue(format!("beta must be positive, got {beta}")));
    }
    let zeroing = trust_prev / beta;
    match cosine_similarity(current, previous) {
        Ok(cos) if cos >= 0.0 => Ok((1.0 - cos) + l2_distance(current, previous)?),
        Ok(_) | Err(Error::ZeroNorm) => Ok(zeroing),
        Err(e) => Err(e),
    }
}

pub fn update_trust(trust_prev: f64, penalty: f64, beta: f64) -> f64 {
    (trust_prev - beta * penalty).max(0.0)
}

#[derive(Debug, Clone)]
pub struct ClientRecord {
    pub trust: f64,
    pub last_update: Option<UpdateVector>,
    pub dataset_size: usize,
}

impl ClientRecord {
    pub fn excluded(&self) -> bool {
        self.trust == 0.0
    }
}

/// Trust state for every client in the federation.
#[derive(Debug, Clone, Default)]
pub struct TrustLedger {
    clients: BTreeMap<ClientId, ClientRecord>,
}

impl TrustLedger {
    /// Every client starts at full trust with no stored update.
    pub fn new(dataset_sizes: &BTreeMap<ClientId, usize>) -> Self {
        let clients = dataset_sizes
            .iter()
            .map(|(&id, &size)| {
                (
                    id,
                    ClientRecord {
                        trust: INITIAL_TRUST,
                        last_update: None,
                        dataset_size: size,
                    },
                )
            })
            .collect();
        Self { clients }
    }

    pub fn len(&self) -> usize {
        self.clients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clients.is_empty()
    }

    pub fn get(&self, id: ClientId) -> Option<&ClientRecord> {
        self.clients.get(&id)
    }

    pub fn trust(&self, id: ClientId) -> Option<f64> {
        self.clients.get(&id).map(|r| r.trust)
    }

    pub fn is_excluded(&self, id: ClientId) -> bool {
        self.clients.get(&id).is_some_and(ClientRecord::excluded)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClientId, &ClientRecord)> {
        self.clients.iter().map(|(&id, r)| (id, r))
    }

    pub fn scores(&self) -> BTreeMap<ClientId, f64> {
        self.iter().map(|(id, r)| (id, r.trust)).collect()
    }

    pub fn active(&self) -> Vec<ClientId> {
        self.iter()
            .filter(|(_, r)| !r.excluded())
            .map(|(id, _)| id)
            .collect()
    }

    /// Scores `update` against the client's stored update, applies the trust
    /// decay, then stores `update` as the new reference. Returns the penalty.
    ///
    /// A first upload carries no penalty. Every received update is stored,
    /// whatever its outcome.
    pub fn observe(&mut self, id: ClientId, update: &UpdateVector, beta: f64) -> Result<f64> {
        let record = self
            .clients
            .get_mut(&id)
            .ok_or_else(|| Error::InvalidValue(format!("unknown client {id}")))?;
        let penalty = match &record.last_update {
            None => 0.0,
            Some(prev) => compute_penalty(update, prev, record.trust, beta)?,
        };
        record.trust = update_trust(record.trust, penalty, beta);
        record.last_update = Some(update.clone());
        Ok(penalty)
    }
}

/// Picks the round's participants.
///
/// Round 0 takes every non-excluded client. Later rounds draw
/// `min(k, #non-excluded)` distinct clients, each draw proportional to trust
/// among those not yet drawn. The result is sorted by id.
pub fn sample_clients(
    ledger: &TrustLedger,
    k: usize,
    round: usize,
    seed: u64,
) -> Result<Vec<ClientId>> {
    let weighted: Vec<(ClientId, f64)> = ledger
        .iter()
        .filter(|(_, r)| r.trust > 0.0)
        .map(|(id, r)| (id, r.trust))
        .collect();
    if weighted.is_empty() {
        return Err(Error::PoolExhausted);
    }
    if round == 0 {
        return Ok(weighted.into_iter().map(|(id, _)| id).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw_without_replacement(weighted, k, &mut rng))
}

/// Sequential proportional draws with renormalization over the remainder.
pub(crate) fn draw_without_replacement<R: Rng>(
    mut pool: Vec<(ClientId, f64)>,
    k: usize,
    rng: &mut R,
) -> Vec<ClientId> {
    let take = k.min(pool.len());
    let mut chosen = Vec::with_capacity(take);
    for _ in 0..take {
        let total: f64 = pool.iter().map(|(_, w)| w).sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = pool.len() - 1;
        for (i, (_, w)) in pool.iter().enumerate() {
            if target < *w {
                pick = i;
                break;
            }
            target -= w;
        }
        chosen.push(pool.remove(pick).0);
    }
    chosen.sort_unstable();
    chosen
}
