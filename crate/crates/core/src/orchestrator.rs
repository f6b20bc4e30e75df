//! The federated round loop: sampling, local training, white-box attack
//! crafting, aggregation, and evaluation on the server's held-out set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attacks::{self, AttackConfig, AttackKind};
use crate::data::{self, LabeledDataset};
use crate::defenses::{self, AggregationContext};
use crate::error::{Error, Result};
use crate::kde;
use crate::model::{compute_update, evaluate, Model};
use crate::seed::{derive, Stream};
use crate::training::{local_train, TrainConfig};
use crate::trust::{self, TrustLedger};
use crate::vector::{mean, UpdateVector};
use crate::ClientId;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    /// Gaussian class blobs around random unit-norm means.
    Synthetic {
        samples: usize,
        dim: usize,
        classes: usize,
        spread: f64,
    },
    Idx { images: PathBuf, labels: PathBuf },
    /// Header row, numeric features, integer label in the last column.
    Csv { path: PathBuf },
}

impl DatasetSpec {
    pub fn load(&self, seed: u64) -> Result<LabeledDataset> {
        match self {
            DatasetSpec::Synthetic {
                samples,
                dim,
                classes,
                spread,
            } => data::generate_synthetic(*samples, *dim, *classes, *spread, derive(seed, Stream::Data, &[])),
            DatasetSpec::Idx { images, labels } => data::load_idx(images, labels),
            DatasetSpec::Csv { path } => data::load_csv(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Defense {
    FedAvg,
    Krum,
    TrimMean,
    Median,
    FlTrust,
    Kets,
    /// KeTS segmentation followed by the coordinate median of the honest set.
    KetsMedianPrefilter,
    KetsV2,
}

impl Defense {
    pub const ALL: [Defense; 8] = [
        Defense::FedAvg,
        Defense::Krum,
        Defense::TrimMean,
        Defense::Median,
        Defense::FlTrust,
        Defense::Kets,
        Defense::KetsMedianPrefilter,
        Defense::KetsV2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Defense::FedAvg => "fedavg",
            Defense::Krum => "krum",
            Defense::TrimMean => "trim_mean",
            Defense::Median => "median",
            Defense::FlTrust => "fltrust",
            Defense::Kets => "kets",
            Defense::KetsMedianPrefilter => "kets_median_prefilter",
            Defense::KetsV2 => "ketsv2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == s)
    }

    /// Whether the defense maintains trust scores and samples by them.
    pub fn uses_trust(self) -> bool {
        matches!(self, Defense::Kets | Defense::KetsMedianPrefilter | Defense::KetsV2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    /// Hidden layer widths of the classifier.
    pub hidden: Vec<usize>,
    pub n_clients: usize,
    pub clients_per_round: usize,
    pub attacker_fraction: f64,
    pub attack: AttackConfig,
    pub defense: Defense,
    /// Dirichlet concentration of the label split.
    pub alpha: f64,
    pub beta: f64,
    pub local_epochs: usize,
    pub global_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub fltrust_root_size: usize,
    pub ketsv2_threshold: f64,
    pub ketsv2_mu: f64,
    pub kde_quantile: f64,
    /// Stratified share of the source data held out as the server test set.
    pub test_fraction: f64,
    pub seed: u64,
    /// Threads used for client training; results do not depend on it.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    /// The desk-scale setting: 2000 synthetic points in 20 dimensions over 5
    /// classes, 30 clients (6 attackers) of which 20 train per round, 20
    /// rounds of 3 local epochs.
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::Synthetic {
                samples: 2000,
                dim: 20,
                classes: 5,
                spread: 0.3,
            },
            hidden: vec![32],
            n_clients: 30,
            clients_per_round: 20,
            attacker_fraction: 0.2,
            attack: AttackConfig::default(),
            defense: Defense::Kets,
            alpha: 0.5,
            beta: trust::DEFAULT_BETA,
            local_epochs: 3,
            global_epochs: 20,
            batch_size: 8,
            lr: 0.3,
            momentum: 0.0,
            fltrust_root_size: 100,
            ketsv2_threshold: 0.0,
            ketsv2_mu: 0.1,
            kde_quantile: kde::DEFAULT_QUANTILE,
            test_fraction: 0.2,
            seed: 1,
            workers: 1,
        }
    }
}

/// A configuration field that violates its invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidField {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for InvalidField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for InvalidField {}

fn check(ok: bool, field: &'static str, message: &str) -> std::result::Result<(), InvalidField> {
    if ok {
        Ok(())
    } else {
        Err(InvalidField {
            field,
            message: message.to_string(),
        })
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> std::result::Result<(), InvalidField> {
        if let DatasetSpec::Synthetic {
            samples,
            dim,
            classes,
            spread,
        } = &self.dataset
        {
            check(*classes >= 2, "synthetic_classes", "must be at least 2")?;
            check(*dim >= 1, "synthetic_dim", "must be at least 1")?;
            check(*samples >= *classes * 2, "synthetic_samples", "must be at least twice the class count")?;
            check(*spread > 0.0 && spread.is_finite(), "synthetic_spread", "must be positive")?;
        }
        check(self.hidden.iter().all(|&h| h > 0), "hidden", "layer widths must be positive")?;
        check(self.n_clients >= 2, "n_clients", "must be at least 2")?;
        check(
            self.clients_per_round >= 1 && self.clients_per_round <= self.n_clients,
            "clients_per_round",
            "must lie in [1, n_clients]",
        )?;
        check(
            (0.0..0.5).contains(&self.attacker_fraction),
            "attacker_fraction",
            "must lie in [0, 0.5)",
        )?;
        self.attack
            .validate()
            .map_err(|(field, message)| InvalidField { field, message })?;
        check(self.alpha > 0.0 && self.alpha.is_finite(), "alpha", "must be positive")?;
        check(self.beta > 0.0 && self.beta.is_finite(), "beta", "must be positive")?;
        check(self.batch_size >= 1, "batch_size", "must be at least 1")?;
        check(self.lr > 0.0 && self.lr.is_finite(), "lr", "must be positive")?;
        check((0.0..1.0).contains(&self.momentum), "momentum", "must lie in [0, 1)")?;
        check(
            self.defense != Defense::FlTrust || self.fltrust_root_size >= 1,
            "fltrust_root_size",
            "must be positive for fltrust",
        )?;
        check(
            (-1.0..=1.0).contains(&self.ketsv2_threshold),
            "ketsv2_threshold",
            "must lie in [-1, 1]",
        )?;
        check((0.0..=1.0).contains(&self.ketsv2_mu), "ketsv2_mu", "must lie in [0, 1]")?;
        check(
            self.kde_quantile > 0.0 && self.kde_quantile <= 1.0,
            "kde_quantile",
            "must lie in (0, 1]",
        )?;
        check(
            self.test_fraction > 0.0 && self.test_fraction < 1.0,
            "test_fraction",
            "must lie in (0, 1)",
        )?;
        check(self.workers >= 1, "workers", "must be at least 1")?;
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.local_epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            momentum: self.momentum,
        }
    }

    pub fn attacker_count(&self) -> usize {
        (self.attacker_fraction * self.n_clients as f64).ceil() as usize
    }
}

/// The outcome of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    pub accuracy: f64,
    pub selected: Vec<ClientId>,
    /// Clients whose updates the defense aggregated (or selected, for Krum).
    pub honest: Vec<ClientId>,
    /// Trust of every client after the round.
    pub trust: BTreeMap<ClientId, f64>,
    /// Every client at zero trust after the round.
    pub excluded: Vec<ClientId>,
    /// Whether attackers submitted poisoned updates this round.
    pub poisoned: bool,
}

/// Simulation state between rounds.
pub struct Federation {
    cfg: ExperimentConfig,
    test: LabeledDataset,
    clients: BTreeMap<ClientId, LabeledDataset>,
    flipped: BTreeMap<ClientId, LabeledDataset>,
    dataset_sizes: BTreeMap<ClientId, usize>,
    attackers: BTreeSet<ClientId>,
    root: Option<LabeledDataset>,
    ledger: TrustLedger,
    model: Model,
    reference: Option<UpdateVector>,
    pool: rayon::ThreadPool,
}

impl Federation {
    /// Loads data, holds out the test set, partitions the rest, fixes the
    /// attacker ids and initializes the global model.
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        let seed = cfg.seed;
        let source = cfg.dataset.load(seed)?;
        let (train, test) = data::stratified_split(&source, cfg.test_fraction, derive(seed, Stream::Split, &[]))?;
        let plan = data::dirichlet_partition(
            train.labels(),
            cfg.n_clients,
            cfg.alpha,
            derive(seed, Stream::Partition, &[]),
        )?;
        let mut clients = BTreeMap::new();
        for (&id, idx) in &plan.assignments {
            clients.insert(id, train.subset(idx)?);
        }
        let dataset_sizes = plan.sizes();

        let mut order: Vec<ClientId> = (0..cfg.n_clients).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive(seed, Stream::Attackers, &[])));
        let attackers: BTreeSet<ClientId> = order[..cfg.attacker_count()].iter().copied().collect();

        let flipped = if cfg.attack.kind == AttackKind::LabelFlip {
            attackers.iter().map(|&id| (id, data::flip_labels(&clients[&id]))).collect()
        } else {
            BTreeMap::new()
        };
        let root = if cfg.defense == Defense::FlTrust {
            Some(data::balanced_sample(&train, cfg.fltrust_root_size, derive(seed, Stream::Root, &[]))?)
        } else {
            None
        };

        let mut sizes = vec![train.dim()];
        sizes.extend(&cfg.hidden);
        sizes.push(train.classes());
        let model = Model::init(&sizes, derive(seed, Stream::Init, &[]))?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("workers: {e}")))?;
        Ok(Self {
            ledger: TrustLedger::new(&dataset_sizes),
            cfg,
            test,
            clients,
            flipped,
            dataset_sizes,
            attackers,
            root,
            model,
            reference: None,
            pool,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn attackers(&self) -> Vec<ClientId> {
        self.attackers.iter().copied().collect()
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn ledger(&self) -> &TrustLedger {
        &self.ledger
    }

    pub fn dataset_sizes(&self) -> &BTreeMap<ClientId, usize> {
        &self.dataset_sizes
    }

    pub fn test_set(&self) -> &LabeledDataset {
        &self.test
    }

    fn sample(&self, round: usize) -> Result<Vec<ClientId>> {
        let seed = derive(self.cfg.seed, Stream::Sampling, &[round as u64]);
        if self.cfg.defense.uses_trust() {
            return trust::sample_clients(&self.ledger, self.cfg.clients_per_round, round, seed);
        }
        let everyone = self.clients.keys().map(|&id| (id, 1.0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(trust::draw_without_replacement(everyone, self.cfg.clients_per_round, &mut rng))
    }

    fn train_client(&self, id: ClientId, round: usize) -> Result<UpdateVector> {
        let data = match self.flipped.get(&id) {
            Some(flipped) if self.cfg.attack.active(round) => flipped,
            _ => &self.clients[&id],
        };
        let seed = derive(self.cfg.seed, Stream::Training, &[id as u64, round as u64]);
        let local = local_train(&self.model, data, &self.cfg.train_config(), seed)?;
        compute_update(&local, &self.model)
    }

    /// Replaces the selected attackers' honest updates with crafted ones.
    /// Returns whether anything was poisoned; when the round's benign
    /// snapshot cannot support the attack the attackers stay honest.
    fn craft(&self, round: usize, updates: &mut BTreeMap<ClientId, UpdateVector>) -> Result<bool> {
        let attack = &self.cfg.attack;
        if !attack.active(round) {
            return Ok(false);
        }
        let bad: Vec<ClientId> = updates.keys().copied().filter(|id| self.attackers.contains(id)).collect();
        if bad.is_empty() {
            return Ok(false);
        }
        let benign: Vec<&UpdateVector> = updates
            .iter()
            .filter(|(id, _)| !self.attackers.contains(id))
            .map(|(_, u)| u)
            .collect();
        let crafted = match attack.kind {
            AttackKind::None => return Ok(false),
            AttackKind::LabelFlip => return Ok(true),
            AttackKind::SignFlip => Ok(bad.iter().map(|id| attacks::sign_flip_attack(&updates[id])).collect()),
            AttackKind::MinMax => {
                attacks::min_max_attack(&benign, attack.perturbation, attack).map(|m| vec![m; bad.len()])
            }
            AttackKind::MinSum => {
                attacks::min_sum_attack(&benign, attack.perturbation, attack).map(|m| vec![m; bad.len()])
            }
            AttackKind::Trim => attacks::trim_attack(
                &benign,
                attack.b,
                bad.len(),
                derive(self.cfg.seed, Stream::Attack, &[round as u64]),
            ),
            AttackKind::Krum => {
                attacks::krum_attack(&benign, bad.len(), attack.krum_lambda_init, attack.krum_lambda_floor)
                    .map(|m| vec![m; bad.len()])
            }
        };
        match crafted {
            Ok(vectors) => {
                for (id, v) in bad.into_iter().zip(vectors) {
                    updates.insert(id, v);
                }
                Ok(true)
            }
            Err(Error::InsufficientSamples { .. } | Error::InsufficientClients { .. } | Error::ZeroNorm) => {
                Ok(false)
            }
            Err(e) => Err(e),
        }
    }

    fn server_update(&self, round: usize) -> Result<Option<UpdateVector>> {
        let Some(root) = &self.root else {
            return Ok(None);
        };
        let seed = derive(self.cfg.seed, Stream::Root, &[round as u64 + 1]);
        let local = local_train(&self.model, root, &self.cfg.train_config(), seed)?;
        compute_update(&local, &self.model).map(Some)
    }

    fn aggregate(
        &mut self,
        round: usize,
        updates: &BTreeMap<ClientId, UpdateVector>,
    ) -> Result<(UpdateVector, Vec<ClientId>)> {
        let n = updates.len();
        let assumed = (self.cfg.attacker_fraction * n as f64).ceil() as usize;
        let mut ctx = AggregationContext {
            updates,
            dataset_sizes: &self.dataset_sizes,
            assumed_attackers: assumed,
        };
        let everyone = || updates.keys().copied().collect::<Vec<_>>();
        let (beta, quantile) = (self.cfg.beta, self.cfg.kde_quantile);
        Ok(match self.cfg.defense {
            Defense::FedAvg => (defenses::fed_avg(&ctx)?, everyone()),
            Defense::Median => (defenses::coordinate_median(&ctx)?, everyone()),
            Defense::TrimMean => {
                ctx.assumed_attackers = assumed.min(n.saturating_sub(1) / 2);
                (defenses::trim_mean(&ctx)?, everyone())
            }
            Defense::Krum => {
                ctx.assumed_attackers = assumed.min(n.saturating_sub(3));
                let (u, id) = defenses::krum_select(&ctx)?;
                (u, vec![id])
            }
            Defense::FlTrust => {
                let g0 = self.server_update(round)?;
                let out = defenses::fltrust_aggregate(&ctx, g0.as_ref())?;
                (out.update, out.accepted)
            }
            Defense::Kets => {
                let out = defenses::kets_aggregate(&ctx, &mut self.ledger, beta, quantile)?;
                (out.update, out.honest)
            }
            Defense::KetsMedianPrefilter => {
                let out = defenses::kets_aggregate(&ctx, &mut self.ledger, beta, quantile)?;
                let honest = restrict(updates, &out.honest);
                ctx.updates = &honest;
                (defenses::coordinate_median(&ctx)?, out.honest)
            }
            Defense::KetsV2 => {
                let out = defenses::kets_aggregate(&ctx, &mut self.ledger, beta, quantile)?;
                let reference = match self.reference.take() {
                    Some(r) => r,
                    None => mean(&updates.values().collect::<Vec<_>>())?,
                };
                let honest = restrict(updates, &out.honest);
                ctx.updates = &honest;
                let v2 = defenses::ketsv2_filter(&ctx, &reference, self.cfg.ketsv2_threshold, self.cfg.ketsv2_mu)?;
                self.reference = Some(v2.reference);
                (v2.update, v2.kept)
            }
        })
    }

    /// Plays one round and advances the global model.
    pub fn run_round(&mut self, round: usize) -> Result<RoundReport> {
        let selected = self.sample(round)?;
        let trained: Vec<(ClientId, Result<UpdateVector>)> = self.pool.install(|| {
            selected
                .par_iter()
                .map(|&id| (id, self.train_client(id, round)))
                .collect()
        });
        let mut updates = BTreeMap::new();
        for (id, update) in trained {
            updates.insert(id, update?);
        }
        let poisoned = self.craft(round, &mut updates)?;
        let (global_update, honest) = self.aggregate(round, &updates)?;
        self.model.apply_update(&global_update)?;
        if self.model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::GlobalDivergence { round });
        }
        let trust = self.ledger.scores();
        let excluded = trust.iter().filter(|(_, &t)| t == 0.0).map(|(&id, _)| id).collect();
        Ok(RoundReport {
            round,
            accuracy: evaluate(&self.model, &self.test),
            selected,
            honest,
            trust,
            excluded,
            poisoned,
        })
    }
}

fn restrict(updates: &BTreeMap<ClientId, UpdateVector>, keep: &[ClientId]) -> BTreeMap<ClientId, UpdateVector> {
    keep.iter().map(|id| (*id, updates[id].clone())).collect()
}

/// Every report produced, the fixed attacker ids, and the error that cut
/// the run short, if any.
#[derive(Debug)]
pub struct ExperimentRun {
    pub attackers: Vec<ClientId>,
    pub n_clients: usize,
    pub reports: Vec<RoundReport>,
    pub aborted: Option<Error>,
}

/// Runs `global_epochs` rounds. Setup failures are returned as errors; a
/// failure inside a round stops the run and is recorded next to the
/// reports gathered so far.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    let mut fed = Federation::new(cfg.clone())?;
    let mut reports = Vec::with_capacity(cfg.global_epochs);
    let mut aborted = None;
    for round in 0..cfg.global_epochs {
        match fed.run_round(round) {
            Ok(r) => reports.push(r),
            Err(e) => {
                aborted = Some(e);
                break;
            }
        }
    }
    Ok(ExperimentRun {
        attackers: fed.attackers(),
        n_clients: cfg.n_clients,
        reports,
        aborted,
    })
}
