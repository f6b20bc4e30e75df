//! White-box crafting of malicious updates from the round's benign snapshot.
//!
//! Min-Max and Min-Sum push the benign mean along a perturbation direction as
//! far as a distance constraint allows; Trim- and Krum-Attack target their
//! namesake aggregators; sign flip negates an honest update. Label flipping is
//! a data-side attack and is realized by the orchestrator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::defenses::krum_index;
use crate::error::{Error, Result};
use crate::vector::{coordinate_std, l2_distance, mean, squared_distance, UpdateVector};

pub const DEFAULT_GAMMA_INIT: f64 = 10.0;
pub const DEFAULT_TAU: f64 = 0.01;
pub const DEFAULT_TRIM_B: f64 = 2.0;
pub const DEFAULT_KRUM_LAMBDA_INIT: f64 = 10.0;
pub const DEFAULT_KRUM_LAMBDA_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackKind {
    None,
    Trim,
    Krum,
    MinMax,
    MinSum,
    SignFlip,
    LabelFlip,
}

impl AttackKind {
    pub const ALL: [AttackKind; 7] = [
        AttackKind::None,
        AttackKind::Trim,
        AttackKind::Krum,
        AttackKind::MinMax,
        AttackKind::MinSum,
        AttackKind::SignFlip,
        AttackKind::LabelFlip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::Trim => "trim",
            AttackKind::Krum => "krum",
            AttackKind::MinMax => "min_max",
            AttackKind::MinSum => "min_sum",
            AttackKind::SignFlip => "sign_flip",
            AttackKind::LabelFlip => "label_flip",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Perturbation {
    /// Negated, normalized benign mean.
    Unit,
    /// Negated coordinate-wise standard deviation.
    Std,
}

impl Perturbation {
    pub fn name(self) -> &'static str {
        match self {
            Perturbation::Unit => "unit",
            Perturbation::Std => "std",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unit" => Some(Perturbation::Unit),
            "std" => Some(Perturbation::Std),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub perturbation: Perturbation,
    pub start_round: usize,
    /// First honest round after poisoning; `None` poisons until the end.
    pub stop_round: Option<usize>,
    pub gamma_init: f64,
    pub tau: f64,
    /// Trim-Attack range factor.
    pub b: f64,
    pub krum_lambda_init: f64,
    pub krum_lambda_floor: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            kind: AttackKind::None,
            perturbation: Perturbation::Unit,
            start_round: 0,
            stop_round: None,
            gamma_init: DEFAULT_GAMMA_INIT,
            tau: DEFAULT_TAU,
            b: DEFAULT_TRIM_B,
            krum_lambda_init: DEFAULT_KRUM_LAMBDA_INIT,
            krum_lambda_floor: DEFAULT_KRUM_LAMBDA_FLOOR,
        }
    }
}

impl AttackConfig {
    /// Whether attackers poison in `round`.
    pub fn active(&self, round: usize) -> bool {
        self.kind != AttackKind::None
            && round >= self.start_round
            && self.stop_round.is_none_or(|stop| round < stop)
    }

    /// Checks field invariants, naming the offending field on failure.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if let Some(stop) = self.stop_round {
            if stop < self.start_round {
                return Err(("attack_stop", format!("{stop} precedes attack_start {}", self.start_round)));
            }
        }
        if !(self.gamma_init > 0.0 && self.gamma_init.is_finite()) {
            return Err(("gamma_init", "must be positive".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(("tau", "must be positive".into()));
        }
        if !(self.b > 1.0 && self.b.is_finite()) {
            return Err(("trim_b", "must exceed 1".into()));
        }
        if !(self.krum_lambda_init > 0.0 && self.krum_lambda_init.is_finite()) {
            return Err(("krum_lambda_init", "must be positive".into()));
        }
        if !(self.krum_lambda_floor > 0.0 && self.krum_lambda_floor <= self.krum_lambda_init) {
            return Err(("krum_lambda_floor", "must be positive and at most krum_lambda_init".into()));
        }
        Ok(())
    }
}

fn require_two<V: AsRef<[f64]>>(benign: &[V]) -> Result<()> {
    if benign.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: benign.len() });
    }
    Ok(())
}

pub fn perturbation_vector<V: AsRef<[f64]>>(benign: &[V], kind: Perturbation) -> Result<UpdateVector> {
    require_two(benign)?;
    match kind {
        Perturbation::Unit => {
            let m = mean(benign)?;
            let n = m.norm();
            if n == 0.0 {
                return Err(Error::ZeroNorm);
            }
            Ok(m.scaled(-1.0 / n))
        }
        Perturbation::Std => Ok(coordinate_std(benign)?.scaled(-1.0)),
    }
}

/// Oscillating halving search for the largest feasible scale along `p`.
///
/// Starting at `gamma_init` with step `gamma_init / 2`, a feasible candidate
/// moves up and an infeasible one moves down, halving the step each time. The
/// search stops once the bracket around the boundary (twice the step just
/// taken) is narrower than `tau`. Returns the last feasible scale (0 if none
/// was found) and `base + scale * p`.
pub fn gamma_search(
    base: &[f64],
    p: &[f64],
    constraint: impl Fn(&[f64]) -> bool,
    gamma_init: f64,
    tau: f64,
) -> Result<(f64, UpdateVector)> {
    if base.len() != p.len() {
        return Err(Error::Dimension { expected: base.len(), found: p.len() });
    }
    if !(gamma_init > 0.0 && tau > 0.0) {
        return Err(Error::InvalidValue("gamma_init and tau must be positive".into()));
    }
    let at = |g: f64| -> Vec<f64> { base.iter().zip(p).map(|(m, d)| m + g * d).collect() };
    let mut gamma = gamma_init;
    let mut step = gamma_init / 2.0;
    let mut best = 0.0;
    loop {
        if constraint(&at(gamma)) {
            best = gamma;
            gamma += step;
        } else {
            gamma -= step;
        }
        let bracket = 2.0 * step;
        step /= 2.0;
        if bracket < tau {
            break;
        }
    }
    Ok((best, UpdateVector::from_vec_unchecked(at(best))))
}

// Absorbs rounding so that the benign mean itself (gamma = 0) is feasible.
fn slack(bound: f64) -> f64 {
    bound + 1e-12 * (1.0 + bound)
}

/// Largest pairwise benign distance: the Min-Max budget.
pub fn max_pairwise_distance<V: AsRef<[f64]>>(benign: &[V]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..benign.len() {
        for j in i + 1..benign.len() {
            worst = worst.max(l2_distance(benign[i].as_ref(), benign[j].as_ref())?);
        }
    }
    Ok(worst)
}

/// Largest benign sum of squared distances to the others: the Min-Sum budget.
pub fn max_sum_squared_distance<V: AsRef<[f64]>>(benign: &[V]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for u in benign {
        worst = worst.max(sum_squared_distance(u.as_ref(), benign)?);
    }
    Ok(worst)
}

pub fn max_distance_to<V: AsRef<[f64]>>(m: &[f64], benign: &[V]) -> Result<f64> {
    benign
        .iter()
        .try_fold(0.0f64, |acc, u| Ok(acc.max(l2_distance(m, u.as_ref())?)))
}

pub fn sum_squared_distance<V: AsRef<[f64]>>(m: &[f64], benign: &[V]) -> Result<f64> {
    benign
        .iter()
        .try_fold(0.0, |acc, u| Ok(acc + squared_distance(m, u.as_ref())?))
}

/// Agnostic Min-Max: stay within the largest benign pairwise distance of
/// every benign update.
pub fn min_max_attack<V: AsRef<[f64]>>(benign: &[V], kind: Perturbation, cfg: &AttackConfig) -> Result<UpdateVector> {
    let p = perturbation_vector(benign, kind)?;
    let base = mean(benign)?;
    let bound = slack(max_pairwise_distance(benign)?);
    let (_, m) = gamma_search(
        &base,
        &p,
        |c| max_distance_to(c, benign).is_ok_and(|d| d <= bound),
        cfg.gamma_init,
        cfg.tau,
    )?;
    Ok(m)
}

/// Agnostic Min-Sum: total squared distance to the benign set stays within
/// the largest such total of any benign update.
pub fn min_sum_attack<V: AsRef<[f64]>>(benign: &[V], kind: Perturbation, cfg: &AttackConfig) -> Result<UpdateVector> {
    let p = perturbation_vector(benign, kind)?;
    let base = mean(benign)?;
    let bound = slack(max_sum_squared_distance(benign)?);
    let (_, m) = gamma_search(
        &base,
        &p,
        |c| sum_squared_distance(c, benign).is_ok_and(|d| d <= bound),
        cfg.gamma_init,
        cfg.tau,
    )?;
    Ok(m)
}

/// Per-coordinate interval a Trim-Attack value is drawn from, as `(lo, hi)`.
///
/// The interval lies on the far side of the benign extreme opposite the
/// mean's sign, scaled by `b`. A zero-sign coordinate pins to 0.
pub fn trim_interval(values: &[f64], b: f64) -> (f64, f64) {
    let avg = values.iter().sum::<f64>() / values.len() as f64;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (a, c) = if avg > 0.0 {
        if lo < 0.0 { (lo, b * lo) } else { (lo / b, lo) }
    } else if avg < 0.0 {
        if hi > 0.0 { (hi, b * hi) } else { (hi / b, hi) }
    } else {
        (0.0, 0.0)
    };
    (a.min(c), a.max(c))
}

/// `count` independent Trim-Attack updates.
pub fn trim_attack<V: AsRef<[f64]>>(benign: &[V], b: f64, count: usize, seed: u64) -> Result<Vec<UpdateVector>> {
    require_two(benign)?;
    if !(b > 1.0) {
        return Err(Error::InvalidValue(format!("trim range factor must exceed 1, got {b}")));
    }
    let dim = benign[0].as_ref().len();
    for u in benign {
        crate::vector::check_len(dim, u.as_ref().len())?;
    }
    let intervals: Vec<(f64, f64)> = (0..dim)
        .map(|j| {
            let column: Vec<f64> = benign.iter().map(|u| u.as_ref()[j]).collect();
            trim_interval(&column, b)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let v = intervals
                .iter()
                .map(|&(lo, hi)| if lo < hi { rng.random_range(lo..=hi) } else { lo })
                .collect();
            UpdateVector::from_vec_unchecked(v)
        })
        .collect())
}

/// Krum-Attack: `-lambda * sign(mean)`, halving `lambda` until Krum over
/// `c` copies plus the benign set picks a copy. Falls back to
/// `-lambda_floor * sign(mean)` once `lambda` drops below the floor.
pub fn krum_attack<V: AsRef<[f64]>>(
    benign: &[V],
    c: usize,
    lambda_init: f64,
    lambda_floor: f64,
) -> Result<UpdateVector> {
    if c == 0 {
        return Err(Error::InvalidValue("krum attack needs at least one attacker".into()));
    }
    if benign.len() < c + 3 {
        return Err(Error::InsufficientClients { needed: c + 3, got: benign.len() });
    }
    let sign: Vec<f64> = mean(benign)?
        .iter()
        .map(|&x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 })
        .collect();
    let candidate = |lambda: f64| -> Vec<f64> { sign.iter().map(|s| -lambda * s).collect() };
    let mut lambda = lambda_init;
    while lambda >= lambda_floor {
        let u = candidate(lambda);
        let mut pool: Vec<&[f64]> = vec![&u; c];
        pool.extend(benign.iter().map(|v| v.as_ref()));
        if krum_index(&pool, c)? < c {
            return Ok(UpdateVector::from_vec_unchecked(u));
        }
        lambda /= 2.0;
    }
    Ok(UpdateVector::from_vec_unchecked(candidate(lambda_floor)))
}

pub fn sign_flip_attack(honest: &UpdateVector) -> UpdateVector {
    honest.scaled(-1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::cosine_similarity;
    use rand::Rng;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> UpdateVector {
        UpdateVector::new(x.to_vec()).unwrap()
    }

    /// Largest grid scale (step 1e-4) for which every scale up to it is feasible.
    fn grid_boundary(feasible: impl Fn(f64) -> bool, limit: f64) -> f64 {
        let mut g = 0.0;
        let mut last = 0.0;
        while g <= limit {
            if !feasible(g) {
                break;
            }
            last = g;
            g += 1e-4;
        }
        last
    }

    fn along(base: &[f64], p: &[f64], g: f64) -> Vec<f64> {
        base.iter().zip(p).map(|(m, d)| m + g * d).collect()
    }

    #[test]
    fn perturbation_examples() {
        let unit = perturbation_vector(&[v(&[1.0, 0.0]), v(&[1.0, 0.0])], Perturbation::Unit).unwrap();
        assert_eq!(unit.as_slice(), &[-1.0, 0.0]);
        let flat = perturbation_vector(&[v(&[1.0, 1.0]), v(&[1.0, 1.0])], Perturbation::Std).unwrap();
        assert!(flat.iter().all(|x| *x == 0.0));
        let std = perturbation_vector(&[v(&[0.0, 0.0]), v(&[2.0, 0.0])], Perturbation::Std).unwrap();
        assert_eq!(std[0], -1.0);
        assert_eq!(std[1], 0.0);
        assert!(matches!(
            perturbation_vector(&[v(&[1.0]), v(&[-1.0])], Perturbation::Unit),
            Err(Error::ZeroNorm)
        ));
        assert!(matches!(
            perturbation_vector(&[v(&[1.0])], Perturbation::Std),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn gamma_search_examples() {
        let base = [0.0];
        let p = [1.0];
        let (g, _) = gamma_search(&base, &p, |_| true, 10.0, 0.01).unwrap();
        assert!(g >= 10.0);
        let (g, m) = gamma_search(&base, &p, |c| c[0] <= 3.0, 10.0, 0.01).unwrap();
        assert!((2.99..=3.0).contains(&g), "{g}");
        assert_eq!(m[0], g);
        let (g, m) = gamma_search(&[0.5, 0.5], &[1.0, 0.0], |c| c[0] <= 0.5, 10.0, 0.01).unwrap();
        assert_eq!(g, 0.0);
        assert_eq!(m.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn min_max_two_orthogonal() {
        let benign = [v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        let cfg = AttackConfig::default();
        let m = min_max_attack(&benign, Perturbation::Unit, &cfg).unwrap();
        let bound = 2f64.sqrt();
        assert!(max_distance_to(&m, &benign).unwrap() <= bound + 1e-9);
        let p = perturbation_vector(&benign, Perturbation::Unit).unwrap();
        let pushed = along(&m, &p, cfg.tau);
        assert!(max_distance_to(&pushed, &benign).unwrap() > bound);
    }

    #[test]
    fn min_max_collinear_lies_on_ray() {
        let benign = [v(&[1.0, 0.0]), v(&[2.0, 0.0])];
        let m = min_max_attack(&benign, Perturbation::Unit, &AttackConfig::default()).unwrap();
        assert_eq!(m[1], 0.0);
        assert!(m[0] <= 1.5);
        assert!(max_distance_to(&m, &benign).unwrap() <= 1.0 + 1e-9);
        // oracle: boundary at gamma = 0.5
        assert!((1.5 - m[0] - 0.5).abs() <= 0.01);
    }

    #[test]
    fn identical_benign_yields_mean() {
        let benign = [v(&[0.3, -0.2]), v(&[0.3, -0.2]), v(&[0.3, -0.2])];
        let cfg = AttackConfig::default();
        assert_eq!(min_max_attack(&benign, Perturbation::Unit, &cfg).unwrap().as_slice(), &[0.3, -0.2]);
        assert_eq!(min_sum_attack(&benign, Perturbation::Unit, &cfg).unwrap().as_slice(), &[0.3, -0.2]);
    }

    #[test]
    fn min_sum_two_orthogonal() {
        let benign = [v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        let cfg = AttackConfig::default();
        let m = min_sum_attack(&benign, Perturbation::Unit, &cfg).unwrap();
        assert!(sum_squared_distance(&m, &benign).unwrap() <= 2.0 + 1e-9);
        let p = perturbation_vector(&benign, Perturbation::Unit).unwrap();
        let base = mean(&benign).unwrap();
        let oracle = grid_boundary(|g| sum_squared_distance(&along(&base, &p, g), &benign).unwrap() <= 2.0, 30.0);
        let found = l2_distance(&m, &base).unwrap();
        assert!((found - oracle).abs() <= cfg.tau, "{found} vs {oracle}");
    }

    #[test]
    fn min_sum_is_usually_tighter_than_min_max() {
        let cfg = AttackConfig::default();
        let mut tighter = 0;
        for trial in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(trial);
            // gradient-like: a shared direction plus per-client Gaussian noise
            let normal = rand_distr::Normal::new(0.0, 0.5).unwrap();
            let shared: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
            let benign: Vec<UpdateVector> = (0..10)
                .map(|_| v(&shared.iter().map(|s| s + rng.sample(normal)).collect::<Vec<_>>()))
                .collect();
            let base = mean(&benign).unwrap();
            let mm = min_max_attack(&benign, Perturbation::Unit, &cfg).unwrap();
            let ms = min_sum_attack(&benign, Perturbation::Unit, &cfg).unwrap();
            if l2_distance(&ms, &base).unwrap() <= l2_distance(&mm, &base).unwrap() {
                tighter += 1;
            }
        }
        assert!(tighter >= 95, "{tighter}");
    }

    #[test]
    fn trim_examples() {
        assert_eq!(trim_interval(&[0.1, 0.2, 0.3], 2.0), (0.05, 0.1));
        assert_eq!(trim_interval(&[-0.3, -0.1], 2.0), (-0.1, -0.05));
        assert_eq!(trim_interval(&[-0.1, 0.3], 2.0), (-0.2, -0.1));
        assert_eq!(trim_interval(&[0.0, 0.0], 2.0), (0.0, 0.0));
        let benign = [v(&[0.1, -0.3, 0.0]), v(&[0.2, -0.1, 0.0]), v(&[0.3, -0.2, 0.0])];
        let out = trim_attack(&benign, 2.0, 4, 9).unwrap();
        assert_eq!(out.len(), 4);
        for m in &out {
            assert!((0.05..=0.1).contains(&m[0]));
            assert!((-0.1..=-0.05).contains(&m[1]));
            assert_eq!(m[2], 0.0);
        }
        assert_ne!(out[0], out[1]);
        assert_eq!(out, trim_attack(&benign, 2.0, 4, 9).unwrap());
    }

    #[test]
    fn krum_attack_is_selected_when_benign_spread() {
        // benign updates scattered around a small mean: a near-zero copy sits
        // closest to everyone
        let benign: Vec<UpdateVector> = (0..5)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / 5.0 + 0.3;
                v(&[3.0 * a.cos() + 0.1, 3.0 * a.sin() + 0.1])
            })
            .collect();
        let u = krum_attack(&benign, 1, 10.0, 1e-5).unwrap();
        let mut pool: Vec<&[f64]> = vec![&u];
        pool.extend(benign.iter().map(|b| b.as_slice()));
        assert_eq!(krum_index(&pool, 1).unwrap(), 0);
        assert!(u[0] < 0.0 && u[1] < 0.0);
        assert!(u[0] > -10.0);
    }

    #[test]
    fn krum_attack_falls_back_to_floor() {
        // a tight benign cluster away from the origin always beats a lone
        // copy on the opposite side, so the halving runs out
        let benign: Vec<UpdateVector> = (0..5)
            .map(|i| v(&[1.0 + 0.01 * i as f64, 1.0 - 0.01 * i as f64]))
            .collect();
        let u = krum_attack(&benign, 1, 10.0, 1e-5).unwrap();
        assert_eq!(u.as_slice(), &[-1e-5, -1e-5]);

        let axis = [v(&[1.0, 0.0]), v(&[1.0, 0.0]), v(&[1.0, 0.0]), v(&[1.0, 0.0])];
        let u = krum_attack(&axis, 1, 10.0, 1e-5).unwrap();
        assert_eq!(u.as_slice(), &[-1e-5, 0.0]);
    }

    #[test]
    fn sign_flip_examples() {
        let u = v(&[1.0, -2.0, 0.0]);
        let f = sign_flip_attack(&u);
        assert_eq!(f.as_slice(), &[-1.0, 2.0, 0.0]);
        assert_eq!(sign_flip_attack(&f), u);
        assert_eq!(cosine_similarity(&u, &f).unwrap(), -1.0);
    }

    #[test]
    fn schedule() {
        let cfg = AttackConfig {
            kind: AttackKind::MinMax,
            start_round: 5,
            stop_round: Some(7),
            ..AttackConfig::default()
        };
        let on: Vec<usize> = (0..10).filter(|r| cfg.active(*r)).collect();
        assert_eq!(on, vec![5, 6]);
        let none = AttackConfig::default();
        assert!(!(0..10).any(|r| none.active(r)));
        let bad = AttackConfig { start_round: 3, stop_round: Some(2), ..cfg };
        assert_eq!(bad.validate().unwrap_err().0, "attack_stop");
    }

    fn benign_set() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..8, 1usize..6).prop_flat_map(|(n, d)| {
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), n)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn min_max_feasible_and_tight(benign in benign_set(), std in any::<bool>()) {
            let kind = if std { Perturbation::Std } else { Perturbation::Unit };
            let cfg = AttackConfig::default();
            let p = match perturbation_vector(&benign, kind) {
                Ok(p) => p,
                Err(_) => return Ok(()),
            };
            prop_assume!(p.norm() > 1e-6);
            let m = min_max_attack(&benign, kind, &cfg).unwrap();
            let bound = max_pairwise_distance(&benign).unwrap();
            prop_assert!(max_distance_to(&m, &benign).unwrap() <= bound * (1.0 + 1e-9) + 1e-12);
            let base = mean(&benign).unwrap();
            let oracle = grid_boundary(|g| max_distance_to(&along(&base, &p, g), &benign).unwrap() <= bound, 25.0);
            let found = l2_distance(&m, &base).unwrap() / p.norm();
            prop_assert!((found - oracle).abs() <= cfg.tau, "found {} oracle {}", found, oracle);
        }

        #[test]
        fn min_sum_feasible_and_tight(benign in benign_set(), std in any::<bool>()) {
            let kind = if std { Perturbation::Std } else { Perturbation::Unit };
            let cfg = AttackConfig::default();
            let p = match perturbation_vector(&benign, kind) {
                Ok(p) => p,
                Err(_) => return Ok(()),
            };
            prop_assume!(p.norm() > 1e-6);
            let m = min_sum_attack(&benign, kind, &cfg).unwrap();
            let bound = max_sum_squared_distance(&benign).unwrap();
            prop_assert!(sum_squared_distance(&m, &benign).unwrap() <= bound * (1.0 + 1e-9) + 1e-12);
            let base = mean(&benign).unwrap();
            let oracle = grid_boundary(|g| sum_squared_distance(&along(&base, &p, g), &benign).unwrap() <= bound, 25.0);
            let found = l2_distance(&m, &base).unwrap() / p.norm();
            prop_assert!((found - oracle).abs() <= cfg.tau, "found {} oracle {}", found, oracle);
        }

        #[test]
        fn trim_values_stay_in_interval(benign in benign_set(), seed in any::<u64>()) {
            let out = trim_attack(&benign, 2.0, 3, seed).unwrap();
            for m in &out {
                for j in 0..m.len() {
                    let col: Vec<f64> = benign.iter().map(|u| u[j]).collect();
                    let (lo, hi) = trim_interval(&col, 2.0);
                    prop_assert!(lo <= m[j] && m[j] <= hi);
                }
            }
        }
    }
}
