//! Run-level summaries computed from round reports.

use std::collections::{BTreeMap, BTreeSet};

use crate::orchestrator::RoundReport;
use crate::ClientId;

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub final_accuracy: Option<f64>,
    pub mean_accuracy: Option<f64>,
    /// Share of attackers ever excluded (0 when there are none).
    pub tpr: f64,
    /// Share of benign clients ever excluded (0 when there are none).
    pub fpr: f64,
    /// First round at which each attacker sat at zero trust.
    pub rounds_to_exclusion: BTreeMap<ClientId, Option<usize>>,
    /// Round-major trust matrix, one column per client id in `0..n_clients`.
    pub trust_trajectories: Vec<Vec<f64>>,
}

pub fn compute_metrics(reports: &[RoundReport], attackers: &[ClientId], n_clients: usize) -> Summary {
    let attackers: BTreeSet<ClientId> = attackers.iter().copied().collect();
    let mut first_excluded: BTreeMap<ClientId, usize> = BTreeMap::new();
    for r in reports {
        for &id in &r.excluded {
            first_excluded.entry(id).or_insert(r.round);
        }
    }
    let ratio = |hits: usize, total: usize| if total == 0 { 0.0 } else { hits as f64 / total as f64 };
    let caught = first_excluded.keys().filter(|id| attackers.contains(id)).count();
    let false_alarms = first_excluded.len() - caught;
    let benign = n_clients.saturating_sub(attackers.len());
    let accuracies: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    Summary {
        final_accuracy: accuracies.last().copied(),
        mean_accuracy: (!accuracies.is_empty()).then(|| accuracies.iter().sum::<f64>() / accuracies.len() as f64),
        tpr: ratio(caught, attackers.len()),
        fpr: ratio(false_alarms, benign),
        rounds_to_exclusion: attackers.iter().map(|id| (*id, first_excluded.get(id).copied())).collect(),
        trust_trajectories: reports
            .iter()
            .map(|r| (0..n_clients).map(|id| r.trust.get(&id).copied().unwrap_or(f64::NAN)).collect())
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(round: usize, accuracy: f64, excluded: &[ClientId], n: usize) -> RoundReport {
        RoundReport {
            round,
            accuracy,
            selected: (0..n).collect(),
            honest: (0..n).filter(|id| !excluded.contains(id)).collect(),
            trust: (0..n).map(|id| (id, if excluded.contains(&id) { 0.0 } else { 1.0 })).collect(),
            excluded: excluded.to_vec(),
            poisoned: false,
        }
    }

    #[test]
    fn no_exclusions() {
        let reports = vec![report(0, 0.5, &[], 4), report(1, 0.7, &[], 4)];
        let s = compute_metrics(&reports, &[3], 4);
        assert_eq!((s.tpr, s.fpr), (0.0, 0.0));
        assert_eq!(s.final_accuracy, Some(0.7));
        assert!((s.mean_accuracy.unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(s.rounds_to_exclusion[&3], None);
    }

    #[test]
    fn attackers_caught_by_round_three() {
        let reports: Vec<RoundReport> = (0..6)
            .map(|r| report(r, 0.9, if r >= 3 { &[1, 4] } else if r >= 1 { &[1] } else { &[] }, 6))
            .collect();
        let s = compute_metrics(&reports, &[1, 4], 6);
        assert_eq!((s.tpr, s.fpr), (1.0, 0.0));
        assert_eq!(s.rounds_to_exclusion[&1], Some(1));
        assert_eq!(s.rounds_to_exclusion[&4], Some(3));
        assert_eq!(s.trust_trajectories[3][4], 0.0);
        assert_eq!(s.trust_trajectories[2][4], 1.0);
    }

    #[test]
    fn false_positives_and_empty_runs() {
        let s = compute_metrics(&[report(0, 0.4, &[0], 5)], &[4], 5);
        assert_eq!(s.fpr, 0.25);
        let empty = compute_metrics(&[], &[], 3);
        assert_eq!(empty.final_accuracy, None);
        assert_eq!(empty.mean_accuracy, None);
        assert_eq!((empty.tpr, empty.fpr), (0.0, 0.0));
    }
}
