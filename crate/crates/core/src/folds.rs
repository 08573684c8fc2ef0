//! Subject-exclusive fold planning: serpentine assignment by cough count,
//! per-fold class balancing against a non-cough pool, rotational 6-2-2
//! splits, and the cumulative increment schedule.

use crate::audio::Label;
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One subject and the feature samples extracted from their recordings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub sample_ids: Vec<String>,
}

impl SubjectRecord {
    pub fn cough_count(&self) -> usize {
        self.sample_ids.len()
    }
}

/// Subjects partitioned into folds, with every fold's labelled samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub n_folds: usize,
    pub fold_of: BTreeMap<String, usize>,
    pub per_fold: Vec<Vec<(String, Label)>>,
}

impl FoldAssignment {
    pub fn cough_count(&self, fold: usize) -> usize {
        self.per_fold[fold]
            .iter()
            .filter(|(_, l)| l.is_cough())
            .count()
    }

    pub fn noncough_count(&self, fold: usize) -> usize {
        self.per_fold[fold]
            .iter()
            .filter(|(_, l)| *l == Label::NonCough)
            .count()
    }
}

/// One rotation's 6-2-2 partition of the fold indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub rotation: usize,
    pub train_folds: Vec<usize>,
    pub val_folds: Vec<usize>,
    pub test_folds: Vec<usize>,
}

/// Cumulative training-fold sets for incremental transfer, one entry per
/// added fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncrementSchedule {
    pub steps: Vec<Vec<usize>>,
}

#[derive(Debug, thiserror::Error)]
pub enum FoldError {
    #[error("n_folds must be >= 1")]
    NoFolds,
    #[error("non-cough pool exhausted: need {needed} samples, pool has {available}")]
    PoolExhausted { needed: usize, available: usize },
    #[error("rotational splits need at least 5 folds, got {0}")]
    TooFewFolds(usize),
}

/// Distribute subjects over folds with a serpentine pass order: subjects
/// are sorted by descending cough count (ties by ascending subject id),
/// then pass p hands its subjects to folds 0..n when p is even and n..0
/// when odd. This keeps per-fold cough totals within one subject of each
/// other.
pub fn snaking_assign(
    subjects: &[SubjectRecord],
    n_folds: usize,
    cough_label: Label,
) -> Result<FoldAssignment, FoldError> {
    if n_folds == 0 {
        return Err(FoldError::NoFolds);
    }
    let mut order: Vec<&SubjectRecord> = subjects.iter().collect();
    order.sort_by(|a, b| {
        b.cough_count()
            .cmp(&a.cough_count())
            .then_with(|| a.subject_id.cmp(&b.subject_id))
    });

    let mut fold_of = BTreeMap::new();
    let mut per_fold: Vec<Vec<(String, Label)>> = vec![Vec::new(); n_folds];
    for (pass, chunk) in order.chunks(n_folds).enumerate() {
        for (slot, subject) in chunk.iter().enumerate() {
            let fold = if pass % 2 == 0 {
                slot
            } else {
                n_folds - 1 - slot
            };
            fold_of.insert(subject.subject_id.clone(), fold);
            for sample in &subject.sample_ids {
                per_fold[fold].push((sample.clone(), cough_label));
            }
        }
    }
    Ok(FoldAssignment {
        n_folds,
        fold_of,
        per_fold,
    })
}

/// Cap each fold's cough samples at `cap` by a seeded draw without
/// replacement (original sample order is kept for the survivors).
pub fn subsample_coughs(assignment: &FoldAssignment, cap: usize, seed: u64) -> FoldAssignment {
    let mut out = assignment.clone();
    let mut rng = SplitMix64::derive(seed, "cough-cap");
    for fold in &mut out.per_fold {
        let cough_idx: Vec<usize> = fold
            .iter()
            .enumerate()
            .filter(|(_, (_, l))| l.is_cough())
            .map(|(i, _)| i)
            .collect();
        if cough_idx.len() <= cap {
            continue;
        }
        let mut pick = cough_idx.clone();
        rng.shuffle(&mut pick);
        pick.truncate(cap);
        pick.sort_unstable();
        let keep: std::collections::HashSet<usize> = pick.into_iter().collect();
        *fold = fold
            .iter()
            .enumerate()
            .filter(|(i, (_, l))| !l.is_cough() || keep.contains(i))
            .map(|(_, s)| s.clone())
            .collect();
    }
    out
}

/// Draw, per fold, exactly as many non-cough samples as that fold holds
/// cough samples. Draws are seeded, without replacement, and disjoint
/// across folds.
pub fn balance_noncough(
    assignment: &FoldAssignment,
    noncough_pool: &[String],
    seed: u64,
) -> Result<FoldAssignment, FoldError> {
    let needed: usize = (0..assignment.n_folds)
        .map(|f| assignment.cough_count(f))
        .sum();
    if needed > noncough_pool.len() {
        return Err(FoldError::PoolExhausted {
            needed,
            available: noncough_pool.len(),
        });
    }
    let mut pool: Vec<&String> = noncough_pool.iter().collect();
    let mut rng = SplitMix64::derive(seed, "noncough-balance");
    rng.shuffle(&mut pool);

    let mut out = assignment.clone();
    let mut cursor = 0usize;
    for fold in 0..out.n_folds {
        let take = out.cough_count(fold);
        for sample in &pool[cursor..cursor + take] {
            out.per_fold[fold].push(((*sample).clone(), Label::NonCough));
        }
        cursor += take;
    }
    Ok(out)
}

/// The ten 6-2-2 rotations: rotation r tests on folds {r, r+1}, validates
/// on {r+2, r+3} (mod n), and trains on the rest.
pub fn rotational_splits(n_folds: usize) -> Result<Vec<SplitPlan>, FoldError> {
    if n_folds < 5 {
        return Err(FoldError::TooFewFolds(n_folds));
    }
    Ok((0..n_folds)
        .map(|r| {
            let test_folds = vec![r, (r + 1) % n_folds];
            let val_folds = vec![(r + 2) % n_folds, (r + 3) % n_folds];
            let mut train_folds: Vec<usize> = (0..n_folds)
                .filter(|f| !test_folds.contains(f) && !val_folds.contains(f))
                .collect();
            train_folds.sort_unstable();
            SplitPlan {
                rotation: r,
                train_folds,
                val_folds,
                test_folds,
            }
        })
        .collect())
}

/// Cumulative schedule: step k trains on the first k+1 train folds in
/// ascending index order.
pub fn increment_schedule(plan: &SplitPlan) -> IncrementSchedule {
    let mut sorted = plan.train_folds.clone();
    sorted.sort_unstable();
    IncrementSchedule {
        steps: (1..=sorted.len()).map(|k| sorted[..k].to_vec()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subjects(counts: &[usize]) -> Vec<SubjectRecord> {
        counts
            .iter()
            .enumerate()
            .map(|(i, &c)| SubjectRecord {
                subject_id: format!("s{i:03}"),
                sample_ids: (0..c).map(|j| format!("s{i:03}_{j}")).collect(),
            })
            .collect()
    }

    #[test]
    fn single_pass_assigns_in_descending_order() {
        let subs = subjects(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
        let a = snaking_assign(&subs, 10, Label::CovidCough).unwrap();
        // Highest count (s009, 10 coughs) lands in fold 0.
        assert_eq!(a.fold_of["s009"], 0);
        assert_eq!(a.fold_of["s000"], 9);
        for f in 0..10 {
            assert_eq!(a.cough_count(f), 10 - f);
        }
    }

    #[test]
    fn serpentine_20_subjects_hand_enumerated() {
        // Counts 20..1: every fold total is 21; fold 0 holds 20+1,
        // fold 9 holds 11+10.
        let counts: Vec<usize> = (1..=20).collect();
        let subs = subjects(&counts);
        let a = snaking_assign(&subs, 10, Label::CovidCough).unwrap();
        for f in 0..10 {
            assert_eq!(a.cough_count(f), 21, "fold {f}");
        }
        // s019 has 20 coughs -> fold 0; s000 has 1 cough -> fold 0 (reversed pass).
        assert_eq!(a.fold_of["s019"], 0);
        assert_eq!(a.fold_of["s000"], 0);
        assert_eq!(a.fold_of["s010"], 9); // 11 coughs, fold 9
        assert_eq!(a.fold_of["s009"], 9); // 10 coughs, reversed pass start
    }

    #[test]
    fn ties_break_by_ascending_subject_id() {
        let subs = vec![
            SubjectRecord {
                subject_id: "zed".into(),
                sample_ids: vec!["z0".into(), "z1".into()],
            },
            SubjectRecord {
                subject_id: "abe".into(),
                sample_ids: vec!["a0".into(), "a1".into()],
            },
        ];
        let a = snaking_assign(&subs, 10, Label::HealthyCough).unwrap();
        assert_eq!(a.fold_of["abe"], 0);
        assert_eq!(a.fold_of["zed"], 1);
    }

    #[test]
    fn folds_partition_subjects() {
        let subs = subjects(&[3, 7, 2, 9, 4, 4, 1, 8, 5, 6, 2, 3]);
        let a = snaking_assign(&subs, 10, Label::CovidCough).unwrap();
        assert_eq!(a.fold_of.len(), subs.len());
        let total: usize = (0..10).map(|f| a.cough_count(f)).sum();
        assert_eq!(total, subs.iter().map(|s| s.cough_count()).sum::<usize>());
    }

    #[test]
    fn balance_matches_cough_counts_exactly() {
        let subs = subjects(&[4, 3, 2, 5]);
        let a = snaking_assign(&subs, 4, Label::CovidCough).unwrap();
        let pool: Vec<String> = (0..50).map(|i| format!("nc{i:03}")).collect();
        let b = balance_noncough(&a, &pool, 77).unwrap();
        for f in 0..4 {
            assert_eq!(b.cough_count(f), b.noncough_count(f), "fold {f}");
        }
        // Draws are disjoint across folds.
        let mut drawn: Vec<&String> = b
            .per_fold
            .iter()
            .flatten()
            .filter(|(_, l)| *l == Label::NonCough)
            .map(|(s, _)| s)
            .collect();
        let before = drawn.len();
        drawn.sort();
        drawn.dedup();
        assert_eq!(drawn.len(), before);
    }

    #[test]
    fn empty_fold_draws_nothing() {
        let subs = subjects(&[2, 3]);
        let a = snaking_assign(&subs, 4, Label::CovidCough).unwrap();
        let pool: Vec<String> = (0..10).map(|i| format!("nc{i}")).collect();
        let b = balance_noncough(&a, &pool, 1).unwrap();
        assert_eq!(b.cough_count(2), 0);
        assert_eq!(b.noncough_count(2), 0);
    }

    #[test]
    fn balance_is_deterministic_per_seed() {
        let subs = subjects(&[4, 3, 2, 5, 1]);
        let a = snaking_assign(&subs, 5, Label::CovidCough).unwrap();
        let pool: Vec<String> = (0..40).map(|i| format!("nc{i:03}")).collect();
        let b1 = balance_noncough(&a, &pool, 42).unwrap();
        let b2 = balance_noncough(&a, &pool, 42).unwrap();
        assert_eq!(b1, b2);
        let b3 = balance_noncough(&a, &pool, 43).unwrap();
        assert_ne!(b1, b3);
    }

    #[test]
    fn exhausted_pool_reports_shortfall() {
        let subs = subjects(&[4, 3]);
        let a = snaking_assign(&subs, 2, Label::CovidCough).unwrap();
        let pool: Vec<String> = (0..3).map(|i| format!("nc{i}")).collect();
        match balance_noncough(&a, &pool, 0) {
            Err(FoldError::PoolExhausted { needed, available }) => {
                assert_eq!(needed, 7);
                assert_eq!(available, 3);
            }
            other => panic!("expected PoolExhausted, got {other:?}"),
        }
    }

    #[test]
    fn rotation_zero_matches_stated_rule() {
        let plans = rotational_splits(10).unwrap();
        assert_eq!(plans[0].test_folds, vec![0, 1]);
        assert_eq!(plans[0].val_folds, vec![2, 3]);
        assert_eq!(plans[0].train_folds, vec![4, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn every_rotation_partitions_folds() {
        for plan in rotational_splits(10).unwrap() {
            let mut all: Vec<usize> = plan
                .train_folds
                .iter()
                .chain(&plan.val_folds)
                .chain(&plan.test_folds)
                .copied()
                .collect();
            all.sort_unstable();
            assert_eq!(all, (0..10).collect::<Vec<_>>(), "rotation {}", plan.rotation);
        }
    }

    #[test]
    fn each_fold_tested_exactly_twice() {
        let plans = rotational_splits(10).unwrap();
        let mut test_count = [0usize; 10];
        for plan in &plans {
            for &f in &plan.test_folds {
                test_count[f] += 1;
            }
        }
        assert!(test_count.iter().all(|&c| c == 2));
    }

    #[test]
    fn schedule_is_cumulative_chain_of_six() {
        let plans = rotational_splits(10).unwrap();
        let schedule = increment_schedule(&plans[0]);
        assert_eq!(schedule.steps.len(), 6);
        assert_eq!(schedule.steps[0], vec![4]);
        assert_eq!(schedule.steps[1], vec![4, 5]);
        assert_eq!(schedule.steps[5], vec![4, 5, 6, 7, 8, 9]);
        for (k, step) in schedule.steps.iter().enumerate() {
            assert_eq!(step.len(), k + 1);
        }
        for w in schedule.steps.windows(2) {
            assert!(w[1].starts_with(&w[0]));
        }
    }

    #[test]
    fn cough_cap_subsamples_deterministically() {
        let subs = subjects(&[30, 20, 10]);
        let a = snaking_assign(&subs, 2, Label::CovidCough).unwrap();
        let capped = subsample_coughs(&a, 12, 5);
        for f in 0..2 {
            assert!(capped.cough_count(f) <= 12);
        }
        assert_eq!(capped, subsample_coughs(&a, 12, 5));
        // Survivors keep their original relative order.
        let orig: Vec<&(String, Label)> = a.per_fold[0].iter().collect();
        let mut cursor = 0;
        for entry in &capped.per_fold[0] {
            let pos = orig[cursor..].iter().position(|e| *e == entry).unwrap();
            cursor += pos + 1;
        }
    }
}
