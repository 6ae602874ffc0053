//! K-fold cross-validation: for fold `i`, test on fold `i`, validate on fold
//! `i + 1` (cyclically) and train on the rest.

use std::collections::{BTreeMap, BTreeSet};

use log::info;

use crate::drmm::{initial_params, train, ModelParams, ModelSpec, QueryFeatures, TrainConfig, TrainOutcome};
use crate::error::{Error, Result};
use crate::eval::{validate_folds, Qrels, Run};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub test: Vec<String>,
    pub validation: Vec<String>,
    pub train: Vec<String>,
}

/// Rotating assignment of folds to roles.
pub fn fold_splits(folds: &[Vec<String>]) -> Vec<FoldSplit> {
    let n = folds.len();
    (0..n)
        .map(|i| {
            let v = (i + 1) % n;
            FoldSplit {
                test: folds[i].clone(),
                validation: folds[v].clone(),
                train: (0..n)
                    .filter(|&j| j != i && j != v)
                    .flat_map(|j| folds[j].iter().cloned())
                    .collect(),
            }
        })
        .collect()
}

/// Rank every query's documents with `params`.
pub fn score_run(params: &ModelParams, queries: &[QueryFeatures], tag: &str) -> Result<Run> {
    let mut run = Run::new(tag);
    for q in queries {
        run.set_ranking(&q.query_id, q.rank_documents(params)?);
    }
    Ok(run)
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub split: FoldSplit,
    pub outcome: TrainOutcome,
    /// Test queries ranked by the selected model.
    pub test_run: Run,
    /// Test queries ranked by the initial parameters.
    pub untrained_run: Run,
}

#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub folds: Vec<FoldResult>,
    /// Union of the per-fold test runs.
    pub run: Run,
    pub untrained_run: Run,
}

fn select(by_id: &BTreeMap<&str, &QueryFeatures>, ids: &[String]) -> Vec<QueryFeatures> {
    ids.iter()
        .filter_map(|id| by_id.get(id.as_str()).map(|f| (*f).clone()))
        .collect()
}

/// Train one model per fold and rank each fold's test queries with it.
///
/// Folds must be disjoint and every query with features must belong to one.
/// Fold queries without features (nothing retrieved) are simply absent from
/// the runs.
pub fn cross_validate(
    features: &[QueryFeatures],
    qrels: &Qrels,
    folds: &[Vec<String>],
    spec: ModelSpec,
    cfg: &TrainConfig,
    tag: &str,
) -> Result<CrossValidation> {
    validate_folds(folds, None)?;
    let in_folds: BTreeSet<&str> = folds.iter().flatten().map(String::as_str).collect();
    if let Some(q) = features.iter().find(|f| !in_folds.contains(f.query_id.as_str())) {
        return Err(Error::Folds(format!("query `{}` is in no fold", q.query_id)));
    }
    let by_id: BTreeMap<&str, &QueryFeatures> =
        features.iter().map(|f| (f.query_id.as_str(), f)).collect();

    let untrained = initial_params(spec, cfg);
    let mut out = CrossValidation {
        folds: Vec::new(),
        run: Run::new(tag),
        untrained_run: Run::new(format!("{tag}-untrained")),
    };
    for (fold, split) in fold_splits(folds).into_iter().enumerate() {
        let train_set = select(&by_id, &split.train);
        let val_set = select(&by_id, &split.validation);
        let test_set = select(&by_id, &split.test);
        info!(
            "fold {fold}: {} train, {} validation, {} test queries",
            train_set.len(),
            val_set.len(),
            test_set.len()
        );
        let outcome = train(&train_set, &val_set, qrels, spec, cfg)?;
        let test_run = score_run(&outcome.model.params, &test_set, tag)?;
        let untrained_run = score_run(&untrained, &test_set, &out.untrained_run.tag)?;
        out.run.merge(test_run.clone());
        out.untrained_run.merge(untrained_run.clone());
        out.folds.push(FoldResult {
            fold,
            split,
            outcome,
            test_run,
            untrained_run,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn folds() -> Vec<Vec<String>> {
        (0..5).map(|i| vec![format!("q{i}")]).collect()
    }

    #[test]
    fn splits_rotate() {
        let s = fold_splits(&folds());
        assert_eq!(s.len(), 5);
        assert_eq!(s[0].test, ["q0"]);
        assert_eq!(s[0].validation, ["q1"]);
        assert_eq!(s[0].train, ["q2", "q3", "q4"]);
        assert_eq!(s[4].validation, ["q0"]);
        for split in &s {
            let mut all: Vec<&String> =
                split.test.iter().chain(&split.validation).chain(&split.train).collect();
            all.sort();
            all.dedup();
            assert_eq!(all.len(), 5);
        }
    }

    #[test]
    fn overlapping_folds_rejected_before_training() {
        let mut f = folds();
        f[1].push("q0".into());
        let spec = ModelSpec {
            histogram: Default::default(),
            gating_input: crate::drmm::GatingInput::Idf,
            gating_dim: 1,
        };
        let err = cross_validate(&[], &Qrels::new(), &f, spec, &TrainConfig::default(), "t");
        assert!(matches!(err, Err(Error::Folds(_))));
    }
}
