//! Correlation statistics and the evaluation protocols.

mod experiments;
mod splits;
mod stats;

pub use experiments::{
    before_regression, cross_dataset_subset, fit_model, pattern_folds, run_cross_dataset, run_experiment1,
    run_experiment2, train_for_split, train_fraction_sweep, ConfigEcho, EvalConfig, EvalReport, FeatureWeight,
    PooledScore, SweepPoint, SweepReport, TrialRecord, DEFAULT_CROSS_REPETITIONS, DEFAULT_CV_FOLDS,
};
pub use splits::{gen_content_splits, train_count, Split, SplitMatrix};
pub use stats::{
    average_ranks, fit_logistic, lcc_after_logistic, logistic4, median, pearson, ranksum, ranksum_significance,
    srocc, RankSum, SignificanceMatrix, Verdict, LOGISTIC_ITERATIONS, LOGISTIC_RESTARTS, MIN_RANKSUM_TRIALS,
};
