//! Metrics, splitting protocols, significance testing and reporting.

pub mod metrics;
pub mod report;
pub mod split;
pub mod wilcoxon;

pub use metrics::{
    average_precision, mae, mean_average_precision, rank_items, relevance_labels, HoldoutSet,
    MapOutcome,
};
pub use report::{EvalReport, MetricRecord};
pub use split::{
    make_cv_split, make_upl_split, read_upl_manifest, write_upl_manifest, CvSplit, EvalUser,
    UplSplit, MIN_EVAL_PREFERENCES,
};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};
