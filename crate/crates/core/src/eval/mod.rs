//! Split planning, confusion matrices and evaluation reports.

pub mod confusion;
pub mod report;
pub mod split;

pub use confusion::{ccr_from_rows, mca, parse_confusion_rows, render_confusion, render_rows, ConfusionMatrix, RenderedConfusion};
pub use report::EvalReport;
pub use split::{plan_kfold, plan_kfold_n, plan_loso, plan_loso_ids, Fold, SplitPlan, SplitScheme};
