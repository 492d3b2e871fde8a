use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::record::class_name;
use crate::eval::confusion::ConfusionMatrix;
use crate::error::Result;

/// Outcome of an evaluation protocol: pooled confusion matrix and metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scheme: String,
    pub classes: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub ccr_per_class: Vec<f64>,
    pub mca: f64,
    /// Test accuracy of each fold in percent; `None` for folds that did not complete.
    pub fold_accuracies: Vec<Option<f64>>,
    pub incomplete_folds: Vec<usize>,
}

impl EvalReport {
    pub fn new(scheme: impl Into<String>, confusion: ConfusionMatrix, fold_accuracies: Vec<Option<f64>>) -> Result<Self> {
        let ccr_per_class = confusion.ccr()?;
        let mca = crate::eval::confusion::mca(&ccr_per_class);
        let incomplete_folds = fold_accuracies
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.is_none().then_some(i))
            .collect();
        Ok(EvalReport {
            scheme: scheme.into(),
            classes: (0..confusion.classes()).map(class_name).collect(),
            confusion,
            ccr_per_class,
            mca,
            fold_accuracies,
            incomplete_folds,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Counts as CSV with a header row and one labelled row per true class.
    pub fn confusion_csv(&self) -> String {
        let mut s = String::from("true\\predicted");
        for c in &self.classes {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        for (name, row) in self.classes.iter().zip(self.confusion.counts()) {
            s.push_str(name);
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }

    /// Short human-readable summary with two-decimal rates.
    pub fn summary(&self) -> String {
        let mut s = format!("scheme: {}\n", self.scheme);
        for (name, ccr) in self.classes.iter().zip(&self.ccr_per_class) {
            s.push_str(&format!("CCR {name}: {ccr:.2}\n"));
        }
        s.push_str(&format!("MCA: {:.2}\n", self.mca));
        let done = self.fold_accuracies.len() - self.incomplete_folds.len();
        s.push_str(&format!("folds: {done}/{} complete\n", self.fold_accuracies.len()));
        s
    }

    /// Write `report.json` and `confusion.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        std::fs::write(dir.join("confusion.csv"), self.confusion_csv())?;
        Ok(())
    }
}
