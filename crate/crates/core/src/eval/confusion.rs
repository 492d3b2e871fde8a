//! Confusion matrices, per-class correct classification rates and mean class accuracy.

use serde::{Deserialize, Serialize};

use crate::data::record::class_name;
use crate::error::{Error, Result};

/// `K x K` counts: rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|row| row.len() != k) {
            return Err(Error::Data(format!("confusion matrix rows must all have {k} entries")));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn accumulate(&mut self, true_label: usize, predicted: usize) -> Result<()> {
        let k = self.classes();
        if true_label >= k || predicted >= k {
            return Err(Error::Data(format!(
                "labels ({true_label}, {predicted}) outside [0, {k})"
            )));
        }
        self.counts[true_label][predicted] += 1;
        Ok(())
    }

    /// Element-wise sum; fold results merge in any order.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes() != self.classes() {
            return Err(Error::Internal("cannot merge confusion matrices of different sizes".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn total(&self) -> u64 {
        self.row_totals().iter().sum()
    }

    /// Fraction of all predictions on the diagonal, in percent.
    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| {
            let hits: u64 = (0..self.classes()).map(|k| self.counts[k][k]).sum();
            100.0 * hits as f64 / total as f64
        })
    }

    fn as_rows(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|r| r.iter().map(|&c| c as f64).collect())
            .collect()
    }

    /// Per-class correct classification rate in percent.
    pub fn ccr(&self) -> Result<Vec<f64>> {
        normalized_ccr(&self.as_rows())
    }

    /// Mean of the per-class rates.
    pub fn mca(&self) -> Result<f64> {
        Ok(mca(&self.ccr()?))
    }
}

/// Per-class correct classification rates of a square matrix of counts or
/// row percentages.
///
/// Rows are normalized to `100 * row[k][k] / sum(row[k])`, except when every
/// row already sums to 100 within the rounding of two-decimal entries: such a
/// table is taken as printed and its diagonal returned unchanged.
pub fn ccr_from_rows(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = rows.len();
    let ccr = normalized_ccr(rows)?;
    let tolerance = 0.005 * k as f64 + 1e-9;
    if rows.iter().all(|r| (r.iter().sum::<f64>() - 100.0).abs() <= tolerance) {
        return Ok((0..k).map(|i| rows[i][i]).collect());
    }
    Ok(ccr)
}

fn normalized_ccr(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = rows.len();
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != k {
                return Err(Error::Data(format!("row {i} has {} entries, expected {k}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Data(format!("row {i} has a negative or non-finite entry")));
            }
            let total: f64 = row.iter().sum();
            if total <= 0.0 {
                return Err(Error::Eval(format!(
                    "class {} has no test samples; mean class accuracy is undefined",
                    class_name(i)
                )));
            }
            Ok(100.0 * row[i] / total)
        })
        .collect()
}

/// Unweighted mean of per-class correct classification rates.
pub fn mca(ccr: &[f64]) -> f64 {
    if ccr.is_empty() {
        return f64::NAN;
    }
    ccr.iter().sum::<f64>() / ccr.len() as f64
}

/// Parse a square matrix written one row per line.
///
/// Entries are separated by commas, tabs or spaces. A first line without
/// any numbers is treated as a header, and a non-numeric first field on a
/// row as a row label; both are ignored. `#` starts a comment.
pub fn parse_confusion_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c == '\t' || c == ' ' || c == ';')
            .map(str::trim)
            .filter(|f| !f.is_empty())
            .collect();
        let numeric: Vec<bool> = fields.iter().map(|f| f.parse::<f64>().is_ok()).collect();
        if numeric.iter().all(|n| !n) {
            if rows.is_empty() {
                continue;
            }
            return Err(Error::Parse {
                line: idx + 1,
                message: "row has no numeric entries".into(),
            });
        }
        let start = usize::from(!numeric[0]);
        let values = fields[start..]
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("`{f}` is not a number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    let k = rows.len();
    if k == 0 {
        return Err(Error::Parse {
            line: 0,
            message: "no matrix rows found".into(),
        });
    }
    if let Some(i) = rows.iter().position(|r| r.len() != k) {
        return Err(Error::Data(format!(
            "matrix must be square: row {i} has {} entries for {k} rows",
            rows[i].len()
        )));
    }
    Ok(rows)
}

/// Row-normalized percentage view of a confusion matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedConfusion {
    pub class_names: Vec<String>,
    /// Full-precision row percentages; `None` for rows without samples.
    pub rows: Vec<Option<Vec<f64>>>,
    pub warnings: Vec<String>,
}

impl RenderedConfusion {
    /// Two-decimal display values; each row sums to exactly 100.00.
    pub fn display_rows(&self) -> Vec<Option<Vec<f64>>> {
        self.rows
            .iter()
            .map(|r| r.as_ref().map(|r| round_preserving_sum(r)))
            .collect()
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let width = self
            .class_names
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(6);
        let mut out = format!("{:width$}", "");
        for name in &self.class_names {
            out.push_str(&format!(" {name:>width$}"));
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(self.display_rows()) {
            out.push_str(&format!("{name:width$}"));
            match row {
                Some(values) => {
                    for v in values {
                        out.push_str(&format!(" {v:>width$.2}"));
                    }
                }
                None => {
                    for _ in &self.class_names {
                        out.push_str(&format!(" {:>width$}", "n/a"));
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Round to hundredths so that the rounded entries keep the row total
/// (largest-remainder method); every entry moves by less than 0.01.
fn round_preserving_sum(row: &[f64]) -> Vec<f64> {
    let scaled: Vec<f64> = row.iter().map(|v| v * 100.0).collect();
    let mut floors: Vec<i64> = scaled.iter().map(|v| v.floor() as i64).collect();
    let target = scaled.iter().sum::<f64>().round() as i64;
    let mut shortfall = target - floors.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - floors[a] as f64;
        let rb = scaled[b] - floors[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(row.len().max(1) * 2) {
        if shortfall <= 0 {
            break;
        }
        floors[i] += 1;
        shortfall -= 1;
    }
    floors.into_iter().map(|v| v as f64 / 100.0).collect()
}

pub fn render_confusion(cm: &ConfusionMatrix) -> RenderedConfusion {
    let rows: Vec<Vec<f64>> = cm
        .counts()
        .iter()
        .map(|row| row.iter().map(|&c| c as f64).collect())
        .collect();
    render_rows(&rows)
}

/// Row-normalize a matrix given as counts or (possibly unnormalized) percentages.
pub fn render_rows(rows: &[Vec<f64>]) -> RenderedConfusion {
    let mut warnings = Vec::new();
    let rows = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: f64 = row.iter().sum();
            if total <= 0.0 {
                warnings.push(format!("class {} has no test samples", class_name(i)));
                None
            } else {
                Some(row.iter().map(|&c| 100.0 * c / total).collect())
            }
        })
        .collect::<Vec<_>>();
    RenderedConfusion {
        class_names: (0..rows.len()).map(class_name).collect(),
        rows,
        warnings,
    }
}
