//! Precision/recall/F1 metrics over the three sentiment classes, plus the
//! text results table used by the CLI reports.
//!
//! Macro averages cover only classes that occur in the gold labels; weighted
//! averages weight per-class values by gold support. The rendered results
//! table reports the weighted averages (the task's selection metric);
//! [`detail_report`] prints both side by side.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SentimentLabel;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction/gold length mismatch: {preds} vs {gold}")]
    LengthMismatch { preds: usize, gold: usize },
    #[error("cannot evaluate an empty label list")]
    Empty,
}

/// Rows are gold labels, columns are predictions, both in
/// [`SentimentLabel`] index order (positive, negative, neutral).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[usize; 3]; 3]);

impl ConfusionMatrix {
    pub fn from_pairs(
        preds: &[SentimentLabel],
        gold: &[SentimentLabel],
    ) -> Result<ConfusionMatrix, EvalError> {
        if preds.len() != gold.len() {
            return Err(EvalError::LengthMismatch { preds: preds.len(), gold: gold.len() });
        }
        if preds.is_empty() {
            return Err(EvalError::Empty);
        }
        let mut m = [[0usize; 3]; 3];
        for (&p, &g) in preds.iter().zip(gold.iter()) {
            m[g.index()][p.index()] += 1;
        }
        Ok(ConfusionMatrix(m))
    }

    pub fn at(&self, gold: SentimentLabel, pred: SentimentLabel) -> usize {
        self.0[gold.index()][pred.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().flatten().sum()
    }

    /// Gold occurrences of class `c` (row sum).
    pub fn support(&self, c: SentimentLabel) -> usize {
        self.0[c.index()].iter().sum()
    }

    /// Predicted occurrences of class `c` (column sum).
    pub fn predicted(&self, c: SentimentLabel) -> usize {
        self.0.iter().map(|row| row[c.index()]).sum()
    }

    pub fn true_positives(&self, c: SentimentLabel) -> usize {
        self.0[c.index()][c.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: ConfusionMatrix,
    /// Indexed by [`SentimentLabel::index`].
    pub per_class: [ClassMetrics; 3],
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    /// Classes the model never predicted (precision and F1 forced to 0).
    pub zero_predicted: Vec<SentimentLabel>,
    /// Classes absent from the gold labels (excluded from macro averages).
    pub zero_support: Vec<SentimentLabel>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Compute all metrics from parallel prediction/gold lists.
pub fn evaluate(preds: &[SentimentLabel], gold: &[SentimentLabel]) -> Result<Metrics, EvalError> {
    let confusion = ConfusionMatrix::from_pairs(preds, gold)?;
    let n = confusion.total();

    let mut per_class = [ClassMetrics {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        support: 0,
        predicted: 0,
    }; 3];
    let mut zero_predicted = Vec::new();
    let mut zero_support = Vec::new();

    for &c in &SentimentLabel::ALL {
        let tp = confusion.true_positives(c);
        let support = confusion.support(c);
        let predicted = confusion.predicted(c);
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class[c.index()] = ClassMetrics { precision, recall, f1, support, predicted };
        if predicted == 0 {
            zero_predicted.push(c);
        }
        if support == 0 {
            zero_support.push(c);
        }
    }

    let present: Vec<&ClassMetrics> =
        per_class.iter().filter(|m| m.support > 0).collect();
    let k = present.len() as f64;
    let macro_precision = present.iter().map(|m| m.precision).sum::<f64>() / k;
    let macro_recall = present.iter().map(|m| m.recall).sum::<f64>() / k;
    let macro_f1 = present.iter().map(|m| m.f1).sum::<f64>() / k;

    let nf = n as f64;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class.iter().map(|m| m.support as f64 * f(m)).sum::<f64>() / nf
    };
    let weighted_precision = weighted(|m| m.precision);
    let weighted_recall = weighted(|m| m.recall);
    let weighted_f1 = weighted(|m| m.f1);

    let correct: usize = SentimentLabel::ALL.iter().map(|&c| confusion.true_positives(c)).sum();
    let accuracy = correct as f64 / nf;

    Ok(Metrics {
        confusion,
        per_class,
        accuracy,
        macro_precision,
        macro_recall,
        macro_f1,
        weighted_precision,
        weighted_recall,
        weighted_f1,
        zero_predicted,
        zero_support,
    })
}

/// One line of the results table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub representation: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ResultRow {
    /// Build a row from full metrics using the weighted averages.
    pub fn from_metrics(model: &str, representation: &str, m: &Metrics) -> ResultRow {
        ResultRow {
            model: model.to_string(),
            representation: representation.to_string(),
            precision: m.weighted_precision,
            recall: m.weighted_recall,
            f1: m.weighted_f1,
        }
    }
}

/// Render the aligned results table: Model | Representations | Precision |
/// Recall | f1-Score, values with four decimals, rows in input order.
pub fn results_table(rows: &[ResultRow]) -> String {
    assert!(!rows.is_empty(), "results_table needs at least one row");
    let headers = ["Model", "Representations", "Precision", "Recall", "f1-Score"];
    let model_w = rows
        .iter()
        .map(|r| r.model.len())
        .chain([headers[0].len()])
        .max()
        .unwrap();
    let repr_w = rows
        .iter()
        .map(|r| r.representation.len())
        .chain([headers[1].len()])
        .max()
        .unwrap();

    let mut out = String::new();
    out.push_str(&format!(
        "{:<model_w$}  {:<repr_w$}  {:>9}  {:>9}  {:>9}\n",
        headers[0], headers[1], headers[2], headers[3], headers[4]
    ));
    for row in rows {
        out.push_str(&format!(
            "{:<model_w$}  {:<repr_w$}  {:>9.4}  {:>9.4}  {:>9.4}\n",
            row.model, row.representation, row.precision, row.recall, row.f1
        ));
    }
    out
}

/// Full per-class breakdown with macro and weighted averages and flags.
pub fn detail_report(m: &Metrics) -> String {
    let mut out = String::new();
    out.push_str("class      precision   recall       f1  support\n");
    for &c in &SentimentLabel::ALL {
        let pc = &m.per_class[c.index()];
        out.push_str(&format!(
            "{:<10} {:>9.4} {:>8.4} {:>8.4} {:>8}\n",
            c.surface(),
            pc.precision,
            pc.recall,
            pc.f1,
            pc.support
        ));
    }
    out.push_str(&format!(
        "macro      {:>9.4} {:>8.4} {:>8.4}\n",
        m.macro_precision, m.macro_recall, m.macro_f1
    ));
    out.push_str(&format!(
        "weighted   {:>9.4} {:>8.4} {:>8.4}\n",
        m.weighted_precision, m.weighted_recall, m.weighted_f1
    ));
    out.push_str(&format!("accuracy   {:>9.4}\n", m.accuracy));
    for c in &m.zero_predicted {
        out.push_str(&format!("note: class {} was never predicted\n", c.surface()));
    }
    for c in &m.zero_support {
        out.push_str(&format!("note: class {} absent from gold labels\n", c.surface()));
    }
    out
}
