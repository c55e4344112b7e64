//! Regression error metrics and binary-classification diagnostics.
//!
//! Regression quality is summarised by MAE / MSE / RMSE. Classifier quality
//! is summarised by a [`ConfusionMatrix`] at a fixed threshold plus
//! threshold-free ROC and precision-recall areas. Metrics that are undefined
//! for a given input (precision with no positive predictions, ROC with a
//! single class, ...) are reported as `None` rather than a silent 0 or 1;
//! CSV serialization renders them as `NA`.

use std::fmt::Write as _;
use std::io::Write;

use thiserror::Error;

/// Errors from metric computations.
#[derive(Debug, Error)]
pub enum MetricsError {
    /// Paired inputs have different lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    /// A label or prediction was not exactly 0 or 1.
    #[error("non-binary input value {0}")]
    NonBinaryInput(f64),
    /// A score fell outside [0, 1] or was not finite.
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    /// Metrics over an empty sample are undefined.
    #[error("empty input")]
    EmptyInput,
    /// Failure writing an export.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Mean absolute error, mean squared error and its square root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionErrors {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
}

/// Computes MAE, MSE and RMSE between observed `y` and predicted `y_hat`.
pub fn regression_errors(y: &[f64], y_hat: &[f64]) -> Result<RegressionErrors, MetricsError> {
    if y.len() != y_hat.len() {
        return Err(MetricsError::LengthMismatch { left: y.len(), right: y_hat.len() });
    }
    if y.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = y.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for (&a, &b) in y.iter().zip(y_hat) {
        let d = a - b;
        abs_sum += d.abs();
        sq_sum += d * d;
    }
    let mae = abs_sum / n;
    let mse = sq_sum / n;
    Ok(RegressionErrors { mae, mse, rmse: mse.sqrt() })
}

/// Counts of a binary classifier's outcomes at a fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub true_pos: usize,
    pub true_neg: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl ConfusionMatrix {
    /// Total number of classified samples.
    pub fn total(&self) -> usize {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }

    /// Fraction of correct predictions.
    pub fn accuracy(&self) -> f64 {
        (self.true_pos + self.true_neg) as f64 / self.total() as f64
    }

    /// TP / (TP + FP); `None` when nothing was predicted positive.
    pub fn precision(&self) -> Option<f64> {
        let denom = self.true_pos + self.false_pos;
        (denom > 0).then(|| self.true_pos as f64 / denom as f64)
    }

    /// TP / (TP + FN); `None` when no positives exist.
    pub fn recall(&self) -> Option<f64> {
        let denom = self.true_pos + self.false_neg;
        (denom > 0).then(|| self.true_pos as f64 / denom as f64)
    }

    /// Harmonic mean of precision and recall; `None` when either is
    /// undefined or both are zero.
    pub fn f1(&self) -> Option<f64> {
        let p = self.precision()?;
        let r = self.recall()?;
        (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
    }
}

fn check_binary(values: &[f64]) -> Result<(), MetricsError> {
    match values.iter().find(|v| **v != 0.0 && **v != 1.0) {
        Some(v) => Err(MetricsError::NonBinaryInput(*v)),
        None => Ok(()),
    }
}

/// Tallies a confusion matrix from 0/1 labels and 0/1 predictions.
pub fn confusion(labels: &[f64], predicted: &[f64]) -> Result<ConfusionMatrix, MetricsError> {
    if labels.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch { left: labels.len(), right: predicted.len() });
    }
    if labels.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    check_binary(labels)?;
    check_binary(predicted)?;
    let mut m = ConfusionMatrix::default();
    for (&y, &p) in labels.iter().zip(predicted) {
        match (y == 1.0, p == 1.0) {
            (true, true) => m.true_pos += 1,
            (false, false) => m.true_neg += 1,
            (false, true) => m.false_pos += 1,
            (true, false) => m.false_neg += 1,
        }
    }
    Ok(m)
}

/// Thresholded and threshold-free diagnostics for one classifier.
///
/// `roc_auc` uses trapezoidal integration over all distinct-score
/// thresholds, so tied positive/negative pairs contribute one half.
/// `pr_auc` uses step-wise interpolation of the precision-recall curve
/// (linear interpolation is not meaningful in PR space).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
}

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v}"),
        None => "NA".to_string(),
    }
}

impl ClassificationReport {
    /// Column names matching [`ClassificationReport::to_csv_row`].
    pub fn csv_header() -> &'static str {
        "threshold,accuracy,precision,recall,f1,roc_auc,pr_auc"
    }

    /// One CSV data row; undefined metrics serialize as `NA`.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.threshold,
            self.accuracy,
            fmt_opt(self.precision),
            fmt_opt(self.recall),
            fmt_opt(self.f1),
            fmt_opt(self.roc_auc),
            fmt_opt(self.pr_auc),
        )
    }

    /// Aligned name/value text block for terminal display.
    pub fn to_table(&self) -> String {
        let rows = [
            ("threshold", format!("{}", self.threshold)),
            ("tp", self.confusion.true_pos.to_string()),
            ("tn", self.confusion.true_neg.to_string()),
            ("fp", self.confusion.false_pos.to_string()),
            ("fn", self.confusion.false_neg.to_string()),
            ("accuracy", format!("{:.6}", self.accuracy)),
            ("precision", fmt_opt(self.precision)),
            ("recall", fmt_opt(self.recall)),
            ("f1", fmt_opt(self.f1)),
            ("roc_auc", fmt_opt(self.roc_auc)),
            ("pr_auc", fmt_opt(self.pr_auc)),
        ];
        let width = rows.iter().map(|(name, _)| name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (name, value) in rows {
            let _ = writeln!(out, "{name:<width$}  {value}");
        }
        out
    }
}

/// Score groups shared by the ROC and PR sweeps: for each distinct score,
/// descending, the number of positives and negatives carrying it.
fn score_groups(labels: &[f64], scores: &[f64]) -> Vec<(f64, usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for idx in order {
        let s = scores[idx];
        let pos = labels[idx] == 1.0;
        match groups.last_mut() {
            Some(g) if g.0 == s => {
                if pos {
                    g.1 += 1;
                } else {
                    g.2 += 1;
                }
            }
            _ => groups.push((s, pos as usize, !pos as usize)),
        }
    }
    groups
}

fn check_scores(labels: &[f64], scores: &[f64]) -> Result<(), MetricsError> {
    if labels.len() != scores.len() {
        return Err(MetricsError::LengthMismatch { left: labels.len(), right: scores.len() });
    }
    if labels.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    check_binary(labels)?;
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(MetricsError::ScoreOutOfRange(*s));
    }
    Ok(())
}

/// ROC curve points `(false positive rate, true positive rate)`, one per
/// distinct score threshold, starting at (0,0) and ending at (1,1).
pub fn roc_curve(labels: &[f64], scores: &[f64]) -> Result<Vec<(f64, f64)>, MetricsError> {
    check_scores(labels, scores)?;
    let n_pos = labels.iter().filter(|v| **v == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (_, g_pos, g_neg) in score_groups(labels, scores) {
        tp += g_pos;
        fp += g_neg;
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(points)
}

/// Precision-recall curve points `(recall, precision)`, one per distinct
/// score threshold, in increasing recall order.
pub fn pr_curve(labels: &[f64], scores: &[f64]) -> Result<Vec<(f64, f64)>, MetricsError> {
    check_scores(labels, scores)?;
    let n_pos = labels.iter().filter(|v| **v == 1.0).count();
    if n_pos == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (_, g_pos, g_neg) in score_groups(labels, scores) {
        tp += g_pos;
        fp += g_neg;
        points.push((tp as f64 / n_pos as f64, tp as f64 / (tp + fp) as f64));
    }
    Ok(points)
}

fn roc_auc(labels: &[f64], scores: &[f64]) -> Option<f64> {
    let points = roc_curve(labels, scores).ok()?;
    let mut auc = 0.0;
    for pair in points.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        auc += (x1 - x0) * (y0 + y1) / 2.0;
    }
    Some(auc)
}

fn pr_auc(labels: &[f64], scores: &[f64]) -> Option<f64> {
    let points = pr_curve(labels, scores).ok()?;
    let mut auc = 0.0;
    let mut prev_recall = 0.0;
    for (recall, precision) in points {
        auc += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Some(auc)
}

/// Full classification diagnostics: confusion-derived metrics at
/// `threshold` (predicted positive when score > threshold) plus ROC and
/// PR areas over all thresholds.
pub fn classification_report(
    labels: &[f64],
    scores: &[f64],
    threshold: f64,
) -> Result<ClassificationReport, MetricsError> {
    check_scores(labels, scores)?;
    let predicted: Vec<f64> = scores.iter().map(|s| f64::from(u8::from(*s > threshold))).collect();
    let confusion = confusion(labels, &predicted)?;
    Ok(ClassificationReport {
        threshold,
        confusion,
        accuracy: confusion.accuracy(),
        precision: confusion.precision(),
        recall: confusion.recall(),
        f1: confusion.f1(),
        roc_auc: roc_auc(labels, scores),
        pr_auc: pr_auc(labels, scores),
    })
}

/// Writes curve points as a two-column CSV with the given header names.
pub fn write_curve_csv<W: Write>(
    points: &[(f64, f64)],
    headers: (&str, &str),
    writer: &mut W,
) -> Result<(), MetricsError> {
    writeln!(writer, "{},{}", headers.0, headers.1)?;
    for (x, y) in points {
        writeln!(writer, "{x},{y}")?;
    }
    Ok(())
}
