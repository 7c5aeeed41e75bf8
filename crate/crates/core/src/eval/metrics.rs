use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::csi::AmplitudeMatrix;

/// Mean over elements of `(a - b)^2`. Inputs are expected on the `[0, 1]` scale.
pub fn normalized_mse(a: &AmplitudeMatrix, b: &AmplitudeMatrix) -> Result<f64, EvalError> {
    if a.values().dim() != b.values().dim() {
        return Err(EvalError::ShapeMismatch {
            expected: format!("{:?}", a.values().dim()),
            found: format!("{:?}", b.values().dim()),
        });
    }
    if a.values().is_empty() {
        return Err(EvalError::Empty("normalized_mse"));
    }
    let n = a.values().len() as f64;
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n)
}

/// Average of per-pair [`normalized_mse`] values.
pub fn dataset_normalized_mse<'a>(
    pairs: impl IntoIterator<Item = (&'a AmplitudeMatrix, &'a AmplitudeMatrix)>,
) -> Result<f64, EvalError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (a, b) in pairs {
        sum += normalized_mse(a, b)?;
        n += 1;
    }
    if n == 0 {
        return Err(EvalError::Empty("dataset_normalized_mse"));
    }
    Ok(sum / n as f64)
}

/// Square count matrix; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix { counts: vec![vec![0; classes]; classes] }
    }

    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self, EvalError> {
        if truth.len() != predicted.len() {
            return Err(EvalError::ShapeMismatch {
                expected: format!("{} predictions", truth.len()),
                found: predicted.len().to_string(),
            });
        }
        let mut m = ConfusionMatrix::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.record(t, p)?;
        }
        Ok(m)
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<(), EvalError> {
        let k = self.classes();
        if truth >= k || predicted >= k {
            return Err(EvalError::UnknownClass(truth.max(predicted)));
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    /// `trace / total`, or 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    /// Zero when nothing was predicted as `class`.
    pub fn precision(&self, class: usize) -> f64 {
        let predicted: u64 = self.counts.iter().map(|row| row[class]).sum();
        if predicted == 0 {
            0.0
        } else {
            self.counts[class][class] as f64 / predicted as f64
        }
    }

    /// Zero when `class` has no samples.
    pub fn recall(&self, class: usize) -> f64 {
        match self.support(class) {
            0 => 0.0,
            s => self.counts[class][class] as f64 / s as f64,
        }
    }

    /// Header row `true\pred,<labels>` then one row per true class.
    pub fn to_csv(&self, labels: &[String]) -> String {
        let mut out = String::from("true\\pred");
        for l in labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in labels.iter().zip(&self.counts) {
            out.push_str(l);
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub support: u64,
}

/// Classification summary written as `report.json` plus `confusion.csv`.
///
/// JSON schema:
///
/// ```text
/// { "accuracy": f64, "labels": [str], "confusion": {"counts": [[u64]]},
///   "normalized_mse": f64 | null,
///   "per_class": [{"label": str, "precision": f64, "recall": f64, "support": u64}] }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub labels: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub normalized_mse: Option<f64>,
    pub per_class: Vec<ClassMetrics>,
}

impl EvalReport {
    pub fn new(labels: Vec<String>, confusion: ConfusionMatrix, normalized_mse: Option<f64>) -> Self {
        let per_class = labels
            .iter()
            .enumerate()
            .map(|(i, l)| ClassMetrics {
                label: l.clone(),
                precision: confusion.precision(i),
                recall: confusion.recall(i),
                support: confusion.support(i),
            })
            .collect();
        EvalReport { accuracy: confusion.accuracy(), labels, confusion, normalized_mse, per_class }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn confusion_csv(&self) -> String {
        self.confusion.to_csv(&self.labels)
    }

    /// Writes `report.json` and `confusion.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), EvalError> {
        std::fs::create_dir_all(dir).map_err(|e| EvalError::io(dir, e))?;
        let json = dir.join("report.json");
        std::fs::write(&json, self.to_json()).map_err(|e| EvalError::io(&json, e))?;
        let csv = dir.join("confusion.csv");
        std::fs::write(&csv, self.confusion_csv()).map_err(|e| EvalError::io(&csv, e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn amp(a: ndarray::Array2<f64>) -> AmplitudeMatrix {
        AmplitudeMatrix::new(a)
    }

    #[test]
    fn mse_examples() {
        let a = amp(array![[1.0, 0.0]]);
        assert_eq!(normalized_mse(&a, &a).unwrap(), 0.0);
        let ones = amp(ndarray::Array2::ones((3, 4)));
        let zeros = amp(ndarray::Array2::zeros((3, 4)));
        assert_eq!(normalized_mse(&ones, &zeros).unwrap(), 1.0);
        let b = amp(array![[0.5, 0.5]]);
        assert!((normalized_mse(&a, &b).unwrap() - 0.25).abs() < 1e-12);
        assert!(normalized_mse(&a, &ones).is_err());
    }

    #[test]
    fn dataset_mse_averages_pairs() {
        let a = amp(array![[1.0]]);
        let b = amp(array![[0.0]]);
        let m = dataset_normalized_mse([(&a, &b), (&a, &a)]).unwrap();
        assert_eq!(m, 0.5);
    }

    #[test]
    fn confusion_accuracy_is_trace_over_total() {
        let mut m = ConfusionMatrix::from_predictions(3, &[0, 0, 1, 2, 2], &[0, 1, 1, 2, 0]).unwrap();
        assert_eq!(m.total(), 5);
        assert_eq!(m.accuracy(), 3.0 / 5.0);
        assert_eq!(m.support(0), 2);
        assert_eq!(m.recall(0), 0.5);
        assert_eq!(m.precision(0), 0.5);
        assert_eq!(m.precision(1), 0.5);
        assert!(m.record(3, 0).is_err());
    }

    #[test]
    fn report_serializes() {
        let labels = vec!["a".to_string(), "b".to_string()];
        let m = ConfusionMatrix::from_predictions(2, &[0, 1], &[0, 0]).unwrap();
        let r = EvalReport::new(labels, m, Some(0.1));
        let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.confusion_csv(), "true\\pred,a,b\na,1,0\nb,1,0\n");
    }
}
