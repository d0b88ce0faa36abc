use serde::{Deserialize, Serialize};

use super::{ForestModel, Samples};
use crate::error::{Error, Result};
use crate::Label;

/// Held-out classification report. `confusion[truth][predicted]`, indexed
/// by [`Label::index`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: [[u64; 2]; 2],
    /// Per class, `[LOS, NLOS]`. Zero when the class was never predicted.
    pub precision: [f64; 2],
    /// Per class, `[LOS, NLOS]`. Zero when the class is absent.
    pub recall: [f64; 2],
    pub n_test: u64,
}

pub fn evaluate_predictions(truth: &[Label], predicted: &[Label]) -> Result<EvalReport> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch("truth and predictions differ in length".into()));
    }
    if truth.is_empty() {
        return Err(Error::Empty("no test rows"));
    }
    let mut confusion = [[0u64; 2]; 2];
    for (t, p) in truth.iter().zip(predicted) {
        confusion[t.index()][p.index()] += 1;
    }
    let n_test = truth.len() as u64;
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = [0, 1].map(|c| ratio(confusion[c][c], confusion[0][c] + confusion[1][c]));
    let recall = [0, 1].map(|c| ratio(confusion[c][c], confusion[c][0] + confusion[c][1]));
    Ok(EvalReport {
        accuracy: ratio(confusion[0][0] + confusion[1][1], n_test),
        confusion,
        precision,
        recall,
        n_test,
    })
}

pub fn evaluate(model: &ForestModel, test: &Samples) -> Result<EvalReport> {
    if test.n_features() != model.feature_names.len() {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} features, test rows have {}",
            model.feature_names.len(),
            test.n_features()
        )));
    }
    evaluate_predictions(&test.labels, &model.predict_all(test))
}
