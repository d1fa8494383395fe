//! Confusion matrix, per-class recall and total accuracy.

use std::fmt::Write as _;

use aerogh_core::simcore::DiseaseClass;
use serde::{Deserialize, Serialize};

use crate::error::VisionError;
use crate::imaging::LabeledImage;
use crate::model::{ClassifierModel, N_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Rows are true classes, columns predicted classes.
    pub confusion: [[u64; N_CLASSES]; N_CLASSES],
    /// Diagonal over row sum; 0 for a class with no test images.
    pub per_class_recall: [f64; N_CLASSES],
    pub total_accuracy: f64,
    #[serde(default)]
    pub train_curve: Vec<f64>,
    #[serde(default)]
    pub val_curve: Vec<f64>,
}

impl EvalReport {
    pub fn from_confusion(confusion: [[u64; N_CLASSES]; N_CLASSES]) -> Self {
        let mut recall = [0.0; N_CLASSES];
        for (c, row) in confusion.iter().enumerate() {
            let n: u64 = row.iter().sum();
            recall[c] = if n == 0 { 0.0 } else { row[c] as f64 / n as f64 };
        }
        let total: u64 = confusion.iter().flatten().sum();
        let trace: u64 = (0..N_CLASSES).map(|c| confusion[c][c]).sum();
        let total_accuracy = if total == 0 { 0.0 } else { trace as f64 / total as f64 };
        Self { confusion, per_class_recall: recall, total_accuracy, train_curve: Vec::new(), val_curve: Vec::new() }
    }

    pub fn row_sums(&self) -> [u64; N_CLASSES] {
        self.confusion.map(|row| row.iter().sum())
    }

    /// Text table: counts, recall per class, total.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10}{:>10}{:>10}{:>10}{:>10}", "true\\pred", "healthy", "drought", "rust", "recall");
        for class in DiseaseClass::ALL {
            let row = self.confusion[class.index()];
            let _ = writeln!(
                s,
                "{:<10}{:>10}{:>10}{:>10}{:>9.2}%",
                class.name(),
                row[0],
                row[1],
                row[2],
                100.0 * self.per_class_recall[class.index()]
            );
        }
        let _ = write!(s, "total accuracy {:.2}%", 100.0 * self.total_accuracy);
        s
    }
}

pub fn evaluate(model: &ClassifierModel, test: &[LabeledImage]) -> Result<EvalReport, VisionError> {
    if test.is_empty() {
        return Err(VisionError::Dataset("test set is empty".into()));
    }
    let mut confusion = [[0u64; N_CLASSES]; N_CLASSES];
    for img in test {
        let p = model.predict(img)?;
        confusion[img.label.index()][p.label.index()] += 1;
    }
    Ok(EvalReport::from_confusion(confusion))
}
