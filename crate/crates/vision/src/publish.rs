//! Classify a session's leaf images and report per-plant results to telemetry.

use aerogh_core::controller::{Alert, AlertKind, AlertManager};
use aerogh_core::simcore::DiseaseClass;
use aerogh_core::telemetry::{Broker, FrameValue, TelemetryFrame};
use aerogh_core::TelemetryError;
use serde::{Deserialize, Serialize};

use crate::error::VisionError;
use crate::imaging::LabeledImage;
use crate::model::ClassifierModel;

/// Where result frames go. The broker is the real one; tests substitute a
/// flaky sink.
pub trait FramePublisher {
    fn publish_frame(&self, frame: TelemetryFrame) -> Result<(), TelemetryError>;
}

impl FramePublisher for Broker {
    fn publish_frame(&self, frame: TelemetryFrame) -> Result<(), TelemetryError> {
        self.publish(frame)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantResult {
    pub plant: usize,
    pub label: DiseaseClass,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PublishReport {
    pub results: Vec<PlantResult>,
    pub alerts: Vec<Alert>,
    /// Frames delivered in this call, including earlier retries.
    pub published: usize,
    /// Frames still waiting for the telemetry path to come back.
    pub pending: usize,
}

#[derive(Debug, Clone)]
pub struct DiseaseReporter {
    pub alert_threshold: f64,
    pub attempts: usize,
    pending: Vec<TelemetryFrame>,
}

impl Default for DiseaseReporter {
    fn default() -> Self {
        Self { alert_threshold: 0.8, attempts: 3, pending: Vec::new() }
    }
}

/// `plant<k>-...` ids carry the plant number; anything else falls back to
/// the position in the session.
fn plant_index(img: &LabeledImage, position: usize) -> usize {
    img.source_id
        .strip_prefix("plant")
        .and_then(|s| s.split(|c: char| !c.is_ascii_digit()).next())
        .and_then(|d| d.parse().ok())
        .unwrap_or(position)
}

impl DiseaseReporter {
    pub fn new(alert_threshold: f64) -> Self {
        Self { alert_threshold, ..Self::default() }
    }

    pub fn pending(&self) -> &[TelemetryFrame] {
        &self.pending
    }

    fn send(&mut self, sink: &dyn FramePublisher, frame: TelemetryFrame) -> bool {
        for attempt in 1..=self.attempts.max(1) {
            match sink.publish_frame(frame.clone()) {
                Ok(()) => return true,
                Err(e) => log::warn!("publish {} failed (attempt {attempt}): {e}", frame.topic),
            }
        }
        self.pending.push(frame);
        false
    }

    /// Flush earlier failures, then publish one `gh/plant<k>/disease` frame
    /// per image and raise a disease alert for confident non-healthy results.
    #[allow(clippy::too_many_arguments)]
    pub fn classify_and_publish(
        &mut self,
        model: &ClassifierModel,
        images: &[LabeledImage],
        sink: &dyn FramePublisher,
        alerts: &mut AlertManager,
        sim_time: f64,
        wall_time: &str,
    ) -> Result<PublishReport, VisionError> {
        let mut report = PublishReport::default();
        for frame in std::mem::take(&mut self.pending) {
            report.published += self.send(sink, frame) as usize;
        }
        for (pos, img) in images.iter().enumerate() {
            let p = model.predict(img)?;
            let plant = plant_index(img, pos);
            let probability = p.probabilities[p.label.index()];
            let subject = format!("plant{plant}");
            log::info!("{subject}: {} p={probability:.4}", p.label);
            let frame = TelemetryFrame::new(
                format!("gh/{subject}/disease"),
                sim_time,
                wall_time,
                FrameValue::Text(format!("{}@{probability:.4}", p.label.name())),
                "",
            );
            report.published += self.send(sink, frame) as usize;
            if p.label != DiseaseClass::Healthy && probability >= self.alert_threshold {
                if let Some(alert) = alerts.raise(AlertKind::Disease, &subject, sim_time) {
                    let frame = TelemetryFrame::new(
                        format!("gh/alert/{}", AlertKind::Disease.name()),
                        sim_time,
                        wall_time,
                        FrameValue::Text(format!("{}:{}", alert.id, alert.subject)),
                        "",
                    );
                    report.published += self.send(sink, frame) as usize;
                    report.alerts.push(alert);
                }
            } else {
                alerts.clear(AlertKind::Disease, &subject);
            }
            report.results.push(PlantResult { plant, label: p.label, probability });
        }
        report.pending = self.pending.len();
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Architecture, N_CLASSES};
    use aerogh_core::telemetry::BrokerConfig;
    use std::cell::Cell;

    /// A model that always answers `class` with probability `p`: zero weights
    /// everywhere except the output bias.
    fn rigged(class: DiseaseClass, p: f64) -> ClassifierModel {
        let mut m = ClassifierModel::zeros(Architecture::default()).unwrap();
        // softmax([b, 0, 0]) = p  =>  b = ln(2p / (1 - p))
        let b = (2.0 * p / (1.0 - p)).ln();
        let n = m.n_params();
        let bias = &mut m.params_mut()[n - N_CLASSES..];
        bias[class.index()] = b;
        m
    }

    fn session(n: usize) -> Vec<LabeledImage> {
        crate::synth::capture_session(&vec![DiseaseClass::Healthy; n], 20, 1)
    }

    fn broker() -> Broker {
        Broker::new(BrokerConfig::default())
    }

    #[test]
    fn healthy_session_raises_nothing() {
        let b = broker();
        let mut alerts = AlertManager::new();
        let r = DiseaseReporter::default()
            .classify_and_publish(&rigged(DiseaseClass::Healthy, 0.99), &session(3), &b, &mut alerts, 0.0, "w")
            .unwrap();
        assert!(r.alerts.is_empty());
        assert_eq!(r.published, 3);
        assert_eq!(b.retained_value("gh/plant2/disease").unwrap().value, FrameValue::Text("healthy@0.9900".into()));
    }

    #[test]
    fn confident_rust_alerts_once_per_plant() {
        let b = broker();
        let mut alerts = AlertManager::new();
        let mut rep = DiseaseReporter::default();
        let r = rep.classify_and_publish(&rigged(DiseaseClass::Rust, 0.95), &session(1), &b, &mut alerts, 5.0, "w").unwrap();
        assert_eq!(r.alerts.len(), 1);
        assert_eq!(r.alerts[0].subject, "plant0");
        assert_eq!(b.retained_value("gh/plant0/disease").unwrap().value, FrameValue::Text("rust@0.9500".into()));
        assert_eq!(b.retained_value("gh/alert/disease").unwrap().value, FrameValue::Text("a-0:plant0".into()));
        // still diseased next session: no repeat
        let r = rep.classify_and_publish(&rigged(DiseaseClass::Rust, 0.95), &session(1), &b, &mut alerts, 9.0, "w").unwrap();
        assert!(r.alerts.is_empty());
    }

    #[test]
    fn below_threshold_publishes_without_alert() {
        let b = broker();
        let mut alerts = AlertManager::new();
        let r = DiseaseReporter::default()
            .classify_and_publish(&rigged(DiseaseClass::Rust, 0.5), &session(1), &b, &mut alerts, 0.0, "w")
            .unwrap();
        assert!(r.alerts.is_empty());
        assert_eq!(b.retained_value("gh/plant0/disease").unwrap().value, FrameValue::Text("rust@0.5000".into()));
        let r = DiseaseReporter::new(0.4)
            .classify_and_publish(&rigged(DiseaseClass::Rust, 0.5), &session(1), &b, &mut alerts, 0.0, "w")
            .unwrap();
        assert_eq!(r.alerts.len(), 1);
    }

    struct Flaky {
        down: Cell<bool>,
        delivered: Cell<usize>,
    }

    impl FramePublisher for Flaky {
        fn publish_frame(&self, _: TelemetryFrame) -> Result<(), TelemetryError> {
            if self.down.get() {
                return Err(TelemetryError::BadRecord("link down".into()));
            }
            self.delivered.set(self.delivered.get() + 1);
            Ok(())
        }
    }

    #[test]
    fn failed_publishes_are_retried_later() {
        let sink = Flaky { down: Cell::new(true), delivered: Cell::new(0) };
        let mut alerts = AlertManager::new();
        let mut rep = DiseaseReporter::default();
        let model = rigged(DiseaseClass::Healthy, 0.9);
        let r = rep.classify_and_publish(&model, &session(2), &sink, &mut alerts, 0.0, "w").unwrap();
        assert_eq!((r.published, r.pending, r.results.len()), (0, 2, 2));
        sink.down.set(false);
        let r = rep.classify_and_publish(&model, &session(2), &sink, &mut alerts, 4.0, "w").unwrap();
        assert_eq!((r.published, r.pending), (4, 0));
        assert_eq!(sink.delivered.get(), 4);
    }
}
