//! Imaging-session arithmetic: one photo per surviving plant every few days.

use serde::{Deserialize, Serialize};

use crate::error::VisionError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub days: Vec<u32>,
    pub n_plants: usize,
    pub total_images: usize,
}

/// Sessions on `start`, `start + interval`, ... up to and including `end`.
pub fn plan_capture_sessions(start_day: u32, end_day: u32, interval_days: u32, n_plants: usize) -> Result<SessionPlan, VisionError> {
    if start_day > end_day {
        return Err(VisionError::Config(format!("start day {start_day} is after end day {end_day}")));
    }
    if interval_days == 0 {
        return Err(VisionError::Config("session interval must be >= 1 day".into()));
    }
    let days: Vec<u32> = (start_day..=end_day).step_by(interval_days as usize).collect();
    let total_images = days.len() * n_plants;
    Ok(SessionPlan { days, n_plants, total_images })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rooted_cuttings_give_798_images() {
        let p = plan_capture_sessions(20, 40, 4, 133).unwrap();
        assert_eq!(p.days, vec![20, 24, 28, 32, 36, 40]);
        assert_eq!(p.total_images, 798);
    }

    #[test]
    fn edge_cases() {
        assert_eq!(plan_capture_sessions(20, 20, 4, 133).unwrap().total_images, 133);
        assert_eq!(plan_capture_sessions(20, 40, 4, 144).unwrap().total_images, 864);
        assert_eq!(plan_capture_sessions(20, 23, 4, 10).unwrap().days, vec![20]);
        assert!(plan_capture_sessions(21, 20, 4, 1).is_err());
        assert!(plan_capture_sessions(20, 40, 0, 1).is_err());
    }
}
