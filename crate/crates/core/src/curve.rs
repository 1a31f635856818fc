//! Van der Waals curves: order parameter against control parameter, traced by
//! constrained continuation.

use crate::scan::{wiggle_stats, ContinuationFailure, WiggleStats};
use crate::table::Table;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VdwPoint {
    /// Average order parameter (magnetization or warning entropy).
    pub order: f64,
    /// Control parameter solved for (field or scaled clause density).
    pub control: f64,
}

#[derive(Clone, Debug)]
pub struct VdwCurve {
    pub order_name: &'static str,
    pub control_name: &'static str,
    pub points: Vec<VdwPoint>,
    /// Full chain profile behind each point, positions `-L..=L`.
    pub profiles: Vec<Vec<f64>>,
    pub metadata: Vec<(String, String)>,
    /// Set when continuation stopped before the end of the grid.
    pub failure: Option<ContinuationFailure>,
}

impl VdwCurve {
    pub fn orders(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.order).collect()
    }

    pub fn controls(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.control).collect()
    }

    /// Points whose order parameter lies in `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> Vec<VdwPoint> {
        self.points
            .iter()
            .copied()
            .filter(|p| p.order >= lo && p.order <= hi)
            .collect()
    }

    /// Oscillation of the control parameter over the order window `[lo, hi]`.
    pub fn wiggles(&self, lo: f64, hi: f64, floor: f64) -> WiggleStats {
        let ys: Vec<f64> = self.window(lo, hi).iter().map(|p| p.control).collect();
        wiggle_stats(&ys, floor)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new([self.order_name, self.control_name]);
        t.params = self.metadata.clone();
        if let Some(f) = &self.failure {
            t.params.push(("failed_at".into(), f.control.to_string()));
            t.params.push(("last_good".into(), f.last_good.to_string()));
        }
        for p in &self.points {
            t.push_row([p.order, p.control]);
        }
        t
    }
}
