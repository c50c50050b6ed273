use std::path::Path;

use crate::error::{Error, Result};
use crate::model::LossBreakdown;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub step: u64,
    pub kl_weight: f64,
    pub kl: f64,
    pub reconstruction: f64,
    pub bow: f64,
    pub total: f64,
}

impl MetricsRecord {
    pub fn new(step: u64, kl_weight: f64, loss: &LossBreakdown) -> Self {
        MetricsRecord {
            step,
            kl_weight,
            kl: loss.kl,
            reconstruction: loss.reconstruction,
            bow: loss.bow,
            total: loss.total,
        }
    }
}

/// Per-step training records with strictly increasing steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    records: Vec<MetricsRecord>,
}

pub const METRICS_HEADER: &str = "step,kl_weight,kl,reconstruction,bow,total";

impl MetricsLog {
    pub fn push(&mut self, record: MetricsRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.step <= last.step {
                return Err(Error::InvalidArgument(format!(
                    "metrics step {} after {}",
                    record.step, last.step
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[MetricsRecord] {
        &self.records
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.step, r.kl_weight, r.kl, r.reconstruction, r.bow, r.total
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
