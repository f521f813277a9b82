//! Output of a density-evolution run.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::densities::ConditionalDensityPair;
use crate::Result;

/// Switches shared by the discrete engines.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Track only the bit-0 densities and force the bit-1 densities to their
    /// mirror image, as conventional all-zero-codeword evolution does.
    pub all_zero_reference: bool,
    /// Keep the measured message densities of every iteration.
    pub record_history: bool,
}

/// Per-iteration error trace plus the final conditional densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeRunResult {
    /// Message error probability at iterations `1..=L`.
    pub pe: Vec<f64>,
    /// Error probability of the a-posteriori hard decision at `1..=L`.
    pub pe_app: Vec<f64>,
    /// Wrong-decision mass of the measured messages given bit 0.
    pub err_given0: Vec<f64>,
    /// Wrong-decision mass of the measured messages given bit 1.
    pub err_given1: Vec<f64>,
    /// Standard error of each `pe` entry (sampled engines only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pe_std_err: Option<Vec<f64>>,
    /// Realized `(b0, b1)` per iteration (Gallager B only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<(usize, usize)>>,
    /// Iterations at which threshold selection fell back to its default.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fallback_iterations: Vec<usize>,
    /// Largest total-mass deviation absorbed by renormalization.
    pub mass_drift: f64,
    /// Densities of the measured variable-to-check messages after the last iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_vn: Option<ConditionalDensityPair>,
    /// Check-to-variable densities after the last iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_cn: Option<ConditionalDensityPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<ConditionalDensityPair>>,
    /// Free-form warnings raised during the run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl DeRunResult {
    pub(crate) fn with_capacity(iterations: usize) -> Self {
        DeRunResult {
            pe: Vec::with_capacity(iterations),
            pe_app: Vec::with_capacity(iterations),
            err_given0: Vec::with_capacity(iterations),
            err_given1: Vec::with_capacity(iterations),
            pe_std_err: None,
            schedule: None,
            fallback_iterations: Vec::new(),
            mass_drift: 0.0,
            final_vn: None,
            final_cn: None,
            history: None,
            flags: Vec::new(),
        }
    }

    pub fn iterations(&self) -> usize {
        self.pe.len()
    }

    pub fn final_pe(&self) -> f64 {
        self.pe.last().copied().unwrap_or(1.0)
    }

    pub fn final_pe_app(&self) -> f64 {
        self.pe_app.last().copied().unwrap_or(1.0)
    }

    /// CSV trace: iteration, Pe, APP error, conditional error masses and, when
    /// present, the threshold schedule and standard errors.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["iteration", "pe", "pe_app", "err_given0", "err_given1"];
        if self.schedule.is_some() {
            header.extend(["b0", "b1"]);
        }
        if self.pe_std_err.is_some() {
            header.push("pe_std_err");
        }
        w.write_record(&header)?;
        for i in 0..self.pe.len() {
            let mut rec = vec![
                (i + 1).to_string(),
                self.pe[i].to_string(),
                self.pe_app.get(i).map(|v| v.to_string()).unwrap_or_default(),
                self.err_given0[i].to_string(),
                self.err_given1[i].to_string(),
            ];
            if let Some(s) = &self.schedule {
                rec.push(s[i].0.to_string());
                rec.push(s[i].1.to_string());
            }
            if let Some(se) = &self.pe_std_err {
                rec.push(se[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json() {
        let mut r = DeRunResult::with_capacity(2);
        r.pe = vec![0.1, 0.05];
        r.pe_app = vec![0.08, 0.04];
        r.err_given0 = vec![0.1, 0.04];
        r.err_given1 = vec![0.1, 0.06];
        r.schedule = Some(vec![(2, 2), (2, 3)]);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "iteration,pe,pe_app,err_given0,err_given1,b0,b1\n1,0.1,0.08,0.1,0.1,2,2\n2,0.05,0.04,0.04,0.06,2,3\n"
        );
        let json = serde_json::to_string(&r).unwrap();
        let back: DeRunResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.final_pe(), 0.05);
    }
}
