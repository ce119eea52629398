use std::io::Write;

use serde::{Deserialize, Serialize};

/// One row per executed iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub res_max: f64,
    pub res_pxj: f64,
    pub res_pxs: f64,
    pub res_vf: f64,
    /// `‖Hᵀ − XᵀPᵀC − E‖∞`; empty for unsupervised runs.
    pub res_cls: Option<f64>,
    pub objective: f64,
    pub mu: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
    pub stop: StopReason,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.rows.last().map(|r| r.res_max)
    }

    /// Writes `iter,res_max,res_pxj,res_pxs,res_vf,res_cls,objective,mu,wall_time_s`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_empty_cls() {
        let trace = ConvergenceTrace {
            rows: vec![TraceRow {
                iter: 1,
                res_max: 0.5,
                res_pxj: 0.5,
                res_pxs: 0.25,
                res_vf: 0.125,
                res_cls: None,
                objective: 3.0,
                mu: 1e-6,
                wall_time_s: 0.01,
            }],
            stop: StopReason::MaxIterations,
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "iter,res_max,res_pxj,res_pxs,res_vf,res_cls,objective,mu,wall_time_s");
        assert_eq!(lines.next().unwrap(), "1,0.5,0.5,0.25,0.125,,3.0,1e-6,0.01");
    }
}
