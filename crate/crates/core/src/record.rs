use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::subset::FeatureSubset;

/// One search iteration (annealer) or step (beam search).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Temperature the acceptance decision used; `None` for beam search.
    pub temperature: Option<f64>,
    pub current: f64,
    pub best: f64,
    pub accepted: bool,
    pub restarted: bool,
    /// Metropolis probability and uniform draw, recorded for non-improving
    /// candidates only.
    pub acceptance_probability: Option<f64>,
    pub uniform_draw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub k: usize,
    pub seed: u64,
    pub best_subset: FeatureSubset,
    pub best_guide_score: f64,
    pub best_test_score: f64,
    pub best_test_ndcg10: f64,
    pub best_test_map: f64,
    pub initial_guide_score: f64,
    pub trace: Vec<TraceRow>,
    /// Budget units consumed (see the search's budget accounting).
    pub evaluations_used: usize,
    /// Raw evaluator calls made by this run, revisits included.
    pub evaluator_calls: usize,
    pub wall_ms: f64,
}

impl RunRecord {
    /// Writes `iteration,T,current,best,accepted,restarted`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "T", "current", "best", "accepted", "restarted"])?;
        for row in &self.trace {
            w.write_record([
                row.iteration.to_string(),
                row.temperature.map(|t| t.to_string()).unwrap_or_default(),
                row.current.to_string(),
                row.best.to_string(),
                row.accepted.to_string(),
                row.restarted.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
