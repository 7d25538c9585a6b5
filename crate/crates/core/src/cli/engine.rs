//! Runs a backend over every sequence of a dataset and scores the traces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{BackendSpec, InitSpec, RunConfig};
use crate::dataset::DatasetEntry;
use crate::datamodel::label_clips;
use crate::metrics::{fscore_optimize, gsr_curve, GsrOptions, PredictionTrace, SequenceResult, GSR_WINDOWS};
use crate::protocol::{run_ope, OpeError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub include_occluded: bool,
    pub gsr_iou: f64,
    /// Replace measured per-frame costs with this many seconds.
    pub simulated_cost: Option<f64>,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { include_occluded: true, gsr_iou: 0.5, simulated_cost: None, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SequenceOutcome {
    pub result: SequenceResult,
    /// The tracker's trace; `None` when the run failed.
    pub trace: Option<PredictionTrace>,
    /// Seconds per frame, zero up to the initialization frame.
    pub frame_costs: Vec<f64>,
    pub fps: f64,
    pub peer_failure: bool,
    pub diagnostics: Option<serde_json::Value>,
}

/// Evaluates one sequence. Failures are reported in the outcome and scored
/// as an all-absent trace.
pub fn evaluate_entry(
    entry: &DatasetEntry,
    backend: &BackendSpec,
    init: &InitSpec,
    cfg: &RunConfig,
    opts: &EvalOptions,
) -> SequenceOutcome {
    let video = &entry.video;
    let run = init
        .policy(entry)
        .map_err(|e| (e.is_peer_failure(), e.to_string()))
        .and_then(|policy| {
            let mut b = backend.build(entry, cfg, opts.seed).map_err(|e| (e.is_peer_failure(), e.to_string()))?;
            let run = run_ope(b.as_mut(), video, &policy).map_err(|e| {
                let peer = matches!(&e, OpeError::Backend { source, .. } if source.is_peer_failure());
                (peer, e.to_string())
            })?;
            Ok((run, b.diagnostics()))
        });

    let (trace, costs, failure, peer_failure, diagnostics) = match run {
        Ok((run, diag)) => {
            let mut costs = run.frame_costs;
            if let Some(p) = opts.simulated_cost {
                for c in costs.iter_mut().skip(run.init_frame + 1) {
                    *c = p;
                }
            }
            (Some(run.trace), costs, None, false, diag)
        }
        Err((peer, msg)) => (None, vec![0.0; video.len()], Some(msg), peer, None),
    };
    let scored = trace.clone().unwrap_or_else(|| PredictionTrace::all_absent(video.len()));
    let lt = fscore_optimize(&scored, &video.frames, opts.include_occluded);
    let gsr = gsr_curve(&scored, &video.frames, &GsrOptions { iou_threshold: opts.gsr_iou, include_occluded: opts.include_occluded });
    let attributes = label_clips(video).map(|clips| clips.iter().flat_map(|c| c.attributes.iter()).collect()).unwrap_or_default();

    let (lt, gsr, failure) = match (lt, gsr) {
        (Ok(lt), Ok(gsr)) => (Some(lt), gsr, failure),
        (Err(e), _) | (_, Err(e)) => (None, vec![0.0; GSR_WINDOWS.len()], Some(failure.unwrap_or_else(|| e.to_string()))),
    };
    let result = SequenceResult {
        id: video.id.clone(),
        discipline: video.meta.discipline,
        weather: video.meta.weather,
        attributes,
        precision: lt.as_ref().map_or(0.0, |r| r.best_precision),
        recall: lt.as_ref().map_or(0.0, |r| r.best_recall),
        fscore: lt.as_ref().map_or(0.0, |r| r.best_f),
        threshold: lt.as_ref().map_or(0.0, |r| r.best_threshold),
        gsr,
        failure,
    };
    SequenceOutcome { result, trace, frame_costs: costs, fps: video.meta.fps, peer_failure, diagnostics }
}

/// [`evaluate_entry`] over all entries on a pool of `jobs` workers. Output
/// order follows `entries`.
pub fn evaluate_all(
    entries: &[DatasetEntry],
    backend: &BackendSpec,
    init: &InitSpec,
    cfg: &RunConfig,
    opts: &EvalOptions,
    jobs: usize,
) -> Vec<SequenceOutcome> {
    let run = || entries.par_iter().map(|e| evaluate_entry(e, backend, init, cfg, opts)).collect();
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => entries.iter().map(|e| evaluate_entry(e, backend, init, cfg, opts)).collect(),
    }
}
