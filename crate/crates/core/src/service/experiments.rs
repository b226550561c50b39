//! Background comparison runs, one at a time, in submission order.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;

use crate::ensemble::Detector;
use crate::eval::{run_comparison, ComparisonOutcome, ExperimentGrid, ExperimentOptions, TTestReport};
use crate::generation::GenerationClient;
use crate::persona::KnowledgeBase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Pending,
    Running,
    Completed,
    Failed,
}

/// What `GET /api/experiments/{id}` returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStatus {
    pub id: String,
    pub state: RunState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<TTestReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExperimentStatus {
    fn new(id: String, state: RunState) -> Self {
        ExperimentStatus {
            id,
            state,
            report: None,
            table: None,
            series_a: None,
            series_b: None,
            excluded: None,
            error: None,
        }
    }

    fn completed(id: String, o: ComparisonOutcome) -> Self {
        ExperimentStatus {
            report: Some(o.report),
            table: Some(o.table),
            series_a: Some(o.series_a),
            series_b: Some(o.series_b),
            excluded: Some(o.excluded.len()),
            ..Self::new(id, RunState::Completed)
        }
    }
}

struct Job {
    id: String,
    grid: ExperimentGrid,
    options: ExperimentOptions,
}

/// Everything a run needs, shared with the worker.
#[derive(Clone)]
pub struct ExperimentContext {
    pub system_a: Arc<dyn GenerationClient>,
    pub system_b: Arc<dyn GenerationClient>,
    pub detector: Arc<Detector>,
    pub kb: Arc<KnowledgeBase>,
    pub archive_dir: Option<PathBuf>,
}

#[derive(Clone)]
pub struct ExperimentQueue {
    statuses: Arc<Mutex<HashMap<String, ExperimentStatus>>>,
    next: Arc<Mutex<u64>>,
    tx: mpsc::UnboundedSender<Job>,
}

impl ExperimentQueue {
    /// Starts the worker on the current tokio runtime.
    pub fn start(ctx: ExperimentContext) -> Self {
        let (tx, mut rx) = mpsc::unbounded_channel::<Job>();
        let statuses: Arc<Mutex<HashMap<String, ExperimentStatus>>> = Arc::default();
        let worker_statuses = statuses.clone();
        tokio::spawn(async move {
            while let Some(job) = rx.recv().await {
                let set = |s: ExperimentStatus| {
                    worker_statuses.lock().expect("status lock").insert(s.id.clone(), s);
                };
                set(ExperimentStatus::new(job.id.clone(), RunState::Running));
                let ctx = ctx.clone();
                let id = job.id.clone();
                let result = tokio::task::spawn_blocking(move || {
                    let outcome = run_comparison(
                        &job.grid,
                        ctx.system_a.as_ref(),
                        ctx.system_b.as_ref(),
                        &ctx.detector,
                        &ctx.kb,
                        &job.options,
                    )?;
                    if let Some(dir) = &ctx.archive_dir {
                        outcome.archive(dir.join(&job.id))?;
                    }
                    Ok::<_, crate::Error>(outcome)
                })
                .await;
                let status = match result {
                    Ok(Ok(outcome)) => ExperimentStatus::completed(id, outcome),
                    Ok(Err(e)) => ExperimentStatus {
                        error: Some(e.to_string()),
                        ..ExperimentStatus::new(id, RunState::Failed)
                    },
                    Err(e) => ExperimentStatus {
                        error: Some(format!("worker panicked: {e}")),
                        ..ExperimentStatus::new(id, RunState::Failed)
                    },
                };
                log::info!("experiment {} finished: {:?}", status.id, status.state);
                set(status);
            }
        });
        ExperimentQueue {
            statuses,
            next: Arc::new(Mutex::new(1)),
            tx,
        }
    }

    /// Queues a validated grid and returns its id.
    pub fn submit(&self, grid: ExperimentGrid, options: ExperimentOptions) -> String {
        let id = {
            let mut n = self.next.lock().expect("id lock");
            let id = format!("exp-{n}");
            *n += 1;
            id
        };
        self.statuses
            .lock()
            .expect("status lock")
            .insert(id.clone(), ExperimentStatus::new(id.clone(), RunState::Pending));
        if self.tx.send(Job { id: id.clone(), grid, options }).is_err() {
            let mut s = self.statuses.lock().expect("status lock");
            s.insert(
                id.clone(),
                ExperimentStatus {
                    error: Some("experiment worker is not running".into()),
                    ..ExperimentStatus::new(id.clone(), RunState::Failed)
                },
            );
        }
        id
    }

    pub fn status(&self, id: &str) -> Option<ExperimentStatus> {
        self.statuses.lock().expect("status lock").get(id).cloned()
    }
}
