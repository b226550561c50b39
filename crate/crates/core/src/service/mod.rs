//! HTTP service over the persona engine, detector and experiment runner.

pub mod api;
pub mod config;
pub mod experiments;

use std::sync::Arc;

pub use api::router;
pub use config::ServiceConfig;
pub use experiments::{ExperimentQueue, ExperimentStatus, RunState};

use crate::classifier::LinearModel;
use crate::ensemble::Detector;
use crate::error::Result;
use crate::generation::GenerationClient;
use crate::persona::{CatalogFile, KnowledgeBase, PersonaEngine, Store};
use experiments::ExperimentContext;

struct Inner {
    config: ServiceConfig,
    engine: PersonaEngine,
    detector: Arc<Detector>,
    catalog: CatalogFile,
    experiments: ExperimentQueue,
}

/// Shared handler state. Must be built inside a tokio runtime.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Loads models, knowledge base, catalog and stored personas named by
    /// `config`.
    pub fn new(config: ServiceConfig) -> Result<Self> {
        config.validate()?;
        let models: Vec<LinearModel> = config.model_paths.iter().map(LinearModel::load).collect::<Result<_>>()?;
        let models: [LinearModel; 3] = models.try_into().expect("validated model count");
        let gen = config.generation.build()?;
        Self::from_parts(config, models, gen)
    }

    /// Like [`new`](Self::new) with models and generation client supplied
    /// directly; `config.model_paths` is ignored.
    pub fn from_parts(config: ServiceConfig, models: [LinearModel; 3], gen: Arc<dyn GenerationClient>) -> Result<Self> {
        config.persona.validate()?;
        let detector = Detector::from_models(models, gen.clone())?;
        let kb = Arc::new(KnowledgeBase::load_dir(&config.kb_path)?);
        let catalog = CatalogFile::open(&config.abilities_path)?;
        let store = match &config.data_dir {
            Some(dir) => Store::open(dir.join("personas"))?,
            None => Store::in_memory(),
        };
        let engine = PersonaEngine::new(
            config.persona.clone(),
            kb.clone(),
            gen.clone(),
            config.detection_enabled.then(|| detector.clone()),
            store,
        )?;
        let detector = Arc::new(detector);
        let experiments = ExperimentQueue::start(ExperimentContext {
            system_a: gen.clone(),
            system_b: gen,
            detector: detector.clone(),
            kb,
            archive_dir: config.data_dir.as_ref().map(|d| d.join("experiments")),
        });
        log::info!(
            "loaded {} personas, detection {}",
            engine.persona_ids().len(),
            if config.detection_enabled { "on" } else { "off" }
        );
        Ok(AppState(Arc::new(Inner {
            config,
            engine,
            detector,
            catalog,
            experiments,
        })))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    pub fn engine(&self) -> &PersonaEngine {
        &self.0.engine
    }

    pub fn detector(&self) -> Arc<Detector> {
        self.0.detector.clone()
    }

    pub fn catalog(&self) -> &CatalogFile {
        &self.0.catalog
    }

    pub fn experiments(&self) -> &ExperimentQueue {
        &self.0.experiments
    }
}

/// Binds `config.listen` and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<()> {
    let listen = config.listen.clone();
    let state = AppState::new(config)?;
    let listener = tokio::net::TcpListener::bind(&listen).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
