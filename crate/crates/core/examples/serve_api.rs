//! Serves the HTTP API with freshly trained reference models and the stub
//! generator. State goes to a temporary directory.
//!
//!     cargo run --release --example serve_api -- 127.0.0.1:8080

use std::sync::Arc;

use personaflag::classifier::synthetic::reference_models;
use personaflag::generation::StubClient;
use personaflag::service::{router, AppState, ServiceConfig};

#[tokio::main]
async fn main() -> personaflag::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let listen = std::env::args().nth(1).unwrap_or_else(|| "127.0.0.1:8080".into());
    let config = ServiceConfig {
        data_dir: Some(std::env::temp_dir().join("personaflag-serve")),
        ..ServiceConfig::default()
    };
    let state = AppState::from_parts(config, reference_models(1 << 14, 42)?, Arc::new(StubClient::new(0)))?;
    let listener = tokio::net::TcpListener::bind(&listen).await?;
    println!("listening on http://{listen}");
    axum::serve(listener, router(state)).await?;
    Ok(())
}
