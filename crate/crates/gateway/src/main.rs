use std::io::Write;
use std::net::SocketAddr;
use std::sync::Arc;

use clap::Parser;
use wordcomm_gateway::cli::{run, Cli, Command, ServeArgs};
use wordcomm_gateway::{router, AppState};

async fn serve(args: ServeArgs) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let state = match &args.data_dir {
        Some(dir) => AppState::open(dir)?,
        None => AppState::new(),
    };
    let addr: SocketAddr = format!("{}:{}", args.host, args.port).parse()?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{addr}");
    axum::serve(listener, router(Arc::new(state))).await?;
    Ok(())
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve(args) => tokio::runtime::Runtime::new()
            .map_err(Into::into)
            .and_then(|rt| rt.block_on(serve(args))),
        other => {
            let mut stdout = std::io::stdout().lock();
            run(other, &mut stdout).and_then(|_| stdout.flush().map_err(Into::into))
        }
    };
    if let Err(e) = result {
        if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) {
            return;
        }
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
