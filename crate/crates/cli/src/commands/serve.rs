use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

use emokit_leaderboard::{system_clock, Leaderboard};

use super::Ctx;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory with datasets/ and the submission log
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Bearer token required for submissions; without it submissions are open
    #[arg(long, env = "EMOKIT_LEADERBOARD_TOKEN", hide_env_values = true)]
    #[serde(skip)]
    pub token: Option<String>,
}

pub fn run(_ctx: &Ctx, args: Args) -> Result<()> {
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .with_context(|| format!("bad address {}:{}", args.host, args.port))?;
    let board = Leaderboard::open(&args.data_dir, system_clock())?;
    println!("serving {} submissions on http://{addr}", board.len());
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(emokit_leaderboard::http::serve(addr, board, args.token))?;
    Ok(())
}
