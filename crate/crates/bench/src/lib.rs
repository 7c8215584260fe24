//! Runtime measurement and the challenge scoring mathematics:
//! score = 2^(2·PSNR) / (C · runtime_ms), with C normalized to 2^40 (fitted
//! against the published reference leaderboard and reproducible via
//! [`fit_c`]).

mod harness;
mod leaderboard;
mod score;
mod table;

pub use harness::{bench_model, machine_descriptor, BenchConfig, BenchResult};
pub use leaderboard::{leaderboard, read_records_tsv, render_table, to_tsv, ScoreRecord};
pub use score::{challenge_score, fit_c, FitC, DEFAULT_LOG2_C};
pub use table::{mai2022_track1, PublishedRow, RowKind};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    BadArgument(String),

    #[error("{0}")]
    Graph(#[from] ispforge_graph::GraphError),

    #[error("{path}: {msg}")]
    Records { path: String, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
