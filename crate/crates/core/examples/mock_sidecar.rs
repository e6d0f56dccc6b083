//! A stand-in extractor sidecar speaking the same argv as the real one.
//!
//! ```text
//! cargo run --example mock_sidecar -- mock --seed 0 --duration 1 --width 640 --height 360
//! ```
//!
//! Build it and pass the binary to `mmfuse extract --sidecar` to exercise
//! the extract verb without any models installed.

use std::io::{self, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmfuse::synthetic::MockScenario;

#[derive(Parser)]
struct Args {
    #[command(subcommand)]
    mode: Mode,
}

#[derive(Subcommand)]
enum Mode {
    Mock {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4.0)]
        duration: f64,
        #[arg(long, default_value_t = 640)]
        width: u32,
        #[arg(long, default_value_t = 360)]
        height: u32,
        #[arg(long, default_value_t = 1)]
        objects: usize,
        #[arg(long, default_value_t = 6400)]
        vocab_size: usize,
    },
    Real {
        #[arg(long)]
        video: String,
    },
}

fn main() -> ExitCode {
    match Args::parse().mode {
        Mode::Mock { seed, duration, width, height, objects, vocab_size } => {
            let scenario = MockScenario {
                seed,
                duration,
                width,
                height,
                n_objects: objects,
                vocab_size,
                ..MockScenario::default()
            };
            match scenario.generate() {
                Ok(stream) => {
                    let mut out = io::stdout().lock();
                    for line in &stream.lines {
                        if writeln!(out, "{line}").is_err() {
                            return ExitCode::FAILURE;
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
            }
        }
        Mode::Real { video } => {
            eprintln!("real mode needs model wrappers; this stand-in cannot read {video}");
            ExitCode::from(2)
        }
    }
}
