//! Command-line front end: grade submissions, validate and generate test
//! sets, run the statistics, print the leaderboard, and serve the HTTP API.

use std::fs::File;
use std::io::{BufReader, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use amt_eval::manifest::{list_midi_files, write_set, ReferenceSet};
use amt_eval::records::{analyze, read_records, render_text};
use amt_eval::service::ServiceState;
use amt_eval::store::{submission_records, Store};
use amt_eval::submission::{grade_submission, Submission};
use amt_eval_core::generate::{generate_set, SetMix};
use amt_eval_core::matching::Tolerances;
use amt_eval_core::rules::{validate_piece, Rules};
use amt_eval_core::smf::parse_smf;

#[derive(Parser)]
#[command(name = "amt-eval", about = "Grading stack for note-level transcription evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grade a submission directory against a reference directory.
    Grade {
        /// Reference set directory (MIDI files plus manifest.json).
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Submission directory of <piece_id>.mid estimates.
        #[arg(long)]
        sub: PathBuf,
        /// Model name to report under.
        #[arg(long)]
        name: String,
        /// Onset tolerance in seconds.
        #[arg(long = "tolerance-onset", default_value_t = 0.05)]
        tolerance_onset: f64,
        /// Append the graded result to this store file.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Write the full per-piece reports to this JSON file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every MIDI file in a directory against the composition rules.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Generate a seeded, rule-conforming evaluation set.
    Genset {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 76)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        /// solo:duo:trio proportions, e.g. 6:24:46.
        #[arg(long)]
        mix: Option<String>,
    },
    /// Run the ANOVA and Welch tests over per-piece records (JSON lines).
    Stats {
        #[arg(long)]
        records: PathBuf,
        /// Emit JSON instead of the aligned table.
        #[arg(long)]
        json: bool,
    },
    /// Print the leaderboard from a store file.
    Leaderboard {
        #[arg(long)]
        store: PathBuf,
        /// Emit CSV instead of the aligned table.
        #[arg(long)]
        csv: bool,
    },
    /// Serve the grading API over HTTP.
    Serve {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Grade {
            reference,
            sub,
            name,
            tolerance_onset,
            store,
            out,
        } => {
            let references = ReferenceSet::load(&reference).map_err(|e| e.to_string())?;
            let submission = Submission::from_dir(&name, &sub).map_err(|e| e.to_string())?;
            let tolerances = Tolerances {
                onset: tolerance_onset,
                ..Tolerances::default()
            };
            let graded =
                grade_submission(&submission, &references, &tolerances).map_err(|e| e.to_string())?;
            if let Some(path) = out {
                let json = serde_json::to_string_pretty(&graded).map_err(|e| e.to_string())?;
                std::fs::write(&path, json).map_err(|e| e.to_string())?;
            }
            if let Some(path) = store {
                let mut store = Store::open(&path).map_err(|e| e.to_string())?;
                let id = store.next_submission_id();
                let records = submission_records(&id, &name, now_ms(), &graded.reports);
                store.append_submission(records).map_err(|e| e.to_string())?;
                eprintln!("stored as {id} in {}", path.display());
            }
            let summary = serde_json::json!({
                "model_name": graded.model_name,
                "aggregate": graded.aggregate,
                "pieces": graded.reports.len(),
                "warnings": graded.warnings,
            });
            println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { input } => {
            let files = list_midi_files(&input).map_err(|e| e.to_string())?;
            if files.is_empty() {
                return Err(format!("no .mid files in {}", input.display()));
            }
            let rules = Rules::default();
            let mut clean = true;
            for (id, path) in files {
                let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
                match parse_smf(&bytes) {
                    Ok(parsed) => {
                        let violations = validate_piece(&parsed.piece, &rules);
                        if violations.is_empty() {
                            println!("{id}: ok");
                        } else {
                            clean = false;
                            for v in violations {
                                println!("{id}: {v}");
                            }
                        }
                    }
                    Err(e) => {
                        clean = false;
                        println!("{id}: parse error: {e}");
                    }
                }
            }
            Ok(if clean { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Genset {
            seed,
            count,
            out,
            mix,
        } => {
            let mix = match mix {
                Some(text) => parse_mix(&text)?,
                None => SetMix::default(),
            };
            let pieces = generate_set(seed, count, &mix).map_err(|e| e.to_string())?;
            let manifest = write_set(&out, seed, &pieces).map_err(|e| e.to_string())?;
            println!(
                "wrote {} pieces and {} to {}",
                manifest.pieces.len(),
                amt_eval::manifest::MANIFEST_FILE,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats { records, json } => {
            let file = File::open(&records).map_err(|e| e.to_string())?;
            let parsed = read_records(BufReader::new(file)).map_err(|e| e.to_string())?;
            let analysis = analyze(&parsed).map_err(|e| e.to_string())?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&analysis).map_err(|e| e.to_string())?
                );
            } else {
                print!("{}", render_text(&analysis));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Leaderboard { store, csv } => {
            let store = Store::open(&store).map_err(|e| e.to_string())?;
            let entries = store.leaderboard();
            if csv {
                print!("{}", amt_eval::leaderboard::to_csv(&entries));
            } else {
                print!("{}", amt_eval::leaderboard::to_text(&entries));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve {
            reference,
            store,
            port,
        } => {
            let references = ReferenceSet::load(&reference).map_err(|e| e.to_string())?;
            let store = Store::open(&store).map_err(|e| e.to_string())?;
            let state = ServiceState::new(references, Tolerances::default(), store);
            let app = amt_eval::service::app(state);
            let addr = SocketAddr::from(([0, 0, 0, 0], port));
            let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr)
                    .await
                    .map_err(|e| e.to_string())?;
                let mut out = std::io::stderr();
                let _ = writeln!(out, "listening on {addr}");
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
                    .map_err(|e| e.to_string())
            })?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_mix(text: &str) -> Result<SetMix, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("mix must be solo:duo:trio, got {text:?}"));
    }
    let parse = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|e| format!("bad mix component {s:?}: {e}"))
    };
    Ok(SetMix {
        solo: parse(parts[0])?,
        duo: parse(parts[1])?,
        trio: parse(parts[2])?,
    })
}
