use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lanecarto::evaluation::{Gate, TruthDocument};
use lanecarto::pipeline::export::{export, ExportFormat};
use lanecarto::pipeline::{cmd_build, cmd_eval, HDMapDocument, PipelineConfig};
use lanecarto::synthetic::{generate, write_bundle, ScenarioSpec};
use lanecarto::{Error, Result};

#[derive(Parser)]
#[command(name = "lanecarto", version, about = "Lane-level HD map reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario bundle from a JSON spec.
    Gen {
        spec: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Build a map document from a TOML config.
    Build {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Score a map document against a truth file (or bundle directory).
    Eval {
        map: PathBuf,
        truth: PathBuf,
        #[arg(long, default_value_t = 0.7)]
        gate_iou: f64,
        #[arg(long, default_value_t = 0.2)]
        gate_rms: f64,
        /// Rigidly align the map to the truth before scoring.
        #[arg(long)]
        rectify: bool,
        /// Accept documents without a provenance block.
        #[arg(long)]
        force: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Convert a map document to geojson, lanelet-json or svg.
    Export {
        map: PathBuf,
        #[arg(long)]
        format: String,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn manifest(dir: &Path) -> Result<Vec<(String, u64)>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let entry = entry.map_err(|e| Error::io(&d, e))?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let len = entry.metadata().map_err(|e| Error::io(&path, e))?.len();
                let rel = path.strip_prefix(dir).unwrap_or(&path).to_string_lossy().into_owned();
                out.push((rel, len));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { spec, out } => {
            let spec: ScenarioSpec = serde_json::from_str(&read_text(&spec)?)?;
            let bundle = generate(&spec)?;
            write_bundle(&bundle, &out)?;
            let mut stdout = std::io::stdout().lock();
            for (file, len) in manifest(&out)? {
                // A closed pipe (`gen ... | head`) is not an error.
                if writeln!(stdout, "{file}\t{len}").is_err() {
                    break;
                }
            }
        }
        Command::Build { config, out } => {
            let cfg = PipelineConfig::load(&config)?;
            let doc = cmd_build(&cfg)?;
            for w in &doc.warnings {
                eprintln!("warning: {w}");
            }
            write_text(&out, &doc.to_json())?;
        }
        Command::Eval {
            map,
            truth,
            gate_iou,
            gate_rms,
            rectify,
            force,
            out,
        } => {
            let doc = HDMapDocument::from_json(&read_text(&map)?)?;
            let truth_path = if truth.is_dir() { truth.join("truth.json") } else { truth };
            let truth: TruthDocument = serde_json::from_str(&read_text(&truth_path)?)?;
            let gate = Gate {
                iou: gate_iou,
                rms: gate_rms,
            };
            let report = cmd_eval(&doc, &truth, &gate, rectify, force)?;
            let text = serde_json::to_string_pretty(&report)? + "\n";
            match out {
                Some(path) => write_text(&path, &text)?,
                None => {
                    let _ = std::io::stdout().lock().write_all(text.as_bytes());
                }
            }
        }
        Command::Export { map, format, out } => {
            let format: ExportFormat = format.parse()?;
            let doc = HDMapDocument::from_json(&read_text(&map)?)?;
            write_text(&out, &export(&doc, format))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
