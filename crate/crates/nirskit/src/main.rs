use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nirskit::config::PipelineConfig;
use nirskit::container::{read_container, write_bundle, write_container};
use nirskit::error::{Error, Result};
use nirskit::fixture::{fixture_forward, synthetic_recording, FixtureConfig};
use nirskit::forward::{read_sensitivity, read_surface};
use nirskit::reports::quality_report;
use nirskit::runner::{exit_code, run_pipeline, Overrides};
use nirskit::simulate::{inject_activation, metrics_csv, toy_bundle, write_forward, InjectParams, ToyFile};
use nirskit_core::Quantity;

#[derive(Parser)]
#[command(name = "nirskit", version, about = "fNIRS processing pipelines")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a pipeline configuration.
    Run {
        config: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Validate the configuration and inputs without writing anything.
        #[arg(long)]
        dry_run: bool,
    },
    #[command(subcommand)]
    Simulate(SimCmd),
    #[command(subcommand)]
    Quality(QualityCmd),
}

#[derive(Subcommand)]
enum SimCmd {
    /// Bimodal toy dataset for CCA-family methods.
    Toy {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Synthetic four-channel recording, optionally with its forward model.
    Recording {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 300.0)]
        duration: f64,
        /// Also write a surface and sensitivity container here.
        #[arg(long)]
        forward: Option<PathBuf>,
    },
    /// Inject a cortical activation and optionally score its reconstruction.
    Inject(InjectArgs),
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long)]
    input: PathBuf,
    /// Container holding the sensitivity `A` and the brain surface.
    #[arg(long)]
    forward: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    seed_vertex: Option<usize>,
    #[arg(long, default_value = "20 mm")]
    spatial_scale: String,
    #[arg(long, default_value = "1 uM")]
    intensity: String,
    #[arg(long, default_value_t = -0.4, allow_negative_numbers = true)]
    hbr_scale: f64,
    #[arg(long, default_value_t = 0.01)]
    alpha_meas: f64,
    #[arg(long)]
    reconstruct: bool,
    /// Ground-truth comparison CSV (requires --reconstruct).
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Subcommand)]
enum QualityCmd {
    /// Per-channel SNR, SCI and PSP summary.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_text(path: &std::path::Path, text: &str) -> Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(p).map_err(|e| Error::Io { path: p.into(), source: e })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn quantity(s: &str) -> Result<Quantity> {
    Quantity::parse(s).map_err(|e| Error::Config(format!("{s:?}: {e}")))
}

fn execute(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Run { config, input, output, seed, dry_run } => {
            let cfg = PipelineConfig::load(&config)?;
            let s = run_pipeline(&cfg, &Overrides { input, output, seed, dry_run })?;
            if dry_run {
                println!("configuration valid: {} steps", s.report["steps"].as_array().map_or(0, Vec::len));
            } else if let Some(h) = s.container_hash {
                println!("container {h}");
            }
        }
        Cmd::Simulate(SimCmd::Toy { config, output }) => {
            let file = match config {
                Some(p) => ToyFile::parse(&std::fs::read_to_string(&p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?)?,
                None => ToyFile::default(),
            };
            let cfg = file.to_config();
            write_bundle(&toy_bundle(&cfg)?, &output)?;
            println!("SNR: {:.2} dB", cfg.snr_db());
        }
        Cmd::Simulate(SimCmd::Recording { output, seed, duration, forward }) => {
            let rec = synthetic_recording(&FixtureConfig { seed, duration, ..FixtureConfig::default() })?;
            write_container(&rec, &output)?;
            if let Some(f) = forward {
                let (s, a) = fixture_forward()?;
                write_forward(&s, &a, &f)?;
            }
        }
        Cmd::Simulate(SimCmd::Inject(a)) => {
            if a.metrics.is_some() && !a.reconstruct {
                return Err(Error::Config("--metrics requires --reconstruct".into()));
            }
            let rec = read_container(&a.input)?;
            let sens = read_sensitivity(&a.forward)?;
            for w in &sens.warnings {
                eprintln!("warning: {w}");
            }
            let surface = read_surface(&a.forward)?;
            let p = InjectParams {
                seed_vertex: a.seed_vertex,
                spatial_scale: quantity(&a.spatial_scale)?,
                intensity: quantity(&a.intensity)?,
                hbr_scale: a.hbr_scale,
                alpha_meas: a.alpha_meas,
                ..InjectParams::default()
            };
            let inj = inject_activation(&rec, &surface, &sens.value, &p, a.reconstruct)?;
            write_container(&inj.recording, &a.output)?;
            let csv = metrics_csv(&inj.metrics)?;
            match a.metrics {
                Some(m) => write_text(&m, &csv)?,
                None if a.reconstruct => print!("{csv}"),
                None => {}
            }
        }
        Cmd::Quality(QualityCmd::Report { input, out }) => {
            let rec = read_container(&input)?;
            let amp = rec
                .timeseries
                .get("amp")
                .or_else(|| rec.timeseries.values().next())
                .ok_or_else(|| Error::Schema("input has no time series".into()))?;
            write_text(&out, &quality_report(amp)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
