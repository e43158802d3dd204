use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dipls_cli::{
    cmd_compare, cmd_evaluate, cmd_extract, cmd_generate, exit_code, EvaluateOptions, ExtractSettings,
    GenerateOptions,
};
use dipls_core::evaluation::{FeatureKind, ModelKind};
use dipls_core::io::WaveformEncoding;
use dipls_core::spectral::Window;
use dipls_core::{Centering, Error, Result};

#[derive(Parser)]
#[command(name = "dipls", version, about = "Cross-condition 2f tonal noise prediction with di-PLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Pls,
    Dipls,
}

#[derive(Clone, Copy, ValueEnum)]
enum Features {
    Acceleration,
    Thermodynamic,
}

#[derive(Clone, Copy, ValueEnum)]
enum CenteringArg {
    PerDomain,
    SourceOnly,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Rectangular,
    Hann,
}

#[derive(Clone, Copy, ValueEnum)]
enum Encoding {
    F64le,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-condition suite as dataset CSVs.
    Generate {
        /// Suite spec JSON; the built-in six-condition suite when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the suite seed (recorded in the manifest).
        #[arg(long)]
        seed: Option<u64>,
        /// Also write waveform containers under <out>/waveforms.
        #[arg(long)]
        waveforms: bool,
        /// Waveform containers per condition (each is about 75 MB); 0 writes all.
        #[arg(long, default_value_t = 2)]
        waveform_limit: usize,
        #[arg(long, value_enum, default_value = "f64le")]
        encoding: Encoding,
    },
    /// Extract 2f features from a directory of waveform containers.
    Extract {
        #[arg(long)]
        waveforms: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Half width of the analysis band around 2f, Hz.
        #[arg(long, default_value_t = 3.0)]
        half_band: f64,
        #[arg(long)]
        db_ref_accel: Option<f64>,
        #[arg(long)]
        db_ref_mic: Option<f64>,
        #[arg(long, value_enum, default_value = "rectangular")]
        window: WindowArg,
    },
    /// Leave-one-condition-out evaluation of PLS or di-PLS.
    Evaluate {
        /// Dataset CSV files, glob patterns or directories.
        #[arg(required = true)]
        datasets: Vec<String>,
        #[arg(long, value_enum, default_value = "dipls")]
        model: Model,
        /// Domain regularization weight (di-PLS only).
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 14)]
        components: usize,
        #[arg(long, value_enum, default_value = "acceleration")]
        features: Features,
        #[arg(long, value_enum, default_value = "per-domain")]
        centering: CenteringArg,
        /// Extra geometric lambda grid LOW:HIGH:POINTS.
        #[arg(long, value_parser = parse_sweep)]
        lambda_sweep: Option<(f64, f64, usize)>,
        #[arg(long, env = "DIPLS_JOBS", default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Side-by-side comparison of two evaluation reports.
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_sweep(s: &str) -> std::result::Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err("expected LOW:HIGH:POINTS".into());
    };
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(lo)?, num(hi)?, n.parse().map_err(|e| format!("{n:?}: {e}"))?))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            spec,
            out,
            seed,
            waveforms,
            waveform_limit,
            encoding,
        } => {
            let options = GenerateOptions {
                seed,
                waveforms,
                waveform_limit: (waveform_limit > 0).then_some(waveform_limit),
                waveform_encoding: match encoding {
                    Encoding::F64le => WaveformEncoding::F64le,
                    Encoding::Csv => WaveformEncoding::Csv,
                },
            };
            let s = cmd_generate(spec.as_deref(), &out, &options)?;
            println!(
                "wrote {} datasets, {} waveform files and {}",
                s.datasets.len(),
                s.waveforms.len(),
                s.manifest.display()
            );
        }
        Command::Extract {
            waveforms,
            manifest,
            out,
            half_band,
            db_ref_accel,
            db_ref_mic,
            window,
        } => {
            let settings = ExtractSettings {
                half_band,
                db_ref_accel,
                db_ref_mic,
                window: match window {
                    WindowArg::Rectangular => Window::Rectangular,
                    WindowArg::Hann => Window::Hann,
                },
            };
            let m = cmd_extract(&waveforms, &manifest, &out, &settings)?;
            println!("wrote {} ({} conditions)", out.display(), m.conditions.len());
        }
        Command::Evaluate {
            datasets,
            model,
            lambda,
            components,
            features,
            centering,
            lambda_sweep,
            jobs,
            out,
        } => {
            let model = match model {
                Model::Pls => ModelKind::Pls,
                Model::Dipls => ModelKind::Dipls,
            };
            if matches!(model, ModelKind::Pls) && lambda.is_some_and(|l| l != 0.0) {
                return Err(Error::Config("--lambda applies to di-PLS only".into()));
            }
            let options = EvaluateOptions {
                model,
                lambda,
                components,
                features: match features {
                    Features::Acceleration => FeatureKind::Acceleration,
                    Features::Thermodynamic => FeatureKind::Thermodynamic,
                },
                centering: match centering {
                    CenteringArg::PerDomain => Centering::PerDomain,
                    CenteringArg::SourceOnly => Centering::SourceOnly,
                },
                jobs: jobs.max(1),
                lambda_sweep,
            };
            let r = cmd_evaluate(&datasets, &out, &options)?;
            let a = &r.aggregate;
            println!(
                "{} folds, mse {:.3}, r2 {}, acc<2dB {:.3}, acc<3dB {:.3}",
                r.folds.len(),
                a.mse,
                a.r2.map_or("-".into(), |v| format!("{v:.3}")),
                a.acc_lt2db,
                a.acc_lt3db
            );
            for f in r.folds.iter().filter(|f| !f.warnings.is_empty()) {
                for w in &f.warnings {
                    eprintln!("warning [{}]: {w}", f.target_condition_id);
                }
            }
        }
        Command::Compare { report_a, report_b, out } => {
            let (_, text) = cmd_compare(&report_a, &report_b, &out)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
