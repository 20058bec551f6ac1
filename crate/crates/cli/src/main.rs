use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sbmeter_core::harness::{
    emit_report, ingest_file, load_image, to_json_string, write_path_logits, write_tensor, Experiment,
    ExperimentConfig, Overrides, SweepParameter, SweepSpec,
};
use sbmeter_core::sbmetrics::{
    complexity_1d, derivative_profile, taylor_bound, DerivativeProfile, Function1d, Polynomial, ProfileOptions, Sine,
    DEFAULT_D_MAX, DEFAULT_GRID, DEFAULT_TOL,
};
use sbmeter_core::spectral::decompose;
use sbmeter_core::Tensor;
use serde_json::json;

#[derive(Parser)]
#[command(name = "sbmeter", version, about = "Frequency-band sensitivity of image encoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure baseline and per-band sensitivities.
    Measure(ExperimentArgs),
    /// Measure once per value of a modulation parameter and report decay ratios.
    Sweep {
        #[command(flatten)]
        common: ExperimentArgs,
        #[arg(long, value_enum)]
        parameter: Option<ParamArg>,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Split one image into its band components, written as SBT1 tensors.
    Decompose {
        #[arg(long)]
        config: Option<PathBuf>,
        /// A .ppm or .sbt image.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        bands: Option<Vec<f64>>,
        /// Directory for `<stem>_<band>.sbt`; defaults to the input's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute sensitivities from an SBP1 path-logits file.
    Ingest {
        #[arg(long)]
        config: Option<PathBuf>,
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Complexity of a built-in 1-D function: `poly 0,0,1` or `sin 3`.
    Complexity1d {
        #[arg(long)]
        config: Option<PathBuf>,
        family: Family,
        /// Polynomial coefficients (lowest order first) or the sine frequency.
        #[arg(allow_hyphen_values = true)]
        params: String,
        #[arg(long, value_delimiter = ',', default_value = "-1,1", allow_hyphen_values = true)]
        domain: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_D_MAX)]
        d_max: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        /// Use finite differences instead of closed-form derivatives.
        #[arg(long)]
        numeric: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First-order-plus-remainder bound from derivative magnitudes.
    Taylor {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `M_0,M_1,...,M_d`.
        #[arg(long, value_delimiter = ',', required = true)]
        magnitudes: Vec<f64>,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory with labels.csv; overrides the config.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    /// Interior band thresholds, e.g. `0.25,0.8`.
    #[arg(long, value_delimiter = ',')]
    bands: Option<Vec<f64>>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma_s: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Also write every path's logits as SBP1.
    #[arg(long)]
    export_logits: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    Beta,
    GammaS,
    Cutoff,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Poly,
    Sin,
}

impl ExperimentArgs {
    fn load(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(Overrides {
            seed: self.seed,
            pairs: self.pairs,
            steps: self.steps,
            runs: self.runs,
            band_thresholds: self.bands,
            beta: self.beta,
            gamma_s: self.gamma_s,
            output: self.out,
            export_logits: self.export_logits,
            workers: self.workers,
            dataset: self.dataset,
        });
        Ok(cfg)
    }
}

fn load_optional(config: Option<&Path>) -> Result<ExperimentConfig> {
    Ok(match config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    })
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => emit_report(value, p).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", to_json_string(value)?),
    }
    Ok(())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number '{t}'")))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Measure(args) => {
            let cfg = args.load()?;
            let exp = Experiment::from_config(cfg)?;
            let m = exp.measure()?;
            if let Some(p) = &exp.config().export_logits {
                write_path_logits(p, &m.path_logits).with_context(|| format!("writing {}", p.display()))?;
            }
            for w in &m.report.warnings {
                eprintln!("warning: {w}");
            }
            write_json(&m.report, exp.config().output.as_deref())
        }
        Command::Sweep {
            common,
            parameter,
            values,
        } => {
            let mut cfg = common.load()?;
            if parameter.is_some() || values.is_some() {
                let existing = cfg.sweep.take();
                let parameter = match parameter {
                    Some(ParamArg::Beta) => SweepParameter::Beta,
                    Some(ParamArg::GammaS) => SweepParameter::GammaS,
                    Some(ParamArg::Cutoff) => SweepParameter::Cutoff,
                    None => match &existing {
                        Some(s) => s.parameter,
                        None => bail!("--values needs --parameter or a sweep in the config"),
                    },
                };
                let values = match values.or_else(|| existing.map(|s| s.values)) {
                    Some(v) => v,
                    None => bail!("--parameter needs --values or a sweep in the config"),
                };
                cfg.sweep = Some(SweepSpec { parameter, values });
            }
            if cfg.sweep.is_none() {
                bail!("no sweep configured; pass --parameter and --values");
            }
            let exp = Experiment::from_config(cfg)?;
            let s = exp.sweep()?;
            write_json(&s, exp.config().output.as_deref())
        }
        Command::Decompose {
            config,
            input,
            bands,
            out,
        } => {
            let mut cfg = load_optional(config.as_deref())?;
            if let Some(b) = bands {
                cfg.band_thresholds = b;
            }
            let spec = cfg.band_spec()?;
            let image = load_image(&input)?;
            let parts = decompose(&image, &spec)?;
            let dir = out
                .or_else(|| input.parent().map(Path::to_path_buf))
                .unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
            let mut sum = parts[0].clone();
            for p in &parts[1..] {
                sum = sum.add(p)?;
            }
            let mut written = Vec::new();
            for (band, part) in spec.bands().iter().zip(&parts) {
                let path = dir.join(format!("{stem}_{}.sbt", band.name));
                write_tensor(&path, &Tensor::from(part))?;
                written.push(json!({
                    "band": band.name,
                    "r_min": band.range.r_min,
                    "r_max": band.range.r_max,
                    "path": path.display().to_string(),
                    "l2_norm": part.l2_norm(),
                }));
            }
            let summary = json!({
                "input": input.display().to_string(),
                "bands": written,
                "reconstruction_max_abs_error": sum.max_abs_diff(&image)?,
            });
            write_json(&summary, None)
        }
        Command::Ingest { config: _, input, out } => {
            let summary = ingest_file(&input)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            write_json(&summary, out.as_deref())
        }
        Command::Complexity1d {
            config: _,
            family,
            params,
            domain,
            d_max,
            tol,
            grid,
            numeric,
            out,
        } => {
            let [a, b] = domain[..] else {
                bail!("--domain takes two values, e.g. -1,1");
            };
            let opts = ProfileOptions {
                d_max,
                tol,
                grid_points: grid,
            };
            let values = parse_list(&params)?;
            let profile = match (family, numeric) {
                (Family::Poly, false) => derivative_profile(&Polynomial::new(values), (a, b), opts)?,
                (Family::Poly, true) => {
                    let p = Polynomial::new(values);
                    derivative_profile(&|x: f64| p.eval(x), (a, b), opts)?
                }
                (Family::Sin, numeric) => {
                    let [frequency] = values[..] else {
                        bail!("sin takes one frequency");
                    };
                    let s = Sine {
                        amplitude: 1.0,
                        frequency,
                    };
                    if numeric {
                        derivative_profile(&|x: f64| (frequency * x).sin(), (a, b), opts)?
                    } else {
                        derivative_profile(&s, (a, b), opts)?
                    }
                }
            };
            let c = complexity_1d(&profile)?;
            write_json(&complexity_json(&profile, c), out.as_deref())
        }
        Command::Taylor {
            config: _,
            magnitudes,
            eps,
            tol,
            out,
        } => {
            let profile = DerivativeProfile::from_magnitudes((0.0, 0.0), magnitudes, tol)?;
            let t = taylor_bound(&profile, eps)?;
            write_json(
                &json!({ "magnitudes": profile.magnitudes, "eps": eps, "bound": t.bound, "notice": t.notice }),
                out.as_deref(),
            )
        }
    }
}

fn complexity_json(p: &DerivativeProfile, c: f64) -> serde_json::Value {
    json!({
        "domain": [p.domain.0, p.domain.1],
        "magnitudes": p.magnitudes,
        "order": p.order(),
        "d_max": p.d_max,
        "tol": p.tol,
        "truncated": p.truncated,
        "complexity": c,
        "notices": p.notices,
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
