use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ppgid_core::bench::{self, BenchCase};
use ppgid_core::eval::{self, SignalRef, TrialRecord};
use ppgid_core::export::{build_dl_export, DlExportOptions};
use ppgid_core::frames::{self, FrameFormat, Reduction, RoiSpec, DEFAULT_FRAME_RATE_HZ};
use ppgid_core::human_id::{self, AuthDecision, HumanIdConfig, HumanIdTemplate};
use ppgid_core::synth::{self, Morphology, SynthSpec};
use ppgid_core::vitals::{self, HeartRateEstimate, HrMethod, VitalsConfig};
use ppgid_core::{Error, ErrorKind, PpgSignal};

#[derive(Parser)]
#[command(name = "ppgid", version, about = "PPG heart rate and pulse-wave user verification")]
struct Cli {
    /// Sample rate in Hz. Overrides frame metadata for `extract`; used for
    /// signal files that carry no rate of their own; sets the rate for `synth`.
    #[arg(long, global = true)]
    sample_rate: Option<f64>,
    /// Output format for reports written to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for `synth`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Basic,
    Ensemble,
}

impl From<Method> for HrMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Basic => HrMethod::Basic,
            Method::Ensemble => HrMethod::Ensemble,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReductionArg {
    Sum,
    Mean,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Vitals,
    Auth,
}

#[derive(Clone, Copy, ValueEnum)]
enum Benchmark {
    Hr,
    HeavyNoise,
    Auth,
}

#[derive(Subcommand)]
enum Cmd {
    /// Turn a frame sequence into a PPG signal.
    Extract {
        /// PGM directory or raw container file.
        frames: PathBuf,
        /// `x0,y0,w,h` or `auto`. Omitted means the full frame.
        #[arg(long)]
        roi: Option<String>,
        #[arg(long, value_enum, default_value_t = ReductionArg::Sum)]
        reduction: ReductionArg,
        /// Output file (.json or .csv). Stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate heart rate from a signal file.
    Hr {
        signal: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Basic)]
        method: Method,
    },
    /// Build a Human-ID template from a signal file.
    Enroll {
        signal: PathBuf,
        #[arg(long)]
        user: String,
        /// Template file. Stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        hid: HidArgs,
    },
    /// Check a probe signal against a template.
    Verify { template: PathBuf, signal: PathBuf },
    /// Run the evaluation protocol over a trial manifest.
    Eval {
        manifest: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Method::Basic)]
        method: Method,
        #[command(flatten)]
        hid: HidArgs,
    },
    /// Generate synthetic signals, frames or a whole benchmark.
    Synth(SynthArgs),
    /// Export a manifest as a fixed-length CSV matrix plus metadata.
    ExportDl {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Row length. Defaults to the shortest trial.
        #[arg(long)]
        signal_len: Option<usize>,
        /// Adds binary labels with this user as the positive class.
        #[arg(long)]
        positive_user: Option<String>,
    },
}

#[derive(Args)]
struct HidArgs {
    #[arg(long, default_value_t = HumanIdConfig::default().half_width)]
    half_width: usize,
    #[arg(long, default_value_t = HumanIdConfig::default().threshold_frac)]
    threshold: f64,
}

impl HidArgs {
    fn config(&self) -> HumanIdConfig {
        HumanIdConfig {
            half_width: self.half_width,
            threshold_frac: self.threshold,
            ..HumanIdConfig::default()
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output signal file (.json or .csv), or directory with --benchmark.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 75.0)]
    hr: f64,
    #[arg(long, default_value_t = 15.0)]
    duration: f64,
    /// One of the named presets.
    #[arg(long, default_value = "rounded")]
    morphology: String,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Polynomial drift coefficients `c0,c1,..` in signal units per s^i.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    drift: Vec<f64>,
    /// Also write ground truth as JSON here.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Also render the signal as a PGM frame directory here.
    #[arg(long)]
    frames: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    width: u32,
    #[arg(long, default_value_t = 8)]
    height: u32,
    #[arg(long, default_value_t = 8)]
    bit_depth: u8,
    /// Write a fixed benchmark (signals plus manifest.json) into --out.
    #[arg(long, value_enum)]
    benchmark: Option<Benchmark>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Parameter => 1,
                ErrorKind::Data => 2,
                ErrorKind::Algorithm => 3,
            })
        }
    }
}

type Result<T> = ppgid_core::Result<T>;

fn signal_rate(cli: &Cli) -> Option<f64> {
    Some(cli.sample_rate.unwrap_or(DEFAULT_FRAME_RATE_HZ))
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::Format(format!("writing stdout: {e}")))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Format(format!("writing {}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Extract {
            frames,
            roi,
            reduction,
            out,
        } => cmd_extract(cli, frames, roi.as_deref(), *reduction, out.as_deref()),
        Cmd::Hr { signal, method } => {
            let sig = PpgSignal::read(signal, signal_rate(cli))?;
            let est = vitals::estimate_heart_rate(&sig, (*method).into(), &VitalsConfig::default())?;
            emit(&render_hr(cli.format, &est)?)
        }
        Cmd::Enroll {
            signal,
            user,
            out,
            hid,
        } => {
            let sig = PpgSignal::read(signal, signal_rate(cli))?;
            let tpl = human_id::enroll(&sig, user, &hid.config())?;
            match out {
                Some(p) => write_file(p, &tpl.to_json()?),
                None => emit(&tpl.to_json()?),
            }
        }
        Cmd::Verify { template, signal } => {
            let text = fs::read_to_string(template)
                .map_err(|e| Error::Format(format!("reading {}: {e}", template.display())))?;
            let tpl = HumanIdTemplate::from_json(&text)?;
            let sig = PpgSignal::read(signal, signal_rate(cli))?;
            let d = human_id::verify(&tpl, &sig)?;
            emit(&render_decision(cli.format, &d)?)
        }
        Cmd::Eval {
            manifest,
            mode,
            method,
            hid,
        } => {
            let trials = eval::read_manifest(manifest)?;
            match mode {
                Mode::Vitals => {
                    let r = eval::evaluate_vitals(&trials, (*method).into(), &VitalsConfig::default(), signal_rate(cli))?;
                    emit(&match cli.format {
                        Format::Json => to_json(&r)?,
                        Format::Table => eval::vitals_table(&r),
                        Format::Csv => vitals_csv(&r),
                    })
                }
                Mode::Auth => {
                    let r = eval::evaluate_auth(&trials, &hid.config(), signal_rate(cli))?;
                    emit(&match cli.format {
                        Format::Json => to_json(&r)?,
                        Format::Table => eval::auth_table(&r),
                        Format::Csv => auth_csv(&r),
                    })
                }
            }
        }
        Cmd::Synth(args) => cmd_synth(cli, args),
        Cmd::ExportDl {
            manifest,
            out,
            signal_len,
            positive_user,
        } => {
            let trials = eval::read_manifest(manifest)?;
            let opts = DlExportOptions {
                signal_len: *signal_len,
                positive_user: positive_user.clone(),
            };
            build_dl_export(&trials, &opts, signal_rate(cli))?.write(out)
        }
    }
}

fn cmd_extract(cli: &Cli, path: &Path, roi: Option<&str>, reduction: ReductionArg, out: Option<&Path>) -> Result<()> {
    let format = FrameFormat::detect(path);
    let seq = frames::load_frames(path, format, cli.sample_rate)?;
    let roi = match roi {
        None => seq.full_roi(),
        Some("auto") => frames::auto_roi(&seq),
        Some(s) => s.parse::<RoiSpec>()?,
    };
    let cropped = frames::crop(&seq, roi)?;
    let reduction = match reduction {
        ReductionArg::Sum => Reduction::Sum,
        ReductionArg::Mean => Reduction::Mean,
    };
    let sig = frames::extract_ppg(&cropped, reduction)?;
    match out {
        Some(p) => sig.write(p),
        None => emit(&match cli.format {
            Format::Csv => sig.to_csv_string(),
            _ => sig.to_json_string()?,
        }),
    }
}

fn synth_spec(cli: &Cli, a: &SynthArgs) -> Result<SynthSpec> {
    let morphology = Morphology::preset(&a.morphology).ok_or_else(|| {
        let names: Vec<&str> = Morphology::preset_names().collect();
        Error::InvalidParameter(format!(
            "unknown morphology {:?}, expected one of {}",
            a.morphology,
            names.join(", ")
        ))
    })?;
    Ok(SynthSpec {
        hr_bpm: a.hr,
        duration_s: a.duration,
        sample_rate_hz: cli.sample_rate.unwrap_or(DEFAULT_FRAME_RATE_HZ),
        morphology,
        drift: a.drift.clone(),
        noise_sigma: a.noise,
        hr_jitter_frac: a.jitter,
        seed: cli.seed,
    })
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    if let Some(b) = a.benchmark {
        let cases = match b {
            Benchmark::Hr => bench::hr_benchmark(),
            Benchmark::HeavyNoise => bench::heavy_noise_benchmark(),
            Benchmark::Auth => bench::auth_benchmark(),
        };
        return write_benchmark(&cases, &a.out);
    }
    let spec = synth_spec(cli, a)?;
    let (sig, truth) = synth::synth_ppg(&spec)?;
    sig.write(&a.out)?;
    if let Some(p) = &a.truth {
        write_file(p, &to_json(&truth)?)?;
    }
    if let Some(dir) = &a.frames {
        let seq = synth::synth_frames(&sig, a.width, a.height, a.bit_depth)?;
        frames::write_image_directory(&seq, dir)?;
    }
    Ok(())
}

fn write_benchmark(cases: &[BenchCase], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Format(format!("creating {}: {e}", dir.display())))?;
    let mut trials = Vec::with_capacity(cases.len());
    for c in cases {
        let (sig, truth) = synth::synth_ppg(&c.spec)?;
        let name = format!("{}.csv", c.id);
        sig.write(&dir.join(&name))?;
        trials.push(TrialRecord {
            user_label: c.user.clone(),
            trial_index: c.trial,
            signal_ref: SignalRef::Path(name.into()),
            ground_truth_bpm: Some(truth.true_hr_bpm),
        });
    }
    eval::write_manifest(&trials, &dir.join("manifest.json"))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn render_hr(format: Format, e: &HeartRateEstimate) -> Result<String> {
    let quality = e.quality_good.map_or_else(String::new, |q| q.to_string());
    Ok(match format {
        Format::Json => to_json(e)?,
        Format::Csv => format!(
            "bpm,method,skewness,quality_good,peak_count\n{},{},{},{},{}\n",
            e.bpm,
            e.method,
            opt(e.skewness),
            quality,
            e.peak_count
        ),
        Format::Table => {
            let mut s = format!("heart rate  {:.2} bpm ({})\npeaks       {}\n", e.bpm, e.method, e.peak_count);
            if let Some(per) = &e.per_filter_bpm {
                let cells: Vec<String> = per
                    .iter()
                    .map(|b| b.map_or_else(|| "-".into(), |x| format!("{x:.2}")))
                    .collect();
                s += &format!("branches    {}\n", cells.join("  "));
            }
            if let Some(k) = e.skewness {
                s += &format!("skewness    {k:.4}\nquality     {}\n", if e.quality_good == Some(true) { "good" } else { "poor" });
            }
            s
        }
    })
}

fn render_decision(format: Format, d: &AuthDecision) -> Result<String> {
    Ok(match format {
        Format::Json => to_json(d)?,
        Format::Csv => format!(
            "accepted,outcome,probe_value,baseline_value,abs_difference,threshold\n{},{},{},{},{},{}\n",
            d.accepted,
            serde_json::to_value(d.outcome)?.as_str().unwrap_or_default(),
            opt(d.probe_value),
            d.baseline_value,
            opt(d.abs_difference),
            d.threshold
        ),
        Format::Table => {
            let mut s = format!(
                "decision    {}\nbaseline    {:.4}\nthreshold   {:.4}\n",
                if d.accepted { "accepted" } else { "rejected" },
                d.baseline_value,
                d.threshold
            );
            if let (Some(p), Some(diff)) = (d.probe_value, d.abs_difference) {
                s += &format!("probe       {p:.4}\ndifference  {diff:.4}\n");
            }
            if let Some(r) = &d.reason {
                s += &format!("reason      {r}\n");
            }
            s
        }
    })
}

fn vitals_csv(r: &eval::VitalsReport) -> String {
    let mut s = String::from("user_label,trial_index,ground_truth_bpm,calculated_bpm,percent_error\n");
    for row in &r.rows {
        s += &format!(
            "{},{},{},{},{}\n",
            row.user_label,
            row.trial_index,
            row.ground_truth_bpm,
            opt(row.calculated_bpm),
            opt(row.percent_error)
        );
    }
    s
}

fn auth_csv(r: &eval::AuthReport) -> String {
    let mut s = String::from("user_label,baseline_trial,baseline_value,tp,fn,fp,tn\n");
    for u in &r.users {
        let counts = u
            .counts
            .map_or_else(|| ",,,".to_string(), |c| format!("{},{},{},{}", c.tp, c.fn_, c.fp, c.tn));
        s += &format!("{},{},{},{}\n", u.user_label, u.baseline_trial, opt(u.baseline_value), counts);
    }
    s
}
