//! The `siglink` command-line entry point.
//!
//! Subcommands: `analyze` (closed-form sweep), `simulate` / `sweep`
//! (discrete-event runs), `embed` / `extract` (single-frame codec),
//! `send` / `recv` (full payload pipeline over PPM frame sequences),
//! `histogram`, and `throughput`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/validation error. CSV and
//! results go to stdout or `--out`; diagnostics go to stderr only.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use crate::des::{self, Policy, SimParams};
use crate::framing;
use crate::isc::{self, Frame, ModulationProfile, SegmentLayout};
use crate::ppm;
use crate::queueing::{self, CloudSystemConfig, DisplayQueueConfig, EvaluationMode};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Queue(#[from] queueing::QueueError),
    #[error("{0}")]
    Des(#[from] des::DesError),
    #[error("{0}")]
    Isc(#[from] isc::IscError),
    #[error("{0}")]
    Framing(#[from] framing::FramingError),
    #[error("{0}")]
    Ppm(#[from] ppm::PpmError),
    #[error("InvalidConfig: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Parser)]
#[command(name = "siglink", version, about = "Signage cloud link-pool analysis and invisible screen-to-camera codec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run configuration; defaults applied for missing keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct CodecArgs {
    #[arg(long, default_value_t = 2)]
    rows: u32,
    #[arg(long, default_value_t = 4)]
    cols: u32,
    #[arg(long, default_value_t = 2)]
    delta_r: u8,
    #[arg(long, default_value_t = 0)]
    delta_g: u8,
    #[arg(long, default_value_t = 4)]
    delta_b: u8,
    /// Decode threshold; defaults to delta_b / 2
    #[arg(long)]
    threshold: Option<f64>,
}

impl CodecArgs {
    fn profile(&self) -> Result<ModulationProfile, CliError> {
        let tau = self.threshold.unwrap_or(self.delta_b as f64 / 2.0);
        Ok(ModulationProfile::new(
            self.delta_r,
            self.delta_g,
            self.delta_b,
            tau,
        )?)
    }

    fn layout(&self, frame: &Frame) -> Result<SegmentLayout, CliError> {
        Ok(isc::make_layout(
            frame.width(),
            frame.height(),
            self.rows,
            self.cols,
        )?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form sweep of rejection probability and utilization
    Analyze(ConfigArgs),
    /// One simulated scenario at the configured arrival rates
    Simulate(ConfigArgs),
    /// Simulated sweep over the configured totals, both policies
    Sweep(ConfigArgs),
    /// Embed a bit pattern into one frame
    Embed {
        #[arg(long)]
        reference: PathBuf,
        /// Bit string, e.g. 10101010, one bit per segment
        #[arg(long)]
        bits: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        codec: CodecArgs,
    },
    /// Recover the bit pattern from a reference/data frame pair
    Extract {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        codec: CodecArgs,
    },
    /// Frame a link text and emit the PPM frame sequence
    Send {
        #[arg(long)]
        text: String,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        codec: CodecArgs,
    },
    /// Decode a PPM frame sequence back to the link text
    Recv {
        /// Frame files in order (reference, data, reference, data, ...)
        frames: Vec<PathBuf>,
        #[command(flatten)]
        codec: CodecArgs,
    },
    /// Per-channel 256-bin histogram of one frame as CSV
    Histogram {
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Net codec bit rate for a display frame rate
    Throughput {
        #[arg(long)]
        fps: f64,
        #[arg(long)]
        bits: u32,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DisplaySpec {
    channels: u32,
    arrival_rate: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CapacitySpec {
    Bounded(usize),
    Keyword(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSpec {
    totals: Vec<f64>,
    ratio: Vec<f64>,
}

/// JSON run configuration; every key optional. Defaults model the
/// reference scenario: 3 displays x 10 channels, 10 s mean service,
/// 5:3:2 arrival ratio, totals 1..10.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunConfig {
    displays: Vec<DisplaySpec>,
    service_mean_s: f64,
    policy: String,
    queue_capacity: CapacitySpec,
    seed: u64,
    total_arrivals: u64,
    replications: u64,
    warmup_fraction: f64,
    mode: String,
    sweep: SweepSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            displays: vec![
                DisplaySpec { channels: 10, arrival_rate: 0.5 },
                DisplaySpec { channels: 10, arrival_rate: 0.3 },
                DisplaySpec { channels: 10, arrival_rate: 0.2 },
            ],
            service_mean_s: 10.0,
            policy: "dynamic".into(),
            queue_capacity: CapacitySpec::Bounded(100),
            seed: 1,
            total_arrivals: 100_000,
            replications: 30,
            warmup_fraction: 0.1,
            mode: "corrected".into(),
            sweep: SweepSpec {
                totals: (1..=10).map(|t| t as f64).collect(),
                ratio: vec![5.0, 3.0, 2.0],
            },
        }
    }
}

struct ValidatedConfig {
    system: CloudSystemConfig,
    policy: Policy,
    mode: EvaluationMode,
    params: SimParams,
    replications: u64,
    totals: Vec<f64>,
    ratio: Vec<f64>,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p)?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }

    fn validate(&self) -> Result<ValidatedConfig, CliError> {
        if self.service_mean_s.is_nan() || self.service_mean_s <= 0.0 {
            return Err(CliError::Config(format!(
                "service_mean_s must be > 0, got {}",
                self.service_mean_s
            )));
        }
        let mu = 1.0 / self.service_mean_s;
        let displays: Result<Vec<_>, _> = self
            .displays
            .iter()
            .enumerate()
            .map(|(i, d)| {
                DisplayQueueConfig::new((i + 1) as u32, d.channels, d.arrival_rate, mu)
            })
            .collect();
        let system = CloudSystemConfig::new(displays?)?;
        let policy = match self.policy.as_str() {
            "static" => Policy::StaticPartition,
            "dynamic" => Policy::DynamicBorrow,
            other => {
                return Err(CliError::Config(format!(
                    "policy must be \"static\" or \"dynamic\", got {other:?}"
                )))
            }
        };
        let mode = match self.mode.as_str() {
            "verbatim" => EvaluationMode::Verbatim,
            "corrected" => EvaluationMode::Corrected,
            other => {
                return Err(CliError::Config(format!(
                    "mode must be \"verbatim\" or \"corrected\", got {other:?}"
                )))
            }
        };
        let queue_capacity = match &self.queue_capacity {
            CapacitySpec::Bounded(n) => Some(*n),
            CapacitySpec::Keyword(k) if k == "unbounded" => None,
            CapacitySpec::Keyword(k) => {
                return Err(CliError::Config(format!(
                    "queue_capacity must be an integer or \"unbounded\", got {k:?}"
                )))
            }
        };
        let params = SimParams {
            seed: self.seed,
            total_arrivals: self.total_arrivals,
            queue_capacity,
            warmup_fraction: self.warmup_fraction,
        };
        params.validate()?;
        if self.replications < 2 {
            return Err(CliError::Config("replications must be >= 2".into()));
        }
        Ok(ValidatedConfig {
            system,
            policy,
            mode,
            params,
            replications: self.replications,
            totals: self.sweep.totals.clone(),
            ratio: self.sweep.ratio.clone(),
        })
    }
}

impl ValidatedConfig {
    /// The ratio is consumed only by the sweep-style commands, so its
    /// length is checked here rather than up front; a single-display
    /// simulate config need not override the three-way default.
    fn sweep_ratio(&self) -> Result<&[f64], CliError> {
        if self.ratio.len() != self.system.displays().len() {
            return Err(CliError::Config(format!(
                "sweep.ratio length {} != display count {}",
                self.ratio.len(),
                self.system.displays().len()
            )));
        }
        if self.ratio.iter().any(|&r| r.is_nan() || r <= 0.0) {
            return Err(CliError::Config("sweep.ratio entries must be positive".into()));
        }
        Ok(&self.ratio)
    }
}

/// Six significant digits, plain decimal.
fn fmt6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    format!("{:.*}", decimals, x)
}

const CSV_HEADER: &str = "scenario,total_rate,policy_mode,wait_probability,drop_probability,\
mean_wait_s,busy_fraction,mean_queue_len,ci_wait_probability,ci_drop_probability,\
ci_mean_wait_s,ci_busy_fraction,ci_mean_queue_len";

fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, content)?,
        None => {
            let stdout = std::io::stdout();
            let mut h = stdout.lock();
            h.write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

fn cmd_analyze(args: &ConfigArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let v = cfg.validate()?;
    let rows = queueing::sweep_rates(&v.system, &v.totals, v.sweep_ratio()?, v.mode)?;
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for row in rows {
        let (wait, busy) = match (row.rejection, row.utilization) {
            (Some(r), Some(u)) => (fmt6(r), fmt6(u)),
            _ => ("unstable".to_string(), "unstable".to_string()),
        };
        csv.push_str(&format!(
            "analytic,{},{},{},,,{},,,,,,\n",
            fmt6(row.total_arrival_rate),
            row.mode,
            wait,
            busy,
        ));
    }
    emit(args.out.as_deref(), &csv)
}

fn report_row(
    scenario: &str,
    total_rate: f64,
    policy: Policy,
    report: &des::ReplicationReport,
) -> String {
    format!(
        "{scenario},{},{policy},{},{},{},{},{},{},{},{},{},{}\n",
        fmt6(total_rate),
        fmt6(report.wait_probability.mean),
        fmt6(report.drop_probability.mean),
        fmt6(report.mean_wait_s.mean),
        fmt6(report.busy_fraction.mean),
        fmt6(report.mean_queue_len.mean),
        fmt6(report.wait_probability.ci_halfwidth),
        fmt6(report.drop_probability.ci_halfwidth),
        fmt6(report.mean_wait_s.ci_halfwidth),
        fmt6(report.busy_fraction.ci_halfwidth),
        fmt6(report.mean_queue_len.ci_halfwidth),
    )
}

fn cmd_simulate(args: &ConfigArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let v = cfg.validate()?;
    let report = des::replicate(&v.system, v.policy, &v.params, v.replications)?;
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    csv.push_str(&report_row(
        "simulate",
        v.system.total_arrival_rate(),
        v.policy,
        &report,
    ));
    emit(args.out.as_deref(), &csv)
}

fn system_at_rates(
    template: &CloudSystemConfig,
    total: f64,
    ratio: &[f64],
) -> Result<CloudSystemConfig, CliError> {
    let ratio_sum: f64 = ratio.iter().sum();
    let displays: Result<Vec<_>, _> = template
        .displays()
        .iter()
        .zip(ratio)
        .map(|(tpl, r)| {
            DisplayQueueConfig::new(
                tpl.display_id,
                tpl.reserved_channels,
                total * r / ratio_sum,
                tpl.service_rate,
            )
        })
        .collect();
    Ok(CloudSystemConfig::new(displays?)?)
}

fn cmd_sweep(args: &ConfigArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let v = cfg.validate()?;
    let ratio = v.sweep_ratio()?;
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for &total in &v.totals {
        let sys = system_at_rates(&v.system, total, ratio)?;
        for policy in [Policy::StaticPartition, Policy::DynamicBorrow] {
            let report = des::replicate(&sys, policy, &v.params, v.replications)?;
            csv.push_str(&report_row("sweep", total, policy, &report));
        }
    }
    emit(args.out.as_deref(), &csv)
}

fn parse_bits(s: &str) -> Result<Vec<bool>, CliError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(CliError::Config(format!(
                "bits must be 0s and 1s, got {other:?}"
            ))),
        })
        .collect()
}

fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn cmd_embed(
    reference: &Path,
    bits: &str,
    out: &Path,
    codec: &CodecArgs,
) -> Result<(), CliError> {
    let frame = ppm::load_frame_ppm(reference)?;
    let layout = codec.layout(&frame)?;
    let profile = codec.profile()?;
    let bits = parse_bits(bits)?;
    let data = isc::embed_bits(&frame, &bits, &layout, &profile)?;
    ppm::store_frame_ppm(&data, out)?;
    Ok(())
}

fn cmd_extract(reference: &Path, data: &Path, codec: &CodecArgs) -> Result<(), CliError> {
    let r = ppm::load_frame_ppm(reference)?;
    let d = ppm::load_frame_ppm(data)?;
    let layout = codec.layout(&r)?;
    let profile = codec.profile()?;
    let bits = isc::extract_bits(&r, &d, &layout, &profile)?;
    println!("{}", bits_to_string(&bits));
    Ok(())
}

fn cmd_send(
    text: &str,
    reference: &Path,
    out_dir: &Path,
    codec: &CodecArgs,
) -> Result<(), CliError> {
    let frame = ppm::load_frame_ppm(reference)?;
    let layout = codec.layout(&frame)?;
    let profile = codec.profile()?;
    let bits = framing::frame_payload(text)?;
    let pairs = bits.len().div_ceil(layout.segment_count());
    let refs = vec![frame; pairs];
    let frames = isc::encode_stream(&refs, &bits, &layout, &profile)?;
    fs::create_dir_all(out_dir)?;
    for (i, f) in frames.iter().enumerate() {
        ppm::store_frame_ppm(f, &out_dir.join(format!("frame_{i:05}.ppm")))?;
    }
    eprintln!("wrote {} frames to {}", frames.len(), out_dir.display());
    Ok(())
}

fn cmd_recv(paths: &[PathBuf], codec: &CodecArgs) -> Result<(), CliError> {
    // a single directory argument means "all frame_*.ppm inside, sorted"
    let files: Vec<PathBuf> = if paths.len() == 1 && paths[0].is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(&paths[0])?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "ppm"))
            .collect();
        v.sort();
        v
    } else {
        paths.to_vec()
    };
    if files.is_empty() || !files.len().is_multiple_of(2) {
        return Err(CliError::Config(format!(
            "need an even, nonzero number of frames, got {}",
            files.len()
        )));
    }
    let frames: Result<Vec<Frame>, CliError> = files
        .iter()
        .map(|p| ppm::load_frame_ppm(p).map_err(CliError::from))
        .collect();
    let frames = frames?;
    let layout = codec.layout(&frames[0])?;
    let profile = codec.profile()?;
    let bits = isc::decode_stream(&frames, &layout, &profile)?;
    let text = framing::deframe_payload(&bits)?;
    println!("{text}");
    Ok(())
}

fn cmd_histogram(frame: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let f = ppm::load_frame_ppm(frame)?;
    let h = isc::histogram(&f);
    let mut csv = String::from("bin,red,green,blue\n");
    for i in 0..256 {
        csv.push_str(&format!("{i},{},{},{}\n", h.red[i], h.green[i], h.blue[i]));
    }
    emit(out, &csv)
}

fn cmd_throughput(fps: f64, bits: u32) -> Result<(), CliError> {
    if fps < 0.0 {
        return Err(CliError::Config(format!("fps must be >= 0, got {fps}")));
    }
    let bps = isc::stream_throughput(fps, bits);
    if bps.fract() == 0.0 {
        println!("{}", bps as i64);
    } else {
        println!("{bps}");
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Embed {
            reference,
            bits,
            out,
            codec,
        } => cmd_embed(reference, bits, out, codec),
        Command::Extract {
            reference,
            data,
            codec,
        } => cmd_extract(reference, data, codec),
        Command::Send {
            text,
            reference,
            out_dir,
            codec,
        } => cmd_send(text, reference, out_dir, codec),
        Command::Recv { frames, codec } => cmd_recv(frames, codec),
        Command::Histogram { frame, out } => cmd_histogram(frame, out.as_deref()),
        Command::Throughput { fps, bits } => cmd_throughput(*fps, *bits),
    }
}

/// Parse and run; returns the process exit code.
pub fn run<I>(args: I) -> u8
where
    I: IntoIterator<Item = String>,
{
    let argv = std::iter::once("siglink".to_string()).chain(args);
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap reports both --help/--version and usage errors this way
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt6_significant_digits() {
        assert_eq!(fmt6(0.0), "0");
        assert_eq!(fmt6(0.5), "0.500000");
        assert_eq!(fmt6(123.456789), "123.457");
        assert_eq!(fmt6(0.000123456789), "0.000123457");
    }

    #[test]
    fn default_config_mirrors_evaluation_setup() {
        let v = RunConfig::default().validate().unwrap();
        assert_eq!(v.system.displays().len(), 3);
        assert_eq!(v.system.total_channels(), 30);
        assert!((v.system.displays()[0].service_rate - 0.1).abs() < 1e-12);
        assert_eq!(v.ratio, vec![5.0, 3.0, 2.0]);
        assert_eq!(v.totals.len(), 10);
        assert_eq!(v.params.queue_capacity, Some(100));
    }

    #[test]
    fn unknown_keys_rejected() {
        let r: Result<RunConfig, _> = serde_json::from_str(r#"{"bogus": 1}"#);
        assert!(r.is_err());
    }

    #[test]
    fn capacity_unbounded_keyword() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"queue_capacity": "unbounded"}"#).unwrap();
        assert_eq!(cfg.validate().unwrap().params.queue_capacity, None);
        let bad: RunConfig = serde_json::from_str(r#"{"queue_capacity": "lots"}"#).unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ratio_mismatch_only_rejected_when_sweeping() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"displays": [{"channels": 1, "arrival_rate": 0.05}]}"#,
        )
        .unwrap();
        let v = cfg.validate().unwrap();
        assert!(v.sweep_ratio().is_err());
    }

    #[test]
    fn invalid_policy_and_mode_rejected() {
        let cfg: RunConfig = serde_json::from_str(r#"{"policy": "magic"}"#).unwrap();
        assert!(cfg.validate().is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"mode": "exact"}"#).unwrap();
        assert!(cfg.validate().is_err());
    }
}
