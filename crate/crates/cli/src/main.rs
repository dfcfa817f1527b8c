//! `aoi-sched` — runs simulations, threshold sweeps, ratio studies, and the
//! long-wait fixed-point calibration, writing CSV/JSON artifacts.
//!
//! Every file-producing command also writes a `manifest.json` with the
//! fully resolved configuration and an `argv` array; re-running that argv
//! reproduces the outputs byte for byte.
//!
//! Exit codes: 0 success, 1 runtime/simulation error, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aoi_sched_core::calibrate::{
    ratio_sweep, solve_beta, sweep_lambda, write_ratio_csv, write_sweep_csv, RatioPolicy,
    RatioSweepSettings, SweepPolicyKind, SweepSettings,
};
use aoi_sched_core::distributions::DistributionSpec;
use aoi_sched_core::engine::{simulate, simulate_traced, write_trace_csv, ScenarioConfig};
use aoi_sched_core::policies::PolicySpec;

const THREADS_ENV: &str = "AOI_SCHED_THREADS";

#[derive(Parser)]
#[command(
    name = "aoi-sched",
    version,
    about = "Two-hop status-update scheduling simulator and threshold calibrator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy and write its age metrics (and optional trace).
    Simulate(SimulateArgs),
    /// Sweep policies over a threshold grid; one CSV per policy.
    Sweep(SweepArgs),
    /// Calibrate policies across transmission/processing mean ratios.
    RatioSweep(RatioSweepArgs),
    /// Solve the long-wait fixed point and print the solution as JSON.
    CalibrateBeta(BetaArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Policy: zero-wait, long-wait:BETA, paoi-t:LAMBDA, or paoi-tp:LAMBDA
    #[arg(long)]
    policy: String,
    /// Transmission-time distribution: exp:MEAN, uniform:A,B, or det:V
    #[arg(long)]
    t: String,
    /// Processing-time distribution, same syntax as --t
    #[arg(long)]
    c: String,
    /// Packets to deliver
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial transmission duration
    #[arg(long, default_value_t = 1.0)]
    t0: f64,
    /// Initial processing duration
    #[arg(long, default_value_t = 0.0)]
    c0: f64,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write the per-packet trace CSV
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma list of paoi-t, paoi-tp, long-wait
    #[arg(long)]
    policies: Option<String>,
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    c: Option<String>,
    /// Threshold interval lo:hi
    #[arg(long)]
    interval: Option<String>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    t0: f64,
    #[arg(long, default_value_t = 0.0)]
    c0: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Named configuration: fig3 | fig4 | fig5 | fig6
    #[arg(long)]
    scenario: Option<String>,
}

#[derive(Args)]
struct RatioSweepArgs {
    /// Comma list of transmission/processing mean ratios
    #[arg(long)]
    ratios: Option<String>,
    /// Comma list of paoi-t, paoi-tp, long-wait, long-wait-beta
    #[arg(long)]
    policies: Option<String>,
    /// Total mean delay (transmission plus processing)
    #[arg(long, default_value_t = 1.0)]
    total: f64,
    #[arg(long)]
    interval: Option<String>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    c0: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Named configuration: fig7
    #[arg(long)]
    scenario: Option<String>,
}

#[derive(Args)]
struct BetaArgs {
    #[arg(long)]
    t: String,
    #[arg(long)]
    c: String,
    /// Monte-Carlo sample size
    #[arg(long, default_value_t = 1_000_000)]
    mc: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

struct CliError {
    code: u8,
    message: String,
}

fn usage_err(message: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        message: message.into(),
    }
}

fn runtime_err(message: impl ToString) -> CliError {
    CliError {
        code: 1,
        message: message.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::RatioSweep(args) => cmd_ratio_sweep(args),
        Command::CalibrateBeta(args) => cmd_calibrate_beta(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aoi-sched: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn parse_dist(text: &str, flag: &str) -> Result<DistributionSpec, CliError> {
    text.parse::<DistributionSpec>()
        .map_err(|e| usage_err(format!("{flag}: {e}")))
}

fn parse_policy(text: &str) -> Result<PolicySpec, CliError> {
    text.parse::<PolicySpec>()
        .map_err(|e| usage_err(format!("--policy: {e}")))
}

fn parse_interval(text: &str) -> Result<(f64, f64), CliError> {
    let bad = || {
        usage_err(format!(
            "--interval must be lo:hi with 0 <= lo <= hi, got `{text}`"
        ))
    };
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi >= lo) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn parse_comma_list<T, F>(text: &str, parse: F) -> Result<Vec<T>, CliError>
where
    F: Fn(&str) -> Result<T, CliError>,
{
    text.split(',').map(|item| parse(item.trim())).collect()
}

fn require_n(n: Option<u64>) -> Result<u64, CliError> {
    match n {
        Some(0) => Err(usage_err("n must be >= 1")),
        Some(n) => Ok(n),
        None => Err(usage_err("missing --n")),
    }
}

fn threads_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(text) => match text.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(usage_err(format!(
                "{THREADS_ENV} must be a positive integer, got `{text}`"
            ))),
        },
        Err(_) => Ok(None),
    }
}

/// Writes every output plus the manifest that reproduces them.
struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| runtime_err(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)
            .map_err(|e| runtime_err(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path.display().to_string());
        Ok(path)
    }

    fn finish_manifest(
        mut self,
        command: &str,
        seed: u64,
        argv: Vec<String>,
        config: serde_json::Value,
    ) -> Result<(), CliError> {
        let manifest_path = self.dir.join("manifest.json").display().to_string();
        let mut outputs = self.written.clone();
        outputs.push(manifest_path);
        let manifest = serde_json::json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "argv": argv,
            "config": config,
            "outputs": outputs,
        });
        let bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serialize");
        self.write("manifest.json", &bytes)?;
        Ok(())
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let n = require_n(Some(args.n))?;
    let config = ScenarioConfig {
        dist_t: parse_dist(&args.t, "--t")?,
        dist_c: parse_dist(&args.c, "--c")?,
        policy: parse_policy(&args.policy)?,
        n_packets: n,
        seed: args.seed,
        t0: args.t0,
        c0: args.c0,
    };
    let result = if args.trace {
        simulate_traced(&config)
    } else {
        simulate(&config)
    }
    .map_err(runtime_err)?;

    let mut out = OutputDir::create(&args.out)?;
    out.write("result.json", result.to_json().as_bytes())?;
    if let Some(trace) = &result.trace {
        let mut csv = Vec::new();
        write_trace_csv(trace, &mut csv).map_err(runtime_err)?;
        out.write("trace.csv", &csv)?;
    }

    println!("avg_aoi_trapezoid = {}", result.avg_aoi_trapezoid);
    println!("avg_aoi_integral = {}", result.avg_aoi_integral);
    println!("avg_paoi = {}", result.avg_paoi);

    let mut argv = vec![
        "aoi-sched".into(),
        "simulate".into(),
        format!("--policy={}", config.policy),
        format!("--t={}", config.dist_t),
        format!("--c={}", config.dist_c),
        format!("--n={n}"),
        format!("--seed={}", args.seed),
        format!("--t0={}", args.t0),
        format!("--c0={}", args.c0),
        format!("--out={}", args.out.display()),
    ];
    if args.trace {
        argv.push("--trace".into());
    }
    out.finish_manifest(
        "simulate",
        args.seed,
        argv,
        serde_json::to_value(&config).expect("config serialize"),
    )
}

struct SweepScenario {
    dist_t: &'static str,
    dist_c: &'static str,
}

fn sweep_scenario(name: &str) -> Result<SweepScenario, CliError> {
    // Ratio-4 and ratio-0.25 mean splits at E[T]+E[C] = 1; uniform
    // processing uses the mean-pinned support (0, 2 E[C]).
    match name {
        "fig3" => Ok(SweepScenario {
            dist_t: "exp:0.8",
            dist_c: "exp:0.2",
        }),
        "fig4" => Ok(SweepScenario {
            dist_t: "exp:0.2",
            dist_c: "exp:0.8",
        }),
        "fig5" => Ok(SweepScenario {
            dist_t: "exp:0.8",
            dist_c: "uniform:0,0.4",
        }),
        "fig6" => Ok(SweepScenario {
            dist_t: "exp:0.2",
            dist_c: "uniform:0,1.6",
        }),
        other => Err(usage_err(format!(
            "unknown sweep scenario `{other}` (expected fig3, fig4, fig5, or fig6)"
        ))),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let scenario = args.scenario.as_deref().map(sweep_scenario).transpose()?;
    let dist_t = match (&args.t, &scenario) {
        (Some(text), _) => parse_dist(text, "--t")?,
        (None, Some(s)) => parse_dist(s.dist_t, "--t")?,
        (None, None) => return Err(usage_err("missing --t (or --scenario)")),
    };
    let dist_c = match (&args.c, &scenario) {
        (Some(text), _) => parse_dist(text, "--c")?,
        (None, Some(s)) => parse_dist(s.dist_c, "--c")?,
        (None, None) => return Err(usage_err("missing --c (or --scenario)")),
    };
    let policies = match &args.policies {
        Some(list) => parse_comma_list(list, |item| {
            item.parse::<SweepPolicyKind>()
                .map_err(|e| usage_err(format!("--policies: {e}")))
        })?,
        None if scenario.is_some() => vec![
            SweepPolicyKind::PAoIThreshold,
            SweepPolicyKind::PAoIThresholdPostponed,
            SweepPolicyKind::LongWaitByLambda,
        ],
        None => return Err(usage_err("missing --policies (or --scenario)")),
    };
    let interval = match &args.interval {
        Some(text) => parse_interval(text)?,
        None if scenario.is_some() => (1.0, 4.0),
        None => return Err(usage_err("missing --interval (or --scenario)")),
    };
    let step = match (args.step, &scenario) {
        (Some(step), _) if step > 0.0 => step,
        (Some(step), _) => return Err(usage_err(format!("--step must be > 0, got {step}"))),
        (None, Some(_)) => 0.025,
        (None, None) => return Err(usage_err("missing --step (or --scenario)")),
    };
    let n = match (args.n, &scenario) {
        (None, Some(_)) => 100_000,
        (n, _) => require_n(n)?,
    };

    let settings = SweepSettings {
        interval,
        step,
        n_packets: n,
        seed: args.seed,
        t0: args.t0,
        c0: args.c0,
        threads: threads_cap()?,
    };

    let mut out = OutputDir::create(&args.out)?;
    for kind in &policies {
        let result = sweep_lambda(*kind, &dist_t, &dist_c, &settings).map_err(runtime_err)?;
        let mut csv = Vec::new();
        write_sweep_csv(&result, &mut csv).map_err(runtime_err)?;
        out.write(&format!("sweep_{kind}.csv"), &csv)?;
        out.write(
            &format!("sweep_{kind}_summary.json"),
            result.summary_json().as_bytes(),
        )?;
        println!(
            "{kind}: best_lambda = {}, best_aoi = {}",
            result.best_lambda, result.best_aoi
        );
    }

    let policies_text = policies
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",");
    let argv = vec![
        "aoi-sched".into(),
        "sweep".into(),
        format!("--policies={policies_text}"),
        format!("--t={dist_t}"),
        format!("--c={dist_c}"),
        format!("--interval={}:{}", interval.0, interval.1),
        format!("--step={step}"),
        format!("--n={n}"),
        format!("--seed={}", args.seed),
        format!("--t0={}", args.t0),
        format!("--c0={}", args.c0),
        format!("--out={}", args.out.display()),
    ];
    let config = serde_json::json!({
        "policies": policies_text,
        "dist_t": dist_t.to_string(),
        "dist_c": dist_c.to_string(),
        "interval": [interval.0, interval.1],
        "step": step,
        "n_packets": n,
        "seed": args.seed,
        "t0": args.t0,
        "c0": args.c0,
    });
    out.finish_manifest("sweep", args.seed, argv, config)
}

fn cmd_ratio_sweep(args: RatioSweepArgs) -> Result<(), CliError> {
    let is_fig7 = match args.scenario.as_deref() {
        Some("fig7") => true,
        Some(other) => {
            return Err(usage_err(format!(
                "unknown ratio-sweep scenario `{other}` (expected fig7)"
            )))
        }
        None => false,
    };
    let ratios = match &args.ratios {
        Some(list) => parse_comma_list(list, |item| {
            let ratio: f64 = item
                .parse()
                .map_err(|_| usage_err(format!("--ratios: bad number `{item}`")))?;
            if ratio > 0.0 {
                Ok(ratio)
            } else {
                Err(usage_err(format!(
                    "--ratios: every ratio must be > 0, got {ratio}"
                )))
            }
        })?,
        None if is_fig7 => vec![0.25, 0.5, 1.0, 2.0, 4.0, 6.0],
        None => return Err(usage_err("missing --ratios (or --scenario fig7)")),
    };
    let policies = match &args.policies {
        Some(list) => parse_comma_list(list, |item| {
            item.parse::<RatioPolicy>()
                .map_err(|e| usage_err(format!("--policies: {e}")))
        })?,
        None => vec![
            RatioPolicy::Sweep(SweepPolicyKind::PAoIThresholdPostponed),
            RatioPolicy::Sweep(SweepPolicyKind::LongWaitByLambda),
            RatioPolicy::LongWaitBeta,
        ],
    };
    if !(args.total > 0.0 && args.total.is_finite()) {
        return Err(usage_err(format!(
            "--total must be > 0, got {}",
            args.total
        )));
    }
    let n = match args.n {
        None if is_fig7 => 100_000,
        n => require_n(n)?,
    };
    let interval = args.interval.as_deref().map(parse_interval).transpose()?;

    let settings = RatioSweepSettings {
        total: args.total,
        interval,
        step: args.step,
        n_packets: n,
        seed: args.seed,
        t0: args.t0,
        c0: args.c0,
        threads: threads_cap()?,
        beta_mc_samples: 1_000_000,
        beta_tol: 1e-9,
    };
    let rows = ratio_sweep(&policies, &ratios, &settings).map_err(runtime_err)?;

    let mut out = OutputDir::create(&args.out)?;
    let mut csv = Vec::new();
    write_ratio_csv(&rows, &mut csv).map_err(runtime_err)?;
    out.write("ratio_sweep.csv", &csv)?;
    for row in &rows {
        println!(
            "ratio {}: {} best_param = {}, best_aoi = {}",
            row.ratio, row.policy, row.best_param, row.best_aoi
        );
    }

    let ratios_text = ratios
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",");
    let policies_text = policies
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",");
    let mut argv = vec![
        "aoi-sched".into(),
        "ratio-sweep".into(),
        format!("--ratios={ratios_text}"),
        format!("--policies={policies_text}"),
        format!("--total={}", args.total),
        format!("--n={n}"),
        format!("--seed={}", args.seed),
        format!("--c0={}", args.c0),
        format!("--out={}", args.out.display()),
    ];
    if let Some((lo, hi)) = interval {
        argv.push(format!("--interval={lo}:{hi}"));
    }
    if let Some(step) = args.step {
        argv.push(format!("--step={step}"));
    }
    if let Some(t0) = args.t0 {
        argv.push(format!("--t0={t0}"));
    }
    let config = serde_json::json!({
        "ratios": ratios,
        "policies": policies_text,
        "total": args.total,
        "interval": interval.map(|(lo, hi)| vec![lo, hi]),
        "step": args.step,
        "n_packets": n,
        "seed": args.seed,
        "t0": args.t0,
        "c0": args.c0,
    });
    out.finish_manifest("ratio-sweep", args.seed, argv, config)
}

fn cmd_calibrate_beta(args: BetaArgs) -> Result<(), CliError> {
    let dist_t = parse_dist(&args.t, "--t")?;
    let dist_c = parse_dist(&args.c, "--c")?;
    let solution =
        solve_beta(&dist_t, &dist_c, args.mc, args.tol, args.seed).map_err(runtime_err)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&solution).expect("solution serialize")
    );
    Ok(())
}
