//! Threshold calibration: the long-wait fixed point and simulated sweeps.
//!
//! `solve_beta` realizes the optimal-long-wait condition
//! `E[Y + h] = E[(Y + h)^2] / (2 beta)` (with `Y = T + C` and
//! `h = max(C, beta - T)`) by sample-average approximation: one fixed
//! Monte-Carlo sample serves every bisection iterate, so the objective is
//! deterministic and the returned root reproducible.
//!
//! `sweep_lambda` evaluates a policy family on a threshold grid by
//! simulation, reusing the same seed at every grid point. Draws are keyed
//! by packet index, so all grid points see identical `(T_k, C_k)`
//! sequences (common random numbers) and differences along the curve
//! reflect the threshold alone. Grid points are independent pure runs and
//! may execute concurrently; results are keyed by grid position.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::distributions::{DistributionSpec, DrawKind, DrawStream};
use crate::engine::{simulate, EngineError, ScenarioConfig};
use crate::policies::{lambda_to_beta, PolicySpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrateError {
    #[error(
        "no sign change while growing the bracket up to beta = {hi}; degenerate distribution pair?"
    )]
    NoBracket { hi: f64 },

    #[error("bisection exhausted its iteration budget at width {width} (tolerance {tol})")]
    NotConverged { width: f64, tol: f64 },

    #[error("invalid calibration input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Solution of the long-wait fixed point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaSolution {
    pub beta: f64,
    /// Relative fixed-point defect of `beta` on the calibration sample.
    pub residual: f64,
    pub mc_samples: u64,
}

/// Draws the calibration sample for `solve_beta`; deterministic in the seed.
pub fn draw_service_pairs(
    dist_t: &DistributionSpec,
    dist_c: &DistributionSpec,
    mc_samples: u64,
    seed: u64,
) -> Vec<(f64, f64)> {
    (0..mc_samples)
        .map(|i| {
            (
                dist_t.sample(&mut DrawStream::keyed(seed, i, DrawKind::Transmission)),
                dist_c.sample(&mut DrawStream::keyed(seed, i, DrawKind::Processing)),
            )
        })
        .collect()
}

/// Solves the long-wait fixed point for `beta` by bisection over a fixed
/// Monte-Carlo sample (common random numbers across all iterates).
pub fn solve_beta(
    dist_t: &DistributionSpec,
    dist_c: &DistributionSpec,
    mc_samples: u64,
    tol: f64,
    seed: u64,
) -> Result<BetaSolution, CalibrateError> {
    if mc_samples < 10_000 {
        return Err(CalibrateError::InvalidInput(format!(
            "mc_samples must be >= 10000, got {mc_samples}"
        )));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CalibrateError::InvalidInput(format!(
            "tol must be > 0, got {tol}"
        )));
    }
    let mean_sum = dist_t.mean() + dist_c.mean();
    if mean_sum <= 0.0 {
        return Err(CalibrateError::InvalidInput(
            "degenerate distributions: E[T] + E[C] must be positive".into(),
        ));
    }

    let samples = draw_service_pairs(dist_t, dist_c, mc_samples, seed);
    // F(beta) = G(beta) - beta with G the sample ratio E[(Y+h)^2]/(2 E[Y+h]);
    // F is positive near 0 and eventually negative (G grows like beta/2).
    let objective = |beta: f64| -> f64 {
        let (mut m1, mut m2) = (0.0, 0.0);
        for &(t, c) in &samples {
            let v = t + c + c.max(beta - t);
            m1 += v;
            m2 += v * v;
        }
        m2 / (2.0 * m1) - beta
    };

    let mut lo = 1e-3 * mean_sum;
    let mut hi = 10.0 * mean_sum;
    if objective(lo) <= 0.0 {
        return Err(CalibrateError::NoBracket { hi: lo });
    }
    let mut growth = 0;
    while objective(hi) > 0.0 {
        hi *= 2.0;
        growth += 1;
        if growth > 60 {
            return Err(CalibrateError::NoBracket { hi });
        }
    }

    // Narrow until both the bracket width and the relative fixed-point
    // defect |F(beta)|/beta are within the tolerance; the defect falls
    // like the width, so only a handful of extra halvings are ever needed.
    let mut budget = 256;
    loop {
        let mid = 0.5 * (lo + hi);
        let defect = objective(mid);
        if (hi - lo <= tol && defect.abs() / mid <= tol) || mid <= lo || mid >= hi {
            return Ok(BetaSolution {
                beta: mid,
                // |E[Y+h] - E[(Y+h)^2]/(2 beta)| / E[Y+h] reduces to
                // |G(beta) - beta| / beta.
                residual: defect.abs() / mid,
                mc_samples,
            });
        }
        if budget == 0 {
            return Err(CalibrateError::NotConverged {
                width: hi - lo,
                tol,
            });
        }
        budget -= 1;
        if defect > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Policy families that sweep over a threshold `lambda`.
///
/// `LongWaitByLambda` places the long-wait policy on the same axis via
/// `beta = lambda - E[T] - E[C]`, so all curves share one abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepPolicyKind {
    PAoIThreshold,
    PAoIThresholdPostponed,
    LongWaitByLambda,
}

impl SweepPolicyKind {
    pub fn policy_for(
        self,
        lambda: f64,
        dist_t: &DistributionSpec,
        dist_c: &DistributionSpec,
    ) -> PolicySpec {
        match self {
            Self::PAoIThreshold => PolicySpec::PAoIThreshold { lambda },
            Self::PAoIThresholdPostponed => PolicySpec::PAoIThresholdPostponed { lambda },
            Self::LongWaitByLambda => PolicySpec::LongWait {
                beta: lambda_to_beta(lambda, dist_t, dist_c),
            },
        }
    }
}

impl fmt::Display for SweepPolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::PAoIThreshold => "paoi-t",
            Self::PAoIThresholdPostponed => "paoi-tp",
            Self::LongWaitByLambda => "long-wait",
        };
        f.write_str(name)
    }
}

impl FromStr for SweepPolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paoi-t" => Ok(Self::PAoIThreshold),
            "paoi-tp" => Ok(Self::PAoIThresholdPostponed),
            "long-wait" => Ok(Self::LongWaitByLambda),
            other => Err(format!(
                "unknown sweep policy `{other}` (expected paoi-t, paoi-tp, or long-wait)"
            )),
        }
    }
}

/// Inputs of one threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSettings {
    pub interval: (f64, f64),
    pub step: f64,
    pub n_packets: u64,
    pub seed: u64,
    pub t0: f64,
    pub c0: f64,
    /// Cap on concurrent grid-point simulations (`None`: library default).
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
}

impl SweepSettings {
    pub fn new(interval: (f64, f64), step: f64, n_packets: u64, seed: u64) -> Self {
        Self {
            interval,
            step,
            n_packets,
            seed,
            t0: 1.0,
            c0: 0.0,
            threads: None,
        }
    }

    fn validate(&self) -> Result<(), CalibrateError> {
        let (lo, hi) = self.interval;
        if !(lo >= 0.0 && hi >= lo) {
            return Err(CalibrateError::InvalidInput(format!(
                "interval must satisfy 0 <= lo <= hi, got {lo}:{hi}"
            )));
        }
        if !self.step.is_finite() || self.step <= 0.0 {
            return Err(CalibrateError::InvalidInput(format!(
                "step must be > 0, got {}",
                self.step
            )));
        }
        Ok(())
    }
}

/// One simulated threshold curve and its argmin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub grid: Vec<f64>,
    pub avg_aoi: Vec<f64>,
    pub best_lambda: f64,
    pub best_aoi: f64,
    pub seed: u64,
    pub n_packets: u64,
}

#[derive(Serialize)]
struct SweepSummary {
    best_lambda: f64,
    best_aoi: f64,
    seed: u64,
    n_packets: u64,
}

impl SweepResult {
    /// `{best_lambda, best_aoi, seed, n_packets}` JSON summary.
    pub fn summary_json(&self) -> String {
        let s = SweepSummary {
            best_lambda: self.best_lambda,
            best_aoi: self.best_aoi,
            seed: self.seed,
            n_packets: self.n_packets,
        };
        serde_json::to_string_pretty(&s).expect("summary serialize")
    }
}

/// Threshold grid over `[lo, hi]` with the given step; both endpoints are
/// included (the last step is shortened onto `hi` when needed, and
/// `lo == hi` gives the single-point grid).
pub fn lambda_grid(interval: (f64, f64), step: f64) -> Vec<f64> {
    let (lo, hi) = interval;
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=count).map(|k| lo + k as f64 * step).collect();
    let last = *grid.last().expect("nonempty grid");
    if grid.len() > 1 && ((last - hi).abs() <= 0.5 * step || last > hi) {
        *grid.last_mut().expect("nonempty grid") = hi;
    } else if last < hi {
        grid.push(hi);
    }
    grid
}

fn run_grid<F>(grid: &[f64], threads: Option<usize>, eval: F) -> Result<Vec<f64>, CalibrateError>
where
    F: Fn(f64) -> Result<f64, EngineError> + Sync,
{
    use rayon::prelude::*;
    let run = || -> Result<Vec<f64>, EngineError> {
        grid.par_iter().map(|&lambda| eval(lambda)).collect()
    };
    let out = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CalibrateError::InvalidInput(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }?;
    Ok(out)
}

/// Simulates the policy family at every grid threshold with the same seed
/// (common random numbers) and returns the curve plus its argmin (first
/// minimum on ties).
pub fn sweep_lambda(
    kind: SweepPolicyKind,
    dist_t: &DistributionSpec,
    dist_c: &DistributionSpec,
    settings: &SweepSettings,
) -> Result<SweepResult, CalibrateError> {
    settings.validate()?;
    let grid = lambda_grid(settings.interval, settings.step);
    let avg_aoi = run_grid(&grid, settings.threads, |lambda| {
        let config = ScenarioConfig {
            dist_t: *dist_t,
            dist_c: *dist_c,
            policy: kind.policy_for(lambda, dist_t, dist_c),
            n_packets: settings.n_packets,
            seed: settings.seed,
            t0: settings.t0,
            c0: settings.c0,
        };
        simulate(&config).map(|r| r.avg_aoi_trapezoid)
    })?;

    let (best_idx, best_aoi) =
        avg_aoi
            .iter()
            .copied()
            .enumerate()
            .fold((0usize, f64::INFINITY), |best, (i, v)| {
                if v < best.1 {
                    (i, v)
                } else {
                    best
                }
            });
    Ok(SweepResult {
        best_lambda: grid[best_idx],
        best_aoi,
        grid,
        avg_aoi,
        seed: settings.seed,
        n_packets: settings.n_packets,
    })
}

/// How a policy is calibrated inside [`ratio_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioPolicy {
    /// Grid search over the threshold axis.
    Sweep(SweepPolicyKind),
    /// Long-wait calibrated through the fixed point instead of the grid.
    LongWaitBeta,
}

impl fmt::Display for RatioPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RatioPolicy::Sweep(kind) => kind.fmt(f),
            RatioPolicy::LongWaitBeta => write!(f, "long-wait-beta"),
        }
    }
}

impl FromStr for RatioPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "long-wait-beta" {
            return Ok(RatioPolicy::LongWaitBeta);
        }
        s.parse::<SweepPolicyKind>().map(RatioPolicy::Sweep)
    }
}

/// Inputs of a ratio study; thresholds default to the `[1, 4]`-at-unit-scale
/// search window scaled by `total`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSweepSettings {
    /// `E[T] + E[C]`.
    pub total: f64,
    pub interval: Option<(f64, f64)>,
    pub step: Option<f64>,
    pub n_packets: u64,
    pub seed: u64,
    pub t0: Option<f64>,
    pub c0: f64,
    pub threads: Option<usize>,
    /// Fixed-point sample size for `long-wait-beta` rows.
    pub beta_mc_samples: u64,
    pub beta_tol: f64,
}

impl RatioSweepSettings {
    pub fn new(n_packets: u64, seed: u64) -> Self {
        Self {
            total: 1.0,
            interval: None,
            step: None,
            n_packets,
            seed,
            t0: None,
            c0: 0.0,
            threads: None,
            beta_mc_samples: 1_000_000,
            beta_tol: 1e-9,
        }
    }
}

/// One calibrated operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    /// `E[T] / E[C]`.
    pub ratio: f64,
    pub policy: String,
    pub best_param: f64,
    pub best_aoi: f64,
}

/// Calibrates each policy at each transmission/processing mean ratio
/// (exponential laws, means pinned by `ratio` and `total`) and records the
/// optimal average age.
pub fn ratio_sweep(
    policies: &[RatioPolicy],
    ratios: &[f64],
    settings: &RatioSweepSettings,
) -> Result<Vec<RatioRow>, CalibrateError> {
    if !settings.total.is_finite() || settings.total <= 0.0 {
        return Err(CalibrateError::InvalidInput(format!(
            "total mean must be > 0, got {}",
            settings.total
        )));
    }
    if ratios.iter().any(|&r| !r.is_finite() || r <= 0.0) {
        return Err(CalibrateError::InvalidInput(
            "every ratio must be > 0".into(),
        ));
    }
    let mut rows = Vec::with_capacity(policies.len() * ratios.len());
    for &ratio in ratios {
        let mean_t = settings.total * ratio / (1.0 + ratio);
        let mean_c = settings.total / (1.0 + ratio);
        let dist_t = DistributionSpec::exponential(mean_t)
            .map_err(|e| CalibrateError::InvalidInput(e.to_string()))?;
        let dist_c = DistributionSpec::exponential(mean_c)
            .map_err(|e| CalibrateError::InvalidInput(e.to_string()))?;
        let sweep_settings = SweepSettings {
            interval: settings
                .interval
                .unwrap_or((settings.total, 4.0 * settings.total)),
            step: settings.step.unwrap_or(0.025 * settings.total),
            n_packets: settings.n_packets,
            seed: settings.seed,
            t0: settings.t0.unwrap_or(settings.total),
            c0: settings.c0,
            threads: settings.threads,
        };
        for &policy in policies {
            let row = match policy {
                RatioPolicy::Sweep(kind) => {
                    let sweep = sweep_lambda(kind, &dist_t, &dist_c, &sweep_settings)?;
                    RatioRow {
                        ratio,
                        policy: policy.to_string(),
                        best_param: sweep.best_lambda,
                        best_aoi: sweep.best_aoi,
                    }
                }
                RatioPolicy::LongWaitBeta => {
                    let solution = solve_beta(
                        &dist_t,
                        &dist_c,
                        settings.beta_mc_samples,
                        settings.beta_tol,
                        settings.seed,
                    )?;
                    let config = ScenarioConfig {
                        dist_t,
                        dist_c,
                        policy: PolicySpec::LongWait {
                            beta: solution.beta,
                        },
                        n_packets: settings.n_packets,
                        seed: settings.seed,
                        t0: sweep_settings.t0,
                        c0: sweep_settings.c0,
                    };
                    RatioRow {
                        ratio,
                        policy: policy.to_string(),
                        best_param: solution.beta,
                        best_aoi: simulate(&config)?.avg_aoi_trapezoid,
                    }
                }
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `lambda,avg_aoi` CSV (RFC-4180, CRLF, 17 significant digits).
pub fn write_sweep_csv(result: &SweepResult, out: &mut dyn Write) -> io::Result<()> {
    out.write_all(b"lambda,avg_aoi\r\n")?;
    for (lambda, aoi) in result.grid.iter().zip(&result.avg_aoi) {
        write!(out, "{},{}\r\n", fmt_num(*lambda), fmt_num(*aoi))?;
    }
    Ok(())
}

/// `ratio,policy,best_param,best_aoi` CSV.
pub fn write_ratio_csv(rows: &[RatioRow], out: &mut dyn Write) -> io::Result<()> {
    out.write_all(b"ratio,policy,best_param,best_aoi\r\n")?;
    for row in rows {
        write!(
            out,
            "{},{},{},{}\r\n",
            fmt_num(row.ratio),
            row.policy,
            fmt_num(row.best_param),
            fmt_num(row.best_aoi),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::simulate_traced;

    fn exp(m: f64) -> DistributionSpec {
        DistributionSpec::exponential(m).unwrap()
    }

    fn det(v: f64) -> DistributionSpec {
        DistributionSpec::deterministic(v).unwrap()
    }

    #[test]
    fn beta_fixed_point_deterministic_cases() {
        // Closed form on the beta <= T+C branch: beta = (T + 2C)/2.
        let sol = solve_beta(&det(2.0), &det(1.0), 10_000, 1e-9, 0).unwrap();
        assert!((sol.beta - 2.0).abs() < 1e-6, "beta = {}", sol.beta);
        assert!(sol.residual <= 1e-9, "residual = {}", sol.residual);

        let sol = solve_beta(&det(0.0), &det(1.0), 10_000, 1e-9, 0).unwrap();
        assert!((sol.beta - 1.0).abs() < 1e-6, "beta = {}", sol.beta);
        assert!(sol.residual <= 1e-9, "residual = {}", sol.residual);
    }

    #[test]
    fn beta_fixed_point_exponential_case() {
        // Frozen oracle: adaptive 2-D quadrature of the fixed-point
        // condition for T ~ exp(0.8), C ~ exp(0.2) gives beta = 0.90227.
        let sol = solve_beta(&exp(0.8), &exp(0.2), 200_000, 1e-9, 1).unwrap();
        assert!((sol.beta - 0.90227).abs() < 0.05, "beta = {}", sol.beta);
        assert!(sol.residual <= 1e-9, "residual = {}", sol.residual);
    }

    #[test]
    fn beta_resubstitution_on_fresh_sample() {
        let tol = 1e-9;
        let sol = solve_beta(&exp(0.8), &exp(0.2), 200_000, tol, 1).unwrap();
        let fresh = draw_service_pairs(&exp(0.8), &exp(0.2), 200_000, 0xfeed_beef);
        // Per-sample defect contributions give the standard error directly.
        let z: Vec<f64> = fresh
            .iter()
            .map(|&(t, c)| {
                let v = t + c + c.max(sol.beta - t);
                v - v * v / (2.0 * sol.beta)
            })
            .collect();
        let n = z.len() as f64;
        let mean_z = z.iter().sum::<f64>() / n;
        let sd_z = (z.iter().map(|x| (x - mean_z).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let m1 = fresh
            .iter()
            .map(|&(t, c)| t + c + c.max(sol.beta - t))
            .sum::<f64>()
            / n;
        let defect = mean_z.abs() / m1;
        let bound = 5.0 * tol + 3.0 * sd_z / n.sqrt() / m1;
        assert!(defect <= bound, "defect {defect} > bound {bound}");
    }

    #[test]
    fn beta_input_validation() {
        assert!(matches!(
            solve_beta(&det(2.0), &det(1.0), 100, 1e-9, 0),
            Err(CalibrateError::InvalidInput(_))
        ));
        assert!(matches!(
            solve_beta(&det(0.0), &det(0.0), 10_000, 1e-9, 0),
            Err(CalibrateError::InvalidInput(_))
        ));
    }

    #[test]
    fn grid_includes_both_endpoints() {
        let grid = lambda_grid((1.0, 4.0), 0.025);
        assert_eq!(grid.len(), 121);
        assert_eq!(grid[0], 1.0);
        assert_eq!(*grid.last().unwrap(), 4.0);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));

        let single = lambda_grid((2.0, 2.0 + 1e-12), 0.5);
        assert_eq!(single.len(), 2);
    }

    #[test]
    fn single_point_sweep() {
        let settings = SweepSettings::new((2.0, 2.0), 1.0, 200, 3);
        let res = sweep_lambda(
            SweepPolicyKind::PAoIThreshold,
            &exp(0.8),
            &exp(0.2),
            &settings,
        )
        .unwrap();
        assert_eq!(res.grid, vec![2.0]);
        assert_eq!(res.best_lambda, 2.0);
    }

    #[test]
    fn common_random_numbers_align_draws_across_lambdas() {
        let mk = |lambda: f64| {
            ScenarioConfig::new(
                exp(0.8),
                exp(0.2),
                PolicySpec::PAoIThreshold { lambda },
                300,
                21,
            )
        };
        let a = simulate_traced(&mk(1.2)).unwrap().trace.unwrap();
        let b = simulate_traced(&mk(3.7)).unwrap().trace.unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.transmission, rb.transmission, "T_{} differs", ra.index);
            assert_eq!(ra.processing, rb.processing, "C_{} differs", ra.index);
        }
    }

    #[test]
    fn postponed_curve_equals_long_wait_curve_when_processing_dominates() {
        let settings = SweepSettings::new((1.0, 3.0), 0.25, 2_000, 17);
        let (dist_t, dist_c) = (exp(0.2), exp(0.8));
        let tp = sweep_lambda(
            SweepPolicyKind::PAoIThresholdPostponed,
            &dist_t,
            &dist_c,
            &settings,
        )
        .unwrap();
        let lw = sweep_lambda(
            SweepPolicyKind::LongWaitByLambda,
            &dist_t,
            &dist_c,
            &settings,
        )
        .unwrap();
        assert_eq!(tp.grid, lw.grid);
        assert_eq!(tp.avg_aoi, lw.avg_aoi, "curves must match point for point");
        assert_eq!(tp.best_lambda, lw.best_lambda);
    }

    #[test]
    fn large_threshold_tail_is_affine_at_balanced_means() {
        // Boards the planned-send regime: for lambda well above the mean
        // total, the age grows as lambda/2 plus half the mean total.
        let (dist_t, dist_c) = (exp(0.5), exp(0.5));
        let settings = SweepSettings::new((3.0, 10.0), 0.5, 50_000, 4);
        let sweep =
            sweep_lambda(SweepPolicyKind::PAoIThreshold, &dist_t, &dist_c, &settings).unwrap();
        let n = sweep.grid.len() as f64;
        let mean_x = sweep.grid.iter().sum::<f64>() / n;
        let mean_y = sweep.avg_aoi.iter().sum::<f64>() / n;
        let sxx: f64 = sweep.grid.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
        let sxy: f64 = sweep
            .grid
            .iter()
            .zip(&sweep.avg_aoi)
            .map(|(x, y)| (x - mean_x) * (y - mean_y))
            .sum();
        let slope = sxy / sxx;
        let intercept = mean_y - slope * mean_x;
        assert!((slope - 0.5).abs() <= 0.02, "slope {slope}");
        assert!((intercept - 0.5).abs() <= 0.05, "intercept {intercept}");
    }

    #[test]
    fn thresholds_below_the_floor_all_reduce_to_zero_wait() {
        let (dist_t, dist_c) = (exp(0.8), exp(0.2));
        let settings = SweepSettings::new((0.2, 1.0), 0.2, 1_000, 13);
        let res =
            sweep_lambda(SweepPolicyKind::PAoIThreshold, &dist_t, &dist_c, &settings).unwrap();
        let zero_wait = simulate(&ScenarioConfig::new(
            dist_t,
            dist_c,
            PolicySpec::ZeroWait,
            1_000,
            13,
        ))
        .unwrap()
        .avg_aoi_trapezoid;
        for (lambda, aoi) in res.grid.iter().zip(&res.avg_aoi) {
            assert_eq!(*aoi, zero_wait, "lambda = {lambda}");
        }
    }

    #[test]
    fn time_rescaling_doubles_the_trace() {
        // Doubling all means, thresholds, and initial durations doubles
        // every event time: the keyed uniforms are identical and every
        // family's inverse CDF is linear in its scale parameters.
        let unit = ScenarioConfig {
            dist_t: exp(0.8),
            dist_c: exp(0.2),
            policy: PolicySpec::PAoIThreshold { lambda: 2.4 },
            n_packets: 500,
            seed: 8,
            t0: 1.0,
            c0: 0.0,
        };
        let doubled = ScenarioConfig {
            dist_t: exp(1.6),
            dist_c: exp(0.4),
            policy: PolicySpec::PAoIThreshold { lambda: 4.8 },
            n_packets: 500,
            seed: 8,
            t0: 2.0,
            c0: 0.0,
        };
        let a = simulate_traced(&unit).unwrap().trace.unwrap();
        let b = simulate_traced(&doubled).unwrap().trace.unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            for (x, y) in [
                (ra.generation, rb.generation),
                (ra.transmission, rb.transmission),
                (ra.proc_start, rb.proc_start),
                (ra.delivery, rb.delivery),
            ] {
                assert!(
                    (2.0 * x - y).abs() <= 1e-6 * y.abs().max(1.0),
                    "packet {}: {x} does not rescale to {y}",
                    ra.index
                );
            }
        }
    }

    #[test]
    fn ratio_rows_cover_policy_grid() {
        let mut settings = RatioSweepSettings::new(400, 5);
        settings.step = Some(0.5);
        settings.beta_mc_samples = 10_000;
        let rows = ratio_sweep(
            &[
                RatioPolicy::Sweep(SweepPolicyKind::PAoIThresholdPostponed),
                RatioPolicy::LongWaitBeta,
            ],
            &[0.25, 4.0],
            &settings,
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows
            .iter()
            .any(|r| r.policy == "paoi-tp" && r.ratio == 0.25));
        assert!(rows
            .iter()
            .any(|r| r.policy == "long-wait-beta" && r.ratio == 4.0));
        for row in &rows {
            assert!(row.best_aoi.is_finite() && row.best_aoi > 0.0);
        }
    }

    #[test]
    fn ratio_boundary_continuity_at_equal_means() {
        // At E[T] = E[C] the postponed gate is everywhere open and the
        // policies' optima should differ only by simulation noise.
        let mut settings = RatioSweepSettings::new(30_000, 9);
        settings.step = Some(0.1);
        let rows = ratio_sweep(
            &[
                RatioPolicy::Sweep(SweepPolicyKind::PAoIThresholdPostponed),
                RatioPolicy::Sweep(SweepPolicyKind::LongWaitByLambda),
            ],
            &[1.0],
            &settings,
        )
        .unwrap();
        let tp = rows
            .iter()
            .find(|r| r.policy == "paoi-tp")
            .unwrap()
            .best_aoi;
        let lw = rows
            .iter()
            .find(|r| r.policy == "long-wait")
            .unwrap()
            .best_aoi;
        assert!((tp - lw).abs() < 0.1, "paoi-tp {tp} vs long-wait {lw}");
    }

    #[test]
    fn csv_layouts() {
        let settings = SweepSettings::new((1.0, 2.0), 0.5, 100, 1);
        let res = sweep_lambda(
            SweepPolicyKind::LongWaitByLambda,
            &exp(0.8),
            &exp(0.2),
            &settings,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&res, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lambda,avg_aoi\r\n"));
        assert_eq!(text.matches("\r\n").count(), 1 + res.grid.len());

        let rows = vec![RatioRow {
            ratio: 4.0,
            policy: "paoi-tp".into(),
            best_param: 2.4,
            best_aoi: 2.1,
        }];
        let mut buf = Vec::new();
        write_ratio_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("ratio,policy,best_param,best_aoi\r\n"));
    }
}
