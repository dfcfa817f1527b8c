//! Discrete-event simulation and threshold calibration for a two-hop
//! status-update system: a source feeds packets through a delay channel to
//! an edge server whose results go to a destination, and the source picks
//! generation times to keep the destination's age of information low.
//!
//! The crate is organized around four modules:
//!
//! * [`distributions`] — transmission/processing time laws with exact
//!   means, tail conditional means, and counter-keyed sampling streams.
//! * [`engine`] — the packet timeline recursion, the source's
//!   feedback-limited view, and the age metrics.
//! * [`policies`] — the generation rules: zero-wait, long-wait(β),
//!   peak-age threshold(λ), and its postponed-plan refinement.
//! * [`calibrate`] — the long-wait fixed point for β and simulated
//!   threshold sweeps with common random numbers.

pub mod calibrate;
pub mod distributions;
pub mod engine;
pub mod policies;

pub use calibrate::{
    ratio_sweep, solve_beta, sweep_lambda, BetaSolution, CalibrateError, RatioPolicy, RatioRow,
    RatioSweepSettings, SweepPolicyKind, SweepResult, SweepSettings,
};
pub use distributions::{DistError, DistributionSpec, DrawKind, DrawStream};
pub use engine::{
    average_aoi, processing_start, simulate, simulate_traced, simulate_with, trapezoid_area,
    write_trace_csv, Decider, EngineError, PacketRecord, ScenarioConfig, SimulationResult,
    SourceView,
};
pub use policies::{PlanDecision, Policy, PolicySpec};
