//! Event-driven simulation of one scheduling policy over `n` packets.
//!
//! The system is a single flow through two services in series: a delay
//! channel (transmission time `T_k`) followed by an edge server with an
//! unbounded FCFS buffer (processing time `C_k`). Packet `k` generated at
//! `t_k` arrives at the server at `a_k = t_k + T_k`, starts processing at
//! `c_k = max(a_k, c_{k-1} + C_{k-1})`, and is delivered at
//! `d_k = c_k + C_k`.
//!
//! The policy is consulted at exactly two feedback epochs per packet:
//! when the previous packet starts processing (`c_{k-1}`, inferable from
//! arrival/delivery feedback) and — if the resulting plan has not fired by
//! then — when it is delivered (`d_{k-1}`). The plan from the first epoch
//! fires if its send time is at most `d_{k-1}`; otherwise delivery
//! preempts it and the delivery-epoch plan replaces it.
//!
//! `T_k` is sampled when packet `k` is generated and `C_k` when it starts
//! processing, each from a stream keyed by `(seed, k, kind)`, so a policy
//! can never observe a value before the system realizes it and identical
//! seeds give identical draws across policies and parameter settings.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::distributions::{DistributionSpec, DrawKind, DrawStream};
use crate::policies::{PlanDecision, Policy, PolicySpec};

/// Simulation errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// A policy produced a send time earlier than the previous packet's
    /// arrival at the server, or one that does not advance the generation
    /// sequence. Signals a policy implementation bug.
    #[error(
        "non-positive wait for packet {index}: send time {send_time} (requires >= {min_send} \
         and > previous generation {prev_generation})"
    )]
    NonPositiveWait {
        index: u64,
        send_time: f64,
        min_send: f64,
        prev_generation: f64,
    },
}

/// Complete, deterministic input of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ScenarioConfig {
    pub dist_t: DistributionSpec,
    pub dist_c: DistributionSpec,
    pub policy: PolicySpec,
    pub n_packets: u64,
    pub seed: u64,
    /// Initial transmission duration `T_0`.
    pub t0: f64,
    /// Initial processing duration `C_0`.
    pub c0: f64,
}

impl ScenarioConfig {
    /// Config with the standard initial condition `T_0 = 1`, `C_0 = 0`.
    pub fn new(
        dist_t: DistributionSpec,
        dist_c: DistributionSpec,
        policy: PolicySpec,
        n_packets: u64,
        seed: u64,
    ) -> Self {
        Self {
            dist_t,
            dist_c,
            policy,
            n_packets,
            seed,
            t0: 1.0,
            c0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.n_packets < 1 {
            return Err(EngineError::InvalidScenario("n must be >= 1".into()));
        }
        if self.dist_t.mean() <= 0.0 {
            return Err(EngineError::InvalidScenario(format!(
                "transmission distribution must have positive mean, got {}",
                self.dist_t
            )));
        }
        if self.dist_c.mean() <= 0.0 {
            return Err(EngineError::InvalidScenario(format!(
                "processing distribution must have positive mean, got {}",
                self.dist_c
            )));
        }
        if !(self.t0.is_finite() && self.t0 >= 0.0) {
            return Err(EngineError::InvalidScenario(format!(
                "T_0 must be >= 0, got {}",
                self.t0
            )));
        }
        if !(self.c0.is_finite() && self.c0 >= 0.0) {
            return Err(EngineError::InvalidScenario(format!(
                "C_0 must be >= 0, got {}",
                self.c0
            )));
        }
        self.policy.validate().map_err(EngineError::InvalidScenario)
    }
}

/// Fully realized timeline of one packet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PacketRecord {
    pub index: u64,
    /// Generation time `t_k`.
    pub generation: f64,
    /// Transmission duration `T_k`.
    pub transmission: f64,
    /// Server arrival `a_k = t_k + T_k`.
    pub arrival: f64,
    /// Processing start `c_k`.
    pub proc_start: f64,
    /// Processing duration `C_k`.
    pub processing: f64,
    /// Delivery `d_k = c_k + C_k`.
    pub delivery: f64,
    /// Source wait `W_k = t_k - a_{k-1}`; undefined for packet 0.
    pub source_wait: Option<f64>,
    /// Buffer wait `D_k = c_k - a_k`.
    pub buffer_wait: f64,
    /// Age-curve trapezoid area; undefined for packet 0.
    pub area: Option<f64>,
    /// Peak age `A_k = d_k - t_{k-1}`; undefined for packet 0.
    pub peak_age: Option<f64>,
}

/// What the source can know at a decision epoch, from feedback alone.
///
/// Every optional field is populated exactly when its availability time is
/// at or before `now`: `T_{k-1}` once the arrival feedback came back,
/// `c_{k-1}` once it is inferable (arrival into an idle server, or the
/// previous delivery), and `C_{k-1}`/`d_{k-1}` once the delivery feedback
/// came back.
#[derive(Debug, Clone)]
pub struct SourceView<'a> {
    pub now: f64,
    /// `t_{k-1}` — chosen by the source itself, always known.
    pub last_generation: f64,
    /// `T_{k-1}`, known iff `now >= a_{k-1}`.
    pub last_transmission: Option<f64>,
    /// `c_{k-1}`, known iff `now >= c_{k-1}`.
    pub proc_start: Option<f64>,
    /// `C_{k-1}`, known iff `now >= d_{k-1}`.
    pub last_processing: Option<f64>,
    /// `d_{k-1}`, known iff `now >= d_{k-1}`.
    pub delivery: Option<f64>,
    pub channel_busy: bool,
    pub server_busy: bool,
    pub buffer_count: u32,
    pub dist_t: &'a DistributionSpec,
    pub dist_c: &'a DistributionSpec,
}

/// A scheduling rule consulted at the two feedback epochs.
///
/// Implementations should return plans at or after `view.now`. At the
/// delivery epoch a `SendAt` is expected; deferral variants are read as
/// "send at that time" (`DeferUntilTime`) or "send now" (`DeferUntilDelivery`,
/// the deferral target having just been reached).
pub trait Decider {
    fn at_processing_start(&mut self, view: &SourceView<'_>) -> PlanDecision;
    fn at_delivery(&mut self, view: &SourceView<'_>) -> PlanDecision;
}

/// Aggregate metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    /// Packets delivered (indices `1..=n`).
    pub n: u64,
    /// Ratio of trapezoid areas to generation intervals.
    pub avg_aoi_trapezoid: f64,
    /// Time average of the age curve over `[d_0, d_n]`.
    pub avg_aoi_integral: f64,
    /// Mean peak age.
    pub avg_paoi: f64,
    /// Mean buffer wait `D_k`.
    pub mean_buffer_wait: f64,
    /// Fraction of packets with `D_k > 0`.
    pub frac_buffered: f64,
    /// Per-packet timeline (packet 0 included), when requested.
    #[serde(skip_serializing)]
    pub trace: Option<Vec<PacketRecord>>,
}

impl SimulationResult {
    /// Flat JSON object with the metric fields.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// Processing-start recursion: packets are served immediately on arrival
/// once the predecessor has left the server.
pub fn processing_start(t_k: f64, tx_k: f64, c_prev: f64, proc_prev: f64) -> f64 {
    (t_k + tx_k).max(c_prev + proc_prev)
}

/// Area contributed to the age curve by packet `k`:
/// `1/2 (d_k - t_{k-1})^2 - 1/2 (d_k - t_k)^2`.
pub fn trapezoid_area(t_prev: f64, t_k: f64, d_k: f64) -> f64 {
    0.5 * (d_k - t_prev) * (d_k - t_prev) - 0.5 * (d_k - t_k) * (d_k - t_k)
}

#[derive(Debug, Clone, Copy)]
struct PacketTimes {
    generation: f64,
    transmission: f64,
    arrival: f64,
    proc_start: f64,
    processing: f64,
    delivery: f64,
}

/// Streaming metric accumulation shared by `simulate` and `average_aoi`,
/// fed one delivered packet at a time.
#[derive(Debug, Default)]
struct Metrics {
    n: u64,
    sum_area: f64,
    sum_intervals: f64,
    sum_peak: f64,
    sum_buffer_wait: f64,
    buffered: u64,
    /// Direct integral of the piecewise-linear age curve over `[d_0, d_n]`,
    /// accumulated segment by segment (independent of the trapezoid route).
    age_integral: f64,
    first_delivery: Option<f64>,
    last_delivery: f64,
}

impl Metrics {
    fn push(&mut self, prev: &PacketTimes, cur: &PacketTimes, source_wait: f64, area: f64) {
        self.n += 1;
        self.sum_area += area;
        self.sum_intervals += prev.transmission + source_wait;
        self.sum_peak += cur.delivery - prev.generation;
        let buffer_wait = cur.proc_start - cur.arrival;
        self.sum_buffer_wait += buffer_wait;
        if buffer_wait > 0.0 {
            self.buffered += 1;
        }
        // Age over [d_{k-1}, d_k) is t - t_{k-1}.
        let lo = prev.delivery - prev.generation;
        let hi = cur.delivery - prev.generation;
        self.age_integral += 0.5 * (hi * hi - lo * lo);
        self.first_delivery.get_or_insert(prev.delivery);
        self.last_delivery = cur.delivery;
    }

    fn finish(&self, trace: Option<Vec<PacketRecord>>) -> SimulationResult {
        let n = self.n as f64;
        let span = self.last_delivery - self.first_delivery.unwrap_or(0.0);
        SimulationResult {
            n: self.n,
            avg_aoi_trapezoid: self.sum_area / self.sum_intervals,
            avg_aoi_integral: self.age_integral / span,
            avg_paoi: self.sum_peak / n,
            mean_buffer_wait: self.sum_buffer_wait / n,
            frac_buffered: self.buffered as f64 / n,
            trace,
        }
    }
}

fn source_view<'a>(config: &'a ScenarioConfig, prev: &PacketTimes, now: f64) -> SourceView<'a> {
    let view = SourceView {
        now,
        last_generation: prev.generation,
        last_transmission: (now >= prev.arrival).then_some(prev.transmission),
        proc_start: (now >= prev.proc_start).then_some(prev.proc_start),
        last_processing: (now >= prev.delivery).then_some(prev.processing),
        delivery: (now >= prev.delivery).then_some(prev.delivery),
        channel_busy: now < prev.arrival,
        server_busy: now >= prev.proc_start && now < prev.delivery,
        buffer_count: u32::from(now >= prev.arrival && now < prev.proc_start),
        dist_t: &config.dist_t,
        dist_c: &config.dist_c,
    };
    // Causality: nothing with a later availability time may be exposed.
    debug_assert!(view.last_transmission.is_none() || now >= prev.arrival);
    debug_assert!(view.last_processing.is_none() || now >= prev.delivery);
    debug_assert!(view.delivery.is_some() == view.last_processing.is_some());
    view
}

/// Runs the policy named by the config.
pub fn simulate(config: &ScenarioConfig) -> Result<SimulationResult, EngineError> {
    config.validate()?;
    let mut policy = Policy::new(config.policy, &config.dist_t, &config.dist_c);
    simulate_with(config, &mut policy, false)
}

/// As [`simulate`], retaining the full per-packet trace.
pub fn simulate_traced(config: &ScenarioConfig) -> Result<SimulationResult, EngineError> {
    config.validate()?;
    let mut policy = Policy::new(config.policy, &config.dist_t, &config.dist_c);
    simulate_with(config, &mut policy, true)
}

/// Core loop against an arbitrary decider. `config.policy` is ignored here;
/// it is the caller's decider that is consulted.
pub fn simulate_with(
    config: &ScenarioConfig,
    decider: &mut dyn Decider,
    record_trace: bool,
) -> Result<SimulationResult, EngineError> {
    config.validate()?;
    // Packet 0 enters an idle system and is delivered at time 0.
    let mut prev = PacketTimes {
        generation: -config.t0 - config.c0,
        transmission: config.t0,
        arrival: -config.c0,
        proc_start: -config.c0,
        processing: config.c0,
        delivery: 0.0,
    };
    let mut trace = record_trace.then(|| {
        let mut v = Vec::with_capacity(config.n_packets as usize + 1);
        v.push(PacketRecord {
            index: 0,
            generation: prev.generation,
            transmission: prev.transmission,
            arrival: prev.arrival,
            proc_start: prev.proc_start,
            processing: prev.processing,
            delivery: prev.delivery,
            source_wait: None,
            buffer_wait: prev.proc_start - prev.arrival,
            area: None,
            peak_age: None,
        });
        v
    });
    let mut metrics = Metrics::default();

    for k in 1..=config.n_packets {
        // Epoch (i): packet k-1 starts processing.
        let plan = decider.at_processing_start(&source_view(config, &prev, prev.proc_start));
        let (send_time, epoch) = match plan {
            PlanDecision::SendAt(t) | PlanDecision::DeferUntilTime(t) => {
                if t <= prev.delivery {
                    (t, prev.proc_start)
                } else {
                    // Delivery preempts the pending plan; epoch (ii).
                    (resolve_delivery_plan(decider, config, &prev), prev.delivery)
                }
            }
            PlanDecision::DeferUntilDelivery => {
                (resolve_delivery_plan(decider, config, &prev), prev.delivery)
            }
        };

        // A legal plan never precedes its decision epoch (which is itself
        // at or after the previous arrival, so the source wait is >= 0)
        // and must advance the generation sequence.
        if send_time < epoch || send_time <= prev.generation {
            return Err(EngineError::NonPositiveWait {
                index: k,
                send_time,
                min_send: epoch,
                prev_generation: prev.generation,
            });
        }
        let source_wait = send_time - prev.arrival;

        let transmission = config.dist_t.sample(&mut DrawStream::keyed(
            config.seed,
            k,
            DrawKind::Transmission,
        ));
        let arrival = send_time + transmission;
        let proc_start =
            processing_start(send_time, transmission, prev.proc_start, prev.processing);
        let processing =
            config
                .dist_c
                .sample(&mut DrawStream::keyed(config.seed, k, DrawKind::Processing));
        let delivery = proc_start + processing;
        let cur = PacketTimes {
            generation: send_time,
            transmission,
            arrival,
            proc_start,
            processing,
            delivery,
        };

        let area = trapezoid_area(prev.generation, cur.generation, cur.delivery);
        metrics.push(&prev, &cur, source_wait, area);
        if let Some(trace) = trace.as_mut() {
            trace.push(PacketRecord {
                index: k,
                generation: cur.generation,
                transmission: cur.transmission,
                arrival: cur.arrival,
                proc_start: cur.proc_start,
                processing: cur.processing,
                delivery: cur.delivery,
                source_wait: Some(source_wait),
                buffer_wait: cur.proc_start - cur.arrival,
                area: Some(area),
                peak_age: Some(cur.delivery - prev.generation),
            });
        }
        prev = cur;
    }

    Ok(metrics.finish(trace))
}

fn resolve_delivery_plan(
    decider: &mut dyn Decider,
    config: &ScenarioConfig,
    prev: &PacketTimes,
) -> f64 {
    let view = source_view(config, prev, prev.delivery);
    match decider.at_delivery(&view) {
        PlanDecision::SendAt(t) | PlanDecision::DeferUntilTime(t) => t,
        PlanDecision::DeferUntilDelivery => prev.delivery,
    }
}

/// Recomputes `(avg_trapezoid, avg_integral)` from a recorded trace.
///
/// The trapezoid form is the area/interval ratio; the integral form is the
/// time average of the piecewise-linear age curve over `[d_0, d_n]`.
pub fn average_aoi(trace: &[PacketRecord]) -> (f64, f64) {
    assert!(
        trace.len() >= 2,
        "need packet 0 plus at least one delivered packet"
    );
    let times = |r: &PacketRecord| PacketTimes {
        generation: r.generation,
        transmission: r.transmission,
        arrival: r.arrival,
        proc_start: r.proc_start,
        processing: r.processing,
        delivery: r.delivery,
    };
    let mut metrics = Metrics::default();
    for pair in trace.windows(2) {
        let prev = times(&pair[0]);
        let cur = times(&pair[1]);
        let wait = pair[1].source_wait.unwrap_or(cur.generation - prev.arrival);
        let area = pair[1]
            .area
            .unwrap_or_else(|| trapezoid_area(prev.generation, cur.generation, cur.delivery));
        metrics.push(&prev, &cur, wait, area);
    }
    let result = metrics.finish(None);
    (result.avg_aoi_trapezoid, result.avg_aoi_integral)
}

fn fmt_time(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the per-packet trace as RFC-4180 CSV (`k,t,T,a,c,C,d,W,D,Q,A`,
/// CRLF line endings, 17 significant digits). Fields undefined for packet 0
/// are left empty.
pub fn write_trace_csv(trace: &[PacketRecord], out: &mut dyn Write) -> io::Result<()> {
    out.write_all(b"k,t,T,a,c,C,d,W,D,Q,A\r\n")?;
    let opt = |v: Option<f64>| v.map(fmt_time).unwrap_or_default();
    for r in trace {
        write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}\r\n",
            r.index,
            fmt_time(r.generation),
            fmt_time(r.transmission),
            fmt_time(r.arrival),
            fmt_time(r.proc_start),
            fmt_time(r.processing),
            fmt_time(r.delivery),
            opt(r.source_wait),
            fmt_time(r.buffer_wait),
            opt(r.area),
            opt(r.peak_age),
        )?;
    }
    Ok(())
}
