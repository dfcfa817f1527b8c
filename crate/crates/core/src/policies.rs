//! Generation-time rules consulted at the feedback epochs.
//!
//! Four rules are implemented:
//!
//! * **zero-wait** — send the moment the previous packet starts processing.
//! * **long-wait(β)** — send only after the previous delivery, no earlier
//!   than `t_{k-1} + β`.
//! * **paoi-t(λ)** — estimate the peak age a candidate send time would
//!   produce and send at the earliest time whose estimate reaches `λ`.
//! * **paoi-tp(λ)** — same, but a send planned while the server is busy is
//!   held back until the expected remaining processing of the in-service
//!   packet no longer exceeds the expected transmission time of the new one
//!   (the Ω gate), so the new packet is unlikely to sit in the buffer.
//!
//! Peak-age estimates come in two regimes. Before the previous delivery
//! (`g`), the unknown residual processing enters through the tail
//! conditional mean `E[C | C > elapsed]`; after it (`h`), everything about
//! packet `k-1` is realized and only the means of the new packet's delays
//! remain. Both estimates are non-decreasing in the candidate time, which
//! is what makes the threshold crossing well-defined and findable by
//! bisection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::{DistError, DistributionSpec};
use crate::engine::{Decider, SourceView};

/// Absolute time tolerance for the threshold-crossing and gate bisections.
pub const PLAN_TIME_TOL: f64 = 1e-9;

/// Which rule governs generation times, with its scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicySpec {
    ZeroWait,
    LongWait {
        beta: f64,
    },
    #[serde(rename = "paoi-t")]
    PAoIThreshold {
        lambda: f64,
    },
    #[serde(rename = "paoi-tp")]
    PAoIThresholdPostponed {
        lambda: f64,
    },
}

impl PolicySpec {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            PolicySpec::ZeroWait => Ok(()),
            PolicySpec::LongWait { beta } => {
                if beta.is_finite() {
                    Ok(())
                } else {
                    Err(format!("long-wait beta must be finite, got {beta}"))
                }
            }
            PolicySpec::PAoIThreshold { lambda }
            | PolicySpec::PAoIThresholdPostponed { lambda } => {
                if lambda.is_finite() && lambda >= 0.0 {
                    Ok(())
                } else {
                    Err(format!(
                        "peak-age threshold lambda must be >= 0, got {lambda}"
                    ))
                }
            }
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PolicySpec::ZeroWait => write!(f, "zero-wait"),
            PolicySpec::LongWait { beta } => write!(f, "long-wait:{beta}"),
            PolicySpec::PAoIThreshold { lambda } => write!(f, "paoi-t:{lambda}"),
            PolicySpec::PAoIThresholdPostponed { lambda } => write!(f, "paoi-tp:{lambda}"),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, param) = match s.split_once(':') {
            Some((k, p)) => (k, Some(p)),
            None => (s, None),
        };
        let num = |p: Option<&str>| -> Result<f64, String> {
            let p =
                p.ok_or_else(|| format!("policy `{kind}` needs a parameter, e.g. `{kind}:2.0`"))?;
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad policy parameter `{p}`"))
        };
        let spec = match kind {
            "zero-wait" => {
                if param.is_some() {
                    return Err("zero-wait takes no parameter".into());
                }
                PolicySpec::ZeroWait
            }
            "long-wait" => PolicySpec::LongWait { beta: num(param)? },
            "paoi-t" => PolicySpec::PAoIThreshold {
                lambda: num(param)?,
            },
            "paoi-tp" => PolicySpec::PAoIThresholdPostponed {
                lambda: num(param)?,
            },
            other => {
                return Err(format!(
                    "unknown policy `{other}` (expected zero-wait, long-wait:<beta>, \
                     paoi-t:<lambda>, or paoi-tp:<lambda>)"
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// What a policy wants done with the next packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanDecision {
    /// Generate the packet at this time (unless delivery preempts first).
    SendAt(f64),
    /// No plan until the previous packet is delivered.
    DeferUntilDelivery,
    /// Hold the plan; re-emit the send at this time unless delivery
    /// preempts first.
    DeferUntilTime(f64),
}

/// `β + E[T] + E[C] <-> β` axis conversion used to sweep long-wait on the
/// same threshold axis as the peak-age policies. Kept as the single
/// expression so equivalence checks are bit-exact.
pub fn lambda_to_beta(lambda: f64, dist_t: &DistributionSpec, dist_c: &DistributionSpec) -> f64 {
    lambda - (dist_t.mean() + dist_c.mean())
}

/// Optimal-long-wait send time: no earlier than the previous delivery, and
/// no earlier than `t_{k-1} + β`. Equivalently `t_{k-1} + max(β, T+C)` on
/// the policy's own (buffer-free) traces.
pub fn long_wait_send_time(view: &SourceView<'_>, beta: f64) -> f64 {
    let delivery = view
        .delivery
        .expect("long-wait decides at the delivery epoch");
    delivery.max(view.last_generation + beta)
}

/// Peak-age estimate for a send at `t` after the previous delivery:
/// `t + E[T] + E[C] - t_{k-1}`. Strictly increasing in `t`.
pub fn estimate_peak_age_h(view: &SourceView<'_>, t: f64) -> f64 {
    t + view.dist_t.mean() + view.dist_c.mean() - view.last_generation
}

/// Peak-age estimate for a send at `t` while the previous packet may still
/// be processing: the arrival `t + E[T]` races the expected delivery
/// `c_{k-1} + E[C | C > t - c_{k-1}]`, whichever is later starting the new
/// packet's processing. Non-decreasing in `t`.
pub fn estimate_peak_age_g(view: &SourceView<'_>, t: f64) -> Result<f64, DistError> {
    let c_prev = view
        .proc_start
        .expect("peak-age estimate needs the processing-start time");
    let residual = view.dist_c.tail_conditional_mean(t - c_prev)?;
    let start = (t + view.dist_t.mean()).max(c_prev + residual);
    Ok(start + view.dist_c.mean() - view.last_generation)
}

/// Earliest send time at or after `c_{k-1}` whose `g`-estimate reaches
/// `lambda`, found by bisection on the non-decreasing estimate. Returns
/// `SendAt(c_{k-1})` when the threshold is already met at the epoch, and
/// `DeferUntilDelivery` when the estimate stays below `lambda` on the whole
/// feasible range (possible only for bounded-support processing times).
pub fn plan_at_processing_start(view: &SourceView<'_>, lambda: f64) -> PlanDecision {
    let c_prev = view.proc_start.expect("plan epoch is the processing start");
    let mean_sum = view.dist_t.mean() + view.dist_c.mean();
    let sup = view.dist_c.support_sup();
    // Supremum of the estimate over [c, c+sup): reached in the limit where
    // the transmission branch dominates the exhausted residual.
    let limit = c_prev + sup + mean_sum - view.last_generation;
    let estimate = |t: f64| match estimate_peak_age_g(view, t) {
        Ok(v) => v,
        // Bisection points stay inside [c, c+sup) mathematically, but the
        // query offset t - c can graze the support edge by an ulp when c
        // is large; the estimate's limit is the continuous extension there.
        Err(_) => limit,
    };
    if estimate(c_prev) >= lambda {
        return PlanDecision::SendAt(c_prev);
    }

    let hi = if sup.is_finite() {
        if limit <= lambda {
            return PlanDecision::DeferUntilDelivery;
        }
        c_prev + sup
    } else {
        let hi = c_prev + lambda + 10.0 * mean_sum;
        debug_assert!(estimate(hi) >= lambda);
        hi
    };

    // Invariant: estimate(lo) < lambda <= estimate(hi), hi possibly being
    // the (never-evaluated) support edge.
    let mut lo = c_prev;
    let mut hi = hi;
    while hi - lo > PLAN_TIME_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if estimate(mid) >= lambda {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    PlanDecision::SendAt(hi)
}

/// Earliest send time at or after the delivery whose `h`-estimate reaches
/// `lambda`; closed form since the estimate is affine increasing.
pub fn plan_at_delivery(view: &SourceView<'_>, lambda: f64) -> PlanDecision {
    let delivery = view.delivery.expect("plan epoch is the delivery");
    let floor = view.last_generation + lambda_to_beta(lambda, view.dist_t, view.dist_c);
    PlanDecision::SendAt(delivery.max(floor))
}

/// Whether elapsed processing time `l` is in the deferral-release set Ω:
/// a packet sent now is expected to arrive no earlier than the in-service
/// packet's expected delivery, `l + E[T] >= E[C | C > l]`.
pub fn postponed_gate(mean_t: f64, dist_c: &DistributionSpec, l: f64) -> Result<bool, DistError> {
    Ok(l + mean_t >= dist_c.tail_conditional_mean(l)?)
}

/// Smallest elapsed time in Ω, or `None` when Ω is empty.
///
/// The release margin `ψ(l) = l + E[T] - E[C | C > l]` is monotone
/// non-decreasing for every supported family (constant for exponential,
/// piecewise affine with positive slope for uniform and deterministic), so
/// Ω is empty, everything, or a single upward-closed interval and one
/// bisection finds its edge.
pub fn omega_min_elapsed(mean_t: f64, dist_c: &DistributionSpec) -> Option<f64> {
    let gate = |l: f64| postponed_gate(mean_t, dist_c, l).expect("gate query inside support");
    if gate(0.0) {
        return Some(0.0);
    }
    let sup = dist_c.support_sup();
    if !sup.is_finite() {
        // Exponential: the margin is the constant E[T] - E[C] < 0 here.
        return None;
    }
    // psi(sup-) = E[T] > 0, so the gate opens strictly inside (0, sup).
    let mut lo = 0.0;
    let mut hi = sup;
    while hi - lo > PLAN_TIME_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gate(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Peak-age-threshold plan with the postponed-plan refinement: keep the
/// threshold plan when its elapsed offset already clears the Ω gate,
/// otherwise hold the send until the gate opens (`min Ω`), or until
/// delivery when the gate never opens.
pub fn plan_at_processing_start_postponed(
    view: &SourceView<'_>,
    lambda: f64,
    min_omega: Option<f64>,
) -> PlanDecision {
    let Some(gate_open) = min_omega else {
        return PlanDecision::DeferUntilDelivery;
    };
    let c_prev = view.proc_start.expect("plan epoch is the processing start");
    match plan_at_processing_start(view, lambda) {
        PlanDecision::SendAt(t) => {
            let elapsed = t - c_prev;
            let in_omega = elapsed >= view.dist_c.support_sup()
                || postponed_gate(view.dist_t.mean(), view.dist_c, elapsed)
                    .expect("membership query inside support");
            if in_omega {
                PlanDecision::SendAt(t)
            } else {
                PlanDecision::DeferUntilTime(c_prev + gate_open)
            }
        }
        other => other,
    }
}

/// Baseline: send the instant the previous packet starts processing.
pub fn zero_wait_plan(view: &SourceView<'_>) -> PlanDecision {
    PlanDecision::SendAt(view.proc_start.expect("plan epoch is the processing start"))
}

/// A [`PolicySpec`] bound to a scenario's distributions, ready to drive the
/// engine. Immutable after construction; decisions are pure functions of
/// the view.
#[derive(Debug, Clone, Copy)]
pub struct Policy {
    spec: PolicySpec,
    /// Cached `min Ω` for the postponed kind.
    min_omega: Option<f64>,
}

impl Policy {
    pub fn new(spec: PolicySpec, dist_t: &DistributionSpec, dist_c: &DistributionSpec) -> Self {
        let min_omega = match spec {
            PolicySpec::PAoIThresholdPostponed { .. } => omega_min_elapsed(dist_t.mean(), dist_c),
            _ => None,
        };
        Self { spec, min_omega }
    }

    pub fn spec(&self) -> PolicySpec {
        self.spec
    }
}

impl Decider for Policy {
    fn at_processing_start(&mut self, view: &SourceView<'_>) -> PlanDecision {
        match self.spec {
            PolicySpec::ZeroWait => zero_wait_plan(view),
            PolicySpec::LongWait { .. } => PlanDecision::DeferUntilDelivery,
            PolicySpec::PAoIThreshold { lambda } => plan_at_processing_start(view, lambda),
            PolicySpec::PAoIThresholdPostponed { lambda } => {
                plan_at_processing_start_postponed(view, lambda, self.min_omega)
            }
        }
    }

    fn at_delivery(&mut self, view: &SourceView<'_>) -> PlanDecision {
        match self.spec {
            PolicySpec::ZeroWait => PlanDecision::SendAt(view.delivery.expect("delivery epoch")),
            PolicySpec::LongWait { beta } => PlanDecision::SendAt(long_wait_send_time(view, beta)),
            PolicySpec::PAoIThreshold { lambda }
            | PolicySpec::PAoIThresholdPostponed { lambda } => plan_at_delivery(view, lambda),
        }
    }
}
