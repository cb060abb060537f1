//! Trace checks: analytic bounds, structural invariants, work conservation.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::trace::SlopeTag;
use super::{Scenario, SimResult};
use crate::bounds::{credit_lower_bounds, new_credit_bounds, sum_upper_bounds};
use crate::model::{ClassId, Rat, ValidatedConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// credit above the improved upper bound
    UpperBound,
    /// credit below `L_i S_i / c`
    LowerBound,
    /// `Σ_{j≤i} V_j` above `Lbar_i / c Σ_{j≤i} I_j`
    SumBound,
    /// a tightness scenario did not reach its bound exactly
    Tightness,
    /// malformed trace or schedule
    Structure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub class: usize,
    pub time: Rat,
    pub value: Rat,
    pub bound: Rat,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} class {} at t={}: value {} vs bound {}",
            self.kind, self.class, self.time, self.value, self.bound
        )?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

fn violation(kind: ViolationKind, class: usize, time: &Rat, value: &Rat, bound: &Rat) -> Violation {
    Violation { kind, class, time: time.clone(), value: value.clone(), bound: bound.clone(), detail: String::new() }
}

fn structural(class: usize, time: &Rat, detail: String) -> Violation {
    Violation {
        kind: ViolationKind::Structure,
        class,
        time: time.clone(),
        value: Rat::zero(),
        bound: Rat::zero(),
        detail,
    }
}

/// Upper, lower and sum bounds at every segment endpoint and reset instant.
/// Reports at most one violation per (kind, class).
pub fn check_bounds(cfg: &ValidatedConfig, result: &SimResult) -> Vec<Violation> {
    let upper = new_credit_bounds(cfg);
    let lower = credit_lower_bounds(cfg);
    let sums = sum_upper_bounds(cfg);
    let mut out = Vec::new();
    for trace in &result.traces {
        let k = trace.class - 1;
        let points = trace.breakpoints().chain(trace.resets.iter().map(|r| (r.time.clone(), r.credit_before.clone())));
        let mut up_seen = false;
        let mut low_seen = false;
        for (t, v) in points {
            if !up_seen && v > upper[k] {
                out.push(violation(ViolationKind::UpperBound, trace.class, &t, &v, &upper[k]));
                up_seen = true;
            }
            if !low_seen && v < lower[k] {
                out.push(violation(ViolationKind::LowerBound, trace.class, &t, &v, &lower[k]));
                low_seen = true;
            }
        }
    }

    let instants: BTreeSet<Rat> =
        result.traces.iter().flat_map(|t| t.segments.iter().flat_map(|s| [s.start.clone(), s.end.clone()])).collect();
    let mut sum_seen = vec![false; cfg.p()];
    for t in &instants {
        for side in [true, false] {
            let mut acc = Rat::zero();
            for trace in &result.traces {
                let k = trace.class - 1;
                acc += if side { trace.value_before(t) } else { trace.value_at(t) };
                if !sum_seen[k] && acc > sums[k] {
                    out.push(violation(ViolationKind::SumBound, trace.class, t, &acc, &sums[k]));
                    sum_seen[k] = true;
                }
            }
        }
    }
    out
}

/// Contiguity, allowed slopes, continuity outside resets, reset preconditions
/// and non-overlapping departures.
pub fn check_structure(cfg: &ValidatedConfig, result: &SimResult) -> Vec<Violation> {
    let mut out = Vec::new();
    for trace in &result.traces {
        let class = trace.class;
        let avb = cfg.avb(class);
        let mut prev_end: Option<(Rat, Rat)> = None;
        for seg in &trace.segments {
            let allowed = match seg.tag {
                SlopeTag::IdleGain => &avb.idle_slope,
                SlopeTag::Send => &avb.send_slope,
                SlopeTag::Frozen => &Rat::zero(),
            };
            if seg.slope != *allowed {
                out.push(structural(class, &seg.start, format!("slope {} for {:?}", seg.slope, seg.tag)));
            }
            if seg.start >= seg.end {
                out.push(structural(class, &seg.start, "empty segment".into()));
            }
            match &prev_end {
                None => {
                    if !seg.start.is_zero() || !seg.start_credit.is_zero() {
                        out.push(structural(class, &seg.start, "trace must start at (0, 0)".into()));
                    }
                }
                Some((t, v)) => {
                    if *t != seg.start {
                        out.push(structural(class, &seg.start, "gap between segments".into()));
                    }
                    let reset = trace.resets.iter().find(|r| r.time == seg.start);
                    match reset {
                        Some(r) if r.credit_before == *v && seg.start_credit.is_zero() => {}
                        Some(_) => out.push(structural(class, &seg.start, "inconsistent reset".into())),
                        None if *v != seg.start_credit => {
                            out.push(structural(class, &seg.start, "credit jumps without reset".into()))
                        }
                        None => {}
                    }
                }
            }
            prev_end = Some((seg.end.clone(), seg.end_credit()));
        }
        for r in &trace.resets {
            if !r.credit_before.is_positive() {
                out.push(structural(class, &r.time, "reset of non-positive credit".into()));
            }
            let ends_here = result.departures.iter().any(|d| d.class == ClassId::Avb(class) && d.end == r.time);
            if !ends_here {
                out.push(structural(class, &r.time, "reset without a completing transmission".into()));
            }
        }
    }
    let c = cfg.line_rate();
    for w in result.departures.windows(2) {
        if w[1].start < w[0].end {
            out.push(structural(0, &w[1].start, "overlapping transmissions".into()));
        }
    }
    for d in &result.departures {
        if &d.end - &d.start != &d.length / c {
            out.push(structural(0, &d.start, "transmission duration is not length / c".into()));
        }
    }
    out
}

/// Whenever the line goes idle, every waiting packet must be blocked by a
/// closed gate or (for AVB) negative credit.
pub fn check_work_conservation(cfg: &ValidatedConfig, scenario: &Scenario, result: &SimResult) -> Vec<Violation> {
    let p = cfg.p();
    let slot = |c: ClassId| match c {
        ClassId::Cdt => 0,
        ClassId::Avb(i) => i,
        ClassId::Be => p + 1,
    };
    let class_of = |s: usize| match s {
        0 => ClassId::Cdt,
        s if s <= p => ClassId::Avb(s),
        _ => ClassId::Be,
    };
    let mut arrived: Vec<Vec<&Rat>> = vec![Vec::new(); p + 2];
    for a in &scenario.arrivals {
        arrived[slot(a.class)].push(&a.time);
    }
    let mut started: Vec<Vec<&Rat>> = vec![Vec::new(); p + 2];
    for d in &result.departures {
        started[slot(d.class)].push(&d.start);
    }
    // Per class: arrivals and starts at or before the current idle instant.
    let mut n_arrived = vec![0usize; p + 2];
    let mut n_started = vec![0usize; p + 2];
    let mut out = Vec::new();
    for idle in result.timeline.iter().filter(|l| l.class.is_none()) {
        let t = &idle.start;
        for s in 0..p + 2 {
            while arrived[s].get(n_arrived[s]).is_some_and(|a| *a <= t) {
                n_arrived[s] += 1;
            }
            while started[s].get(n_started[s]).is_some_and(|b| *b <= t) {
                n_started[s] += 1;
            }
            if n_arrived[s] <= n_started[s] {
                continue;
            }
            let class = class_of(s);
            let gate_closed = !scenario.gate(class).is_open(t);
            let credit_negative = (1..=p).contains(&s) && result.trace(s).value_at(t).is_negative();
            if !gate_closed && !credit_negative {
                let i = if (1..=p).contains(&s) { s } else { 0 };
                out.push(structural(i, t, format!("line idle while {class} is eligible")));
                break;
            }
        }
    }
    out
}
