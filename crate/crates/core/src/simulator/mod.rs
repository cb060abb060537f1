//! Event-driven simulation of one TSN egress port with exact time and credit.
//!
//! Scheduling rules:
//!
//! * **R1** When the line is free, the highest-priority class (CDT, AVB 1..p,
//!   BE) with a waiting packet, an open gate and, for AVB, non-negative credit
//!   starts a transmission. Transmissions are never preempted.
//! * **R2** A transmitting AVB class loses credit at its send slope.
//! * **R3** A waiting AVB class with an open gate gains credit at its idle
//!   slope while another AVB or BE class transmits.
//! * **R4** Credit is frozen while the class gate is closed and while CDT
//!   transmits.
//! * **R5** Positive credit is reset to zero when the queue empties; negative
//!   credit of an empty queue recovers at the idle slope up to zero.
//!
//! A class with negative credit, waiting packets and an idle line also
//! recovers at its idle slope.
//!
//! Events at one instant are handled as: transmission completion, credit
//! reset, gate edges, arrivals, scheduling decision. Arrivals sharing an
//! instant are further ordered by their `seq` number; each `seq` group is
//! followed by its own scheduling decision, so a lower `seq` arrives "just
//! before" a higher one.

mod check;
mod engine;
mod trace;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ArrivalCurveAffine, ClassId, GateSchedule, Rat, ValidatedConfig};

pub use check::{check_bounds, check_structure, check_work_conservation, Violation, ViolationKind};
pub use trace::{write_trace_csv, CreditTrace, Reset, Segment, SlopeTag};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketArrival {
    pub class: ClassId,
    pub time: Rat,
    pub length: Rat,
    /// Tie-break among arrivals at the same instant; lower goes first.
    #[serde(default)]
    pub seq: u32,
}

impl PacketArrival {
    pub fn new(class: ClassId, time: Rat, length: Rat) -> Self {
        PacketArrival { class, time, length, seq: 0 }
    }

    pub fn with_seq(mut self, seq: u32) -> Self {
        self.seq = seq;
        self
    }

    fn sort_key(&self) -> (&Rat, u32, ClassId) {
        (&self.time, self.seq, self.class)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub arrivals: Vec<PacketArrival>,
    /// Classes without an entry are always open.
    pub gates: BTreeMap<ClassId, GateSchedule>,
    pub horizon: Rat,
}

impl Scenario {
    /// Sorts `arrivals` by (time, seq, priority).
    pub fn new(mut arrivals: Vec<PacketArrival>, gates: BTreeMap<ClassId, GateSchedule>, horizon: Rat) -> Self {
        arrivals.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Scenario { arrivals, gates, horizon }
    }

    /// Scenario using the gate schedules of `cfg`.
    pub fn with_config_gates(cfg: &ValidatedConfig, arrivals: Vec<PacketArrival>, horizon: Rat) -> Self {
        Scenario::new(arrivals, cfg.config().gates.clone(), horizon)
    }

    pub fn empty(horizon: Rat) -> Self {
        Scenario::new(Vec::new(), BTreeMap::new(), horizon)
    }

    pub fn gate(&self, class: ClassId) -> GateSchedule {
        self.gates.get(&class).cloned().unwrap_or_default()
    }

    pub fn is_sorted(&self) -> bool {
        self.arrivals.windows(2).all(|w| w[0].sort_key() <= w[1].sort_key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("arrival {index}: class {class} does not exist in this config")]
    UnknownClass { index: usize, class: ClassId },
    #[error("arrival {index}: length {length} must be in (0, {max}]")]
    BadLength { index: usize, length: Rat, max: Rat },
    #[error("arrival {index}: negative arrival time {time}")]
    NegativeTime { index: usize, time: Rat },
    #[error("arrival {index} at {time} is not before the horizon {horizon}")]
    HorizonTooSmall { index: usize, time: Rat, horizon: Rat },
    #[error("arrivals are not sorted by (time, seq, class)")]
    Unsorted,
    #[error("gate of {class}: {message}")]
    BadGate { class: ClassId, message: String },
    #[error("CDT sends {bits} bits in [{start}, {end}], arrival curve allows {allowed}")]
    ScenarioViolatesArrivalCurve { start: Rat, end: Rat, bits: Rat, allowed: Rat },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Departure {
    pub class: ClassId,
    pub start: Rat,
    pub end: Rat,
    pub length: Rat,
}

/// A maximal interval during which the line is busy with one packet or idle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineInterval {
    pub start: Rat,
    pub end: Rat,
    /// `None` when idle.
    pub class: Option<ClassId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimResult {
    pub horizon: Rat,
    /// One trace per AVB class, in priority order.
    pub traces: Vec<CreditTrace>,
    /// Every transmission started before the horizon, in start order. The
    /// last may end after the horizon.
    pub departures: Vec<Departure>,
    pub max_credit: Vec<Rat>,
    pub min_credit: Vec<Rat>,
    pub timeline: Vec<LineInterval>,
}

impl SimResult {
    pub fn trace(&self, class: usize) -> &CreditTrace {
        &self.traces[class - 1]
    }
}

/// Checks that CDT arrivals (sorted by time) stay under `r (t - s) + b` for
/// every window `[s, t]`.
pub fn check_arrival_curve(arrivals: &[PacketArrival], curve: &ArrivalCurveAffine) -> Result<(), SimError> {
    let cdt: Vec<&PacketArrival> = arrivals.iter().filter(|a| a.class == ClassId::Cdt).collect();
    // min over window starts s of (bits before s) - r s
    let mut best: Option<(Rat, Rat)> = None;
    let mut cumulative = Rat::zero();
    let mut k = 0;
    while k < cdt.len() {
        let t = &cdt[k].time;
        let candidate = &cumulative - &curve.rate * t;
        if best.as_ref().is_none_or(|(b, _)| candidate < *b) {
            best = Some((candidate, t.clone()));
        }
        while k < cdt.len() && cdt[k].time == *t {
            cumulative += &cdt[k].length;
            k += 1;
        }
        let (b, start) = best.as_ref().expect("set above");
        let excess = &cumulative - &curve.rate * t - b;
        if excess > curve.burst {
            let window = t - start;
            return Err(SimError::ScenarioViolatesArrivalCurve {
                start: start.clone(),
                end: t.clone(),
                bits: &excess + &curve.rate * &window,
                allowed: &curve.rate * &window + &curve.burst,
            });
        }
    }
    Ok(())
}

fn validate_scenario(cfg: &ValidatedConfig, scenario: &Scenario) -> Result<(), SimError> {
    if !scenario.is_sorted() {
        return Err(SimError::Unsorted);
    }
    for (index, a) in scenario.arrivals.iter().enumerate() {
        let max = cfg.max_packet(a.class).ok_or(SimError::UnknownClass { index, class: a.class })?;
        if !a.length.is_positive() || a.length > *max {
            return Err(SimError::BadLength { index, length: a.length.clone(), max: max.clone() });
        }
        if a.time.is_negative() {
            return Err(SimError::NegativeTime { index, time: a.time.clone() });
        }
        if a.time >= scenario.horizon {
            return Err(SimError::HorizonTooSmall { index, time: a.time.clone(), horizon: scenario.horizon.clone() });
        }
    }
    for (class, gate) in &scenario.gates {
        if let ClassId::Avb(i) = class {
            if *i > cfg.p() {
                return Err(SimError::BadGate { class: *class, message: "no such class".into() });
            }
        }
        gate.check().map_err(|message| SimError::BadGate { class: *class, message })?;
    }
    check_arrival_curve(&scenario.arrivals, &cfg.config().cdt_curve)
}

/// Runs `scenario` on the port described by `cfg` up to the scenario horizon.
pub fn simulate(cfg: &ValidatedConfig, scenario: &Scenario) -> Result<SimResult, SimError> {
    validate_scenario(cfg, scenario)?;
    Ok(engine::Engine::new(cfg, scenario).run())
}

/// Per class `(max credit, first time attained)`.
pub fn max_credits(result: &SimResult) -> Vec<(Rat, Rat)> {
    result.traces.iter().map(|t| t.extrema().0).collect()
}

/// Departure log CSV: `class,start,end,bits` plus decimal sidecars.
pub fn write_departures_csv<W: Write>(departures: &[Departure], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class", "start", "end", "bits", "start_dec", "end_dec"])?;
    for d in departures {
        w.write_record([
            d.class.to_string(),
            d.start.to_string(),
            d.end.to_string(),
            d.length.to_string(),
            d.start.to_decimal(12),
            d.end.to_decimal(12),
        ])?;
    }
    w.flush()?;
    Ok(())
}
