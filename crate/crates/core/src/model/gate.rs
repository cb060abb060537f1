use serde::{Deserialize, Serialize};

use super::rat::Rat;

/// Periodic gate-control entry for one queue.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateSchedule {
    #[default]
    AlwaysOpen,
    /// Open on the half-open windows `[start, end)` taken modulo `period`.
    /// No windows means the gate never opens.
    Periodic { period: Rat, intervals: Vec<(Rat, Rat)> },
}

impl GateSchedule {
    pub fn check(&self) -> Result<(), String> {
        let GateSchedule::Periodic { period, intervals } = self else {
            return Ok(());
        };
        if !period.is_positive() {
            return Err(format!("period must be positive, got {period}"));
        }
        let mut prev_end: Option<&Rat> = None;
        for (k, (start, end)) in intervals.iter().enumerate() {
            if start.is_negative() || end > period {
                return Err(format!("interval {k} [{start}, {end}) leaves [0, {period})"));
            }
            if start >= end {
                return Err(format!("interval {k} [{start}, {end}) is empty or reversed"));
            }
            if let Some(p) = prev_end {
                if start < p {
                    return Err(format!("interval {k} overlaps or is out of order"));
                }
            }
            prev_end = Some(end);
        }
        Ok(())
    }

    fn phase(period: &Rat, t: &Rat) -> Rat {
        t - (t / period).floor() * period
    }

    pub fn is_open(&self, t: &Rat) -> bool {
        match self {
            GateSchedule::AlwaysOpen => true,
            GateSchedule::Periodic { period, intervals } => {
                let phase = Self::phase(period, t);
                intervals.iter().any(|(s, e)| *s <= phase && phase < *e)
            }
        }
    }

    /// First instant strictly after `t` at which the gate may change state.
    pub fn next_edge_after(&self, t: &Rat) -> Option<Rat> {
        let GateSchedule::Periodic { period, intervals } = self else {
            return None;
        };
        let first = intervals.first()?;
        let phase = Self::phase(period, t);
        let base = t - &phase;
        for (s, e) in intervals {
            if *s > phase {
                return Some(&base + s);
            }
            if *e > phase {
                return Some(&base + e);
            }
        }
        Some(base + period + &first.0)
    }

    pub fn is_always_open(&self) -> bool {
        matches!(self, GateSchedule::AlwaysOpen)
    }
}
