use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::model::Rat;

/// Which slope a credit segment follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SlopeTag {
    /// idle slope `I_i`
    IdleGain,
    /// send slope `S_i`
    Send,
    /// zero
    Frozen,
}

impl SlopeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SlopeTag::IdleGain => "IDLE_GAIN",
            SlopeTag::Send => "SEND",
            SlopeTag::Frozen => "FROZEN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub start: Rat,
    pub end: Rat,
    pub start_credit: Rat,
    pub slope: Rat,
    pub tag: SlopeTag,
}

impl Segment {
    pub fn end_credit(&self) -> Rat {
        &self.start_credit + &self.slope * (&self.end - &self.start)
    }

    fn credit_at(&self, t: &Rat) -> Rat {
        &self.start_credit + &self.slope * (t - &self.start)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reset {
    pub time: Rat,
    pub credit_before: Rat,
}

/// Piecewise-linear credit of one AVB class over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CreditTrace {
    pub class: usize,
    pub segments: Vec<Segment>,
    pub resets: Vec<Reset>,
    split_next: bool,
}

impl CreditTrace {
    pub fn new(class: usize) -> Self {
        CreditTrace { class, segments: Vec::new(), resets: Vec::new(), split_next: false }
    }

    /// Appends `[start, end)` following `slope`; merges with the previous
    /// segment when the slope is unchanged and no reset intervenes.
    pub(crate) fn push(&mut self, start: &Rat, end: &Rat, start_credit: &Rat, slope: &Rat, tag: SlopeTag) {
        if !self.split_next {
            if let Some(last) = self.segments.last_mut() {
                if last.tag == tag && last.end == *start {
                    last.end = end.clone();
                    return;
                }
            }
        }
        self.split_next = false;
        self.segments.push(Segment {
            start: start.clone(),
            end: end.clone(),
            start_credit: start_credit.clone(),
            slope: slope.clone(),
            tag,
        });
    }

    pub(crate) fn reset(&mut self, time: &Rat, credit_before: &Rat) {
        self.resets.push(Reset { time: time.clone(), credit_before: credit_before.clone() });
        self.split_next = true;
    }

    pub fn end_time(&self) -> Rat {
        self.segments.last().map(|s| s.end.clone()).unwrap_or_else(Rat::zero)
    }

    /// Right-continuous value: after any reset at `t`.
    pub fn value_at(&self, t: &Rat) -> Rat {
        let k = self.segments.partition_point(|s| s.start <= *t);
        if k == 0 {
            return Rat::zero();
        }
        let seg = &self.segments[k - 1];
        if *t < seg.end {
            seg.credit_at(t)
        } else {
            seg.end_credit()
        }
    }

    /// Left limit at `t`: before any reset at `t`.
    pub fn value_before(&self, t: &Rat) -> Rat {
        let k = self.segments.partition_point(|s| s.start < *t);
        if k == 0 {
            return Rat::zero();
        }
        let seg = &self.segments[k - 1];
        if *t <= seg.end {
            seg.credit_at(t)
        } else {
            seg.end_credit()
        }
    }

    /// Every segment endpoint and pre-reset value, in time order.
    pub fn breakpoints(&self) -> impl Iterator<Item = (Rat, Rat)> + '_ {
        self.segments.iter().flat_map(|s| [(s.start.clone(), s.start_credit.clone()), (s.end.clone(), s.end_credit())])
    }

    /// Exact (max, argmax) and (min, argmin) over the trace.
    pub fn extrema(&self) -> ((Rat, Rat), (Rat, Rat)) {
        let mut max = (Rat::zero(), Rat::zero());
        let mut min = (Rat::zero(), Rat::zero());
        let points = self.breakpoints().chain(self.resets.iter().map(|r| (r.time.clone(), r.credit_before.clone())));
        for (t, v) in points {
            if v > max.0 {
                max = (v.clone(), t.clone());
            }
            if v < min.0 {
                min = (v, t);
            }
        }
        (max, min)
    }
}

/// Writes traces as CSV rows; resets appear as zero-length rows tagged `reset`.
pub fn write_trace_csv<W: Write>(traces: &[CreditTrace], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "class",
        "t_start",
        "t_end",
        "credit_start",
        "credit_end",
        "slope_tag",
        "event",
        "t_start_dec",
        "t_end_dec",
        "credit_start_dec",
        "credit_end_dec",
    ])?;
    for trace in traces {
        let class = format!("avb{}", trace.class);
        let mut resets = trace.resets.iter().peekable();
        for seg in &trace.segments {
            while let Some(r) = resets.next_if(|r| r.time <= seg.start) {
                write_row(&mut w, &class, &r.time, &r.time, &r.credit_before, &Rat::zero(), SlopeTag::Frozen, "reset")?;
            }
            write_row(&mut w, &class, &seg.start, &seg.end, &seg.start_credit, &seg.end_credit(), seg.tag, "none")?;
        }
        for r in resets {
            write_row(&mut w, &class, &r.time, &r.time, &r.credit_before, &Rat::zero(), SlopeTag::Frozen, "reset")?;
        }
    }
    w.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn write_row<W: Write>(
    w: &mut csv::Writer<W>,
    class: &str,
    t0: &Rat,
    t1: &Rat,
    v0: &Rat,
    v1: &Rat,
    tag: SlopeTag,
    event: &str,
) -> csv::Result<()> {
    w.write_record([
        class.to_string(),
        t0.to_string(),
        t1.to_string(),
        v0.to_string(),
        v1.to_string(),
        tag.as_str().to_string(),
        event.to_string(),
        t0.to_decimal(12),
        t1.to_decimal(12),
        v0.to_decimal(6),
        v1.to_decimal(6),
    ])
}
