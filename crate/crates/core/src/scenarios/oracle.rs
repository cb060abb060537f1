//! Independent time-stepping reimplementation of the scheduler in `f64`.
//!
//! Time advances in steps of `h` and credits are sampled at every boundary.
//! Arrivals and gate changes are only observed at the first boundary at or
//! after their exact instant. Within a step the oracle integrates credits
//! piecewise and reacts to transmission completions and to zero crossings
//! on an idle line at the instant they happen.
//!
//! An arrival seen `d < h` late delays whatever it triggers by `d`: the
//! credits of the affected classes are shifted in time by less than `h`,
//! which moves a sample by at most `c * h` (send slope to idle slope).
//! Events do not accumulate lag because completions and crossings are
//! exact relative to the transmission that caused them. When an arrival
//! lands within `h` of a scheduling decision the two runs may order
//! packets differently; that happens with probability proportional to `h`.

use std::collections::VecDeque;

use crate::model::{ClassId, Rat, ValidatedConfig};
use crate::simulator::{Scenario, SimResult};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSamples {
    pub step: Rat,
    /// `credits[i - 1][k]` is the credit of class `i` at `k * step`, after
    /// everything at that boundary has been processed.
    pub credits: Vec<Vec<f64>>,
    /// `resets[i - 1]` lists `(k, credit before)` for every reset of class
    /// `i`, where `k` is the first sample showing the reset.
    pub resets: Vec<Vec<(usize, f64)>>,
    /// Start time and class of every transmission, in order.
    pub starts: Vec<(f64, ClassId)>,
}

impl OracleSamples {
    pub fn len(&self) -> usize {
        self.credits.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max(&self, class: usize) -> f64 {
        self.credits[class - 1].iter().copied().fold(0.0, f64::max)
    }
}

fn step_index(t: &Rat, step: &Rat) -> usize {
    (t / step).ceil().floor_i64().expect("step index fits in i64") as usize
}

struct Tx {
    slot: usize,
    end: f64,
}

enum Event {
    Completion,
    Crossing(usize),
}

struct State {
    p: usize,
    idle: Vec<f64>,
    send: Vec<f64>,
    credit: Vec<f64>,
    queues: Vec<VecDeque<f64>>,
    gate_open: Vec<bool>,
    tx: Option<Tx>,
    line_rate: f64,
    /// Slack for comparing instants within a step.
    time_tol: f64,
    /// Slack for eligibility at zero credit.
    credit_tol: f64,
    /// Current time and sample index.
    now: f64,
    k: usize,
    resets: Vec<Vec<(usize, f64)>>,
    starts: Vec<(f64, ClassId)>,
}

impl State {
    fn class_of(&self, slot: usize) -> ClassId {
        match slot {
            0 => ClassId::Cdt,
            s if s <= self.p => ClassId::Avb(s),
            _ => ClassId::Be,
        }
    }

    /// Slope of class `i` (0-based) and whether it stops at zero.
    fn slope(&self, i: usize) -> (f64, bool) {
        let slot = i + 1;
        let tx_slot = self.tx.as_ref().map(|tx| tx.slot);
        if tx_slot == Some(slot) {
            (self.send[i], false)
        } else if !self.gate_open[slot] || tx_slot == Some(0) {
            (0.0, false)
        } else if tx_slot.is_some() && !self.queues[slot].is_empty() {
            (self.idle[i], false)
        } else if self.credit[i] < 0.0 {
            (self.idle[i], true)
        } else {
            (0.0, false)
        }
    }

    /// Earliest completion or decisive zero crossing within `limit` seconds.
    fn next_event(&self, limit: f64) -> (f64, Option<Event>) {
        let mut best = (limit, None);
        if let Some(tx) = &self.tx {
            let remaining = tx.end - self.now;
            if remaining <= limit + self.time_tol {
                best = (remaining.clamp(0.0, limit), Some(Event::Completion));
            }
            return best;
        }
        for i in 0..self.p {
            let slot = i + 1;
            if self.credit[i] < 0.0 && self.gate_open[slot] && !self.queues[slot].is_empty() {
                let t = -self.credit[i] / self.idle[i];
                if t < best.0 || (best.1.is_none() && t <= limit + self.time_tol) {
                    best = (t.min(limit), Some(Event::Crossing(i)));
                }
            }
        }
        best
    }

    fn integrate(&mut self, dt: f64) {
        for i in 0..self.p {
            let (slope, capped) = self.slope(i);
            let v = self.credit[i] + slope * dt;
            self.credit[i] = if capped { v.min(0.0) } else { v };
        }
        self.now += dt;
    }

    /// Runs from the current boundary to the next one at `end`.
    fn advance_to(&mut self, end: f64) {
        loop {
            let left = end - self.now;
            let (dt, event) = self.next_event(left);
            self.integrate(dt);
            let Some(event) = event else { break };
            match event {
                Event::Completion => self.complete(),
                Event::Crossing(i) => self.credit[i] = 0.0,
            }
            // An event on the boundary waits for the arrivals seen there.
            if end - self.now <= self.time_tol {
                break;
            }
            self.decide();
        }
        self.now = end;
    }

    fn complete(&mut self) {
        let Some(tx) = self.tx.take() else { return };
        let slot = tx.slot;
        if (1..=self.p).contains(&slot) && self.queues[slot].is_empty() && self.credit[slot - 1] > 0.0 {
            self.resets[slot - 1].push((self.k, self.credit[slot - 1]));
            self.credit[slot - 1] = 0.0;
        }
    }

    fn decide(&mut self) {
        if self.tx.is_some() {
            return;
        }
        let eligible = |s: usize| {
            !self.queues[s].is_empty()
                && self.gate_open[s]
                && (s == 0 || s > self.p || self.credit[s - 1] >= -self.credit_tol)
        };
        if let Some(slot) = (0..self.p + 2).find(|&s| eligible(s)) {
            let bits = self.queues[slot].pop_front().expect("eligible queue is non-empty");
            if (1..=self.p).contains(&slot) {
                self.credit[slot - 1] = self.credit[slot - 1].max(0.0);
            }
            self.tx = Some(Tx { slot, end: self.now + bits / self.line_rate });
            self.starts.push((self.now, self.class_of(slot)));
        }
    }
}

/// Samples every AVB credit at each multiple of `step` up to the horizon.
pub fn fixed_step_oracle(cfg: &ValidatedConfig, scenario: &Scenario, step: &Rat) -> OracleSamples {
    assert!(step.is_positive(), "step must be positive");
    let p = cfg.p();
    let slot_of = |class: ClassId| match class {
        ClassId::Cdt => 0,
        ClassId::Avb(i) => i,
        ClassId::Be => p + 1,
    };
    let class_of = |slot: usize| match slot {
        0 => ClassId::Cdt,
        s if s <= p => ClassId::Avb(s),
        _ => ClassId::Be,
    };
    let last = (&scenario.horizon / step).floor().floor_i64().expect("step count fits in i64").max(0) as usize;

    // Gate state changes, each observed at the boundary at or after its edge.
    let mut gate_changes: Vec<(usize, usize, bool)> = Vec::new();
    let mut initial_gates = vec![true; p + 2];
    for (slot, open) in initial_gates.iter_mut().enumerate() {
        let gate = scenario.gate(class_of(slot));
        *open = gate.is_open(&Rat::zero());
        let mut t = Rat::zero();
        while let Some(edge) = gate.next_edge_after(&t) {
            if edge > scenario.horizon {
                break;
            }
            let k = step_index(&edge, step);
            gate_changes.push((k, slot, gate.is_open(&(Rat::int(k as i64) * step))));
            t = edge;
        }
    }
    gate_changes.sort_by_key(|&(k, slot, _)| (k, slot));

    let arrivals: Vec<(usize, usize, f64)> =
        scenario.arrivals.iter().map(|a| (step_index(&a.time, step), slot_of(a.class), a.length.to_f64())).collect();

    let h = step.to_f64();
    let max_slope =
        cfg.config().avb.iter().map(|a| a.idle_slope.to_f64().max(-a.send_slope.to_f64())).fold(0.0, f64::max);
    let mut state = State {
        p,
        idle: cfg.config().avb.iter().map(|a| a.idle_slope.to_f64()).collect(),
        send: cfg.config().avb.iter().map(|a| a.send_slope.to_f64()).collect(),
        credit: vec![0.0; p],
        queues: vec![VecDeque::new(); p + 2],
        gate_open: initial_gates,
        tx: None,
        line_rate: cfg.line_rate().to_f64(),
        time_tol: 1e-9 * h + 4.0 * f64::EPSILON * scenario.horizon.to_f64(),
        credit_tol: 1e-9 * max_slope * h,
        now: 0.0,
        k: 0,
        resets: vec![Vec::new(); p],
        starts: Vec::new(),
    };
    let mut credits = vec![Vec::with_capacity(last + 1); p];
    let mut next_gate = gate_changes.iter().peekable();
    let mut next_arrival = 0;
    for k in 0..=last {
        state.k = k;
        if k > 0 {
            state.advance_to(k as f64 * h);
        }
        while let Some(&(_, slot, open)) = next_gate.next_if(|g| g.0 <= k) {
            state.gate_open[slot] = open;
        }
        let mut decided = false;
        while next_arrival < arrivals.len() && arrivals[next_arrival].0 == k {
            let group = (&scenario.arrivals[next_arrival].time, scenario.arrivals[next_arrival].seq);
            while next_arrival < arrivals.len()
                && arrivals[next_arrival].0 == k
                && (&scenario.arrivals[next_arrival].time, scenario.arrivals[next_arrival].seq) == group
            {
                let (_, slot, bits) = arrivals[next_arrival];
                state.queues[slot].push_back(bits);
                next_arrival += 1;
            }
            state.decide();
            decided = true;
        }
        if !decided {
            state.decide();
        }
        for (i, samples) in credits.iter_mut().enumerate() {
            samples.push(state.credit[i]);
        }
    }
    OracleSamples { step: step.clone(), credits, resets: state.resets, starts: state.starts }
}

/// Exact trace values at the oracle's sample instants, right-continuous.
pub fn exact_samples(result: &SimResult, step: &Rat, count: usize) -> Vec<Vec<f64>> {
    let h = step.to_f64();
    result
        .traces
        .iter()
        .map(|trace| {
            let mut out = vec![0.0; count];
            for seg in &trace.segments {
                let first = step_index(&seg.start, step).min(count);
                let end = step_index(&seg.end, step).min(count);
                let (t0, v0, slope) = (seg.start.to_f64(), seg.start_credit.to_f64(), seg.slope.to_f64());
                for (k, v) in out.iter_mut().enumerate().take(end).skip(first) {
                    *v = v0 + slope * (k as f64 * h - t0);
                }
            }
            if let Some(seg) = trace.segments.last() {
                let k_end = step_index(&seg.end, step);
                if k_end < count && (Rat::int(k_end as i64) * step) == seg.end {
                    out[k_end] = seg.end_credit().to_f64();
                }
            }
            out
        })
        .collect()
}

/// Resets further apart than this many steps are never matched.
const RESET_MATCH_WINDOW: usize = 256;

/// `|oracle - exact|` per class and sample. Exact and oracle resets are
/// matched in order; between a reset and its match one run has dropped the
/// credit and the other has not, so the jump is forgiven there.
pub fn deviations(result: &SimResult, samples: &OracleSamples) -> Vec<Vec<f64>> {
    let step = &samples.step;
    let exact = exact_samples(result, step, samples.len());
    let mut out = Vec::with_capacity(exact.len());
    for ((e, o), (trace, oracle_resets)) in
        exact.iter().zip(&samples.credits).zip(result.traces.iter().zip(&samples.resets))
    {
        let mut dev: Vec<f64> = e.iter().zip(o).map(|(a, b)| (a - b).abs()).collect();
        let exact_resets: Vec<(usize, f64)> =
            trace.resets.iter().map(|r| (step_index(&r.time, step), r.credit_before.to_f64())).collect();
        let (mut i, mut j) = (0, 0);
        while i < exact_resets.len() && j < oracle_resets.len() {
            let (ke, jump) = exact_resets[i];
            let ko = oracle_resets[j].0;
            if ke.abs_diff(ko) <= RESET_MATCH_WINDOW {
                for d in dev.iter_mut().take(ke.max(ko)).skip(ke.min(ko)) {
                    *d = d.min((*d - jump).abs());
                }
                i += 1;
                j += 1;
            } else if ke < ko {
                i += 1;
            } else {
                j += 1;
            }
        }
        out.push(dev);
    }
    out
}

/// Largest deviation per class, as in [`deviations`].
pub fn max_deviation(result: &SimResult, samples: &OracleSamples) -> Vec<f64> {
    deviations(result, samples).iter().map(|d| d.iter().copied().fold(0.0, f64::max)).collect()
}

/// Per-sample deviation the oracle is expected to stay within, in bits:
/// `2 c h`. A busy period shifted by less than `h` moves a sample by less
/// than `c h`; a credit offset left by an earlier late arrival adds less
/// than `I_i h`.
pub fn error_budget(cfg: &ValidatedConfig, step: &Rat) -> f64 {
    2.0 * (cfg.line_rate() * step).to_f64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_config;
    use crate::scenarios::tightness_class1;
    use crate::simulator::{simulate, PacketArrival};

    #[test]
    fn empty_scenario_samples_zero() {
        let cfg = reference_config();
        let s = Scenario::empty(Rat::ratio(1, 10_000));
        let o = fixed_step_oracle(&cfg, &s, &Rat::ratio(1, 1_000_000));
        assert_eq!(o.len(), 101);
        assert!(o.credits.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn tightness_class1_within_one_step() {
        let cfg = reference_config();
        let s = tightness_class1(&cfg);
        let step = cfg.lbar(1) / (Rat::int(1000) * cfg.line_rate());
        let o = fixed_step_oracle(&cfg, &s, &step);
        let i1_step = (&cfg.avb(1).idle_slope * &step).to_f64();
        assert!((o.max(1) - 6000.0).abs() <= i1_step, "{}", o.max(1));
        let result = simulate(&cfg, &s).unwrap();
        let dev = max_deviation(&result, &o);
        assert!(dev.iter().all(|&d| d <= i1_step), "{dev:?}");
    }

    #[test]
    fn late_arrival_shifts_the_busy_period() {
        // One class-1 packet at 0.3 bit times, seen one bit time later.
        let cfg = reference_config();
        let bit = Rat::one() / cfg.line_rate();
        let arrival = PacketArrival::new(ClassId::Avb(1), Rat::ratio(3, 10) * &bit, Rat::int(1600));
        let s = Scenario::new(vec![arrival], Default::default(), Rat::int(4000) * &bit);
        let o = fixed_step_oracle(&cfg, &s, &bit);
        assert_eq!(o.starts, vec![(bit.to_f64(), ClassId::Avb(1))]);
        let result = simulate(&cfg, &s).unwrap();
        // Send and idle slopes are both c / 2: the 0.7 bit-time shift is 0.35 bits.
        let dev = max_deviation(&result, &o);
        assert!((dev[0] - 0.35).abs() < 1e-9, "{dev:?}");
        assert!(dev[0] < error_budget(&cfg, &bit));
        assert_eq!(dev[1], 0.0);
    }

    #[test]
    fn late_arrival_gains_less_while_waiting() {
        let cfg = reference_config();
        let bit = Rat::one() / cfg.line_rate();
        // Class 1 waits behind a BE frame and is reset after sending; the
        // oracle sees it half a bit time late and gains 0.25 bits less.
        let arrivals = vec![
            PacketArrival::new(ClassId::Be, Rat::zero(), Rat::int(8000)),
            PacketArrival::new(ClassId::Avb(1), Rat::ratio(1, 2) * &bit, Rat::int(1600)),
        ];
        let s = Scenario::new(arrivals, Default::default(), Rat::int(20_000) * &bit);
        let result = simulate(&cfg, &s).unwrap();
        let o = fixed_step_oracle(&cfg, &s, &bit);
        assert_eq!(result.traces[0].resets[0].credit_before, Rat::ratio(12799, 4));
        assert_eq!(o.resets[0].len(), 1);
        assert_eq!(o.resets[0][0].0, 9600);
        assert!((o.resets[0][0].1 - 3199.5).abs() < 1e-6);
        let dev = max_deviation(&result, &o);
        assert!((dev[0] - 0.25).abs() < 1e-9, "{dev:?}");
    }

    #[test]
    fn exact_samples_follow_segments_and_resets() {
        let cfg = reference_config();
        let s = tightness_class1(&cfg);
        let result = simulate(&cfg, &s).unwrap();
        let step = Rat::ratio(1, 1_000_000);
        let n = (&s.horizon / &step).floor().floor_i64().unwrap() as usize + 1;
        let exact = exact_samples(&result, &step, n);
        for (i, trace) in result.traces.iter().enumerate() {
            for k in [0, 1, 60, 119, 120, 121, 135, n - 1] {
                let t = Rat::int(k as i64) * &step;
                assert!((exact[i][k] - trace.value_at(&t).to_f64()).abs() < 1e-9, "class {} k {k}", i + 1);
            }
        }
    }
}
