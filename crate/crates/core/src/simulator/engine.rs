use std::collections::VecDeque;

use super::trace::{CreditTrace, SlopeTag};
use super::{Departure, LineInterval, Scenario, SimResult};
use crate::model::{ClassId, GateSchedule, Rat, ValidatedConfig};

/// Queue slots: 0 = CDT, 1..=p = AVB, p + 1 = BE.
fn slot_of(class: ClassId, p: usize) -> usize {
    match class {
        ClassId::Cdt => 0,
        ClassId::Avb(i) => i,
        ClassId::Be => p + 1,
    }
}

fn class_of(slot: usize, p: usize) -> ClassId {
    match slot {
        0 => ClassId::Cdt,
        s if s <= p => ClassId::Avb(s),
        _ => ClassId::Be,
    }
}

struct Transmission {
    slot: usize,
    end: Rat,
}

pub(super) struct Engine<'a> {
    scenario: &'a Scenario,
    p: usize,
    line_rate: Rat,
    idle: Vec<Rat>,
    send: Vec<Rat>,
    gates: Vec<GateSchedule>,
    gate_open: Vec<bool>,
    queues: Vec<VecDeque<Rat>>,
    credit: Vec<Rat>,
    tx: Option<Transmission>,
    now: Rat,
    traces: Vec<CreditTrace>,
    departures: Vec<Departure>,
}

impl<'a> Engine<'a> {
    pub(super) fn new(cfg: &'a ValidatedConfig, scenario: &'a Scenario) -> Self {
        let p = cfg.p();
        let gates: Vec<GateSchedule> = (0..p + 2).map(|s| scenario.gate(class_of(s, p))).collect();
        Engine {
            scenario,
            p,
            line_rate: cfg.line_rate().clone(),
            idle: cfg.config().avb.iter().map(|a| a.idle_slope.clone()).collect(),
            send: cfg.config().avb.iter().map(|a| a.send_slope.clone()).collect(),
            gate_open: vec![true; p + 2],
            gates,
            queues: vec![VecDeque::new(); p + 2],
            credit: vec![Rat::zero(); p],
            tx: None,
            now: Rat::zero(),
            traces: (1..=p).map(CreditTrace::new).collect(),
            departures: Vec::new(),
        }
    }

    pub(super) fn run(mut self) -> SimResult {
        let scenario = self.scenario;
        let arrivals = &scenario.arrivals;
        let horizon = scenario.horizon.clone();
        let mut next_arrival = 0;
        while self.now < horizon {
            if self.tx.as_ref().is_some_and(|tx| tx.end == self.now) {
                self.complete();
            }
            for (slot, gate) in self.gates.iter().enumerate() {
                self.gate_open[slot] = gate.is_open(&self.now);
            }
            let mut decided = false;
            while next_arrival < arrivals.len() && arrivals[next_arrival].time == self.now {
                let seq = arrivals[next_arrival].seq;
                while let Some(a) = arrivals.get(next_arrival).filter(|a| a.time == self.now && a.seq == seq) {
                    self.queues[slot_of(a.class, self.p)].push_back(a.length.clone());
                    next_arrival += 1;
                }
                self.decide();
                decided = true;
            }
            if !decided {
                self.decide();
            }

            let tags: Vec<SlopeTag> = (1..=self.p).map(|i| self.slope_tag(i)).collect();
            let mut next = horizon.clone();
            let mut consider = |t: &Rat| {
                if *t < next {
                    next = t.clone();
                }
            };
            if let Some(tx) = &self.tx {
                consider(&tx.end);
            }
            if let Some(a) = arrivals.get(next_arrival) {
                consider(&a.time);
            }
            for gate in &self.gates {
                if let Some(edge) = gate.next_edge_after(&self.now) {
                    consider(&edge);
                }
            }
            for (k, tag) in tags.iter().enumerate() {
                if *tag == SlopeTag::IdleGain && self.credit[k].is_negative() {
                    consider(&(&self.now - &self.credit[k] / &self.idle[k]));
                }
            }
            self.advance(&tags, next);
        }
        self.finish()
    }

    fn slope_tag(&self, class: usize) -> SlopeTag {
        let slot = class;
        match &self.tx {
            Some(tx) if tx.slot == slot => return SlopeTag::Send,
            _ => {}
        }
        if !self.gate_open[slot] || self.tx.as_ref().is_some_and(|tx| tx.slot == 0) {
            return SlopeTag::Frozen;
        }
        let waiting = !self.queues[slot].is_empty();
        if (waiting && self.tx.is_some()) || self.credit[class - 1].is_negative() {
            SlopeTag::IdleGain
        } else {
            SlopeTag::Frozen
        }
    }

    fn slope_value(&self, class: usize, tag: SlopeTag) -> Rat {
        match tag {
            SlopeTag::IdleGain => self.idle[class - 1].clone(),
            SlopeTag::Send => self.send[class - 1].clone(),
            SlopeTag::Frozen => Rat::zero(),
        }
    }

    fn advance(&mut self, tags: &[SlopeTag], to: Rat) {
        let dt = &to - &self.now;
        for (k, &tag) in tags.iter().enumerate() {
            let slope = self.slope_value(k + 1, tag);
            self.traces[k].push(&self.now, &to, &self.credit[k], &slope, tag);
            if tag != SlopeTag::Frozen {
                self.credit[k] += &slope * &dt;
            }
        }
        self.now = to;
    }

    fn complete(&mut self) {
        let tx = self.tx.take().expect("transmission in progress");
        if (1..=self.p).contains(&tx.slot) {
            let k = tx.slot - 1;
            if self.queues[tx.slot].is_empty() && self.credit[k].is_positive() {
                self.traces[k].reset(&self.now, &self.credit[k]);
                self.credit[k] = Rat::zero();
            }
        }
    }

    fn eligible(&self, slot: usize) -> bool {
        !self.queues[slot].is_empty()
            && self.gate_open[slot]
            && (slot == 0 || slot > self.p || !self.credit[slot - 1].is_negative())
    }

    fn decide(&mut self) {
        if self.tx.is_some() {
            return;
        }
        let Some(slot) = (0..self.p + 2).find(|&s| self.eligible(s)) else {
            return;
        };
        let length = self.queues[slot].pop_front().expect("eligible queue is non-empty");
        let end = &self.now + &length / &self.line_rate;
        self.departures.push(Departure {
            class: class_of(slot, self.p),
            start: self.now.clone(),
            end: end.clone(),
            length,
        });
        self.tx = Some(Transmission { slot, end });
    }

    fn finish(self) -> SimResult {
        let mut timeline = Vec::new();
        let mut cursor = Rat::zero();
        for d in &self.departures {
            if d.start > cursor {
                timeline.push(LineInterval { start: cursor.clone(), end: d.start.clone(), class: None });
            }
            timeline.push(LineInterval { start: d.start.clone(), end: d.end.clone(), class: Some(d.class) });
            cursor = d.end.clone();
        }
        if self.scenario.horizon > cursor {
            timeline.push(LineInterval { start: cursor, end: self.scenario.horizon.clone(), class: None });
        }
        let (max_credit, min_credit) = self
            .traces
            .iter()
            .map(|t| {
                let ((max, _), (min, _)) = t.extrema();
                (max, min)
            })
            .unzip();
        SimResult {
            horizon: self.scenario.horizon.clone(),
            traces: self.traces,
            departures: self.departures,
            max_credit,
            min_credit,
            timeline,
        }
    }
}
