use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bounds::{credit_lower_bounds, h_credit_bounds, j_credit_bounds, new_credit_bounds, JMode};
use crate::model::{Rat, ValidatedConfig};
use crate::simulator::{SimResult, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: usize,
    pub max_credit: Rat,
    pub max_time: Rat,
    pub min_credit: Rat,
    pub min_time: Rat,
    pub bound_new: Rat,
    pub bound_j: Option<Rat>,
    pub bound_h: Rat,
    pub lower_bound: Rat,
    pub attains_new: bool,
    pub attains_j: Option<bool>,
    pub attains_h: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSummary {
    pub horizon: Rat,
    pub departures: usize,
    pub classes: Vec<ClassSummary>,
    pub violations: Vec<Violation>,
}

impl SimSummary {
    pub fn build(cfg: &ValidatedConfig, mode: JMode, result: &SimResult, violations: Vec<Violation>) -> Self {
        let new = new_credit_bounds(cfg);
        let h = h_credit_bounds(cfg);
        let low = credit_lower_bounds(cfg);
        let j = j_credit_bounds(cfg, mode).ok();
        let classes = result
            .traces
            .iter()
            .map(|t| {
                let i = t.class;
                let ((max_credit, max_time), (min_credit, min_time)) = t.extrema();
                let bound_j = j.as_ref().and_then(|j| j.get(i).cloned());
                ClassSummary {
                    class: i,
                    attains_new: max_credit == new[i - 1],
                    attains_j: bound_j.as_ref().map(|b| max_credit == *b),
                    attains_h: max_credit == h[i - 1],
                    max_credit,
                    max_time,
                    min_credit,
                    min_time,
                    bound_new: new[i - 1].clone(),
                    bound_j,
                    bound_h: h[i - 1].clone(),
                    lower_bound: low[i - 1].clone(),
                }
            })
            .collect();
        SimSummary { horizon: result.horizon.clone(), departures: result.departures.len(), classes, violations }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "horizon {} s, {} transmissions", self.horizon, self.departures);
        let _ = writeln!(
            out,
            "{:<6} {:>14} {:>14} {:>14} {:>14} {:>14} {:>14}  attained (new/J/H)",
            "class", "max", "V_max", "V_max,J", "V_max,H", "min", "V_min"
        );
        let yn = |b: bool| if b { "yes" } else { "no" };
        for c in &self.classes {
            let j = c.bound_j.as_ref().map(|v| v.to_string()).unwrap_or_else(|| "-".into());
            let aj = c.attains_j.map(yn).unwrap_or("-");
            let _ = writeln!(
                out,
                "{:<6} {:>14} {:>14} {:>14} {:>14} {:>14} {:>14}  {}/{}/{}",
                c.class,
                c.max_credit.to_string(),
                c.bound_new.to_string(),
                j,
                c.bound_h.to_string(),
                c.min_credit.to_string(),
                c.lower_bound.to_string(),
                yn(c.attains_new),
                aj,
                yn(c.attains_h)
            );
        }
        if self.violations.is_empty() {
            out.push_str("no violations\n");
        } else {
            let _ = writeln!(out, "{} violation(s):", self.violations.len());
            for v in &self.violations {
                let _ = writeln!(out, "  {v}");
            }
        }
        out
    }
}
