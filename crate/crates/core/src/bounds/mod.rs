//! Closed-form credit bounds for the CBS and the resulting service curves.
//!
//! All functions take a [`ValidatedConfig`] and return exact values in bits
//! (credits) or seconds (latencies). Vectors are indexed by `class - 1`.

mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Rat, ValidatedConfig};

pub use report::{render_latency_table, render_table, BoundsJson, LatencyReport, LatencyRow};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("J-bounds need p = 2 AVB classes (got {0}); enable folding to treat classes 3..p as BE")]
    NotApplicable(usize),
    #[error("J-bounds do not cover class {0}")]
    NoJBound(usize),
    #[error("no AVB class {0}")]
    NoSuchClass(usize),
    #[error("credit bound must be non-negative, got {0}")]
    NegativeCredit(Rat),
}

/// How J-bounds treat configurations with more than two AVB classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JMode {
    #[default]
    Strict,
    /// Classes 3..p join the BE aggregate: L_BE becomes max(L_BE, L_3..L_p).
    FoldIntoBe,
}

/// J-bounds for class 1 and, when it exists, class 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JBounds {
    pub class1: Rat,
    pub class2: Option<Rat>,
}

impl JBounds {
    pub fn get(&self, i: usize) -> Option<&Rat> {
        match i {
            1 => Some(&self.class1),
            2 => self.class2.as_ref(),
            _ => None,
        }
    }
}

/// `Σ_{j<i} I_j` for every i (index 0 holds the empty sum).
fn higher_idle_sums(cfg: &ValidatedConfig) -> Vec<Rat> {
    let mut acc = Rat::zero();
    let mut out = Vec::with_capacity(cfg.p() + 1);
    for a in &cfg.config().avb {
        out.push(acc.clone());
        acc += &a.idle_slope;
    }
    out.push(acc);
    out
}

/// `Σ_{j<i} S_j L_j` for every i.
fn higher_send_terms(cfg: &ValidatedConfig) -> Vec<Rat> {
    let mut acc = Rat::zero();
    let mut out = Vec::with_capacity(cfg.p() + 1);
    for a in &cfg.config().avb {
        out.push(acc.clone());
        acc += &a.send_slope * &a.max_packet;
    }
    out.push(acc);
    out
}

/// Improved upper bound
/// `I_i / (c (c - Σ_{j<i} I_j)) · (c Lbar_i - Σ_{j<i} S_j L_j)`.
pub fn new_credit_bounds(cfg: &ValidatedConfig) -> Vec<Rat> {
    let c = cfg.line_rate();
    let idle = higher_idle_sums(cfg);
    let send = higher_send_terms(cfg);
    (1..=cfg.p())
        .map(|i| {
            let ii = &cfg.avb(i).idle_slope;
            let scale = ii / (c * (c - &idle[i - 1]));
            scale * (c * cfg.lbar(i) - &send[i - 1])
        })
        .collect()
}

/// Two-class bounds `Lbar I_1 / c` and `I_2/c (L_BE + L_1 + Lbar I_1/(-S_1))`
/// with `Lbar = max(L_2, L_BE)`. With a single AVB class only the first
/// applies (`Lbar = L_BE`).
pub fn j_credit_bounds(cfg: &ValidatedConfig, mode: JMode) -> Result<JBounds, BoundsError> {
    let p = cfg.p();
    if p > 2 && mode == JMode::Strict {
        return Err(BoundsError::NotApplicable(p));
    }
    let c = cfg.line_rate();
    let port = cfg.config();
    let l_be = port.avb.iter().skip(2).fold(port.be_max_packet.clone(), |acc, a| Rat::max_of(&acc, &a.max_packet));
    let c1 = cfg.avb(1);
    if p == 1 {
        return Ok(JBounds { class1: &l_be * &c1.idle_slope / c, class2: None });
    }
    let c2 = cfg.avb(2);
    let lbar = Rat::max_of(&c2.max_packet, &l_be);
    let class1 = &lbar * &c1.idle_slope / c;
    let drain = &lbar * &c1.idle_slope / (-&c1.send_slope);
    let class2 = &c2.idle_slope / c * (l_be + &c1.max_packet + drain);
    Ok(JBounds { class1, class2: Some(class2) })
}

/// `Lbar_i / c · Σ_{j≤i} I_j - Σ_{j<i} S_j L_j / c`.
pub fn h_credit_bounds(cfg: &ValidatedConfig) -> Vec<Rat> {
    let c = cfg.line_rate();
    let idle = higher_idle_sums(cfg);
    let send = higher_send_terms(cfg);
    (1..=cfg.p()).map(|i| cfg.lbar(i) / c * &idle[i] - &send[i - 1] / c).collect()
}

/// `L_i S_i / c`, never positive.
pub fn credit_lower_bounds(cfg: &ValidatedConfig) -> Vec<Rat> {
    let c = cfg.line_rate();
    cfg.config().avb.iter().map(|a| &a.max_packet * &a.send_slope / c).collect()
}

/// Bound on `Σ_{j≤i} V_j(t)`: `Lbar_i / c · Σ_{j≤i} I_j`.
pub fn sum_upper_bounds(cfg: &ValidatedConfig) -> Vec<Rat> {
    let c = cfg.line_rate();
    let idle = higher_idle_sums(cfg);
    (1..=cfg.p()).map(|i| cfg.lbar(i) / c * &idle[i]).collect()
}

/// H-bound minus improved bound, through its factored form
/// `(c - Σ_{j≤i} I_j) / (c (c - Σ_{j<i} I_j)) · (Lbar_i Σ_{j<i} I_j - Σ_{j<i} S_j L_j)`.
pub fn bound_gap(cfg: &ValidatedConfig) -> Vec<Rat> {
    let c = cfg.line_rate();
    let idle = higher_idle_sums(cfg);
    let send = higher_send_terms(cfg);
    (1..=cfg.p())
        .map(|i| {
            let factor = (c - &idle[i]) / (c * (c - &idle[i - 1]));
            factor * (cfg.lbar(i) * &idle[i - 1] - &send[i - 1])
        })
        .collect()
}

/// Rate-latency service curve `slope · max(0, t - latency)` for one AVB class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceCurve {
    pub class: usize,
    /// bits/s
    pub slope: Rat,
    /// seconds
    pub latency: Rat,
}

impl ServiceCurve {
    pub fn value(&self, t: &Rat) -> Rat {
        let delay = t - &self.latency;
        if delay.is_positive() {
            &self.slope * delay
        } else {
            Rat::zero()
        }
    }
}

/// Service curve of class `class` given a credit upper bound for it.
///
/// Slope `(c - r) I_i / (I_i - S_i)`; latency
/// `c V / ((c - r) I_i) + (b + r L_N / c) / (c - r)`.
pub fn service_curve(cfg: &ValidatedConfig, class: usize, credit_bound: &Rat) -> Result<ServiceCurve, BoundsError> {
    if class == 0 || class > cfg.p() {
        return Err(BoundsError::NoSuchClass(class));
    }
    if credit_bound.is_negative() {
        return Err(BoundsError::NegativeCredit(credit_bound.clone()));
    }
    let c = cfg.line_rate();
    let curve = &cfg.config().cdt_curve;
    let avb = cfg.avb(class);
    let residual = c - &curve.rate;
    let slope = &residual * &avb.idle_slope / (&avb.idle_slope - &avb.send_slope);
    let credit_term = c * credit_bound / (&residual * &avb.idle_slope);
    let cdt_term = (&curve.burst + &curve.rate * &cfg.lengths().l_n / c) / &residual;
    Ok(ServiceCurve { class, slope, latency: credit_term + cdt_term })
}

/// Relative reduction `(old - new) / old` in percent.
pub fn improvement_percent(new: &Rat, old: &Rat) -> Rat {
    (old - new) / old * Rat::int(100)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassBounds {
    pub class: usize,
    pub v_max_new: Rat,
    pub v_max_j: Option<Rat>,
    pub v_max_h: Rat,
    pub v_min: Rat,
    pub sum_bound: Rat,
    pub gap_h: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub j_mode: JMode,
    pub classes: Vec<ClassBounds>,
}

impl BoundsReport {
    pub fn class(&self, i: usize) -> &ClassBounds {
        &self.classes[i - 1]
    }

    /// Invariants every report must satisfy.
    pub fn check(&self) -> Result<(), String> {
        for b in &self.classes {
            if b.v_min.is_positive() || b.v_max_new.is_negative() {
                return Err(format!("class {}: v_min <= 0 <= v_max_new fails", b.class));
            }
            if b.v_max_new > b.v_max_h || (b.class >= 2 && b.v_max_new == b.v_max_h) {
                return Err(format!("class {}: improved bound not below H-bound", b.class));
            }
            if b.gap_h != &b.v_max_h - &b.v_max_new {
                return Err(format!("class {}: gap closed form disagrees", b.class));
            }
        }
        Ok(())
    }
}

pub fn full_report(cfg: &ValidatedConfig, mode: JMode) -> BoundsReport {
    let new = new_credit_bounds(cfg);
    let h = h_credit_bounds(cfg);
    let low = credit_lower_bounds(cfg);
    let sum = sum_upper_bounds(cfg);
    let gap = bound_gap(cfg);
    let j = j_credit_bounds(cfg, mode).ok();
    let classes = (1..=cfg.p())
        .map(|i| ClassBounds {
            class: i,
            v_max_new: new[i - 1].clone(),
            v_max_j: j.as_ref().and_then(|j| j.get(i).cloned()),
            v_max_h: h[i - 1].clone(),
            v_min: low[i - 1].clone(),
            sum_bound: sum[i - 1].clone(),
            gap_h: gap[i - 1].clone(),
        })
        .collect();
    BoundsReport { j_mode: mode, classes }
}
