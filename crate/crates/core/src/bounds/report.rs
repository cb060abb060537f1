//! Text and JSON renderings of bound and latency reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    full_report, improvement_percent, j_credit_bounds, service_curve, BoundsError, BoundsReport, ClassBounds, JMode,
};
use crate::model::{Rat, ValidatedConfig};

const MICRO: i64 = 1_000_000;

/// Exact value with a decimal approximation and its unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotated {
    pub exact: Rat,
    pub decimal: f64,
    pub unit: String,
}

impl Annotated {
    fn new(x: &Rat, unit: &str) -> Self {
        Annotated { exact: x.clone(), decimal: x.to_f64(), unit: unit.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClassJson {
    class: usize,
    v_max_new: Annotated,
    v_max_j: Option<Annotated>,
    v_max_h: Annotated,
    v_min: Annotated,
    sum_bound: Annotated,
    gap_h: Annotated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsJson {
    j_mode: JMode,
    classes: Vec<ClassJson>,
}

impl From<&BoundsReport> for BoundsJson {
    fn from(r: &BoundsReport) -> Self {
        let bits = |x: &Rat| Annotated::new(x, "bits");
        BoundsJson {
            j_mode: r.j_mode,
            classes: r
                .classes
                .iter()
                .map(|c| ClassJson {
                    class: c.class,
                    v_max_new: bits(&c.v_max_new),
                    v_max_j: c.v_max_j.as_ref().map(bits),
                    v_max_h: bits(&c.v_max_h),
                    v_min: bits(&c.v_min),
                    sum_bound: bits(&c.sum_bound),
                    gap_h: bits(&c.gap_h),
                })
                .collect(),
        }
    }
}

impl From<BoundsJson> for BoundsReport {
    fn from(j: BoundsJson) -> Self {
        BoundsReport {
            j_mode: j.j_mode,
            classes: j
                .classes
                .into_iter()
                .map(|c| ClassBounds {
                    class: c.class,
                    v_max_new: c.v_max_new.exact,
                    v_max_j: c.v_max_j.map(|v| v.exact),
                    v_max_h: c.v_max_h.exact,
                    v_min: c.v_min.exact,
                    sum_bound: c.sum_bound.exact,
                    gap_h: c.gap_h.exact,
                })
                .collect(),
        }
    }
}

impl BoundsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&BoundsJson::from(self)).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str::<BoundsJson>(text).map(Into::into)
    }
}

fn kb(x: &Rat) -> String {
    (x / Rat::int(1000)).to_decimal(2)
}

fn push_row(out: &mut String, label: &str, cells: &[String]) {
    let _ = write!(out, "{label:<16}");
    for c in cells {
        let _ = write!(out, " {c:>12}");
    }
    out.push('\n');
}

/// Classes as columns, bound families as rows; Kb means 1000 bits.
pub fn render_table(report: &BoundsReport) -> String {
    let mut out = String::new();
    let header: Vec<String> = report.classes.iter().map(|c| format!("i={}", c.class)).collect();
    let col = |f: &dyn Fn(&ClassBounds) -> Option<String>| -> Vec<String> {
        report.classes.iter().map(|c| f(c).unwrap_or_else(|| "-".into())).collect()
    };
    out.push_str("Credit bounds per AVB class (1 Kb = 1000 bits)\n");
    push_row(&mut out, "", &header);
    push_row(&mut out, "V_max (Kb)", &col(&|c| Some(kb(&c.v_max_new))));
    push_row(&mut out, "V_max,J (Kb)", &col(&|c| c.v_max_j.as_ref().map(kb)));
    push_row(&mut out, "V_max,H (Kb)", &col(&|c| Some(kb(&c.v_max_h))));
    push_row(&mut out, "V_min (Kb)", &col(&|c| Some(kb(&c.v_min))));
    push_row(&mut out, "sum bound (Kb)", &col(&|c| Some(kb(&c.sum_bound))));
    push_row(&mut out, "H - V_max (Kb)", &col(&|c| Some(kb(&c.gap_h))));
    out.push_str("\nExact values (bits)\n");
    push_row(&mut out, "", &header);
    push_row(&mut out, "V_max", &col(&|c| Some(c.v_max_new.to_string())));
    push_row(&mut out, "V_max,J", &col(&|c| c.v_max_j.as_ref().map(|v| v.to_string())));
    push_row(&mut out, "V_max,H", &col(&|c| Some(c.v_max_h.to_string())));
    push_row(&mut out, "V_min", &col(&|c| Some(c.v_min.to_string())));
    push_row(&mut out, "sum bound", &col(&|c| Some(c.sum_bound.to_string())));
    push_row(&mut out, "H - V_max", &col(&|c| Some(c.gap_h.to_string())));
    out
}

/// Service-curve latencies of one class under each credit-bound family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub class: usize,
    /// bits/s, shared by every family
    pub slope: Rat,
    /// seconds
    pub latency_new: Rat,
    pub latency_j: Option<Rat>,
    pub latency_h: Rat,
    /// percent reduction of the improved latency relative to the J latency
    pub improvement_vs_j: Option<Rat>,
    pub improvement_vs_h: Rat,
    /// latency for an explicitly supplied credit bound
    pub latency_override: Option<Rat>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub rows: Vec<LatencyRow>,
}

impl LatencyReport {
    /// Rows for `classes` (all classes when empty). `credit_override`, when
    /// given, is additionally evaluated for every row.
    pub fn build(
        cfg: &ValidatedConfig,
        mode: JMode,
        classes: &[usize],
        credit_override: Option<&Rat>,
    ) -> Result<Self, BoundsError> {
        let report = full_report(cfg, mode);
        let wanted: Vec<usize> = if classes.is_empty() { (1..=cfg.p()).collect() } else { classes.to_vec() };
        let mut rows = Vec::with_capacity(wanted.len());
        for &i in &wanted {
            if i == 0 || i > cfg.p() {
                return Err(BoundsError::NoSuchClass(i));
            }
            let b = report.class(i);
            let new = service_curve(cfg, i, &b.v_max_new)?;
            let h = service_curve(cfg, i, &b.v_max_h)?;
            let j = match &b.v_max_j {
                Some(v) => Some(service_curve(cfg, i, v)?.latency),
                None => None,
            };
            let latency_override = match credit_override {
                Some(v) => Some(service_curve(cfg, i, v)?.latency),
                None => None,
            };
            rows.push(LatencyRow {
                class: i,
                slope: new.slope.clone(),
                improvement_vs_j: j.as_ref().map(|j| improvement_percent(&new.latency, j)),
                improvement_vs_h: improvement_percent(&new.latency, &h.latency),
                latency_new: new.latency,
                latency_j: j,
                latency_h: h.latency,
                latency_override,
            });
        }
        Ok(LatencyReport { rows })
    }

    /// Like [`LatencyReport::build`] but fails when J-bounds were requested
    /// and do not apply.
    pub fn build_requiring_j(
        cfg: &ValidatedConfig,
        mode: JMode,
        classes: &[usize],
        credit_override: Option<&Rat>,
    ) -> Result<Self, BoundsError> {
        let j = j_credit_bounds(cfg, mode)?;
        let wanted: Vec<usize> = if classes.is_empty() { (1..=cfg.p()).collect() } else { classes.to_vec() };
        if let Some(&i) = wanted.iter().find(|&&i| j.get(i).is_none()) {
            return Err(BoundsError::NoJBound(i));
        }
        Self::build(cfg, mode, &wanted, credit_override)
    }
}

fn us(x: &Rat) -> String {
    (x * Rat::int(MICRO)).to_decimal(2)
}

fn pct(x: &Rat) -> String {
    format!("{}%", x.to_decimal(1))
}

pub fn render_latency_table(report: &LatencyReport) -> String {
    let mut out = String::new();
    out.push_str("Service-curve latency per AVB class (microseconds)\n");
    let mut header =
        vec!["slope (Mb/s)".to_string(), "new".into(), "J".into(), "H".into(), "new vs J".into(), "new vs H".into()];
    let with_override = report.rows.iter().any(|r| r.latency_override.is_some());
    if with_override {
        header.push("given V".into());
    }
    push_row(&mut out, "class", &header);
    for r in &report.rows {
        let mut cells = vec![
            (&r.slope / Rat::int(MICRO)).to_decimal(4),
            us(&r.latency_new),
            r.latency_j.as_ref().map(us).unwrap_or_else(|| "-".into()),
            us(&r.latency_h),
            r.improvement_vs_j.as_ref().map(pct).unwrap_or_else(|| "-".into()),
            pct(&r.improvement_vs_h),
        ];
        if with_override {
            cells.push(r.latency_override.as_ref().map(us).unwrap_or_else(|| "-".into()));
        }
        push_row(&mut out, &r.class.to_string(), &cells);
    }
    out
}
