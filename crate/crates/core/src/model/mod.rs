//! Port configuration, exact numbers and validation.

mod config;
mod gate;
mod rat;
pub mod units;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{load_config, parse_config, ConfigFormat, LoadError, RawConfig};
pub use gate::GateSchedule;
pub use rat::{signum, ParseRatError, Rat};

/// Traffic class in decreasing priority: CDT, AVB 1..p, BE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassId {
    Cdt,
    /// 1-based AVB priority rank.
    Avb(usize),
    Be,
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassId::Cdt => write!(f, "cdt"),
            ClassId::Avb(i) => write!(f, "avb{i}"),
            ClassId::Be => write!(f, "be"),
        }
    }
}

impl FromStr for ClassId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "cdt" => Ok(ClassId::Cdt),
            "be" => Ok(ClassId::Be),
            _ => t
                .strip_prefix("avb")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n >= 1)
                .map(ClassId::Avb)
                .ok_or_else(|| format!("unknown class `{s}` (expected cdt, avbN or be)")),
        }
    }
}

impl Serialize for ClassId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClassId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvbClassConfig {
    pub index: usize,
    pub idle_slope: Rat,
    pub send_slope: Rat,
    pub max_packet: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalCurveAffine {
    pub rate: Rat,
    pub burst: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortConfig {
    pub line_rate: Rat,
    pub cdt_curve: ArrivalCurveAffine,
    pub cdt_max_packet: Rat,
    pub avb: Vec<AvbClassConfig>,
    pub be_max_packet: Rat,
    /// Classes without an entry are always open.
    pub gates: BTreeMap<ClassId, GateSchedule>,
}

impl PortConfig {
    pub fn gate(&self, class: ClassId) -> GateSchedule {
        self.gates.get(&class).cloned().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedLengths {
    /// `lbar[i - 1]` is max(L_BE, max packet of the AVB classes below i).
    pub lbar: Vec<Rat>,
    /// Largest packet among all non-CDT classes.
    pub l_n: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigErrorKind {
    NonPositiveRate,
    NonPositiveLength,
    NegativeCurveParameter,
    CdtRateExceedsLine,
    SlopeSumMismatch,
    IdleSlopeOverbooked,
    EmptyAvbList,
    BadGateSchedule,
    UnknownClass,
    Parse,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {kind:?}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub kind: ConfigErrorKind,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, kind: ConfigErrorKind, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), kind, message: message.into() }
    }
}

/// A [`PortConfig`] that passed [`validate`], together with its derived lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedConfig {
    config: PortConfig,
    lengths: DerivedLengths,
}

impl ValidatedConfig {
    pub fn config(&self) -> &PortConfig {
        &self.config
    }

    pub fn lengths(&self) -> &DerivedLengths {
        &self.lengths
    }

    pub fn line_rate(&self) -> &Rat {
        &self.config.line_rate
    }

    /// Number of AVB classes.
    pub fn p(&self) -> usize {
        self.config.avb.len()
    }

    /// AVB class by 1-based index.
    pub fn avb(&self, i: usize) -> &AvbClassConfig {
        &self.config.avb[i - 1]
    }

    pub fn lbar(&self, i: usize) -> &Rat {
        &self.lengths.lbar[i - 1]
    }

    /// Maximum packet length of any class.
    pub fn max_packet(&self, class: ClassId) -> Option<&Rat> {
        match class {
            ClassId::Cdt => Some(&self.config.cdt_max_packet),
            ClassId::Avb(i) if (1..=self.p()).contains(&i) => Some(&self.avb(i).max_packet),
            ClassId::Avb(_) => None,
            ClassId::Be => Some(&self.config.be_max_packet),
        }
    }

    pub fn into_inner(self) -> PortConfig {
        self.config
    }
}

pub fn validate(config: PortConfig) -> Result<ValidatedConfig, Vec<ConfigError>> {
    use ConfigErrorKind::*;
    let mut errors = Vec::new();
    let c = &config.line_rate;
    let line_ok = c.is_positive();
    if !line_ok {
        errors.push(ConfigError::new("line_rate", NonPositiveRate, format!("must be > 0, got {c}")));
    }
    let curve = &config.cdt_curve;
    if curve.rate.is_negative() {
        errors.push(ConfigError::new("cdt_curve.rate", NegativeCurveParameter, "must be >= 0"));
    }
    if curve.burst.is_negative() {
        errors.push(ConfigError::new("cdt_curve.burst", NegativeCurveParameter, "must be >= 0"));
    }
    if line_ok && curve.rate >= *c {
        errors.push(ConfigError::new(
            "cdt_curve.rate",
            CdtRateExceedsLine,
            format!("{} must be below the line rate {c}", curve.rate),
        ));
    }
    if !config.cdt_max_packet.is_positive() {
        errors.push(ConfigError::new("cdt_max_packet", NonPositiveLength, "must be > 0"));
    }
    if !config.be_max_packet.is_positive() {
        errors.push(ConfigError::new("be_max_packet", NonPositiveLength, "must be > 0"));
    }
    if config.avb.is_empty() {
        errors.push(ConfigError::new("avb", EmptyAvbList, "at least one AVB class is required"));
    }
    for (k, class) in config.avb.iter().enumerate() {
        let path = format!("avb[{k}]");
        if class.index != k + 1 {
            errors.push(ConfigError::new(
                format!("{path}.index"),
                UnknownClass,
                format!("expected index {}, got {}", k + 1, class.index),
            ));
        }
        if !class.idle_slope.is_positive() {
            errors.push(ConfigError::new(format!("{path}.idle_slope"), NonPositiveRate, "must be > 0"));
        }
        if !class.send_slope.is_negative() {
            errors.push(ConfigError::new(format!("{path}.send_slope"), NonPositiveRate, "must be < 0"));
        }
        if line_ok && &class.idle_slope - &class.send_slope != *c {
            errors.push(ConfigError::new(
                format!("{path}.send_slope"),
                SlopeSumMismatch,
                format!("idle_slope - send_slope = {} but line_rate = {c}", &class.idle_slope - &class.send_slope),
            ));
        }
        if !class.max_packet.is_positive() {
            errors.push(ConfigError::new(format!("{path}.max_packet"), NonPositiveLength, "must be > 0"));
        }
    }
    let total: Rat = config.avb.iter().map(|a| &a.idle_slope).sum();
    if line_ok && !config.avb.is_empty() && total >= *c {
        errors.push(ConfigError::new(
            "avb",
            IdleSlopeOverbooked,
            format!("sum of idle slopes {total} must be below the line rate {c}"),
        ));
    }
    for (class, gate) in &config.gates {
        if let ClassId::Avb(i) = class {
            if *i > config.avb.len() {
                errors.push(ConfigError::new(format!("gates.{class}"), UnknownClass, format!("no AVB class {i}")));
            }
        }
        if let Err(msg) = gate.check() {
            errors.push(ConfigError::new(format!("gates.{class}"), BadGateSchedule, msg));
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let lengths = derive_lengths(&config);
    Ok(ValidatedConfig { config, lengths })
}

/// `Lbar_i` for every class and `L_N`.
pub fn derive_lengths(config: &PortConfig) -> DerivedLengths {
    let p = config.avb.len();
    let mut lbar = vec![config.be_max_packet.clone(); p];
    // Running max from the lowest AVB class upwards.
    let mut below = config.be_max_packet.clone();
    for i in (0..p).rev() {
        lbar[i] = below.clone();
        below = Rat::max_of(&below, &config.avb[i].max_packet);
    }
    DerivedLengths { lbar, l_n: below }
}

/// The evaluation port: c = 100 Mb/s, idle slopes 50/15/10 % of c, AVB
/// packets 0.2/1.5/0.5 KB, BE packets 1 KB, CDT affine curve r = 12.8 Kb/s,
/// b = 1.6 Kb.
pub fn reference_config() -> ValidatedConfig {
    let c = Rat::int(100_000_000);
    let avb = [(50, 1600), (15, 12000), (10, 4000)]
        .iter()
        .enumerate()
        .map(|(k, &(pct, len))| {
            let idle = &c * Rat::ratio(pct, 100);
            AvbClassConfig { index: k + 1, send_slope: &idle - &c, idle_slope: idle, max_packet: Rat::int(len) }
        })
        .collect();
    let config = PortConfig {
        line_rate: c,
        cdt_curve: ArrivalCurveAffine { rate: Rat::int(12_800), burst: Rat::int(1600) },
        cdt_max_packet: Rat::int(1600),
        avb,
        be_max_packet: Rat::int(8000),
        gates: BTreeMap::new(),
    };
    validate(config).expect("reference config is valid")
}
