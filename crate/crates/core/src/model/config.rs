//! Config files: TOML or JSON with the same field names.
//!
//! ```toml
//! line_rate = "100Mbps"
//! be_max_packet = "1KB"
//! cdt_max_packet = "1.6Kb"
//!
//! [cdt_curve]
//! rate = "12.8Kbps"
//! burst = "1.6Kb"
//!
//! [[avb]]
//! idle_slope = "50%"        # of line_rate; send_slope defaults to idle_slope - line_rate
//! max_packet = "0.2KB"
//!
//! [gates.be]
//! period = "1ms"
//! open = [["0", "500us"]]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::units::{parse_quantity, parse_rate_or_percent, Dimension};
use super::{
    validate, ArrivalCurveAffine, AvbClassConfig, ClassId, ConfigError, ConfigErrorKind, GateSchedule, PortConfig, Rat,
    ValidatedConfig,
};

/// A number as written in a config file: integer, float (read back through
/// its shortest decimal form) or a string with an optional unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Quantity {
    fn text(&self) -> String {
        match self {
            Quantity::Int(n) => n.to_string(),
            Quantity::Float(x) => format!("{x}"),
            Quantity::Text(s) => s.clone(),
        }
    }

    fn exact(x: &Rat) -> Self {
        Quantity::Text(x.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCurve {
    pub rate: Quantity,
    pub burst: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAvb {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub idle_slope: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub send_slope: Option<Quantity>,
    pub max_packet: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawGate {
    /// `"always_open"` or `"always_closed"`.
    Keyword(String),
    Periodic {
        period: Quantity,
        #[serde(default)]
        open: Vec<(Quantity, Quantity)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub line_rate: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cdt_curve: Option<RawCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cdt_max_packet: Option<Quantity>,
    pub avb: Vec<RawAvb>,
    pub be_max_packet: Quantity,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub gates: BTreeMap<String, RawGate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigFormat {
    Toml,
    Json,
}

impl ConfigFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => ConfigFormat::Json,
            _ => ConfigFormat::Toml,
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config ({} error(s))", .0.len())]
    Invalid(Vec<ConfigError>),
}

struct Collector {
    errors: Vec<ConfigError>,
}

impl Collector {
    fn get(&mut self, path: &str, q: &Quantity, dim: Dimension) -> Rat {
        match parse_quantity(&q.text(), dim) {
            Ok(x) => x,
            Err(msg) => {
                self.errors.push(ConfigError::new(path, ConfigErrorKind::Parse, msg));
                Rat::zero()
            }
        }
    }
}

impl RawConfig {
    pub fn into_port_config(self) -> Result<PortConfig, Vec<ConfigError>> {
        let mut col = Collector { errors: Vec::new() };
        let line_rate = col.get("line_rate", &self.line_rate, Dimension::Rate);
        let line_ok = col.errors.is_empty();
        let cdt_curve = match &self.cdt_curve {
            Some(curve) => ArrivalCurveAffine {
                rate: col.get("cdt_curve.rate", &curve.rate, Dimension::Rate),
                burst: col.get("cdt_curve.burst", &curve.burst, Dimension::Bits),
            },
            None => ArrivalCurveAffine { rate: Rat::zero(), burst: Rat::zero() },
        };
        let be_max_packet = col.get("be_max_packet", &self.be_max_packet, Dimension::Bits);
        let cdt_max_packet = match &self.cdt_max_packet {
            Some(q) => col.get("cdt_max_packet", q, Dimension::Bits),
            None if cdt_curve.burst.is_positive() => cdt_curve.burst.clone(),
            None => be_max_packet.clone(),
        };
        let mut avb = Vec::with_capacity(self.avb.len());
        for (k, raw) in self.avb.iter().enumerate() {
            let path = format!("avb[{k}]");
            let idle_slope = match parse_rate_or_percent(&raw.idle_slope.text(), line_ok.then_some(&line_rate)) {
                Ok(x) => x,
                Err(msg) => {
                    col.errors.push(ConfigError::new(format!("{path}.idle_slope"), ConfigErrorKind::Parse, msg));
                    Rat::zero()
                }
            };
            let send_slope = match &raw.send_slope {
                Some(q) => col.get(&format!("{path}.send_slope"), q, Dimension::Rate),
                None => &idle_slope - &line_rate,
            };
            let max_packet = col.get(&format!("{path}.max_packet"), &raw.max_packet, Dimension::Bits);
            avb.push(AvbClassConfig { index: raw.index.unwrap_or(k + 1), idle_slope, send_slope, max_packet });
        }
        let mut gates = BTreeMap::new();
        for (name, raw) in &self.gates {
            let path = format!("gates.{name}");
            let class = match name.parse::<ClassId>() {
                Ok(c) => c,
                Err(msg) => {
                    col.errors.push(ConfigError::new(&path, ConfigErrorKind::UnknownClass, msg));
                    continue;
                }
            };
            let gate = match raw {
                RawGate::Keyword(k) if k == "always_open" => GateSchedule::AlwaysOpen,
                RawGate::Keyword(k) if k == "always_closed" => {
                    GateSchedule::Periodic { period: Rat::one(), intervals: Vec::new() }
                }
                RawGate::Keyword(k) => {
                    col.errors.push(ConfigError::new(
                        &path,
                        ConfigErrorKind::BadGateSchedule,
                        format!("unknown gate keyword `{k}`"),
                    ));
                    continue;
                }
                RawGate::Periodic { period, open } => GateSchedule::Periodic {
                    period: col.get(&format!("{path}.period"), period, Dimension::Time),
                    intervals: open
                        .iter()
                        .enumerate()
                        .map(|(w, (s, e))| {
                            (
                                col.get(&format!("{path}.open[{w}][0]"), s, Dimension::Time),
                                col.get(&format!("{path}.open[{w}][1]"), e, Dimension::Time),
                            )
                        })
                        .collect(),
                },
            };
            gates.insert(class, gate);
        }
        if col.errors.is_empty() {
            Ok(PortConfig { line_rate, cdt_curve, cdt_max_packet, avb, be_max_packet, gates })
        } else {
            Err(col.errors)
        }
    }
}

impl PortConfig {
    /// Config-file representation in exact base units.
    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            line_rate: Quantity::exact(&self.line_rate),
            cdt_curve: Some(RawCurve {
                rate: Quantity::exact(&self.cdt_curve.rate),
                burst: Quantity::exact(&self.cdt_curve.burst),
            }),
            cdt_max_packet: Some(Quantity::exact(&self.cdt_max_packet)),
            avb: self
                .avb
                .iter()
                .map(|a| RawAvb {
                    index: Some(a.index),
                    idle_slope: Quantity::exact(&a.idle_slope),
                    send_slope: Some(Quantity::exact(&a.send_slope)),
                    max_packet: Quantity::exact(&a.max_packet),
                })
                .collect(),
            be_max_packet: Quantity::exact(&self.be_max_packet),
            gates: self.gates.iter().map(|(class, gate)| (class.to_string(), raw_gate(gate))).collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_raw()).expect("config serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("config serializes")
    }
}

pub(crate) fn raw_gate(gate: &GateSchedule) -> RawGate {
    match gate {
        GateSchedule::AlwaysOpen => RawGate::Keyword("always_open".into()),
        GateSchedule::Periodic { period, intervals } => RawGate::Periodic {
            period: Quantity::exact(period),
            open: intervals.iter().map(|(s, e)| (Quantity::exact(s), Quantity::exact(e))).collect(),
        },
    }
}

pub fn parse_config(text: &str, format: ConfigFormat) -> Result<ValidatedConfig, Vec<ConfigError>> {
    let raw: RawConfig = match format {
        ConfigFormat::Toml => toml::from_str(text)
            .map_err(|e| vec![ConfigError::new("<toml>", ConfigErrorKind::Parse, e.to_string().trim().to_string())])?,
        ConfigFormat::Json => serde_json::from_str(text)
            .map_err(|e| vec![ConfigError::new("<json>", ConfigErrorKind::Parse, e.to_string())])?,
    };
    validate(raw.into_port_config()?)
}

pub fn load_config(path: &Path) -> Result<ValidatedConfig, LoadError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    parse_config(&text, ConfigFormat::from_path(path)).map_err(LoadError::Invalid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_config;

    const REFERENCE_TOML: &str = r#"
line_rate = "100Mbps"
be_max_packet = "1KB"
cdt_max_packet = "1.6Kb"

[cdt_curve]
rate = "12.8Kbps"
burst = "1.6Kb"

[[avb]]
idle_slope = "50%"
max_packet = "0.2KB"

[[avb]]
idle_slope = "15Mbps"
send_slope = "-85Mbps"
max_packet = "1.5KB"

[[avb]]
idle_slope = 10000000
max_packet = 4000
"#;

    #[test]
    fn reference_from_toml() {
        let cfg = parse_config(REFERENCE_TOML, ConfigFormat::Toml).unwrap();
        assert_eq!(cfg, reference_config());
    }

    #[test]
    fn json_and_toml_are_interchangeable() {
        let cfg = reference_config();
        let from_json = parse_config(&cfg.config().to_json(), ConfigFormat::Json).unwrap();
        let from_toml = parse_config(&cfg.config().to_toml(), ConfigFormat::Toml).unwrap();
        assert_eq!(from_json, cfg);
        assert_eq!(from_toml, cfg);
    }

    #[test]
    fn float_literals_are_read_exactly() {
        let text = REFERENCE_TOML.replace("max_packet = 4000", "max_packet = 0.5e4");
        let cfg = parse_config(&text, ConfigFormat::Toml).unwrap();
        assert_eq!(cfg.avb(3).max_packet, Rat::int(5000));
    }

    #[test]
    fn gates_round_trip() {
        let text = format!(
            "{REFERENCE_TOML}\n[gates]\navb2 = \"always_closed\"\n\n[gates.be]\nperiod = \"1ms\"\nopen = [[\"0\", \"500us\"]]\n"
        );
        let parsed = parse_config(&text, ConfigFormat::Toml).unwrap();
        assert!(!parsed.config().gate(ClassId::Avb(2)).is_open(&Rat::zero()));
        assert!(!parsed.config().gate(ClassId::Be).is_open(&Rat::ratio(1, 2000)));

        let mut port = reference_config().into_inner();
        port.gates.insert(
            ClassId::Be,
            GateSchedule::Periodic { period: Rat::ratio(1, 1000), intervals: vec![(Rat::zero(), Rat::ratio(1, 2000))] },
        );
        let cfg = validate(port).unwrap();
        let back = parse_config(&cfg.config().to_toml(), ConfigFormat::Toml).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn parse_errors_carry_paths() {
        let text = REFERENCE_TOML.replace("\"15Mbps\"", "\"fifteen\"");
        let errs = parse_config(&text, ConfigFormat::Toml).unwrap_err();
        assert_eq!(errs[0].path, "avb[1].idle_slope");
        assert_eq!(errs[0].kind, ConfigErrorKind::Parse);
    }

    #[test]
    fn slope_mismatch_from_file() {
        let text = REFERENCE_TOML.replace("\"-85Mbps\"", "\"-80Mbps\"");
        let errs = parse_config(&text, ConfigFormat::Toml).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].kind, ConfigErrorKind::SlopeSumMismatch);
    }
}
