//! Engineering-unit literals normalized exactly to bits, seconds and bits/s.
//!
//! Decimal prefixes are powers of 1000. `B` is an octet, so `1.5KB` is 12000
//! bits while `1.5Kb` is 1500 bits.

use super::rat::Rat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Bits,
    Rate,
    Time,
}

impl Dimension {
    fn name(self) -> &'static str {
        match self {
            Dimension::Bits => "length",
            Dimension::Rate => "rate",
            Dimension::Time => "time",
        }
    }
}

const BIT_UNITS: &[(&str, i64, i64)] = &[
    ("bits", 1, 1),
    ("bit", 1, 1),
    ("bytes", 8, 1),
    ("byte", 8, 1),
    ("Kbit", 1_000, 1),
    ("Mbit", 1_000_000, 1),
    ("Kb", 1_000, 1),
    ("kb", 1_000, 1),
    ("Mb", 1_000_000, 1),
    ("Gb", 1_000_000_000, 1),
    ("KB", 8_000, 1),
    ("kB", 8_000, 1),
    ("MB", 8_000_000, 1),
    ("b", 1, 1),
    ("B", 8, 1),
];

const RATE_UNITS: &[(&str, i64, i64)] = &[
    ("Kbps", 1_000, 1),
    ("kbps", 1_000, 1),
    ("Mbps", 1_000_000, 1),
    ("Gbps", 1_000_000_000, 1),
    ("Kb/s", 1_000, 1),
    ("kb/s", 1_000, 1),
    ("Mb/s", 1_000_000, 1),
    ("Gb/s", 1_000_000_000, 1),
    ("bps", 1, 1),
    ("b/s", 1, 1),
];

const TIME_UNITS: &[(&str, i64, i64)] = &[
    ("ms", 1, 1_000),
    ("us", 1, 1_000_000),
    ("µs", 1, 1_000_000),
    ("μs", 1, 1_000_000),
    ("ns", 1, 1_000_000_000),
    ("s", 1, 1),
];

/// Parses `"1.5KB"`, `"100 Mbps"`, `"38000/7"`, `"250us"`. A bare number is
/// taken in base units.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<Rat, String> {
    let t = text.trim();
    let table = match dim {
        Dimension::Bits => BIT_UNITS,
        Dimension::Rate => RATE_UNITS,
        Dimension::Time => TIME_UNITS,
    };
    for (suffix, num, den) in table {
        if let Some(number) = t.strip_suffix(suffix) {
            let number = number.trim_end();
            if number.is_empty() {
                continue;
            }
            return number
                .parse::<Rat>()
                .map(|x| x * Rat::ratio(*num, *den))
                .map_err(|_| format!("cannot parse {} `{t}`", dim.name()));
        }
    }
    t.parse::<Rat>().map_err(|_| format!("cannot parse {} `{t}` (unknown unit?)", dim.name()))
}

/// Like [`parse_quantity`] for rates, additionally accepting `"15%"` of
/// `reference`.
pub fn parse_rate_or_percent(text: &str, reference: Option<&Rat>) -> Result<Rat, String> {
    let t = text.trim();
    if let Some(pct) = t.strip_suffix('%') {
        let reference = reference.ok_or_else(|| format!("`{t}` needs a valid line rate"))?;
        let pct: Rat = pct.trim_end().parse().map_err(|_| format!("cannot parse percentage `{t}`"))?;
        return Ok(pct * reference / Rat::int(100));
    }
    parse_quantity(t, Dimension::Rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths() {
        assert_eq!(parse_quantity("0.2KB", Dimension::Bits).unwrap(), Rat::int(1600));
        assert_eq!(parse_quantity("1.5KB", Dimension::Bits).unwrap(), Rat::int(12000));
        assert_eq!(parse_quantity("1.6Kb", Dimension::Bits).unwrap(), Rat::int(1600));
        assert_eq!(parse_quantity("1500 B", Dimension::Bits).unwrap(), Rat::int(12000));
        assert_eq!(parse_quantity("38000/7", Dimension::Bits).unwrap(), Rat::ratio(38000, 7));
        assert_eq!(parse_quantity("12 bits", Dimension::Bits).unwrap(), Rat::int(12));
    }

    #[test]
    fn rates_and_times() {
        assert_eq!(parse_quantity("100Mbps", Dimension::Rate).unwrap(), Rat::int(100_000_000));
        assert_eq!(parse_quantity("12.8Kbps", Dimension::Rate).unwrap(), Rat::int(12_800));
        assert_eq!(parse_quantity("-85 Mb/s", Dimension::Rate).unwrap(), Rat::int(-85_000_000));
        assert_eq!(parse_quantity("250us", Dimension::Time).unwrap(), Rat::ratio(1, 4000));
        assert_eq!(parse_quantity("10ms", Dimension::Time).unwrap(), Rat::ratio(1, 100));
        assert_eq!(parse_quantity("2", Dimension::Time).unwrap(), Rat::int(2));
    }

    #[test]
    fn percent_of_line_rate() {
        let c = Rat::int(100_000_000);
        assert_eq!(parse_rate_or_percent("15%", Some(&c)).unwrap(), Rat::int(15_000_000));
        assert!(parse_rate_or_percent("15%", None).is_err());
    }

    #[test]
    fn rejects_wrong_dimension() {
        assert!(parse_quantity("10ms", Dimension::Bits).is_err());
        assert!(parse_quantity("Mbps", Dimension::Rate).is_err());
    }
}
