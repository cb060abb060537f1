use std::collections::BTreeMap;

use super::ScenarioError;
use crate::model::{ClassId, Rat, ValidatedConfig};
use crate::simulator::{PacketArrival, Scenario};

/// Class below `class` whose maximum packet equals `Lbar_class`.
fn lower_class_with_lbar(cfg: &ValidatedConfig, class: usize) -> ClassId {
    let lbar = cfg.lbar(class);
    if cfg.config().be_max_packet == *lbar {
        return ClassId::Be;
    }
    (class + 1..=cfg.p())
        .find(|&k| cfg.avb(k).max_packet == *lbar)
        .map(ClassId::Avb)
        .expect("Lbar is the maximum packet of BE or of a lower AVB class")
}

/// Long enough for every packet to leave and every credit to settle, rounded
/// up to whole microseconds.
fn settle_horizon(cfg: &ValidatedConfig, arrivals: &[PacketArrival]) -> Rat {
    let c = cfg.line_rate();
    let mut total = arrivals.last().map(|a| a.time.clone()).unwrap_or_else(Rat::zero);
    for a in arrivals {
        total += &a.length / c;
        if let ClassId::Avb(i) = a.class {
            let class = cfg.avb(i);
            total += &a.length * (-&class.send_slope) / (c * &class.idle_slope);
        }
    }
    let us = Rat::int(1_000_000);
    ((total * &us).floor() + Rat::one()) / us
}

/// A lower-priority packet of length `Lbar_1` starts at t = 0; a single
/// class-1 packet of length `L_1` arrives at the same instant just after it.
/// Class 1 then peaks at `I_1 Lbar_1 / c`.
pub fn tightness_class1(cfg: &ValidatedConfig) -> Scenario {
    let arrivals = vec![
        PacketArrival::new(lower_class_with_lbar(cfg, 1), Rat::zero(), cfg.lbar(1).clone()),
        PacketArrival::new(ClassId::Avb(1), Rat::zero(), cfg.avb(1).max_packet.clone()).with_seq(1),
    ];
    let horizon = settle_horizon(cfg, &arrivals);
    Scenario::new(arrivals, BTreeMap::new(), horizon)
}

/// Class-1 packets after the `Lbar_2` blocking packet: enough to drain the
/// credit gained while blocked (`I_1 Lbar_2 / (c - I_1)` bits, the last
/// piece trimmed so the credit reaches 0 exactly) plus one full `L_1` packet.
pub fn class1_drain_lengths(cfg: &ValidatedConfig) -> Vec<Rat> {
    let c = cfg.line_rate();
    let i1 = &cfg.avb(1).idle_slope;
    let l1 = &cfg.avb(1).max_packet;
    let drain = i1 * cfg.lbar(2) / (c - i1);
    let full = (&drain / l1).floor();
    let remainder = &drain - &full * l1;
    let count = full.floor_i64().expect("packet count fits in i64");
    let mut lengths = vec![l1.clone(); count as usize];
    if remainder.is_positive() {
        lengths.push(remainder);
    }
    lengths.push(l1.clone());
    lengths
}

/// A lower-priority packet of length `Lbar_2` starts at t = 0 with a class-2
/// packet behind it and a class-1 burst arriving just after. Class 1 drains
/// the credit it gained, then sends one `L_1` packet starting at credit 0;
/// class 2 gains throughout and peaks at `V_2^max`.
pub fn tightness_class2(cfg: &ValidatedConfig) -> Result<Scenario, ScenarioError> {
    if cfg.p() < 2 {
        return Err(ScenarioError::InsufficientClasses { needed: 2, available: cfg.p() });
    }
    let mut arrivals = vec![
        PacketArrival::new(lower_class_with_lbar(cfg, 2), Rat::zero(), cfg.lbar(2).clone()),
        PacketArrival::new(ClassId::Avb(2), Rat::zero(), cfg.avb(2).max_packet.clone()).with_seq(1),
    ];
    arrivals.extend(
        class1_drain_lengths(cfg)
            .into_iter()
            .map(|len| PacketArrival::new(ClassId::Avb(1), Rat::zero(), len).with_seq(2)),
    );
    let horizon = settle_horizon(cfg, &arrivals);
    Ok(Scenario::new(arrivals, BTreeMap::new(), horizon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::new_credit_bounds;
    use crate::model::reference_config;
    use crate::simulator::{check_bounds, check_structure, simulate};

    #[test]
    fn reference_class1_reaches_6000() {
        let cfg = reference_config();
        let s = tightness_class1(&cfg);
        assert_eq!(s.arrivals[0].class, ClassId::Avb(2));
        let result = simulate(&cfg, &s).unwrap();
        assert_eq!(result.max_credit[0], Rat::int(6000));
        assert!(check_structure(&cfg, &result).is_empty());
        assert!(check_bounds(&cfg, &result).is_empty());
    }

    #[test]
    fn reference_class2_reaches_2640() {
        let cfg = reference_config();
        let s = tightness_class2(&cfg).unwrap();
        // I_1 = c / 2: the drain is exactly Lbar_2 = 8000 bits, five L_1 packets.
        assert_eq!(class1_drain_lengths(&cfg), vec![Rat::int(1600); 6]);
        assert_eq!(s.arrivals[0].class, ClassId::Be);
        let result = simulate(&cfg, &s).unwrap();
        assert_eq!(result.max_credit[1], Rat::int(2640));
        assert_eq!(result.max_credit[1], new_credit_bounds(&cfg)[1]);
        // Class 1 peaks at I_1 Lbar_2 / c while the BE packet is sent.
        assert_eq!(result.max_credit[0], Rat::int(4000));
        assert!(check_bounds(&cfg, &result).is_empty());
        assert!(result.departures.iter().all(|d| d.end <= s.horizon));
    }

    #[test]
    fn drain_with_remainder_piece() {
        let mut port = reference_config().into_inner();
        port.avb[0].max_packet = Rat::int(3000);
        let cfg = crate::model::validate(port).unwrap();
        // Drain 8000 = 2 * 3000 + 2000.
        let want: Vec<Rat> = [3000, 3000, 2000, 3000].iter().map(|&n| Rat::int(n)).collect();
        assert_eq!(class1_drain_lengths(&cfg), want);
        let result = simulate(&cfg, &tightness_class2(&cfg).unwrap()).unwrap();
        assert_eq!(result.max_credit[1], new_credit_bounds(&cfg)[1]);
        assert_eq!(result.min_credit[0], Rat::int(-1500));
    }

    #[test]
    fn single_class_uses_be() {
        let mut port = reference_config().into_inner();
        port.avb.truncate(1);
        let cfg = crate::model::validate(port).unwrap();
        let s = tightness_class1(&cfg);
        assert_eq!(s.arrivals[0].class, ClassId::Be);
        let result = simulate(&cfg, &s).unwrap();
        // I_1 L_BE / c = 50e6 * 8000 / 1e8
        assert_eq!(result.max_credit[0], Rat::int(4000));
        assert_eq!(tightness_class2(&cfg), Err(ScenarioError::InsufficientClasses { needed: 2, available: 1 }));
    }
}
