use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Seed;
use crate::model::{
    validate, ArrivalCurveAffine, AvbClassConfig, ClassId, GateSchedule, PortConfig, Rat, ValidatedConfig,
};
use crate::simulator::{PacketArrival, Scenario};

/// Sub-seed `index` of `base`, for campaigns that need many independent streams.
pub fn derive_seed(base: Seed, index: u64) -> Seed {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.next_u64()
}

fn frame_bits(rng: &mut ChaCha8Rng) -> Rat {
    Rat::int(rng.gen_range(64..=1522) * 8)
}

/// A valid port with `p` AVB classes: line rate 10, 100 or 1000 Mb/s,
/// integer-percent idle slopes summing to at most 95 %, whole-byte frames
/// of 64 to 1522 bytes, and an optional CDT curve. Gates are always open.
pub fn random_config(seed: Seed, p: usize) -> ValidatedConfig {
    assert!((1..=95).contains(&p), "p must be in 1..=95");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mbps = [10, 100, 1000][rng.gen_range(0..3)];
    let c = Rat::int(mbps * 1_000_000);

    let mut spare = 95 - p as i64;
    let mut percents: Vec<i64> = (0..p)
        .map(|_| {
            let extra = rng.gen_range(0..=spare.min(60));
            spare -= extra;
            1 + extra
        })
        .collect();
    percents.shuffle(&mut rng);

    let avb = percents
        .iter()
        .enumerate()
        .map(|(k, &pct)| {
            let idle = &c * Rat::ratio(pct, 100);
            AvbClassConfig { index: k + 1, send_slope: &idle - &c, idle_slope: idle, max_packet: frame_bits(&mut rng) }
        })
        .collect();
    let be_max_packet = frame_bits(&mut rng);

    let cdt_max_packet = frame_bits(&mut rng);
    let cdt_curve = match rng.gen_range(0..4) {
        0 => ArrivalCurveAffine { rate: Rat::zero(), burst: Rat::zero() },
        1 => ArrivalCurveAffine { rate: Rat::zero(), burst: &cdt_max_packet * Rat::int(2) },
        _ => ArrivalCurveAffine {
            rate: &c * Rat::ratio(rng.gen_range(1..=50), 1000),
            burst: &cdt_max_packet * Rat::int(rng.gen_range(1..=3)),
        },
    };

    let port = PortConfig { line_rate: c, cdt_curve, cdt_max_packet, avb, be_max_packet, gates: BTreeMap::new() };
    validate(port).expect("generated config is valid")
}

/// [`random_config`] with 1 to 5 AVB classes.
pub fn random_config_any(seed: Seed) -> ValidatedConfig {
    let p = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed).gen_range(1..=5);
    random_config(seed, p)
}

/// Random arrival times are whole picoseconds.
pub fn arrival_resolution() -> Rat {
    Rat::ratio(1, 1_000_000_000_000)
}

/// Random gate edges are whole multiples of two bit times. Whole-byte
/// frames and their halves and quarters last a whole number of these.
pub fn gate_quantum(cfg: &ValidatedConfig) -> Rat {
    Rat::int(2) / cfg.line_rate()
}

struct Grid {
    quantum: Rat,
    /// Number of grid points strictly before the horizon.
    points: u64,
}

impl Grid {
    fn time(&self, k: u64) -> Rat {
        Rat::int(k as i64) * &self.quantum
    }
}

fn random_length(rng: &mut ChaCha8Rng, max: &Rat) -> Rat {
    max * Rat::ratio(1, [1, 2, 4][rng.gen_range(0..3)])
}

/// Poisson-like arrivals at `load` bits per second with occasional bursts.
fn class_arrivals(
    rng: &mut ChaCha8Rng,
    grid: &Grid,
    class: ClassId,
    max: &Rat,
    load: f64,
    out: &mut Vec<PacketArrival>,
) {
    if load <= 0.0 {
        return;
    }
    let mean_bits = max.to_f64() * 7.0 / 12.0;
    let mean_gap = (mean_bits / load / grid.quantum.to_f64()).max(1.0) as u64;
    let mut k = rng.gen_range(0..=mean_gap);
    while k < grid.points {
        let count = if rng.gen_bool(0.15) { rng.gen_range(2..=6) } else { 1 };
        for _ in 0..count {
            let seq = rng.gen_range(0..3);
            out.push(PacketArrival::new(class, grid.time(k), random_length(rng, max)).with_seq(seq));
        }
        k += rng.gen_range(0..=2 * mean_gap * count);
    }
}

/// CDT candidates, greedily dropped whenever the token bucket `(r, b)` is short.
fn cdt_arrivals(rng: &mut ChaCha8Rng, grid: &Grid, cfg: &ValidatedConfig, out: &mut Vec<PacketArrival>) {
    let curve = &cfg.config().cdt_curve;
    let max = &cfg.config().cdt_max_packet;
    if curve.burst < max * Rat::ratio(1, 4) {
        return;
    }
    let offered = (curve.rate.to_f64() * rng.gen_range(1.0..3.0)).max(cfg.line_rate().to_f64() * 1e-4);
    let mut candidates = Vec::new();
    class_arrivals(rng, grid, ClassId::Cdt, max, offered, &mut candidates);
    let mut tokens = curve.burst.clone();
    let mut last = Rat::zero();
    for a in candidates {
        tokens = Rat::min_of(&curve.burst, &(&tokens + &curve.rate * (&a.time - &last)));
        last = a.time.clone();
        if tokens >= a.length {
            tokens -= &a.length;
            out.push(a);
        }
    }
}

/// One periodic schedule shared by all AVB and BE queues. CDT is either
/// always open or open exactly when the others are closed.
fn random_gates(rng: &mut ChaCha8Rng, cfg: &ValidatedConfig, quantum: &Rat) -> BTreeMap<ClassId, GateSchedule> {
    let mut gates = BTreeMap::new();
    if !rng.gen_bool(0.35) {
        return gates;
    }
    let frame_quanta = (&cfg.lengths().l_n / cfg.line_rate() / quantum).ceil().floor_i64().unwrap_or(1).max(1);
    let period_q = rng.gen_range(2 * frame_quanta..=8 * frame_quanta);
    let open_q = (period_q as f64 * rng.gen_range(0.4..0.9)) as i64;
    let period = Rat::int(period_q) * quantum;
    let open = Rat::int(open_q.max(1)) * quantum;
    let shared = GateSchedule::Periodic { period: period.clone(), intervals: vec![(Rat::zero(), open.clone())] };
    for i in 1..=cfg.p() {
        gates.insert(ClassId::Avb(i), shared.clone());
    }
    gates.insert(ClassId::Be, shared);
    if rng.gen_bool(0.5) {
        gates.insert(ClassId::Cdt, GateSchedule::Periodic { period: period.clone(), intervals: vec![(open, period)] });
    }
    gates
}

/// Seeded random traffic for every class, with arrivals on the
/// [`arrival_resolution`] grid and gate edges on the [`gate_quantum`] grid.
///
/// AVB classes are offered 0.3 to 1.6 times their idle slope, BE up to 0.8
/// of the remaining capacity, and lengths are drawn from `{L, L/2, L/4}`.
/// CDT arrivals respect the configured arrival curve.
pub fn random_scenario(cfg: &ValidatedConfig, seed: Seed, horizon: &Rat) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if !horizon.is_positive() {
        return Scenario::empty(horizon.clone());
    }
    let quantum = arrival_resolution();
    let points = (horizon / &quantum).ceil().floor_i64().expect("horizon fits the grid") as u64;
    let grid = Grid { quantum, points };
    let c = cfg.line_rate().to_f64();

    let mut arrivals = Vec::new();
    cdt_arrivals(&mut rng, &grid, cfg, &mut arrivals);
    let mut reserved = 0.0;
    for i in 1..=cfg.p() {
        let class = cfg.avb(i);
        let idle = class.idle_slope.to_f64();
        reserved += idle;
        let load = idle * rng.gen_range(0.3..1.6);
        class_arrivals(&mut rng, &grid, ClassId::Avb(i), &class.max_packet, load, &mut arrivals);
    }
    let be_load = (c - reserved) * rng.gen_range(0.0..0.8);
    class_arrivals(&mut rng, &grid, ClassId::Be, &cfg.config().be_max_packet, be_load, &mut arrivals);

    let gates = random_gates(&mut rng, cfg, &gate_quantum(cfg));
    Scenario::new(arrivals, gates, horizon.clone())
}
