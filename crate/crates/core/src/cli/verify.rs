use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{credit_lower_bounds, new_credit_bounds};
use crate::model::{Rat, ValidatedConfig};
use crate::scenarios::{derive_seed, minimize, random_scenario, tightness_class1, tightness_class2, Seed};
use crate::simulator::{
    check_bounds, check_structure, check_work_conservation, simulate, Scenario, Violation, ViolationKind,
};

const SCENARIO_STREAM: u64 = 0x5ce9_a210;

/// One config of a campaign together with the seed it was drawn from.
pub struct CampaignConfig {
    pub config: ValidatedConfig,
    pub seed: Option<Seed>,
}

/// Seed of scenario `index` run against a config drawn from `config_seed`.
pub fn scenario_seed(config_seed: Seed, index: u64) -> Seed {
    derive_seed(config_seed ^ SCENARIO_STREAM, index)
}

/// Default campaign horizon: 200 maximum-size frames.
pub fn default_horizon(cfg: &ValidatedConfig) -> Rat {
    &cfg.lengths().l_n / cfg.line_rate() * Rat::int(200)
}

fn sim_error(e: impl std::fmt::Display) -> Violation {
    Violation {
        kind: ViolationKind::Structure,
        class: 0,
        time: Rat::zero(),
        value: Rat::zero(),
        bound: Rat::zero(),
        detail: format!("simulation rejected a generated scenario: {e}"),
    }
}

/// Credit extrema of one run and every violation found in it.
pub struct RunOutcome {
    pub max: Vec<Rat>,
    pub min: Vec<Rat>,
    pub violations: Vec<Violation>,
}

pub fn run_checked(cfg: &ValidatedConfig, scenario: &Scenario) -> RunOutcome {
    match simulate(cfg, scenario) {
        Ok(result) => {
            let mut violations = check_bounds(cfg, &result);
            violations.extend(check_structure(cfg, &result));
            violations.extend(check_work_conservation(cfg, scenario, &result));
            RunOutcome { max: result.max_credit, min: result.min_credit, violations }
        }
        Err(e) => RunOutcome {
            max: vec![Rat::zero(); cfg.p()],
            min: vec![Rat::zero(); cfg.p()],
            violations: vec![sim_error(e)],
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassExtremum {
    pub class: usize,
    pub max_credit: Rat,
    pub bound: Rat,
    pub min_credit: Rat,
    pub lower_bound: Rat,
    /// Whether the tightness construction hit the bound exactly; `None` for
    /// classes without one.
    pub tight: Option<bool>,
}

impl ClassExtremum {
    pub fn fraction(&self) -> Rat {
        if self.bound.is_zero() {
            Rat::one()
        } else {
            &self.max_credit / &self.bound
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigOutcome {
    pub index: usize,
    pub seed: Option<Seed>,
    pub p: usize,
    pub line_rate: Rat,
    pub horizon: Rat,
    pub violations: usize,
    pub classes: Vec<ClassExtremum>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirstViolation {
    pub config: usize,
    /// `None` when a tightness construction failed.
    pub scenario: Option<u64>,
    pub scenario_seed: Option<Seed>,
    pub violation: Violation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: Seed,
    pub scenarios_per_config: u64,
    pub total_violations: usize,
    pub configs: Vec<ConfigOutcome>,
    pub first_violation: Option<FirstViolation>,
}

/// Tightness constructions available for `cfg`, keyed by class.
fn tightness_runs(cfg: &ValidatedConfig) -> Vec<(usize, Scenario)> {
    let mut runs = vec![(1, tightness_class1(cfg))];
    if let Ok(s) = tightness_class2(cfg) {
        runs.push((2, s));
    }
    runs
}

/// Everything needed to rebuild a failing input.
pub struct Failure {
    pub config: usize,
    pub scenario: Scenario,
}

/// Runs the campaign. Scenario runs are spread over the current rayon pool;
/// results are merged in (config, scenario) order so the report does not
/// depend on the number of threads.
pub fn run_campaign(
    configs: &[CampaignConfig],
    scenarios: u64,
    seed: Seed,
    horizon: Option<&Rat>,
) -> (VerifyReport, Option<Failure>) {
    let horizons: Vec<Rat> =
        configs.iter().map(|c| horizon.cloned().unwrap_or_else(|| default_horizon(&c.config))).collect();
    let jobs: Vec<(usize, u64)> = (0..configs.len()).flat_map(|k| (0..scenarios).map(move |j| (k, j))).collect();
    let outcomes: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|&(k, j)| {
            let c = &configs[k];
            let s = random_scenario(&c.config, scenario_seed(c.seed.unwrap_or(seed), j), &horizons[k]);
            run_checked(&c.config, &s)
        })
        .collect();

    let mut report = VerifyReport {
        seed,
        scenarios_per_config: scenarios,
        total_violations: 0,
        configs: Vec::with_capacity(configs.len()),
        first_violation: None,
    };
    let mut failure = None;
    let mut record = |report: &mut VerifyReport, first: FirstViolation, scenario: Scenario| {
        if report.first_violation.is_none() {
            failure = Some(Failure { config: first.config, scenario });
            report.first_violation = Some(first);
        }
    };

    let mut runs = outcomes.into_iter();
    for (k, c) in configs.iter().enumerate() {
        let cfg = &c.config;
        let upper = new_credit_bounds(cfg);
        let lower = credit_lower_bounds(cfg);
        let mut max = vec![Rat::zero(); cfg.p()];
        let mut min = vec![Rat::zero(); cfg.p()];
        let mut tight = vec![None; cfg.p()];
        let mut violations = 0;
        for j in 0..scenarios {
            let run = runs.next().expect("one outcome per job");
            for i in 0..cfg.p() {
                max[i] = Rat::max_of(&max[i], &run.max[i]);
                min[i] = Rat::min_of(&min[i], &run.min[i]);
            }
            violations += run.violations.len();
            if let Some(v) = run.violations.into_iter().next() {
                let s_seed = scenario_seed(c.seed.unwrap_or(seed), j);
                let first = FirstViolation { config: k, scenario: Some(j), scenario_seed: Some(s_seed), violation: v };
                record(&mut report, first, random_scenario(cfg, s_seed, &horizons[k]));
            }
        }
        for (class, scenario) in tightness_runs(cfg) {
            let run = run_checked(cfg, &scenario);
            let i = class - 1;
            max[i] = Rat::max_of(&max[i], &run.max[i]);
            min[i] = Rat::min_of(&min[i], &run.min[i]);
            let hit = run.max[i] == upper[i];
            tight[i] = Some(hit);
            let mut found = run.violations;
            if !hit {
                found.push(Violation {
                    kind: ViolationKind::Tightness,
                    class,
                    time: Rat::zero(),
                    value: run.max[i].clone(),
                    bound: upper[i].clone(),
                    detail: format!("tightness construction for class {class} missed the bound"),
                });
            }
            violations += found.len();
            if let Some(v) = found.into_iter().next() {
                let first = FirstViolation { config: k, scenario: None, scenario_seed: None, violation: v };
                record(&mut report, first, scenario);
            }
        }
        report.total_violations += violations;
        report.configs.push(ConfigOutcome {
            index: k,
            seed: c.seed,
            p: cfg.p(),
            line_rate: cfg.line_rate().clone(),
            horizon: horizons[k].clone(),
            violations,
            classes: (0..cfg.p())
                .map(|i| ClassExtremum {
                    class: i + 1,
                    max_credit: max[i].clone(),
                    bound: upper[i].clone(),
                    min_credit: min[i].clone(),
                    lower_bound: lower[i].clone(),
                    tight: tight[i],
                })
                .collect(),
        });
    }
    (report, failure)
}

/// Smallest subset of the failing scenario's arrivals that still fails.
pub fn minimize_failure(scenario: &Scenario, fails: impl Fn(&Scenario) -> bool) -> Scenario {
    let with = |arrivals: &[_]| Scenario::new(arrivals.to_vec(), scenario.gates.clone(), scenario.horizon.clone());
    let kept = minimize(scenario.arrivals.clone(), |subset| fails(&with(subset)));
    with(&kept)
}

pub fn still_violates(cfg: &ValidatedConfig) -> impl Fn(&Scenario) -> bool + '_ {
    move |s| !run_checked(cfg, s).violations.is_empty()
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} config(s) x {} random scenario(s), seed {}",
            self.configs.len(),
            self.scenarios_per_config,
            self.seed
        );
        let _ = writeln!(out, "violations: {}", self.total_violations);
        let _ = writeln!(
            out,
            "{:<7} {:>20} {:>3} {:>12} {:>14} {:>10}",
            "config", "seed", "p", "rate (Mb/s)", "horizon (s)", "violations"
        );
        for c in &self.configs {
            let seed = c.seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<7} {:>20} {:>3} {:>12} {:>14} {:>10}",
                c.index,
                seed,
                c.p,
                (&c.line_rate / Rat::int(1_000_000)).to_decimal(0),
                c.horizon.to_decimal(9),
                c.violations
            );
        }

        out.push_str("\nLargest observed credit as a fraction of the improved bound\n");
        let _ = writeln!(out, "{:<6} {:>10} {:>10} {:>10}", "class", "max", "mean", "tightness");
        let p = self.configs.iter().map(|c| c.p).max().unwrap_or(0);
        for i in 1..=p {
            let rows: Vec<&ClassExtremum> = self.configs.iter().filter_map(|c| c.classes.get(i - 1)).collect();
            let fractions: Vec<Rat> = rows.iter().map(|r| r.fraction()).collect();
            let max = fractions.iter().fold(Rat::zero(), |a, b| Rat::max_of(&a, b));
            let mean = fractions.iter().sum::<Rat>() / Rat::int(fractions.len() as i64);
            let checked = rows.iter().filter(|r| r.tight.is_some()).count();
            let hit = rows.iter().filter(|r| r.tight == Some(true)).count();
            let tight = if checked == 0 { "-".to_string() } else { format!("{hit}/{checked}") };
            let _ = writeln!(
                out,
                "{:<6} {:>9}% {:>9}% {:>10}",
                i,
                (max * Rat::int(100)).to_decimal(2),
                (mean * Rat::int(100)).to_decimal(2),
                tight
            );
        }
        if let Some(f) = &self.first_violation {
            let which = match f.scenario {
                Some(j) => format!("scenario {j}"),
                None => "tightness construction".to_string(),
            };
            let _ = writeln!(out, "\nfirst violation: config {}, {}: {}", f.config, which, f.violation);
        }
        out
    }
}
