//! Acceptance suite: one PASS/FAIL line per criterion with the checks that
//! feed it indented below. Exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use convshare::validation::{
    check_diagonalization, check_exponential_law, check_figures, check_frequency_equivalence, check_consistency_law, check_monotonicity,
    check_noise_identity, check_outage, check_power_accounting, check_product_law, check_special_functions, check_waterfilling,
    CheckOutcome,
};

const SEED: u64 = 2024;
const TRIALS: usize = 100_000;
const FRAMES: usize = 1000;
const WATERFILL_INSTANCES: usize = 1000;
const SEARCH_POINTS: usize = 1_000_000;

struct Criterion {
    id: u8,
    title: &'static str,
    outcomes: Vec<CheckOutcome>,
    elapsed: Duration,
    time_limit: Option<Duration>,
}

impl Criterion {
    fn run(id: u8, title: &'static str, time_limit: Option<Duration>, f: impl FnOnce() -> Vec<CheckOutcome>) -> Self {
        let start = Instant::now();
        let outcomes = f();
        Self { id, title, outcomes, elapsed: start.elapsed(), time_limit }
    }

    fn passed(&self) -> bool {
        self.outcomes.iter().all(CheckOutcome::passed) && self.time_limit.is_none_or(|t| self.elapsed <= t)
    }

    fn print(&self) {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        let limit = self.time_limit.map_or(String::new(), |t| format!(", limit {:.0} s", t.as_secs_f64()));
        println!("[{tag}] criterion {}: {} ({:.1} s{limit})", self.id, self.title, self.elapsed.as_secs_f64());
        for o in &self.outcomes {
            println!("    {o}");
        }
    }
}

fn main() -> ExitCode {
    let suite_start = Instant::now();
    let mut criteria = vec![
        Criterion::run(1, "time-domain frames match the per-subcarrier models", Some(Duration::from_secs(60)), || {
            check_frequency_equivalence(FRAMES, SEED, None)
        }),
        Criterion::run(2, "relayed noise obeys the circular-convolution identity", None, || check_noise_identity(FRAMES, SEED, None)),
        Criterion::run(3, "special functions agree with quadrature and asymptotes", None, check_special_functions),
        Criterion::run(4, "outage frequency matches the closed form", None, || check_outage(TRIALS, SEED)),
        Criterion::run(5, "waterfilling is feasible and optimal", None, || check_waterfilling(WATERFILL_INSTANCES, SEARCH_POINTS, SEED)),
        Criterion::run(6, "PU capacity is non-decreasing in the SU budget at kappa = 0.05", None, || {
            vec![check_monotonicity(0.05, TRIALS, SEED)]
        }),
    ];
    let figures = Criterion::run(7, "capacity anchors and trends", None, || check_figures(TRIALS, SEED));
    let mut property = Criterion::run(8, "property suites", None, || {
        let mut v = vec![check_consistency_law(FRAMES, SEED), check_product_law(TRIALS, SEED)];
        v.extend(check_exponential_law(TRIALS, SEED));
        v.extend(check_diagonalization(SEED));
        v.push(check_power_accounting(TRIALS, SEED));
        v
    });
    // The validate run covers criteria 1 to 6 and 8.
    let validate_time = suite_start.elapsed() - figures.elapsed;
    property.time_limit = Some(Duration::from_secs(600));
    property.elapsed = validate_time;
    criteria.push(figures);
    criteria.push(property);
    criteria.sort_by_key(|c| c.id);

    for c in &criteria {
        c.print();
    }
    let failed: Vec<u8> = criteria.iter().filter(|c| !c.passed()).map(|c| c.id).collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        criteria.len() - failed.len(),
        criteria.len(),
        if failed.is_empty() { String::new() } else { format!("; failed: {failed:?}") }
    );
    if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
