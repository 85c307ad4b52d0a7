//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::io;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use vrm_core::engine::{run_with, EngineOptions};
use vrm_core::harness::gen::{derive_seed, generate, Family, GenSpec};
use vrm_core::harness::scaling::{parse_m_grid, run_scaling, top_trend_non_increasing, Baseline, ScalingConfig};
use vrm_core::harness::verify::{verify_instance, verify_suite, Check, Suite, SuiteReport, Verdict, VerifyOptions};
use vrm_core::oracles::{opt_bruteforce, opt_hungarian, opt_hungarian_exact, OracleConfig};

const SUITE_SEED: u64 = 20_240_601;
const SUITE_COUNT: usize = 4000;
const BASELINE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/scaling_baseline.json");

struct Outcome {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn line(o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {:>2} {}: {}", o.id, o.name, o.detail);
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

/// Checks from the seeded suite plus the m = 64 set.
struct Evidence {
    suite: SuiteReport,
    suite_time: Duration,
    large: Verdict,
}

impl Evidence {
    fn failures(&self, check: Check) -> usize {
        self.suite.failed(check) + self.large.failed(check)
    }

    fn count(&self, check: Check) -> u64 {
        self.suite.count(check) + self.large.count(check)
    }

    fn first_failure(&self, check: Check) -> String {
        let suite = self.suite.failures.iter().find(|f| f.failure.check == check).map(|f| {
            format!("{} m={} seed={}: {}", f.family, f.m, f.seed, f.failure.message)
        });
        let large = self.large.failures.iter().find(|f| f.check == check).map(|f| format!("m=64: {}", f.message));
        suite.or(large).unwrap_or_default()
    }

    fn outcome(&self, id: u8, name: &'static str, checks: &[Check], extra: &str) -> Outcome {
        let failed: usize = checks.iter().map(|&c| self.failures(c)).sum();
        let ran: u64 = checks.iter().map(|&c| self.count(c)).sum();
        let pass = failed == 0 && ran > 0;
        let mut detail = format!("{ran} checks, {failed} violations{extra}");
        if let Some(c) = checks.iter().find(|&&c| self.failures(c) > 0) {
            detail.push_str(&format!("; first: {}", self.first_failure(*c)));
        }
        Outcome { id, name, pass, detail }
    }
}

fn gather() -> Evidence {
    let start = Instant::now();
    let suite = verify_suite(Suite::Full, SUITE_SEED, SUITE_COUNT, &VerifyOptions::default());
    let suite_time = start.elapsed();

    let options = VerifyOptions { differential: false, ..Default::default() };
    let mut large = Verdict::default();
    for i in 0..20 {
        let family = Family::ALL[i % Family::ALL.len()];
        let inst = generate(&GenSpec::new(family, 64, derive_seed(SUITE_SEED, family, 64, i))).unwrap();
        let v = verify_instance(&inst, &options);
        for (check, n) in v.counts {
            *large.counts.entry(check).or_default() += n;
        }
        large.failures.extend(v.failures);
    }
    Evidence { suite, suite_time, large }
}

fn differential(ev: &Evidence) -> Outcome {
    let per_family: Vec<usize> = Family::ALL
        .iter()
        .map(|f| ev.suite.coverage.iter().filter(|((g, _), _)| g == f).map(|(_, n)| n).sum())
        .collect();
    let sizes: BTreeSet<usize> = ev.suite.coverage.keys().map(|(_, m)| *m).collect();
    let mut o = ev.outcome(
        1,
        "engine matches the explicit virtual-server algorithm",
        &[Check::Differential, Check::Engine],
        &format!(", instances per family {per_family:?}, m in {sizes:?}, {} for the suite", secs(ev.suite_time)),
    );
    let covered = per_family.iter().all(|&n| n >= 1000) && sizes == (1..=16).collect();
    if !covered {
        o.pass = false;
        o.detail.push_str("; coverage below 1000 per family or m outside 1..=16");
    }
    if ev.suite.count(Check::Differential) != SUITE_COUNT as u64 {
        o.pass = false;
        o.detail.push_str("; not every instance was compared");
    }
    o
}

fn shortest_paths(ev: &Evidence) -> Outcome {
    let small: usize = ev.suite.coverage.iter().filter(|((_, m), _)| *m <= 8).map(|(_, n)| n).sum();
    let mut o = ev.outcome(
        2,
        "search minimum equals exhaustive minimum (real and virtual)",
        &[Check::ShortestPath],
        &format!(", {small} instances with m <= 8 enumerated at every step"),
    );
    if small < 500 {
        o.pass = false;
    }
    o
}

fn opt_cross_check() -> Outcome {
    let start = Instant::now();
    let config = OracleConfig::default();
    let mut mismatches = Vec::new();
    let count = 500;
    for i in 0..count {
        let family = Family::ALL[i % Family::ALL.len()];
        let m = 1 + (i / Family::ALL.len()) % 7;
        let inst = generate(&GenSpec::new(family, m, derive_seed(SUITE_SEED ^ 8, family, m, i))).unwrap();
        let brute = opt_bruteforce(&inst, &config).expect("m <= 7");
        let fast = opt_hungarian(&inst).cost;
        let exact = opt_hungarian_exact(&inst).cost;
        if brute.cost != fast || brute.cost != exact {
            mismatches.push(format!("{family} m={m}: brute {} vs Hungarian {fast} / {exact}", brute.cost));
        }
    }
    Outcome {
        id: 8,
        name: "brute-force optimum equals Hungarian optimum",
        pass: mismatches.is_empty(),
        detail: format!(
            "{count} instances with m <= 7, {} mismatches, {}{}",
            mismatches.len(),
            secs(start.elapsed()),
            mismatches.first().map(|s| format!("; first: {s}")).unwrap_or_default()
        ),
    }
}

fn scaling() -> Outcome {
    let start = Instant::now();
    let config = ScalingConfig::new(parse_m_grid("4,8,...,1024").unwrap(), 20, 0);
    let points = match run_scaling(&config) {
        Ok(p) => p,
        Err(e) => return Outcome { id: 9, name: "scaling report", pass: false, detail: format!("engine failed: {e}") },
    };
    let trend = top_trend_non_increasing(&points);
    let rising: Vec<String> = trend.iter().filter(|(_, ok)| !ok).map(|(f, _)| f.to_string()).collect();
    let regressions = match std::fs::read(BASELINE) {
        Ok(bytes) => match serde_json::from_slice::<Baseline>(&bytes) {
            Ok(b) => b.regressions(&points),
            Err(e) => vec![format!("unreadable baseline: {e}")],
        },
        Err(e) => vec![format!("missing baseline {BASELINE}: {e}")],
    };
    let worst = points.iter().map(|p| p.max_ratio.to_f64()).fold(0.0, f64::max);
    let top: Vec<String> = points
        .iter()
        .filter(|p| p.m == 1024)
        .map(|p| format!("{}={:.4}", p.family, p.normalized_max_ratio))
        .collect();
    Outcome {
        id: 9,
        name: "competitive-ratio scaling report",
        pass: rising.is_empty() && regressions.is_empty(),
        detail: format!(
            "{} points, worst max ratio {worst:.4}, normalized at m=1024 [{}], trend rising in {rising:?}, {} baseline regressions{}, {}",
            points.len(),
            top.join(", "),
            regressions.len(),
            regressions.first().map(|s| format!(" (first: {s})")).unwrap_or_default(),
            secs(start.elapsed()),
        ),
    }
}

fn performance() -> Outcome {
    let inst = generate(&GenSpec::new(Family::Uniform, 1000, 1)).unwrap();
    let start = Instant::now();
    let options = EngineOptions { audit: false, snapshots: false, ..Default::default() };
    let result = run_with(&inst, options, &mut ()).map(|(_, trace)| trace.write_jsonl(io::sink()));
    let elapsed = start.elapsed();
    let pass = matches!(result, Ok(Ok(()))) && elapsed < Duration::from_secs(60);
    Outcome {
        id: 10,
        name: "m = 1000 uniform instance end to end",
        pass,
        detail: format!("{} (limit 60s){}", secs(elapsed), if result.is_ok() { "" } else { ", engine failed" }),
    }
}

fn main() -> ExitCode {
    let ev = gather();
    let mut outcomes = vec![
        differential(&ev),
        shortest_paths(&ev),
        ev.outcome(3, "dual invariants after every dual update", &[Check::Invariants, Check::Engine], ""),
        ev.outcome(4, "every enumerated augmenting path has nonnegative cost", &[Check::Nonnegativity], ""),
        ev.outcome(5, "waiting time equals final path cost over gamma", &[Check::MatchTime], ""),
        ev.outcome(6, "no free request's cost drops across an augmentation", &[Check::Monotonicity], ""),
        ev.outcome(
            7,
            "aggregate distance, cost, per-request and saturated-set bounds",
            &[Check::Aggregate, Check::SaturatedSet],
            " (suite plus 20 instances with m = 64)",
        ),
    ];
    for o in &outcomes {
        line(o);
    }
    for f in [opt_cross_check, scaling, performance] {
        let o = f();
        line(&o);
        outcomes.push(o);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
