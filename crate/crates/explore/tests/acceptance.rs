//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use explore::clock::monotonic_ns;
use explore::explore_core::community::{modularity, CommunityId};
use explore::explore_core::env::{Env, EnvConfig};
use explore::explore_core::expert::{expert_reward, reward_for_distance};
use explore::explore_core::grid::{Cell, Pose2};
use explore::explore_core::mapgen::MapGenParams;
use explore::explore_core::policy::{run_policy, PolicyKind};
use explore::explore_core::roadmap::NodeId;
use explore::explore_core::tsp::{open_tour_cost, solve_open_tsp};
use explore::log::EpisodeLog;
use explore::runner::{bench, replay, run_batch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SUITE_SEEDS: u64 = 20;

struct Verdict {
    name: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
    budget: f64,
}

fn judge(name: &'static str, budget: f64, secs: f64, (pass, detail): (bool, String)) -> Verdict {
    Verdict {
        name,
        pass: pass && secs <= budget,
        detail,
        secs,
        budget,
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

fn reward_formula() -> (bool, String) {
    let d_n = EnvConfig::default().neighbor_threshold();
    let at = |d: f64| reward_for_distance(d, d_n).unwrap();
    let e = std::f64::consts::E;
    let mid = -(0.5f64.exp() - 1.0) / (e - 1.0);
    let mut ok = at(0.0) == 0.0 && at(2.0 * d_n) == -1.0 && (at(d_n) - mid).abs() <= 1e-9;
    let p = Pose2::new(3.0, -2.0);
    ok &= expert_reward(p, p, d_n).unwrap() == 0.0;
    ok &= expert_reward(p, Pose2::new(3.0 + 2.0 * d_n, -2.0), d_n).unwrap() == -1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ds: Vec<f64> = (0..1000).map(|_| rng.gen_range(0.0..=2.0 * d_n)).collect();
    ds.sort_by(f64::total_cmp);
    ds.dedup();
    let rs: Vec<f64> = ds.iter().map(|&d| at(d)).collect();
    let in_range = rs.iter().all(|r| (-1.0..=0.0).contains(r));
    let decreasing = rs.windows(2).all(|w| w[1] < w[0]);
    let formula = ds
        .iter()
        .zip(&rs)
        .all(|(&d, &r)| (r + ((d / (2.0 * d_n)).exp() - 1.0) / (e - 1.0)).abs() <= 1e-12);
    ok &= in_range && decreasing && formula;
    (
        ok,
        format!(
            "r(0)={}, r(2d_n)={}, r(d_n)={:.9}; {} samples in range={in_range} strictly decreasing={decreasing}",
            at(0.0),
            at(2.0 * d_n),
            at(d_n),
            ds.len()
        ),
    )
}

/// One suite episode with per-step bookkeeping and partition audits.
struct Audited {
    policy: PolicyKind,
    seed: u64,
    error: Option<String>,
    steps: usize,
    travel: f64,
    residual: f64,
    final_expert_cost: Option<f64>,
    complete: bool,
    missing_reachable: usize,
    free: usize,
    max_pruned: usize,
    violations: Vec<String>,
    splits: usize,
    audited_steps: usize,
}

fn audited_run(policy: PolicyKind, seed: u64) -> Audited {
    let cfg = EnvConfig {
        seed,
        ..EnvConfig::default()
    };
    let cap = cfg.community_cap();
    let mut env = Env::reset(cfg).expect("reset");
    let start = env.graph().node(env.robot()).cell;
    let c1 = env.expert_traces()[0].cost;
    let mut violations = Vec::new();
    if let Err(e) = env.partition().check(env.graph(), cap) {
        violations.push(format!("reset: {e}"));
    }
    let mut prev = env.partition().assignment().to_vec();
    let (mut sum_f, mut splits, mut audited_steps) = (0.0, 0, 0);
    let mut last = None;
    let mut p = policy.build();
    let result = run_policy(&mut env, p.as_mut(), |env, t| {
        sum_f += t.info.f.expect("expert enabled");
        last = Some((t.info.travel, t.info.expert_cost));
        audited_steps += 1;
        let part = env.partition();
        if let Err(e) = part.check(env.graph(), cap) {
            violations.push(format!("step {}: {e}", t.info.step));
        }
        let mut fragments: BTreeMap<CommunityId, &[CommunityId]> = BTreeMap::new();
        for s in part.splits() {
            fragments.insert(s.original, &s.fragments);
            splits += 1;
            if s.fragments.iter().any(|f| prev.contains(&Some(*f))) {
                violations.push(format!("step {}: split reused an id", t.info.step));
            }
        }
        for (i, old) in prev.iter().enumerate() {
            let Some(old) = old else { continue };
            let now = part.community_of(NodeId(i as u32));
            let ok = now == Some(*old) || now.is_some_and(|n| fragments.get(old).is_some_and(|f| f.contains(&n)));
            if !ok {
                violations.push(format!("step {}: node {i} moved from {old:?} to {now:?}", t.info.step));
            }
        }
        prev = part.assignment().to_vec();
    });
    let (travel, c_last) = last.unwrap_or((0.0, Some(c1)));
    let reach = oracle::reachable_free(env.truth(), start);
    let missing_reachable = reach
        .iter()
        .zip(env.belief().cells())
        .filter(|(&r, &b)| r && b != Cell::Free)
        .count();
    Audited {
        policy,
        seed,
        error: result.err().map(|e| e.to_string()),
        steps: env.steps(),
        travel,
        residual: sum_f - (travel - c1 + c_last.unwrap_or(f64::NAN)),
        final_expert_cost: c_last,
        complete: env.is_complete(),
        missing_reachable,
        free: env.truth().count(Cell::Free),
        max_pruned: env.expert_traces().iter().map(|t| t.pruned).max().unwrap_or(0),
        violations,
        splits,
        audited_steps,
    }
}

fn suite() -> Vec<Audited> {
    PolicyKind::ALL
        .iter()
        .flat_map(|&k| (0..SUITE_SEEDS).map(move |s| (k, s)))
        .map(|(k, s)| audited_run(k, s))
        .collect()
}

fn label(r: &Audited) -> String {
    format!("{} seed {}", r.policy.name(), r.seed)
}

fn telescoping(runs: &[Audited]) -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for r in runs {
        let terminal_ok = !r.complete || r.final_expert_cost == Some(0.0);
        if r.error.is_some() || !r.residual.is_finite() || r.residual.abs() > 1e-6 || !terminal_ok {
            bad.push(label(r));
        }
        worst = worst.max(r.residual.abs());
    }
    (
        bad.is_empty(),
        format!("{} episodes, max |residual| {worst:.3e}; failing: {bad:?}", runs.len()),
    )
}

fn partition_structure(runs: &[Audited]) -> (bool, String) {
    let steps: usize = runs.iter().map(|r| r.audited_steps).sum();
    let splits: usize = runs.iter().map(|r| r.splits).sum();
    let violations: Vec<String> = runs
        .iter()
        .flat_map(|r| r.violations.iter().map(move |v| format!("{}: {v}", label(r))))
        .collect();
    let complete = runs.iter().all(|r| r.complete && r.error.is_none());
    (
        complete && violations.is_empty(),
        format!(
            "{} episodes to completion={complete}, {steps} audited steps, {splits} logged splits, {} violations {:?}",
            runs.len(),
            violations.len(),
            violations.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn coverage_completeness(runs: &[Audited]) -> (bool, String) {
    let mut bad = Vec::new();
    let mut worst_pruned: f64 = 0.0;
    for r in runs {
        let pruned = r.max_pruned as f64 / r.free as f64;
        worst_pruned = worst_pruned.max(pruned);
        if r.error.is_some() || !r.complete || r.missing_reachable > r.max_pruned || pruned >= 0.005 {
            bad.push(format!("{} ({:?})", label(r), r.error));
        }
    }
    let missing: usize = runs.iter().map(|r| r.missing_reachable).sum();
    let mut per_policy = String::new();
    for k in PolicyKind::ALL {
        let rs: Vec<_> = runs.iter().filter(|r| r.policy == k).collect();
        let mean = rs.iter().map(|r| r.travel).sum::<f64>() / rs.len() as f64;
        let max_steps = rs.iter().map(|r| r.steps).max().unwrap_or(0);
        per_policy += &format!(" {}: mean {mean:.1} m, max {max_steps} steps;", k.name());
    }
    (
        bad.is_empty(),
        format!(
            "{} episodes, unexplored reachable cells {missing}, worst pruned fraction {:.4}%;{per_policy} failing: {bad:?}",
            runs.len(),
            worst_pruned * 100.0
        ),
    )
}

fn modularity_oracle() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut max_err, mut all_in_one): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let n = rng.gen_range(2..=12);
        let edges = oracle::random_graph(&mut rng, n);
        let k = rng.gen_range(1..=n);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let q = modularity(n, &edges, &labels, 1.0).unwrap();
        max_err = max_err.max((q - oracle::modularity_direct(n, &edges, &labels, 1.0)).abs());
        all_in_one = all_in_one.max(modularity(n, &edges, &vec![0; n], 1.0).unwrap().abs());
    }
    let cap = EnvConfig::default().community_cap();
    let mut worst_ratio = f64::INFINITY;
    let mut shortfalls = 0;
    let mut instances = 0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=8);
        let edges = oracle::random_graph(&mut rng, n);
        for cap in [cap, 3] {
            instances += 1;
            let best = oracle::best_partition(n, &edges, cap);
            let (p, labels) = oracle::partition_batch(n, &edges, cap);
            let valid = p.check(&oracle::Adjacency::new(n, &edges), cap).is_ok()
                && oracle::classes_connected(&labels, &edges);
            let q = oracle::modularity_direct(n, &edges, &labels, 1.0);
            let ratio = if best > 1e-12 { q / best } else if q >= best - 1e-12 { 1.0 } else { 0.0 };
            worst_ratio = worst_ratio.min(ratio);
            if !valid || q < best - 0.05 * best.abs() - 1e-12 {
                shortfalls += 1;
            }
        }
    }
    let ok = max_err <= 1e-12 && all_in_one <= 1e-12 && shortfalls == 0;
    (
        ok,
        format!(
            "max |Q - direct| {max_err:.2e}, max |Q(all-in-one)| {all_in_one:.2e}; partitioner worst Q/optimum {worst_ratio:.4} over {instances} instances, {shortfalls} below 0.95"
        ),
    )
}

fn tsp_quality() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pts = |n: usize| -> Vec<(f64, f64)> {
        (0..n).map(|_| (rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0))).collect()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = oracle::euclidean_matrix(&pts(6));
        let order = solve_open_tsp(&m, 0).unwrap();
        worst = worst.max(open_tour_cost(&m, &order) / oracle::tsp_brute_force(&m, 0));
    }
    let mut local_optima = 0;
    for _ in 0..20 {
        let m = oracle::euclidean_matrix(&pts(20));
        let order = solve_open_tsp(&m, 0).unwrap();
        let mut sorted = order.clone();
        sorted.sort();
        if sorted == (0..20).collect::<Vec<_>>() && oracle::no_improving_reversal(&m, &order, 1e-9) {
            local_optima += 1;
        }
    }
    (
        worst <= 1.05 && local_optima == 20,
        format!("6-point worst cost/optimum {worst:.4} over 100; 20-point 2-opt optimal {local_optima}/20"),
    )
}

fn desk_gap() -> (bool, String) {
    let base = EnvConfig {
        map: MapGenParams::for_size(100, 100),
        ..EnvConfig::default()
    };
    let mean = |k| -> Option<f64> {
        let runs = run_batch(k, base, 0..SUITE_SEEDS, None, |_| Ok(())).ok()?;
        if runs.iter().any(|r| r.error.is_some() || !r.metrics().completed) {
            return None;
        }
        Some(runs.iter().map(|r| r.metrics().travel).sum::<f64>() / runs.len() as f64)
    };
    match (mean(PolicyKind::ExpertFollow), mean(PolicyKind::Coverage)) {
        (Some(e), Some(c)) => {
            let ratio = e / c;
            (
                ratio <= 1.0,
                format!(
                    "mean expert {e:.2} m vs coverage baseline {c:.2} m over {SUITE_SEEDS} maps, ratio {ratio:.4} (bound 1.00, target 0.95 {})",
                    if ratio <= 0.95 { "met" } else { "missed" }
                ),
            )
        }
        _ => (false, "an episode failed to complete".into()),
    }
}

fn cli_run(out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_explore"))
        .args(["run", "--policy", "all", "--seeds", "0..2", "--csv"])
        .arg(out.join("metrics.csv"))
        .arg("--out")
        .arg(out)
        .status()
        .is_ok_and(|s| s.success())
}

fn determinism() -> (bool, String) {
    let dir = tempfile::tempdir().expect("tempdir");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    if !cli_run(&a) || !cli_run(&b) {
        return (false, "run failed".into());
    }
    let mut logs: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.file_name()))
        .filter(|n| n.to_string_lossy().ends_with(".jsonl.gz"))
        .collect();
    logs.sort();
    let mut identical = 0;
    let mut replayed = 0;
    for name in &logs {
        let bytes = fs::read(a.join(name)).unwrap();
        if fs::read(b.join(name)).ok().as_ref() == Some(&bytes) {
            identical += 1;
        }
        let cli_ok = Command::new(env!("CARGO_BIN_EXE_explore"))
            .arg("replay")
            .arg(a.join(name))
            .output()
            .is_ok_and(|o| o.status.success());
        let log = EpisodeLog::from_gzip(&bytes[..]).unwrap();
        let exact = replay(&log).is_ok_and(|r| r.mismatch.is_none());
        if cli_ok && exact {
            replayed += 1;
        }
    }
    let n = logs.len();
    (
        n == 8 && identical == n && replayed == n,
        format!("{identical}/{n} logs byte-identical across two runs, {replayed}/{n} replays exact"),
    )
}

fn latency() -> (bool, String) {
    match bench(EnvConfig::default(), 0..5, monotonic_ns) {
        Ok(r) => {
            let worst_expert = r.replan_ms.max.max(r.reset_expert_ms.max);
            (
                r.pipeline_ms.median <= 100.0 && worst_expert <= 1000.0,
                format!(
                    "{} steps on 250x250: pipeline median {:.2} ms (p95 {:.2}); replan median {:.1} ms, max {:.1} ms; reset incl. privileged map max {:.1} ms",
                    r.steps,
                    r.pipeline_ms.median,
                    r.pipeline_ms.p95,
                    r.replan_ms.median,
                    r.replan_ms.max,
                    r.reset_expert_ms.max
                ),
            )
        }
        Err(e) => (false, e.to_string()),
    }
}

fn main() {
    let mut verdicts = Vec::new();
    let (out, secs) = timed(reward_formula);
    verdicts.push(judge("reward formula", 1.0, secs, out));

    let (runs, suite_secs) = timed(suite);
    let (out, secs) = timed(|| telescoping(&runs));
    verdicts.push(judge("telescoping identity", 600.0, suite_secs + secs, out));

    let (out, secs) = timed(modularity_oracle);
    verdicts.push(judge("modularity oracle", 300.0, secs, out));

    let (out, secs) = timed(|| partition_structure(&runs));
    verdicts.push(judge("partition structure", 1800.0, suite_secs + secs, out));

    let (out, secs) = timed(tsp_quality);
    verdicts.push(judge("tsp quality", 120.0, secs, out));

    let (out, secs) = timed(|| coverage_completeness(&runs));
    verdicts.push(judge("coverage completeness", 1800.0, suite_secs + secs, out));

    let (out, secs) = timed(desk_gap);
    verdicts.push(judge("privileged vs baseline gap", 1200.0, secs, out));

    let (out, secs) = timed(determinism);
    verdicts.push(judge("determinism", 300.0, secs, out));

    let (out, secs) = timed(latency);
    verdicts.push(judge("latency budget", 600.0, secs, out));

    for v in &verdicts {
        println!(
            "{} {}: {} [{:.1} s, budget {:.0} s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.detail,
            v.secs,
            v.budget
        );
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!("acceptance: {} passed, {failed} failed", verdicts.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
