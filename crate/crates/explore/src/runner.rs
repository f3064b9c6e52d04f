//! Episodes driven by built-in policies, batch runs, replay and timing.

use std::io::Write;
use std::ops::Range;

use anyhow::{bail, Context, Result};
use explore_core::env::{Clock, Env, EnvConfig, Metrics, StepTiming};
use explore_core::policy::{run_policy, PolicyKind};
use rayon::prelude::*;
use serde::Serialize;

use crate::log::{EpisodeLog, Header, StepRecord, Summary, LOG_FORMAT};

pub struct EpisodeRun {
    pub policy: PolicyKind,
    pub log: EpisodeLog,
    /// Wall-clock timings; empty without a clock.
    pub timings: Vec<StepTiming>,
    /// Set when the policy stopped the episode early (for example a livelock).
    pub error: Option<explore_core::Error>,
}

impl EpisodeRun {
    pub fn metrics(&self) -> &Metrics {
        &self.log.summary.metrics
    }
}

fn outcome(env: &Env, error: Option<&explore_core::Error>) -> String {
    match error {
        Some(e) => e.to_string(),
        None if env.is_complete() => "completed".into(),
        None => "truncated".into(),
    }
}

/// Runs one episode; policy failures are kept in the log rather than returned.
pub fn run_episode(policy: PolicyKind, cfg: EnvConfig, clock: Option<Clock>) -> Result<EpisodeRun> {
    run_episode_with(policy, cfg, clock, |_| Ok(()))
}

/// Like `run_episode`, handing the final environment to `finish`.
pub fn run_episode_with(
    policy: PolicyKind,
    cfg: EnvConfig,
    clock: Option<Clock>,
    finish: impl FnOnce(&Env) -> Result<()>,
) -> Result<EpisodeRun> {
    let mut env = Env::reset_with_clock(cfg, clock).context("reset")?;
    let header = Header {
        format: LOG_FORMAT,
        policy: policy.name().into(),
        map_seed: cfg.seed,
        config: cfg,
        observation: env.observation().clone(),
        expert: env.expert_traces().last().cloned(),
    };
    let mut steps = Vec::new();
    let mut p = policy.build();
    let result = run_policy(&mut env, p.as_mut(), |env, t| {
        steps.push(StepRecord {
            transition: t.clone(),
            expert: env
                .expert_traces()
                .last()
                .filter(|tr| tr.step == t.info.step)
                .cloned(),
            splits: env.partition().splits().to_vec(),
        });
    });
    let error = result.err();
    finish(&env)?;
    let mut metrics = env.metrics().clone();
    let timings = std::mem::take(&mut metrics.timings);
    let summary = Summary {
        metrics,
        outcome: outcome(&env, error.as_ref()),
    };
    Ok(EpisodeRun {
        policy,
        log: EpisodeLog {
            header,
            steps,
            summary,
        },
        timings,
        error,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayReport {
    pub steps: usize,
    /// First difference found, if any.
    pub mismatch: Option<String>,
}

/// Re-runs the logged configuration and actions and compares every record.
pub fn replay(log: &EpisodeLog) -> Result<ReplayReport> {
    let mut env = Env::reset(log.header.config).context("reset")?;
    let fail = |steps, what: String| {
        Ok(ReplayReport {
            steps,
            mismatch: Some(what),
        })
    };
    if env.observation() != &log.header.observation {
        return fail(0, "initial observation".into());
    }
    if env.expert_traces().last() != log.header.expert.as_ref() {
        return fail(0, "initial expert plan".into());
    }
    for (i, rec) in log.steps.iter().enumerate() {
        let t = match env.step(rec.transition.action) {
            Ok(t) => t,
            Err(e) => return fail(i, format!("step {}: {e}", i + 1)),
        };
        if t != rec.transition {
            return fail(i, format!("step {}: transition", i + 1));
        }
        let trace = env.expert_traces().last().filter(|tr| tr.step == t.info.step);
        if trace != rec.expert.as_ref() {
            return fail(i, format!("step {}: expert plan", i + 1));
        }
        if env.partition().splits() != rec.splits.as_slice() {
            return fail(i, format!("step {}: community splits", i + 1));
        }
    }
    let n = log.steps.len();
    if env.metrics() != &log.summary.metrics {
        return fail(n, "metrics".into());
    }
    let stopped_early = !env.is_done();
    let logged_early = !matches!(log.summary.outcome.as_str(), "completed" | "truncated");
    if stopped_early != logged_early || (!stopped_early && outcome(&env, None) != log.summary.outcome) {
        return fail(n, "outcome".into());
    }
    Ok(ReplayReport {
        steps: n,
        mismatch: None,
    })
}

/// Parses `A..B`, `A..=B` or a single seed.
pub fn parse_seeds(s: &str) -> Result<Range<u64>> {
    let s = s.trim();
    let r = if let Some((a, b)) = s.split_once("..=") {
        a.parse::<u64>()?..b.parse::<u64>()? + 1
    } else if let Some((a, b)) = s.split_once("..") {
        a.parse()?..b.parse()?
    } else {
        let a: u64 = s.parse()?;
        a..a + 1
    };
    if r.is_empty() {
        bail!("empty seed range `{s}`");
    }
    Ok(r)
}

/// Runs every seed in `seeds` in parallel; results come back in seed order.
pub fn run_batch(
    policy: PolicyKind,
    base: EnvConfig,
    seeds: Range<u64>,
    clock: Option<Clock>,
    finish: impl Fn(&Env) -> Result<()> + Sync,
) -> Result<Vec<EpisodeRun>> {
    seeds
        .into_par_iter()
        .map(|seed| {
            let cfg = EnvConfig { seed, ..base };
            run_episode_with(policy, cfg, clock, &finish).with_context(|| format!("seed {seed}"))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricsRow {
    pub policy: String,
    pub seed: u64,
    pub outcome: String,
    pub steps: usize,
    pub travel: f64,
    pub explored: f64,
    pub completed: bool,
    pub reward_sum: f64,
    pub initial_expert_cost: Option<f64>,
    pub median_pipeline_ms: Option<f64>,
    pub max_expert_ms: Option<f64>,
}

fn ms(ns: u64) -> f64 {
    ns as f64 / 1e6
}

impl MetricsRow {
    pub fn from_run(run: &EpisodeRun) -> Self {
        let m = run.metrics();
        let mut pipeline: Vec<u64> = run.timings.iter().map(|t| t.pipeline_ns).collect();
        pipeline.sort_unstable();
        Self {
            policy: run.policy.name().into(),
            seed: run.log.header.map_seed,
            outcome: run.log.summary.outcome.clone(),
            steps: m.steps,
            travel: m.travel,
            explored: m.curve.last().map_or(0.0, |c| c.1),
            completed: m.completed,
            reward_sum: run.log.steps.iter().map(|s| s.transition.reward).sum(),
            initial_expert_cost: run.log.header.expert.as_ref().map(|e| e.cost),
            median_pipeline_ms: pipeline.get(pipeline.len() / 2).map(|&n| ms(n)),
            max_expert_ms: run.timings.iter().map(|t| t.expert_ns).max().map(ms),
        }
    }
}

pub fn write_csv(rows: &[MetricsRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Stats {
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| v[((v.len() - 1) as f64 * q).round() as usize];
        Self {
            median: at(0.5),
            p95: at(0.95),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub episodes: usize,
    pub steps: usize,
    pub pipeline_ms: Stats,
    /// Per-step replan time, excluding the one-off privileged map build at reset.
    pub replan_ms: Stats,
    /// Reset time spent on the expert, including the privileged map build.
    pub reset_expert_ms: Stats,
}

/// Runs expert-follow episodes one at a time and collects step timings.
pub fn bench(base: EnvConfig, seeds: Range<u64>, clock: Clock) -> Result<BenchReport> {
    let mut pipeline = Vec::new();
    let mut replan = Vec::new();
    let mut reset = Vec::new();
    let mut episodes = 0;
    for seed in seeds {
        let run = run_episode(PolicyKind::ExpertFollow, EnvConfig { seed, ..base }, Some(clock))?;
        episodes += 1;
        let mut t = run.timings.iter();
        if let Some(first) = t.next() {
            pipeline.push(ms(first.pipeline_ns));
            reset.push(ms(first.expert_ns));
        }
        for s in t {
            pipeline.push(ms(s.pipeline_ns));
            replan.push(ms(s.expert_ns));
        }
    }
    Ok(BenchReport {
        episodes,
        steps: replan.len(),
        pipeline_ms: Stats::of(&pipeline),
        replan_ms: Stats::of(&replan),
        reset_expert_ms: Stats::of(&reset),
    })
}
