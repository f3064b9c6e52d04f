//! Built-in policies and the episode loop.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::env::{Env, Transition};
use crate::error::{Error, Result};
use crate::expert::{expert_waypoint, mix_seed, plan_coverage};
use crate::roadmap::{dijkstra_tree, NodeId};

const COVERAGE_TAG: u64 = 0x434f_5645;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum PolicyKind {
    ExpertFollow,
    Coverage,
    GreedyFrontier,
    GuidepostHeuristic,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::ExpertFollow,
        PolicyKind::Coverage,
        PolicyKind::GreedyFrontier,
        PolicyKind::GuidepostHeuristic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::ExpertFollow => "expert-follow",
            PolicyKind::Coverage => "coverage",
            PolicyKind::GreedyFrontier => "greedy-frontier",
            PolicyKind::GuidepostHeuristic => "guidepost-heuristic",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn build(self) -> Box<dyn Policy> {
        match self {
            PolicyKind::ExpertFollow => Box::new(ExpertFollow),
            PolicyKind::Coverage => Box::new(CoverageBaseline::default()),
            PolicyKind::GreedyFrontier => Box::new(GreedyFrontier),
            PolicyKind::GuidepostHeuristic => Box::new(GuidepostHeuristic),
        }
    }
}

/// Chooses a neighbor index for the current state.
pub trait Policy {
    fn act(&mut self, env: &Env) -> Result<usize>;
}

/// Takes the privileged expert's next hop.
pub struct ExpertFollow;

impl Policy for ExpertFollow {
    fn act(&mut self, env: &Env) -> Result<usize> {
        if env.privileged().is_none() {
            return Err(Error::Config("expert-follow needs the expert enabled"));
        }
        env.expert_action()
            .ok_or(Error::State("expert waypoint is not a neighbor of the robot"))
    }
}

/// The expert's sampling and TSP machinery run on belief frontiers only.
#[derive(Default)]
pub struct CoverageBaseline {
    warm: Option<Vec<NodeId>>,
}

impl Policy for CoverageBaseline {
    fn act(&mut self, env: &Env) -> Result<usize> {
        let snap = env.snapshot();
        let cfg = env.config();
        let seed = mix_seed(mix_seed(cfg.seed, COVERAGE_TAG), env.steps() as u64);
        let plan = plan_coverage(
            env.graph(),
            &snap.observability,
            snap.robot,
            cfg.expert_restarts,
            seed,
            self.warm.as_deref(),
        )?;
        let w = expert_waypoint(&plan, snap.robot)?;
        self.warm = Some(plan.viewpoints);
        env.action_for(w)
            .ok_or(Error::State("coverage waypoint is not a neighbor of the robot"))
    }
}

/// First hop of a shortest path to the nearest node that observes a frontier.
pub struct GreedyFrontier;

impl Policy for GreedyFrontier {
    fn act(&mut self, env: &Env) -> Result<usize> {
        let snap = env.snapshot();
        let tree = dijkstra_tree(env.graph(), snap.robot, None);
        let mut best: Option<(f64, NodeId)> = None;
        for id in snap.utilities.utility_nodes() {
            let d = tree.dist[id.index()];
            if id == snap.robot || !d.is_finite() {
                continue;
            }
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, id));
            }
        }
        let Some((_, goal)) = best else {
            return Ok(0);
        };
        let path = tree.path_to(goal).expect("goal is reachable");
        env.action_for(path[1])
            .ok_or(Error::State("path hop is not a neighbor of the robot"))
    }
}

/// Follows the local guideposts toward the nearest utility node, then the
/// global ones; stays when neither exists.
pub struct GuidepostHeuristic;

impl Policy for GuidepostHeuristic {
    fn act(&mut self, env: &Env) -> Result<usize> {
        let snap = env.snapshot();
        let obs = &snap.observation;
        let has_local = obs.neighbors[1..].iter().any(|&r| obs.nodes[r as usize][3] == 1.0);
        if has_local {
            let tree = &snap.local_references.tree;
            let nearest = snap
                .local_references
                .paths
                .iter()
                .filter(|p| p.len() > 1)
                .min_by(|a, b| {
                    let (ga, gb) = (a[a.len() - 1], b[b.len() - 1]);
                    tree.dist[ga.index()]
                        .total_cmp(&tree.dist[gb.index()])
                        .then(ga.cmp(&gb))
                });
            if let Some(p) = nearest {
                if let Some(a) = env.action_for(p[1]) {
                    return Ok(a);
                }
            }
        }
        let segment = snap.global_reference.next_segment();
        if segment.len() > 1 {
            if let Some(a) = env.action_for(segment[1]) {
                return Ok(a);
            }
        }
        Ok(0)
    }
}

/// Steps without revealing a cell before a policy counts as stalled.
pub fn livelock_limit(env: &Env) -> usize {
    let cfg = env.config();
    3 * libm::ceil(cfg.local_window / cfg.node_resolution) as usize
}

/// Runs `policy` until the episode ends, handing every transition to `sink`.
pub fn run_policy(
    env: &mut Env,
    policy: &mut dyn Policy,
    mut sink: impl FnMut(&Env, &Transition),
) -> Result<()> {
    let limit = livelock_limit(env);
    while !env.is_done() {
        let action = policy.act(env)?;
        let t = env.step(action)?;
        sink(env, &t);
        if !t.done && env.idle_steps() >= limit {
            return Err(Error::Livelock {
                steps: env.idle_steps(),
            });
        }
    }
    Ok(())
}

/// Resets an environment and runs a built-in policy to termination.
pub fn run_builtin(kind: PolicyKind, cfg: crate::env::EnvConfig) -> Result<(Env, Vec<Transition>)> {
    let mut env = Env::reset(cfg)?;
    let mut policy = kind.build();
    let mut transitions = Vec::new();
    run_policy(&mut env, policy.as_mut(), |_, t| transitions.push(t.clone()))?;
    Ok((env, transitions))
}
