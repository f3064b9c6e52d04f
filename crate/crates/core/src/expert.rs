//! Privileged expert: coverage planning over the ground-truth map, the expert
//! waypoint and the expert-distance reward.
//!
//! The planner repeatedly samples a viewpoint set that observes every frontier
//! cell (draw probability proportional to the number of still-uncovered cells a
//! node sees), orders it with the open-path TSP solver and keeps the cheapest
//! tour. The same machinery runs on belief frontiers for the non-privileged
//! coverage baseline.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{cells_visible, frontiers_where, Cell, FrontierSet, OccupancyGrid, Pose2};
use crate::roadmap::{dijkstra_tree, NodeId, RoadmapConfig, RoadmapGraph, ShortestPathTree};
use crate::routing::{Csr, Observability};
use crate::tsp::{open_tour_cost, solve_open_tsp, two_opt, CostMatrix};

/// Roadmap over ground-truth free space plus the static cell visibility table.
#[derive(Clone, Debug)]
pub struct PrivilegedMap {
    pub graph: RoadmapGraph,
    /// Truth cell (linear index) -> ids of nodes observing it, ascending.
    observers: Csr,
    range: f64,
}

impl PrivilegedMap {
    /// `range` is the observation range in meters.
    pub fn build(truth: &OccupancyGrid, cfg: RoadmapConfig, range: f64) -> Result<Self> {
        let mut graph = RoadmapGraph::new(truth, cfg)?;
        graph.extend(truth, None);
        let radius = range / truth.resolution() + 1e-9;
        let mut pairs = Vec::new();
        let mut near = Vec::new();
        for lin in 0..truth.len() {
            let cell = truth.unlinear(lin);
            if truth.get(cell) != Cell::Free {
                continue;
            }
            near.clear();
            graph.for_each_node_near(cell, radius, |id| near.push(id));
            near.sort_unstable();
            for &id in &near {
                if cells_visible(truth, graph.node(id).cell, cell) {
                    pairs.push((lin as u32, id.0));
                }
            }
        }
        Ok(Self {
            observers: Csr::from_pairs(truth.len(), &pairs),
            graph,
            range,
        })
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    /// Nodes observing a truth cell.
    pub fn observers(&self, linear: usize) -> &[u32] {
        self.observers.row(linear)
    }
}

/// Truth-Free cells bordering belief-Unknown space.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PrivilegedFrontiers {
    /// Cells observable from at least one privileged node.
    pub cells: FrontierSet,
    /// Cells no privileged node observes; excluded from planning.
    pub pruned: Vec<usize>,
}

pub fn privileged_frontiers(
    truth: &OccupancyGrid,
    belief: &OccupancyGrid,
    map: &PrivilegedMap,
) -> PrivilegedFrontiers {
    let all = frontiers_where(belief, |c| truth.get(c) == Cell::Free);
    let (mut kept, mut pruned) = (Vec::new(), Vec::new());
    for lin in all.cells {
        if map.observers(lin).is_empty() {
            pruned.push(lin);
        } else {
            kept.push(lin);
        }
    }
    PrivilegedFrontiers {
        cells: FrontierSet { cells: kept },
        pruned,
    }
}

impl PrivilegedFrontiers {
    pub fn observability(&self, map: &PrivilegedMap) -> Observability {
        let mut pairs = Vec::new();
        for (fi, &lin) in self.cells.cells.iter().enumerate() {
            for &v in map.observers(lin) {
                pairs.push((fi as u32, v));
            }
        }
        Observability::from_frontier_pairs(self.cells.cells.clone(), map.graph.len(), &pairs)
    }
}

/// An ordered coverage tour on a roadmap.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpertPlan {
    pub start: NodeId,
    /// Sampled viewpoints in visiting order, the start excluded.
    pub viewpoints: Vec<NodeId>,
    /// Roadmap path from the start through every viewpoint.
    pub path: Vec<NodeId>,
    /// Tour length in meters.
    pub cost: f64,
    /// Frontier cells that no node reachable from the start observes.
    pub unreachable_frontiers: usize,
}

impl ExpertPlan {
    fn stay(start: NodeId, unreachable_frontiers: usize) -> Self {
        Self {
            start,
            viewpoints: Vec::new(),
            path: vec![start],
            cost: 0.0,
            unreachable_frontiers,
        }
    }
}

/// Derives an independent stream seed from a base seed and a tag.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Sampler<'a> {
    obs: &'a Observability,
    eligible: &'a [bool],
    base_covered: Vec<bool>,
    base_utility: Vec<u64>,
    base_total: u64,
}

impl<'a> Sampler<'a> {
    fn new(obs: &'a Observability, eligible: &'a [bool], start: NodeId) -> Self {
        let nf = obs.frontiers.len();
        let mut covered = vec![false; nf];
        for &f in obs.by_node.row(start.index()) {
            covered[f as usize] = true;
        }
        // cells nobody reachable sees cannot be covered
        for (fi, c) in covered.iter_mut().enumerate() {
            if !obs.by_frontier.row(fi).iter().any(|&v| eligible[v as usize]) {
                *c = true;
            }
        }
        let mut utility = vec![0u64; obs.by_node.rows()];
        for (v, u) in utility.iter_mut().enumerate() {
            if eligible[v] {
                *u = obs.by_node.row(v).iter().filter(|&&f| !covered[f as usize]).count() as u64;
            }
        }
        let total = utility.iter().sum();
        Self {
            obs,
            eligible,
            base_covered: covered,
            base_utility: utility,
            base_total: total,
        }
    }

    fn unreachable(&self) -> usize {
        (0..self.obs.frontiers.len())
            .filter(|&fi| !self.obs.by_frontier.row(fi).iter().any(|&v| self.eligible[v as usize]))
            .count()
    }

    /// Viewpoints covering every coverable cell: useful `prefix` nodes first, then random draws.
    fn draw(&self, rng: &mut ChaCha8Rng, prefix: &[NodeId]) -> Vec<NodeId> {
        let mut covered = self.base_covered.clone();
        let mut utility = self.base_utility.clone();
        let mut total = self.base_total;
        let mut chosen = Vec::new();
        let take = |v: usize, covered: &mut Vec<bool>, utility: &mut Vec<u64>, total: &mut u64| {
            for &f in self.obs.by_node.row(v) {
                let f = f as usize;
                if covered[f] {
                    continue;
                }
                covered[f] = true;
                for &o in self.obs.by_frontier.row(f) {
                    let o = o as usize;
                    if self.eligible[o] {
                        utility[o] -= 1;
                        *total -= 1;
                    }
                }
            }
        };
        for &v in prefix {
            if v.index() < utility.len() && utility[v.index()] > 0 {
                chosen.push(v);
                take(v.index(), &mut covered, &mut utility, &mut total);
            }
        }
        while total > 0 {
            let mut x = rng.gen_range(0..total);
            let mut pick = usize::MAX;
            for (v, &u) in utility.iter().enumerate() {
                if x < u {
                    pick = v;
                    break;
                }
                x -= u;
            }
            chosen.push(NodeId(pick as u32));
            take(pick, &mut covered, &mut utility, &mut total);
        }
        chosen
    }

    /// True when the nodes of `path` jointly observe every coverable cell.
    fn covers(&self, path: &[NodeId], scratch: &mut Vec<bool>) -> bool {
        scratch.clear();
        scratch.extend_from_slice(&self.base_covered);
        for &v in path {
            for &f in self.obs.by_node.row(v.index()) {
                scratch[f as usize] = true;
            }
        }
        scratch.iter().all(|&c| c)
    }
}

struct TourBuilder<'a> {
    graph: &'a RoadmapGraph,
    trees: BTreeMap<NodeId, ShortestPathTree>,
}

impl<'a> TourBuilder<'a> {
    fn tree(&mut self, v: NodeId) -> &ShortestPathTree {
        let graph = self.graph;
        self.trees.entry(v).or_insert_with(|| dijkstra_tree(graph, v, None))
    }

    fn matrix(&mut self, stops: &[NodeId]) -> CostMatrix {
        for &s in stops {
            self.tree(s);
        }
        let trees = &self.trees;
        CostMatrix::from_fn(stops.len(), |i, j| {
            let a = trees[&stops[i]].dist[stops[j].index()];
            let b = trees[&stops[j]].dist[stops[i].index()];
            a.min(b)
        })
    }

    fn expand(&mut self, order: &[NodeId]) -> Vec<NodeId> {
        let mut path = vec![order[0]];
        for w in order.windows(2) {
            let leg = self.tree(w[0]).path_to(w[1]).expect("viewpoints are reachable");
            path.extend_from_slice(&leg[1..]);
        }
        path
    }

    /// Drops viewpoints, last first, whose cells stay observed from the
    /// shortened tour. The robot scans at every node it passes, not only at
    /// viewpoints.
    fn prune(&mut self, sampler: &Sampler, stops: &[NodeId], mut order: Vec<usize>) -> Vec<usize> {
        let mut scratch = Vec::new();
        let mut i = order.len() - 1;
        while i >= 1 {
            let mut trial = order.clone();
            trial.remove(i);
            let nodes: Vec<NodeId> = trial.iter().map(|&k| stops[k]).collect();
            let path = self.expand(&nodes);
            if sampler.covers(&path, &mut scratch) {
                order = trial;
            }
            i -= 1;
        }
        order
    }
}

/// Coverage tour on `graph` from `start` observing every frontier in `obs`.
///
/// Runs `restarts` independent samplings seeded from `seed`; `warm` (a
/// previous tour's viewpoints) seeds one extra candidate that keeps those
/// viewpoints in order while they still cover something. Each candidate is
/// pruned of viewpoints made redundant by the nodes its path passes through.
/// The cheapest tour wins.
pub fn plan_coverage(
    graph: &RoadmapGraph,
    obs: &Observability,
    start: NodeId,
    restarts: usize,
    seed: u64,
    warm: Option<&[NodeId]>,
) -> Result<ExpertPlan> {
    if restarts == 0 {
        return Err(Error::Config("at least one restart is required"));
    }
    if start.index() >= graph.len() {
        return Err(Error::Precondition("start is not a roadmap node"));
    }
    let mut builder = TourBuilder {
        graph,
        trees: BTreeMap::new(),
    };
    let eligible: Vec<bool> = {
        let t = builder.tree(start);
        (0..graph.len()).map(|v| t.dist[v].is_finite()).collect()
    };
    let sampler = Sampler::new(obs, &eligible, start);
    let unreachable = sampler.unreachable();
    if sampler.base_total == 0 {
        return Ok(ExpertPlan::stay(start, unreachable));
    }

    let mut best: Option<(f64, Vec<NodeId>)> = None;
    let mut consider = |order: Vec<NodeId>, cost: f64| {
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, order));
        }
    };
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, r as u64));
        let mut stops = vec![start];
        stops.extend(sampler.draw(&mut rng, &[]));
        let m = builder.matrix(&stops);
        let order = solve_open_tsp(&m, 0)?;
        let order = builder.prune(&sampler, &stops, order);
        let cost = open_tour_cost(&m, &order);
        consider(order.into_iter().map(|i| stops[i]).collect(), cost);
    }
    if let Some(prev) = warm {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, u64::MAX));
        let mut stops = vec![start];
        stops.extend(sampler.draw(&mut rng, prev));
        let m = builder.matrix(&stops);
        let mut order: Vec<usize> = (0..stops.len()).collect();
        two_opt(&m, &mut order);
        let order = builder.prune(&sampler, &stops, order);
        let cost = open_tour_cost(&m, &order);
        consider(order.into_iter().map(|i| stops[i]).collect(), cost);
    }

    let (cost, order) = best.expect("at least one candidate");
    let path = builder.expand(&order);
    Ok(ExpertPlan {
        start,
        viewpoints: order[1..].to_vec(),
        path,
        cost,
        unreachable_frontiers: unreachable,
    })
}

/// Privileged coverage tour from the node nearest `pose`.
pub fn plan_expert_path(
    map: &PrivilegedMap,
    pose: Pose2,
    frontiers: &PrivilegedFrontiers,
    restarts: usize,
    seed: u64,
    warm: Option<&[NodeId]>,
) -> Result<ExpertPlan> {
    let start = map.graph.robot_node(pose)?;
    let obs = frontiers.observability(map);
    plan_coverage(&map.graph, &obs, start, restarts, seed, warm)
}

/// First node after the start on the expanded tour; the start itself when the tour is empty.
pub fn expert_waypoint(plan: &ExpertPlan, robot: NodeId) -> Result<NodeId> {
    match plan.path.as_slice() {
        [] => Err(Error::State("expert plan is empty")),
        [first, rest @ ..] => {
            if *first != robot {
                return Err(Error::Precondition("expert plan does not start at the robot node"));
            }
            Ok(rest.first().copied().unwrap_or(*first))
        }
    }
}

/// Expert-distance reward in `[-1, 0]`, shrinking exponentially with the gap
/// between the chosen and expert waypoints, normalized by twice the neighbor threshold.
pub fn expert_reward(chosen: Pose2, expert: Pose2, neighbor_threshold: f64) -> Result<f64> {
    let d = chosen.distance(expert);
    reward_for_distance(d, neighbor_threshold)
}

pub fn reward_for_distance(d: f64, neighbor_threshold: f64) -> Result<f64> {
    let span = 2.0 * neighbor_threshold;
    if !(d >= 0.0) || d > span * (1.0 + 1e-12) {
        return Err(Error::Precondition("waypoints are farther apart than two neighbor thresholds"));
    }
    let x = (d / span).min(1.0);
    Ok((1.0 - libm::exp(x)) / (libm::exp(1.0) - 1.0))
}

/// Increase of the remaining optimal exploration length caused by one decision.
pub fn coverage_gap(c_move: f64, c_next: f64, c_prev: f64) -> f64 {
    c_move + c_next - c_prev
}
