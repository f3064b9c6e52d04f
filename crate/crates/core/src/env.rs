//! Episode environment: reset, step, observation assembly, expert reward and metrics.

use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::community::{
    assign_new_nodes, classify_global_nodes, default_cap, rebuild_global_graph, refine_partition,
    CommunityConfig, GlobalGraph, Partition,
};
use crate::error::{Error, Result};
use crate::expert::{
    coverage_gap, expert_reward, expert_waypoint, mix_seed, plan_expert_path, privileged_frontiers,
    ExpertPlan, PrivilegedMap,
};
use crate::grid::{
    detect_frontiers, raycast_scan, Cell, CellIndex, FrontierSet, OccupancyGrid, Pose2, SensorConfig,
};
use crate::mapgen::{generate_dungeon, MapGenParams};
use crate::roadmap::{
    dijkstra_tree, extract_local_view, LocalView, NodeId, RoadmapConfig, RoadmapGraph,
};
use crate::routing::{
    mark_guideposts, plan_global_reference, plan_local_references, GlobalReference, Guideposts,
    LocalReferences, Observability, UtilityMap,
};

const START_TAG: u64 = 0x5354_4152;
const EXPERT_TAG: u64 = 0x4558_5052;

/// Monotonic nanosecond clock used for timing; `no_std` builds have none of their own.
pub type Clock = fn() -> u64;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EnvConfig {
    /// Map size, room layout and cell resolution.
    pub map: MapGenParams,
    /// Sensor range in meters.
    pub sensor_range: f64,
    /// Roadmap lattice spacing in meters.
    pub node_resolution: f64,
    /// Edge length limit in meters; `2√2·node_resolution` when unset.
    pub neighbor_threshold: Option<f64>,
    /// Side of the square observation window in meters.
    pub local_window: f64,
    /// Frontier observation range in meters; `0.8·sensor_range` when unset.
    pub utility_range: Option<f64>,
    /// Community size cap; derived from the window and lattice when unset.
    pub community_cap: Option<usize>,
    pub modularity_resolution: f64,
    pub expert_restarts: usize,
    pub max_steps: usize,
    pub seed: u64,
    /// Plan the privileged expert every step (reward, coverage gap).
    pub expert: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            map: MapGenParams::default(),
            sensor_range: 20.0,
            node_resolution: 4.0,
            neighbor_threshold: None,
            local_window: 40.0,
            utility_range: None,
            community_cap: None,
            modularity_resolution: 1.0,
            expert_restarts: 10,
            max_steps: 200,
            seed: 0,
            expert: true,
        }
    }
}

impl EnvConfig {
    pub fn neighbor_threshold(&self) -> f64 {
        self.neighbor_threshold
            .unwrap_or(2.0 * core::f64::consts::SQRT_2 * self.node_resolution)
    }

    pub fn utility_range(&self) -> f64 {
        self.utility_range.unwrap_or(0.8 * self.sensor_range)
    }

    /// Range within which one scan resolves a free cell and its neighbors;
    /// the expert plans against this footprint.
    pub fn expert_range(&self) -> f64 {
        self.sensor_range - core::f64::consts::SQRT_2 * self.map.resolution - 1e-6
    }

    pub fn community_cap(&self) -> usize {
        self.community_cap
            .unwrap_or_else(|| default_cap(self.local_window, self.node_resolution))
    }

    pub fn roadmap(&self) -> RoadmapConfig {
        RoadmapConfig {
            node_resolution: self.node_resolution,
            neighbor_threshold: self.neighbor_threshold(),
        }
    }

    pub fn community(&self) -> CommunityConfig {
        CommunityConfig {
            resolution: self.modularity_resolution,
            cap: self.community_cap(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.map.validate()?;
        if !(self.sensor_range > 0.0) {
            return Err(Error::Config("sensor range must be positive"));
        }
        if !(self.node_resolution > 0.0) {
            return Err(Error::Config("node resolution must be positive"));
        }
        let dn = self.neighbor_threshold();
        if !(dn >= self.node_resolution) {
            return Err(Error::Config("neighbor threshold is shorter than the lattice step"));
        }
        if !(self.local_window >= 2.0 * dn) {
            return Err(Error::Config("local window must contain every neighbor of the robot"));
        }
        if !(self.expert_range() > 0.0) {
            return Err(Error::Config("sensor range is shorter than one cell diagonal"));
        }
        if !(self.utility_range() > 0.0) {
            return Err(Error::Config("utility range must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max steps must be positive"));
        }
        self.community().validate()?;
        if self.expert_restarts == 0 {
            return Err(Error::Config("at least one expert restart is required"));
        }
        Ok(())
    }
}

/// Node features and action set handed to a policy.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Observation {
    /// `[x, y, u, e, b]` per window node, rows sorted by node id.
    pub nodes: Vec<[f64; 5]>,
    /// Window edges as row pairs `i <= j`, self-edges included.
    pub edges: Vec<[u32; 2]>,
    pub current: u32,
    /// Candidate rows, the current row first.
    pub neighbors: Vec<u32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepInfo {
    pub step: usize,
    /// Expert waypoint before the move; absent without an expert.
    pub expert_waypoint: Option<Pose2>,
    /// Distance between the chosen and the expert waypoint.
    pub d: Option<f64>,
    /// Neighbor threshold the reward distance is normalized by.
    pub d_n: f64,
    /// Coverage gap of this step.
    pub f: Option<f64>,
    /// Length of the step's move.
    pub moved: f64,
    pub travel: f64,
    pub explored: f64,
    /// Expert tour length from the new state (zero once exploration is complete).
    pub expert_cost: Option<f64>,
    pub truncated: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Transition {
    pub observation: Observation,
    pub action: usize,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Expert tour computed for one state.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExpertTrace {
    pub step: usize,
    pub cost: f64,
    pub viewpoints: Vec<u32>,
    pub path_len: usize,
    pub pruned: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepTiming {
    pub pipeline_ns: u64,
    pub expert_ns: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub travel: f64,
    pub steps: usize,
    /// `(travel, explored fraction)` after reset and after every step.
    pub curve: Vec<(f64, f64)>,
    pub completed: bool,
    /// Wall times; empty without a clock. Never serialized.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub timings: Vec<StepTiming>,
}

/// Derived routing state for the current robot node.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub robot: NodeId,
    pub view: LocalView,
    pub frontiers: FrontierSet,
    /// Belief observability restricted to nodes reachable from the robot.
    pub observability: Observability,
    pub utilities: UtilityMap,
    pub reachable: Vec<bool>,
    pub coverable: usize,
    pub global: GlobalGraph,
    pub global_reference: GlobalReference,
    pub local_references: LocalReferences,
    pub guideposts: Guideposts,
    /// Action set in stencil order, the robot node first.
    pub neighbors: Vec<NodeId>,
    pub observation: Observation,
}

pub struct Env {
    cfg: EnvConfig,
    sensor: SensorConfig,
    truth: OccupancyGrid,
    belief: OccupancyGrid,
    graph: RoadmapGraph,
    partition: Partition,
    privileged: Option<PrivilegedMap>,
    snap: Snapshot,
    plan: Option<ExpertPlan>,
    traces: Vec<ExpertTrace>,
    metrics: Metrics,
    truth_free: usize,
    done: bool,
    idle_steps: usize,
    clock: Option<Clock>,
}

fn elapsed(clock: Option<Clock>, start: u64) -> u64 {
    clock.map_or(0, |c| c().saturating_sub(start))
}

impl Env {
    /// Generates the map from `cfg.seed` and starts at a seeded free lattice cell.
    pub fn reset(cfg: EnvConfig) -> Result<Self> {
        Self::reset_with_clock(cfg, None)
    }

    pub fn reset_with_clock(cfg: EnvConfig, clock: Option<Clock>) -> Result<Self> {
        cfg.validate()?;
        let dungeon = generate_dungeon(cfg.seed, &cfg.map)?;
        let start = pick_start(&dungeon.grid, &cfg)?;
        Self::with_map(cfg, dungeon.grid, start, clock)
    }

    /// Starts an episode on a given truth map from the lattice node at `start`.
    pub fn with_map(
        cfg: EnvConfig,
        truth: OccupancyGrid,
        start: CellIndex,
        clock: Option<Clock>,
    ) -> Result<Self> {
        cfg.validate()?;
        if (truth.resolution() - cfg.map.resolution).abs() > 1e-12 {
            return Err(Error::Config("map resolution differs from the configuration"));
        }
        if !truth.contains(start) || truth.get(start) != Cell::Free {
            return Err(Error::Precondition("start cell is not free"));
        }
        let graph = RoadmapGraph::new(&truth, cfg.roadmap())?;
        let step = graph.step();
        if start.x % step != 0 || start.y % step != 0 {
            return Err(Error::Precondition("start cell is not a lattice point"));
        }
        let t0 = clock.map_or(0, |c| c());
        let privileged = if cfg.expert {
            Some(PrivilegedMap::build(&truth, cfg.roadmap(), cfg.expert_range())?)
        } else {
            None
        };
        let expert_build = elapsed(clock, t0);

        let belief = truth.unknown_like();
        let truth_free = truth.count(Cell::Free);
        let placeholder = Snapshot::empty();
        let mut env = Self {
            sensor: SensorConfig {
                range: cfg.sensor_range,
            },
            cfg,
            truth,
            belief,
            graph,
            partition: Partition::new(),
            privileged,
            snap: placeholder,
            plan: None,
            traces: Vec::new(),
            metrics: Metrics::default(),
            truth_free,
            done: false,
            idle_steps: 0,
            clock,
        };
        let pose = env.truth.cell_center(start);
        let t1 = clock.map_or(0, |c| c());
        env.advance(pose)?;
        let pipeline_ns = elapsed(clock, t1);
        let t2 = clock.map_or(0, |c| c());
        env.replan()?;
        let expert_ns = expert_build + elapsed(clock, t2);
        if clock.is_some() {
            env.metrics.timings.push(StepTiming {
                pipeline_ns,
                expert_ns,
            });
        }
        let explored = env.explored_fraction();
        env.metrics.curve.push((0.0, explored));
        Ok(env)
    }

    /// Scans at `pose` and refreshes graph, partition and routing state.
    fn advance(&mut self, pose: Pose2) -> Result<usize> {
        let report = raycast_scan(&self.truth, &mut self.belief, pose, &self.sensor)?;
        self.graph.extend(&self.belief, report.dirty);
        let robot = self.graph.robot_node(pose)?;
        let view = extract_local_view(&self.graph, robot, self.cfg.local_window)?;
        let ccfg = self.cfg.community();
        assign_new_nodes(&view, &mut self.partition, &ccfg);
        refine_partition(&view, &self.graph, &mut self.partition, &ccfg);

        let tree = dijkstra_tree(&self.graph, robot, None);
        let reachable: Vec<bool> = tree.dist.iter().map(|d| d.is_finite()).collect();
        let frontiers = detect_frontiers(&self.belief);
        let observability = Observability::compute(
            &self.belief,
            &frontiers,
            &self.graph,
            self.cfg.utility_range(),
            Some(&reachable),
        );
        let utilities = UtilityMap {
            values: observability.utilities(),
        };
        let coverable = observability.observed().len();

        let mut global = rebuild_global_graph(&self.graph, &self.partition, robot)?;
        classify_global_nodes(&mut global, &self.partition, &utilities.values);
        let global_reference = plan_global_reference(&global)?;
        let local_references = plan_local_references(&view, &self.graph, robot, &utilities)?;
        let guideposts = mark_guideposts(
            &view,
            &local_references.paths,
            global_reference.next_segment(),
        );
        let neighbors = self.graph.ordered_neighbors(robot);
        let observation = assemble_observation(
            &self.graph,
            &view,
            robot,
            &utilities,
            &guideposts,
            &neighbors,
        );
        self.snap = Snapshot {
            robot,
            view,
            frontiers,
            observability,
            utilities,
            reachable,
            coverable,
            global,
            global_reference,
            local_references,
            guideposts,
            neighbors,
            observation,
        };
        Ok(report.revealed)
    }

    /// Expert tour for the current state, warm-started from the previous one.
    fn replan(&mut self) -> Result<()> {
        let Some(map) = &self.privileged else {
            return Ok(());
        };
        let frontiers = privileged_frontiers(&self.truth, &self.belief, map);
        let step = self.metrics.steps;
        let seed = mix_seed(mix_seed(self.cfg.seed, EXPERT_TAG), step as u64);
        let warm = self.plan.as_ref().map(|p| p.viewpoints.clone());
        let pose = self.graph.position(self.snap.robot);
        let plan = plan_expert_path(
            map,
            pose,
            &frontiers,
            self.cfg.expert_restarts,
            seed,
            warm.as_deref(),
        )?;
        self.traces.push(ExpertTrace {
            step,
            cost: plan.cost,
            viewpoints: plan.viewpoints.iter().map(|v| v.0).collect(),
            path_len: plan.path.len(),
            pruned: frontiers.pruned.len(),
        });
        self.plan = Some(plan);
        Ok(())
    }

    /// Moves to neighbor `action`, scans, updates every layer and emits the transition.
    pub fn step(&mut self, action: usize) -> Result<Transition> {
        if self.done {
            return Err(Error::State("episode is over"));
        }
        let Some(&target) = self.snap.neighbors.get(action) else {
            return Err(Error::Protocol("action index outside the neighbor list"));
        };
        let robot = self.snap.robot;
        let pre_complete = self.snap.coverable == 0;
        let plan = self.plan.take();
        let (waypoint, c_prev) = match (&plan, &self.privileged) {
            (Some(p), Some(map)) => {
                let start = map.graph.robot_node(self.graph.position(robot))?;
                let w = expert_waypoint(p, start)?;
                (Some(map.graph.position(w)), Some(p.cost))
            }
            _ => (None, None),
        };
        let chosen = self.graph.position(target);
        let d = waypoint.map(|w| chosen.distance(w));
        let reward = match waypoint {
            Some(w) if !pre_complete => expert_reward(chosen, w, self.cfg.neighbor_threshold())?,
            _ => 0.0,
        };

        let moved = self.graph.edge_length(robot, target);
        self.metrics.travel += moved;
        self.metrics.steps += 1;
        let t0 = self.clock.map_or(0, |c| c());
        let revealed = self.advance(chosen)?;
        let pipeline_ns = elapsed(self.clock, t0);
        self.idle_steps = if revealed == 0 { self.idle_steps + 1 } else { 0 };

        let complete = self.snap.coverable == 0;
        let truncated = !complete && self.metrics.steps >= self.cfg.max_steps;
        self.done = complete || truncated;
        self.metrics.completed = complete;

        let t1 = self.clock.map_or(0, |c| c());
        self.plan = plan;
        if complete {
            self.plan = None;
        } else {
            self.replan()?;
        }
        let expert_ns = elapsed(self.clock, t1);
        if self.clock.is_some() {
            self.metrics.timings.push(StepTiming {
                pipeline_ns,
                expert_ns,
            });
        }
        let c_next = c_prev.map(|_| self.plan.as_ref().map_or(0.0, |p| p.cost));
        let f = match (c_prev, c_next) {
            (Some(p), Some(n)) => Some(coverage_gap(moved, n, p)),
            _ => None,
        };
        let explored = self.explored_fraction();
        self.metrics.curve.push((self.metrics.travel, explored));
        Ok(Transition {
            observation: self.snap.observation.clone(),
            action,
            reward,
            done: self.done,
            info: StepInfo {
                step: self.metrics.steps,
                expert_waypoint: waypoint,
                d,
                d_n: self.cfg.neighbor_threshold(),
                f,
                moved,
                travel: self.metrics.travel,
                explored,
                expert_cost: c_next,
                truncated,
            },
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn observation(&self) -> &Observation {
        &self.snap.observation
    }

    pub fn snapshot(&self) -> &Snapshot {
        &self.snap
    }

    pub fn graph(&self) -> &RoadmapGraph {
        &self.graph
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn truth(&self) -> &OccupancyGrid {
        &self.truth
    }

    pub fn belief(&self) -> &OccupancyGrid {
        &self.belief
    }

    pub fn privileged(&self) -> Option<&PrivilegedMap> {
        self.privileged.as_ref()
    }

    /// Expert tour from the current state.
    pub fn expert_plan(&self) -> Option<&ExpertPlan> {
        self.plan.as_ref()
    }

    pub fn expert_traces(&self) -> &[ExpertTrace] {
        &self.traces
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn robot(&self) -> NodeId {
        self.snap.robot
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// No frontier is observable from a reachable node.
    pub fn is_complete(&self) -> bool {
        self.snap.coverable == 0
    }

    /// Consecutive steps that revealed no cell.
    pub fn idle_steps(&self) -> usize {
        self.idle_steps
    }

    pub fn steps(&self) -> usize {
        self.metrics.steps
    }

    /// Known free cells over truth free cells.
    pub fn explored_fraction(&self) -> f64 {
        if self.truth_free == 0 {
            return 1.0;
        }
        self.belief.count(Cell::Free) as f64 / self.truth_free as f64
    }

    /// Action index of the expert waypoint.
    pub fn expert_action(&self) -> Option<usize> {
        let map = self.privileged.as_ref()?;
        let plan = self.plan.as_ref()?;
        let start = map.graph.robot_node(self.graph.position(self.snap.robot)).ok()?;
        let w = expert_waypoint(plan, start).ok()?;
        let cell = map.graph.node(w).cell;
        self.snap
            .neighbors
            .iter()
            .position(|&n| self.graph.node(n).cell == cell)
    }

    /// Action index of a roadmap node, when it is a neighbor of the robot.
    pub fn action_for(&self, node: NodeId) -> Option<usize> {
        self.snap.neighbors.iter().position(|&n| n == node)
    }
}

impl Snapshot {
    fn empty() -> Self {
        Self {
            robot: NodeId(0),
            view: LocalView::default(),
            frontiers: FrontierSet::default(),
            observability: Observability::default(),
            utilities: UtilityMap::default(),
            reachable: Vec::new(),
            coverable: 0,
            global: GlobalGraph::default(),
            global_reference: GlobalReference::default(),
            local_references: LocalReferences::default(),
            guideposts: Guideposts::default(),
            neighbors: Vec::new(),
            observation: Observation::default(),
        }
    }
}

fn pick_start(truth: &OccupancyGrid, cfg: &EnvConfig) -> Result<CellIndex> {
    let step = libm::round(cfg.node_resolution / truth.resolution()) as usize;
    if step == 0 {
        return Err(Error::Config("node resolution is finer than the map"));
    }
    let mut candidates = Vec::new();
    for y in (0..truth.height()).step_by(step) {
        for x in (0..truth.width()).step_by(step) {
            let c = CellIndex::new(x, y);
            if truth.get(c) == Cell::Free {
                candidates.push(c);
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::Config("map has no free lattice cell to start from"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, START_TAG));
    Ok(candidates[rng.gen_range(0..candidates.len())])
}

/// Builds the normalized node table for the window around `robot`.
pub fn assemble_observation(
    graph: &RoadmapGraph,
    view: &LocalView,
    robot: NodeId,
    utilities: &UtilityMap,
    guideposts: &Guideposts,
    neighbors: &[NodeId],
) -> Observation {
    let center = graph.position(robot);
    let half = view.size / 2.0;
    let umax = view
        .nodes
        .iter()
        .map(|&id| utilities.get(id))
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let nodes = view
        .nodes
        .iter()
        .enumerate()
        .map(|(row, &id)| {
            let p = graph.position(id);
            [
                (p.x - center.x) / half,
                (p.y - center.y) / half,
                utilities.get(id) as f64 / umax,
                flag(guideposts.local[row]),
                flag(guideposts.global[row]),
            ]
        })
        .collect();
    let row = |id: NodeId| view.local_index(id).expect("window member") as u32;
    Observation {
        nodes,
        edges: view.edges.iter().map(|&(a, b)| [row(a), row(b)]).collect(),
        current: row(robot),
        neighbors: neighbors.iter().map(|&n| row(n)).collect(),
    }
}
