//! Frontier utilities, the global reference tour, local reference paths and
//! guidepost flags.

use alloc::vec;
use alloc::vec::Vec;

use crate::community::GlobalGraph;
use crate::error::{Error, Result};
use crate::grid::{cells_visible, FrontierSet, OccupancyGrid};
use crate::roadmap::{dijkstra_tree, LocalView, NodeId, RoadmapGraph, ShortestPathTree};
use crate::tsp::{solve_open_tsp, CostMatrix};

/// Compressed row lists.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<u32>,
    items: Vec<u32>,
}

impl Csr {
    /// Builds rows from `(row, item)` pairs; items keep their input order within a row.
    pub fn from_pairs(rows: usize, pairs: &[(u32, u32)]) -> Self {
        let mut offsets = vec![0u32; rows + 1];
        for &(r, _) in pairs {
            offsets[r as usize + 1] += 1;
        }
        for i in 0..rows {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut items = vec![0u32; pairs.len()];
        for &(r, it) in pairs {
            items[fill[r as usize] as usize] = it;
            fill[r as usize] += 1;
        }
        Self { offsets, items }
    }

    pub fn rows(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.items[self.offsets[r] as usize..self.offsets[r + 1] as usize]
    }
}

/// Which roadmap nodes observe which frontier cells.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Observability {
    /// Frontier cells (linear indices); position in this list is the frontier id.
    pub frontiers: Vec<usize>,
    /// Node id -> observed frontier ids, ascending.
    pub by_node: Csr,
    /// Frontier id -> observing node ids, ascending.
    pub by_frontier: Csr,
}

impl Observability {
    /// Frontier `f` is observable from node `v` when it lies within `range`
    /// meters and the segment between them is Free in `grid`. Only nodes with
    /// `mask[id]` set are considered.
    pub fn compute(
        grid: &OccupancyGrid,
        frontiers: &FrontierSet,
        graph: &RoadmapGraph,
        range: f64,
        mask: Option<&[bool]>,
    ) -> Self {
        let radius = range / grid.resolution() + 1e-9;
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        let mut observers: Vec<NodeId> = Vec::new();
        for (fi, &lin) in frontiers.cells.iter().enumerate() {
            let cell = grid.unlinear(lin);
            observers.clear();
            graph.for_each_node_near(cell, radius, |id| {
                if mask.map_or(true, |m| m[id.index()]) {
                    observers.push(id);
                }
            });
            observers.sort_unstable();
            for &id in &observers {
                if cells_visible(grid, graph.node(id).cell, cell) {
                    pairs.push((fi as u32, id.0));
                }
            }
        }
        Self::from_frontier_pairs(frontiers.cells.clone(), graph.len(), &pairs)
    }

    /// Builds both directions from `(frontier id, node id)` pairs sorted by frontier id.
    pub fn from_frontier_pairs(frontiers: Vec<usize>, nodes: usize, pairs: &[(u32, u32)]) -> Self {
        let by_frontier = Csr::from_pairs(frontiers.len(), pairs);
        let swapped: Vec<(u32, u32)> = pairs.iter().map(|&(f, v)| (v, f)).collect();
        let by_node = Csr::from_pairs(nodes, &swapped);
        Self {
            frontiers,
            by_node,
            by_frontier,
        }
    }

    /// Per-node frontier counts.
    pub fn utilities(&self) -> Vec<u32> {
        (0..self.by_node.rows())
            .map(|v| self.by_node.row(v).len() as u32)
            .collect()
    }

    /// Frontier cells observed by at least one node.
    pub fn observed(&self) -> FrontierSet {
        FrontierSet {
            cells: self
                .frontiers
                .iter()
                .enumerate()
                .filter(|(fi, _)| !self.by_frontier.row(*fi).is_empty())
                .map(|(_, &c)| c)
                .collect(),
        }
    }
}

/// Per-node utility: number of frontier cells within range and in line of sight.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UtilityMap {
    pub values: Vec<u32>,
}

impl UtilityMap {
    pub fn get(&self, id: NodeId) -> u32 {
        self.values.get(id.index()).copied().unwrap_or(0)
    }

    pub fn utility_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &u)| u > 0)
            .map(|(i, _)| NodeId(i as u32))
    }
}

pub fn compute_utilities(
    belief: &OccupancyGrid,
    frontiers: &FrontierSet,
    graph: &RoadmapGraph,
    range: f64,
) -> UtilityMap {
    UtilityMap {
        values: Observability::compute(belief, frontiers, graph, range, None).utilities(),
    }
}

/// Frontiers that some (masked) roadmap node observes within `range`.
pub fn coverable_frontiers(
    belief: &OccupancyGrid,
    frontiers: &FrontierSet,
    graph: &RoadmapGraph,
    range: f64,
    mask: Option<&[bool]>,
) -> FrontierSet {
    Observability::compute(belief, frontiers, graph, range, mask).observed()
}

/// Open tour over the current and all unexplored global nodes, expanded to roadmap nodes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GlobalReference {
    /// Global node indices in visiting order, starting at the current one.
    pub order: Vec<usize>,
    /// Roadmap path starting at the robot node.
    pub path: Vec<NodeId>,
    /// `path` index where each leg after the first global node ends.
    pub leg_ends: Vec<usize>,
    pub cost: f64,
    /// Unexplored global nodes with no route from the current one.
    pub unreachable: Vec<usize>,
}

impl GlobalReference {
    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    /// Roadmap path from the robot to the next global node of the tour.
    pub fn next_segment(&self) -> &[NodeId] {
        match self.leg_ends.first() {
            Some(&end) => &self.path[..=end],
            None => &self.path,
        }
    }
}

/// Dijkstra over global edges; returns distances and the incoming edge per node.
fn global_dijkstra(g: &GlobalGraph, src: usize) -> (Vec<f64>, Vec<Option<usize>>) {
    let n = g.nodes.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut via = vec![None; n];
    let mut done = vec![false; n];
    dist[src] = 0.0;
    loop {
        let mut u = usize::MAX;
        for i in 0..n {
            if !done[i] && dist[i].is_finite() && (u == usize::MAX || dist[i] < dist[u]) {
                u = i;
            }
        }
        if u == usize::MAX {
            break;
        }
        done[u] = true;
        for &e in &g.incident[u] {
            let edge = &g.edges[e];
            let v = if edge.a == u { edge.b } else { edge.a };
            let cand = dist[u] + edge.cost;
            if cand < dist[v] {
                dist[v] = cand;
                via[v] = Some(e);
            }
        }
    }
    (dist, via)
}

/// Appends the roadmap route `from -> to` (global indices) to `path`.
fn append_route(g: &GlobalGraph, via: &[Option<usize>], from: usize, to: usize, path: &mut Vec<NodeId>) {
    let mut hops = Vec::new();
    let mut cur = to;
    while cur != from {
        let e = via[cur].expect("route exists");
        hops.push(e);
        let edge = &g.edges[e];
        cur = if edge.a == cur { edge.b } else { edge.a };
    }
    let mut at = from;
    for &e in hops.iter().rev() {
        let edge = &g.edges[e];
        let forward = edge.a == at;
        let nodes: Vec<NodeId> = if forward {
            edge.path.clone()
        } else {
            edge.path.iter().rev().copied().collect()
        };
        let skip = usize::from(path.last() == nodes.first());
        path.extend_from_slice(&nodes[skip..]);
        at = if forward { edge.b } else { edge.a };
    }
}

pub fn plan_global_reference(global: &GlobalGraph) -> Result<GlobalReference> {
    if global.nodes.is_empty() {
        return Ok(GlobalReference::default());
    }
    let cur = global.current;
    let any_unexplored = global.nodes.iter().any(|n| !n.explored);
    if !any_unexplored {
        return Ok(GlobalReference::default());
    }
    let (dist0, _) = global_dijkstra(global, cur);
    let mut stops = vec![cur];
    let mut unreachable = Vec::new();
    for (i, n) in global.nodes.iter().enumerate() {
        if i != cur && !n.explored {
            if dist0[i].is_finite() {
                stops.push(i);
            } else {
                unreachable.push(i);
            }
        }
    }
    let trees: Vec<(Vec<f64>, Vec<Option<usize>>)> =
        stops.iter().map(|&s| global_dijkstra(global, s)).collect();
    let matrix = CostMatrix::from_fn(stops.len(), |i, j| {
        let (a, b) = (trees[i].0[stops[j]], trees[j].0[stops[i]]);
        // both directions agree up to rounding; take the smaller for exact symmetry
        a.min(b)
    });
    let order = solve_open_tsp(&matrix, 0)?;
    let mut path = vec![global.nodes[cur].site];
    let mut leg_ends = Vec::new();
    let mut cost = 0.0;
    for w in order.windows(2) {
        let (from, to) = (stops[w[0]], stops[w[1]]);
        append_route(global, &trees[w[0]].1, from, to, &mut path);
        leg_ends.push(path.len() - 1);
        cost += trees[w[0]].0[to];
    }
    Ok(GlobalReference {
        order: order.into_iter().map(|i| stops[i]).collect(),
        path,
        leg_ends,
        cost,
        unreachable,
    })
}

/// Shortest in-window paths from the robot node to every in-window utility node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LocalReferences {
    pub tree: ShortestPathTree,
    pub paths: Vec<Vec<NodeId>>,
    pub unreachable: Vec<NodeId>,
}

pub fn plan_local_references(
    view: &LocalView,
    graph: &RoadmapGraph,
    v_cur: NodeId,
    utilities: &UtilityMap,
) -> Result<LocalReferences> {
    if !view.contains(v_cur) {
        return Err(Error::Precondition("robot node is outside the local view"));
    }
    let mask = view.mask();
    let tree = dijkstra_tree(graph, v_cur, Some(&mask));
    let mut paths = Vec::new();
    let mut unreachable = Vec::new();
    for &id in &view.nodes {
        if utilities.get(id) == 0 {
            continue;
        }
        match tree.path_to(id) {
            Some(p) => paths.push(p),
            None => unreachable.push(id),
        }
    }
    Ok(LocalReferences {
        tree,
        paths,
        unreachable,
    })
}

/// Local (`e`) and global (`b`) guidepost flags, one per view row.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Guideposts {
    pub local: Vec<bool>,
    pub global: Vec<bool>,
}

/// `local[i]` is set iff row `i` lies on one of `local_paths`; `global[i]` iff it
/// lies on the in-window prefix of `global_segment`.
pub fn mark_guideposts(view: &LocalView, local_paths: &[Vec<NodeId>], global_segment: &[NodeId]) -> Guideposts {
    let n = view.nodes.len();
    let mut g = Guideposts {
        local: vec![false; n],
        global: vec![false; n],
    };
    for path in local_paths {
        for &id in path {
            if let Some(i) = view.local_index(id) {
                g.local[i] = true;
            }
        }
    }
    for &id in global_segment {
        match view.local_index(id) {
            Some(i) => g.global[i] = true,
            None => break,
        }
    }
    g
}
