//! Incremental lattice roadmap over free space, the sliding local window, and
//! shortest-path primitives.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::grid::{cells_visible, Cell, CellIndex, CellRect, OccupancyGrid, Pose2};

/// Stable node identifier; ids are allocated in insertion order and never reused.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoadmapConfig {
    /// Lattice spacing in meters; must be a whole number of grid cells.
    pub node_resolution: f64,
    /// Maximum edge length in meters.
    pub neighbor_threshold: f64,
}

impl Default for RoadmapConfig {
    fn default() -> Self {
        Self::with_resolution(4.0)
    }
}

impl RoadmapConfig {
    pub fn with_resolution(node_resolution: f64) -> Self {
        Self {
            node_resolution,
            neighbor_threshold: 2.0 * core::f64::consts::SQRT_2 * node_resolution,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub cell: CellIndex,
    /// Lattice coordinates (cell coordinates divided by the lattice step).
    pub lattice: (usize, usize),
    pub position: Pose2,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtendReport {
    pub added_nodes: Vec<NodeId>,
    pub added_edges: usize,
}

const LENGTH_EPS: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct RoadmapGraph {
    cfg: RoadmapConfig,
    step: usize,
    lattice_w: usize,
    lattice_h: usize,
    lattice: Vec<Option<NodeId>>,
    /// Lattice offsets within the neighbor threshold, self first, then row-major.
    offsets: Vec<(i64, i64)>,
    nodes: Vec<Node>,
    adjacency: Vec<Vec<NodeId>>,
    edge_count: usize,
}

impl RoadmapGraph {
    /// Empty roadmap laid over a grid with the given geometry.
    pub fn new(grid: &OccupancyGrid, cfg: RoadmapConfig) -> Result<Self> {
        let ratio = cfg.node_resolution / grid.resolution();
        let step = libm::round(ratio);
        if !(step >= 1.0) || libm::fabs(ratio - step) > 1e-6 * ratio {
            return Err(Error::Config(
                "node resolution must be a positive whole multiple of the map resolution",
            ));
        }
        if !(cfg.neighbor_threshold >= cfg.node_resolution) {
            return Err(Error::Config("neighbor threshold must reach the adjacent lattice point"));
        }
        let step = step as usize;
        let reach = libm::floor(cfg.neighbor_threshold / cfg.node_resolution + 1e-9) as i64;
        let mut offsets = vec![(0i64, 0i64)];
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let len = libm::hypot(dx as f64, dy as f64) * cfg.node_resolution;
                if (dx, dy) != (0, 0) && len <= cfg.neighbor_threshold + LENGTH_EPS {
                    offsets.push((dx, dy));
                }
            }
        }
        let lattice_w = (grid.width() - 1) / step + 1;
        let lattice_h = (grid.height() - 1) / step + 1;
        Ok(Self {
            cfg,
            step,
            lattice_w,
            lattice_h,
            lattice: vec![None; lattice_w * lattice_h],
            offsets,
            nodes: Vec::new(),
            adjacency: Vec::new(),
            edge_count: 0,
        })
    }

    pub fn config(&self) -> &RoadmapConfig {
        &self.cfg
    }

    /// Lattice step in cells.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn position(&self, id: NodeId) -> Pose2 {
        self.nodes[id.index()].position
    }

    /// Adjacent nodes sorted by id, the node itself included.
    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.adjacency[id.index()]
    }

    /// Undirected edge count, self-edges included.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency[a.index()].binary_search(&b).is_ok()
    }

    /// Undirected edges `(a, b)` with `a <= b`, ordered by `(a, b)`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes.iter().flat_map(move |n| {
            self.adjacency[n.id.index()]
                .iter()
                .filter(move |&&m| m >= n.id)
                .map(move |&m| (n.id, m))
        })
    }

    pub fn edge_length(&self, a: NodeId, b: NodeId) -> f64 {
        self.position(a).distance(self.position(b))
    }

    pub fn node_at_lattice(&self, lx: usize, ly: usize) -> Option<NodeId> {
        if lx < self.lattice_w && ly < self.lattice_h {
            self.lattice[ly * self.lattice_w + lx]
        } else {
            None
        }
    }

    /// Node sitting on a lattice cell, if any.
    pub fn node_at_cell(&self, c: CellIndex) -> Option<NodeId> {
        if c.x % self.step != 0 || c.y % self.step != 0 {
            return None;
        }
        self.node_at_lattice(c.x / self.step, c.y / self.step)
    }

    /// Nodes whose cell lies within `radius_cells` (Euclidean, in cells) of `c`.
    pub fn for_each_node_near(&self, c: CellIndex, radius_cells: f64, mut f: impl FnMut(NodeId)) {
        let s = self.step as f64;
        let lx0 = libm::ceil((c.x as f64 - radius_cells) / s).max(0.0) as usize;
        let ly0 = libm::ceil((c.y as f64 - radius_cells) / s).max(0.0) as usize;
        let lx1 = libm::floor((c.x as f64 + radius_cells) / s).max(-1.0);
        let ly1 = libm::floor((c.y as f64 + radius_cells) / s).max(-1.0);
        if lx1 < 0.0 || ly1 < 0.0 {
            return;
        }
        let lx1 = (lx1 as usize).min(self.lattice_w - 1);
        let ly1 = (ly1 as usize).min(self.lattice_h - 1);
        let r2 = radius_cells * radius_cells;
        for ly in ly0..=ly1 {
            for lx in lx0..=lx1 {
                if let Some(id) = self.lattice[ly * self.lattice_w + lx] {
                    if self.nodes[id.index()].cell.dist2(c) as f64 <= r2 {
                        f(id);
                    }
                }
            }
        }
    }

    /// Neighbors of `v` in action order: `v` itself, then by lattice offset row-major.
    pub fn ordered_neighbors(&self, v: NodeId) -> Vec<NodeId> {
        let (lx, ly) = self.node(v).lattice;
        self.offsets
            .iter()
            .filter_map(|&(dx, dy)| {
                let nx = lx as i64 + dx;
                let ny = ly as i64 + dy;
                if nx < 0 || ny < 0 {
                    return None;
                }
                let n = self.node_at_lattice(nx as usize, ny as usize)?;
                self.has_edge(v, n).then_some(n)
            })
            .collect()
    }

    fn add_edge(&mut self, a: NodeId, b: NodeId) -> bool {
        let list = &mut self.adjacency[a.index()];
        match list.binary_search(&b) {
            Ok(_) => false,
            Err(pos) => {
                list.insert(pos, b);
                if a != b {
                    let other = &mut self.adjacency[b.index()];
                    let pos = other.binary_search(&a).unwrap_err();
                    other.insert(pos, a);
                }
                self.edge_count += 1;
                true
            }
        }
    }

    /// Adds every Free lattice point of `belief` that is not yet a node, connects
    /// new nodes to all nodes within the neighbor threshold that pass line of
    /// sight, and connects older pairs whose segment newly became visible.
    ///
    /// `dirty` restricts the re-check of older pairs to segments whose bounding
    /// box meets the changed region; `None` re-checks every unconnected pair.
    pub fn extend(&mut self, belief: &OccupancyGrid, dirty: Option<CellRect>) -> ExtendReport {
        let old_len = self.nodes.len();
        let mut report = ExtendReport::default();
        for ly in 0..self.lattice_h {
            for lx in 0..self.lattice_w {
                let slot = ly * self.lattice_w + lx;
                let cell = CellIndex::new(lx * self.step, ly * self.step);
                if self.lattice[slot].is_none() && belief.get(cell) == Cell::Free {
                    let id = NodeId(self.nodes.len() as u32);
                    self.lattice[slot] = Some(id);
                    self.nodes.push(Node {
                        id,
                        cell,
                        lattice: (lx, ly),
                        position: belief.cell_center(cell),
                    });
                    self.adjacency.push(Vec::new());
                    report.added_nodes.push(id);
                }
            }
        }

        for i in 0..self.nodes.len() {
            let u = NodeId(i as u32);
            let u_new = i >= old_len;
            let (lx, ly) = self.nodes[i].lattice;
            let ucell = self.nodes[i].cell;
            for k in 0..self.offsets.len() {
                let (dx, dy) = self.offsets[k];
                let (nx, ny) = (lx as i64 + dx, ly as i64 + dy);
                if nx < 0 || ny < 0 {
                    continue;
                }
                let Some(v) = self.node_at_lattice(nx as usize, ny as usize) else {
                    continue;
                };
                let v_new = v.index() >= old_len;
                // each pair once: new-old from the new side, other pairs from the smaller id
                if u_new != v_new {
                    if !u_new {
                        continue;
                    }
                } else if v < u {
                    continue;
                }
                if self.has_edge(u, v) {
                    continue;
                }
                let vcell = self.nodes[v.index()].cell;
                if !u_new && !v_new {
                    if let Some(rect) = dirty {
                        let mut seg = CellRect::point(ucell);
                        seg.include(vcell);
                        if !seg.intersects(&rect) {
                            continue;
                        }
                    }
                }
                if cells_visible(belief, ucell, vcell) && self.add_edge(u, v) {
                    report.added_edges += 1;
                }
            }
        }
        report
    }

    /// Node nearest to `p`; ties go to the smallest id.
    pub fn robot_node(&self, p: Pose2) -> Result<NodeId> {
        let mut best: Option<(f64, NodeId)> = None;
        for n in &self.nodes {
            let d = n.position.distance(p);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, n.id));
            }
        }
        best.map(|(_, id)| id)
            .ok_or(Error::State("roadmap has no nodes"))
    }
}

/// Adjacency access shared by roadmaps and plain test graphs.
pub trait Neighborhood {
    /// Adjacent nodes sorted by id; may include the node itself.
    fn neighbors(&self, id: NodeId) -> &[NodeId];
}

impl Neighborhood for RoadmapGraph {
    fn neighbors(&self, id: NodeId) -> &[NodeId] {
        RoadmapGraph::neighbors(self, id)
    }
}

/// Roadmap nodes and edges inside a closed square window around the robot node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LocalView {
    pub center: NodeId,
    pub size: f64,
    /// Member node ids, ascending.
    pub nodes: Vec<NodeId>,
    /// Member edges `(a, b)` with `a <= b`, self-edges included.
    pub edges: Vec<(NodeId, NodeId)>,
    member: Vec<Option<u32>>,
}

impl LocalView {
    pub fn contains(&self, id: NodeId) -> bool {
        self.member.get(id.index()).copied().flatten().is_some()
    }

    /// Row of a node inside `nodes`.
    pub fn local_index(&self, id: NodeId) -> Option<usize> {
        self.member.get(id.index()).copied().flatten().map(|i| i as usize)
    }

    /// Membership mask indexed by node id.
    pub fn mask(&self) -> Vec<bool> {
        self.member.iter().map(Option::is_some).collect()
    }

    /// View over explicit nodes `0..n` and edges, for graphs without geometry.
    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId)]) -> Self {
        let mut edges: Vec<(NodeId, NodeId)> = edges
            .iter()
            .map(|&(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        Self {
            center: NodeId(0),
            size: f64::INFINITY,
            nodes: (0..n as u32).map(NodeId).collect(),
            edges,
            member: (0..n as u32).map(Some).collect(),
        }
    }
}

pub fn extract_local_view(graph: &RoadmapGraph, center: NodeId, size: f64) -> Result<LocalView> {
    if center.index() >= graph.len() {
        return Err(Error::Precondition("window center is not a roadmap node"));
    }
    let c = graph.position(center);
    let half = size / 2.0 + LENGTH_EPS;
    let mut member = vec![None; graph.len()];
    let mut nodes = Vec::new();
    for n in graph.nodes() {
        if libm::fabs(n.position.x - c.x) <= half && libm::fabs(n.position.y - c.y) <= half {
            member[n.id.index()] = Some(nodes.len() as u32);
            nodes.push(n.id);
        }
    }
    let edges = graph
        .edges()
        .filter(|(a, b)| member[a.index()].is_some() && member[b.index()].is_some())
        .collect();
    Ok(LocalView {
        center,
        size,
        nodes,
        edges,
        member,
    })
}

#[derive(Clone, Copy, Debug)]
struct Queued {
    key: f64,
    id: NodeId,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // reversed: BinaryHeap pops the smallest key, then the smallest id
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Shortest path by A* with the straight-line heuristic.
pub fn astar_path(graph: &RoadmapGraph, src: NodeId, dst: NodeId) -> Option<(Vec<NodeId>, f64)> {
    let n = graph.len();
    let goal = graph.position(dst);
    let mut g = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<NodeId>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g[src.index()] = 0.0;
    open.push(Queued {
        key: graph.position(src).distance(goal),
        id: src,
    });
    while let Some(Queued { id, .. }) = open.pop() {
        if closed[id.index()] {
            continue;
        }
        if id == dst {
            let path = unwind(&parent, dst);
            return Some((path, g[dst.index()]));
        }
        closed[id.index()] = true;
        for &m in graph.neighbors(id) {
            if m == id || closed[m.index()] {
                continue;
            }
            let cand = g[id.index()] + graph.edge_length(id, m);
            if cand < g[m.index()] {
                g[m.index()] = cand;
                parent[m.index()] = Some(id);
                open.push(Queued {
                    key: cand + graph.position(m).distance(goal),
                    id: m,
                });
            }
        }
    }
    None
}

fn unwind(parent: &[Option<NodeId>], dst: NodeId) -> Vec<NodeId> {
    let mut path = vec![dst];
    let mut cur = dst;
    while let Some(p) = parent[cur.index()] {
        path.push(p);
        cur = p;
    }
    path.reverse();
    path
}

/// Single-source shortest paths; unreachable nodes keep an infinite distance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ShortestPathTree {
    pub source: NodeId,
    pub dist: Vec<f64>,
    pub parent: Vec<Option<NodeId>>,
}

impl ShortestPathTree {
    pub fn reachable(&self, id: NodeId) -> bool {
        self.dist[id.index()].is_finite()
    }

    pub fn path_to(&self, id: NodeId) -> Option<Vec<NodeId>> {
        self.reachable(id).then(|| unwind(&self.parent, id))
    }
}

/// Dijkstra from `src`, optionally restricted to nodes with `mask[id] == true`.
pub fn dijkstra_tree(graph: &RoadmapGraph, src: NodeId, mask: Option<&[bool]>) -> ShortestPathTree {
    let n = graph.len();
    let allowed = |id: NodeId| mask.map_or(true, |m| m.get(id.index()).copied().unwrap_or(false));
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    if allowed(src) {
        dist[src.index()] = 0.0;
        heap.push(Queued { key: 0.0, id: src });
    }
    while let Some(Queued { id, .. }) = heap.pop() {
        if done[id.index()] {
            continue;
        }
        done[id.index()] = true;
        for &m in graph.neighbors(id) {
            if m == id || done[m.index()] || !allowed(m) {
                continue;
            }
            let cand = dist[id.index()] + graph.edge_length(id, m);
            if cand < dist[m.index()] {
                dist[m.index()] = cand;
                parent[m.index()] = Some(id);
                heap.push(Queued { key: cand, id: m });
            }
        }
    }
    ShortestPathTree {
        source: src,
        dist,
        parent,
    }
}

/// Sum of edge lengths along a node path.
pub fn path_length(graph: &RoadmapGraph, path: &[NodeId]) -> f64 {
    path.windows(2).map(|w| graph.edge_length(w[0], w[1])).sum()
}
