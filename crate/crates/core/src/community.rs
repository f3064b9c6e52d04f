//! Incremental modularity-based partition of the local graph and the sparse
//! global graph built on top of it.
//!
//! Only nodes that appear for the first time are placed; once a node has a
//! community it keeps it. New nodes start as singletons, are greedily moved to
//! the neighboring community with the best modularity gain, then communities
//! that lost internal connectivity are split and fragments made only of new
//! nodes are merged into neighbors when that raises modularity. Community sizes
//! never exceed the cap.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Pose2;
use crate::roadmap::{astar_path, LocalView, Neighborhood, NodeId, RoadmapGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CommunityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommunityConfig {
    /// Linear resolution parameter of the modularity score.
    pub resolution: f64,
    /// Maximum number of nodes per community.
    pub cap: usize,
}

impl Default for CommunityConfig {
    fn default() -> Self {
        Self {
            resolution: 1.0,
            cap: default_cap(40.0, 4.0),
        }
    }
}

impl CommunityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) {
            return Err(Error::Config("modularity resolution must be positive"));
        }
        if self.cap == 0 {
            return Err(Error::Config("community cap must be at least one"));
        }
        Ok(())
    }
}

/// round((window / spacing)^2 / 10), at least one.
pub fn default_cap(local_window: f64, node_resolution: f64) -> usize {
    let r = local_window / node_resolution;
    (libm::round(r * r / 10.0) as usize).max(1)
}

/// Modularity of a partition of an unweighted undirected graph.
///
/// `edges` lists each undirected edge once; self-loops are ignored.
/// `community[i]` is the label of node `i`.
pub fn modularity(
    node_count: usize,
    edges: &[(usize, usize)],
    community: &[usize],
    resolution: f64,
) -> Result<f64> {
    assert_eq!(community.len(), node_count, "one label per node");
    let mut degree = vec![0.0f64; node_count];
    let mut m = 0.0;
    let mut internal: BTreeMap<usize, f64> = BTreeMap::new();
    for &(a, b) in edges {
        if a == b {
            continue;
        }
        degree[a] += 1.0;
        degree[b] += 1.0;
        m += 1.0;
        if community[a] == community[b] {
            *internal.entry(community[a]).or_default() += 1.0;
        }
    }
    if m == 0.0 {
        return Err(Error::UndefinedScore);
    }
    let mut totals: BTreeMap<usize, f64> = BTreeMap::new();
    for (i, &c) in community.iter().enumerate() {
        *totals.entry(c).or_default() += degree[i];
    }
    let q = totals
        .iter()
        .map(|(c, &sigma)| {
            let l = internal.get(c).copied().unwrap_or(0.0);
            l / m - resolution * (sigma / (2.0 * m)) * (sigma / (2.0 * m))
        })
        .sum();
    Ok(q)
}

/// A community split because its members stopped being connected.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitEvent {
    pub original: CommunityId,
    /// Fresh ids given to the fragments that left the original community.
    pub fragments: Vec<CommunityId>,
}

#[derive(Clone, Debug, Default)]
pub struct Partition {
    assignment: Vec<Option<CommunityId>>,
    members: BTreeMap<CommunityId, Vec<NodeId>>,
    next_id: u32,
    fresh: Vec<NodeId>,
    splits: Vec<SplitEvent>,
}

impl Partition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn community_of(&self, id: NodeId) -> Option<CommunityId> {
        self.assignment.get(id.index()).copied().flatten()
    }

    /// Community membership, sorted by node id.
    pub fn members(&self, c: CommunityId) -> &[NodeId] {
        self.members.get(&c).map_or(&[], Vec::as_slice)
    }

    pub fn communities(&self) -> impl Iterator<Item = (CommunityId, &[NodeId])> {
        self.members.iter().map(|(&c, m)| (c, m.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Nodes placed by the most recent `assign_new_nodes` call.
    pub fn fresh_nodes(&self) -> &[NodeId] {
        &self.fresh
    }

    /// Splits performed by the most recent `refine_partition` call.
    pub fn splits(&self) -> &[SplitEvent] {
        &self.splits
    }

    /// Node-to-community assignment indexed by node id.
    pub fn assignment(&self) -> &[Option<CommunityId>] {
        &self.assignment
    }

    fn allocate(&mut self) -> CommunityId {
        let id = CommunityId(self.next_id);
        self.next_id += 1;
        id
    }

    fn size(&self, c: CommunityId) -> usize {
        self.members.get(&c).map_or(0, Vec::len)
    }

    fn insert(&mut self, id: NodeId, c: CommunityId) {
        if self.assignment.len() <= id.index() {
            self.assignment.resize(id.index() + 1, None);
        }
        self.assignment[id.index()] = Some(c);
        let list = self.members.entry(c).or_default();
        let pos = list.binary_search(&id).unwrap_or_else(|p| p);
        list.insert(pos, id);
    }

    fn remove(&mut self, id: NodeId) {
        if let Some(c) = self.assignment[id.index()].take() {
            let list = self.members.get_mut(&c).expect("assigned community exists");
            let pos = list.binary_search(&id).expect("member listed");
            list.remove(pos);
            if list.is_empty() {
                self.members.remove(&c);
            }
        }
    }

    /// Checks connectivity (over roadmap edges) and the size cap for every community.
    pub fn check(&self, graph: &impl Neighborhood, cap: usize) -> Result<()> {
        for (&c, members) in &self.members {
            if members.len() > cap {
                return Err(Error::Integrity("community exceeds the size cap"));
            }
            if components(graph, members, |n| self.community_of(n) == Some(c)).len() != 1 {
                return Err(Error::Integrity("community is not internally connected"));
            }
        }
        Ok(())
    }
}

/// Connected components of `members` (sorted ids) using roadmap edges between nodes passing `inside`.
fn components(
    graph: &impl Neighborhood,
    members: &[NodeId],
    inside: impl Fn(NodeId) -> bool,
) -> Vec<Vec<NodeId>> {
    let mut seen: BTreeSet<NodeId> = BTreeSet::new();
    let mut out = Vec::new();
    for &start in members {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in graph.neighbors(u) {
                if v != u && inside(v) && seen.insert(v) {
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Degrees and adjacency of the local graph, self-edges dropped.
struct LocalGraph<'a> {
    view: &'a LocalView,
    adjacency: Vec<Vec<usize>>,
    degree: Vec<f64>,
    m: f64,
}

impl<'a> LocalGraph<'a> {
    fn new(view: &'a LocalView) -> Self {
        let n = view.nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut m = 0.0;
        for &(a, b) in &view.edges {
            if a == b {
                continue;
            }
            let (ia, ib) = (view.local_index(a).unwrap(), view.local_index(b).unwrap());
            adjacency[ia].push(ib);
            adjacency[ib].push(ia);
            m += 1.0;
        }
        let degree = adjacency.iter().map(|a| a.len() as f64).collect();
        Self {
            view,
            adjacency,
            degree,
            m,
        }
    }

    /// Degree totals of every community, over in-window members.
    fn totals(&self, p: &Partition) -> BTreeMap<CommunityId, f64> {
        let mut t = BTreeMap::new();
        for (i, &id) in self.view.nodes.iter().enumerate() {
            if let Some(c) = p.community_of(id) {
                *t.entry(c).or_insert(0.0) += self.degree[i];
            }
        }
        t
    }

    /// Edge counts from local node `i` into each community.
    fn links(&self, p: &Partition, i: usize) -> BTreeMap<CommunityId, f64> {
        let mut l = BTreeMap::new();
        for &j in &self.adjacency[i] {
            if let Some(c) = p.community_of(self.view.nodes[j]) {
                *l.entry(c).or_insert(0.0) += 1.0;
            }
        }
        l
    }
}

const GAIN_EPS: f64 = 1e-12;
const MAX_PASSES: usize = 64;

/// Modularity of the current partition restricted to the window.
pub fn view_modularity(view: &LocalView, partition: &Partition, resolution: f64) -> Result<f64> {
    let labels: Vec<usize> = view
        .nodes
        .iter()
        .enumerate()
        .map(|(i, &id)| match partition.community_of(id) {
            Some(c) => c.0 as usize,
            None => usize::MAX - i,
        })
        .collect();
    let edges: Vec<(usize, usize)> = view
        .edges
        .iter()
        .map(|&(a, b)| (view.local_index(a).unwrap(), view.local_index(b).unwrap()))
        .collect();
    modularity(view.nodes.len(), &edges, &labels, resolution)
}

/// Places every unassigned window node by greedy local moving; returns the new nodes.
pub fn assign_new_nodes(
    view: &LocalView,
    partition: &mut Partition,
    cfg: &CommunityConfig,
) -> Vec<NodeId> {
    let fresh: Vec<NodeId> = view
        .nodes
        .iter()
        .copied()
        .filter(|&id| partition.community_of(id).is_none())
        .collect();
    partition.fresh = fresh.clone();
    partition.splits.clear();
    for &id in &fresh {
        let c = partition.allocate();
        partition.insert(id, c);
    }

    let lg = LocalGraph::new(view);
    if lg.m == 0.0 || fresh.is_empty() {
        return fresh;
    }
    let m = lg.m;
    let beta = cfg.resolution;
    let mut totals = lg.totals(partition);

    for _ in 0..MAX_PASSES {
        let mut moved = false;
        for &id in &fresh {
            let i = view.local_index(id).unwrap();
            let k = lg.degree[i];
            if k == 0.0 {
                continue;
            }
            let cur = partition.community_of(id).unwrap();
            let links = lg.links(partition, i);
            let k_cur = links.get(&cur).copied().unwrap_or(0.0);
            let sigma_rest = totals[&cur] - k;
            let mut best: Option<(f64, CommunityId)> = None;
            for (&c, &k_c) in &links {
                if c == cur || partition.size(c) + 1 > cfg.cap {
                    continue;
                }
                let gain = (k_c - k_cur) / m - beta * k * (totals[&c] - sigma_rest) / (2.0 * m * m);
                if gain > GAIN_EPS && best.map_or(true, |(g, _)| gain > g) {
                    best = Some((gain, c));
                }
            }
            if let Some((_, target)) = best {
                partition.remove(id);
                partition.insert(id, target);
                *totals.get_mut(&cur).unwrap() -= k;
                if partition.size(cur) == 0 {
                    totals.remove(&cur);
                }
                *totals.get_mut(&target).unwrap() += k;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    fresh
}

/// Splits disconnected communities touched in this step and merges fragments
/// made only of new nodes into neighbors when modularity improves. When few
/// enough new nodes arrived, their placement is then solved exhaustively.
pub fn refine_partition(
    view: &LocalView,
    graph: &impl Neighborhood,
    partition: &mut Partition,
    cfg: &CommunityConfig,
) {
    let fresh_set: BTreeSet<NodeId> = partition.fresh.iter().copied().collect();
    let touched: BTreeSet<CommunityId> = partition
        .fresh
        .iter()
        .filter_map(|&id| partition.community_of(id))
        .collect();

    for c in touched {
        let members = partition.members(c).to_vec();
        let comps = components(graph, &members, |n| partition.community_of(n) == Some(c));
        if comps.len() <= 1 {
            continue;
        }
        // old members are connected among themselves, so at most one fragment holds them
        let keep = comps
            .iter()
            .position(|comp| comp.iter().any(|n| !fresh_set.contains(n)))
            .unwrap_or_else(|| {
                let largest = comps.iter().map(Vec::len).max().unwrap();
                comps.iter().position(|comp| comp.len() == largest).unwrap()
            });
        let mut event = SplitEvent {
            original: c,
            fragments: Vec::new(),
        };
        for (idx, comp) in comps.iter().enumerate() {
            if idx == keep {
                continue;
            }
            let nc = partition.allocate();
            for &n in comp {
                partition.remove(n);
                partition.insert(n, nc);
            }
            event.fragments.push(nc);
        }
        partition.splits.push(event);
    }

    let lg = LocalGraph::new(view);
    if lg.m == 0.0 {
        return;
    }
    let m = lg.m;
    let beta = cfg.resolution;
    for _ in 0..MAX_PASSES {
        let candidates: Vec<CommunityId> = partition
            .members
            .iter()
            .filter(|(_, mem)| mem.iter().all(|n| fresh_set.contains(n)))
            .map(|(&c, _)| c)
            .collect();
        let mut merged = false;
        for s in candidates {
            let members = partition.members(s).to_vec();
            if members.is_empty() {
                continue;
            }
            let totals = lg.totals(partition);
            let sigma_s = totals.get(&s).copied().unwrap_or(0.0);
            let mut links: BTreeMap<CommunityId, f64> = BTreeMap::new();
            for &n in &members {
                if let Some(i) = view.local_index(n) {
                    for (c, w) in lg.links(partition, i) {
                        if c != s {
                            *links.entry(c).or_insert(0.0) += w;
                        }
                    }
                }
            }
            let mut best: Option<(f64, CommunityId)> = None;
            for (&t, &e_st) in &links {
                if members.len() + partition.size(t) > cfg.cap {
                    continue;
                }
                let gain = e_st / m - beta * sigma_s * totals[&t] / (2.0 * m * m);
                if gain > GAIN_EPS && best.map_or(true, |(g, _)| gain > g) {
                    best = Some((gain, t));
                }
            }
            if let Some((_, t)) = best {
                for &n in &members {
                    partition.remove(n);
                    partition.insert(n, t);
                }
                merged = true;
            }
        }
        if !merged {
            break;
        }
    }
    place_exactly(view, &lg, graph, partition, cfg);
}

/// Labelings the exact placement search may enumerate.
const EXACT_LIMIT: u64 = 50_000;

/// Ways to label `n` nodes with `e` fixed labels plus any number of new groups.
fn labelings(n: usize, e: usize) -> u64 {
    // ways[g]: completions once g new groups are open, built from the last node back
    let mut ways = vec![1u64; n + 1];
    for _ in 0..n {
        let mut next = vec![0u64; n + 1];
        for g in 0..n {
            next[g] = ((e + g) as u64)
                .saturating_mul(ways[g])
                .saturating_add(ways[g + 1]);
        }
        ways = next;
    }
    ways[0]
}

/// Exhaustive placement of this step's new nodes: each joins an adjacent
/// existing community or one of the new groups. Old nodes stay fixed.
struct ExactSearch {
    n: usize,
    e: usize,
    cap: usize,
    m: f64,
    beta: f64,
    degree: Vec<f64>,
    to_old: Vec<Vec<f64>>,
    earlier: Vec<Vec<usize>>,
    fresh_adj: Vec<Vec<usize>>,
    touches_old: Vec<Vec<bool>>,
    old_size: Vec<usize>,
    labels: Vec<usize>,
    size: Vec<usize>,
    sigma: Vec<f64>,
    internal: Vec<f64>,
    best: f64,
    best_labels: Option<Vec<usize>>,
}

impl ExactSearch {
    fn run(&mut self, i: usize, groups: usize) {
        if i == self.n {
            let used = self.e + groups;
            let score: f64 = (0..used)
                .map(|l| {
                    let s = self.sigma[l] / (2.0 * self.m);
                    self.internal[l] / self.m - self.beta * s * s
                })
                .sum();
            if score > self.best + GAIN_EPS && self.connected(groups) {
                self.best = score;
                self.best_labels = Some(self.labels[..self.n].to_vec());
            }
            return;
        }
        for l in 0..=self.e + groups {
            let limit = if l < self.e { self.old_size[l] } else { 0 };
            if limit + self.size[l] + 1 > self.cap {
                continue;
            }
            let mut gain = if l < self.e { self.to_old[i][l] } else { 0.0 };
            for &j in &self.earlier[i] {
                if self.labels[j] == l {
                    gain += 1.0;
                }
            }
            self.labels[i] = l;
            self.size[l] += 1;
            self.sigma[l] += self.degree[i];
            self.internal[l] += gain;
            let next = if l == self.e + groups { groups + 1 } else { groups };
            self.run(i + 1, next);
            self.size[l] -= 1;
            self.sigma[l] -= self.degree[i];
            self.internal[l] -= gain;
        }
    }

    fn connected(&self, groups: usize) -> bool {
        let mut reached = vec![false; self.n];
        let mut queue = VecDeque::new();
        for l in 0..self.e + groups {
            let members = (0..self.n).filter(|&i| self.labels[i] == l);
            if l < self.e {
                // existing communities are already connected; new members must attach to them
                queue.extend(members.filter(|&i| self.touches_old[i][l]));
            } else {
                queue.extend(members.take(1));
            }
            for &i in &queue {
                reached[i] = true;
            }
            while let Some(u) = queue.pop_front() {
                for &v in &self.fresh_adj[u] {
                    if self.labels[v] == l && !reached[v] {
                        reached[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        reached.iter().all(|&r| r)
    }
}

/// Replaces the greedy placement of new nodes by the best exhaustive one when
/// the search space is small enough.
fn place_exactly(
    view: &LocalView,
    lg: &LocalGraph,
    graph: &impl Neighborhood,
    partition: &mut Partition,
    cfg: &CommunityConfig,
) {
    let fresh = partition.fresh.clone();
    let n = fresh.len();
    if n == 0 {
        return;
    }
    let index: BTreeMap<NodeId, usize> = fresh.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let old_comm = |id: NodeId| {
        if index.contains_key(&id) {
            None
        } else {
            partition.community_of(id)
        }
    };
    let mut existing = BTreeSet::new();
    for &id in &fresh {
        for &v in graph.neighbors(id) {
            if let Some(c) = old_comm(v) {
                existing.insert(c);
            }
        }
    }
    let existing: Vec<CommunityId> = existing.into_iter().collect();
    let e = existing.len();
    if labelings(n, e) > EXACT_LIMIT {
        return;
    }
    let slot: BTreeMap<CommunityId, usize> = existing.iter().enumerate().map(|(k, &c)| (c, k)).collect();

    let mut sigma = vec![0.0; e + n];
    let mut internal = vec![0.0; e + n];
    for (row, &id) in view.nodes.iter().enumerate() {
        if let Some(&k) = old_comm(id).and_then(|c| slot.get(&c)) {
            sigma[k] += lg.degree[row];
            for &j in &lg.adjacency[row] {
                if j > row && old_comm(view.nodes[j]).and_then(|c| slot.get(&c).copied()) == Some(k) {
                    internal[k] += 1.0;
                }
            }
        }
    }
    let mut degree = vec![0.0; n];
    let mut to_old = vec![vec![0.0; e]; n];
    let mut earlier = vec![Vec::new(); n];
    let mut fresh_adj = vec![Vec::new(); n];
    let mut touches_old = vec![vec![false; e]; n];
    for (i, &id) in fresh.iter().enumerate() {
        let row = view.local_index(id).expect("new nodes lie in the window");
        degree[i] = lg.degree[row];
        for &j in &lg.adjacency[row] {
            let other = view.nodes[j];
            match index.get(&other) {
                Some(&k) if k < i => earlier[i].push(k),
                Some(_) => {}
                None => {
                    if let Some(&k) = old_comm(other).and_then(|c| slot.get(&c)) {
                        to_old[i][k] += 1.0;
                    }
                }
            }
        }
        for &v in graph.neighbors(id) {
            if v == id {
                continue;
            }
            match index.get(&v) {
                Some(&k) => fresh_adj[i].push(k),
                None => {
                    if let Some(&k) = old_comm(v).and_then(|c| slot.get(&c)) {
                        touches_old[i][k] = true;
                    }
                }
            }
        }
    }
    let old_size = existing
        .iter()
        .map(|&c| partition.members(c).iter().filter(|id| !index.contains_key(id)).count())
        .collect();
    let mut search = ExactSearch {
        n,
        e,
        cap: cfg.cap,
        m: lg.m,
        beta: cfg.resolution,
        degree,
        to_old,
        earlier,
        fresh_adj,
        touches_old,
        old_size,
        labels: vec![0; n],
        size: vec![0; e + n],
        sigma,
        internal,
        best: f64::NEG_INFINITY,
        best_labels: None,
    };
    search.run(0, 0);
    let Some(labels) = search.best_labels else {
        return;
    };

    let mut candidate = partition.clone();
    for &id in &fresh {
        candidate.remove(id);
    }
    let mut opened: Vec<Option<CommunityId>> = vec![None; n];
    for (i, &id) in fresh.iter().enumerate() {
        let l = labels[i];
        let c = if l < e {
            existing[l]
        } else {
            match opened[l - e] {
                Some(c) => c,
                None => {
                    let c = candidate.allocate();
                    opened[l - e] = Some(c);
                    c
                }
            }
        };
        candidate.insert(id, c);
    }
    let before = view_modularity(view, partition, cfg.resolution).unwrap_or(f64::NEG_INFINITY);
    let after = view_modularity(view, &candidate, cfg.resolution).unwrap_or(f64::NEG_INFINITY);
    if after > before + GAIN_EPS {
        candidate.splits.clear();
        *partition = candidate;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalNode {
    pub community: CommunityId,
    /// Member nearest to the community centroid.
    pub anchor: NodeId,
    /// Node the global node sits on: the anchor, or the robot node for the current one.
    pub site: NodeId,
    pub position: Pose2,
    pub explored: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalEdge {
    pub a: usize,
    pub b: usize,
    /// Roadmap path from `nodes[a].site` to `nodes[b].site`.
    pub path: Vec<NodeId>,
    pub cost: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GlobalGraph {
    pub nodes: Vec<GlobalNode>,
    pub edges: Vec<GlobalEdge>,
    pub current: usize,
    /// Edge indices incident to each global node.
    pub incident: Vec<Vec<usize>>,
}

impl GlobalGraph {
    pub fn index_of(&self, c: CommunityId) -> Option<usize> {
        self.nodes.binary_search_by_key(&c, |n| n.community).ok()
    }
}

/// One global node per community plus A*-costed edges between communities
/// that share a roadmap edge.
pub fn rebuild_global_graph(
    graph: &RoadmapGraph,
    partition: &Partition,
    robot: NodeId,
) -> Result<GlobalGraph> {
    let robot_comm = partition
        .community_of(robot)
        .ok_or(Error::Precondition("robot node has no community"))?;
    let mut nodes = Vec::with_capacity(partition.len());
    let mut current = 0;
    for (c, members) in partition.communities() {
        let n = members.len() as f64;
        let (sx, sy) = members.iter().fold((0.0, 0.0), |(x, y), &id| {
            let p = graph.position(id);
            (x + p.x, y + p.y)
        });
        let centroid = Pose2::new(sx / n, sy / n);
        let mut anchor = members[0];
        let mut best = f64::INFINITY;
        for &id in members {
            let d = graph.position(id).distance(centroid);
            if d < best {
                best = d;
                anchor = id;
            }
        }
        let site = if c == robot_comm {
            current = nodes.len();
            robot
        } else {
            anchor
        };
        let reach = components(graph, &[site], |v| partition.community_of(v) == Some(c));
        if reach[0].len() != members.len() {
            return Err(Error::Integrity("community member cannot reach its global node"));
        }
        nodes.push(GlobalNode {
            community: c,
            anchor,
            site,
            position: graph.position(site),
            explored: true,
        });
    }

    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    let index = |c: CommunityId| nodes.binary_search_by_key(&c, |n: &GlobalNode| n.community).unwrap();
    for (a, b) in graph.edges() {
        if let (Some(ca), Some(cb)) = (partition.community_of(a), partition.community_of(b)) {
            if ca != cb {
                let (ia, ib) = (index(ca), index(cb));
                pairs.insert((ia.min(ib), ia.max(ib)));
            }
        }
    }
    let mut edges = Vec::with_capacity(pairs.len());
    let mut incident = vec![Vec::new(); nodes.len()];
    for (a, b) in pairs {
        let (path, cost) = astar_path(graph, nodes[a].site, nodes[b].site)
            .ok_or(Error::Integrity("adjacent communities are not connected"))?;
        incident[a].push(edges.len());
        incident[b].push(edges.len());
        edges.push(GlobalEdge { a, b, path, cost });
    }
    Ok(GlobalGraph {
        nodes,
        edges,
        current,
        incident,
    })
}

/// Marks a global node unexplored iff one of its members has positive utility.
pub fn classify_global_nodes(global: &mut GlobalGraph, partition: &Partition, utility: &[u32]) {
    for g in &mut global.nodes {
        g.explored = partition
            .members(g.community)
            .iter()
            .all(|id| utility.get(id.index()).copied().unwrap_or(0) == 0);
    }
}
