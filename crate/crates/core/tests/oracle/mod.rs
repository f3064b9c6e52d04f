//! Reference implementations used by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use explore_core::community::{assign_new_nodes, refine_partition, CommunityConfig, Partition};
use explore_core::grid::{Cell, CellIndex, OccupancyGrid, Pose2};
use explore_core::roadmap::{LocalView, Neighborhood, NodeId, RoadmapGraph};
use explore_core::tsp::CostMatrix;
use rand::Rng;

/// Modularity by the double sum over all node pairs.
pub fn modularity_direct(n: usize, edges: &[(usize, usize)], labels: &[usize], beta: f64) -> f64 {
    let mut a = vec![vec![0.0f64; n]; n];
    for &(i, j) in edges {
        if i != j {
            a[i][j] = 1.0;
            a[j][i] = 1.0;
        }
    }
    let k: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += a[i][j] - beta * k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

pub struct Adjacency(pub Vec<Vec<NodeId>>);

impl Adjacency {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            adj[a].push(NodeId(b as u32));
            adj[b].push(NodeId(a as u32));
        }
        for a in &mut adj {
            a.sort();
            a.dedup();
        }
        Self(adj)
    }
}

impl Neighborhood for Adjacency {
    fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.0[id.index()]
    }
}

/// Random simple graph with at least one edge.
pub fn random_graph(rng: &mut impl Rng, n: usize) -> Vec<(usize, usize)> {
    let p = rng.gen_range(0.2..0.8);
    loop {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(p) {
                    edges.push((a, b));
                }
            }
        }
        if !edges.is_empty() {
            return edges;
        }
    }
}

/// Whether every label class induces a connected subgraph.
pub fn classes_connected(labels: &[usize], edges: &[(usize, usize)]) -> bool {
    let n = labels.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if labels[a] == labels[b] {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut roots = BTreeMap::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        if roots.insert(labels[s], s).is_some() {
            return false;
        }
        let mut q = VecDeque::from([s]);
        seen[s] = true;
        while let Some(v) = q.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    q.push_back(w);
                }
            }
        }
    }
    true
}

/// Best modularity over all connected partitions with classes of at most `cap` nodes.
pub fn best_partition(n: usize, edges: &[(usize, usize)], cap: usize) -> f64 {
    fn rec(i: usize, max: usize, labels: &mut [usize], edges: &[(usize, usize)], cap: usize, best: &mut f64) {
        let n = labels.len();
        if i == n {
            let mut sizes = vec![0; n];
            for &l in labels.iter() {
                sizes[l] += 1;
            }
            if sizes.iter().all(|&s| s <= cap) && classes_connected(labels, edges) {
                *best = best.max(modularity_direct(n, edges, labels, 1.0));
            }
            return;
        }
        // restricted growth strings: each set partition once
        for l in 0..=max + 1 {
            labels[i] = l;
            rec(i + 1, max.max(l), labels, edges, cap, best);
        }
    }
    let mut labels = vec![0; n];
    let mut best = f64::NEG_INFINITY;
    rec(1, 0, &mut labels, edges, cap, &mut best);
    best
}

/// Runs the incremental partitioner with every node arriving at once.
pub fn partition_batch(n: usize, edges: &[(usize, usize)], cap: usize) -> (Partition, Vec<usize>) {
    let ids: Vec<(NodeId, NodeId)> = edges
        .iter()
        .map(|&(a, b)| (NodeId(a as u32), NodeId(b as u32)))
        .collect();
    let view = LocalView::from_edges(n, &ids);
    let adj = Adjacency::new(n, edges);
    let cfg = CommunityConfig { resolution: 1.0, cap };
    let mut p = Partition::new();
    assign_new_nodes(&view, &mut p, &cfg);
    refine_partition(&view, &adj, &mut p, &cfg);
    let labels = (0..n)
        .map(|v| p.community_of(NodeId(v as u32)).expect("assigned").0 as usize)
        .collect();
    (p, labels)
}

/// Cheapest open tour from `start` over all permutations of the other points.
pub fn tsp_brute_force(m: &CostMatrix, start: usize) -> f64 {
    fn rec(m: &CostMatrix, last: usize, left: &mut Vec<usize>, acc: f64, best: &mut f64) {
        if left.is_empty() {
            *best = best.min(acc);
            return;
        }
        for i in 0..left.len() {
            let v = left.swap_remove(i);
            rec(m, v, left, acc + m.get(last, v), best);
            left.push(v);
            let k = left.len() - 1;
            left.swap(i, k);
        }
    }
    let mut left: Vec<usize> = (0..m.len()).filter(|&i| i != start).collect();
    let mut best = f64::INFINITY;
    rec(m, start, &mut left, 0.0, &mut best);
    best
}

pub fn tour_cost(m: &CostMatrix, order: &[usize]) -> f64 {
    order.windows(2).map(|w| m.get(w[0], w[1])).sum()
}

/// No reversal of a segment `order[i..=j]` (start fixed) shortens the open tour.
pub fn no_improving_reversal(m: &CostMatrix, order: &[usize], tol: f64) -> bool {
    let base = tour_cost(m, order);
    for i in 1..order.len() {
        for j in i + 1..order.len() {
            let mut o = order.to_vec();
            o[i..=j].reverse();
            if tour_cost(m, &o) < base - tol {
                return false;
            }
        }
    }
    true
}

pub fn euclidean_matrix(points: &[(f64, f64)]) -> CostMatrix {
    CostMatrix::from_fn(points.len(), |i, j| {
        let (a, b) = (points[i], points[j]);
        ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
    })
}

/// Shortest distances by Bellman-Ford relaxation over graph edges.
pub fn bellman_ford(graph: &RoadmapGraph, src: NodeId) -> Vec<f64> {
    let mut d = vec![f64::INFINITY; graph.len()];
    d[src.index()] = 0.0;
    let edges: Vec<(NodeId, NodeId)> = graph.edges().collect();
    for _ in 0..graph.len() {
        let mut changed = false;
        for &(a, b) in &edges {
            let w = graph.edge_length(a, b);
            for (u, v) in [(a, b), (b, a)] {
                if d[u.index()] + w < d[v.index()] {
                    d[v.index()] = d[u.index()] + w;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    d
}

/// Frontier cells by the definition: Free with an Unknown 8-neighbor.
pub fn frontier_cells(belief: &OccupancyGrid) -> Vec<usize> {
    let (w, h) = (belief.width() as i64, belief.height() as i64);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let c = CellIndex::new(x as usize, y as usize);
            if belief.get(c) != Cell::Free {
                continue;
            }
            let mut unknown = false;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx, dy) != (0, 0)
                        && (0..w).contains(&nx)
                        && (0..h).contains(&ny)
                        && belief.get(CellIndex::new(nx as usize, ny as usize)) == Cell::Unknown
                    {
                        unknown = true;
                    }
                }
            }
            if unknown {
                out.push(belief.linear(c));
            }
        }
    }
    out
}

/// Truth-Free cells 8-connected to `start` through Free cells.
pub fn reachable_free(truth: &OccupancyGrid, start: CellIndex) -> Vec<bool> {
    let mut seen = vec![false; truth.len()];
    let mut q = VecDeque::from([start]);
    seen[truth.linear(start)] = true;
    while let Some(c) = q.pop_front() {
        for n in truth.neighbors8(c) {
            let i = truth.linear(n);
            if !seen[i] && truth.get(n) == Cell::Free {
                seen[i] = true;
                q.push_back(n);
            }
        }
    }
    seen
}

/// Rectangle of Free cells inside a one-cell Obstacle border.
pub fn walled_room(w: usize, h: usize, resolution: f64) -> OccupancyGrid {
    let mut g = OccupancyGrid::new(w, h, resolution, Pose2::default(), Cell::Free);
    for x in 0..w {
        g.set(CellIndex::new(x, 0), Cell::Obstacle);
        g.set(CellIndex::new(x, h - 1), Cell::Obstacle);
    }
    for y in 0..h {
        g.set(CellIndex::new(0, y), Cell::Obstacle);
        g.set(CellIndex::new(w - 1, y), Cell::Obstacle);
    }
    g
}

/// Random grid with independent obstacle cells.
pub fn random_grid(rng: &mut impl Rng, w: usize, h: usize, obstacle: f64) -> OccupancyGrid {
    let cells = (0..w * h)
        .map(|_| if rng.gen_bool(obstacle) { Cell::Obstacle } else { Cell::Free })
        .collect();
    OccupancyGrid::from_cells(w, h, 0.4, Pose2::default(), cells).unwrap()
}
