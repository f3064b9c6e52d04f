mod oracle;

use std::collections::BTreeSet;

use explore_core::env::{Env, EnvConfig};
use explore_core::grid::{cells_visible, Cell, CellIndex, OccupancyGrid, Pose2};
use explore_core::mapgen::{generate_dungeon_map, MapGenParams};
use explore_core::policy::{run_policy, PolicyKind};
use explore_core::roadmap::{astar_path, dijkstra_tree, extract_local_view, NodeId, RoadmapConfig, RoadmapGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graph_on(grid: &explore_core::grid::OccupancyGrid, node_resolution: f64) -> RoadmapGraph {
    let mut g = RoadmapGraph::new(grid, RoadmapConfig::with_resolution(node_resolution)).unwrap();
    g.extend(grid, None);
    g
}

#[test]
fn shortest_paths_agree_with_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..12 {
        let grid = oracle::random_grid(&mut rng, 30, 30, 0.12);
        let g = graph_on(&grid, 1.2);
        assert!(g.len() <= 100);
        for s in 0..g.len() {
            let src = NodeId(s as u32);
            let tree = dijkstra_tree(&g, src, None);
            let bf = oracle::bellman_ford(&g, src);
            for t in 0..g.len() {
                let dst = NodeId(t as u32);
                let (d, o) = (tree.dist[t], bf[t]);
                assert!(d == o || (d - o).abs() < 1e-9, "dijkstra {d} vs bellman-ford {o}");
                match astar_path(&g, src, dst) {
                    Some((path, cost)) => {
                        assert!((cost - o).abs() < 1e-9, "a* {cost} vs {o}");
                        assert_eq!((path[0], *path.last().unwrap()), (src, dst));
                        assert!(path.windows(2).all(|w| g.has_edge(w[0], w[1])));
                    }
                    None => assert!(o.is_infinite()),
                }
            }
        }
    }
}

#[test]
fn robot_node_matches_linear_scan() {
    let grid = oracle::walled_room(50, 50, 0.4);
    let g = graph_on(&grid, 4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let p = Pose2::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0));
        let best = (0..g.len())
            .map(|i| NodeId(i as u32))
            .min_by(|&a, &b| g.position(a).distance(p).total_cmp(&g.position(b).distance(p)).then(a.cmp(&b)))
            .unwrap();
        assert_eq!(g.robot_node(p).unwrap(), best);
    }
}

#[test]
fn local_view_matches_box_filter() {
    let grid = OccupancyGrid::new(51, 51, 0.4, Pose2::default(), Cell::Free);
    let g = graph_on(&grid, 4.0);
    assert_eq!(g.len(), 36);
    let corner = g.node_at_lattice(0, 0).unwrap();
    let c = g.position(corner);
    let view = extract_local_view(&g, corner, 20.0).unwrap();
    let expect: Vec<NodeId> = (0..g.len())
        .map(|i| NodeId(i as u32))
        .filter(|&v| {
            let p = g.position(v);
            (p.x - c.x).abs() <= 10.0 && (p.y - c.y).abs() <= 10.0
        })
        .collect();
    assert_eq!(view.nodes, expect);
    for &(a, b) in &view.edges {
        assert!(a <= b && g.has_edge(a, b) && view.contains(a) && view.contains(b));
    }
}

#[test]
fn graph_grows_append_only_with_valid_edges() {
    for seed in 0..4 {
        let cfg = EnvConfig {
            map: MapGenParams::for_size(120, 120),
            seed,
            ..EnvConfig::default()
        };
        let d_n = cfg.neighbor_threshold();
        let mut env = Env::reset(cfg).unwrap();
        let mut nodes: Vec<CellIndex> = Vec::new();
        let mut edges: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
        let mut policy = PolicyKind::GreedyFrontier.build();
        run_policy(&mut env, policy.as_mut(), |env, _| {
            let g = env.graph();
            let belief = env.belief();
            assert!(g.len() >= nodes.len());
            for (i, n) in g.nodes().iter().enumerate() {
                assert_eq!(n.id.index(), i);
                if i < nodes.len() {
                    assert_eq!(n.cell, nodes[i], "node moved");
                }
                assert_eq!(belief.get(n.cell), Cell::Free);
                assert!(g.neighbors(n.id).len() <= 25);
            }
            let now: BTreeSet<_> = g.edges().collect();
            assert!(now.is_superset(&edges), "edge removed");
            for &(a, b) in &now {
                assert!(g.position(a).distance(g.position(b)) <= d_n + 1e-9);
                assert!(g.has_edge(b, a));
                assert!(cells_visible(belief, g.node(a).cell, g.node(b).cell));
            }
            nodes = g.nodes().iter().map(|n| n.cell).collect();
            edges = now;
        })
        .unwrap();
    }
}

#[test]
fn truth_roadmap_is_connected_on_generated_maps() {
    for seed in 0..10 {
        let grid = generate_dungeon_map(seed, &MapGenParams::default()).unwrap();
        let g = graph_on(&grid, 4.0);
        let tree = dijkstra_tree(&g, NodeId(0), None);
        assert!((0..g.len()).all(|i| tree.dist[i].is_finite()), "seed {seed}");
    }
}
