mod oracle;

use explore_core::env::{Env, EnvConfig};
use explore_core::expert::{plan_coverage, plan_expert_path, privileged_frontiers, PrivilegedMap};
use explore_core::grid::{raycast_scan, Cell, CellIndex, OccupancyGrid, Pose2, SensorConfig};
use explore_core::mapgen::MapGenParams;
use explore_core::roadmap::{dijkstra_tree, RoadmapConfig};

fn config(size: usize, seed: u64) -> EnvConfig {
    EnvConfig {
        map: MapGenParams::for_size(size, size),
        seed,
        ..EnvConfig::default()
    }
}

#[test]
fn executing_the_plan_clears_every_privileged_frontier() {
    for (size, seed) in [(100, 0), (100, 1), (150, 2), (250, 3)] {
        let cfg = config(size, seed);
        let env = Env::reset(cfg).unwrap();
        let map = env.privileged().unwrap();
        let plan = env.expert_plan().unwrap();
        let mut belief = env.belief().clone();
        let sensor = SensorConfig { range: cfg.sensor_range };
        for &v in &plan.path {
            raycast_scan(env.truth(), &mut belief, map.graph.position(v), &sensor).unwrap();
        }
        let after = privileged_frontiers(env.truth(), &belief, map);
        assert!(after.cells.is_empty(), "size {size} seed {seed}: {} left", after.cells.len());
        for w in plan.path.windows(2) {
            assert!(map.graph.has_edge(w[0], w[1]));
        }
    }
}

#[test]
fn privileged_graph_contains_the_belief_graph() {
    let mut env = Env::reset(config(120, 5)).unwrap();
    for _ in 0..5 {
        let a = env.expert_action().unwrap();
        env.step(a).unwrap();
        if env.is_done() {
            break;
        }
    }
    let map = env.privileged().unwrap();
    for n in env.graph().nodes() {
        assert!(map.graph.node_at_cell(n.cell).is_some());
    }
}

#[test]
fn privileged_frontiers_match_definition() {
    let env = Env::reset(config(150, 6)).unwrap();
    let (truth, belief) = (env.truth(), env.belief());
    let fr = privileged_frontiers(truth, belief, env.privileged().unwrap());
    let mut got: Vec<usize> = fr.cells.cells.iter().chain(&fr.pruned).copied().collect();
    got.sort();
    let expect: Vec<usize> = (0..truth.len())
        .filter(|&i| {
            let c = truth.unlinear(i);
            truth.get(c) == Cell::Free && truth.neighbors8(c).any(|n| belief.get(n) == Cell::Unknown)
        })
        .collect();
    assert_eq!(got, expect);
    assert!(!expect.is_empty());
}

#[test]
fn restarts_never_raise_the_best_cost() {
    let env = Env::reset(config(250, 7)).unwrap();
    let map = env.privileged().unwrap();
    let fr = privileged_frontiers(env.truth(), env.belief(), map);
    let obs = fr.observability(map);
    let start = env.expert_plan().unwrap().start;
    let mut last = f64::INFINITY;
    for k in 1..=10 {
        let plan = plan_coverage(&map.graph, &obs, start, k, 99, None).unwrap();
        assert!(plan.cost <= last + 1e-9, "k={k}: {} > {last}", plan.cost);
        last = plan.cost;
    }
}

#[test]
fn single_observer_pocket_gives_the_shortest_path() {
    let truth = OccupancyGrid::new(51, 51, 0.4, Pose2::default(), Cell::Free);
    // 1.9 m footprints around 4 m lattice points never overlap
    let map = PrivilegedMap::build(&truth, RoadmapConfig::default(), 1.9).unwrap();
    let mut belief = truth.clone();
    for (dx, dy) in [(1, 1), (2, 1), (1, 2), (2, 2)] {
        belief.set(CellIndex::new(30 + dx, 40 + dy), Cell::Unknown);
    }
    let fr = privileged_frontiers(&truth, &belief, &map);
    assert!(fr.pruned.is_empty() && !fr.cells.is_empty());
    let target = map.graph.node_at_cell(CellIndex::new(30, 40)).unwrap();
    for &lin in &fr.cells.cells {
        assert_eq!(map.observers(lin), &[target.0]);
    }
    let start = truth.cell_center(CellIndex::new(0, 0));
    let plan = plan_expert_path(&map, start, &fr, 10, 3, None).unwrap();
    let tree = dijkstra_tree(&map.graph, plan.start, None);
    assert_eq!(*plan.path.last().unwrap(), target);
    assert!((plan.cost - tree.dist[target.index()]).abs() < 1e-9);
    assert_eq!(plan.path, tree.path_to(target).unwrap());
}

#[test]
fn open_map_plan_covers_all_frontiers() {
    let truth = oracle::walled_room(125, 125, 0.4);
    let map = PrivilegedMap::build(&truth, RoadmapConfig::default(), 16.0).unwrap();
    let mut belief = truth.unknown_like();
    let start = truth.cell_center(CellIndex::new(10, 10));
    raycast_scan(&truth, &mut belief, start, &SensorConfig { range: 20.0 }).unwrap();
    let fr = privileged_frontiers(&truth, &belief, &map);
    let plan = plan_expert_path(&map, start, &fr, 10, 42, None).unwrap();
    for &lin in &fr.cells.cells {
        assert!(
            map.observers(lin).iter().any(|&v| plan.path.iter().any(|p| p.0 == v)),
            "frontier {lin} not covered"
        );
    }
}
