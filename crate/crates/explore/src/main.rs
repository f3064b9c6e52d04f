use std::fs;
use std::io::{self, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use explore::explore_core::env::{Env, EnvConfig};
use explore::explore_core::mapgen::{generate_dungeon_map, MapGenParams};
use explore::explore_core::policy::PolicyKind;
use explore::explore_core::roadmap::RoadmapGraph;
use explore::log::EpisodeLog;
use explore::runner::{self, MetricsRow};
use explore::{clock, dump, pgm, plot, protocol};

#[derive(Parser)]
#[command(name = "explore", version, about = "Grid-world exploration engine")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a map and write it as PGM with a JSON sidecar.
    GenMap {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
        /// Also write the ground-truth roadmap as an edge list.
        #[arg(long)]
        edges: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run built-in policies over a range of seeds.
    Run {
        /// Comma-separated policy names, or `all`.
        #[arg(long, default_value = "expert-follow")]
        policy: String,
        #[arg(long, default_value = "0..1")]
        seeds: String,
        /// Directory for episode logs and graph dumps.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Metrics CSV path; stdout when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Explored fraction versus distance, as PNG.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Serve the stepping protocol.
    Serve {
        #[arg(long, value_enum, default_value_t = Transport::Stdio)]
        transport: Transport,
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: String,
    },
    /// Re-run a logged episode and compare it record by record.
    Replay { log: PathBuf },
    /// Time the per-step pipeline and expert replans.
    Bench {
        #[arg(long, default_value = "0..5")]
        seeds: String,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Transport {
    Stdio,
    Socket,
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// JSON file with a full or partial configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    rooms: Option<usize>,
    #[arg(long)]
    corridor_width: Option<usize>,
    #[arg(long)]
    sensor_range: Option<f64>,
    #[arg(long)]
    node_resolution: Option<f64>,
    #[arg(long)]
    neighbor_threshold: Option<f64>,
    #[arg(long)]
    local_window: Option<f64>,
    #[arg(long)]
    utility_range: Option<f64>,
    #[arg(long)]
    community_cap: Option<usize>,
    #[arg(long)]
    modularity_resolution: Option<f64>,
    #[arg(long)]
    expert_restarts: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Skip expert planning (no rewards or coverage gaps).
    #[arg(long)]
    no_expert: bool,
}

impl ConfigArgs {
    fn build(&self) -> Result<EnvConfig> {
        let mut cfg = match &self.config {
            Some(p) => serde_json::from_slice(&fs::read(p).with_context(|| p.display().to_string())?)?,
            None => EnvConfig::default(),
        };
        if self.width.is_some() || self.height.is_some() {
            let w = self.width.unwrap_or(cfg.map.width);
            let h = self.height.unwrap_or(cfg.map.height);
            cfg.map = MapGenParams {
                resolution: cfg.map.resolution,
                ..MapGenParams::for_size(w, h)
            };
        }
        let m = &mut cfg.map;
        set(&mut m.resolution, self.resolution);
        set(&mut m.rooms, self.rooms);
        set(&mut m.corridor_width, self.corridor_width);
        set(&mut cfg.sensor_range, self.sensor_range);
        set(&mut cfg.node_resolution, self.node_resolution);
        set(&mut cfg.local_window, self.local_window);
        set(&mut cfg.modularity_resolution, self.modularity_resolution);
        set(&mut cfg.expert_restarts, self.expert_restarts);
        set(&mut cfg.max_steps, self.max_steps);
        cfg.neighbor_threshold = self.neighbor_threshold.or(cfg.neighbor_threshold);
        cfg.utility_range = self.utility_range.or(cfg.utility_range);
        cfg.community_cap = self.community_cap.or(cfg.community_cap);
        if self.no_expert {
            cfg.expert = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn parse_policies(s: &str) -> Result<Vec<PolicyKind>> {
    if s == "all" {
        return Ok(PolicyKind::ALL.to_vec());
    }
    s.split(',')
        .map(|n| {
            PolicyKind::from_name(n.trim()).with_context(|| {
                let names: Vec<_> = PolicyKind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown policy `{n}` (expected one of {})", names.join(", "))
            })
        })
        .collect()
}

fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| path.display().to_string())?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn gen_map(seed: u64, out: &Path, edges: Option<&Path>, cfg: &EnvConfig) -> Result<()> {
    let grid = generate_dungeon_map(seed, &cfg.map)?;
    pgm::save_grid(&grid, out, Some(seed))?;
    if let Some(path) = edges {
        let mut graph = RoadmapGraph::new(&grid, cfg.roadmap())?;
        graph.extend(&grid, None);
        write_file(path, |w| dump::write_edge_list(&graph, w))?;
    }
    eprintln!("wrote {} ({}x{})", out.display(), grid.width(), grid.height());
    Ok(())
}

fn run(policies: &[PolicyKind], seeds: &str, out: Option<&Path>, csv: Option<&Path>, png: Option<&Path>, cfg: EnvConfig) -> Result<()> {
    let seeds = runner::parse_seeds(seeds)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for &policy in policies {
        let finish = |env: &Env| match out {
            Some(dir) => dump_final_graph(dir, policy, env),
            None => Ok(()),
        };
        let runs = runner::run_batch(policy, cfg, seeds.clone(), Some(clock::monotonic_ns), finish)?;
        for r in &runs {
            let seed = r.log.header.map_seed;
            if let Some(e) = &r.error {
                eprintln!("{} seed {seed}: {e}", policy.name());
            }
            if let Some(dir) = out {
                r.log.save(&dir.join(format!("{}-{seed}.jsonl.gz", policy.name())))?;
            }
            rows.push(MetricsRow::from_run(r));
        }
        all.push(runs);
    }
    match csv {
        Some(p) => write_file(p, |w| runner::write_csv(&rows, w))?,
        None => runner::write_csv(&rows, io::stdout().lock())?,
    }
    if let Some(p) = png {
        let groups: Vec<Vec<&[(f64, f64)]>> = all
            .iter()
            .map(|runs| runs.iter().map(|r| r.metrics().curve.as_slice()).collect())
            .collect();
        plot::save(&groups, p)?;
    }
    if all.iter().flatten().any(|r| r.error.is_some()) {
        bail!("some episodes stopped early; see their logs");
    }
    Ok(())
}

fn dump_final_graph(dir: &Path, policy: PolicyKind, env: &Env) -> Result<()> {
    let stem = format!("{}-{}", policy.name(), env.config().seed);
    write_file(&dir.join(format!("{stem}.edges")), |w| dump::write_edge_list(env.graph(), w))?;
    write_file(&dir.join(format!("{stem}.partition")), |w| dump::write_partition(env.partition(), w))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::GenMap {
            seed,
            out,
            edges,
            config,
        } => gen_map(seed, &out, edges.as_deref(), &config.build()?),
        Cmd::Run {
            policy,
            seeds,
            out,
            csv,
            plot,
            config,
        } => run(
            &parse_policies(&policy)?,
            &seeds,
            out.as_deref(),
            csv.as_deref(),
            plot.as_deref(),
            config.build()?,
        ),
        Cmd::Serve { transport, addr } => match transport {
            Transport::Stdio => {
                protocol::serve_stream(io::stdin().lock(), io::stdout().lock(), Some(clock::monotonic_ns))?;
                Ok(())
            }
            Transport::Socket => {
                let listener = TcpListener::bind(&addr).with_context(|| addr.clone())?;
                eprintln!("listening on {}", listener.local_addr()?);
                protocol::serve_tcp(listener, Some(clock::monotonic_ns))?;
                Ok(())
            }
        },
        Cmd::Replay { log } => {
            let episode = EpisodeLog::load(&log)?;
            let report = runner::replay(&episode)?;
            match report.mismatch {
                None => {
                    println!(
                        "replay ok: {} steps, travel {} m, outcome {}",
                        report.steps, episode.summary.metrics.travel, episode.summary.outcome
                    );
                    Ok(())
                }
                Some(m) => bail!("replay diverged at {m}"),
            }
        }
        Cmd::Bench { seeds, config } => {
            let report = runner::bench(config.build()?, runner::parse_seeds(&seeds)?, clock::monotonic_ns)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}
