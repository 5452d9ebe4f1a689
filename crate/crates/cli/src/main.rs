use std::net::SocketAddr;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use preflex_core::fixtures;
use preflex_core::harness::{self, ExperimentConfig};
use preflex_core::scene::LayoutMap;
use preflex_core::session::{replay, Mode, Session, SessionConfig, Transcript};
use preflex_core::solver::{GenerationReport, SolverConfig};
use preflex_server::{ServerConfig, BIND_ENV, DEFAULT_BIND};

#[derive(Parser)]
#[command(name = "preflex", version, about = "Preference-inferring layout adaptation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct SolverArgs {
    /// Population size (even).
    #[arg(long, default_value_t = 100)]
    pop: usize,
    #[arg(long, default_value_t = 80)]
    gens: usize,
    /// Smoothed deltas at or below this are treated as low priority.
    #[arg(long, default_value_t = 0.0)]
    tau_lower: f64,
    /// Smoothed deltas above this are treated as high priority.
    #[arg(long, default_value_t = 0.2)]
    tau_upper: f64,
}

impl SolverArgs {
    fn session_config(&self) -> SessionConfig {
        SessionConfig {
            solver: SolverConfig { population_size: self.pop, generations: self.gens, ..SolverConfig::default() },
            tau_lower: self.tau_lower,
            tau_upper: self.tau_upper,
            ..SessionConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Start a session and optionally apply batches of moves, adapting after each.
    Optimize {
        /// Bundled scene name or path to a scene JSON file.
        #[arg(long)]
        scene: String,
        #[arg(long, default_value = "ours")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON array of move batches, each an object of widget id to [x, y, z].
        #[arg(long)]
        moves: Option<PathBuf>,
        /// Write the session transcript here.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Print per-generation progress to stderr.
        #[arg(long)]
        progress: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run simulated users through every condition and write a results CSV.
    Simulate {
        #[arg(long)]
        scene: String,
        /// Number of simulated users, cycling through the objective pairs.
        #[arg(long, default_value_t = 10)]
        users: usize,
        /// Seed range: `a..b` (end exclusive), `a..=b`, or a single seed.
        #[arg(long, default_value = "0..5", value_parser = parse_seeds)]
        seeds: Seeds,
        /// Conditions to run, comma separated.
        #[arg(long, value_delimiter = ',', default_values = ["manual", "pareto_select", "ours"])]
        conditions: Vec<Mode>,
        /// Also re-run each optimizer on the moves recorded under the other one.
        #[arg(long)]
        cross_replay: bool,
        #[arg(long)]
        out: PathBuf,
        /// Directory for one transcript per run.
        #[arg(long)]
        transcripts: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Re-run a recorded session and print its report.
    Replay {
        #[arg(long)]
        transcript: PathBuf,
        /// Scene to use instead of the one named in the transcript.
        #[arg(long)]
        scene: Option<String>,
    },
    /// Summarize a results CSV per condition.
    Eval {
        #[arg(long)]
        results: PathBuf,
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Serve sessions over websocket at ws://HOST:PORT/ws.
    Serve {
        /// Extra scene files (`*.json`), addressed by file stem.
        #[arg(long)]
        scenes: Option<PathBuf>,
        /// Overrides the port of the bind address.
        #[arg(long)]
        port: Option<u16>,
        /// Bind address.
        #[arg(long, env = BIND_ENV, default_value = DEFAULT_BIND)]
        bind: SocketAddr,
        /// Directory for transcripts of finished or dropped sessions.
        #[arg(long)]
        transcripts: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Clone, Debug, PartialEq)]
struct Seeds(Vec<u64>);

fn parse_seeds(raw: &str) -> Result<Seeds, String> {
    let num = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("bad seed `{s}`: {e}"));
    let seeds: Vec<u64> = if let Some((a, b)) = raw.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = raw.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        vec![num(raw)?]
    };
    if seeds.is_empty() {
        return Err(format!("seed range `{raw}` is empty"));
    }
    Ok(Seeds(seeds))
}

fn load_scene(reference: &str) -> Result<Arc<preflex_core::Scene>> {
    Ok(Arc::new(fixtures::resolve(reference).with_context(|| format!("loading scene `{reference}`"))?))
}

fn scene_ref(reference: &str) -> String {
    if fixtures::NAMES.contains(&reference) {
        return reference.to_string();
    }
    std::fs::canonicalize(reference)
        .map(|p| p.display().to_string())
        .unwrap_or_else(|_| reference.to_string())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn optimize(
    scene: &str,
    mode: Mode,
    seed: u64,
    moves: Option<&Path>,
    transcript: Option<&Path>,
    progress: bool,
    solver: &SolverArgs,
) -> Result<()> {
    let loaded = load_scene(scene)?;
    let mut session = Session::start_with_ref(loaded, scene_ref(scene), mode, seed, solver.session_config())?;
    let batches: Vec<LayoutMap> = match moves {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)
            .with_context(|| format!("parsing moves from {}", path.display()))?,
        None => Vec::new(),
    };
    let mut observer = |r: &GenerationReport<'_>| {
        if progress {
            eprintln!("generation {}/{} best {:?} x{}", r.generation, r.total_generations, r.best_ranks.0, r.best_count);
        }
        ControlFlow::Continue(())
    };
    for batch in &batches {
        session.submit_moves(batch)?;
        if mode.is_optimizer() {
            let d = session.adapt(&mut observer)?;
            eprintln!(
                "adaptation {}: archive {}, distance {:.4}, hypervolume {:.4}",
                d.adaptation, d.archive_size, d.chosen_distance, d.hypervolume
            );
        }
    }
    if let Some(path) = transcript {
        write_json(path, &session.transcript())?;
    }
    let diagnostics = session.diagnostics().to_vec();
    let (_, report) = session.finish();
    print_json(&serde_json::json!({ "report": report, "diagnostics": diagnostics }))
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    scene: &str,
    users: usize,
    seeds: &[u64],
    conditions: &[Mode],
    cross: bool,
    out: &Path,
    transcripts: Option<&Path>,
    solver: &SolverArgs,
) -> Result<()> {
    if users == 0 {
        bail!("--users must be at least 1");
    }
    let loaded = load_scene(scene)?;
    let users = harness::standard_users(users);
    let config = ExperimentConfig { session: solver.session_config() };
    let mut result = harness::run_experiment(loaded.clone(), &scene_ref(scene), &users, conditions, seeds, &config)?;
    if cross {
        let replayed = harness::cross_replay(loaded, &users, &result)?;
        result.rows.extend(replayed.rows);
        result.transcripts.extend(replayed.transcripts);
    }
    harness::export_results(&result, out)?;
    if let Some(dir) = transcripts {
        std::fs::create_dir_all(dir)?;
        for (row, t) in result.rows.iter().zip(&result.transcripts) {
            let source = row.source_condition.map(|m| format!("-from-{m}")).unwrap_or_default();
            let name = format!("{}-{}{}-{}.json", row.user, row.condition, source, row.seed);
            write_json(&dir.join(name), t)?;
        }
    }
    eprintln!("wrote {} rows to {}", result.rows.len(), out.display());
    Ok(())
}

fn replay_cmd(path: &Path, scene: Option<&str>) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let transcript = Transcript::from_json(&text)?;
    let loaded = load_scene(scene.unwrap_or(&transcript.scene))?;
    let session = replay(loaded, &transcript)?;
    print_json(&session.report())
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn eval(path: &Path, json: bool) -> Result<()> {
    let rows = harness::import_results(path)?;
    if rows.is_empty() {
        bail!("{} has no result rows", path.display());
    }
    let summary = harness::summarize(&rows);
    if json {
        return print_json(&summary);
    }
    println!(
        "{:<28} {:>5} {:>8} {:>12} {:>12} {:>12}",
        "condition", "runs", "moved", "dist_all", "dist_H", "hypervolume"
    );
    for s in &summary {
        let label = match s.source_condition {
            Some(src) => format!("{} (moves of {})", s.condition, src),
            None => s.condition.to_string(),
        };
        println!(
            "{:<28} {:>5} {:>8} {:>12} {:>12} {:>12}",
            label,
            s.runs,
            fmt(s.median_moved_elements),
            fmt(s.median_distance_all),
            fmt(s.median_distance_h),
            fmt(s.median_hypervolume)
        );
    }
    Ok(())
}

async fn serve(
    scenes: Option<PathBuf>,
    port: Option<u16>,
    mut bind: SocketAddr,
    transcripts: Option<PathBuf>,
    solver: &SolverArgs,
) -> Result<()> {
    if let Some(p) = port {
        bind.set_port(p);
    }
    let handle = preflex_server::serve(ServerConfig {
        bind,
        scene_dir: scenes,
        transcript_dir: transcripts,
        session: solver.session_config(),
    })
    .await?;
    eprintln!("listening on ws://{}/ws", handle.local_addr());
    tokio::signal::ctrl_c().await?;
    handle.shutdown().await?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Optimize { scene, mode, seed, moves, transcript, progress, solver } => {
            optimize(&scene, mode, seed, moves.as_deref(), transcript.as_deref(), progress, &solver)
        }
        Command::Simulate { scene, users, seeds, conditions, cross_replay, out, transcripts, solver } => simulate(
            &scene,
            users,
            &seeds.0,
            &conditions,
            cross_replay,
            &out,
            transcripts.as_deref(),
            &solver,
        ),
        Command::Replay { transcript, scene } => replay_cmd(&transcript, scene.as_deref()),
        Command::Eval { results, json } => eval(&results, json),
        Command::Serve { scenes, port, bind, transcripts, solver } => {
            tracing_subscriber::fmt().with_writer(std::io::stderr).init();
            tokio::runtime::Runtime::new()?.block_on(serve(scenes, port, bind, transcripts, &solver))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("0..3").unwrap().0, vec![0, 1, 2]);
        assert_eq!(parse_seeds("2..=4").unwrap().0, vec![2, 3, 4]);
        assert_eq!(parse_seeds("7").unwrap().0, vec![7]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("a..b").is_err());
    }

    #[test]
    fn defaults_match_the_session_defaults() {
        let cli = Cli::try_parse_from(["preflex", "optimize", "--scene", "coffee_shop"]).unwrap();
        let Command::Optimize { solver, mode, .. } = cli.command else { panic!() };
        assert_eq!(mode, Mode::Ours);
        assert_eq!(solver.session_config(), SessionConfig::default());
    }
}
