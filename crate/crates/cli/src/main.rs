use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{debug, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use sinkatlas::analysis::{analyze, render_text, AnalysisOptions, GameDigest};
use sinkatlas::corpus::{parse_shape, random_game, CorpusId, GameClass};
use sinkatlas::dynamics::{
    estimate_omega_limit, integrate_with, IntegrationOptions, StopCondition, TrajectoryRecord, DEFAULT_OMEGA_FLOOR,
    DEFAULT_STEP, DEFAULT_T_MAX,
};
use sinkatlas::graph::graph_report;
use sinkatlas::stability::LocalSourceOptions;
use sinkatlas::verify::verify;
use sinkatlas::{
    build_graph, content_mass, export_dot, sink_equilibria, Error, Game, MixedProfile, ProfileSet, PureProfile,
    DEFAULT_TIE_TOL,
};

const EXIT_INPUT: u8 = 1;
const EXIT_GENERICITY: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "sinkatlas", version, about = "Sink equilibria and replicator dynamics of normal-form games")]
struct Cli {
    /// Payoff differences at or below this are ties.
    #[arg(long, global = true, default_value_t = DEFAULT_TIE_TOL)]
    tie_tol: f64,
    /// Count cavities whose signed sum is zero as failures.
    #[arg(long, global = true)]
    strict_pseudoconvex: bool,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sinks, pseudoconvexity and local-source certificates of a game file.
    Analyze { path: PathBuf },
    /// Integrate the replicator dynamic and summarise where the trajectory ends up.
    Simulate {
        path: PathBuf,
        /// `barycenter`, `random:<seed>`, or distributions such as `0.2,0.8;0.1,0.1,0.8`.
        #[arg(long, default_value = "barycenter")]
        start: String,
        #[arg(long, default_value_t = DEFAULT_T_MAX)]
        tmax: f64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        /// `stationary:<tol>` or `near:<profile>:<radius>` with a profile such as `1,1,1`.
        #[arg(long)]
        stop: Option<String>,
        /// Keep every n-th step in the CSV.
        #[arg(long, default_value_t = 1)]
        record_every: usize,
        /// Trajectory CSV; with an ensemble, one file per run with the run index before the extension.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of runs from consecutive random seeds; requires a `random:<seed>` start.
        #[arg(long)]
        ensemble: Option<usize>,
    },
    /// Scripted checks for a named game.
    Verify { id: CorpusId },
    /// Write a seeded random game.
    Gen {
        /// generic, zero_sum or potential.
        class: GameClass,
        /// Strategy counts such as `3x3` or `2x2x2`.
        shape: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Preference graph export.
    Graph {
        path: PathBuf,
        /// Graphviz output with sink equilibria highlighted.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Named games.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
}

#[derive(Subcommand, Debug)]
enum CorpusAction {
    /// List ids with one-line descriptions.
    List,
    /// Write a named game as a game file.
    Export {
        id: CorpusId,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Lib(Error),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Lib(Error::Parameter(e.to_string()))
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SINKATLAS_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VERIFICATION)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Genericity(_) => EXIT_GENERICITY,
                _ => EXIT_INPUT,
            })
        }
    }
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Analyze { path } => cmd_analyze(cli, path),
        Command::Simulate {
            path,
            start,
            tmax,
            step,
            stop,
            record_every,
            out,
            ensemble,
        } => {
            let g = Game::read(path)?;
            let opts = IntegrationOptions {
                t_max: *tmax,
                step: *step,
                stop: parse_stop(&g, stop.as_deref())?,
                record_every: *record_every,
                observables: Vec::new(),
            };
            cmd_simulate(cli, &g, start, &opts, out.as_deref(), *ensemble)
        }
        Command::Verify { id } => cmd_verify(cli, *id),
        Command::Gen { class, shape, seed, out } => {
            let g = random_game(&parse_shape(shape)?, *class, *seed)?;
            emit_game(&g, out.as_deref())
        }
        Command::Graph { path, dot } => cmd_graph(cli, path, dot.as_deref()),
        Command::Corpus { action } => match action {
            CorpusAction::List => {
                for id in CorpusId::ALL {
                    println!("{:<18} {}", id.as_str(), id.description());
                }
                Ok(())
            }
            CorpusAction::Export { id, out } => emit_game(&id.build().game, out.as_deref()),
        },
    }
}

fn cmd_analyze(cli: &Cli, path: &Path) -> CmdResult {
    let g = Game::read(path)?;
    info!("analyzing {} with tie tolerance {:e}", path.display(), cli.tie_tol);
    let opts = AnalysisOptions {
        tie_tol: cli.tie_tol,
        strict: cli.strict_pseudoconvex,
        local: LocalSourceOptions::default(),
    };
    let report = analyze(&g, &opts)?;
    if cli.json {
        // The text report lists warnings itself.
        for w in &report.warnings {
            warn!("{w}");
        }
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", render_text(&report));
    }
    Ok(())
}

fn parse_profile(g: &Game, text: &str) -> Result<PureProfile, Error> {
    let coords = text
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Error::Parameter(format!("bad profile '{text}': {e}")))?;
    let p = PureProfile::new(coords);
    g.check_profile(&p)?;
    Ok(p)
}

fn parse_stop(g: &Game, spec: Option<&str>) -> Result<StopCondition, Error> {
    let Some(spec) = spec else { return Ok(StopCondition::Never) };
    let bad = || Error::Parameter(format!("bad stop condition '{spec}'"));
    let mut parts = spec.splitn(3, ':');
    match parts.next() {
        Some("stationary") => {
            let tol = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            Ok(StopCondition::Stationary { tol })
        }
        Some("near") => {
            let p = parse_profile(g, parts.next().ok_or_else(bad)?)?;
            let radius = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            Ok(StopCondition::Near {
                target: MixedProfile::pure(g, &p)?,
                radius,
            })
        }
        _ => Err(bad()),
    }
}

fn parse_start(g: &Game, spec: &str) -> Result<MixedProfile, Error> {
    if spec == "barycenter" {
        return Ok(MixedProfile::barycenter(g));
    }
    if let Some(seed) = spec.strip_prefix("random:") {
        let seed: u64 = seed
            .parse()
            .map_err(|_| Error::Parameter(format!("bad seed in '{spec}'")))?;
        return Ok(MixedProfile::random_interior(g, &mut ChaCha8Rng::seed_from_u64(seed)));
    }
    let dists = spec
        .split(';')
        .map(|d| {
            d.split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidMixedProfile(format!("cannot parse start '{spec}': {e}")))?;
    MixedProfile::for_game(g, dists)
}

#[derive(serde::Serialize)]
struct SinkMass {
    sink: usize,
    profiles: Vec<PureProfile>,
    content_mass: f64,
}

#[derive(serde::Serialize)]
struct SimulationSummary {
    run: usize,
    start: MixedProfile,
    final_time: f64,
    stop_reason: sinkatlas::dynamics::StopReason,
    final_state: MixedProfile,
    nearest_profile: PureProfile,
    nearest_distance: f64,
    omega_support: Vec<PureProfile>,
    sinks: Vec<SinkMass>,
}

fn summarise(g: &Game, run: usize, start: MixedProfile, tr: &TrajectoryRecord, sinks: &[ProfileSet]) -> Result<SimulationSummary, Error> {
    let end = tr.final_state();
    let (nearest_profile, nearest_distance) = (0..g.num_profiles())
        .map(|k| {
            let p = g.profile_at(k);
            let d = MixedProfile::pure(g, &p).map(|v| v.distance(&end)).unwrap_or(f64::INFINITY);
            (p, d)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("a game has at least one profile");
    let omega = estimate_omega_limit(g, tr, 0.5, DEFAULT_OMEGA_FLOOR)?;
    Ok(SimulationSummary {
        run,
        start,
        final_time: tr.final_time(),
        stop_reason: tr.stop_reason(),
        final_state: end.clone(),
        nearest_profile,
        nearest_distance,
        omega_support: omega.profiles(g),
        sinks: sinks
            .iter()
            .enumerate()
            .map(|(k, h)| SinkMass {
                sink: k,
                profiles: h.profiles(g),
                content_mass: content_mass(g, h, &end),
            })
            .collect(),
    })
}

fn fmt_dists(x: &MixedProfile) -> String {
    x.dists()
        .iter()
        .map(|d| d.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(" ; ")
}

fn print_summary(s: &SimulationSummary) {
    println!("run {}: stopped at t = {} ({:?})", s.run, s.final_time, s.stop_reason);
    println!("  final state {}", fmt_dists(&s.final_state));
    println!("  nearest pure profile {} at distance {:.6e}", s.nearest_profile, s.nearest_distance);
    let omega: Vec<String> = s.omega_support.iter().map(|p| p.to_string()).collect();
    println!("  omega-limit support estimate: {}", omega.join(" "));
    for m in &s.sinks {
        println!("  sink {} content mass {:.6}", m.sink, m.content_mass);
    }
}

fn indexed_path(out: &Path, k: usize) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}.{k}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{k}"),
    };
    out.with_file_name(name)
}

fn cmd_simulate(
    cli: &Cli,
    g: &Game,
    start: &str,
    opts: &IntegrationOptions,
    out: Option<&Path>,
    ensemble: Option<usize>,
) -> CmdResult {
    let sinks: Vec<ProfileSet> = match build_graph(g, cli.tie_tol).and_then(|pg| sink_equilibria(&pg)) {
        Ok(s) => s.into_iter().map(|h| h.profiles).collect(),
        Err(e) => {
            warn!("sink masses omitted: {e}");
            Vec::new()
        }
    };
    let starts: Vec<MixedProfile> = match ensemble {
        None => vec![parse_start(g, start)?],
        Some(n) => {
            let base: u64 = start
                .strip_prefix("random:")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parameter("--ensemble needs a random:<seed> start".into()))?;
            (0..n as u64)
                .map(|k| parse_start(g, &format!("random:{}", base + k)))
                .collect::<Result<_, _>>()?
        }
    };
    debug!("integrating {} run(s) to t = {}", starts.len(), opts.t_max);
    let results: Vec<Result<(SimulationSummary, String), Error>> = starts
        .into_par_iter()
        .enumerate()
        .map(|(k, x0)| {
            let tr = integrate_with(g, &x0, opts)?;
            let csv = if out.is_some() { tr.to_csv() } else { String::new() };
            Ok((summarise(g, k, x0, &tr, &sinks)?, csv))
        })
        .collect();
    let mut summaries = Vec::with_capacity(results.len());
    for (k, r) in results.into_iter().enumerate() {
        let (s, csv) = r?;
        if let Some(out) = out {
            let path = if ensemble.is_some() { indexed_path(out, k) } else { out.to_path_buf() };
            fs::write(&path, csv).map_err(Error::from)?;
            info!("wrote {}", path.display());
        }
        summaries.push(s);
    }
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&summaries)?);
    } else {
        summaries.iter().for_each(print_summary);
    }
    Ok(())
}

fn cmd_verify(cli: &Cli, id: CorpusId) -> CmdResult {
    let report = verify(id)?;
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{report}");
    }
    if report.all_passed() {
        Ok(())
    } else {
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        Err(Failure::Verification(format!("{failed} check(s) failed for {id}")))
    }
}

fn emit_game(g: &Game, out: Option<&Path>) -> CmdResult {
    match out {
        Some(path) => {
            g.write(path)?;
            let d = GameDigest::of(g);
            println!("wrote {} sha256 {}", path.display(), d.sha256);
        }
        None => print!("{}", g.to_json()),
    }
    Ok(())
}

fn cmd_graph(cli: &Cli, path: &Path, dot: Option<&Path>) -> CmdResult {
    let g = Game::read(path)?;
    let pg = build_graph(&g, cli.tie_tol)?;
    let sinks = sink_equilibria(&pg);
    let highlights: Vec<ProfileSet> = sinks.as_ref().map(|s| s.iter().map(|h| h.profiles.clone()).collect()).unwrap_or_default();
    if let Some(dot) = dot {
        fs::write(dot, export_dot(&pg, &highlights)).map_err(Error::from)?;
        info!("wrote {}", dot.display());
    }
    let report = graph_report(&pg);
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "{} profiles, {} arcs, {} ties, {} strongly connected components",
            g.num_profiles(),
            report.arcs.len(),
            report.degenerate_pairs.len(),
            report.sccs.len()
        );
        for (k, h) in highlights.iter().enumerate() {
            let ps: Vec<String> = h.profiles(&g).iter().map(|p| p.to_string()).collect();
            println!("sink {k}: {}", ps.join(" "));
        }
    }
    sinks?;
    Ok(())
}
