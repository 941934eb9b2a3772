//! `evsite`: batch entry points for the siting pipeline.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 solver or
//! runtime failure, 64 malformed command line.

mod config;

use std::io::IsTerminal;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use evsite_core::coupled::{read_snapshot, run_coupled, write_snapshot, CoupledConfig, CoupledError, TimeSlicedState};
use evsite_core::hotspots::build_timeline;
use evsite_core::impact::{diff_states, filter_impact, write_report, ImpactReport};
use evsite_core::ingest::ScenarioBundle;
use evsite_core::siting::{SitingError, Weights};
use evsite_core::{Scenario, SliceLabel, Violation};
use evsite_service::{build_siting, scenario_key, siting_key, Service, ServiceConfig, ServiceError};

use config::FileConfig;

#[derive(Parser, Debug)]
#[command(name = "evsite", version, about = "Charging-station siting over coupled road and power networks")]
struct Cli {
    /// Worker threads for the solvers (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// TOML file with `[coupled]`, `[ga]`, `[hotspots]` and `[impact]` tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Same as the `serve` subcommand.
    #[arg(long)]
    serve: bool,
    #[arg(long, requires = "serve")]
    port: Option<u16>,
    #[arg(long, requires = "serve")]
    scenario: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a scenario directory; writes `violations.json`.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve every slice; writes `state.jsonl`.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        coupled: CoupledFlags,
    },
    /// Detect and link hotspots; writes `hotspots.json`.
    Hotspots {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Reuse a snapshot instead of solving.
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long)]
        top_k: Option<usize>,
        #[command(flatten)]
        coupled: CoupledFlags,
    },
    /// Run the GA; writes the ranked solutions, their states and impact reports.
    Site {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// New stations to place.
        #[arg(long)]
        stations: Option<usize>,
        /// Charger range per new station, `MIN:MAX`.
        #[arg(long, value_parser = parse_range)]
        chargers: Option<(u32, u32)>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        children: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Objective weights, `W1,W2,W3`.
        #[arg(long, value_parser = parse_weights)]
        weights: Option<Weights>,
        #[command(flatten)]
        coupled: CoupledFlags,
    },
    /// Compare two snapshots; writes `impact.json`.
    Impact {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        deployed: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Percent.
        #[arg(long)]
        road_threshold: Option<f64>,
        #[arg(long)]
        bus_threshold: Option<f64>,
        /// Keep road deltas in `LO:HI` percent.
        #[arg(long, value_parser = parse_span, allow_hyphen_values = true)]
        road_range: Option<(f64, f64)>,
        #[arg(long, value_parser = parse_span, allow_hyphen_values = true)]
        bus_range: Option<(f64, f64)>,
    },
    /// Serve the HTTP API for one scenario.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    host: IpAddr,
    /// Directory for persisted results.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Front-end files served at `/`.
    #[arg(long = "static")]
    static_dir: Option<PathBuf>,
    /// Heavy jobs of one kind allowed to run at once.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    coupled: CoupledFlags,
}

#[derive(Args, Debug, Default)]
struct CoupledFlags {
    /// Service radius in km.
    #[arg(long)]
    radius: Option<f64>,
    /// Comma-separated slice labels to solve (default: all).
    #[arg(long, value_delimiter = ',')]
    slices: Option<Vec<String>>,
    #[arg(long)]
    ue_tol: Option<f64>,
    #[arg(long)]
    ue_max_iter: Option<usize>,
    #[arg(long)]
    slice_hours: Option<f64>,
}

impl CoupledFlags {
    fn apply(&self, c: &mut CoupledConfig) -> anyhow::Result<()> {
        if let Some(r) = self.radius {
            c.service_radius = r;
        }
        if let Some(s) = &self.slices {
            c.slices = s
                .iter()
                .map(|l| SliceLabel::parse(l).ok_or_else(|| anyhow!("bad slice label `{l}`")))
                .collect::<anyhow::Result<_>>()?;
        }
        if let Some(t) = self.ue_tol {
            c.ue_tol = t;
        }
        if let Some(n) = self.ue_max_iter {
            c.ue_max_iter = n;
        }
        if let Some(h) = self.slice_hours {
            c.slice_hours = h;
        }
        c.validate()?;
        Ok(())
    }
}

fn parse_range(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once(':').ok_or("expected MIN:MAX")?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

fn parse_span(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected LO:HI")?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

fn parse_weights(s: &str) -> Result<Weights, String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("{e}"))).collect::<Result<_, _>>()?;
    match v[..] {
        [w1, w2, w3] => Ok(Weights { w1, w2, w3 }),
        _ => Err("expected three comma-separated weights".into()),
    }
}

enum Failure {
    Invalid(anyhow::Error),
    Solver(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Solver(_) => 2,
        }
    }
}

trait Classify<T> {
    fn invalid(self) -> Result<T, Failure>;
    fn solver(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Invalid(e.into()))
    }
    fn solver(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Solver(e.into()))
    }
}

/// What a command reports on stdout besides its files.
#[derive(Default)]
struct Summary {
    fields: Map<String, Value>,
    outputs: Vec<PathBuf>,
}

impl Summary {
    fn set(&mut self, k: &str, v: impl Serialize) {
        self.fields.insert(k.to_string(), json!(v));
    }

    fn write(&mut self, dir: &Path, name: &str, body: &[u8]) -> Result<(), Failure> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).solver()?;
        let path = dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display())).solver()?;
        self.outputs.push(path);
        Ok(())
    }

    fn json(&mut self, dir: &Path, name: &str, v: &impl Serialize) -> Result<(), Failure> {
        let mut body = serde_json::to_vec_pretty(v).context("encoding JSON").solver()?;
        body.push(b'\n');
        self.write(dir, name, &body)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 64 } else { 0 });
        }
    };
    let format = cli.format;
    let (name, command) = match (cli.serve, cli.command) {
        (true, None) => {
            let Some(scenario) = cli.scenario else {
                eprintln!("error: --serve needs --scenario DIR");
                return ExitCode::from(64);
            };
            let args = ServeArgs {
                scenario,
                port: cli.port.unwrap_or(8080),
                host: IpAddr::V4(Ipv4Addr::LOCALHOST),
                cache: None,
                static_dir: None,
                workers: 1,
                coupled: CoupledFlags::default(),
            };
            ("serve", Command::Serve(args))
        }
        (true, Some(_)) => {
            eprintln!("error: --serve cannot be combined with a subcommand");
            return ExitCode::from(64);
        }
        (false, None) => {
            eprintln!("error: a subcommand is required (validate, run, hotspots, site, impact, serve); see --help");
            return ExitCode::from(64);
        }
        (false, Some(c)) => (command_name(&c), c),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = FileConfig::load(cli.config.as_deref()).invalid().and_then(|cfg| execute(command, cfg, format));
    match result {
        Ok(summary) => {
            report(name, format, &summary);
            ExitCode::SUCCESS
        }
        Err(f) => {
            let (Failure::Invalid(e) | Failure::Solver(e)) = &f;
            match format {
                Format::Json => eprintln!("{}", json!({ "command": name, "status": "error", "exit_code": f.code(), "error": format!("{e:#}") })),
                Format::Text => eprintln!("error: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate { .. } => "validate",
        Command::Run { .. } => "run",
        Command::Hotspots { .. } => "hotspots",
        Command::Site { .. } => "site",
        Command::Impact { .. } => "impact",
        Command::Serve(_) => "serve",
    }
}

fn report(name: &str, format: Format, s: &Summary) {
    match format {
        Format::Json => {
            let mut m = Map::new();
            m.insert("command".into(), json!(name));
            m.insert("status".into(), json!("ok"));
            m.extend(s.fields.clone());
            m.insert("outputs".into(), json!(s.outputs));
            println!("{}", Value::Object(m));
        }
        Format::Text => {
            println!("{name}: ok");
            for (k, v) in &s.fields {
                println!("  {k}: {v}");
            }
            for p in &s.outputs {
                println!("  wrote {}", p.display());
            }
        }
    }
}

fn load(dir: &Path) -> Result<Scenario, Failure> {
    let (scenario, _) = ScenarioBundle::from_dir(dir).and_then(|b| b.parse()).invalid()?;
    let report = scenario.validate();
    if let Some(v) = report.violations.first() {
        return Err(Failure::Invalid(anyhow!(
            "scenario has {} violation(s), first: {} {}: {}",
            report.violations.len(),
            v.code,
            v.entity,
            v.message
        )));
    }
    Ok(scenario)
}

fn read_state(path: &Path) -> Result<TimeSlicedState, Failure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).invalid()?;
    read_snapshot(&text).with_context(|| format!("parsing {}", path.display())).invalid()
}

/// Input mistakes exit 1; only numerical failures exit 2.
fn solve(scenario: &Scenario, cfg: &CoupledConfig) -> Result<TimeSlicedState, Failure> {
    run_coupled(scenario, &scenario.stations, cfg).map_err(|e| match e {
        CoupledError::Assignment { .. } | CoupledError::Opf { .. } => Failure::Solver(e.into()),
        other => Failure::Invalid(other.into()),
    })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn impact_fields(s: &mut Summary, prefix: &str, r: &ImpactReport) {
    s.set(&format!("{prefix}affected_roads"), r.slices.iter().map(|x| x.affected_road_count).sum::<usize>());
    s.set(&format!("{prefix}affected_buses"), r.slices.iter().map(|x| x.affected_bus_count).sum::<usize>());
}

fn execute(command: Command, mut cfg: FileConfig, format: Format) -> Result<Summary, Failure> {
    let mut s = Summary::default();
    match command {
        Command::Validate { scenario, out } => {
            let violations: Vec<Violation> = match ScenarioBundle::from_dir(&scenario).and_then(|b| b.parse()) {
                Ok((sc, warnings)) => {
                    s.set("merged_stations", warnings.len());
                    sc.validate().violations
                }
                Err(e) => vec![Violation { code: e.code().to_string(), entity: "input".into(), message: e.to_string() }],
            };
            if let Some(out) = out {
                s.json(&out, "violations.json", &violations)?;
            }
            if let Some(v) = violations.first() {
                if let Some(p) = s.outputs.first() {
                    eprintln!("violations written to {}", p.display());
                }
                return Err(Failure::Invalid(anyhow!("{} violation(s), first: {} {}: {}", violations.len(), v.code, v.entity, v.message)));
            }
            s.set("violations", 0);
        }
        Command::Run { scenario, out, coupled } => {
            coupled.apply(&mut cfg.coupled).invalid()?;
            let sc = load(&scenario)?;
            let state = solve(&sc, &cfg.coupled)?;
            s.set("slices", state.slices.len());
            s.set("max_relative_gap", state.slices.iter().map(|x| x.relative_gap).fold(0.0, f64::max));
            s.set("mean_coverage", mean(&evsite_service::coverage_series(&state)));
            s.set("infeasible_slices", state.slices.iter().filter(|x| !x.opf_feasible).count());
            s.write(&out, "state.jsonl", write_snapshot(&state).as_bytes())?;
            s.write(&out, "config.toml", cfg.to_toml().as_bytes())?;
        }
        Command::Hotspots { scenario, out, state, top_k, coupled } => {
            coupled.apply(&mut cfg.coupled).invalid()?;
            if let Some(k) = top_k {
                cfg.hotspots.top_k = k;
            }
            let sc = load(&scenario)?;
            let st = match state {
                Some(p) => read_state(&p)?,
                None => solve(&sc, &cfg.coupled)?,
            };
            if st.header.link_ids != sc.road.links().iter().map(|l| l.id).collect::<Vec<_>>() {
                return Err(Failure::Invalid(anyhow!("snapshot does not match the scenario's road network")));
            }
            let timeline = build_timeline(&st, &sc.road, &cfg.hotspots);
            s.set("slices", timeline.slices.len());
            s.set("links", timeline.links.len());
            s.json(&out, "hotspots.json", &timeline)?;
            s.write(&out, "config.toml", cfg.to_toml().as_bytes())?;
        }
        Command::Site { scenario, out, stations, chargers, seed, children, iterations, weights, coupled } => {
            coupled.apply(&mut cfg.coupled).invalid()?;
            let ga = &mut cfg.ga;
            if let Some(n) = stations {
                ga.new_station_count = n;
            }
            if let Some((lo, hi)) = chargers {
                (ga.x_min, ga.x_max) = (lo, hi);
            }
            if let Some(x) = seed {
                ga.seed = x;
            }
            if let Some(x) = children {
                ga.children_per_iteration = x;
                ga.elite = ga.elite.min(x);
            }
            if let Some(x) = iterations {
                ga.iterations = x;
            }
            if let Some(w) = weights {
                ga.weights = w;
            }
            ga.validate().invalid()?;
            let sc = load(&scenario)?;
            let baseline = solve(&sc, &cfg.coupled)?;
            let key = siting_key(&scenario_key(&sc), &cfg.ga, &cfg.coupled);
            let tty = format == Format::Text && std::io::stderr().is_terminal();
            let mut last = -1;
            let progress = |p: f64| {
                let pct = (p * 10.0).floor() as i32;
                if tty && pct > last {
                    last = pct;
                    eprint!("\r  siting {:>3}%", pct * 10);
                }
            };
            let (payload, states) = build_siting(&sc, &baseline, &key, &cfg.ga, &cfg.coupled, progress).map_err(|e| match e {
                SitingError::InvalidConfig(_) | SitingError::InsufficientCandidates { .. } => Failure::Invalid(e.into()),
                other => Failure::Solver(other.into()),
            })?;
            if tty {
                eprintln!();
            }
            s.set("solutions", payload.solutions.len());
            if let Some(best) = payload.solutions.first() {
                s.set("best_objective", best.objective);
                s.set("best_placements", &best.placements);
            }
            s.write(&out, "baseline.jsonl", write_snapshot(&baseline).as_bytes())?;
            s.json(&out, "solutions.json", &payload)?;
            for (sol, state) in payload.solutions.iter().zip(&states) {
                s.write(&out, &format!("solution-{}.jsonl", sol.rank), write_snapshot(state).as_bytes())?;
                let r = diff_states(&baseline, state, &cfg.impact).solver()?;
                s.write(&out, &format!("impact-{}.json", sol.rank), write_report(&r).as_bytes())?;
            }
            s.write(&out, "config.toml", cfg.to_toml().as_bytes())?;
        }
        Command::Impact { baseline, deployed, out, road_threshold, bus_threshold, road_range, bus_range } => {
            if let Some(t) = road_threshold {
                cfg.impact.road = t;
            }
            if let Some(t) = bus_threshold {
                cfg.impact.bus = t;
            }
            let (a, b) = (read_state(&baseline)?, read_state(&deployed)?);
            let all = (f64::NEG_INFINITY, f64::INFINITY);
            let report = diff_states(&a, &b, &cfg.impact)
                .and_then(|r| filter_impact(&r, road_range.unwrap_or(all), bus_range.unwrap_or(all)))
                .invalid()?;
            impact_fields(&mut s, "", &report);
            s.write(&out, "impact.json", write_report(&report).as_bytes())?;
            s.write(&out, "config.toml", cfg.to_toml().as_bytes())?;
        }
        Command::Serve(args) => {
            args.coupled.apply(&mut cfg.coupled).invalid()?;
            let sc = load(&args.scenario)?;
            let service_cfg = ServiceConfig {
                coupled: cfg.coupled.clone(),
                hotspots: cfg.hotspots,
                workers: args.workers,
                cache_dir: args.cache.clone(),
                static_dir: args.static_dir.clone(),
            };
            let service = Service::new(sc, service_cfg).map_err(|e| match e {
                ServiceError::Invalid(_) => Failure::Invalid(e.into()),
                other => Failure::Solver(other.into()),
            })?;
            let addr = SocketAddr::new(args.host, args.port);
            service
                .serve_blocking(addr, |bound| match format {
                    Format::Json => println!("{}", json!({ "command": "serve", "status": "listening", "address": bound.to_string() })),
                    Format::Text => println!("serving http://{bound}/api/v1"),
                })
                .with_context(|| format!("serving on {addr}"))
                .solver()?;
        }
    }
    Ok(s)
}
