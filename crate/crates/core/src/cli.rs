//! Batch front door: subcommand dispatch over chain-spec files.
//!
//! Outputs are deterministic byte-for-byte given identical flags and
//! `--rng-seed`: replication `i` always samples from the root stream's
//! child `i`, and all emitted maps are key-sorted.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use perfect_mcmc::chain::{Dist, StateIx, StateSpace};
use perfect_mcmc::chainspec::{parse_chain_spec, ChainSpec};
use perfect_mcmc::detection::{
    BoundingDetector, BoundingInterval, DetectionProcess, FullTracking, MtfDetector,
};
use perfect_mcmc::error::{Error, Result};
use perfect_mcmc::oracle::{
    enumerate_altalg, enumerate_cftp_window, enumerate_fill, enumerate_sm,
    read_once_block_analysis, AcceptanceReport, OracleOptions, SeedLaw,
};
use perfect_mcmc::order::{upward_family_from_rule, Poset};
use perfect_mcmc::ratio::{format_ratio, to_f64};
use perfect_mcmc::rng::RngStream;
use perfect_mcmc::rule::TransitionRule;
use perfect_mcmc::samplers::{
    altalg_run, cftp_run, fill_sample, read_once_cftp_run, sm_fill_run, tours_generate,
    AttemptSchedule, SearchSchedule, TourSeed,
};
use perfect_mcmc::stats::{chi_square_gof, independence_chi_square, tv_distance, EmpiricalLaw};

#[derive(Debug, Parser)]
#[command(
    name = "perfect-mcmc",
    about = "Perfect sampling for finite Markov chains: samplers, exact oracle, validation",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Chain-spec JSON file.
    #[arg(long)]
    spec: PathBuf,
    /// Root seed of the ChaCha8 stream family.
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetectorKind {
    Full,
    Bounding,
    Mtf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SearchKind {
    Every,
    Pow2,
    Guarantee,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScheduleKind {
    Fixed,
    Doubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleVariant {
    Fill,
    Altalg,
    Sm,
    CftpWindow,
    ReadOnceBlocks,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Repeated fixed-window rejection runs until acceptance, per replication.
    Fill {
        #[command(flatten)]
        common: Common,
        /// Initial window width.
        #[arg(long)]
        t0: usize,
        /// Seed state label for the backward phase.
        #[arg(long)]
        seed_state: String,
        #[arg(long, value_enum, default_value_t = DetectorKind::Full)]
        detector: DetectorKind,
        #[arg(long, value_enum, default_value_t = ScheduleKind::Fixed)]
        schedule: ScheduleKind,
        #[arg(long, default_value_t = 10_000)]
        max_attempts: u32,
        #[arg(long, default_value_t = 1)]
        reps: u64,
    },
    /// Backward-search runs, per replication.
    Altalg {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4096)]
        t_max: usize,
        #[arg(long, value_enum, default_value_t = SearchKind::Every)]
        search: SearchKind,
        /// Guarantee depth (only with --search guarantee).
        #[arg(long, default_value_t = 1)]
        t0: usize,
        /// Time-zero seed state label; defaults to drawing from the
        /// stationary law.
        #[arg(long)]
        seed_state: Option<String>,
        #[arg(long, default_value_t = 1)]
        reps: u64,
    },
    /// Monotone-case runs through the rule's upward kernels, per replication.
    Sm {
        #[command(flatten)]
        common: Common,
        /// Window width.
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 1)]
        reps: u64,
    },
    /// Coupling-from-the-past runs, per replication.
    Cftp {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        t0: usize,
        #[arg(long, default_value_t = 4096)]
        t_max: usize,
        #[arg(long, default_value_t = 1)]
        reps: u64,
    },
    /// Read-once coupling runs, per replication.
    ReadOnce {
        #[command(flatten)]
        common: Common,
        /// Block width.
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 100_000)]
        max_blocks: u64,
        #[arg(long, default_value_t = 1)]
        reps: u64,
    },
    /// Chained stationary trajectory segments.
    Tours {
        #[command(flatten)]
        common: Common,
        /// Tour length.
        #[arg(long)]
        t0: usize,
        /// Number of tours.
        #[arg(long)]
        nu: usize,
        /// Seed state label; marked approximate in the report. When absent a
        /// backward-search run supplies an exact stationary seed.
        #[arg(long)]
        seed_state: Option<String>,
        #[arg(long, default_value_t = 4096)]
        t_max: usize,
    },
    /// Exact enumeration reports with all numbers as rationals.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = OracleVariant::Fill)]
        variant: OracleVariant,
        /// Window or block width (fill, sm, cftp-window, read-once-blocks).
        #[arg(long, default_value_t = 2)]
        t: usize,
        /// Horizon for the altalg variant.
        #[arg(long, default_value_t = 8)]
        t_max: usize,
        #[arg(long, value_enum, default_value_t = SearchKind::Every)]
        search: SearchKind,
        #[arg(long, default_value_t = 1)]
        t0: usize,
        /// Seed state label; when absent the stationary law seeds the run.
        #[arg(long)]
        seed_state: Option<String>,
        #[arg(long, value_enum, default_value_t = DetectorKind::Full)]
        detector: DetectorKind,
    },
    /// Monte Carlo check of accepted outputs against the stationary law.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        t0: usize,
        /// Backward-phase seed; defaults to the first state.
        #[arg(long)]
        seed_state: Option<String>,
        #[arg(long, value_enum, default_value_t = DetectorKind::Full)]
        detector: DetectorKind,
        #[arg(long, default_value_t = 10_000)]
        max_attempts: u32,
        #[arg(long, default_value_t = 10_000)]
        reps: u64,
    },
}

/// Detector chosen at runtime.
enum AnyDetector {
    Full(FullTracking),
    Bounding(BoundingDetector),
    Mtf(MtfDetector),
}

#[derive(Clone)]
enum AnyDetState {
    Full(Vec<StateIx>),
    Bounding(BoundingInterval),
    Mtf(u32),
}

impl DetectionProcess for AnyDetector {
    type State = AnyDetState;

    fn initial(&self) -> AnyDetState {
        match self {
            AnyDetector::Full(d) => AnyDetState::Full(d.initial()),
            AnyDetector::Bounding(d) => AnyDetState::Bounding(d.initial()),
            AnyDetector::Mtf(d) => AnyDetState::Mtf(d.initial()),
        }
    }

    fn step(&self, s: &AnyDetState, label: usize) -> AnyDetState {
        match (self, s) {
            (AnyDetector::Full(d), AnyDetState::Full(s)) => AnyDetState::Full(d.step(s, label)),
            (AnyDetector::Bounding(d), AnyDetState::Bounding(s)) => {
                AnyDetState::Bounding(d.step(s, label))
            }
            (AnyDetector::Mtf(d), AnyDetState::Mtf(s)) => AnyDetState::Mtf(d.step(s, label)),
            _ => unreachable!("detector state mismatch"),
        }
    }

    fn in_target(&self, s: &AnyDetState) -> bool {
        match (self, s) {
            (AnyDetector::Full(d), AnyDetState::Full(s)) => d.in_target(s),
            (AnyDetector::Bounding(d), AnyDetState::Bounding(s)) => d.in_target(s),
            (AnyDetector::Mtf(d), AnyDetState::Mtf(s)) => d.in_target(s),
            _ => unreachable!("detector state mismatch"),
        }
    }
}

struct Loaded {
    spec: ChainSpec,
    pi: Dist,
}

fn load(common: &Common) -> Result<Loaded> {
    let text = std::fs::read_to_string(&common.spec)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", common.spec.display())))?;
    let spec = parse_chain_spec(&text)?;
    let pi = spec.resolved_pi()?;
    Ok(Loaded { spec, pi })
}

fn require_rule(spec: &ChainSpec) -> Result<&TransitionRule> {
    spec.rule
        .as_ref()
        .ok_or_else(|| Error::validation("rule", "this subcommand needs a transition rule"))
}

fn require_poset(spec: &ChainSpec) -> Result<&Poset> {
    spec.poset
        .as_ref()
        .ok_or_else(|| Error::validation("poset", "this subcommand needs a poset"))
}

fn state_index(space: &StateSpace, label: &str, flag: &str) -> Result<StateIx> {
    space
        .index_of(label)
        .ok_or_else(|| Error::validation(flag, format!("unknown state `{label}`")))
}

fn build_detector(
    kind: DetectorKind,
    rule: &TransitionRule,
    poset: Option<&Poset>,
) -> Result<AnyDetector> {
    Ok(match kind {
        DetectorKind::Full => AnyDetector::Full(FullTracking::new(rule)),
        DetectorKind::Bounding => {
            let p = poset.ok_or_else(|| {
                Error::validation("poset", "the bounding detector needs a poset")
            })?;
            AnyDetector::Bounding(BoundingDetector::new(rule, p)?)
        }
        DetectorKind::Mtf => AnyDetector::Mtf(MtfDetector::for_records(rule.n_labels())),
    })
}

fn oracle_options() -> Result<OracleOptions> {
    let mut opts = OracleOptions::default();
    if let Ok(raw) = std::env::var("PERFECT_MCMC_ENUM_CAP") {
        let cap: u64 = raw.parse().map_err(|_| {
            Error::Invalid(format!("PERFECT_MCMC_ENUM_CAP=`{raw}` is not a number"))
        })?;
        opts.term_cap = cap;
    }
    Ok(opts)
}

fn emit(common: &Common, report: &Value, csv: Option<String>) -> Result<()> {
    let body = match common.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("serializable");
            s.push('\n');
            s
        }
        Format::Csv => csv.ok_or_else(|| {
            Error::Invalid("this subcommand has no CSV form; use --format json".into())
        })?,
    };
    match &common.out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", path.display()))),
        None => {
            std::io::stdout()
                .write_all(body.as_bytes())
                .map_err(|e| Error::Invalid(format!("cannot write stdout: {e}")))
        }
    }
}

fn rng_meta(seed: u64) -> Value {
    json!({
        "algorithm": "chacha8",
        "seed": seed,
        "stream_rule": "replication i draws from stream i+1; the root uses stream 0",
    })
}

fn dist_strings(d: &Dist) -> Vec<String> {
    d.weights().iter().map(format_ratio).collect()
}

fn acceptance_report_json(space: &StateSpace, r: &AcceptanceReport) -> Value {
    let cond: Vec<Value> = r
        .cond_law
        .iter()
        .map(|d| Value::from(dist_strings(d)))
        .collect();
    let joint: serde_json::Map<String, Value> = r
        .joint_hit_output
        .iter()
        .map(|(t, row)| {
            (
                t.to_string(),
                Value::from(row.iter().map(format_ratio).collect::<Vec<_>>()),
            )
        })
        .collect();
    json!({
        "states": space.labels(),
        "p_accept": format_ratio(&r.p_accept),
        "p_first_space": format_ratio(&r.p_first_space),
        "seed_density": r.seed_density.iter().map(format_ratio).collect::<Vec<_>>(),
        "cond_law": cond,
        "joint_hit_output": Value::Object(joint),
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fill {
            common,
            t0,
            seed_state,
            detector,
            schedule,
            max_attempts,
            reps,
        } => {
            let loaded = load(&common)?;
            let rule = require_rule(&loaded.spec)?;
            let det = build_detector(detector, rule, loaded.spec.poset.as_ref())?;
            let seed = state_index(&loaded.spec.space, &seed_state, "seed-state")?;
            let sched = match schedule {
                ScheduleKind::Fixed => AttemptSchedule::FixedT,
                ScheduleKind::Doubling => AttemptSchedule::DoublingT,
            };
            let root = RngStream::from_seed(common.rng_seed);
            let mut rows = Vec::new();
            for rep in 0..reps {
                let mut rng = root.split(rep);
                let out = fill_sample(
                    &loaded.spec.kernel,
                    &loaded.pi,
                    rule,
                    &det,
                    seed,
                    t0,
                    sched,
                    max_attempts,
                    &mut rng,
                )?;
                rows.push((rep, out));
            }
            let results: Vec<Value> = rows
                .iter()
                .map(|(rep, o)| {
                    json!({
                        "rep": rep,
                        "accepted": o.accepted,
                        "output": o.output.map(|s| loaded.spec.space.label(s).to_string()),
                        "t_used": o.t_used,
                        "attempts": o.attempts,
                        "seed_state": loaded.spec.space.label(o.seed_state),
                        "rng_seed": o.rng_seed,
                        "rng_stream": o.rng_stream,
                    })
                })
                .collect();
            let mut csv = String::from(
                "rep,accepted,output,t_used,attempts,seed_state,rng_seed,rng_stream\n",
            );
            for (rep, o) in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    rep,
                    o.accepted,
                    o.output
                        .map(|s| loaded.spec.space.label(s).to_string())
                        .unwrap_or_default(),
                    o.t_used,
                    o.attempts,
                    loaded.spec.space.label(o.seed_state),
                    o.rng_seed,
                    o.rng_stream,
                ));
            }
            let report = json!({
                "command": "fill",
                "rng": rng_meta(common.rng_seed),
                "params": {"t0": t0, "seed_state": seed_state, "reps": reps,
                            "max_attempts": max_attempts},
                "results": results,
            });
            emit(&common, &report, Some(csv))
        }

        Command::Altalg {
            common,
            t_max,
            search,
            t0,
            seed_state,
            reps,
        } => {
            let loaded = load(&common)?;
            let rule = require_rule(&loaded.spec)?;
            let sched = match search {
                SearchKind::Every => SearchSchedule::EveryT,
                SearchKind::Pow2 => SearchSchedule::PowersOf2,
                SearchKind::Guarantee => SearchSchedule::Guarantee(t0),
            };
            let pi_hat = match &seed_state {
                Some(label) => Dist::point(
                    loaded.spec.space.len(),
                    state_index(&loaded.spec.space, label, "seed-state")?,
                ),
                None => loaded.pi.clone(),
            };
            let root = RngStream::from_seed(common.rng_seed);
            let mut rows = Vec::new();
            for rep in 0..reps {
                let mut rng = root.split(rep);
                let out = altalg_run(
                    &loaded.spec.kernel,
                    &loaded.pi,
                    rule,
                    &pi_hat,
                    t_max,
                    sched,
                    &mut rng,
                )?;
                rows.push((rep, out));
            }
            let results: Vec<Value> = rows
                .iter()
                .map(|(rep, o)| {
                    json!({
                        "rep": rep,
                        "output": loaded.spec.space.label(o.output),
                        "backward_time": o.backward_time,
                        "t_used": o.t_used,
                        "start_state": loaded.spec.space.label(o.start_state),
                        "rng_seed": o.rng_seed,
                        "rng_stream": o.rng_stream,
                    })
                })
                .collect();
            let mut csv =
                String::from("rep,output,backward_time,t_used,start_state,rng_seed,rng_stream\n");
            for (rep, o) in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    rep,
                    loaded.spec.space.label(o.output),
                    o.backward_time,
                    o.t_used,
                    loaded.spec.space.label(o.start_state),
                    o.rng_seed,
                    o.rng_stream,
                ));
            }
            let report = json!({
                "command": "altalg",
                "rng": rng_meta(common.rng_seed),
                "params": {"t_max": t_max, "t0": t0, "reps": reps},
                "results": results,
            });
            emit(&common, &report, Some(csv))
        }

        Command::Sm { common, t, reps } => {
            let loaded = load(&common)?;
            let rule = require_rule(&loaded.spec)?;
            let poset = require_poset(&loaded.spec)?;
            let fam = upward_family_from_rule(rule, poset)?;
            let root = RngStream::from_seed(common.rng_seed);
            let mut rows = Vec::new();
            for rep in 0..reps {
                let mut rng = root.split(rep);
                let out = sm_fill_run(&loaded.spec.kernel, &loaded.pi, &fam, poset, t, &mut rng)?;
                rows.push((rep, out));
            }
            let results: Vec<Value> = rows
                .iter()
                .map(|(rep, o)| {
                    json!({
                        "rep": rep,
                        "accepted": o.accepted,
                        "output": o.output.map(|s| loaded.spec.space.label(s).to_string()),
                        "t_used": o.t_used,
                        "seed_state": loaded.spec.space.label(o.seed_state),
                        "rng_seed": o.rng_seed,
                        "rng_stream": o.rng_stream,
                    })
                })
                .collect();
            let mut csv =
                String::from("rep,accepted,output,t_used,seed_state,rng_seed,rng_stream\n");
            for (rep, o) in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    rep,
                    o.accepted,
                    o.output
                        .map(|s| loaded.spec.space.label(s).to_string())
                        .unwrap_or_default(),
                    o.t_used,
                    loaded.spec.space.label(o.seed_state),
                    o.rng_seed,
                    o.rng_stream,
                ));
            }
            let report = json!({
                "command": "sm",
                "rng": rng_meta(common.rng_seed),
                "params": {"t": t, "reps": reps},
                "results": results,
            });
            emit(&common, &report, Some(csv))
        }

        Command::Cftp {
            common,
            t0,
            t_max,
            reps,
        } => {
            let loaded = load(&common)?;
            let rule = require_rule(&loaded.spec)?;
            let root = RngStream::from_seed(common.rng_seed);
            let mut rows = Vec::new();
            for rep in 0..reps {
                let mut rng = root.split(rep);
                rows.push((rep, cftp_run(rule, t0, t_max, &mut rng)?));
            }
            let results: Vec<Value> = rows
                .iter()
                .map(|(rep, o)| {
                    json!({
                        "rep": rep,
                        "output": loaded.spec.space.label(o.output),
                        "backward_time": o.backward_time,
                        "t_used": o.t_used,
                        "rng_seed": o.rng_seed,
                        "rng_stream": o.rng_stream,
                    })
                })
                .collect();
            let mut csv = String::from("rep,output,backward_time,t_used,rng_seed,rng_stream\n");
            for (rep, o) in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    rep,
                    loaded.spec.space.label(o.output),
                    o.backward_time,
                    o.t_used,
                    o.rng_seed,
                    o.rng_stream,
                ));
            }
            let report = json!({
                "command": "cftp",
                "rng": rng_meta(common.rng_seed),
                "params": {"t0": t0, "t_max": t_max, "reps": reps},
                "results": results,
            });
            emit(&common, &report, Some(csv))
        }

        Command::ReadOnce {
            common,
            t,
            max_blocks,
            reps,
        } => {
            let loaded = load(&common)?;
            let rule = require_rule(&loaded.spec)?;
            let root = RngStream::from_seed(common.rng_seed);
            let mut rows = Vec::new();
            for rep in 0..reps {
                let mut rng = root.split(rep);
                rows.push((rep, read_once_cftp_run(rule, t, max_blocks, &mut rng)?));
            }
            let results: Vec<Value> = rows
                .iter()
                .map(|(rep, o)| {
                    json!({
                        "rep": rep,
                        "output": loaded.spec.space.label(o.output),
                        "blocks_used": o.blocks_used,
                        "t_used": o.t_used,
                        "rng_seed": o.rng_seed,
                        "rng_stream": o.rng_stream,
                    })
                })
                .collect();
            let mut csv = String::from("rep,output,blocks_used,t_used,rng_seed,rng_stream\n");
            for (rep, o) in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    rep,
                    loaded.spec.space.label(o.output),
                    o.blocks_used,
                    o.t_used,
                    o.rng_seed,
                    o.rng_stream,
                ));
            }
            let report = json!({
                "command": "read-once",
                "rng": rng_meta(common.rng_seed),
                "params": {"t": t, "max_blocks": max_blocks, "reps": reps},
                "results": results,
            });
            emit(&common, &report, Some(csv))
        }

        Command::Tours {
            common,
            t0,
            nu,
            seed_state,
            t_max,
        } => {
            let loaded = load(&common)?;
            let rule = require_rule(&loaded.spec)?;
            let root = RngStream::from_seed(common.rng_seed);
            let seed = match &seed_state {
                Some(label) => {
                    TourSeed::Approximate(state_index(&loaded.spec.space, label, "seed-state")?)
                }
                None => {
                    // obtain an exact stationary seed from a backward search
                    let mut rng = root.split(0);
                    let warm = altalg_run(
                        &loaded.spec.kernel,
                        &loaded.pi,
                        rule,
                        &Dist::point(loaded.spec.space.len(), 0),
                        t_max,
                        SearchSchedule::EveryT,
                        &mut rng,
                    )?;
                    TourSeed::Stationary(warm.output)
                }
            };
            let mut rng = root.split(1);
            let batch = tours_generate(
                &loaded.spec.kernel,
                &loaded.pi,
                rule,
                t0,
                nu,
                seed,
                t_max,
                &mut rng,
            )?;
            let tours: Vec<Vec<String>> = batch
                .tours
                .iter()
                .map(|traj| {
                    traj.states()
                        .iter()
                        .map(|&s| loaded.spec.space.label(s).to_string())
                        .collect()
                })
                .collect();
            let mut csv = String::from("tour,step,state\n");
            for (i, tour) in tours.iter().enumerate() {
                for (s, state) in tour.iter().enumerate() {
                    csv.push_str(&format!("{i},{s},{state}\n"));
                }
            }
            let report = json!({
                "command": "tours",
                "rng": rng_meta(common.rng_seed),
                "params": {"t0": t0, "nu": nu, "t_max": t_max},
                "exact": batch.exact,
                "tours": tours,
            });
            emit(&common, &report, Some(csv))
        }

        Command::Oracle {
            common,
            variant,
            t,
            t_max,
            search,
            t0,
            seed_state,
            detector,
        } => {
            let loaded = load(&common)?;
            let opts = oracle_options()?;
            let report_body = match variant {
                OracleVariant::Fill => {
                    let rule = require_rule(&loaded.spec)?;
                    let det = build_detector(detector, rule, loaded.spec.poset.as_ref())?;
                    let seed_ix = seed_state
                        .as_deref()
                        .map(|l| state_index(&loaded.spec.space, l, "seed-state"))
                        .transpose()?;
                    let seed = match seed_ix {
                        Some(z) => SeedLaw::Fixed(z),
                        None => SeedLaw::Law(&loaded.pi),
                    };
                    let r = enumerate_fill(
                        &loaded.spec.kernel,
                        &loaded.pi,
                        rule,
                        &det,
                        t,
                        seed,
                        opts,
                    )?;
                    acceptance_report_json(&loaded.spec.space, &r)
                }
                OracleVariant::Sm => {
                    let rule = require_rule(&loaded.spec)?;
                    let poset = require_poset(&loaded.spec)?;
                    let fam = upward_family_from_rule(rule, poset)?;
                    let r = enumerate_sm(&loaded.spec.kernel, &loaded.pi, &fam, poset, t, opts)?;
                    acceptance_report_json(&loaded.spec.space, &r)
                }
                OracleVariant::Altalg => {
                    let rule = require_rule(&loaded.spec)?;
                    let sched = match search {
                        SearchKind::Every => SearchSchedule::EveryT,
                        SearchKind::Pow2 => SearchSchedule::PowersOf2,
                        SearchKind::Guarantee => SearchSchedule::Guarantee(t0),
                    };
                    let pi_hat = match &seed_state {
                        Some(label) => Dist::point(
                            loaded.spec.space.len(),
                            state_index(&loaded.spec.space, label, "seed-state")?,
                        ),
                        None => loaded.pi.clone(),
                    };
                    let r = enumerate_altalg(
                        &loaded.spec.kernel,
                        &loaded.pi,
                        rule,
                        &pi_hat,
                        t_max,
                        sched,
                        opts,
                    )?;
                    let joint: serde_json::Map<String, Value> = r
                        .joint
                        .iter()
                        .map(|(depth, row)| {
                            (
                                depth.to_string(),
                                Value::from(
                                    row.iter().map(format_ratio).collect::<Vec<_>>(),
                                ),
                            )
                        })
                        .collect();
                    json!({
                        "states": loaded.spec.space.labels(),
                        "p_accept": format_ratio(&r.p_accept),
                        "output_law": r.output_law().map(|d| dist_strings(&d)),
                        "joint_depth_output": Value::Object(joint),
                        "interruptible": r.factorizes(),
                    })
                }
                OracleVariant::CftpWindow => {
                    let rule = require_rule(&loaded.spec)?;
                    let p = enumerate_cftp_window(rule, t, opts)?;
                    json!({ "t": t, "p_coalesce_window": format_ratio(&p) })
                }
                OracleVariant::ReadOnceBlocks => {
                    let rule = require_rule(&loaded.spec)?;
                    let a = read_once_block_analysis(rule, t, opts)?;
                    json!({
                        "t": t,
                        "p_coalesce": format_ratio(&a.p_coalesce),
                        "value_law": dist_strings(&a.value_law),
                    })
                }
            };
            let variant_name = match variant {
                OracleVariant::Fill => "fill",
                OracleVariant::Altalg => "altalg",
                OracleVariant::Sm => "sm",
                OracleVariant::CftpWindow => "cftp-window",
                OracleVariant::ReadOnceBlocks => "read-once-blocks",
            };
            let report = json!({
                "command": "oracle",
                "variant": variant_name,
                "report": report_body,
            });
            emit(&common, &report, None)
        }

        Command::Validate {
            common,
            t0,
            seed_state,
            detector,
            max_attempts,
            reps,
        } => {
            let loaded = load(&common)?;
            let rule = require_rule(&loaded.spec)?;
            let det = build_detector(detector, rule, loaded.spec.poset.as_ref())?;
            let seed_label = seed_state
                .clone()
                .unwrap_or_else(|| loaded.spec.space.label(0).to_string());
            let seed = state_index(&loaded.spec.space, &seed_label, "seed-state")?;
            let root = RngStream::from_seed(common.rng_seed);
            let n = loaded.spec.space.len();
            let mut counts = vec![0u64; n];
            let mut attempts_total = 0u64;
            let mut depth_output = Vec::new();
            for rep in 0..reps {
                let mut rng = root.split(rep);
                let out = fill_sample(
                    &loaded.spec.kernel,
                    &loaded.pi,
                    rule,
                    &det,
                    seed,
                    t0,
                    AttemptSchedule::FixedT,
                    max_attempts,
                    &mut rng,
                )?;
                let state = out.output.expect("fill_sample only returns acceptances");
                counts[state] += 1;
                attempts_total += u64::from(out.attempts);
                depth_output.push((out.attempts as usize - 1, state));
            }
            let law = EmpiricalLaw::from_counts(counts.clone());
            let tv = tv_distance(&law, &loaded.pi)?;
            let gof = chi_square_gof(&law, &loaded.pi)?;
            let indep = independence_chi_square(&depth_output)?;
            let report = json!({
                "command": "validate",
                "rng": rng_meta(common.rng_seed),
                "params": {"t0": t0, "seed_state": seed_label, "reps": reps},
                "counts": counts,
                "pi": loaded.pi.weights().iter().map(to_f64).collect::<Vec<_>>(),
                "tv_distance": tv,
                "chi_square": {
                    "statistic": gof.statistic,
                    "dof": gof.dof,
                    "p_value": gof.p_value,
                    "low_expected": gof.low_expected,
                },
                "attempts_output_independence": {
                    "statistic": indep.statistic,
                    "dof": indep.dof,
                    "p_value": indep.p_value,
                },
                "mean_attempts": attempts_total as f64 / reps.max(1) as f64,
            });
            emit(&common, &report, None)
        }
    }
}
