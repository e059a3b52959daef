//! `crslab`: generate instances, run selection experiments, exact oracle,
//! Galton-Watson estimates, hardness checks and constants.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crslab_core::analysis::covariance::{covariance_diagnostics, DEFAULT_CANDIDATES};
use crslab_core::analysis::{estimate_selection_on, exact_oracle, hardness_bound_check, HardnessConfig, Mode};
use crslab_core::constants::all_constants;
use crslab_core::generators::GeneratorSpec;
use crslab_core::gw::{estimate_q, lex_diagonal, simulate_gw, uniform_grid, GwOrder, GwSampler, DEFAULT_NODE_CAP};
use crslab_core::instance::to_json_17g;
use crslab_core::orders::{phase_based_general, phase_based_tree};
use crslab_core::schemes::make_exactly_c;
use crslab_core::{ArrivalModel, Error, Instance, SchemeSpec};

const DEFAULT_SEED: u64 = 0;

#[derive(Parser)]
#[command(name = "crslab", version, about = "Online contention resolution experiments for matchings")]
struct Cli {
    /// Worker threads for trial parallelism (results do not depend on it)
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an instance file from a spec such as cycle:31:0.5
    Gen {
        spec: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when omitted
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Estimate Pr[e in M | X_e = 1] by Monte Carlo
    Run(RunArgs),
    /// Exact conditional selection probability by enumeration
    Oracle {
        #[command(flatten)]
        src: Source,
        #[arg(long, default_value = "greedy")]
        scheme: String,
        #[arg(long, default_value = "fixed:canonical")]
        order: String,
        /// Target edge; every edge when omitted
        #[arg(long)]
        edge: Option<usize>,
    },
    /// Greedy on the Poisson(1) Galton-Watson limit
    Gw {
        #[arg(long, default_value = "uniform")]
        order: String,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        /// full or pruned
        #[arg(long, default_value = "pruned")]
        sampler: String,
        #[arg(long, default_value_t = DEFAULT_NODE_CAP)]
        cap: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Also estimate q on a grid of this many points
        #[arg(long)]
        q_grid: Option<usize>,
    },
    /// Normalize a scheme on a hard construction and check the upper bounds
    Hardness {
        #[command(flatten)]
        src: Source,
        #[arg(long, default_value = "greedy")]
        scheme: String,
        #[arg(long, default_value_t = 100_000)]
        pilot_trials: u64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 100_000)]
        cov_trials: u64,
        #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
        candidates: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Only report phase-1 covariance diagnostics for --order
        #[arg(long)]
        covariance_only: bool,
        #[arg(long, default_value = "phase")]
        order: String,
        /// Include the full covariance matrix
        #[arg(long)]
        full_cov: bool,
    },
    /// Print all constants as JSON
    Constants,
}

#[derive(Args)]
struct Source {
    /// Instance JSON file
    #[arg(long, conflicts_with = "gen")]
    instance: Option<PathBuf>,
    /// Generator spec, e.g. star_gadget:200
    #[arg(long)]
    gen: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    src: Source,
    /// greedy, tree_ocrs[:c], vanishing_reduction[:eps=E|:log=L], or inline JSON
    #[arg(long, default_value = "greedy")]
    scheme: String,
    /// uniform_times, lex_seeds, fixed:canonical, fixed:<ids>, phase[:last], or a JSON file
    #[arg(long, default_value = "uniform_times")]
    order: String,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value = "forced")]
    mode: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated target edges; all edges when omitted
    #[arg(long)]
    targets: Option<String>,
    /// Wrap the scheme to be exactly this selectable, from a pilot run
    #[arg(long)]
    exactly_c: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pilot_trials: u64,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

type Res<T> = std::result::Result<T, Error>;

fn seed_of(flag: Option<u64>) -> Res<u64> {
    match std::env::var("CRSLAB_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| Error::invalid(format!("CRSLAB_SEED '{s}' is not an integer"))),
        Err(_) => Ok(flag.unwrap_or(DEFAULT_SEED)),
    }
}

fn load(src: &Source, seed: u64) -> Res<Instance> {
    match (&src.instance, &src.gen) {
        (Some(p), _) => Instance::read(p),
        (None, Some(g)) => g.parse::<GeneratorSpec>()?.generate(seed),
        (None, None) => Err(Error::invalid("give --instance FILE or --gen SPEC")),
    }
}

fn read_file(path: &str) -> Res<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{path}: {e}"))))
}

fn parse_scheme(s: &str) -> Res<SchemeSpec> {
    if s.trim_start().starts_with('{') {
        return Ok(serde_json::from_str(s)?);
    }
    if let Some(path) = s.strip_prefix('@') {
        return Ok(serde_json::from_str(&read_file(path)?)?);
    }
    let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
    let num = |t: &str| t.parse::<f64>().map_err(|_| Error::invalid(format!("bad number '{t}' in scheme '{s}'")));
    match (name, arg) {
        ("greedy", None) => Ok(SchemeSpec::Greedy),
        ("tree_ocrs", None) => Ok(SchemeSpec::tree_ocrs()),
        ("tree_ocrs", Some(c)) => Ok(SchemeSpec::TreeOcrs { c: num(c)? }),
        ("vanishing_reduction" | "vanishing", None) => Ok(SchemeSpec::vanishing()),
        ("vanishing_reduction" | "vanishing", Some(a)) => match a.split_once('=') {
            Some(("eps", v)) => Ok(SchemeSpec::VanishingReduction { epsilon: Some(num(v)?), log_inv_epsilon: None }),
            Some(("log", v)) => Ok(SchemeSpec::VanishingReduction { epsilon: None, log_inv_epsilon: Some(num(v)?) }),
            _ => Err(Error::invalid(format!("unknown scheme option '{a}'"))),
        },
        _ => Err(Error::invalid(format!("unknown scheme '{s}'"))),
    }
}

fn ids(list: &str) -> Res<Vec<usize>> {
    list.split(',')
        .filter(|t| !t.is_empty())
        .map(|t| t.trim().parse().map_err(|_| Error::invalid(format!("bad edge id '{t}'"))))
        .collect()
}

fn parse_order(s: &str, inst: &Instance) -> Res<ArrivalModel> {
    let m = inst.edges.len();
    let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
    match (name, arg) {
        ("uniform_times" | "uniform", None) => Ok(ArrivalModel::UniformTimes),
        ("lex_seeds" | "lex", None) => Ok(ArrivalModel::LexSeeds),
        ("fixed", Some("canonical")) => Ok(ArrivalModel::canonical(m)),
        ("fixed", Some(list)) => Ok(ArrivalModel::Fixed(ids(list)?)),
        ("phase", last) => match inst.metadata.get("family").map(String::as_str) {
            Some("general_hard") => {
                let n = inst.meta_usize("n").unwrap_or(0);
                let v = match last {
                    Some(t) => t.parse().map_err(|_| Error::invalid(format!("bad vertex '{t}'")))?,
                    None => n,
                };
                phase_based_general(inst, v)
            }
            Some("tree_hard") => phase_based_tree(inst, &last.map(ids).transpose()?.unwrap_or_default()),
            _ => Err(Error::invalid("phase orders need a general_hard or tree_hard instance")),
        },
        _ if s.ends_with(".json") => Ok(serde_json::from_str(&read_file(s)?)?),
        _ => Err(Error::invalid(format!("unknown order '{s}'"))),
    }
}

fn emit(text: &str, path: Option<&PathBuf>) -> Res<()> {
    match path {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Res<()> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
            .map_err(|e| Error::invalid(e.to_string()))?;
    }
    match cli.cmd {
        Cmd::Gen { spec, seed, out } => {
            let inst = spec.parse::<GeneratorSpec>()?.generate(seed_of(seed)?)?;
            emit(&inst.to_json(), out.as_ref())
        }
        Cmd::Run(a) => {
            let seed = seed_of(a.seed)?;
            let inst = load(&a.src, seed)?;
            let model = parse_order(&a.order, &inst)?;
            let mode: Mode = a.mode.parse()?;
            let mut scheme = parse_scheme(&a.scheme)?;
            if let Some(c) = a.exactly_c {
                scheme = make_exactly_c(scheme, &inst, &model, c, a.pilot_trials, seed.wrapping_add(1))?;
            }
            let targets = match &a.targets {
                Some(t) => ids(t)?,
                None => (0..inst.edges.len()).collect(),
            };
            let rep = estimate_selection_on(&scheme, &inst, &model, a.trials, mode, seed, &targets)?;
            if let Some(p) = &a.csv {
                rep.write_csv(fs::File::create(p)?)?;
            }
            match (&a.json, &a.csv) {
                (Some(p), _) => emit(&rep.to_json(), Some(p)),
                (None, Some(_)) => Ok(()),
                (None, None) => emit(&rep.to_json(), None),
            }
        }
        Cmd::Oracle { src, scheme, order, edge } => {
            let inst = load(&src, DEFAULT_SEED)?;
            let model = parse_order(&order, &inst)?;
            let scheme = parse_scheme(&scheme)?;
            let edges: Vec<usize> = match edge {
                Some(e) => vec![e],
                None => (0..inst.edges.len()).collect(),
            };
            let mut rows = Vec::new();
            for e in edges {
                rows.push(serde_json::json!({ "edge_id": e, "probability": exact_oracle(&scheme, &inst, &model, e)? }));
            }
            let body = if rows.len() == 1 { rows.pop().expect("one row") } else { serde_json::Value::Array(rows) };
            emit(&to_json_17g(&body), None)
        }
        Cmd::Gw { order, trials, sampler, cap, seed, q_grid } => {
            let seed = seed_of(seed)?;
            let order: GwOrder = order.parse()?;
            let sampler = match sampler.as_str() {
                "full" => GwSampler::Full,
                "pruned" => GwSampler::Pruned,
                other => return Err(Error::invalid(format!("unknown sampler '{other}'"))),
            };
            let est = simulate_gw(order, sampler, trials, cap, seed);
            match q_grid {
                None => emit(&to_json_17g(&est), None),
                Some(k) => {
                    let grid = match order {
                        GwOrder::Uniform => uniform_grid(k),
                        GwOrder::Lex => lex_diagonal(k),
                    };
                    let q = estimate_q(order, &grid, trials, seed)?;
                    emit(&to_json_17g(&serde_json::json!({ "estimate": est, "q": q })), None)
                }
            }
        }
        Cmd::Hardness { src, scheme, pilot_trials, trials, cov_trials, candidates, seed, covariance_only, order, full_cov } => {
            let seed = seed_of(seed)?;
            let inst = load(&src, seed)?;
            let scheme = parse_scheme(&scheme)?;
            if covariance_only {
                let model = parse_order(&order, &inst)?;
                let rep = covariance_diagnostics(&scheme, &inst, &model, cov_trials, seed, candidates)?;
                return emit(&rep.to_json(full_cov), None);
            }
            let cfg = HardnessConfig { pilot_trials, trials, covariance_trials: cov_trials, candidates, seed };
            emit(&hardness_bound_check(&scheme, &inst, &cfg)?.to_json(), None)
        }
        Cmd::Constants => emit(&to_json_17g(&all_constants()), None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::NumericLimit(_) => 3,
                _ => 2,
            })
        }
    }
}
