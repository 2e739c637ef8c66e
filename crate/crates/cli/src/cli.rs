//! The `prefsynth` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use prefsynth_core::analysis::{brute_force_frontier, compute_bounds, BigM, DEFAULT_LIMIT};
use prefsynth_core::io::{import_explicit, model_from_json, model_to_json, ExplicitOptions, ModelDoc};
use prefsynth_core::mdp::{validate_model, MdpModel};
use prefsynth_core::milp::export_lp;
use prefsynth_core::preferences::{aggregate_to_interval, Elicitation, IntervalWeightVector, WeightVector};
use prefsynth_core::synthesis::{encode_with_scope, synthesize, PenaltyScope, SynthesisConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::jobs::{JobRegistry, DEFAULT_CAPACITY, DEFAULT_CONCURRENCY};
use crate::request::{pareto_document, synthesis_document};
use crate::scenario::{grid_scenario, load_map, Scenario};

#[derive(Parser, Debug)]
#[command(name = "prefsynth", version, about = "Permissive multi-strategy synthesis under interval preferences")]
struct Cli {
    /// Seed for commands that sample at random.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Source {
    /// Model file: JSON document, or an explicit transition listing (`.tra`).
    #[arg(long, group = "source")]
    model: Option<PathBuf>,
    /// Built-in map id.
    #[arg(long, group = "source")]
    map: Option<String>,
    /// Grid map file over `. # S D F P`.
    #[arg(long, group = "source")]
    grid: Option<PathBuf>,
    /// Reward listing for `.tra` models, as `name=path`.
    #[arg(long = "reward", value_name = "NAME=PATH")]
    rewards: Vec<String>,
    /// Motion noise for grid maps.
    #[arg(long)]
    noise: Option<f64>,
    /// Objectives, e.g. `dist:min,risk:min`.
    #[arg(long)]
    property: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Scope {
    Reachable,
    AllStates,
}

impl From<Scope> for PenaltyScope {
    fn from(s: Scope) -> Self {
        match s {
            Scope::Reachable => PenaltyScope::Reachable,
            Scope::AllStates => PenaltyScope::AllStates,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a model's structural invariants.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// Weighted Pareto points or the enumerated frontier.
    Pareto {
        #[command(flatten)]
        source: Source,
        /// Comma-separated weight vector.
        #[arg(long, conflicts_with_all = ["samples", "frontier"])]
        weights: Option<String>,
        /// Number of weight vectors drawn uniformly from the simplex.
        #[arg(long, conflicts_with = "frontier")]
        samples: Option<usize>,
        /// Enumerate every deterministic strategy.
        #[arg(long)]
        frontier: bool,
    },
    /// Objective bounds induced by an interval weight vector.
    Bounds {
        #[command(flatten)]
        source: Source,
        /// `lo:hi` per objective, comma-separated.
        #[arg(long)]
        interval: String,
    },
    /// Synthesize an optimally permissive multi-strategy.
    Synthesize {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        interval: String,
        /// Seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        big_m: Option<f64>,
        #[arg(long, value_enum, default_value = "reachable")]
        scope: Scope,
        /// Also write the MILP in LP format.
        #[arg(long)]
        export_lp: Option<PathBuf>,
        /// Write the result document here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Turn elicitation answers into weights.
    Elicit {
        /// `direct`, `likert`, `pairwise_names` or `pairwise_routes`.
        #[arg(long, requires = "data", conflicts_with = "payload")]
        method: Option<String>,
        /// JSON data for the method.
        #[arg(long)]
        data: Option<String>,
        /// File with one payload or an array of payloads (`-` for stdin).
        #[arg(long)]
        payload: Option<PathBuf>,
    },
    /// Convert a grid map to its MDP.
    Grid {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write the synthesis MILP in LP format.
    ExportLp {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        interval: String,
        #[arg(long)]
        big_m: Option<f64>,
        #[arg(long, value_enum, default_value = "all-states")]
        scope: Scope,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "PREFSYNTH_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "PREFSYNTH_DATA_DIR", default_value = "prefsynth-data")]
        data_dir: PathBuf,
        /// Directory with the built web UI.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_CONCURRENCY)]
        concurrency: usize,
        #[arg(long, default_value_t = DEFAULT_CAPACITY)]
        capacity: usize,
    },
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl From<prefsynth_core::Error> for Failure {
    fn from(e: prefsynth_core::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

impl From<crate::error::ServiceError> for Failure {
    fn from(e: crate::error::ServiceError) -> Self {
        Failure::Domain(e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Domain(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        return std::io::read_to_string(std::io::stdin()).map_err(|e| io_failure(path, e));
    }
    std::fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| io_failure(path, e))
}

/// Integral floats print without a fractional part.
fn tidy(v: Value) -> Value {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() && x.fract() == 0.0 && x.abs() < 9.0e15 => json!(x as i64),
            _ => Value::Number(n),
        },
        Value::Array(a) => Value::Array(a.into_iter().map(tidy).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, tidy(v))).collect()),
        other => other,
    }
}

fn emit(out: &mut dyn Write, v: Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(&tidy(v)).expect("json serializes");
    writeln!(out, "{text}").map_err(|e| Failure::Domain(e.to_string()))
}

/// A model read from a file has no property until it is validated.
enum Loaded {
    Model(MdpModel),
    Scenario(Scenario),
}

impl Loaded {
    fn model(&self) -> &MdpModel {
        match self {
            Loaded::Model(m) => m,
            Loaded::Scenario(s) => &s.model,
        }
    }
}

fn load_unchecked(src: &Source) -> Result<Loaded, Failure> {
    match (&src.model, &src.map, &src.grid) {
        (Some(path), None, None) => {
            let text = read(path)?;
            if path.extension().is_some_and(|e| e == "tra") {
                let mut listings = Vec::new();
                for entry in &src.rewards {
                    let (name, file) = entry
                        .split_once('=')
                        .ok_or_else(|| Failure::Usage(format!("--reward expects NAME=PATH, got `{entry}`")))?;
                    listings.push((name.to_string(), read(Path::new(file))?));
                }
                let refs: Vec<(&str, &str)> = listings.iter().map(|(n, t)| (n.as_str(), t.as_str())).collect();
                Ok(Loaded::Model(import_explicit(&text, &refs, &ExplicitOptions::default())?))
            } else {
                Ok(Loaded::Model(model_from_json(&text)?))
            }
        }
        (None, Some(id), None) => Ok(Loaded::Scenario(
            load_map(id, src.noise).ok_or_else(|| Failure::Domain(format!("unknown map `{id}`")))??,
        )),
        (None, None, Some(path)) => Ok(Loaded::Scenario(grid_scenario(&read(path)?, src.noise)?)),
        _ => Err(Failure::Usage("give one of --model, --map or --grid".into())),
    }
}

fn load(src: &Source) -> Result<Scenario, Failure> {
    let mut s = match load_unchecked(src)? {
        Loaded::Model(m) => {
            validate_model(&m).into_result()?;
            Scenario::with_default_property(m, None)?
        }
        Loaded::Scenario(s) => s,
    };
    if let Some(p) = &src.property {
        s.set_property(p)?;
    }
    Ok(s)
}

fn interval(text: &str, s: &Scenario) -> Result<IntervalWeightVector, Failure> {
    let iwv: IntervalWeightVector = text.parse()?;
    if iwv.len() != s.property.len() {
        return Err(Failure::Domain(format!(
            "interval has {} entries, property has {} objectives",
            iwv.len(),
            s.property.len()
        )));
    }
    Ok(iwv)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { source } => {
            let loaded = load_unchecked(&source)?;
            let report = validate_model(loaded.model());
            let valid = report.is_valid();
            let violations: Vec<Value> = report
                .violations
                .iter()
                .map(|v| json!({"kind": v.kind, "state": v.state, "action": v.action, "message": v.to_string()}))
                .collect();
            emit(out, json!({"valid": valid, "violations": violations}))?;
            if valid {
                Ok(())
            } else {
                Err(Failure::Domain(format!("{} violation(s)", report.violations.len())))
            }
        }
        Command::Pareto {
            source,
            weights,
            samples,
            frontier,
        } => {
            let s = load(&source)?;
            let n = s.property.len();
            if frontier {
                let points = brute_force_frontier(&s.model, &s.property, DEFAULT_LIMIT)?;
                let pts: Vec<&Vec<f64>> = points.iter().map(|p| &p.point).collect();
                return emit(out, json!({"objectives": s.objective_names(), "frontier": pts}));
            }
            let ws: Vec<WeightVector> = match (weights, samples) {
                (Some(w), None) => {
                    let v = w
                        .split(',')
                        .map(|x| x.trim().parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| Failure::Usage(format!("--weights: {e}")))?;
                    vec![WeightVector::new(v)?]
                }
                (None, Some(k)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
                    (0..k)
                        .map(|_| {
                            let e: Vec<f64> = (0..n).map(|_| -rng.gen_range(f64::EPSILON..1.0f64).ln()).collect();
                            let total: f64 = e.iter().sum();
                            WeightVector::new(e.iter().map(|x| x / total).collect())
                        })
                        .collect::<prefsynth_core::Result<_>>()?
                }
                _ => return Err(Failure::Usage("give --weights, --samples or --frontier".into())),
            };
            let mut docs = Vec::new();
            for w in &ws {
                if w.len() != n {
                    return Err(Failure::Domain(format!("expected {n} weights, got {}", w.len())));
                }
                docs.push(pareto_document(&s, w)?);
            }
            emit(out, if docs.len() == 1 { docs.remove(0) } else { Value::Array(docs) })
        }
        Command::Bounds { source, interval: text } => {
            let s = load(&source)?;
            let iwv = interval(&text, &s)?;
            let b = compute_bounds(&s.model, &s.property, &iwv)?;
            emit(out, json!({"lower": b.lower, "upper": b.upper}))
        }
        Command::Synthesize {
            source,
            interval: text,
            time_limit,
            big_m,
            scope,
            export_lp: lp_path,
            output,
        } => {
            let s = load(&source)?;
            let iwv = interval(&text, &s)?;
            let config = SynthesisConfig {
                time_limit: time_limit.map(Duration::from_secs_f64),
                big_m,
                scope: scope.into(),
                ..SynthesisConfig::default()
            };
            let result = synthesize(&s.model, &s.property, &iwv, &config)?;
            if let Some(path) = lp_path {
                let enc = encode_with_scope(&s.model, &s.property, &result.bounds, result.big_m, result.scope)?;
                write_file(&path, &export_lp(&enc.milp))?;
            }
            let doc = synthesis_document(&s, &result)?;
            match output {
                Some(path) => write_file(&path, &serde_json::to_string_pretty(&doc).expect("json serializes")),
                None => emit(out, doc),
            }
        }
        Command::Elicit { method, data, payload } => {
            let payloads: Vec<Elicitation> = match (method, data, payload) {
                (Some(m), Some(d), None) => {
                    let data: Value = serde_json::from_str(&d).map_err(|e| Failure::Usage(format!("--data: {e}")))?;
                    let p = serde_json::from_value(json!({"method": m, "data": data}))
                        .map_err(|e| Failure::Domain(format!("invalid payload: {e}")))?;
                    vec![p]
                }
                (None, None, Some(path)) => {
                    let v: Value = serde_json::from_str(&read(&path)?)
                        .map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?;
                    let list = if v.is_array() { v } else { Value::Array(vec![v]) };
                    serde_json::from_value(list).map_err(|e| Failure::Domain(format!("invalid payload: {e}")))?
                }
                _ => return Err(Failure::Usage("give --method with --data, or --payload".into())),
            };
            let results = payloads.iter().map(Elicitation::weights).collect::<prefsynth_core::Result<Vec<_>>>()?;
            if results.len() == 1 {
                return emit(out, serde_json::to_value(&results[0]).expect("json serializes"));
            }
            let ws: Vec<WeightVector> = results.iter().map(|r| r.weights.clone()).collect();
            let iwv = aggregate_to_interval(&ws)?;
            emit(out, json!({"results": results, "interval": iwv}))
        }
        Command::Grid { source, output } => {
            let s = load(&source)?;
            let doc = model_to_json(&s.model);
            match output {
                Some(path) => write_file(&path, &doc),
                None => {
                    let v: ModelDoc = serde_json::from_str(&doc).expect("model document");
                    emit(out, serde_json::to_value(v).expect("json serializes"))
                }
            }
        }
        Command::ExportLp {
            source,
            interval: text,
            big_m,
            scope,
            output,
        } => {
            let s = load(&source)?;
            let iwv = interval(&text, &s)?;
            let bounds = compute_bounds(&s.model, &s.property, &iwv)?;
            let c = match big_m {
                Some(c) => c,
                None => BigM::compute(&s.model, &s.property)?.constant(),
            };
            let enc = encode_with_scope(&s.model, &s.property, &bounds, c, scope.into())?;
            let lp = export_lp(&enc.milp);
            match output {
                Some(path) => write_file(&path, &lp),
                None => out.write_all(lp.as_bytes()).map_err(|e| Failure::Domain(e.to_string())),
            }
        }
        Command::Serve {
            port,
            data_dir,
            static_dir,
            concurrency,
            capacity,
        } => serve(port, &data_dir, static_dir, concurrency, capacity, out),
    }
}

fn serve(
    port: u16,
    data_dir: &Path,
    static_dir: Option<PathBuf>,
    concurrency: usize,
    capacity: usize,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Domain(e.to_string()))?;
    runtime.block_on(async {
        let jobs = JobRegistry::open(Some(data_dir), concurrency, capacity).map_err(|e| io_failure(data_dir, e))?;
        let resumed = jobs.resume().map_err(|e| io_failure(data_dir, e))?;
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
            .await
            .map_err(|e| Failure::Domain(format!("port {port}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| Failure::Domain(e.to_string()))?;
        let _ = writeln!(out, "listening on http://{addr} (data dir {}, {resumed} job(s) resumed)", data_dir.display());
        let _ = out.flush();
        axum::serve(listener, crate::api::router(jobs, static_dir))
            .await
            .map_err(|e| Failure::Domain(e.to_string()))
    })
}

/// Runs the command line; returns 0 on success, 1 on domain errors and 2
/// on usage errors.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {}", m.replace('\n', " "));
            2
        }
        Err(Failure::Domain(m)) => {
            let _ = writeln!(err, "error: {}", m.replace('\n', " "));
            1
        }
    }
}
