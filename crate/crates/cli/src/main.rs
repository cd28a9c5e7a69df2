//! `spreadopt` command-line front end.
//!
//! Every subcommand accepts `--config <file.json>`, a flat JSON object whose
//! keys are the long flag names in snake_case. Flags given on the command
//! line override the file.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::{json, Map, Value};
use spreadopt::io::{load_sequences, write_sequences, ModelFile};
use spreadopt::model::{validate_model, ModelBundle, SpreadingSequence};
use spreadopt::optimizer::{
    kkt_multipliers, solve_multistart, DecisionVector, KktCertificate, ProblemInstance, SolverOptions,
};
use spreadopt::sequences::{
    chebyshev_family, gold_family_preset, random_family, ChipMap, FamilyKind, SequenceFamily, GOLD_PRESETS,
};
use spreadopt::sim::{estimate_snr, run_trials, summarize, write_trials, SimConfig};
use spreadopt::snr::{snr_lower_bound, SnrReport, WeightMatrix};
use spreadopt::Error;

/// Certificates at or below this residual count as stationary.
const KKT_TOLERANCE: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "spreadopt", version, about = "Spreading sequence design for multipath CDMA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sequence family.
    Gen(GenArgs),
    /// Evaluate the SNR lower bound for a model and sequence set.
    Eval(EvalArgs),
    /// Optimize sequences for a model.
    Optimize(OptimizeArgs),
    /// Monte Carlo estimate of the correlator SNR.
    Simulate(SimulateArgs),
    /// Check first-order optimality of a sequence set.
    KktCheck(KktArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// gold5, gold6, gold7, random-binary, random-phase or chebyshev.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    users: Option<usize>,
    /// Sequence length; implied by Gold presets.
    #[arg(long)]
    chips: Option<usize>,
    /// Chebyshev map degree.
    #[arg(long)]
    degree: Option<u32>,
    /// Chebyshev chip map: sign or phase.
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    sequences: Option<PathBuf>,
    /// JSON report; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    step_init: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    kkt: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    sequences: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Samples per chip.
    #[arg(long)]
    nu: Option<usize>,
    #[arg(long)]
    reference_user: Option<usize>,
    /// Also report the analytic bound and the gap in standard errors.
    #[arg(long)]
    compare_bound: bool,
    /// Per-trial correlator components as CSV.
    #[arg(long)]
    trials_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KktArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    sequences: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::LineSearchStall { .. } | Error::DegenerateAlpha { .. } | Error::DegenerateOrbit { .. } => {
                Failure::Numerical(e.to_string())
            }
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

/// Settings from `--config`, consulted for any flag left unset.
struct Config(Map<String, Value>);

impl Config {
    fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self(Map::new()));
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
        match serde_json::from_str(&text)? {
            Value::Object(map) => Ok(Self(map)),
            _ => Err(Failure::Invalid(format!("{}: expected a JSON object", path.display()))),
        }
    }

    fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Failure> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| Failure::Invalid(format!("config key `{key}`: {e}"))),
        }
    }

    fn require<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<T, Failure> {
        self.pick(flag, key)?
            .ok_or_else(|| Failure::Invalid(format!("--{} is required", key.replace('_', "-"))))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn emit_json(value: &impl serde::Serialize, out: Option<&Path>) -> CmdResult {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => writeln!(create(p)?, "{text}")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn load_bundle(model: &Path, sequences: &Path) -> Result<ModelBundle, Failure> {
    let file = ModelFile::load(model)?;
    let seqs = load_sequences(sequences)?;
    Ok(validate_model(file.system_model()?, file.channels()?, seqs)?)
}

fn gen(a: GenArgs) -> CmdResult {
    let cfg = Config::load(a.config.as_deref())?;
    let family: String = cfg.require(a.family, "family")?;
    let out: PathBuf = cfg.require(a.out, "out")?;
    let users: Option<usize> = cfg.pick(a.users, "users")?;
    let seed: Option<u64> = cfg.pick(a.seed, "seed")?;
    let stochastic = |seed: Option<u64>| seed.ok_or_else(|| Failure::Invalid(format!("--seed is required for family `{family}`")));

    let fam: SequenceFamily = if GOLD_PRESETS.iter().any(|p| p.0 == family) {
        let full = gold_family_preset(&family)?;
        if let Some(n) = cfg.pick(a.chips, "chips")? {
            if n != full.n_chips {
                return Err(Failure::Invalid(format!("{family} has length {}, not {n}", full.n_chips)));
            }
        }
        full
    } else {
        let chips: usize = cfg.require(a.chips, "chips")?;
        let count = users.ok_or_else(|| Failure::Invalid("--users is required".into()))?;
        match family.as_str() {
            "random-binary" => random_family(FamilyKind::RandomBinary, count, chips, stochastic(seed)?)?,
            "random-phase" => random_family(FamilyKind::RandomPhase, count, chips, stochastic(seed)?)?,
            "chebyshev" => {
                let degree: u32 = cfg.pick(a.degree, "degree")?.unwrap_or(2);
                let map = match cfg.pick(a.map, "map")?.as_deref().unwrap_or("sign") {
                    "sign" => ChipMap::Sign,
                    "phase" => ChipMap::Phase,
                    other => return Err(Failure::Invalid(format!("unknown chip map `{other}`"))),
                };
                chebyshev_family(degree, count, chips, stochastic(seed)?, map)?
            }
            other => {
                let presets: Vec<&str> = GOLD_PRESETS.iter().map(|p| p.0).collect();
                return Err(Failure::Invalid(format!(
                    "unknown family `{other}`; expected one of {}, random-binary, random-phase, chebyshev",
                    presets.join(", ")
                )));
            }
        }
    };

    let available = fam.members.len();
    let take = users.unwrap_or(available);
    if take == 0 || take > available {
        return Err(Failure::Invalid(format!("family has {available} members, asked for {take}")));
    }
    let members: Vec<SpreadingSequence> = fam.members[..take]
        .iter()
        .enumerate()
        .map(|(u, s)| SpreadingSequence::new(u, s.chips().to_vec()))
        .collect::<Result<_, _>>()?;
    let mut w = create(&out)?;
    write_sequences(&mut w, &members)?;
    w.flush()?;

    let sidecar = json!({
        "family": family,
        "kind": fam.kind,
        "n_chips": fam.n_chips,
        "n_users": take,
        "seed": seed,
        "generator": format!("spreadopt {}", env!("CARGO_PKG_VERSION")),
    });
    let mut side = out.clone().into_os_string();
    side.push(".json");
    emit_json(&sidecar, Some(Path::new(&side)))
}

fn eval(a: EvalArgs) -> CmdResult {
    let cfg = Config::load(a.config.as_deref())?;
    let model: PathBuf = cfg.require(a.model, "model")?;
    let seqs: PathBuf = cfg.require(a.sequences, "sequences")?;
    let bundle = load_bundle(&model, &seqs)?;
    let report = snr_lower_bound(&bundle)?;
    if let Some(csv) = cfg.pick(a.csv, "csv")? {
        let mut w = create(&csv)?;
        writeln!(w, "{}", SnrReport::CSV_HEADER)?;
        for row in report.csv_rows() {
            writeln!(w, "{row}")?;
        }
    }
    emit_json(&report, cfg.pick(a.out, "out")?.as_deref())
}

fn check_certificate(cert: &KktCertificate) -> CmdResult {
    if cert.passes(KKT_TOLERANCE) {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "KKT check failed: residual {:.3e}, mu spread {:.3e} (tolerance {KKT_TOLERANCE:e})",
            cert.stationarity_residual, cert.mu_spread
        )))
    }
}

fn optimize(a: OptimizeArgs) -> CmdResult {
    let cfg = Config::load(a.config.as_deref())?;
    let model_path: PathBuf = cfg.require(a.model, "model")?;
    let file = ModelFile::load(&model_path)?;
    let model = file.system_model()?;
    let channels = file.channels()?;
    let defaults = SolverOptions::default();
    let opts = SolverOptions {
        seed: cfg.require(a.seed, "seed")?,
        restarts: cfg.pick(a.restarts, "restarts")?.unwrap_or(defaults.restarts),
        tol: cfg.pick(a.tol, "tol")?.unwrap_or(defaults.tol),
        max_iters: cfg.pick(a.max_iters, "max_iters")?.unwrap_or(defaults.max_iters),
        step_init: cfg.pick(a.step_init, "step_init")?.unwrap_or(defaults.step_init),
    };
    if opts.restarts == 0 {
        return Err(Failure::Invalid("--restarts must be at least 1".into()));
    }
    let inst = ProblemInstance::from_weights(WeightMatrix::new(&model, &channels), model)?;
    let result = solve_multistart(&inst, &opts)?;
    let best = &result.best;

    if let Some(path) = cfg.pick(a.out, "out")? {
        let seqs: Vec<SpreadingSequence> = best
            .x
            .sequences()
            .into_iter()
            .enumerate()
            .map(|(u, chips)| SpreadingSequence::normalized(u, chips))
            .collect::<Result<_, _>>()?;
        let mut w = create(&path)?;
        write_sequences(&mut w, &seqs)?;
    }
    if let Some(path) = cfg.pick(a.trace, "trace")? {
        best.write_trace(create(&path)?)?;
    }
    let cert = kkt_multipliers(&best.x, &inst)?;
    if let Some(path) = cfg.pick(a.kkt, "kkt")? {
        emit_json(&cert, Some(&path))?;
    }
    emit_json(
        &json!({
            "objective": best.objective,
            "iterations": best.iterations,
            "converged": best.converged(),
            "best_restart": result.best_restart,
            "restart_objectives": result.objectives,
            "stationarity_residual": cert.stationarity_residual,
            "mu_spread": cert.mu_spread,
        }),
        None,
    )?;
    check_certificate(&cert)
}

fn simulate(a: SimulateArgs) -> CmdResult {
    let cfg = Config::load(a.config.as_deref())?;
    let model: PathBuf = cfg.require(a.model, "model")?;
    let seqs: PathBuf = cfg.require(a.sequences, "sequences")?;
    let bundle = load_bundle(&model, &seqs)?;
    let defaults = SimConfig::default();
    let sim = SimConfig {
        seed: cfg.require(a.seed, "seed")?,
        trials: cfg.pick(a.trials, "trials")?.unwrap_or(defaults.trials),
        nu: cfg.pick(a.nu, "nu")?.unwrap_or(defaults.nu),
        reference_user: cfg.pick(a.reference_user, "reference_user")?.unwrap_or(defaults.reference_user),
    };
    let trials_out: Option<PathBuf> = cfg.pick(a.trials_out, "trials_out")?;
    let estimate = match &trials_out {
        Some(path) => {
            let trials = run_trials(&bundle, &sim)?;
            write_trials(create(path)?, &trials)?;
            summarize(&trials, &sim)?
        }
        None => estimate_snr(&bundle, &sim)?,
    };
    let mut out = serde_json::to_value(estimate)?;
    let compare = a.compare_bound || cfg.pick(None, "compare_bound")?.unwrap_or(false);
    if compare {
        let bound = snr_lower_bound(&bundle)?.per_user_bound[sim.reference_user];
        out["bound"] = json!(bound);
        out["gap_in_se"] = json!((estimate.snr_hat - bound) / estimate.se);
    }
    emit_json(&out, cfg.pick(a.out, "out")?.as_deref())
}

fn kkt_check(a: KktArgs) -> CmdResult {
    let cfg = Config::load(a.config.as_deref())?;
    let model: PathBuf = cfg.require(a.model, "model")?;
    let seqs: PathBuf = cfg.require(a.sequences, "sequences")?;
    let bundle = load_bundle(&model, &seqs)?;
    let inst = ProblemInstance::from_weights(WeightMatrix::new(&bundle.model, &bundle.channels), bundle.model)?;
    let x = DecisionVector::from_sequences(&bundle.sequences)?;
    let cert = kkt_multipliers(&x, &inst)?;
    emit_json(&cert, cfg.pick(a.out, "out")?.as_deref())?;
    check_certificate(&cert)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Eval(a) => eval(a),
        Command::Optimize(a) => optimize(a),
        Command::Simulate(a) => simulate(a),
        Command::KktCheck(a) => kkt_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
