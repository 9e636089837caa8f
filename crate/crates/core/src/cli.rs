//! Batch front end: one config file, one command, files out.
//!
//! Exit codes: 0 success, 1 failed validation or runtime error, 2 bad config.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::dicke::{align_squeezing, css, oat_state, oat_twist, optimal_oat, SymmetricSpinState};
use crate::io::{unix_time, write_json, Cell, Manifest, Table};
use crate::oracle::{self, equivalence_sweep, measure, params_for_angles, simulate, SequenceOptions, ORACLE_CAP};
use crate::par::Exec;
use crate::params::{derive, validate, PhysicalParams};
use crate::phasebook::ledger;
use crate::sensitivity::{fringe_scan, linspace, robustness_with, scaling_study, StateKind, ROBUSTNESS_GRID};
use crate::{Error, Result};

/// Agreement required between analytic and oracle moments.
pub const VALIDATION_TOL: f64 = 1e-10;
pub const DEFAULT_DRAWS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Derive,
    Fringe,
    Scaling,
    Validate,
    Robustness,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Derive => "derive",
            Command::Fringe => "fringe",
            Command::Scaling => "scaling",
            Command::Validate => "validate",
            Command::Robustness => "robustness",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gravimeter", version, about = "Lattice gravimeter phase, fringe and sensitivity calculations")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub command: Command,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for randomized validation draws.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub kind: StateKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub mu: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringeSpec {
    pub phi_start: f64,
    pub phi_stop: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    /// Defaults to the state block's kind, else `css`.
    pub kind: Option<StateKind>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessSpec {
    /// Dislocation energies, J.
    pub delta_list: Vec<f64>,
    pub grid_points: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSpec {
    pub draws: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: Map<String, Value>,
    pub state: Option<StateSpec>,
    pub fringe: Option<FringeSpec>,
    pub scaling: Option<ScalingSpec>,
    pub robustness: Option<RobustnessSpec>,
    pub validate: Option<ValidateSpec>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn physical(&self) -> Result<PhysicalParams> {
        PhysicalParams::from_map(&self.params)
    }

    fn state_spec(&self) -> Result<&StateSpec> {
        self.state.as_ref().ok_or_else(|| Error::MissingKey("state".into()))
    }
}

fn block<'a, T>(b: &'a Option<T>, name: &str) -> Result<&'a T> {
    b.as_ref().ok_or_else(|| Error::MissingKey(name.into()))
}

/// Builds the input state a config describes. A squeezed state without `mu`
/// uses the optimal twist; without `beta` it uses the optimal alignment.
pub fn build_state(spec: &StateSpec) -> Result<SymmetricSpinState> {
    if spec.n == 0 {
        return Err(Error::InvalidParam { name: "state.N", reason: "must be >= 1".into() });
    }
    match spec.kind {
        StateKind::Css => {
            if spec.mu.is_some() || spec.beta.is_some() {
                return Err(Error::Config("`mu` and `beta` only apply to kind \"sss\"".into()));
            }
            css(spec.n)
        }
        StateKind::Sss => {
            let mu = match spec.mu {
                Some(mu) => mu,
                None => optimal_oat(spec.n)?.mu,
            };
            let beta = match spec.beta {
                Some(beta) => beta,
                None => align_squeezing(&oat_twist(&css(spec.n)?, mu)).beta,
            };
            oat_state(spec.n, mu, beta)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
}

fn table_from_rows<const W: usize>(header: [&str; W], rows: impl IntoIterator<Item = [Cell; W]>) -> Table {
    let mut t = Table::new(&header);
    for row in rows {
        t.push(row.to_vec());
    }
    t
}

/// Runs `command` with a parsed config, writing into `out_dir`.
pub fn execute(config: &RunConfig, command: Command, out_dir: &Path, seed: u64) -> Result<Outcome> {
    let started = unix_time();
    let p = config.physical()?;
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut passed = true;
    let mut emit = |name: &str| -> PathBuf {
        let path = out_dir.join(name);
        files.push(path.clone());
        path
    };

    match command {
        Command::Derive => {
            let warnings: Vec<String> = validate(&p)?.iter().map(ToString::to_string).collect();
            let doc = json!({
                "params": p,
                "derived": derive(&p)?,
                "ledger": ledger(&p)?,
                "warnings": warnings,
            });
            write_json(&emit("derive.json"), &doc)?;
        }
        Command::Fringe => {
            let spec = block(&config.fringe, "fringe")?;
            if spec.points == 0 {
                return Err(Error::InvalidParam { name: "fringe.points", reason: "must be >= 1".into() });
            }
            let state = build_state(config.state_spec()?)?;
            let rows = fringe_scan(&p, &state, &linspace(spec.phi_start, spec.phi_stop, spec.points))?;
            table_from_rows(
                ["phi", "mean", "lo", "hi"],
                rows.iter().map(|r| [r.phi.into(), r.mean.into(), r.lo.into(), r.hi.into()]),
            )
            .write(&emit("fringe.csv"))?;
        }
        Command::Scaling => {
            let spec = block(&config.scaling, "scaling")?;
            let kind = spec.kind.or(config.state.as_ref().map(|s| s.kind)).unwrap_or(StateKind::Css);
            let study = scaling_study(&p, &spec.n_list, kind)?;
            table_from_rows(["N", "dg_over_g"], study.points.iter().map(|q| [q.n.into(), q.dg_over_g.into()]))
                .write(&emit("scaling.csv"))?;
            write_json(&emit("scaling_fit.json"), &study)?;
        }
        Command::Validate => {
            let spec = config.state_spec()?;
            if spec.n > ORACLE_CAP {
                return Err(Error::ParticleCap { n: spec.n, cap: ORACLE_CAP, hint: "; validate with N <= 8" });
            }
            let state = build_state(spec)?;
            let draws = config.validate.as_ref().and_then(|v| v.draws).unwrap_or(DEFAULT_DRAWS);
            let report = validation_report(&p, &state, draws, seed)?;
            passed = report["passed"].as_bool().unwrap_or(false);
            write_json(&emit("validate.json"), &report)?;
        }
        Command::Robustness => {
            let spec = block(&config.robustness, "robustness")?;
            let state = build_state(config.state_spec()?)?;
            if state.n_particles() > ORACLE_CAP {
                return Err(Error::ParticleCap {
                    n: state.n_particles(),
                    cap: ORACLE_CAP,
                    hint: "; robustness runs the oracle, use N <= 8",
                });
            }
            let grid = spec.grid_points.unwrap_or(ROBUSTNESS_GRID);
            let rows = robustness_with(&p, &state, &spec.delta_list, grid, Exec::default())?;
            table_from_rows(
                ["delta", "shift", "visibility"],
                rows.iter().map(|r| [r.delta.into(), r.shift.into(), r.visibility.into()]),
            )
            .write(&emit("robustness.csv"))?;
        }
    }

    let manifest_path = out_dir.join("manifest.json");
    let outputs = files.iter().filter_map(|f| f.file_name()).map(|f| f.to_string_lossy().into_owned()).collect();
    let manifest = Manifest {
        tool: "gravimeter".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.name().into(),
        seed,
        params: serde_json::to_value(p)?,
        state: config.state.as_ref().map(serde_json::to_value).transpose()?,
        outputs,
        started_unix: started,
        finished_unix: unix_time(),
    };
    write_json(&manifest_path, &manifest)?;
    files.push(manifest_path);
    Ok(Outcome { files, passed })
}

/// Configured state over random (ξ, φ) targets, plus random states at the
/// same N, each compared field by field with the Fock oracle.
fn validation_report(p: &PhysicalParams, state: &SymmetricSpinState, draws: usize, seed: u64) -> Result<Value> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let targets: Vec<(f64, f64)> = (0..draws)
        .map(|_| {
            let pi = std::f64::consts::PI;
            (rng.random_range(-pi..pi), rng.random_range(-pi..pi))
        })
        .collect();
    let opt = SequenceOptions::default();
    let deviations = crate::par::try_map(Exec::default(), &targets, |&(xi, phi)| -> Result<Vec<f64>> {
        let q = params_for_angles(p, xi, phi)?;
        let fock = measure(&simulate(&q, state, &opt)?);
        let analytic = oracle::analytic_moments(&q, state, &opt)?;
        Ok(fock.fields().iter().zip(analytic.fields()).map(|((_, a), (_, b))| (a - b).abs()).collect())
    })?;
    let names = crate::analytic::css_moments(1, 0.0, 0.0).fields().map(|(n, _)| n);
    let mut per_field = Map::new();
    let mut worst: f64 = 0.0;
    for (k, name) in names.iter().enumerate() {
        let m = deviations.iter().map(|d| d[k]).fold(0.0, f64::max);
        worst = worst.max(m);
        per_field.insert(name.to_string(), json!(m));
    }
    let sweep = equivalence_sweep(p, &[state.n_particles()], draws, seed, VALIDATION_TOL, Exec::default())?;
    let configured_pass = worst <= VALIDATION_TOL;
    let passed = configured_pass && sweep.iter().all(|r| r.passed);
    Ok(json!({
        "n_particles": state.n_particles(),
        "draws": draws,
        "tolerance": VALIDATION_TOL,
        "configured_state": {
            "max_abs_deviation": per_field,
            "max_deviation": worst,
            "passed": configured_pass,
        },
        "random_states": sweep,
        "passed": passed,
    }))
}

/// Parses the config file and runs the command.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let text = fs::read_to_string(&cli.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", cli.config.display())))?;
    let config = RunConfig::from_json_str(&text)?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| Error::MissingKey("output_dir (or --out)".into()))?;
    execute(&config, cli.command, &out_dir, cli.seed)
}

/// Process exit code for a finished run.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.passed => 0,
        Ok(_) => 1,
        Err(e) if e.is_config() => 2,
        Err(_) => 1,
    }
}

/// Entry point used by the binary. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = run(&cli);
    match &result {
        Ok(o) => {
            for f in &o.files {
                println!("{}", f.display());
            }
            if !o.passed {
                eprintln!("error: validation failed (tolerance {VALIDATION_TOL:e}); see validate.json");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&result)
}
