//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when a solver run
//! hit its iteration budget (results are still written). Every command
//! writes `manifest.json` next to its outputs; `replay` reruns a manifest.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{evaluate_trials, generate_planted, EvalSpec, PChoice, PlantedSpec, DEFAULT_P_GRID};
use crate::io::{
    format_f64, ranking_csv, read_dense_csv, read_libsvm, to_json_bytes, write_atomic, write_dense_csv, ResultRecord,
};
use crate::problem::{normalize, Dataset};
use crate::solver::{run, FeatureRanking, SolverConfig, SolverState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "l2p-select",
    version,
    about = "Feature selection by l2,p row-sparsity minimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rank features and select the top d.
    Select(SelectArgs),
    /// Run selection once per p and summarize.
    SweepP(SweepArgs),
    /// Write a planted-support dataset and its informative features.
    Synth(SynthArgs),
    /// Repeated split / select / classify trials.
    Eval(EvalArgs),
    /// Rerun the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Libsvm,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// First CSV line is a header.
    #[arg(long)]
    header: bool,
    /// 1-based label column of a CSV file; defaults to the last column.
    #[arg(long)]
    label_col: Option<usize>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct SolverArgs {
    /// Number of features to select.
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Relative objective change that counts as converged.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    weight_floor: f64,
}

impl SolverArgs {
    fn config(&self, p: f64) -> SolverConfig {
        SolverConfig {
            p,
            max_outer_iterations: self.max_iters,
            relative_objective_tolerance: self.tol,
            weight_floor: self.weight_floor,
            feature_count_d: self.d,
        }
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Recorded in the manifest; selection itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip standardizing the features.
    #[arg(long)]
    no_normalize: bool,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated p values.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_P_GRID)]
    p_grid: Vec<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_normalize: bool,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 40)]
    samples: usize,
    #[arg(long, default_value_t = 60)]
    features: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    /// Number of informative features, placed at seeded random columns.
    #[arg(long, default_value_t = 5)]
    informative: usize,
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct EvalArgs {
    #[command(flatten)]
    input: InputArgs,
    /// A value in (0, 2], or "cv" to cross-validate over --p-grid.
    #[arg(long, default_value = "1", value_parser = parse_p_choice)]
    p: String,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_P_GRID)]
    p_grid: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    folds: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0.6)]
    train_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    ridge: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    /// truth.json written by `synth`; adds precision at d to the report.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Clone, Debug)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_p_choice(s: &str) -> std::result::Result<String, String> {
    if s == "cv" {
        return Ok(s.into());
    }
    s.parse::<f64>()
        .map(|_| s.to_string())
        .map_err(|_| format!("expected a number or \"cv\", got {s:?}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything that determines a run's outputs besides the input bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TruthFile {
    /// 1-based.
    informative: Vec<usize>,
    spec: PlantedSpec,
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn digest(path: &Path) -> Result<InputDigest> {
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(path)?,
    })
}

/// Runs the command line and returns the process exit code. Messages go to
/// stderr, short summaries to stdout.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Select(a) => cmd_select(&a),
        Command::SweepP(a) => cmd_sweep(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Replay(a) => cmd_replay(&a),
    }
}

fn load(input: &InputArgs) -> Result<Dataset> {
    match input.format {
        Format::Csv => {
            let label = match input.label_col {
                Some(0) => return Err(Error::InvalidConfig("--label-col is 1-based".into())),
                Some(k) => Some(k - 1),
                None => None,
            };
            read_dense_csv(&input.input, input.header, label)
        }
        Format::Libsvm => {
            if input.label_col.is_some() || input.header {
                return Err(Error::InvalidConfig(
                    "--label-col and --header apply to CSV input only".into(),
                ));
            }
            read_libsvm(&input.input)
        }
    }
}

fn prepare_out(out: &Path) -> Result<()> {
    if out.as_os_str().is_empty() {
        return Err(Error::InvalidConfig("--out is required".into()));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write_manifest<A: Serialize>(
    out: &Path,
    command: &str,
    seed: u64,
    args: &A,
    inputs: &[&Path],
    mut outputs: Vec<String>,
) -> Result<()> {
    outputs.sort();
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed,
        parameters: serde_json::to_value(args)?,
        inputs: inputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
        outputs,
    };
    write_atomic(out.join("manifest.json"), &to_json_bytes(&manifest)?)
}

fn cmd_select(a: &SelectArgs) -> Result<i32> {
    let config = a.solver.config(a.p);
    let mut data = load(&a.input)?;
    config.validate(data.feature_count())?;
    if !a.no_normalize {
        data = normalize(&data)?;
    }
    prepare_out(&a.out)?;
    let (state, ranking) = run(&data, &config)?;
    let record = ResultRecord::from_run(&config, &state, &ranking);
    write_atomic(a.out.join("result.json"), &to_json_bytes(&record)?)?;
    write_atomic(a.out.join("ranking.csv"), ranking_csv(&record).as_bytes())?;
    write_manifest(
        &a.out,
        "select",
        a.seed,
        a,
        &[&a.input.input],
        vec!["result.json".into(), "ranking.csv".into()],
    )?;
    let selected: Vec<String> = record.selected.iter().map(usize::to_string).collect();
    println!("selected: {}", selected.join(","));
    if state.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "warning: no convergence within {} iterations; results written",
            config.max_outer_iterations
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn p_file_name(p: f64) -> String {
    format!("p-{p}.json")
}

fn cmd_sweep(a: &SweepArgs) -> Result<i32> {
    if a.p_grid.is_empty() {
        return Err(Error::InvalidConfig("--p-grid is empty".into()));
    }
    let base = a.solver.config(a.p_grid[0]);
    let mut data = load(&a.input)?;
    for &p in &a.p_grid {
        a.solver.config(p).validate(data.feature_count())?;
    }
    if !a.no_normalize {
        data = normalize(&data)?;
    }
    prepare_out(&a.out)?;

    let mut summary = String::from("p,objective,support_size,iterations,converged,status\n");
    let mut outputs = vec!["summary.csv".to_string()];
    let mut code = EXIT_OK;
    // Runs are independent so a failure is recorded without losing the others.
    let outcomes: Vec<Result<(SolverState, FeatureRanking)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = a
            .p_grid
            .iter()
            .map(|&p| {
                let config = SolverConfig { p, ..base.clone() };
                let data = &data;
                scope.spawn(move || run(data, &config))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });
    for (&p, outcome) in a.p_grid.iter().zip(outcomes) {
        match outcome {
            Ok((state, ranking)) => {
                let config = SolverConfig { p, ..base.clone() };
                let record = ResultRecord::from_run(&config, &state, &ranking);
                let name = p_file_name(p);
                write_atomic(a.out.join(&name), &to_json_bytes(&record)?)?;
                outputs.push(name);
                summary.push_str(&format!(
                    "{p},{},{},{},{},ok\n",
                    format_f64(state.objective()),
                    ranking.support_size(),
                    state.iteration,
                    state.converged
                ));
                if !state.converged && code == EXIT_OK {
                    code = EXIT_NOT_CONVERGED;
                }
            }
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], ";");
                summary.push_str(&format!("{p},,,,,error: {msg}\n"));
                eprintln!("error: {e}");
                code = EXIT_INPUT;
            }
        }
    }
    write_atomic(a.out.join("summary.csv"), summary.as_bytes())?;
    write_manifest(&a.out, "sweep-p", a.seed, a, &[&a.input.input], outputs)?;
    print!("{summary}");
    Ok(code)
}

fn cmd_synth(a: &SynthArgs) -> Result<i32> {
    let spec = PlantedSpec::with_random_support(
        a.samples,
        a.features,
        a.classes,
        a.informative,
        a.separation,
        a.noise,
        a.seed,
    )?;
    let (data, truth) = generate_planted(&spec)?;
    prepare_out(&a.out)?;
    write_dense_csv(a.out.join("data.csv"), &data, false)?;
    let truth_file = TruthFile {
        informative: truth.iter().map(|j| j + 1).collect(),
        spec,
    };
    write_atomic(a.out.join("truth.json"), &to_json_bytes(&truth_file)?)?;
    write_manifest(
        &a.out,
        "synth",
        a.seed,
        a,
        &[],
        vec!["data.csv".into(), "truth.json".into()],
    )?;
    println!(
        "wrote {}×{} dataset with {} informative features",
        a.samples,
        a.features,
        truth.len()
    );
    Ok(EXIT_OK)
}

fn cmd_eval(a: &EvalArgs) -> Result<i32> {
    let choice = if a.p == "cv" {
        PChoice::CrossValidated {
            grid: a.p_grid.clone(),
            folds: a.folds,
        }
    } else {
        PChoice::Fixed(
            a.p.parse()
                .map_err(|_| Error::InvalidConfig(format!("bad --p {:?}", a.p)))?,
        )
    };
    let data = load(&a.input)?;
    let probe = match &choice {
        PChoice::Fixed(p) => vec![*p],
        PChoice::CrossValidated { grid, .. } => grid.clone(),
    };
    if probe.is_empty() {
        return Err(Error::InvalidConfig("--p-grid is empty".into()));
    }
    for &p in &probe {
        a.solver.config(p).validate(data.feature_count())?;
    }
    let truth = match &a.truth {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let file: TruthFile = serde_json::from_str(&text)?;
            if file.informative.iter().any(|&j| j == 0 || j > data.feature_count()) {
                return Err(Error::InvalidConfig(
                    "truth file names features outside the dataset".into(),
                ));
            }
            Some(file.informative.iter().map(|j| j - 1).collect::<Vec<_>>())
        }
        None => None,
    };
    prepare_out(&a.out)?;
    let spec = EvalSpec {
        choice,
        train_fraction: a.train_fraction,
        trials: a.trials,
        seed: a.seed,
        ridge: a.ridge,
    };
    let report = evaluate_trials(&data, &spec, &a.solver.config(probe[0]), truth.as_deref())?;
    write_atomic(a.out.join("eval.json"), &to_json_bytes(&report)?)?;
    let mut inputs: Vec<&Path> = vec![&a.input.input];
    if let Some(t) = &a.truth {
        inputs.push(t);
    }
    write_manifest(&a.out, "eval", a.seed, a, &inputs, vec!["eval.json".into()])?;
    println!(
        "accuracy: {:.4} ± {:.4} over {} trials",
        report.mean_accuracy,
        report.std_accuracy,
        report.trials.len()
    );
    if let Some(p) = report.mean_precision_at_d {
        println!("precision at d: {p:.4}");
    }
    if report.trials.iter().all(|t| t.converged) {
        Ok(EXIT_OK)
    } else {
        eprintln!("warning: some trials hit the iteration budget; results written");
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn cmd_replay(a: &ReplayArgs) -> Result<i32> {
    let text = fs::read_to_string(&a.manifest).map_err(|e| Error::io(&a.manifest, e))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    if manifest.version != env!("CARGO_PKG_VERSION") {
        return Err(Error::InvalidConfig(format!(
            "manifest was written by version {}, this is {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        )));
    }
    for input in &manifest.inputs {
        let now = sha256_hex(Path::new(&input.path))?;
        if now != input.sha256 {
            return Err(Error::InvalidConfig(format!(
                "{} changed since the manifest was written",
                input.path
            )));
        }
    }
    let params = manifest.parameters;
    let out = a.out.clone();
    let command = match manifest.command.as_str() {
        "select" => Command::Select(SelectArgs {
            out,
            ..serde_json::from_value(params)?
        }),
        "sweep-p" => Command::SweepP(SweepArgs {
            out,
            ..serde_json::from_value(params)?
        }),
        "synth" => Command::Synth(SynthArgs {
            out,
            ..serde_json::from_value(params)?
        }),
        "eval" => Command::Eval(EvalArgs {
            out,
            ..serde_json::from_value(params)?
        }),
        other => return Err(Error::InvalidConfig(format!("unknown command {other:?} in manifest"))),
    };
    dispatch(command)
}
