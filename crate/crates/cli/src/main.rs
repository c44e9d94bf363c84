use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use treeval::cart::{fit, TreeDocument};
use treeval::exec::{configure_threads, threads_from_env};
use treeval::inference::{all_targets, estimate_sigma, infer_targets, InferenceOptions, Target};
use treeval::oracle::{agreement_report, random_instance, TargetAgreement};
use treeval::sim::{
    coverage_study, null_study, power_study, replicate_rng, write_csv, write_qq, Method, SimConfig,
};
use treeval::{Dataset, Exec, PermutationMode, StoppingRule, Tree};

const FIT_SCHEMA: &str = "treeval.fit/v1";
const TEST_SCHEMA: &str = "treeval.test/v1";
const SIM_SCHEMA: &str = "treeval.simulate/v1";
const ORACLE_SCHEMA: &str = "treeval.oracle/v1";

#[derive(Parser)]
#[command(
    name = "treeval",
    version,
    about = "Selective inference for CART regression trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow and prune a tree on a CSV dataset.
    Fit(FitArgs),
    /// P-values and confidence intervals for splits and regions of a fitted tree.
    Test(TestArgs),
    /// Run a Monte Carlo study.
    Simulate(SimArgs),
    /// Compare conditioning sets with brute-force refits on random instances.
    Oracle(OracleArgs),
}

#[derive(Args, Serialize)]
struct Growth {
    /// Complexity penalty per terminal region.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 3)]
    max_level: usize,
    /// Smallest number of observations allowed in a child.
    #[arg(long, default_value_t = 1)]
    min_node: usize,
    #[arg(long, default_value_t = 0.0)]
    min_gain: f64,
}

impl Growth {
    fn stopping(&self) -> StoppingRule {
        StoppingRule {
            max_level: self.max_level,
            min_node_size: self.min_node,
            min_gain: self.min_gain,
        }
    }
}

#[derive(Args, Serialize)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    #[command(flatten)]
    growth: Growth,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct TestArgs {
    /// Output of `fit`, or a bare tree document.
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Defaults to the response named in the tree.
    #[arg(long)]
    response: Option<String>,
    #[arg(
        long,
        required_unless_present = "estimate_sigma",
        conflicts_with = "estimate_sigma"
    )]
    sigma: Option<f64>,
    /// Use the sample standard deviation of the response as sigma.
    #[arg(long)]
    estimate_sigma: bool,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// identity, full or budget:K
    #[arg(long, default_value = "identity", value_parser = parse_mode)]
    mode: PermutationMode,
    /// Internal region whose children are compared. Repeatable.
    #[arg(long = "split", num_args = 1..)]
    splits: Vec<usize>,
    /// Region whose mean is tested. Repeatable.
    #[arg(long = "region", num_args = 1..)]
    regions: Vec<usize>,
    /// Null value for region means.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    null: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Study {
    Null,
    Power,
    Coverage,
}

#[derive(Args, Serialize)]
struct SimArgs {
    #[arg(value_enum)]
    study: Study,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    p: usize,
    #[arg(long, default_value_t = 5.0)]
    sigma: f64,
    #[arg(long, default_value_t = 200.0)]
    lambda: f64,
    #[arg(long, default_value_t = 3)]
    max_level: usize,
    #[arg(long, default_value_t = 1)]
    min_node: usize,
    #[arg(long, default_value_t = 0.0)]
    min_gain: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Replicates per cell; 1000 for the null study and 300 otherwise.
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
    a_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0])]
    b_grid: Vec<f64>,
    /// Estimate sigma from each simulated response.
    #[arg(long)]
    estimate_sigma: bool,
    /// Directory for study.csv, study.json and Q-Q files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct OracleArgs {
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 30)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    p: usize,
    #[arg(long, default_value_t = 3)]
    max_level: usize,
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// identity or full
    #[arg(long, default_value = "identity", value_parser = parse_mode)]
    mode: PermutationMode,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<PermutationMode, String> {
    s.parse().map_err(|e: treeval::Error| e.to_string())
}

#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    config: Value,
    dataset_checksum: Option<String>,
    seed: Option<u64>,
    version: &'static str,
    timing: Timing,
}

#[derive(Serialize)]
struct Timing {
    seconds: f64,
}

impl RunManifest {
    fn new(
        command: &'static str,
        config: &impl Serialize,
        checksum: Option<String>,
        seed: Option<u64>,
        start: Instant,
    ) -> Result<Self, Failure> {
        Ok(Self {
            command,
            config: serde_json::to_value(config).map_err(runtime)?,
            dataset_checksum: checksum,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            timing: Timing {
                seconds: start.elapsed().as_secs_f64(),
            },
        })
    }
}

enum Failure {
    Input(String),
    Runtime(String),
}

impl From<treeval::Error> for Failure {
    fn from(e: treeval::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    if let Some(k) = threads_from_env()? {
        configure_threads(k)?;
    }
    let exec = Exec::default();
    match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Test(a) => cmd_test(&a, exec),
        Command::Simulate(a) => cmd_simulate(&a, exec),
        Command::Oracle(a) => cmd_oracle(&a, exec),
    }
}

fn emit(out: Option<&Path>, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).map_err(|e| runtime(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(runtime),
    }
}

fn cmd_fit(a: &FitArgs) -> Result<ExitCode, Failure> {
    let start = Instant::now();
    let stopping = a.growth.stopping();
    stopping.validate()?;
    if !(a.growth.lambda >= 0.0) {
        return Err(Failure::Input("--lambda must be non-negative".into()));
    }
    let d = Dataset::load_csv(&a.data, &a.response)?;
    let tree = fit(&d, d.y(), &stopping, a.growth.lambda)?;

    #[derive(Serialize)]
    struct Out {
        schema: &'static str,
        manifest: RunManifest,
        tree: TreeDocument,
    }
    let out = Out {
        schema: FIT_SCHEMA,
        manifest: RunManifest::new("fit", a, Some(d.checksum()?), None, start)?,
        tree: tree.to_document(&d),
    };
    emit(a.out.as_deref(), &out)?;
    Ok(ExitCode::SUCCESS)
}

fn read_tree_document(path: &Path) -> Result<TreeDocument, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| Failure::Input(format!("{}: {e}", path.display()));
    let mut value: Value = serde_json::from_str(&text).map_err(bad)?;
    if value.get("schema").and_then(Value::as_str) == Some(FIT_SCHEMA) {
        value = value
            .get_mut("tree")
            .map(Value::take)
            .ok_or_else(|| Failure::Input(format!("{}: fit output has no tree", path.display())))?;
    }
    serde_json::from_value(value).map_err(bad)
}

fn cmd_test(a: &TestArgs, exec: Exec) -> Result<ExitCode, Failure> {
    let start = Instant::now();
    let doc = read_tree_document(&a.tree)?;
    let response = a.response.clone().unwrap_or_else(|| doc.response.clone());
    let d = Dataset::load_csv(&a.data, &response)?;
    let tree = Tree::from_document(&doc, &d)?;
    let sigma = match a.sigma {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Failure::Input(format!("--sigma must be positive, got {s}"))),
        None => estimate_sigma(d.y())?,
    };
    let mut targets: Vec<Target> = a.splits.iter().copied().map(Target::Split).collect();
    targets.extend(a.regions.iter().copied().map(Target::Region));
    if targets.is_empty() {
        targets = all_targets(&tree);
    }
    let opts = InferenceOptions {
        sigma,
        alpha: a.alpha,
        mode: a.mode,
        null_value: a.null,
        exec,
    };
    let results = infer_targets(&d, &tree, &targets, &opts)?;

    #[derive(Serialize)]
    struct Out {
        schema: &'static str,
        manifest: RunManifest,
        sigma: f64,
        sigma_estimated: bool,
        results: Vec<treeval::inference::InferenceResult>,
    }
    let out = Out {
        schema: TEST_SCHEMA,
        manifest: RunManifest::new("test", a, Some(d.checksum()?), None, start)?,
        sigma,
        sigma_estimated: a.sigma.is_none(),
        results,
    };
    emit(a.out.as_deref(), &out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(a: &SimArgs, exec: Exec) -> Result<ExitCode, Failure> {
    let start = Instant::now();
    let replicates = a.replicates.unwrap_or(match a.study {
        Study::Null => 1000,
        _ => 300,
    });
    let cfg = SimConfig {
        n: a.n,
        p: a.p,
        sigma: a.sigma,
        lambda: a.lambda,
        stopping: StoppingRule {
            max_level: a.max_level,
            min_node_size: a.min_node,
            min_gain: a.min_gain,
        },
        alpha: a.alpha,
        replicates,
        seed: a.seed,
        a_grid: a.a_grid.clone(),
        b_grid: a.b_grid.clone(),
        estimate_sigma: a.estimate_sigma,
    };
    cfg.validate()?;
    if matches!(a.study, Study::Power | Study::Coverage)
        && (cfg.a_grid.is_empty() || cfg.b_grid.is_empty())
    {
        return Err(Failure::Input(
            "--a-grid and --b-grid must be non-empty".into(),
        ));
    }
    fs::create_dir_all(&a.out).map_err(|e| runtime(format!("{}: {e}", a.out.display())))?;
    let csv_path = a.out.join("study.csv");

    let summary = match a.study {
        Study::Null => {
            let (rows, summary) = null_study(&cfg, exec)?;
            write_csv(&csv_path, &rows).map_err(runtime)?;
            for method in [Method::Selective, Method::Naive, Method::SampleSplit] {
                let p: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.method == method)
                    .map(|r| r.p_value)
                    .collect();
                write_qq(&a.out.join(format!("qq_{}.dat", method.name())), &p).map_err(runtime)?;
            }
            serde_json::to_value(summary)
        }
        Study::Power => {
            let (rows, summary) = power_study(&cfg, exec)?;
            write_csv(&csv_path, &rows).map_err(runtime)?;
            serde_json::to_value(summary)
        }
        Study::Coverage => {
            let (rows, summary) = coverage_study(&cfg, exec)?;
            write_csv(&csv_path, &rows).map_err(runtime)?;
            serde_json::to_value(summary)
        }
    }
    .map_err(runtime)?;

    #[derive(Serialize)]
    struct Out<'a> {
        schema: &'static str,
        manifest: RunManifest,
        study: Study,
        config: &'a SimConfig,
        summary: Value,
    }
    let out = Out {
        schema: SIM_SCHEMA,
        manifest: RunManifest::new("simulate", a, None, Some(a.seed), start)?,
        study: a.study,
        config: &cfg,
        summary,
    };
    emit(Some(&a.out.join("study.json")), &out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(a: &OracleArgs, exec: Exec) -> Result<ExitCode, Failure> {
    let start = Instant::now();
    if !(a.sigma > 0.0) || !(a.lambda >= 0.0) {
        return Err(Failure::Input(
            "--sigma must be positive and --lambda non-negative".into(),
        ));
    }
    let stopping = StoppingRule {
        max_level: a.max_level,
        ..StoppingRule::default()
    };

    #[derive(Serialize)]
    struct Instance {
        instance: usize,
        targets: Vec<TargetAgreement>,
    }
    let mut instances = Vec::with_capacity(a.instances);
    for k in 0..a.instances {
        let mut rng = replicate_rng(a.seed, k as u64);
        let d = random_instance(a.n, a.p, &mut rng)?;
        let targets = agreement_report(&d, &stopping, a.lambda, a.sigma, a.mode, exec)?;
        instances.push(Instance {
            instance: k,
            targets,
        });
    }
    let sets: usize = instances.iter().map(|i| i.targets.len()).sum();
    let disagreements = instances
        .iter()
        .flat_map(|i| &i.targets)
        .filter(|t| !t.agreement.agrees())
        .count();

    #[derive(Serialize)]
    struct Out {
        schema: &'static str,
        manifest: RunManifest,
        sets: usize,
        disagreements: usize,
        instances: Vec<Instance>,
    }
    let out = Out {
        schema: ORACLE_SCHEMA,
        manifest: RunManifest::new("oracle", a, None, Some(a.seed), start)?,
        sets,
        disagreements,
        instances,
    };
    emit(a.out.as_deref(), &out)?;
    eprintln!("{sets} conditioning sets checked, {disagreements} disagreements");
    Ok(if disagreements == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
