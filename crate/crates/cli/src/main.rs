use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use barkbeetle::experiment::{run_attack, run_sweep, sweep_csv, Attack, RunOptions, SweepMode, SweepSpec};
use barkbeetle::treegen::{gen_complete, gen_random_with, GenSpec, RandomSpec, DEFAULT_GAP};
use barkbeetle::{functionally_equivalent, grid_mismatches, Error, GlitchModel, Result, Task, VictimTree};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Decision-tree extraction experiments.
#[derive(Parser)]
#[command(name = "barkbeetle", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth tree.
    Gen(GenArgs),
    /// Run an extraction attack against a tree.
    Extract(ExtractArgs),
    /// Query counts over a range of depths or duplicate counts.
    Sweep(SweepArgs),
    /// Compare two trees on random inputs.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Regression,
    Classification,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Regression => Task::Regression,
            TaskArg::Classification => Task::Classification,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Depth of a complete tree.
    #[arg(long, conflicts_with_all = ["leaves", "depth_max"])]
    depth: Option<usize>,
    /// Duplicated features per path (complete trees).
    #[arg(long, default_value_t = 0)]
    dup: usize,
    /// Leaf count of a random tree.
    #[arg(long, requires = "depth_max")]
    leaves: Option<usize>,
    /// Depth cap of a random tree.
    #[arg(long)]
    depth_max: Option<usize>,
    #[arg(long)]
    features: usize,
    #[arg(long, value_enum, default_value = "regression")]
    task: TaskArg,
    /// Minimum distance between nested thresholds.
    #[arg(long, default_value_t = DEFAULT_GAP)]
    gap: f64,
    #[arg(long, env = "BARKBEETLE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackArg {
    Barkbeetle,
    Baseline,
}

#[derive(Clone, Copy, ValueEnum)]
enum GlitchArg {
    Deterministic,
    Probabilistic,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, value_enum, default_value = "barkbeetle")]
    attack: AttackArg,
    #[arg(long, value_enum, default_value = "deterministic")]
    glitch_mode: GlitchArg,
    /// Success probability of one glitch attempt.
    #[arg(long, default_value_t = 1.0)]
    glitch_p: f64,
    #[arg(long, default_value_t = 64)]
    max_attempts: u32,
    /// Glitch model as JSON; overrides the other glitch flags.
    #[arg(long)]
    glitch_config: Option<PathBuf>,
    #[arg(long, env = "BARKBEETLE_SEED", default_value_t = 0)]
    seed: u64,
    /// Random inputs for the equivalence check.
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long)]
    max_queries: Option<u64>,
    /// Report destination; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Where to write the recovered tree.
    #[arg(long)]
    recovered: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Depth,
    Dup,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// First parameter value.
    #[arg(long)]
    from: Option<usize>,
    /// Last parameter value, inclusive.
    #[arg(long)]
    to: Option<usize>,
    /// Tree depth in dup mode.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    features: Option<usize>,
    /// Duplicates per path in depth mode.
    #[arg(long, default_value_t = 0)]
    dups: usize,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, env = "BARKBEETLE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    recovered: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long, env = "BARKBEETLE_SEED", default_value_t = 0)]
    seed: u64,
    /// Also count mismatches on a grid with this step.
    #[arg(long)]
    grid: Option<f64>,
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let tree = match (args.depth, args.leaves) {
        (Some(depth), None) => gen_complete(&GenSpec {
            depth,
            n_features: args.features,
            duplicates_per_path: args.dup,
            task: args.task.into(),
            min_threshold_gap: args.gap,
            seed: args.seed,
        })?,
        (None, Some(leaves)) => gen_random_with(&RandomSpec {
            leaves,
            depth_max: args.depth_max.unwrap_or(leaves.saturating_sub(1)),
            n_features: args.features,
            task: args.task.into(),
            min_threshold_gap: args.gap,
            seed: args.seed,
        })?,
        _ => {
            return Err(Error::Validation {
                field: "gen".into(),
                message: "give either --depth or --leaves with --depth-max".into(),
            })
        }
    };
    write_out(args.output.as_deref(), &tree.to_json())
}

fn extract(args: ExtractArgs) -> Result<()> {
    let truth = VictimTree::load(&args.tree)?;
    let glitch = match &args.glitch_config {
        Some(p) => GlitchModel::from_json(&fs::read_to_string(p)?)?,
        None => match args.glitch_mode {
            GlitchArg::Deterministic => GlitchModel::deterministic(),
            GlitchArg::Probabilistic => {
                GlitchModel::probabilistic(args.glitch_p, args.max_attempts, args.seed)
            }
        },
    };
    let attack = match args.attack {
        AttackArg::Barkbeetle => Attack::Barkbeetle,
        AttackArg::Baseline => Attack::Baseline,
    };
    let opts = RunOptions {
        attack,
        epsilon: args.epsilon,
        glitch,
        seed: args.seed,
        samples: args.samples,
        max_queries: args.max_queries,
    };
    let (report, recovered) = run_attack(&truth, &opts)?;
    if let (Some(path), Some(tree)) = (&args.recovered, &recovered) {
        tree.save(path)?;
    }
    write_out(args.output.as_deref(), &report.to_json())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut spec = match args.mode {
        ModeArg::Depth => SweepSpec::depth_default(),
        ModeArg::Dup => SweepSpec::dup_default(),
    };
    let (first, last) = (
        args.from.unwrap_or(spec.values[0]),
        args.to.unwrap_or(*spec.values.last().expect("defaults are non-empty")),
    );
    if first > last {
        return Err(Error::Validation {
            field: "from".into(),
            message: format!("{first} is above {last}"),
        });
    }
    spec.values = (first..=last).collect();
    spec.depth = args.depth.unwrap_or(spec.depth);
    spec.features = args.features.unwrap_or(spec.features);
    spec.dups = args.dups;
    spec.epsilon = args.epsilon;
    spec.seed = args.seed;
    if spec.mode == SweepMode::Depth && spec.values[0] == 0 {
        return Err(Error::Validation {
            field: "from".into(),
            message: "depth starts at 1".into(),
        });
    }
    let rows = run_sweep(&spec)?;
    let csv = sweep_csv(&rows);
    match &args.output {
        Some(p) => fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<bool> {
    let truth = VictimTree::load(&args.truth)?;
    let recovered = VictimTree::load(&args.recovered)?;
    let report = functionally_equivalent(&truth, &recovered, args.samples, args.seed)?;
    let mut json = serde_json::to_value(&report).expect("report serializes");
    let mut ok = report.is_equivalent();
    if let Some(step) = args.grid {
        let (mismatches, points) = grid_mismatches(&truth, &recovered, step)?;
        json["grid"] = serde_json::json!({ "step": step, "points": points, "mismatches": mismatches });
        ok &= mismatches == 0;
    }
    println!("{}", serde_json::to_string_pretty(&json).expect("json serializes"));
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => gen(a).map(|_| true),
        Command::Extract(a) => extract(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Verify(a) => verify(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
