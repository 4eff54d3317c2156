use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mfic::compression::compression_stats;
use mfic::harness::{compress_all, instance_stats, run_instance};
use mfic::io::{gen_random, parse_compressed, parse_instance, write_compressed, write_instance, write_stats_csv};
use mfic::search::{solve_compressed, SolveStatus};
use mfic::{
    solve, CompressedModel, CompressionConfig, CompressionStats, GenParams, Instance, Metric, PropagatorKind,
    SearchMode, SminStrategy, SolveConfig, VarHeuristic,
};

const EXIT_UNSAT: u8 = 10;
const EXIT_LIMIT: u8 = 20;

#[derive(Parser)]
#[command(name = "mfic", version, about = "Table constraint compression and STR2 / STR-MFIC solving")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress every table of an instance.
    Compress {
        input: PathBuf,
        /// Output file for the compressed document (default: standard output).
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        compression: CompressionArgs,
        /// Print one stats line per table, then a total line.
        #[arg(long)]
        stats: bool,
    },
    /// Solve an instance or a compressed document.
    Solve {
        input: PathBuf,
        #[arg(long, value_enum)]
        prop: Prop,
        /// Count all solutions instead of stopping at the first.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        limits: LimitArgs,
        #[command(flatten)]
        compression: CompressionArgs,
    },
    /// Run instances under each propagator and write the stats CSV.
    Bench {
        /// Instance files, or directories scanned for `*.inst`.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// CSV destination; `-` for standard output.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "str2,str-mfic")]
        props: Vec<Prop>,
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        limits: LimitArgs,
        #[command(flatten)]
        compression: CompressionArgs,
    },
    /// Generate a random instance.
    Gen {
        #[arg(long)]
        vars: usize,
        #[arg(long)]
        dom: u32,
        #[arg(long)]
        arity: usize,
        #[arg(long)]
        constraints: usize,
        #[arg(long)]
        tuples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Prop {
    Str2,
    StrMfic,
}

impl From<Prop> for PropagatorKind {
    fn from(p: Prop) -> Self {
        match p {
            Prop::Str2 => PropagatorKind::Str2,
            Prop::StrMfic => PropagatorKind::StrMfic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Min,
    Avg,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Area,
    Savings,
}

#[derive(Clone, Copy, ValueEnum)]
enum Heuristic {
    MinDom,
    Lex,
}

#[derive(Args)]
struct CompressionArgs {
    /// TopK size as a fraction of the table size.
    #[arg(long, default_value_t = 0.4)]
    k_ratio: f64,
    #[arg(long, value_enum, default_value = "avg")]
    smin_strategy: Strategy,
    #[arg(long, value_enum, default_value = "area")]
    metric: MetricArg,
    /// Fixed minimum support, bypassing the TopK threshold.
    #[arg(long, conflicts_with_all = ["k_ratio", "smin_strategy"])]
    smin: Option<usize>,
    /// Worker threads for per-table compression (default: available
    /// parallelism).
    #[arg(long)]
    jobs: Option<usize>,
}

impl CompressionArgs {
    fn config(&self) -> CompressionConfig {
        CompressionConfig {
            k_ratio: self.k_ratio,
            smin_strategy: match self.smin_strategy {
                Strategy::Min => SminStrategy::Min,
                Strategy::Avg => SminStrategy::Avg,
            },
            metric: match self.metric {
                MetricArg::Area => Metric::Area,
                MetricArg::Savings => Metric::Savings,
            },
            ..CompressionConfig::default()
        }
    }

    fn init_pool(&self) -> Result<()> {
        if let Some(n) = self.jobs {
            if n == 0 {
                bail!("--jobs must be positive");
            }
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct LimitArgs {
    /// Time limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Node limit.
    #[arg(long)]
    nodes: Option<u64>,
    #[arg(long, value_enum, default_value = "min-dom")]
    heuristic: Heuristic,
}

impl LimitArgs {
    fn config(&self, all: bool, compression: CompressionConfig) -> Result<SolveConfig> {
        let time_limit = match self.timeout {
            Some(t) if !(t > 0.0 && t.is_finite()) => bail!("--timeout must be a positive number of seconds"),
            Some(t) => Some(Duration::from_secs_f64(t)),
            None => None,
        };
        Ok(SolveConfig {
            mode: if all { SearchMode::CountAll } else { SearchMode::First },
            node_limit: self.nodes,
            time_limit,
            var_heuristic: match self.heuristic {
                Heuristic::MinDom => VarHeuristic::MinDom,
                Heuristic::Lex => VarHeuristic::Lex,
            },
            compression,
            ..SolveConfig::default()
        })
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) if p != Path::new("-") => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

fn stats_line(label: &str, s: &CompressionStats) -> String {
    format!(
        "{label}: tuples={} c_tup={:.2}% c_rate={:.2}% itemsets={} avg_len={:.2} avg_freq={:.2}",
        s.n_tuples,
        s.c_tup_pct(),
        s.c_rate_pct(),
        s.n_itemsets,
        s.avg_len(),
        s.avg_freq()
    )
}

fn is_compressed_doc(doc: &str) -> bool {
    doc.lines().any(|l| l.trim_start().starts_with("ctable"))
}

fn compress(input: &Path, output: Option<&Path>, args: &CompressionArgs, stats: bool) -> Result<u8> {
    args.init_pool()?;
    let inst = parse_instance(&read(input)?).with_context(|| format!("parsing {}", input.display()))?;
    let tables = compress_all(&inst, &args.config(), args.smin)?;
    let model = CompressedModel::new(&inst, tables);
    emit(output, &write_compressed(&model))?;
    if stats {
        let mut lines = Vec::new();
        for ((name, c), ct) in inst.constraint_names().iter().zip(inst.constraints()).zip(&model.tables) {
            lines.push(stats_line(name, &compression_stats(c, ct)));
        }
        lines.push(stats_line("total", &instance_stats(&inst, &model.tables)));
        // keep standard output for the document when it goes there
        if output.is_some_and(|p| p != Path::new("-")) {
            lines.iter().for_each(|l| println!("{l}"));
        } else {
            lines.iter().for_each(|l| eprintln!("{l}"));
        }
    }
    Ok(0)
}

fn solve_cmd(input: &Path, prop: Prop, cfg: SolveConfig, comp: &CompressionArgs) -> Result<u8> {
    comp.init_pool()?;
    let doc = read(input)?;
    let kind = PropagatorKind::from(prop);
    let cfg = SolveConfig { propagator: kind, ..cfg };
    let (inst, result) = if is_compressed_doc(&doc) {
        let model = parse_compressed(&doc).with_context(|| format!("parsing {}", input.display()))?;
        let inst = model.to_instance()?;
        let result = match kind {
            PropagatorKind::StrMfic => solve_compressed(&inst, &model.tables, &cfg)?,
            PropagatorKind::Str2 => solve(&inst, &cfg)?,
        };
        (inst, result)
    } else {
        let inst = parse_instance(&doc).with_context(|| format!("parsing {}", input.display()))?;
        let result = match (kind, comp.smin) {
            (PropagatorKind::StrMfic, Some(s)) => {
                solve_compressed(&inst, &compress_all(&inst, &cfg.compression, Some(s))?, &cfg)?
            }
            _ => solve(&inst, &cfg)?,
        };
        (inst, result)
    };
    println!("status: {}", result.status);
    match cfg.mode {
        SearchMode::CountAll => println!("{} solutions", result.solution_count),
        SearchMode::First => {
            if let Some(a) = result.solutions.first() {
                println!("solution: {}", format_assignment(&inst, &a.0));
            }
        }
    }
    let s = &result.stats;
    println!(
        "stats: nodes={} backtracks={} filter_calls={} removals={} time_s={:.3}",
        s.nodes,
        s.backtracks,
        s.filter_calls,
        s.removals,
        s.wall_time.as_secs_f64()
    );
    Ok(match result.status {
        SolveStatus::Sat => 0,
        SolveStatus::Unsat => EXIT_UNSAT,
        SolveStatus::LimitReached => EXIT_LIMIT,
    })
}

fn format_assignment(inst: &Instance, values: &[u32]) -> String {
    inst.var_names()
        .iter()
        .zip(values)
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn bench_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "inst"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        bail!("no instance files found");
    }
    Ok(files)
}

fn bench(inputs: &[PathBuf], out: &Path, props: &[Prop], cfg: SolveConfig, comp: &CompressionArgs) -> Result<u8> {
    comp.init_pool()?;
    let kinds: Vec<PropagatorKind> = props.iter().map(|&p| p.into()).collect();
    let mut rows = Vec::new();
    for f in bench_inputs(inputs)? {
        let inst = parse_instance(&read(&f)?).with_context(|| format!("parsing {}", f.display()))?;
        let name = f.file_stem().map_or_else(|| f.display().to_string(), |s| s.to_string_lossy().into_owned());
        rows.extend(run_instance(&name, &inst, &kinds, &cfg, comp.smin)?);
    }
    emit(Some(out), &write_stats_csv(&rows))?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Compress { input, output, compression, stats } => {
            compress(&input, output.as_deref(), &compression, stats)
        }
        Command::Solve { input, prop, all, limits, compression } => {
            let cfg = limits.config(all, compression.config())?;
            solve_cmd(&input, prop, cfg, &compression)
        }
        Command::Bench { inputs, out, props, all, limits, compression } => {
            let cfg = limits.config(all, compression.config())?;
            bench(&inputs, &out, &props, cfg, &compression)
        }
        Command::Gen { vars, dom, arity, constraints, tuples, seed, output } => {
            let p = GenParams {
                n_vars: vars,
                dom_size: dom,
                arity,
                n_constraints: constraints,
                tuples_per_constraint: tuples,
                seed,
            };
            emit(output.as_deref(), &write_instance(&gen_random(&p)?))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
