//! `rtdc`: solve, replay, generate, label and benchmark DTNU instances.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rtdc_core::gen::{generate_dtnu, label_instance, GeneratorConfig, LabelingConfig};
use rtdc_core::mpnn::load_weights;
use rtdc_core::ordering::OrderingParams;
use rtdc_core::strategy::{corner_outcomes, sample_outcome, simulate_execution, strategy_from_json, strategy_to_json};
use rtdc_core::{check_rtdc, parse_dtnu, serialize_dtnu, Dtnu, SearchConfig, SearchReport};

#[derive(Parser)]
#[command(name = "rtdc", version, about = "R-TDC checking for DTNUs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide one instance and optionally write its strategy
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// strategy file, written when the instance is R-TDC
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a strategy against sampled and corner outcomes
    Replay {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write random instances into a directory
    Gen {
        #[arg(long, default_value_t = 10)]
        count: u64,
        /// first instance seed; instance k uses seed + k
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate and label instances as a JSONL dataset
    Label {
        #[arg(long, default_value_t = 10)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// explorations per root child
        #[arg(long, default_value_t = 25)]
        runs: usize,
        /// seconds per exploration
        #[arg(long, default_value_t = 3.0)]
        timeout: f64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve every instance in a directory
    Bench {
        #[arg(long)]
        dir: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// record file (instance,verdict,elapsed_ms,nodes)
        #[arg(long)]
        out: PathBuf,
        /// cumulative solved-vs-time table; defaults to `<out>.cumulative.csv`
        #[arg(long)]
        table: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct SearchArgs {
    /// seconds
    #[arg(long, default_value_t = 20.0)]
    timeout: f64,
    /// weight file for the learned ordering
    #[arg(long)]
    heuristic: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    max_depth: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// d-OR child ordering; defaults to mpnn with --heuristic, else declaration
    #[arg(long)]
    order: Option<String>,
}

impl SearchArgs {
    fn config(&self) -> Result<SearchConfig> {
        let timeout = seconds(self.timeout)?;
        let model = match &self.heuristic {
            Some(p) => Some(Arc::new(load_weights(p).with_context(|| format!("loading {}", p.display()))?)),
            None => None,
        };
        let ordering = match (&self.order, &model) {
            (Some(o), _) => o.clone(),
            (None, Some(_)) => "mpnn".into(),
            (None, None) => "declaration".into(),
        };
        Ok(SearchConfig {
            timeout: Some(timeout),
            ordering,
            ordering_params: OrderingParams { seed: self.seed, model, max_depth: self.max_depth },
            ..Default::default()
        })
    }
}

fn seconds(s: f64) -> Result<Duration> {
    if !(s.is_finite() && s > 0.0) {
        bail!("timeout must be a positive number of seconds");
    }
    Ok(Duration::from_secs_f64(s))
}

fn read_dtnu(path: &Path) -> Result<Dtnu> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_dtnu(&text).with_context(|| format!("parsing {}", path.display()))
}

fn solve(input: &Path, search: &SearchArgs, out: Option<&Path>) -> Result<()> {
    let d = read_dtnu(input)?;
    let report = check_rtdc(&d, &search.config()?)?;
    println!("{} {:.3}s {} nodes", report.verdict.label(), report.elapsed.as_secs_f64(), report.expanded);
    if let (Some(out), Some(s)) = (out, report.verdict.strategy()) {
        let text = serde_json::to_string_pretty(&strategy_to_json(&d, s))?;
        fs::write(out, text + "\n").with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

/// Returns the number of violating traces.
fn replay(input: &Path, strategy: &Path, samples: usize, seed: u64) -> Result<usize> {
    let d = read_dtnu(input)?;
    let text = fs::read_to_string(strategy).with_context(|| format!("reading {}", strategy.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).context("strategy is not JSON")?;
    let s = strategy_from_json(&d, &value)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes: Vec<_> = (0..samples).map(|_| sample_outcome(&d, &mut rng)).collect();
    outcomes.extend(corner_outcomes(&d, 256, &mut rng));
    let mut violations = 0;
    for delays in &outcomes {
        if !simulate_execution(&d, &s, delays)?.satisfied() {
            violations += 1;
        }
    }
    println!("{violations} violations in {} traces", outcomes.len());
    Ok(violations)
}

fn gen(count: u64, seed: u64, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for k in 0..count {
        let s = seed + k;
        let d = generate_dtnu(&GeneratorConfig { seed: s, ..Default::default() });
        let path = out.join(format!("gen-{s:06}.dtnu"));
        fs::write(&path, serialize_dtnu(&d)).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("wrote {count} instances to {}", out.display());
    Ok(())
}

fn label(count: u64, seed: u64, runs: usize, timeout: f64, jobs: usize, out: &Path) -> Result<()> {
    let lcfg = LabelingConfig { runs, timeout: seconds(timeout)?, seed };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let lines: Vec<String> = pool.install(|| {
        (seed..seed + count)
            .into_par_iter()
            .map(|s| {
                let d = generate_dtnu(&GeneratorConfig { seed: s, ..Default::default() });
                let example = label_instance(&d, s, &lcfg)?;
                Ok(example.to_record(&d).to_string())
            })
            .collect::<Result<_>>()
    })?;
    let mut f = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    for line in &lines {
        writeln!(f, "{line}")?;
    }
    println!("wrote {} records to {}", lines.len(), out.display());
    Ok(())
}

struct BenchRecord {
    instance: String,
    report: SearchReport,
}

fn bench(dir: &Path, search: &SearchArgs, jobs: usize, out: &Path, table: Option<&Path>) -> Result<()> {
    let cfg = search.config()?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "dtnu"));
    paths.sort();
    let instances: Vec<(String, Dtnu)> = paths
        .iter()
        .map(|p| Ok((p.display().to_string(), read_dtnu(p)?)))
        .collect::<Result<_>>()?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let records: Vec<BenchRecord> = pool.install(|| {
        instances
            .par_iter()
            .map(|(name, d)| Ok(BenchRecord { instance: name.clone(), report: check_rtdc(d, &cfg)? }))
            .collect::<Result<_>>()
    })?;

    let mut f = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    writeln!(f, "instance,verdict,elapsed_ms,nodes")?;
    for r in &records {
        writeln!(f, "{},{},{},{}", r.instance, r.report.verdict.label(), r.report.elapsed.as_millis(), r.report.expanded)?;
    }

    let table = table.map(Path::to_path_buf).unwrap_or_else(|| out.with_extension("cumulative.csv"));
    let mut solved: Vec<f64> = records
        .iter()
        .filter(|r| r.report.verdict.label() != "timeout")
        .map(|r| r.report.elapsed.as_secs_f64())
        .collect();
    solved.sort_by(f64::total_cmp);
    let mut f = fs::File::create(&table).with_context(|| format!("creating {}", table.display()))?;
    writeln!(f, "time_s,solved_count")?;
    writeln!(f, "0,0")?;
    for (k, t) in solved.iter().enumerate() {
        writeln!(f, "{t:.6},{}", k + 1)?;
    }
    writeln!(f, "{:.6},{}", cfg.timeout.unwrap_or_default().as_secs_f64(), solved.len())?;

    println!("solved {}/{} ({})", solved.len(), records.len(), cfg.ordering);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve { input, search, out } => solve(&input, &search, out.as_deref())?,
        Command::Replay { input, strategy, samples, seed } => {
            if replay(&input, &strategy, samples, seed)? > 0 {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Gen { count, seed, out } => gen(count, seed, &out)?,
        Command::Label { count, seed, runs, timeout, jobs, out } => label(count, seed, runs, timeout, jobs, &out)?,
        Command::Bench { dir, search, jobs, out, table } => bench(&dir, &search, jobs, &out, table.as_deref())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
