use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use usd_core::oracle::{absorption_stats, verify_closed_forms, SolveOptions};
use usd_core::{bound_comparison, Configuration, LogBase, StepMode, TraceSample};
use usd_harness::couple::{leader_start, run_coupled_batch};
use usd_harness::fit::{fit_scaling, Predictor, ScalingPoint};
use usd_harness::output::{write_aggregate_json, write_trials_csv, BUILD_ID, VERSION};
use usd_harness::panels::{crossover_grid, crossover_rows, tilde_plus_panel};
use usd_harness::spec::{default_cap, ExperimentSpec, InitKind};
use usd_harness::sweep::{sweep, write_rows_csv, SweepGrid};
use usd_harness::{make_initial, run_trial, run_trials};

#[derive(Parser)]
#[command(
    name = "usd",
    version,
    about = "Simulate and verify the k-opinion undecided state dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run independent trials and write per-trial CSV or a JSON aggregate.
    Simulate(SpecArgs),
    /// Run a grid of experiments; `--n`, `--k` and `--init` take lists.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        /// Append completed cells here and skip them when rerun.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Also fit mean interactions against this predictor.
        #[arg(long, value_enum)]
        fit: Option<FitArg>,
    },
    /// Run one trial and report phase hitting times.
    Phases {
        #[command(flatten)]
        spec: SpecArgs,
        /// Trial index whose derived seed is used.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Write the metric trace as CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check the closed forms against exhaustive enumeration for all
    /// populations up to `--n` and opinion counts up to `--k`.
    VerifyOracle {
        #[command(flatten)]
        spec: SpecArgs,
        /// Also solve absorption from the configuration given by the
        /// initialisation flags.
        #[arg(long)]
        absorb: bool,
        /// Also run the exhaustive productive-bias panel.
        #[arg(long)]
        panel: bool,
    },
    /// Run the majorization coupling from a leader-heavy start.
    Couple {
        #[command(flatten)]
        spec: SpecArgs,
        /// Support of opinion 1; the rest is split evenly. Defaults to
        /// ⌈2n/3⌉ unless another initialisation is requested.
        #[arg(long)]
        leader: Option<u64>,
    },
    /// Compare the gossip and population convergence bounds.
    CompareBounds {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_enum, default_value = "two")]
        log_base: LogArg,
        /// Evaluate the built-in 100-point crossover grid instead.
        #[arg(long)]
        grid: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Uniform,
    Additive,
    Multiplicative,
    File,
    Explicit,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Skip,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitArg {
    K,
    N,
    NLogN,
    KNLogN,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogArg {
    Two,
    Natural,
}

#[derive(Args, Clone)]
struct SpecArgs {
    /// Population size.
    #[arg(long, value_delimiter = ',', default_values_t = [1000u64])]
    n: Vec<u64>,
    /// Number of opinions.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize])]
    k: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["uniform"])]
    init: Vec<InitArg>,
    /// JSON `{"counts": [...], "undecided": u}` for `--init file`.
    #[arg(long)]
    init_file: Option<PathBuf>,
    /// Counts of opinions 1..k for `--init explicit`.
    #[arg(long, value_delimiter = ',')]
    counts: Vec<u64>,
    /// Additive bias; defaults to ⌈2√n·ln n⌉.
    #[arg(long)]
    beta: Option<u64>,
    /// Multiplicative bias of opinion 1.
    #[arg(long, default_value_t = 2.0)]
    ratio: f64,
    /// Initially undecided agents.
    #[arg(long, default_value_t = 0)]
    u0: u64,
    /// Significance constant.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    /// Master seed; trial seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Interaction cap per trial; defaults to ⌈40·k·n·ln n⌉.
    #[arg(long)]
    cap: Option<u64>,
    /// Defaults to skip above 10^5 agents, exact otherwise.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Trace cadence; defaults to max(1, n/10).
    #[arg(long)]
    sample_every: Option<u64>,
    /// Check envelopes after every productive interaction.
    #[arg(long)]
    audit: bool,
    /// Reject starts with u0 > (n − x_1)/2.
    #[arg(long)]
    enforce_hypothesis: bool,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

impl SpecArgs {
    fn single<T: Copy>(values: &[T], flag: &str) -> anyhow::Result<T> {
        match values {
            [v] => Ok(*v),
            _ => bail!("{flag} takes exactly one value here"),
        }
    }

    fn init_kind(&self, init: InitArg) -> anyhow::Result<(InitKind, Option<(u64, u64)>)> {
        Ok(match init {
            InitArg::Uniform => (InitKind::Uniform, None),
            InitArg::Additive => (InitKind::Additive { beta: self.beta }, None),
            InitArg::Multiplicative => (InitKind::Multiplicative { ratio: self.ratio }, None),
            InitArg::Explicit => (
                InitKind::Explicit {
                    counts: self.counts.clone(),
                },
                None,
            ),
            InitArg::File => {
                let path = self.init_file.as_ref().context("--init file needs --init-file")?;
                let c = read_config(path)?;
                (
                    InitKind::Explicit {
                        counts: c.counts().to_vec(),
                    },
                    Some((c.n(), c.undecided())),
                )
            }
        })
    }

    fn base(&self, n: u64, k: usize, init: InitArg) -> anyhow::Result<ExperimentSpec> {
        let (init, from_file) = self.init_kind(init)?;
        let (n, u0, k) = match (&init, from_file) {
            (InitKind::Explicit { counts }, Some((n, u))) => (n, u, counts.len()),
            (InitKind::Explicit { counts }, None) => (counts.iter().sum::<u64>() + self.u0, self.u0, counts.len()),
            _ => (n, self.u0, k),
        };
        Ok(ExperimentSpec {
            n,
            k,
            init,
            u0,
            alpha: self.alpha,
            trials: self.trials,
            master_seed: self.seed,
            cap: self.cap,
            mode: self.mode.map(|m| match m {
                ModeArg::Exact => StepMode::Exact,
                ModeArg::Skip => StepMode::ProductiveSkip,
            }),
            sample_every: self.sample_every,
            audit: self.audit,
            enforce_hypothesis: self.enforce_hypothesis,
        })
    }

    fn spec(&self) -> anyhow::Result<ExperimentSpec> {
        self.base(
            Self::single(&self.n, "--n")?,
            Self::single(&self.k, "--k")?,
            Self::single(&self.init, "--init")?,
        )
    }

    fn sink(&self) -> anyhow::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

fn read_config(path: &Path) -> anyhow::Result<Configuration> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(file).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(mut out: impl Write, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn warn(spec: &ExperimentSpec) {
    for w in spec.warnings() {
        eprintln!("warning: {w}");
    }
}

#[derive(Serialize)]
struct TraceRow {
    t: u64,
    u: u64,
    x_max: u64,
    max_index: Option<usize>,
    z_alpha: f64,
    additive_bias: u64,
    multiplicative_bias: f64,
    significant_count: usize,
}

impl From<&TraceSample> for TraceRow {
    fn from(s: &TraceSample) -> Self {
        TraceRow {
            t: s.t,
            u: s.u,
            x_max: s.x_max,
            max_index: s.max_index.map(|i| i + 1),
            z_alpha: s.z_alpha,
            additive_bias: s.additive_bias,
            multiplicative_bias: s.multiplicative_bias,
            significant_count: s.significant_count,
        }
    }
}

fn one_based(x: Option<usize>) -> Option<usize> {
    x.map(|i| i + 1)
}

fn simulate(args: &SpecArgs) -> anyhow::Result<()> {
    let spec = args.spec()?;
    warn(&spec);
    let batch = run_trials(&spec)?;
    let out = args.sink()?;
    match args.format {
        FormatArg::Csv => write_trials_csv(out, &batch.records)?,
        FormatArg::Json => write_aggregate_json(out, &batch)?,
    }
    Ok(())
}

fn run_sweep(args: &SpecArgs, manifest: Option<&Path>, fit: Option<FitArg>) -> anyhow::Result<()> {
    let mut inits = Vec::new();
    for &i in &args.init {
        inits.push(args.init_kind(i)?.0);
    }
    let base = args.base(args.n[0], args.k[0], args.init[0])?;
    let grid = SweepGrid {
        ns: args.n.clone(),
        ks: args.k.clone(),
        inits,
    };
    let rows = sweep(&base, &grid, manifest)?;
    for r in rows.iter().filter(|r| !r.is_ok()) {
        eprintln!(
            "warning: cell n={} k={} {} failed: {}",
            r.n,
            r.k,
            r.init_kind,
            r.error.as_deref().unwrap_or("")
        );
    }
    let fitted = match fit {
        Some(f) => {
            let predictor = match f {
                FitArg::K => Predictor::K,
                FitArg::N => Predictor::N,
                FitArg::NLogN => Predictor::NLogN,
                FitArg::KNLogN => Predictor::KNLogN,
            };
            let points: Vec<ScalingPoint> = rows.iter().filter_map(|r| r.scaling_point()).collect();
            Some(fit_scaling(&points, predictor)?)
        }
        None => None,
    };
    let out = args.sink()?;
    match args.format {
        FormatArg::Csv => {
            write_rows_csv(out, &rows)?;
            if let Some(f) = fitted {
                eprintln!(
                    "fit: slope {:.4}, intercept {:.4}, R² {:.4}",
                    f.slope, f.intercept, f.r_squared
                );
            }
        }
        FormatArg::Json => write_json(
            out,
            &json!({ "base": base, "rows": rows, "fit": fitted, "version": VERSION, "build": BUILD_ID }),
        )?,
    }
    Ok(())
}

fn phases(args: &SpecArgs, trial: u64, trace: Option<&Path>) -> anyhow::Result<()> {
    let spec = args.spec()?;
    warn(&spec);
    let initial = make_initial(&spec)?;
    let outcome = run_trial(&spec, &initial, trial, trace.is_some())?;
    if let Some(path) = trace {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .with_context(|| format!("creating {}", path.display()))?;
        for s in &outcome.trace {
            w.serialize(TraceRow::from(s))?;
        }
        w.flush()?;
    }
    let r = &outcome.record;
    match args.format {
        FormatArg::Csv => write_trials_csv(args.sink()?, std::slice::from_ref(r))?,
        FormatArg::Json => write_json(
            args.sink()?,
            &json!({
                "spec": spec,
                "initial": initial.to_string(),
                "final": outcome.final_config.to_string(),
                "seed": r.seed,
                "total_interactions": r.total_interactions,
                "stop_reason": r.stop_reason,
                "hitting_times": r.hitting_times,
                "end_conditions_met": outcome.report.end_conditions_met(),
                "initial_plurality": one_based(outcome.report.initial_plurality),
                "plurality_at_t2": one_based(r.plurality_at_t2),
                "winner": one_based(r.winner),
                "winner_was_initial_plurality": r.winner_was_initial_plurality,
                "max_u": r.max_u,
                "min_u_post_t1": r.min_u_post_t1,
                "envelope_violations": r.envelope_violations(),
            }),
        )?,
    }
    Ok(())
}

fn verify_oracle(args: &SpecArgs, absorb: bool, panel: bool) -> anyhow::Result<()> {
    let n_max = SpecArgs::single(&args.n, "--n")?;
    let k_max = SpecArgs::single(&args.k, "--k")?;
    let mut reports = Vec::new();
    let mut failed = false;
    for k in 2..=k_max {
        for n in 0..=n_max {
            let r = verify_closed_forms(n, k)?;
            failed |= !r.passed();
            reports.push(json!({
                "n": n,
                "k": k,
                "configurations": r.configurations,
                "checks": r.checks,
                "passed": r.passed(),
                "mismatch": r.mismatch.as_ref().map(|m| m.to_string()),
            }));
        }
    }
    let absorption = if absorb {
        let c = make_initial(&args.spec()?)?;
        let s = absorption_stats(&c, &SolveOptions::default())?;
        Some(json!({
            "start": c.to_string(),
            "expected_time": s.expected_time,
            "win_prob": s.win_prob,
            "exact_expected_time": s.exact.as_ref().map(|e| e.expected_time.to_string()),
            "exact_win_prob": s.exact.as_ref().map(|e| e.win_prob.iter().map(|w| w.to_string()).collect::<Vec<_>>()),
            "transient_states": s.transient_states,
        }))
    } else {
        None
    };
    let panel =
        panel.then(|| tilde_plus_panel(&[10, 25, 50, 100, 200], &[2, 3, 4, 5], &[(0, 1), (1, 20), (1, 10)], 12));
    if let Some(p) = &panel {
        failed |= p.violations > 0;
    }
    write_json(
        args.sink()?,
        &json!({ "closed_forms": reports, "absorption": absorption, "panel": panel }),
    )?;
    if failed {
        bail!("verification failed");
    }
    Ok(())
}

fn couple(args: &SpecArgs, leader: Option<u64>) -> anyhow::Result<()> {
    let explicit_init = !matches!(args.init.as_slice(), [InitArg::Uniform]);
    let c = if explicit_init {
        make_initial(&args.spec()?)?
    } else {
        let n = SpecArgs::single(&args.n, "--n")?;
        let k = SpecArgs::single(&args.k, "--k")?;
        leader_start(n, k, leader.unwrap_or((2 * n).div_ceil(3)), args.u0)?
    };
    let cap = args.cap.unwrap_or_else(|| default_cap(c.n(), c.k()));
    let (summary, records) = run_coupled_batch(&c, args.trials, cap, args.seed)?;
    match args.format {
        FormatArg::Json => write_json(
            args.sink()?,
            &json!({ "summary": summary, "version": VERSION, "build": BUILD_ID }),
        )?,
        FormatArg::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(args.sink()?);
            w.write_record([
                "run",
                "seed",
                "held",
                "first_violation",
                "t_consensus_k",
                "t_consensus_2",
                "winner_k",
                "winner_2",
                "interactions",
            ])?;
            let opt = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
            for r in &records {
                let o = &r.outcome;
                w.write_record([
                    r.run.to_string(),
                    r.seed.to_string(),
                    o.held.to_string(),
                    opt(o.first_violation),
                    opt(o.t_consensus_k),
                    opt(o.t_consensus_two),
                    opt(o.winner_k.map(|i| i as u64 + 1)),
                    opt(o.winner_two.map(|i| i as u64 + 1)),
                    o.interactions.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    if summary.violating_runs > 0 {
        bail!("majorization violated in {} runs", summary.violating_runs);
    }
    Ok(())
}

fn compare_bounds(args: &SpecArgs, base: LogArg, grid: bool) -> anyhow::Result<()> {
    let base = match base {
        LogArg::Two => LogBase::Two,
        LogArg::Natural => LogBase::Natural,
    };
    let rows = if grid {
        crossover_rows(&crossover_grid())
    } else {
        let c = make_initial(&args.spec()?)?;
        let b = bound_comparison(&c, base).context("no decided agents")?;
        vec![usd_harness::panels::CrossoverRow {
            config: c.to_string(),
            n: c.n(),
            k: c.k(),
            x_max: c.x_max(),
            gossip_bound: b.gossip_bound,
            population_bound: b.population_bound,
            crossover: b.crossover,
        }]
    };
    match args.format {
        FormatArg::Json => write_json(args.sink()?, &rows)?,
        FormatArg::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(args.sink()?);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn dispatch(cmd: &Command) -> anyhow::Result<()> {
    match cmd {
        Command::Simulate(spec) => simulate(spec),
        Command::Sweep { spec, manifest, fit } => run_sweep(spec, manifest.as_deref(), *fit),
        Command::Phases { spec, trial, trace } => phases(spec, *trial, trace.as_deref()),
        Command::VerifyOracle { spec, absorb, panel } => verify_oracle(spec, *absorb, *panel),
        Command::Couple { spec, leader } => couple(spec, *leader),
        Command::CompareBounds { spec, log_base, grid } => compare_bounds(spec, *log_base, *grid),
    }
}

fn threads(cmd: &Command) -> Option<usize> {
    match cmd {
        Command::Simulate(s)
        | Command::Sweep { spec: s, .. }
        | Command::Phases { spec: s, .. }
        | Command::VerifyOracle { spec: s, .. }
        | Command::Couple { spec: s, .. }
        | Command::CompareBounds { spec: s, .. } => s.threads,
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let result = match threads(&cli.command) {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .context("building thread pool")?
            .install(|| dispatch(&cli.command)),
        None => dispatch(&cli.command),
    };
    // a closed downstream pipe is a normal way to stop reading
    match result {
        Err(e) if is_broken_pipe(&e) => Ok(()),
        other => other,
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| {
        cause
            .downcast_ref::<io::Error>()
            .is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
            || cause.downcast_ref::<usd_harness::HarnessError>().is_some_and(
                |h| matches!(h, usd_harness::HarnessError::Io(io) if io.kind() == io::ErrorKind::BrokenPipe),
            )
    })
}
