use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slotmatch::bench::{
    self, build_engine, load_source, write_outputs, BoundSetting, ExperimentConfig,
};
use slotmatch::model::{generate_synthetic, SyntheticSpec};
use slotmatch::verify::{run_suite, SuiteConfig};
use slotmatch::{
    build_graph_from_selection, stochastic_greedy_select, AllocationFile, BaselineKind, Error,
    SelectionConfig, SelectionResult, WeightedBipartiteGraph,
};

const EXIT_VIOLATION: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "slotmatch",
    version,
    about = "Multi-slot tag allocation for billboard advertising"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as three CSV files.
    Gen(GenArgs),
    /// Pick slots and tags with stochastic greedy.
    Select(SelectArgs),
    /// Build the complete tag × slot graph for a selection.
    Graph(GraphArgs),
    /// Prune a graph and match tags to slots.
    Allocate(AllocateArgs),
    /// Run one of the reference allocators on a pruned graph.
    Baseline(BaselineArgs),
    /// Run the full pipeline over a parameter grid.
    Bench(BenchArgs),
    /// Check an allocation file, or run the exhaustive lemma suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    users: usize,
    #[arg(long, default_value_t = 50)]
    billboards: usize,
    #[arg(long, default_value_t = 10)]
    tags: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Dataset and parameters, from a config file and/or flags. Flags win.
#[derive(Args, Default)]
struct ConfigArgs {
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory with trajectories.csv, billboards.csv, affinities.csv.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    users: Option<String>,
    #[arg(long)]
    billboards: Option<String>,
    #[arg(long)]
    tags: Option<String>,
    #[arg(long)]
    data_seed: Option<String>,
    /// Selection and baseline seed.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// Extra `key=value` settings, same keys as the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if let Some(d) = &self.data {
            out.push(("data", d.display().to_string()));
        }
        for (key, v) in [
            ("users", &self.users),
            ("billboards", &self.billboards),
            ("tags", &self.tags),
            ("data_seed", &self.data_seed),
            ("seed", &self.seed),
            ("lambda", &self.lambda),
        ] {
            if let Some(v) = v {
                out.push((key, v.clone()));
            }
        }
        out
    }

    fn load(&self, extra: &[(&str, Option<&String>)]) -> slotmatch::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        for (k, v) in self.overrides() {
            cfg.set(k, &v)?;
        }
        for (k, v) in extra {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    /// Evaluate every remaining candidate at each step.
    #[arg(long)]
    full_sample: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    selection: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AllocateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    theta: f64,
    /// `auto` for ceil(k / l), or a positive integer.
    #[arg(long, default_value = "auto")]
    bound_default: String,
    /// Per-tag bound, repeatable.
    #[arg(long = "bound", value_name = "TAG=N")]
    bounds: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    theta: f64,
    /// bm, mda, tsrt or ra.
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    l: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    repetitions: Option<String>,
    /// Output root; artifacts go to `<out>/<run-id>/`.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Defaults to `seed<seed>`.
    #[arg(long)]
    run_id: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Graph the allocation refers to.
    #[arg(long, requires = "allocation")]
    graph: Option<PathBuf>,
    #[arg(long, requires = "graph")]
    allocation: Option<PathBuf>,
    /// Run the random-instance suite instead.
    #[arg(long, conflicts_with = "graph")]
    suite: bool,
    #[arg(long, default_value_t = 500)]
    instances: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Also draw shapes with no more slots than tags.
    #[arg(long)]
    any_shape: bool,
    /// Suite report path (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Violation(String),
    Err(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Err(e)
    }
}

type CmdResult = Result<(), Failure>;

fn write_text(path: &Path, text: &str) -> slotmatch::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn gen(args: GenArgs) -> CmdResult {
    let data = generate_synthetic(&SyntheticSpec::new(
        args.seed,
        args.users,
        args.billboards,
        args.tags,
    ))?;
    data.write_dir(&args.out)?;
    println!(
        "wrote {} trajectories, {} billboards, {} affinities to {}",
        data.trajectories.len(),
        data.billboards.len(),
        data.affinities.len(),
        args.out.display()
    );
    Ok(())
}

fn select(args: SelectArgs) -> CmdResult {
    let cfg = args.config.load(&[
        ("k", args.k.as_ref()),
        ("l", args.l.as_ref()),
        ("epsilon", args.epsilon.as_ref()),
    ])?;
    let (data, horizon) = load_source(&cfg.source, cfg.horizon)?;
    let engine = build_engine(&data, horizon, cfg.lambdas[0])?;
    let sel_cfg = SelectionConfig {
        full_sample: args.full_sample || cfg.full_sample,
        order: cfg.order,
        ..SelectionConfig::new(cfg.ks[0], cfg.ls[0], cfg.epsilons[0], cfg.seed)
    };
    let sel = stochastic_greedy_select(&engine, &sel_cfg)?;
    write_text(
        &args.out,
        &serde_json::to_string_pretty(&sel).map_err(Error::from)?,
    )?;
    println!(
        "selected {} slots, {} tags, influence {:.6}",
        sel.slots.len(),
        sel.tags.len(),
        sel.influence(&engine)?
    );
    Ok(())
}

fn graph(args: GraphArgs) -> CmdResult {
    let cfg = args.config.load(&[])?;
    let text = std::fs::read_to_string(&args.selection).map_err(|e| Error::Io {
        path: args.selection.clone(),
        source: e,
    })?;
    let sel: SelectionResult = serde_json::from_str(&text).map_err(Error::from)?;
    let (data, horizon) = load_source(&cfg.source, cfg.horizon)?;
    let engine = build_engine(&data, horizon, cfg.lambdas[0])?;
    let g = build_graph_from_selection(&engine, &sel)?;
    write_text(&args.out, &g.to_json()?)?;
    let st = g.stats();
    println!(
        "{} edges, mu {:.9}, sigma {:.9}",
        g.edges().len(),
        st.mu,
        st.sigma
    );
    Ok(())
}

fn load_pruned(path: &Path, theta: f64) -> slotmatch::Result<WeightedBipartiteGraph> {
    WeightedBipartiteGraph::load(path)?.prune(theta)
}

fn allocate(args: AllocateArgs) -> CmdResult {
    let g = load_pruned(&args.graph, args.theta)?;
    let mut cfg = ExperimentConfig {
        bound: args.bound_default.parse::<BoundSetting>()?,
        ..ExperimentConfig::default()
    };
    for b in &args.bounds {
        let (tag, n) = b
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--bound expects TAG=N, got '{b}'")))?;
        cfg.set(&format!("bound.{}", tag.trim()), n)?;
    }
    cfg.validate()?;
    let bounds = bench::resolve_bounds(&cfg, &g);
    let a = slotmatch::ombm_allocate(&g, &bounds)?;
    write_text(&args.out, &a.to_json(&g)?)?;
    println!(
        "matched {} slots with {} tags ({} edges after pruning)",
        a.matched_slots(),
        a.matched_tags(),
        g.edges().len()
    );
    Ok(())
}

fn baseline(args: BaselineArgs) -> CmdResult {
    let g = load_pruned(&args.graph, args.theta)?;
    let kind = BaselineKind::parse(&args.method, args.seed)?;
    let a = kind.allocate(&g)?;
    write_text(&args.out, &a.to_json(&g)?)?;
    println!(
        "{kind}: matched {} slots with {} tags",
        a.matched_slots(),
        a.matched_tags()
    );
    Ok(())
}

fn bench_cmd(args: BenchArgs) -> CmdResult {
    let cfg = args.config.load(&[
        ("k", args.k.as_ref()),
        ("l", args.l.as_ref()),
        ("theta", args.theta.as_ref()),
        ("epsilon", args.epsilon.as_ref()),
        ("methods", args.methods.as_ref()),
        ("repetitions", args.repetitions.as_ref()),
    ])?;
    let run_id = args.run_id.unwrap_or_else(|| format!("seed{}", cfg.seed));
    let dir = args.out.join(run_id);
    let out = bench::sweep(&cfg)?;
    write_outputs(&dir, &out)?;
    let failed = out.report.rows.iter().filter(|r| !r.is_ok()).count();
    println!(
        "{} rows ({failed} failed) written to {}",
        out.report.rows.len(),
        dir.display()
    );
    Ok(())
}

fn verify(args: VerifyArgs) -> CmdResult {
    if args.suite {
        let cfg = SuiteConfig {
            instances: args.instances,
            seed: args.seed,
            more_slots_than_tags: !args.any_shape,
            ..SuiteConfig::default()
        };
        let rep = run_suite(&cfg)?;
        if let Some(path) = &args.out {
            write_text(
                path,
                &serde_json::to_string_pretty(&rep).map_err(Error::from)?,
            )?;
        }
        let summary = format!(
            "{} instances: dominating-edge violations {}, slot-uniqueness {}, bound {}, approximation {}",
            rep.records.len(),
            rep.dominating_violations(),
            rep.uniqueness_violations(),
            rep.bound_violations(),
            rep.approx_violations()
        );
        return if rep.is_clean() {
            println!("{summary}");
            Ok(())
        } else {
            Err(Failure::Violation(summary))
        };
    }
    let (Some(gp), Some(ap)) = (args.graph, args.allocation) else {
        return Err(
            Error::Config("verify needs --graph and --allocation, or --suite".into()).into(),
        );
    };
    let g = WeightedBipartiteGraph::load(&gp)?;
    let file = AllocationFile::load(&ap)?;
    if (!file.tags.is_empty() && file.tags != g.tags())
        || (!file.slots.is_empty() && file.slots != g.slots())
    {
        return Err(Failure::Violation(
            "allocation ids do not match the graph".into(),
        ));
    }
    let a = match file.into_allocation(g.tag_count()) {
        Ok(a) => a,
        Err(e) => return Err(Failure::Violation(e.to_string())),
    };
    if let Err(e) = a.check_against(&g) {
        return Err(Failure::Violation(e.to_string()));
    }
    println!(
        "ok: {} slots matched, {} tags matched",
        a.matched_slots(),
        a.matched_tags()
    );
    Ok(())
}

fn init_threads() -> slotmatch::Result<()> {
    let Ok(v) = std::env::var("SLOTMATCH_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Config(format!(
            "SLOTMATCH_THREADS must be a positive integer, got '{v}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Contract(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads()
        .map_err(Failure::from)
        .and_then(|()| match cli.command {
            Command::Gen(a) => gen(a),
            Command::Select(a) => select(a),
            Command::Graph(a) => graph(a),
            Command::Allocate(a) => allocate(a),
            Command::Baseline(a) => baseline(a),
            Command::Bench(a) => bench_cmd(a),
            Command::Verify(a) => verify(a),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(msg)) => {
            eprintln!("violation: {msg}");
            ExitCode::from(EXIT_VIOLATION)
        }
        Err(Failure::Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            })
        }
    }
}
