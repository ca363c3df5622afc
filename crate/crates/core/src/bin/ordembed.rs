use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use ordembed::bounds::{build_dyadic_witness, default_depth, verify_interval_bound, verify_interval_bound_normalized};
use ordembed::constructions::{
    adversarial_pair, apfree_set, isosceles_free_search, push_pairs_apart,
    verify_similarity_resistance, APFreeInstance, ApStrategy, PairSelector,
};
use ordembed::experiments::{
    loglog_slope, perturbation_probability, read_summary_csv, repeated_embedding_study,
    run_sweep_resumable, sample_uniform_cube, write_summary_csv, ExperimentConfig, SamplingMode,
};
use ordembed::geometry::PointConfig;
use ordembed::plot::{summary_chart, Chart, Scale, Series, Style};
use ordembed::seeds::derive_seed;
use ordembed::solver::{solve_embedding, worst_of_restarts, SolverParams};
use ordembed::triplets::build_table;

#[derive(Parser, Debug)]
#[command(name = "ordembed", version, about = "Ordinal embedding from triplet comparisons")]
struct Cli {
    /// JSON config (solver parameters, or an experiment config for `sweep`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, global = true, env = "ORDEMBED_OUT", default_value = "ordembed-out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the trial count of the subcommand.
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reconstruct a configuration from its triplet table (worst of restarts).
    Solve(SolveArgs),
    /// Check the 1-D error bound on a weakly isotonic pair.
    VerifyBound(VerifyArgs),
    /// Generate a 3-AP-free instance.
    MakeApfree(ApArgs),
    /// Build and certify an adversarial pair from an instance.
    Adversarial(AdversarialArgs),
    /// Run a convergence sweep.
    Sweep,
    /// Estimate the probability that a random perturbation keeps all comparisons.
    Perturb(PerturbArgs),
    /// Embed one configuration repeatedly and record per-point displacements.
    RepeatEmbed(RepeatArgs),
    /// Search a grid for a large set with no beta-isosceles triangle.
    IsoscelesSearch(IsoArgs),
    /// Render a summary CSV as a log-log SVG.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Points CSV (header x0,x1,...). Without it a random configuration is drawn.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Target configuration (1-D CSV); must contain 0 and 1 unless --normalize.
    #[arg(long, requires = "y")]
    x: Option<PathBuf>,
    #[arg(long, requires = "x")]
    y: Option<PathBuf>,
    /// Map the extremes of x to 0 and 1 first.
    #[arg(long)]
    normalize: bool,
    /// Size of the generated instance when no files are given.
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Also write the dyadic witness of x.
    #[arg(long)]
    witness: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Exhaustive,
    Greedy,
    GreedyWidest,
    Behrend,
}

impl From<StrategyArg> for ApStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Exhaustive => ApStrategy::Exhaustive,
            StrategyArg::Greedy => ApStrategy::Greedy,
            StrategyArg::GreedyWidest => ApStrategy::GreedyWidest,
            StrategyArg::Behrend => ApStrategy::BehrendDigits,
        }
    }
}

#[derive(Args, Debug)]
struct ApArgs {
    /// Largest allowed element M.
    #[arg(long)]
    m: u64,
    #[arg(long)]
    k_gap: u64,
    #[arg(long, value_enum, default_value = "greedy-widest")]
    strategy: StrategyArg,
}

#[derive(Args, Debug)]
struct AdversarialArgs {
    /// Instance JSON as written by make-apfree.
    #[arg(long)]
    instance: PathBuf,
    /// Push size as a fraction of the margin 1/M.
    #[arg(long, default_value_t = 0.24)]
    beta_fraction: f64,
    /// Skip the range and isotonicity checks.
    #[arg(long)]
    unchecked: bool,
}

#[derive(Args, Debug)]
struct PerturbArgs {
    #[arg(long, value_delimiter = ',', default_value = "10,20,40,80")]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// beta = c / n.
    #[arg(long, default_value_t = 5.0)]
    c: f64,
}

#[derive(Args, Debug)]
struct RepeatArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 50)]
    runs: usize,
}

#[derive(Args, Debug)]
struct IsoArgs {
    #[arg(long)]
    grid: u32,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[arg(long)]
    summary: PathBuf,
}

enum Failure {
    Config(String),
    Runtime(ordembed::Error),
}

impl From<ordembed::Error> for Failure {
    fn from(e: ordembed::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

struct Run {
    out: PathBuf,
    verbose: u8,
    outputs: Vec<String>,
}

impl Run {
    fn log(&self, level: u8, msg: impl AsRef<str>) {
        if self.verbose >= level {
            eprintln!("{}", msg.as_ref());
        }
    }

    /// Temp file plus rename, so readers never see a partial file.
    fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.out.join(name);
        let tmp = self.out.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        self.outputs.push(name.to_string());
        self.log(1, format!("wrote {}", path.display()));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, v: &T) -> CliResult<()> {
        let s = serde_json::to_string_pretty(v).map_err(ordembed::Error::from)?;
        self.write(name, s.as_bytes())
    }

    fn write_points(&mut self, name: &str, p: &PointConfig) -> CliResult<()> {
        let mut buf = Vec::new();
        p.write_csv(&mut buf)?;
        self.write(name, &buf)
    }
}

fn read_config<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn read_points(path: &Path) -> CliResult<PointConfig> {
    let f = fs::File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok(PointConfig::read_csv(f)?)
}

fn solver_params(cli: &Cli, dim: usize) -> CliResult<SolverParams> {
    let mut p: SolverParams = read_config(&cli.config)?;
    p.dim = dim;
    if let Some(s) = cli.seed {
        p.rng_seed = s;
    }
    p.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(p)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("{}", json!({"error": "config", "message": e.to_string()}));
            return ExitCode::from(2);
        }
    }
    if let Err(e) = fs::create_dir_all(&cli.out) {
        eprintln!("{}", json!({"error": "runtime", "message": e.to_string()}));
        return ExitCode::from(1);
    }
    let mut run = Run {
        out: cli.out.clone(),
        verbose: cli.verbose,
        outputs: Vec::new(),
    };
    let result = dispatch(&cli, &mut run).and_then(|resolved| {
        let manifest = json!({
            "tool": "ordembed",
            "version": env!("CARGO_PKG_VERSION"),
            "argv": std::env::args().collect::<Vec<_>>(),
            "subcommand": format!("{:?}", cli.command),
            "seed": cli.seed,
            "trials": cli.trials,
            "resolved": resolved,
            "outputs": run.outputs,
        });
        run.write_json("manifest.json", &manifest)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("{}", json!({"error": "config", "message": m}));
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("{}", json!({"error": "runtime", "message": e.to_string()}));
            ExitCode::from(1)
        }
    }
}

/// Runs the subcommand and returns the resolved settings for the manifest.
fn dispatch(cli: &Cli, run: &mut Run) -> CliResult<Value> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Solve(a) => {
            let x = match &a.input {
                Some(p) => read_points(p)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
                    sample_uniform_cube(a.n, a.dim, &mut rng)?
                }
            };
            let params = solver_params(cli, x.dim())?;
            let w = worst_of_restarts(&x, &params)?;
            run.write_points("x.csv", &x)?;
            run.write_points("y_worst.csv", &w.y_worst)?;
            let runs: Vec<Value> = w
                .runs
                .iter()
                .map(|r| {
                    json!({"seed": r.seed, "success": r.report.success, "epochs": r.report.epochs_used,
                           "d_inf": r.aligned.map(|a| a.d_inf), "d_1": r.aligned.map(|a| a.d_1)})
                })
                .collect();
            run.write_json("runs.json", &runs)?;
            println!(
                "d_inf {:.6e} d_1 {:.6e} failed_restarts {}",
                w.worst.d_inf, w.worst.d_1, w.failed_restarts
            );
            Ok(json!({"solver": params, "n": x.len(), "dim": x.dim()}))
        }
        Command::VerifyBound(a) => {
            let (x, y, params) = match (&a.x, &a.y) {
                (Some(px), Some(py)) => (read_points(px)?, read_points(py)?, None),
                _ => {
                    let params = solver_params(cli, 1)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
                    let x = pinned_interval_sample(a.n, &mut rng)?;
                    let report = solve_embedding(&build_table(&x, 0.0)?, &params)?;
                    if !report.success {
                        return Err(Failure::Runtime(ordembed::Error::AllRestartsFailed(1)));
                    }
                    (x, report.y, Some(params))
                }
            };
            let check = if a.normalize {
                verify_interval_bound_normalized(&x, &y)?
            } else {
                verify_interval_bound(&x, &y)?
            };
            run.write_points("x.csv", &x)?;
            run.write_points("y.csv", &y)?;
            if a.witness {
                let xs = if a.normalize { ordembed::bounds::normalize_target(&x)?.0 } else { x.clone() };
                let w = build_dyadic_witness(&xs, check.alpha, default_depth(check.alpha)?)?;
                run.write_json("witness.json", &w.to_json())?;
            }
            let result = json!({"achieved": check.achieved, "bound": check.bound, "alpha": check.alpha, "ok": check.ok});
            run.write_json("bound.json", &result)?;
            println!(
                "achieved {:.6e} bound {:.6e} {}",
                check.achieved,
                check.bound,
                if check.ok { "OK" } else { "VIOLATED" }
            );
            Ok(json!({"solver": params, "normalize": a.normalize}))
        }
        Command::MakeApfree(a) => {
            let inst = apfree_set(a.m, a.k_gap, a.strategy.into())
                .map_err(|e| match e {
                    ordembed::Error::InvalidParameter(m) => Failure::Config(m),
                    e => Failure::Runtime(e),
                })?;
            run.write_json("instance.json", &inst)?;
            println!(
                "M {} |S| {} alpha {:.6e} margin {:.6e} exponent {:.4}",
                inst.m,
                inst.len(),
                inst.alpha(),
                inst.margin(),
                inst.exponent()
            );
            Ok(json!({"m_max": a.m, "k_gap": a.k_gap, "strategy": format!("{:?}", a.strategy)}))
        }
        Command::Adversarial(a) => {
            let text = fs::read_to_string(&a.instance)
                .map_err(|e| Failure::Config(format!("{}: {e}", a.instance.display())))?;
            let inst: APFreeInstance =
                serde_json::from_str(&text).map_err(|e| Failure::Config(e.to_string()))?;
            inst.verify()?;
            let beta = a.beta_fraction * inst.margin();
            let pair = if a.unchecked {
                push_pairs_apart(&inst, beta, PairSelector::LargestGaps)?
            } else {
                adversarial_pair(&inst, beta, PairSelector::LargestGaps)?
            };
            let cert = verify_similarity_resistance(&pair)?;
            run.write_points("x.csv", &pair.x())?;
            run.write_points("y.csv", &pair.y)?;
            let result = json!({"beta": beta, "moved_pairs": pair.moved_pairs,
                                "certified_lower": cert.certified_lower, "exact_minimax": cert.exact});
            run.write_json("certificate.json", &result)?;
            println!("beta {:.6e} certified {:.6e} exact {:.6e}", beta, cert.certified_lower, cert.exact);
            Ok(json!({"instance": inst, "beta_fraction": a.beta_fraction, "unchecked": a.unchecked}))
        }
        Command::Sweep => {
            let mut cfg: ExperimentConfig = read_config(&cli.config)?;
            if let Some(s) = cli.seed {
                cfg.master_seed = s;
            }
            if let Some(t) = cli.trials {
                cfg.trials_per_cell = t;
            }
            cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
            let mode = cfg.mode.as_str();
            let trials_name = format!("trials_{mode}.csv");
            let (_, summary) = run_sweep_resumable(&cfg, &run.out.join(&trials_name))?;
            run.outputs.push(trials_name);
            let mut buf = Vec::new();
            write_summary_csv(&summary, &mut buf)?;
            run.write(&format!("summary_{mode}.csv"), &buf)?;
            let svg = summary_chart(&summary, &format!("mean max displacement, {mode}")).to_svg();
            run.write(&format!("{mode}.svg"), svg.as_bytes())?;
            for &d in &cfg.dims {
                match loglog_slope(&summary, d) {
                    Ok(s) => println!("dim {d} slope {s:.3}"),
                    Err(e) => println!("dim {d} slope unavailable: {e}"),
                }
            }
            Ok(serde_json::to_value(&cfg).map_err(ordembed::Error::from)?)
        }
        Command::Perturb(a) => {
            let trials = cli.trials.unwrap_or(1000);
            let mut rows = String::from("n,beta,p_hat,ci_lo,ci_hi,successes,trials\n");
            for &n in &a.ns {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[n as u64]));
                let x = sample_uniform_cube(n, a.dim, &mut rng)?;
                let beta = a.c / n as f64;
                let e = perturbation_probability(&x, beta, trials, &mut rng)?;
                rows.push_str(&format!(
                    "{n},{beta},{},{},{},{},{}\n",
                    e.p_hat, e.ci_low, e.ci_high, e.successes, e.trials
                ));
                println!("n {n} beta {beta:.4} p_hat {:.4} [{:.4}, {:.4}]", e.p_hat, e.ci_low, e.ci_high);
            }
            run.write("perturb.csv", rows.as_bytes())?;
            Ok(json!({"ns": a.ns, "dim": a.dim, "c": a.c, "trials": trials}))
        }
        Command::RepeatEmbed(a) => {
            let x = match &a.input {
                Some(p) => read_points(p)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
                    sample_uniform_cube(a.n, a.dim, &mut rng)?
                }
            };
            let runs = cli.trials.unwrap_or(a.runs);
            let params = solver_params(cli, x.dim())?;
            let study = repeated_embedding_study(&x, runs, &params)?;
            run.write_points("x.csv", &x)?;
            let mut m = String::from("run,seed");
            for i in 0..x.len() {
                m.push_str(&format!(",p{i}"));
            }
            m.push('\n');
            for (r, (row, s)) in study.displacements.iter().zip(&study.seeds).enumerate() {
                m.push_str(&format!("{r},{s}"));
                for v in row {
                    m.push_str(&format!(",{v:.16e}"));
                }
                m.push('\n');
            }
            run.write("displacements.csv", m.as_bytes())?;
            let mut c = String::from("point,argmax_count\n");
            for (i, k) in study.argmax_counts.iter().enumerate() {
                c.push_str(&format!("{i},{k}\n"));
            }
            run.write("argmax.csv", c.as_bytes())?;
            let panels = repeat_charts(&study);
            for (name, chart) in ["per_point.svg", "argmax.svg", "run_max.svg"].iter().zip(panels) {
                run.write(name, chart.to_svg().as_bytes())?;
            }
            println!(
                "runs used {} failed {} top-1 share {:.2} top-2 share {:.2}",
                study.runs_used(),
                study.failed_runs,
                study.top_share(1),
                study.top_share(2)
            );
            Ok(json!({"solver": params, "runs": runs, "n": x.len()}))
        }
        Command::IsoscelesSearch(a) => {
            let r = isosceles_free_search(a.grid, a.beta, a.restarts, seed).map_err(|e| match e {
                ordembed::Error::InvalidParameter(m) => Failure::Config(m),
                e => Failure::Runtime(e),
            })?;
            run.write_points("points.csv", &r.points)?;
            run.write_json(
                "search.json",
                &json!({"size": r.nodes.len(), "nodes": r.nodes, "hausdorff": r.hausdorff}),
            )?;
            println!("size {} hausdorff {:.4}", r.nodes.len(), r.hausdorff);
            Ok(json!({"grid": a.grid, "beta": a.beta, "restarts": a.restarts}))
        }
        Command::Plot(a) => {
            let f = fs::File::open(&a.summary)
                .map_err(|e| Failure::Config(format!("{}: {e}", a.summary.display())))?;
            let rows = read_summary_csv(f)?;
            let mut modes: Vec<SamplingMode> = rows.iter().map(|r| r.mode).collect();
            modes.dedup();
            for mode in modes {
                let sub: Vec<_> = rows.iter().filter(|r| r.mode == mode).cloned().collect();
                let svg = summary_chart(&sub, &format!("mean max displacement, {}", mode.as_str())).to_svg();
                run.write(&format!("{}.svg", mode.as_str()), svg.as_bytes())?;
            }
            Ok(json!({"summary": a.summary}))
        }
    }
}

/// `n` points in [0,1] with 0 and 1 included and the rest uniform.
fn pinned_interval_sample<R: Rng>(n: usize, rng: &mut R) -> CliResult<PointConfig> {
    if n < 3 {
        return Err(Failure::Config("n must be at least 3".into()));
    }
    let mut v = vec![0.0, 1.0];
    v.extend((2..n).map(|_| rng.gen::<f64>()));
    Ok(PointConfig::from_1d(&v))
}

fn repeat_charts(s: &ordembed::experiments::RepeatedEmbedding) -> [Chart; 3] {
    let per_run = s
        .displacements
        .iter()
        .enumerate()
        .map(|(r, row)| Series {
            label: format!("run {r}"),
            points: row.iter().enumerate().map(|(i, &v)| (i as f64, v, v, v)).collect(),
        })
        .collect();
    let bars = |label: &str, pts: Vec<(f64, f64)>| Series {
        label: label.into(),
        points: pts.into_iter().map(|(x, y)| (x, y, y, y)).collect(),
    };
    [
        Chart {
            title: "displacement per point, one line per run".into(),
            x_label: "point index".into(),
            y_label: "displacement".into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Linear,
            style: Style::Lines,
            series: per_run,
        },
        Chart {
            title: "how often each point moved most".into(),
            x_label: "point index".into(),
            y_label: "runs".into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Linear,
            style: Style::Bars,
            series: vec![bars(
                "argmax",
                s.argmax_counts.iter().enumerate().map(|(i, &c)| (i as f64, c as f64)).collect(),
            )],
        },
        Chart {
            title: "largest displacement of each run".into(),
            x_label: "run".into(),
            y_label: "max displacement".into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Linear,
            style: Style::Bars,
            series: vec![bars(
                "max",
                s.run_max.iter().enumerate().map(|(i, &m)| (i as f64, m)).collect(),
            )],
        },
    ]
}
