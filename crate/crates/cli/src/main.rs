//! `isoblock`: isotonic regression on lattices, point clouds and DAGs.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 capacity/guard error,
//! 3 search exhaustion.

use clap::{Args, Parser, Subcommand};
use isoblock::block::{self, EstimatorKind};
use isoblock::graph;
use isoblock::io::{self, fmt_sig6};
use isoblock::lattice::{CompressedGrid, Field, LatticeShape, PointCloud, PrefixTable};
use isoblock::rates::{block_upper_rate, minimax_lower_rate, RateQuery};
use isoblock::sim::{
    monte_carlo, reference_table, reproduce, ExperimentId, ExperimentSpec, NoiseModel, RiskReport,
};
use isoblock::solver::{certificate_lattice, lse_dag, lse_lattice, SolveOptions};
use isoblock::IsoError;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Fixed default seed; all randomness flows from `--seed`, never the clock.
const DEFAULT_SEED: u64 = 4;

#[derive(Parser)]
#[command(
    name = "isoblock",
    about = "Block max-min/min-max/mid and least-squares isotonic regression, \
             with a Monte Carlo harness and risk-rate tables",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// RNG seed; reruns with the same seed are byte-identical.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads for replications (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Output format for reports: csv, json or both.
    #[arg(long, default_value = "both")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Fit estimators to a field or point-cloud CSV file.
    Fit {
        #[command(flatten)]
        common: CommonOpts,
        /// Input data: a field CSV (dims= header) or point-cloud CSV.
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated estimator kinds: lse, maxmin, minmax, mid.
        #[arg(long, default_value = "lse,maxmin,minmax,mid")]
        estimators: String,
        /// Solver tolerance (max-norm change per sweep).
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Monte Carlo risk comparison for one experiment.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        /// Experiment id: I, II, III, IV, V, VI, VII or VIIb.
        #[arg(long)]
        experiment: String,
        /// Number of replications.
        #[arg(long, default_value_t = 500)]
        reps: usize,
        /// Comma-separated estimator kinds (a pair gives a paired test).
        #[arg(long, default_value = "lse,maxmin")]
        estimators: String,
        /// Noise scale.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Run the full experiment suite and compare with the bundled reference
    /// results.
    Reproduce {
        #[command(flatten)]
        common: CommonOpts,
        /// Number of replications (at least 100; the reference used 5000).
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Emit a CSV of lower and upper risk-rate values across a range of
    /// range-to-noise ratios.
    Rates {
        /// Loss exponent q >= 1.
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        /// Lattice sides, e.g. 50x20.
        #[arg(long)]
        dims: String,
        /// Noise scale.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Smallest range-to-noise ratio of the grid.
        #[arg(long)]
        delta_min: Option<f64>,
        /// Largest range-to-noise ratio of the grid.
        #[arg(long)]
        delta_max: Option<f64>,
        /// Number of log-spaced grid points.
        #[arg(long, default_value_t = 30)]
        delta_grid: usize,
        /// Output file (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load a DAG file, fit the least-squares values two ways and report the
    /// agreement (vertex cap via ISOBLOCK_MAX_V, default 20).
    GraphDemo {
        #[command(flatten)]
        common: CommonOpts,
        /// DAG text file: vertex count, `a b` edges, `obs v y` lines.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Search for a response field where the max-min and min-max estimates
    /// disagree at a design site.
    CounterexampleSearch {
        #[command(flatten)]
        common: CommonOpts,
        /// Lattice sides, e.g. 4x2.
        #[arg(long, default_value = "4x2")]
        dims: String,
        /// Number of random fields to try.
        #[arg(long, default_value_t = 100_000)]
        budget: usize,
        /// Minimal gap between the branch values to accept a witness.
        #[arg(long, default_value_t = 1e-9)]
        gap: f64,
    },
}

/// Process failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: 1, message: msg.into() }
    }
    fn exhausted(msg: impl Into<String>) -> Self {
        Failure { code: 3, message: msg.into() }
    }
}

impl From<IsoError> for Failure {
    fn from(e: IsoError) -> Self {
        let code = match &e {
            IsoError::Capacity(_) => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help and version requests are successes, everything else is a
            // usage error (exit 1).
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn setup(common: &CommonOpts) -> Result<(), Failure> {
    if !matches!(common.format.as_str(), "csv" | "json" | "both") {
        return Err(Failure::usage(format!(
            "--format must be csv, json or both, got {:?}",
            common.format
        )));
    }
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&common.out_dir)?;
    Ok(())
}

fn parse_kinds(s: &str) -> Result<Vec<EstimatorKind>, Failure> {
    let kinds: Result<Vec<EstimatorKind>, IsoError> =
        s.split(',').map(|t| EstimatorKind::parse(t.trim())).collect();
    let kinds = kinds?;
    if kinds.is_empty() {
        return Err(Failure::usage("no estimator kinds given"));
    }
    Ok(kinds)
}

fn parse_dims(s: &str) -> Result<Vec<usize>, Failure> {
    s.split('x')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Failure::usage(format!("bad dimension {t:?} in {s:?}")))
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Fit { common, input, estimators, tol } => {
            setup(&common)?;
            cmd_fit(&common, &input, &estimators, tol)
        }
        Command::Simulate { common, experiment, reps, estimators, sigma, tol } => {
            setup(&common)?;
            cmd_simulate(&common, &experiment, reps, &estimators, sigma, tol)
        }
        Command::Reproduce { common, reps, tol } => {
            setup(&common)?;
            cmd_reproduce(&common, reps, tol)
        }
        Command::Rates { q, dims, sigma, delta_min, delta_max, delta_grid, out } => {
            cmd_rates(q, &dims, sigma, delta_min, delta_max, delta_grid, out.as_deref())
        }
        Command::GraphDemo { common, input, tol } => {
            setup(&common)?;
            cmd_graph_demo(&common, &input, tol)
        }
        Command::CounterexampleSearch { common, dims, budget, gap } => {
            setup(&common)?;
            cmd_counterexample(&common, &dims, budget, gap)
        }
    }
}

fn cmd_fit(common: &CommonOpts, input: &Path, estimators: &str, tol: f64) -> Result<(), Failure> {
    let kinds = parse_kinds(estimators)?;
    match io::read_data(input)? {
        io::DataFile::Field(y) => fit_field(common, &y, &kinds, tol),
        io::DataFile::Cloud(cloud) => fit_cloud(common, &cloud, &kinds, tol),
    }
}

fn fit_field(
    common: &CommonOpts,
    y: &Field,
    kinds: &[EstimatorKind],
    tol: f64,
) -> Result<(), Failure> {
    let mut diags = Vec::new();
    let mut any_warning = false;
    for &kind in kinds {
        let t0 = std::time::Instant::now();
        let (fit, converged, sweeps) = match kind {
            EstimatorKind::MaxMin => (block::max_min_lattice(y), true, 0),
            EstimatorKind::MinMax => (block::min_max_lattice(y), true, 0),
            EstimatorKind::Mid => (block::block_mid_lattice(y), true, 0),
            EstimatorKind::Lse => {
                let opts = SolveOptions::for_shape(y.shape()).with_tol(tol);
                let r = lse_lattice(y, &opts);
                any_warning |= !r.converged;
                (r.fit, r.converged, r.sweeps)
            }
        };
        let runtime = t0.elapsed().as_secs_f64();
        let path = common.out_dir.join(format!("estimate_{}.csv", kind.name()));
        io::write_field(&path, &fit)?;
        println!("wrote {}", path.display());
        let cert = certificate_lattice(y, &fit, 50, common.seed, 1e-8);
        diags.push(serde_json::json!({
            "kind": kind.name(),
            "converged": converged,
            "sweeps": sweeps,
            "runtime_secs": runtime,
            "certificate": cert,
        }));
    }
    let diag = serde_json::json!({
        "input_sites": y.shape().len(),
        "dims": y.shape().dims(),
        "tol": tol,
        "warning_nonconverged": any_warning,
        "fits": diags,
    });
    write_text(
        &common.out_dir.join("diagnostics.json"),
        &serde_json::to_string_pretty(&diag).expect("serializable"),
    )?;
    if any_warning {
        eprintln!("warning: solver did not reach tolerance; see diagnostics.json");
    }
    Ok(())
}

fn fit_cloud(
    common: &CommonOpts,
    cloud: &PointCloud,
    kinds: &[EstimatorKind],
    tol: f64,
) -> Result<(), Failure> {
    if cloud.is_empty() {
        return Err(Failure::usage("point cloud is empty"));
    }
    let grid = CompressedGrid::build(cloud);
    let mut diags = Vec::new();
    let mut any_warning = false;
    for &kind in kinds {
        let t0 = std::time::Instant::now();
        let fitted: Vec<f64> = match kind {
            EstimatorKind::Lse => {
                // Dominance DAG over the distinct locations; coincident
                // points share one vertex so their fitted values agree, and
                // the solver weights it by its observation count.
                let n = cloud.len();
                let mut uniques: Vec<&[f64]> = Vec::new();
                let mut group = vec![0usize; n];
                for (i, p) in cloud.points().iter().enumerate() {
                    match uniques.iter().position(|u| *u == p.as_slice()) {
                        Some(g) => group[i] = g,
                        None => {
                            group[i] = uniques.len();
                            uniques.push(p);
                        }
                    }
                }
                let m = uniques.len();
                let mut edges = Vec::new();
                for a in 0..m {
                    for b in 0..m {
                        if a != b && uniques[a].iter().zip(uniques[b]).all(|(x, y)| x <= y) {
                            edges.push((a, b));
                        }
                    }
                }
                let mut obs = vec![Vec::new(); m];
                for (i, &y) in cloud.responses().iter().enumerate() {
                    obs[group[i]].push(y);
                }
                let dag = graph::Dag::new(m, edges, obs)?;
                let opts = SolveOptions { tol, max_sweeps: 200_000, certificate_check: false };
                let r = lse_dag(&dag, &opts)?;
                any_warning |= !r.converged;
                group
                    .iter()
                    .map(|&g| r.values[g].expect("all groups observed"))
                    .collect()
            }
            kind => cloud
                .points()
                .iter()
                .map(|p| block::evaluate_at(p, &grid, kind))
                .collect::<Result<_, _>>()?,
        };
        let runtime = t0.elapsed().as_secs_f64();
        let out = PointCloud::new(cloud.dim(), cloud.points().to_vec(), fitted)?;
        let path = common.out_dir.join(format!("estimate_{}.csv", kind.name()));
        std::fs::write(&path, io::cloud_to_csv(&out))?;
        println!("wrote {}", path.display());
        diags.push(serde_json::json!({
            "kind": kind.name(),
            "runtime_secs": runtime,
        }));
    }
    let diag = serde_json::json!({
        "input_points": cloud.len(),
        "dim": cloud.dim(),
        "tol": tol,
        "warning_nonconverged": any_warning,
        "fits": diags,
    });
    write_text(
        &common.out_dir.join("diagnostics.json"),
        &serde_json::to_string_pretty(&diag).expect("serializable"),
    )?;
    Ok(())
}

fn report_csv_row(report: &RiskReport) -> String {
    let d = report.diff.as_ref();
    format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        report.label,
        report.kinds.join("/"),
        fmt_sig6(report.mean[0]),
        fmt_sig6(report.sd[0]),
        report.mean.get(1).map(|&m| fmt_sig6(m)).unwrap_or_default(),
        report.sd.get(1).map(|&s| fmt_sig6(s)).unwrap_or_default(),
        d.map(|d| fmt_sig6(d.mean)).unwrap_or_default(),
        d.map(|d| fmt_sig6(d.sd)).unwrap_or_default(),
        d.map(|d| fmt_sig6(d.se)).unwrap_or_default(),
        d.map(|d| fmt_sig6(d.p_sd)).unwrap_or_default(),
    )
}

const SIMULATE_HEADER: &str =
    "experiment,est,mean_a,sd_a,mean_b,sd_b,diff_mean,diff_sd,diff_se,p\n";

fn cmd_simulate(
    common: &CommonOpts,
    experiment: &str,
    reps: usize,
    estimators: &str,
    sigma: f64,
    tol: f64,
) -> Result<(), Failure> {
    let id = ExperimentId::parse(experiment)?;
    let spec = ExperimentSpec::defaults(id);
    let kinds = parse_kinds(estimators)?;
    let noise = NoiseModel::new(sigma)?;
    let opts = SolveOptions::for_shape(&spec.dims).with_tol(tol);
    let report = monte_carlo(&spec, &noise, &kinds, reps, common.seed, &opts)?;
    if common.format != "csv" {
        write_text(
            &common.out_dir.join(format!("simulate_{}.json", id.name())),
            &serde_json::to_string_pretty(&report).expect("serializable"),
        )?;
    }
    if common.format != "json" {
        let csv = format!("{SIMULATE_HEADER}{}", report_csv_row(&report));
        write_text(
            &common.out_dir.join(format!("simulate_{}.csv", id.name())),
            &csv,
        )?;
    }
    print_report_line(&report);
    Ok(())
}

fn print_report_line(report: &RiskReport) {
    let mut line = format!("experiment {:>4}:", report.label);
    for (k, (m, s)) in report.kinds.iter().zip(report.mean.iter().zip(&report.sd)) {
        line.push_str(&format!(" {k} {m:.4} (sd {s:.4})"));
    }
    if let Some(d) = &report.diff {
        line.push_str(&format!(
            " | diff {:+.4} sd {:.4} se {:.4} p {:.4}",
            d.mean, d.sd, d.se, d.p_sd
        ));
    }
    if report.n_unconverged > 0 {
        line.push_str(&format!(" [{} unconverged]", report.n_unconverged));
    }
    println!("{line}");
}

const REPRODUCE_HEADER: &str = "experiment,lse_mean,lse_sd,block_mean,block_sd,diff_mean,diff_sd,diff_se,p_sd,p_se,ref_lse_mean,ref_lse_sd,ref_block_mean,ref_block_sd,ref_diff_mean,ref_diff_sd,ref_p,delta_lse_mean,delta_block_mean\n";

fn cmd_reproduce(common: &CommonOpts, reps: usize, tol: f64) -> Result<(), Failure> {
    if reps < 100 {
        return Err(Failure {
            code: 2,
            message: "reproduce needs --reps >= 100".into(),
        });
    }
    let opts = SolveOptions::default().with_tol(tol);
    let rows = reproduce(reps, common.seed, &opts)?;
    let mut csv = String::from(REPRODUCE_HEADER);
    let mut reports = Vec::new();
    for (report, reference) in &rows {
        let d = report.diff.as_ref().expect("paired run");
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            report.label,
            fmt_sig6(report.mean[0]),
            fmt_sig6(report.sd[0]),
            fmt_sig6(report.mean[1]),
            fmt_sig6(report.sd[1]),
            fmt_sig6(d.mean),
            fmt_sig6(d.sd),
            fmt_sig6(d.se),
            fmt_sig6(d.p_sd),
            fmt_sig6(d.p_se),
            fmt_sig6(reference.lse_mean),
            fmt_sig6(reference.lse_sd),
            fmt_sig6(reference.block_mean),
            fmt_sig6(reference.block_sd),
            fmt_sig6(reference.diff_mean),
            fmt_sig6(reference.diff_sd),
            fmt_sig6(reference.p),
            fmt_sig6(report.mean[0] - reference.lse_mean),
            fmt_sig6(report.mean[1] - reference.block_mean),
        ));
        print_report_line(report);
        reports.push(report);
    }
    write_text(&common.out_dir.join("reproduce.csv"), &csv)?;
    if common.format != "csv" {
        let json = serde_json::json!({
            "seed": common.seed,
            "reps": reps,
            "reports": reports,
            "reference": reference_table(),
        });
        write_text(
            &common.out_dir.join("reproduce.json"),
            &serde_json::to_string_pretty(&json).expect("serializable"),
        )?;
    }
    Ok(())
}

fn cmd_rates(
    q: f64,
    dims: &str,
    sigma: f64,
    delta_min: Option<f64>,
    delta_max: Option<f64>,
    delta_grid: usize,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let dims = parse_dims(dims)?;
    if delta_grid == 0 {
        return Err(Failure::usage("--delta-grid must be positive"));
    }
    let n: f64 = dims.iter().map(|&d| d as f64).product();
    let lo = delta_min.unwrap_or(0.1 / n.sqrt());
    let hi = delta_max.unwrap_or_else(|| 2.0 * dims.iter().copied().max().unwrap() as f64);
    if !(lo > 0.0 && hi >= lo) {
        return Err(Failure::usage("need 0 < delta-min <= delta-max"));
    }
    let mut csv = String::from("q,dims,delta_star,lower,upper,regime,lambda\n");
    let dims_label = dims
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x");
    for i in 0..delta_grid {
        let frac = if delta_grid == 1 { 0.0 } else { i as f64 / (delta_grid - 1) as f64 };
        let delta = lo * (hi / lo).powf(frac);
        let rq = RateQuery::new(q, dims.clone(), delta, sigma)?;
        let lower = minimax_lower_rate(&rq)?;
        let upper = block_upper_rate(&rq)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_sig6(q),
            dims_label,
            fmt_sig6(delta),
            fmt_sig6(lower.value),
            fmt_sig6(upper.value),
            upper.regime,
            fmt_sig6(upper.log_factor),
        ));
    }
    match out {
        Some(path) => write_text(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_graph_demo(common: &CommonOpts, input: &Path, tol: f64) -> Result<(), Failure> {
    let cap = std::env::var("ISOBLOCK_MAX_V")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or(graph::DEFAULT_MAX_ENUM_VERTICES);
    let dag = io::read_dag(input)?;
    let uppers = graph::enumerate_upper_sets_capped(&dag, cap)?;
    let brute = graph::lse_minimax_bruteforce_capped(&dag, cap)?;
    let opts = SolveOptions { tol, max_sweeps: 500_000, certificate_check: false };
    let fit = lse_dag(&dag, &opts)?;
    let cert = isoblock::solver::certificate_dag(&dag, &fit.values, 50, common.seed, 1e-8)?;
    let mut max_gap = 0.0f64;
    let mut rows = Vec::new();
    for v in 0..dag.n_vertices() {
        if let (Some(a), Some(b)) = (brute[v], fit.values[v]) {
            max_gap = max_gap.max((a - b).abs());
        }
        rows.push(serde_json::json!({
            "vertex": v + 1,
            "observations": dag.observations()[v].len(),
            "level_set_value": brute[v],
            "projection_value": fit.values[v],
        }));
    }
    println!(
        "graph: {} vertices, {} edges, {} observations, {} upper sets",
        dag.n_vertices(),
        dag.edges().len(),
        dag.n_observations(),
        uppers.len()
    );
    println!(
        "level-set optimum vs projection: max gap {max_gap:.3e} (solver {}, {} sweeps)",
        if fit.converged { "converged" } else { "NOT converged" },
        fit.sweeps
    );
    let json = serde_json::json!({
        "vertices": dag.n_vertices(),
        "edges": dag.edges().len(),
        "observations": dag.n_observations(),
        "upper_sets": uppers.len(),
        "max_gap": max_gap,
        "converged": fit.converged,
        "certificate": cert,
        "values": rows,
    });
    write_text(
        &common.out_dir.join("graph_demo.json"),
        &serde_json::to_string_pretty(&json).expect("serializable"),
    )?;
    Ok(())
}

/// Locate the block pair attaining each branch value at a site.
fn achieving_blocks(
    y: &Field,
    site: usize,
) -> ((Vec<usize>, Vec<usize>, f64), (Vec<usize>, Vec<usize>, f64)) {
    let shape = y.shape();
    let table = PrefixTable::build(y);
    let x = shape.multi(site);
    let top: Vec<usize> = shape.dims().iter().map(|&d| d - 1).collect();
    let bottom = vec![0usize; shape.ndim()];
    let mean = |u: &[usize], v: &[usize]| {
        table.block_sum_unchecked(u, v) / PrefixTable::block_count(u, v) as f64
    };
    // max over u <= x of min over v >= x.
    let mut best_mm = (bottom.clone(), top.clone(), f64::NEG_INFINITY);
    let mut u = bottom.clone();
    loop {
        let mut inner = (top.clone(), f64::INFINITY);
        let mut v = x.clone();
        loop {
            let m = mean(&u, &v);
            if m < inner.1 {
                inner = (v.clone(), m);
            }
            if !shape.step_in_box(&mut v, &x, &top) {
                break;
            }
        }
        if inner.1 > best_mm.2 {
            best_mm = (u.clone(), inner.0, inner.1);
        }
        if !shape.step_in_box(&mut u, &bottom, &x) {
            break;
        }
    }
    // min over v >= x of max over u <= x.
    let mut best_ml = (bottom.clone(), top.clone(), f64::INFINITY);
    let mut v = x.clone();
    loop {
        let mut inner = (bottom.clone(), f64::NEG_INFINITY);
        let mut u = bottom.clone();
        loop {
            let m = mean(&u, &v);
            if m > inner.1 {
                inner = (u.clone(), m);
            }
            if !shape.step_in_box(&mut u, &bottom, &x) {
                break;
            }
        }
        if inner.1 < best_ml.2 {
            best_ml = (inner.0, v.clone(), inner.1);
        }
        if !shape.step_in_box(&mut v, &x, &top) {
            break;
        }
    }
    (best_mm, best_ml)
}

fn cmd_counterexample(
    common: &CommonOpts,
    dims: &str,
    budget: usize,
    gap: f64,
) -> Result<(), Failure> {
    let dims = parse_dims(dims)?;
    let shape = LatticeShape::new(dims)?;
    match block::counterexample_search(&shape, common.seed, budget, gap) {
        Some((y, site, lo, hi)) => {
            let field_path = common.out_dir.join("witness_field.csv");
            io::write_field(&field_path, &y)?;
            println!("wrote {}", field_path.display());
            let ((mm_u, mm_v, mm_val), (ml_u, ml_v, ml_val)) = achieving_blocks(&y, site);
            let one = |m: &[usize]| m.iter().map(|&c| c + 1).collect::<Vec<_>>();
            let json = serde_json::json!({
                "dims": y.shape().dims(),
                "site_one_based": y.shape().one_based(site),
                "max_min": lo,
                "min_max": hi,
                "gap": hi - lo,
                "max_min_block": {"u": one(&mm_u), "v": one(&mm_v), "mean": mm_val},
                "min_max_block": {"u": one(&ml_u), "v": one(&ml_v), "mean": ml_val},
            });
            write_text(
                &common.out_dir.join("witness.json"),
                &serde_json::to_string_pretty(&json).expect("serializable"),
            )?;
            println!(
                "witness at site {:?}: max-min {lo:.6} < min-max {hi:.6} (gap {:.3e})",
                y.shape().one_based(site),
                hi - lo
            );
            Ok(())
        }
        None => Err(Failure::exhausted(format!(
            "no witness found in {budget} draws on the given lattice"
        ))),
    }
}
