use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kdesign::bounds::BoundSetup;
use kdesign::candidates::{centred_grid, CandidateSet};
use kdesign::herding::StepPolicy;
use kdesign::io::{csv_bytes, fmt_f64, hex_f64, read_numeric, read_points, write_atomic, write_json, write_measure, write_points};
use kdesign::kl::{c_optimal_measure, extract_exact_design, BayesModel, COptimalConfig, KlBasis, KlHeader, StopReason};
use kdesign::manifest::{metrics_csv, metrics_row, run, uniform_provider, Algorithm, RunManifest};
use kdesign::metrics::{covering_radius, covering_trace, packing_radius, packing_trace, physical_energy, Lemma};
use kdesign::quadrature::{GramBundle, QuadratureSolution};
use kdesign::sobol::sobol;
use kdesign::{Error, Kernel, PointSet, Result};

#[derive(Parser, Debug)]
#[command(name = "kdesign", version, about = "Space-filling designs and Bayesian quadrature by kernel discrepancy")]
struct Cli {
    /// Seed for Monte Carlo potentials (overrides the manifest value).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Unconstrained,
    SumToOne,
    Bordered,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a design from a run manifest.
    Design {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Quadrature weights of a design for the uniform measure.
    Weights {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        kernel: String,
        #[arg(long, value_enum, default_value = "bordered")]
        mode: Mode,
        #[arg(long, default_value = "weights.json")]
        out: PathBuf,
    },
    /// Covering and packing radii of one or more designs.
    Metrics {
        #[arg(long, required = true, num_args = 1..)]
        design: Vec<PathBuf>,
        /// Evaluation set for the covering radius (default: Sobol points).
        #[arg(long)]
        eval: Option<PathBuf>,
        #[arg(long, default_value_t = 4096)]
        eval_sobol: usize,
        /// Kernel for the physical energy of singular kernels.
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long, default_value = "metrics.csv")]
        out: PathBuf,
    },
    /// Prefix-by-prefix efficiencies CR(a)/CR(b) and PR(b)/PR(a).
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        eval: Option<PathBuf>,
        #[arg(long, default_value_t = 4096)]
        eval_sobol: usize,
        #[arg(long, default_value = "compare.csv")]
        out: PathBuf,
    },
    /// Replay a herding trace against its convergence bound.
    BoundsCheck {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Bound to check (default: the one matching the manifest's policy).
        #[arg(long)]
        lemma: Option<String>,
        #[arg(long, default_value = "bounds.csv")]
        out: PathBuf,
    },
    /// Bayesian c-optimal design for the integral from a truncated eigen-expansion.
    KlDesign {
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        dim: usize,
        /// Quadrature grid points per axis.
        #[arg(long, default_value_t = 100)]
        grid: usize,
        /// Number of model terms M (constant plus M-1 eigenfunctions).
        #[arg(long, default_value_t = 15)]
        terms: usize,
        /// Projected number of observations.
        #[arg(long, default_value_t = 15.0)]
        m: f64,
        /// Candidate grid points per axis (cell centres).
        #[arg(long, default_value_t = 32)]
        candidates: usize,
        /// Extract an exact design of this size.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn out_path(cli: &Cli, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        cli.out_dir.join(p)
    }
}

fn eval_set(file: &Option<PathBuf>, sobol_points: usize, dim: usize) -> Result<PointSet> {
    match file {
        Some(f) => read_points(f),
        None => sobol(dim, sobol_points, 0),
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Design { manifest } => {
            let mut m = RunManifest::load(manifest)?;
            if let Some(s) = cli.seed {
                m.seed = s;
            }
            let s = run(&m, &cli.out_dir)?;
            println!("n={} cr={} pr={} mmd_sq={} runtime_s={:.3}", s.n, fmt_f64(s.cr), fmt_f64(s.pr), fmt_f64(s.mmd_sq), s.runtime_s);
            Ok(())
        }
        Command::Weights { design, kernel, mode, out } => weights(cli, design, kernel, *mode, out),
        Command::Metrics { design, eval, eval_sobol, kernel, out } => metrics(cli, design, eval, *eval_sobol, kernel, out),
        Command::Compare { a, b, eval, eval_sobol, out } => compare(cli, a, b, eval, *eval_sobol, out),
        Command::BoundsCheck { manifest, trace, lemma, out } => bounds_check(cli, manifest, trace, lemma, out),
        Command::KlDesign { kernel, dim, grid, terms, m, candidates, n, max_iter, tol } => {
            let cfg = COptimalConfig { max_iter: *max_iter, tol: *tol, ..COptimalConfig::default() };
            kl_design(cli, kernel, *dim, *grid, *terms, *m, *candidates, *n, &cfg)
        }
    }
}

#[derive(Serialize)]
struct WeightsReport {
    kernel: String,
    #[serde(flatten)]
    solution: QuadratureSolution,
    weights_hex: Vec<String>,
    variance_hex: String,
}

fn weights(cli: &Cli, design: &Path, kernel: &str, mode: Mode, out: &Path) -> Result<()> {
    let pts = read_points(design)?;
    let k: Kernel = kernel.parse()?;
    k.check_dim(pts.dim())?;
    let provider = uniform_provider(&k, pts.dim(), cli.seed.unwrap_or(0))?;
    let b = GramBundle::assemble(&k, &pts, &provider, provider.energy())?;
    let solution = match mode {
        Mode::Unconstrained => b.unconstrained()?,
        Mode::SumToOne => b.sum_to_one()?,
        Mode::Bordered => b.bordered()?,
    };
    let report = WeightsReport {
        kernel: k.to_string(),
        weights_hex: solution.weights.iter().map(|w| hex_f64(*w)).collect(),
        variance_hex: hex_f64(solution.variance),
        solution,
    };
    write_json(&out_path(cli, out), &report)?;
    println!("variance={}", fmt_f64(report.solution.variance));
    Ok(())
}

fn metrics(cli: &Cli, designs: &[PathBuf], eval: &Option<PathBuf>, eval_sobol: usize, kernel: &Option<String>, out: &Path) -> Result<()> {
    let k: Option<Kernel> = kernel.as_deref().map(str::parse).transpose()?;
    let mut rows = Vec::new();
    for path in designs {
        let pts = read_points(path)?;
        let e = eval_set(eval, eval_sobol, pts.dim())?;
        let cr = covering_radius(&pts, &e)?;
        let pr = if pts.len() > 1 { packing_radius(&pts)? } else { f64::NAN };
        let phys = match &k {
            Some(k) if k.is_singular() => Some(physical_energy(&pts, k)?),
            _ => None,
        };
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        println!("{id}: n={} cr={} pr={}", pts.len(), fmt_f64(cr), fmt_f64(pr));
        rows.push(metrics_row(&id, pts.len(), cr, pr, phys));
    }
    write_atomic(&out_path(cli, out), &metrics_csv(rows)?)
}

fn compare(cli: &Cli, a: &Path, b: &Path, eval: &Option<PathBuf>, eval_sobol: usize, out: &Path) -> Result<()> {
    let xa = read_points(a)?;
    let xb = read_points(b)?;
    if xa.dim() != xb.dim() {
        return Err(Error::DimensionMismatch { expected: xa.dim(), got: xb.dim() });
    }
    let e = eval_set(eval, eval_sobol, xa.dim())?;
    let n = xa.len().min(xb.len());
    let (ca, cb) = (covering_trace(&xa.prefix(n), &e)?, covering_trace(&xb.prefix(n), &e)?);
    let (pa, pb) = (packing_trace(&xa.prefix(n)), packing_trace(&xb.prefix(n)));
    let header: Vec<String> =
        ["n", "cr_a", "cr_b", "pr_a", "pr_b", "cr_efficiency", "pr_efficiency"].iter().map(|s| s.to_string()).collect();
    let rows = (1..n).map(|i| {
        vec![
            (i + 1).to_string(),
            fmt_f64(ca[i]),
            fmt_f64(cb[i]),
            fmt_f64(pa[i]),
            fmt_f64(pb[i]),
            fmt_f64(ca[i] / cb[i]),
            fmt_f64(pb[i] / pa[i]),
        ]
    });
    write_atomic(&out_path(cli, out), &csv_bytes(&header, rows)?)?;
    if n > 1 {
        println!("n={n} cr_efficiency={} pr_efficiency={}", fmt_f64(ca[n - 1] / cb[n - 1]), fmt_f64(pb[n - 1] / pa[n - 1]));
    }
    Ok(())
}

fn default_lemma(m: &RunManifest) -> Result<Lemma> {
    match (m.algorithm, m.policy_or_default()) {
        (Algorithm::VertexExchange, _) => Ok(Lemma::VertexExchange),
        (Algorithm::Herding, StepPolicy::Harmonic) => Ok(Lemma::Harmonic),
        (Algorithm::Herding, StepPolicy::TwoOverNPlus3) => Ok(Lemma::TwoOverNPlus3),
        (Algorithm::Herding, StepPolicy::Optimal) => Ok(Lemma::Optimal),
        (a, p) => Err(Error::Unsupported(format!("no bound for {a} with policy {p}; pass --lemma"))),
    }
}

fn bounds_check(cli: &Cli, manifest: &Path, trace: &Path, lemma: &Option<String>, out: &Path) -> Result<()> {
    let m = RunManifest::load(manifest)?;
    let lemma = match lemma {
        Some(l) => l.parse()?,
        None => default_lemma(&m)?,
    };
    let k = m.parsed_kernel()?;
    let cand = CandidateSet::build(&m.candidates, m.dim)?;
    let provider = uniform_provider(&k, m.dim, cli.seed.unwrap_or(m.seed))?;
    let (header, table) = read_numeric(trace)?;
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Parse(format!("trace has no '{name}' column")))
    };
    let (ci, ca) = (col("selected_index")?, col("alpha")?);
    let steps: Vec<(usize, f64)> = table.iter().map(|r| (r[ci] as usize, r[ca])).collect();
    let setup = BoundSetup::new(&k, &provider, &cand.points)?;
    let rows = setup.check(&steps, lemma)?;
    let header: Vec<String> = ["n", "value", "bound", "pass"].iter().map(|s| s.to_string()).collect();
    let body = rows.iter().map(|r| vec![r.n.to_string(), fmt_f64(r.value), fmt_f64(r.bound), r.pass.to_string()]);
    write_atomic(&out_path(cli, out), &csv_bytes(&header, body)?)?;
    let bad = rows.iter().filter(|r| !r.pass).count();
    println!(
        "lemma={lemma} checked={} violations={bad} lambda_max={} optimal_weights_in_simplex={}",
        rows.len(),
        fmt_f64(setup.inputs().lambda_max),
        setup.w_hat_in_simplex()
    );
    Ok(())
}

#[derive(Serialize)]
struct KlSummary {
    basis: KlHeader,
    m: f64,
    candidates: usize,
    criterion: f64,
    criterion_hex: String,
    iterations: usize,
    stop: StopReason,
    min_derivative: f64,
    support: usize,
    floored_candidates: usize,
    min_residual_variance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    extracted: Option<usize>,
    runtime_s: f64,
}

#[allow(clippy::too_many_arguments)]
fn kl_design(
    cli: &Cli,
    kernel: &str,
    dim: usize,
    grid: usize,
    terms: usize,
    m: f64,
    per_axis: usize,
    n: Option<usize>,
    cfg: &COptimalConfig,
) -> Result<()> {
    let start = std::time::Instant::now();
    let k: Kernel = kernel.parse()?;
    let basis = KlBasis::nystrom(&k, dim, grid, terms)?;
    let cand = centred_grid(dim, per_axis)?;
    let model = BayesModel::new(&basis, &cand, m)?;
    let res = c_optimal_measure(&model, cfg)?;
    let support = res.support();
    let sup_pts = cand.select(&support);
    let sup_w: Vec<f64> = support.iter().map(|&i| res.weights[i]).collect();
    write_measure(&out_path(cli, Path::new("measure.csv")), &sup_pts, &sup_w)?;
    let trace_rows = res.trace.iter().enumerate().map(|(i, f)| vec![i.to_string(), fmt_f64(*f)]);
    write_atomic(
        &out_path(cli, Path::new("criterion.csv")),
        &csv_bytes(&["iteration".to_string(), "criterion".to_string()], trace_rows)?,
    )?;
    if let Some(n) = n {
        let idx = extract_exact_design(&cand, &res.weights, n)?;
        write_points(&out_path(cli, Path::new("design.csv")), &cand.select(&idx))?;
    }
    let summary = KlSummary {
        basis: basis.header(),
        m,
        candidates: cand.len(),
        criterion: res.criterion(),
        criterion_hex: hex_f64(res.criterion()),
        iterations: res.iterations,
        stop: res.stop,
        min_derivative: res.min_derivative,
        support: support.len(),
        floored_candidates: model.floored().iter().filter(|f| **f).count(),
        min_residual_variance: model.min_v_raw(),
        extracted: n,
        runtime_s: start.elapsed().as_secs_f64(),
    };
    write_json(&out_path(cli, Path::new("kl_summary.json")), &summary)?;
    println!(
        "stop={:?} iterations={} support={} criterion={}",
        res.stop,
        res.iterations,
        support.len(),
        fmt_f64(res.criterion())
    );
    if !res.converged() {
        return Err(Error::Degenerate(format!("stopping rule not met ({:?})", res.stop)));
    }
    Ok(())
}
