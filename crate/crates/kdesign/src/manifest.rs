//! Run manifests and the `design` workflow.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::candidates::{CandidateSet, CandidateSpec};
use crate::error::{Error, Result};
use crate::herding::{HerdingState, StepPolicy};
use crate::io::{csv_bytes, fmt_f64, hex_f64, write_atomic, write_json, write_points};
use crate::kernel::Kernel;
use crate::metrics::{covering_trace, packing_trace, physical_energy};
use crate::potential::{MeasureSpec, PotentialProvider};
use crate::refine::{refine_design, RefineConfig, RefineObjective};
use crate::sequential::{coffee_house_order, sbq_design};

/// Sample size of the Monte Carlo potential used when no closed form exists.
pub const MC_POTENTIAL_SAMPLE: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Herding,
    VertexExchange,
    Sbq,
    CoffeeHouse,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Herding => "herding",
            Algorithm::VertexExchange => "vertex-exchange",
            Algorithm::Sbq => "sbq",
            Algorithm::CoffeeHouse => "coffee-house",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "herding" => Ok(Algorithm::Herding),
            "vertex-exchange" => Ok(Algorithm::VertexExchange),
            "sbq" => Ok(Algorithm::Sbq),
            "coffee-house" => Ok(Algorithm::CoffeeHouse),
            _ => Err(Error::Parse(format!("unknown algorithm '{s}'"))),
        }
    }
}

/// First design point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Candidate nearest to the centre of the cube.
    #[default]
    Center,
    /// Candidate with this index.
    Index(usize),
}

/// File names, relative to the output directory unless absolute.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub design: PathBuf,
    pub trace: PathBuf,
    pub metrics: PathBuf,
    pub summary: PathBuf,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            design: "design.csv".into(),
            trace: "trace.csv".into(),
            metrics: "metrics.csv".into(),
            summary: "summary.json".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// Kernel in the `family:key=value` grammar.
    pub kernel: String,
    pub dim: usize,
    pub candidates: CandidateSpec,
    pub algorithm: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<StepPolicy>,
    pub n_max: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub init: Init,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<RefineObjective>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl RunManifest {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn parsed_kernel(&self) -> Result<Kernel> {
        let k: Kernel = self.kernel.parse()?;
        k.check_dim(self.dim)?;
        Ok(k)
    }

    /// Checks that need no computation.
    pub fn validate(&self) -> Result<()> {
        let k = self.parsed_kernel()?;
        if self.n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be positive".into()));
        }
        match (self.algorithm, self.policy) {
            (Algorithm::Herding, Some(StepPolicy::Optimal)) if k.is_singular() => {
                Err(Error::Unsupported("optimal step with a singular kernel".into()))
            }
            (Algorithm::Herding, _) => Ok(()),
            (_, Some(p)) => Err(Error::InvalidParameter(format!("policy '{p}' only applies to herding"))),
            (Algorithm::VertexExchange | Algorithm::Sbq, None) if k.is_singular() => {
                Err(Error::Unsupported(format!("{} with a singular kernel", self.algorithm)))
            }
            _ => Ok(()),
        }?;
        if self.refine.is_some() && k.is_singular() {
            return Err(Error::Unsupported("refinement with a singular kernel".into()));
        }
        Ok(())
    }

    pub fn policy_or_default(&self) -> StepPolicy {
        self.policy.unwrap_or(StepPolicy::Harmonic)
    }
}

/// Potential of the uniform measure: closed form when available, otherwise
/// a Monte Carlo sample drawn with `seed`.
pub fn uniform_provider(kernel: &Kernel, dim: usize, seed: u64) -> Result<PotentialProvider> {
    match PotentialProvider::uniform(kernel, dim) {
        Ok(p) => Ok(p),
        Err(Error::NoClosedForm(_)) => {
            PotentialProvider::monte_carlo(kernel, MeasureSpec::UniformCube { dim }, MC_POTENTIAL_SAMPLE, seed)
        }
        Err(e) => Err(e),
    }
}

/// One row of the per-iteration trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub selected_index: usize,
    pub alpha: f64,
    pub mmd_sq: f64,
    pub cr: f64,
    pub pr: f64,
}

pub const TRACE_HEADER: [&str; 6] = ["n", "selected_index", "alpha", "mmd_sq", "cr", "pr"];

pub fn trace_csv(rows: &[TraceRow]) -> Result<Vec<u8>> {
    let header: Vec<String> = TRACE_HEADER.iter().map(|s| s.to_string()).collect();
    csv_bytes(
        &header,
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.selected_index.to_string(),
                fmt_f64(r.alpha),
                fmt_f64(r.mmd_sq),
                fmt_f64(r.cr),
                fmt_f64(r.pr),
            ]
        }),
    )
}

/// Bit-exact copies of the headline numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HexValues {
    pub mmd_sq: String,
    pub cr: String,
    pub pr: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub kernel: String,
    pub algorithm: Algorithm,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<StepPolicy>,
    pub n: usize,
    pub iterations: usize,
    pub candidates: usize,
    pub mmd_sq: f64,
    pub cr: f64,
    pub pr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined: Option<RefinedSummary>,
    pub runtime_s: f64,
    pub hex: HexValues,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinedSummary {
    pub objective: RefineObjective,
    pub initial: f64,
    pub last: f64,
    pub evaluations: usize,
    pub cr_before: f64,
    pub pr_before: f64,
}

/// Everything a run produces, before it is written out.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub design: crate::PointSet,
    pub design_indices: Vec<usize>,
    pub trace: Vec<TraceRow>,
    pub summary: RunSummary,
    pub physical_energy: Option<f64>,
}

/// Empirical `E_K(xi_{n,e} - mu)` of every prefix of `idx`.
fn empirical_mmd_trace(kernel: &Kernel, c: &crate::PointSet, p_mu: &[f64], e_mu: f64, idx: &[usize]) -> Vec<f64> {
    let mut pair = 0.0;
    let mut lin = 0.0;
    let mut out = Vec::with_capacity(idx.len());
    for (k, &i) in idx.iter().enumerate() {
        let x = c.row(i);
        pair += kernel.diag(x);
        for &j in &idx[..k] {
            pair += 2.0 * kernel.value(x, c.row(j));
        }
        lin += p_mu[i];
        let n = (k + 1) as f64;
        out.push(pair / (n * n) - 2.0 * lin / n + e_mu);
    }
    out
}

/// Execute a manifest without touching the file system.
pub fn execute(m: &RunManifest) -> Result<RunOutput> {
    let start = Instant::now();
    m.validate()?;
    let kernel = m.parsed_kernel()?;
    let cand = CandidateSet::build(&m.candidates, m.dim)?;
    let pts = cand.points;
    let provider = uniform_provider(&kernel, m.dim, m.seed)?;
    let first = match m.init {
        Init::Center => pts.nearest(&vec![0.5; m.dim]).ok_or(Error::Empty("candidate set"))?,
        Init::Index(i) if i < pts.len() => i,
        Init::Index(i) => return Err(Error::InvalidParameter(format!("initial index {i} out of range"))),
    };
    if m.n_max > pts.len() {
        return Err(Error::InvalidParameter(format!("n_max = {} exceeds the {} candidates", m.n_max, pts.len())));
    }
    // (iteration, selected index, alpha, mmd_sq, support size after the step)
    let mut steps: Vec<(usize, f64, f64, usize)> = Vec::new();
    let (order, iterations) = match m.algorithm {
        Algorithm::Herding | Algorithm::VertexExchange => {
            let mut st = HerdingState::new(&kernel, pts.clone(), &provider, &[first])?;
            steps.push((first, 1.0, st.mmd_sq(), 1));
            let cap = 100 * m.n_max;
            let mut support = 1;
            while support < m.n_max && steps.len() < cap {
                if m.algorithm == Algorithm::Herding {
                    let rec = st.step(m.policy_or_default())?;
                    steps.push((rec.index, rec.alpha, 0.0, 0));
                } else {
                    let rec = st.exchange_step()?;
                    if rec.converged {
                        break;
                    }
                    steps.push((rec.plus, rec.alpha, 0.0, 0));
                }
                support = st.support_order().len();
                let last = steps.last_mut().expect("just pushed");
                last.2 = st.mmd_sq();
                last.3 = support;
            }
            (st.support_order(), steps.len())
        }
        Algorithm::Sbq => {
            let (idx, vars) = sbq_design(&kernel, &provider, &pts, &[first], m.n_max)?;
            let e = provider.energy();
            let p0 = provider.potential_unchecked(pts.row(first));
            let v0 = kernel.diag(pts.row(first)) - 2.0 * p0 + e;
            steps.push((first, 1.0, v0, 1));
            for (k, (&i, &v)) in idx[1..].iter().zip(&vars).enumerate() {
                steps.push((i, f64::NAN, v, k + 2));
            }
            (idx, steps.len())
        }
        Algorithm::CoffeeHouse => {
            let ord = coffee_house_order(&pts, pts.row(first))?;
            let idx: Vec<usize> = ord[..m.n_max].to_vec();
            let p_mu = provider.potentials(&pts.select(&idx));
            let mut p_all = vec![0.0; pts.len()];
            for (k, &i) in idx.iter().enumerate() {
                p_all[i] = p_mu[k];
            }
            let mmd = empirical_mmd_trace(&kernel, &pts, &p_all, provider.energy(), &idx);
            for (k, (&i, v)) in idx.iter().zip(mmd).enumerate() {
                steps.push((i, 1.0 / (k + 1) as f64, v, k + 1));
            }
            (idx, steps.len())
        }
    };
    let design = pts.select(&order);
    let crs = covering_trace(&design, &pts)?;
    let prs = packing_trace(&design);
    let trace: Vec<TraceRow> = steps
        .iter()
        .enumerate()
        .map(|(k, &(i, a, mmd, s))| TraceRow {
            n: k + 1,
            selected_index: i,
            alpha: a,
            mmd_sq: mmd,
            cr: crs[s - 1],
            pr: if s > 1 { prs[s - 1] } else { f64::NAN },
        })
        .collect();
    let last = *trace.last().expect("trace has the initial point");
    let mut summary = RunSummary {
        kernel: kernel.to_string(),
        algorithm: m.algorithm,
        policy: if m.algorithm == Algorithm::Herding { Some(m.policy_or_default()) } else { None },
        n: design.len(),
        iterations,
        candidates: pts.len(),
        mmd_sq: last.mmd_sq,
        cr: last.cr,
        pr: last.pr,
        refined: None,
        runtime_s: 0.0,
        hex: HexValues { mmd_sq: String::new(), cr: String::new(), pr: String::new() },
    };
    let mut design = design;
    if let Some(obj) = m.refine {
        let r = refine_design(&kernel, &provider, provider.energy(), &design, &RefineConfig::new(obj))?;
        let (cr_before, pr_before) = (summary.cr, summary.pr);
        design = r.design;
        summary.cr = crate::metrics::covering_radius(&design, &pts)?;
        summary.pr = if design.len() > 1 { crate::metrics::packing_radius(&design)? } else { f64::NAN };
        summary.refined = Some(RefinedSummary {
            objective: obj,
            initial: r.initial,
            last: r.last,
            evaluations: r.evaluations,
            cr_before,
            pr_before,
        });
    }
    let physical = if kernel.is_singular() && design.len() > 1 { Some(physical_energy(&design, &kernel)?) } else { None };
    summary.hex = HexValues { mmd_sq: hex_f64(summary.mmd_sq), cr: hex_f64(summary.cr), pr: hex_f64(summary.pr) };
    summary.runtime_s = start.elapsed().as_secs_f64();
    Ok(RunOutput { design, design_indices: order, trace, summary, physical_energy: physical })
}

pub const METRICS_HEADER: [&str; 6] = ["design_id", "n", "cr", "cr_exact", "pr", "physical_energy"];

/// One metrics CSV row.
pub fn metrics_row(id: &str, n: usize, cr: f64, pr: f64, physical: Option<f64>) -> Vec<String> {
    vec![
        id.to_string(),
        n.to_string(),
        fmt_f64(cr),
        "false".into(),
        fmt_f64(pr),
        physical.map(fmt_f64).unwrap_or_default(),
    ]
}

pub fn metrics_csv(rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let header: Vec<String> = METRICS_HEADER.iter().map(|s| s.to_string()).collect();
    csv_bytes(&header, rows)
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

/// Execute and write the four artifacts under `out_dir`.
pub fn run(m: &RunManifest, out_dir: &Path) -> Result<RunSummary> {
    let out = execute(m)?;
    let o = &m.outputs;
    write_points(&resolve(out_dir, &o.design), &out.design)?;
    write_atomic(&resolve(out_dir, &o.trace), &trace_csv(&out.trace)?)?;
    let s = &out.summary;
    let row = metrics_row("design", s.n, s.cr, s.pr, out.physical_energy);
    write_atomic(&resolve(out_dir, &o.metrics), &metrics_csv(vec![row])?)?;
    write_json(&resolve(out_dir, &o.summary), s)?;
    Ok(out.summary)
}
