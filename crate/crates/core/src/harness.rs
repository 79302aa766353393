//! End-to-end pricing runs and the experiment drivers built on them.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::geometry::{evaluate_solution, generate_nodes, NodeSet, SolutionEvaluator};
use crate::models::{builtin, BcKind, ProblemSpec};
use crate::numerics::GmresConfig;
use crate::rbffd::{self, FdConfig, FdEvaluator};
use crate::rbfpum::{self, PumConfig, PumEvaluator};
use crate::stepper::{build_time_grid, integrate, SparseSystem, StepRecord, StepperOptions};
use crate::{Error, Result};

/// Smallest spot-axis resolution accepted by the drivers.
pub const MIN_NS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    RbfFd,
    RbfPum,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::RbfFd => "rbffd",
            Method::RbfPum => "rbfpum",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rbffd" | "rbf-fd" | "fd" => Ok(Method::RbfFd),
            "rbfpum" | "rbf-pum" | "pum" => Ok(Method::RbfPum),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Settings shared by every run of a study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Time steps; `2 N_s` when absent.
    pub nt: Option<usize>,
    pub workers: usize,
    /// RBF-FD settings; the per-dimension defaults when absent.
    pub fd: Option<FdConfig>,
    pub pum: PumConfig,
    pub gmres: GmresConfig,
    pub warm_start: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            nt: None,
            workers: 1,
            fd: None,
            pum: PumConfig::default(),
            gmres: GmresConfig::default(),
            warm_start: true,
        }
    }
}

/// Contents of a configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Replaces the built-in problem named on the command line.
    pub problem: Option<ProblemSpec>,
    pub solver: SolverOptions,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(p) = &cfg.problem {
            p.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRequest {
    pub problem: ProblemSpec,
    pub method: Method,
    pub ns: usize,
    pub options: SolverOptions,
}

impl RunRequest {
    pub fn new(problem: ProblemSpec, method: Method, ns: usize) -> Self {
        Self {
            problem,
            method,
            ns,
            options: SolverOptions::default(),
        }
    }

    pub fn builtin(name: &str, method: Method, ns: usize) -> Result<Self> {
        Ok(Self::new(builtin(name)?, method, ns))
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    pub fn time_steps(&self) -> usize {
        self.options.nt.unwrap_or(2 * self.ns)
    }

    /// `N_s x N_s/2 [x N_s/2]` nodes.
    pub fn node_counts(&self) -> Vec<usize> {
        let mut counts = vec![self.ns / 2; self.problem.dim()];
        counts[0] = self.ns;
        counts
    }

    fn validate(&self) -> Result<()> {
        if self.ns < MIN_NS {
            return Err(Error::InvalidResolution(format!(
                "N_s must be at least {MIN_NS}, got {}",
                self.ns
            )));
        }
        if self.options.workers == 0 {
            return Err(Error::InvalidParameters("worker count must be positive".into()));
        }
        self.problem.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub problem: String,
    pub method: Method,
    pub ns: usize,
    pub nodes: usize,
    pub nt: usize,
    pub workers: usize,
    /// Option values at the problem's evaluation points.
    pub values: Vec<f64>,
    /// Max-norm error over the evaluation points, when reference values exist.
    pub error: Option<f64>,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
    pub gmres_iterations: usize,
    pub max_residual: f64,
    pub nnz: usize,
    pub factorizations: usize,
    pub steps: Vec<StepRecord>,
}

impl SolveReport {
    pub fn total_seconds(&self) -> f64 {
        self.assembly_seconds + self.solve_seconds
    }

    /// Summary as a one-row CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["problem", "method", "ns", "nodes", "nt", "workers"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((0..self.values.len()).map(|i| format!("value_{i}")));
        header.extend(
            ["error", "assembly_s", "solve_s", "gmres_iterations", "max_residual", "nnz"]
                .iter()
                .map(|s| s.to_string()),
        );
        w.write_record(&header)?;
        let mut row = vec![
            self.problem.clone(),
            self.method.to_string(),
            self.ns.to_string(),
            self.nodes.to_string(),
            self.nt.to_string(),
            self.workers.to_string(),
        ];
        row.extend(self.values.iter().map(f64::to_string));
        row.push(self.error.map(|e| e.to_string()).unwrap_or_default());
        row.extend([
            self.assembly_seconds.to_string(),
            self.solve_seconds.to_string(),
            self.gmres_iterations.to_string(),
            self.max_residual.to_string(),
            self.nnz.to_string(),
        ]);
        w.write_record(&row)?;
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} {} N_s={} N={} N_t={} workers={}",
            self.problem, self.method, self.ns, self.nodes, self.nt, self.workers
        )?;
        let vals: Vec<String> = self.values.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(f, "values: {}", vals.join("  "))?;
        if let Some(e) = self.error {
            writeln!(f, "max error: {e:.3e}")?;
        }
        write!(
            f,
            "assembly {:.3}s, solve {:.3}s, {} GMRES iterations (max residual {:.1e}), nnz {}",
            self.assembly_seconds, self.solve_seconds, self.gmres_iterations, self.max_residual, self.nnz
        )
    }
}

fn max_error(values: &[f64], reference: &[f64]) -> f64 {
    values
        .iter()
        .zip(reference)
        .map(|(v, r)| (v - r).abs())
        .fold(0.0, f64::max)
}

fn assemble(
    req: &RunRequest,
    nodes: &NodeSet,
) -> Result<(SparseSystem, Box<dyn SolutionEvaluator + Send + Sync>)> {
    let spec = &req.problem;
    match req.method {
        Method::RbfFd => {
            let cfg = req.options.fd.unwrap_or_else(|| FdConfig::for_dim(spec.dim()));
            let system = rbffd::assemble_system(nodes, spec, &cfg)?;
            Ok((system, Box::new(FdEvaluator::new(nodes.clone(), cfg))))
        }
        Method::RbfPum => {
            let cfg = req.options.pum;
            let cover = rbfpum::build_cover(nodes, &cfg)?;
            let system = rbfpum::assemble_system(nodes, &cover, spec, &cfg)?;
            let kernel = cfg.kernel(nodes);
            Ok((
                system,
                Box::new(PumEvaluator::new(nodes.clone(), cover, kernel, cfg.pivot_tolerance)),
            ))
        }
    }
}

/// Nodes, assembly on `workers` threads, time integration and evaluation.
pub fn price(req: &RunRequest) -> Result<SolveReport> {
    req.validate()?;
    let spec = &req.problem;
    let nodes = generate_nodes(&spec.domain, &req.node_counts())?;
    let grid = build_time_grid(spec.maturity(), req.time_steps())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(req.options.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let start = Instant::now();
    let (system, evaluator) = pool.install(|| assemble(req, &nodes))?;
    let assembly_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let u0: Vec<f64> = nodes.points().map(|x| spec.payoff(x)).collect();
    let boundary = |k: usize, tau: f64| match spec.node_condition(nodes.tag(k), tau, nodes.point(k)) {
        Some(BcKind::Dirichlet(v)) => v,
        _ => 0.0,
    };
    let stepper = StepperOptions {
        gmres: req.options.gmres,
        warm_start: req.options.warm_start,
    };
    let run = integrate(&system, &grid, &u0, boundary, &stepper)?;
    let values = evaluate_solution(evaluator.as_ref(), &run.u, &spec.evaluation_points())?;
    let solve_seconds = start.elapsed().as_secs_f64();

    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite option value {bad}")));
    }
    let error = spec.reference.as_ref().map(|r| max_error(&values, r));
    Ok(SolveReport {
        problem: spec.name.clone(),
        method: req.method,
        ns: req.ns,
        nodes: nodes.len(),
        nt: grid.len(),
        workers: req.options.workers,
        values,
        error,
        assembly_seconds,
        solve_seconds,
        gmres_iterations: run.total_iterations(),
        max_residual: run.max_residual(),
        nnz: system.operator().nnz(),
        factorizations: run.factorizations,
        steps: run.steps,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub ns: usize,
    pub nodes: usize,
    pub error: f64,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub problem: String,
    pub method: Method,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log error` against `log h` over the three
    /// finest resolutions.
    pub order: Option<f64>,
}

impl ConvergenceStudy {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["ns", "nodes", "error", "assembly_s", "solve_s"])?;
        for r in &self.rows {
            w.write_record([
                r.ns.to_string(),
                r.nodes.to_string(),
                r.error.to_string(),
                r.assembly_seconds.to_string(),
                r.solve_seconds.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Slope of the least-squares line through `(x, y)`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Convergence order from errors at spot resolutions `ns` on a spot axis of
/// length `extent`, using the finest three points.
pub fn fitted_order(extent: f64, ns: &[usize], errors: &[f64]) -> Option<f64> {
    if ns.len() < 2 || errors.iter().any(|e| !(*e > 0.0)) {
        return None;
    }
    let start = ns.len().saturating_sub(3);
    let x: Vec<f64> = ns[start..].iter().map(|&n| (extent / (n - 1) as f64).ln()).collect();
    let y: Vec<f64> = errors[start..].iter().map(|e| e.ln()).collect();
    Some(fit_slope(&x, &y))
}

fn sorted_unique(ns: &[usize]) -> Vec<usize> {
    let mut v = ns.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

pub fn convergence_study(
    problem: &ProblemSpec,
    method: Method,
    ns_list: &[usize],
    options: &SolverOptions,
) -> Result<ConvergenceStudy> {
    if problem.reference.is_none() {
        return Err(Error::MissingReference(problem.name.clone()));
    }
    let ns_list = sorted_unique(ns_list);
    let mut rows = Vec::with_capacity(ns_list.len());
    for &ns in &ns_list {
        let rep = price(&RunRequest::new(problem.clone(), method, ns).with_options(options.clone()))?;
        rows.push(ConvergenceRow {
            ns,
            nodes: rep.nodes,
            error: rep.error.expect("reference present"),
            assembly_seconds: rep.assembly_seconds,
            solve_seconds: rep.solve_seconds,
        });
    }
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let order = fitted_order(problem.domain.extent(0), &ns_list, &errors);
    Ok(ConvergenceStudy {
        problem: problem.name.clone(),
        method,
        rows,
        order,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub problem: String,
    pub method: Method,
    pub spots: Vec<f64>,
    /// `(N_s, values)` per resolution, ascending in `N_s`.
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl ValueTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["ns".to_string()];
        header.extend(self.spots.iter().map(|s| format!("s0={s}")));
        w.write_record(&header)?;
        for (ns, vals) in &self.rows {
            let mut rec = vec![ns.to_string()];
            rec.extend(vals.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Fixed-width text with six decimals.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} ({})\n{:>6}", self.problem, self.method, "N_s");
        for s in &self.spots {
            out += &format!("  {:>10}", format!("S0={s:.2}"));
        }
        out.push('\n');
        for (ns, vals) in &self.rows {
            out += &format!("{ns:>6}");
            for v in vals {
                out += &format!("  {v:>10.6}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn table_run(
    problem: &ProblemSpec,
    method: Method,
    ns_list: &[usize],
    options: &SolverOptions,
) -> Result<ValueTable> {
    let mut rows = Vec::new();
    for ns in sorted_unique(ns_list) {
        let rep = price(&RunRequest::new(problem.clone(), method, ns).with_options(options.clone()))?;
        rows.push((ns, rep.values));
    }
    Ok(ValueTable {
        problem: problem.name.clone(),
        method,
        spots: problem.spots.clone(),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub ns: usize,
    pub workers: usize,
    pub assembly_seconds: f64,
    pub total_seconds: f64,
    pub error: Option<f64>,
    /// Serial assembly time over this row's assembly time.
    pub speedup: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingStudy {
    pub problem: String,
    pub method: Method,
    pub rows: Vec<TimingRow>,
}

impl TimingStudy {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["ns", "workers", "assembly_s", "total_s", "error", "speedup"])?;
        for r in &self.rows {
            w.write_record([
                r.ns.to_string(),
                r.workers.to_string(),
                r.assembly_seconds.to_string(),
                r.total_seconds.to_string(),
                r.error.map(|e| e.to_string()).unwrap_or_default(),
                r.speedup.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every `(N_s, n_w)` pair; a serial run is added where `1` is not
/// among the worker counts so each row has a speedup.
pub fn timing_study(
    problem: &ProblemSpec,
    method: Method,
    ns_list: &[usize],
    workers: &[usize],
    options: &SolverOptions,
) -> Result<TimingStudy> {
    let mut workers = sorted_unique(workers);
    if workers.first() != Some(&1) {
        workers.insert(0, 1);
    }
    let mut rows = Vec::new();
    for ns in sorted_unique(ns_list) {
        let mut serial = f64::NAN;
        for &nw in &workers {
            let opts = SolverOptions {
                workers: nw,
                ..options.clone()
            };
            let rep = price(&RunRequest::new(problem.clone(), method, ns).with_options(opts))?;
            if nw == 1 {
                serial = rep.assembly_seconds;
            }
            rows.push(TimingRow {
                ns,
                workers: nw,
                assembly_seconds: rep.assembly_seconds,
                total_seconds: rep.total_seconds(),
                error: rep.error,
                speedup: serial / rep.assembly_seconds,
                values: rep.values,
            });
        }
    }
    Ok(TimingStudy {
        problem: problem.name.clone(),
        method,
        rows,
    })
}
