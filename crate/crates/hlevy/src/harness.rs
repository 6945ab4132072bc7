//! Experiment harness: configuration, Monte Carlo convergence runs against
//! the limit laws, persistence, and report regeneration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::burgers::{self, LimitLaw};
use crate::ensemble::{
    build_matrix_params, second_singular_value_bound, simulate_path_with, EventKind,
    MatrixEnsembleParams,
};
use crate::error::{Error, Result};
use crate::export;
use crate::measures::{free_cumulants, GeneratingPair, RealMeasure};
use crate::rng::derive_seed;
use crate::spectral::{
    eigvalsh, gap_diagnostics, kolmogorov_distance, stieltjes_of_esd, EmpiricalMeasure,
    GapDiagnostics, SpectralProcess,
};

/// Current configuration schema version.
pub const CONFIG_SCHEMA: u32 = 1;

/// Acceptance thresholds applied by `compare --check`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Upper bound on the mean Kolmogorov distance at the largest n.
    #[serde(default = "default_mean_ks")]
    pub mean_ks: f64,
}

fn default_mean_ks() -> f64 {
    0.08
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mean_ks: default_mean_ks(),
        }
    }
}

/// How the generating pair is specified in a config.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PairSpec {
    Preset { preset: String },
    Inline { inline: GeneratingPair },
}

/// Full experiment configuration (JSON, schema-versioned, unknown fields
/// rejected).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub experiment: String,
    pub pair: PairSpec,
    pub n_list: Vec<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_grid: usize,
    pub eval_times: Vec<f64>,
    pub replicas: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_alpha() -> f64 {
    0.25
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(s).map_err(|e| Error::Usage(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Usage(format!(
                "unsupported config schema {} (expected {CONFIG_SCHEMA})",
                self.schema
            )));
        }
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Usage("n_list must be nonempty and ascending".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Usage("T must be positive".into()));
        }
        if self.n_grid < 1 {
            return Err(Error::Usage("n_grid must be >= 1".into()));
        }
        if self.replicas < 1 {
            return Err(Error::Usage("replicas must be >= 1".into()));
        }
        if self.eval_times.is_empty() {
            return Err(Error::Usage("eval_times must be nonempty".into()));
        }
        for &t in &self.eval_times {
            if !(0.0..=self.horizon).contains(&t) {
                return Err(Error::Usage(format!(
                    "eval time {t} outside [0, {}]",
                    self.horizon
                )));
            }
            if self.grid_index_of(t).is_none() {
                return Err(Error::Usage(format!(
                    "eval time {t} is not on the simulation grid (T/n_grid multiples)"
                )));
            }
        }
        Ok(())
    }

    fn grid_index_of(&self, t: f64) -> Option<usize> {
        (0..=self.n_grid).find(|&k| {
            let g = k as f64 * self.horizon / self.n_grid as f64;
            (g - t).abs() <= 1e-12 * t.abs().max(1.0)
        })
    }

    pub fn resolve_pair(&self) -> Result<ResolvedPair> {
        match &self.pair {
            PairSpec::Preset { preset } => parse_preset(preset),
            PairSpec::Inline { inline } => {
                inline.validate()?;
                Ok(ResolvedPair {
                    pair: inline.clone(),
                    kind: ReferenceKind::Solver,
                    label: "inline".into(),
                })
            }
        }
    }
}

/// Which reference law the Kolmogorov comparison uses: closed forms where
/// they exist, the characteristic solver otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceKind {
    Semicircle { sigma2: f64 },
    FreePoisson { lambda: f64 },
    Solver,
}

#[derive(Debug, Clone)]
pub struct ResolvedPair {
    pub pair: GeneratingPair,
    pub kind: ReferenceKind,
    pub label: String,
}

/// Parse a preset spec: `semicircle:σ²`, `free_poisson:λ`, or
/// `mixed:σ²,λ,jump_size`.
pub fn parse_preset(spec: &str) -> Result<ResolvedPair> {
    let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Usage(format!("bad preset number {s:?} in {spec:?}")))
    };
    match name {
        "semicircle" => {
            let sigma2 = if args.is_empty() { 1.0 } else { parse(args)? };
            if !(sigma2 > 0.0) {
                return Err(Error::Usage("semicircle variance must be > 0".into()));
            }
            Ok(ResolvedPair {
                pair: GeneratingPair::semicircle(sigma2),
                kind: ReferenceKind::Semicircle { sigma2 },
                label: format!("semicircle({sigma2})"),
            })
        }
        "free_poisson" => {
            let lambda = if args.is_empty() { 1.0 } else { parse(args)? };
            if !(lambda > 0.0) {
                return Err(Error::Usage("free_poisson rate must be > 0".into()));
            }
            let pair = GeneratingPair::new(
                lambda / 2.0,
                0.0,
                RealMeasure::dirac(1.0, lambda / 2.0),
            )?;
            Ok(ResolvedPair {
                pair,
                kind: ReferenceKind::FreePoisson { lambda },
                label: format!("free_poisson({lambda})"),
            })
        }
        "mixed" => {
            let parts: Vec<&str> = if args.is_empty() {
                vec![]
            } else {
                args.split(',').collect()
            };
            if parts.len() != 3 {
                return Err(Error::Usage(
                    "mixed preset needs three parameters: sigma2,lambda,jump_size".into(),
                ));
            }
            let (sigma2, lambda, jump) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
            let gaussian = GeneratingPair::semicircle(sigma2);
            let poisson = crate::measures::bp_to_free(
                &crate::measures::ClassicalTriplet::gaussian_plus_compound_poisson(
                    0.0, lambda, jump,
                ),
            )?;
            Ok(ResolvedPair {
                pair: gaussian.sum(&poisson)?,
                kind: ReferenceKind::Solver,
                label: format!("mixed({sigma2},{lambda},{jump})"),
            })
        }
        other => Err(Error::Usage(format!("unknown preset {other:?}"))),
    }
}

/// A reference law at a fixed time, exposing the CDF/quantile/transform the
/// distance computations need. `prepare` forces any lazy solve so the later
/// evaluations are infallible.
pub enum LimitRef {
    Semicircle { variance: f64 },
    FreePoisson { lambda: f64, t: f64 },
    Solver(LimitLaw),
}

impl LimitRef {
    pub fn for_kind(kind: &ReferenceKind, pair: &GeneratingPair, t: f64) -> Result<LimitRef> {
        Ok(match kind {
            ReferenceKind::Semicircle { sigma2 } => LimitRef::Semicircle {
                variance: sigma2 * t,
            },
            ReferenceKind::FreePoisson { lambda } => LimitRef::FreePoisson { lambda: *lambda, t },
            ReferenceKind::Solver => LimitRef::Solver(LimitLaw::new(pair.clone(), t)?),
        })
    }

    pub fn prepare(&self) -> Result<()> {
        if let LimitRef::Solver(law) = self {
            law.normalization()?;
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            LimitRef::Semicircle { variance } => {
                if *variance == 0.0 {
                    if x >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    burgers::semicircle_cdf(*variance, x)
                }
            }
            LimitRef::FreePoisson { lambda, t } => burgers::mp_cdf(*lambda, *t, x),
            LimitRef::Solver(law) => law.cdf(x).expect("cdf after prepare"),
        }
    }

    pub fn quantile(&self, q: f64) -> f64 {
        match self {
            LimitRef::Solver(law) => law.quantile(q).expect("quantile after prepare"),
            _ => {
                let (mut a, mut b) = self.bracket();
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    if self.cdf(m) >= q {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                0.5 * (a + b)
            }
        }
    }

    fn bracket(&self) -> (f64, f64) {
        match self {
            LimitRef::Semicircle { variance } => {
                let r = 2.0 * variance.sqrt();
                (-r - 1.0, r + 1.0)
            }
            LimitRef::FreePoisson { lambda, t } => {
                let b = (1.0 + (lambda * t).sqrt()).powi(2);
                (-1.0, b + 1.0)
            }
            LimitRef::Solver(_) => unreachable!(),
        }
    }

    /// ψ_limit(t, z) for the transform-deviation report.
    pub fn cauchy(&self, z: Complex64) -> Result<Complex64> {
        match self {
            LimitRef::Semicircle { variance } => {
                let t = *variance;
                if t == 0.0 {
                    return Ok(1.0 / z);
                }
                let s = 2.0 * t.sqrt();
                Ok((z - (z - s).sqrt() * (z + s).sqrt()) / (2.0 * t))
            }
            LimitRef::FreePoisson { lambda, t } => {
                // Roots of u² − u(1 + z − λt) + z = 0 with ψ = 1/u Herglotz.
                let c = lambda * t;
                let b = -(1.0 + z - c);
                let disc = (b * b - 4.0 * z).sqrt();
                for u in [(-b + disc) / 2.0, (-b - disc) / 2.0] {
                    let psi = 1.0 / u;
                    if psi.im < 0.0 {
                        return Ok(psi);
                    }
                }
                Err(Error::Domain(format!(
                    "no Herglotz branch for MP transform at z = {z}"
                )))
            }
            LimitRef::Solver(law) => law.cauchy_transform(z),
        }
    }

    pub fn label(&self) -> String {
        match self {
            LimitRef::Semicircle { variance } => format!("semicircle[var={variance}]"),
            LimitRef::FreePoisson { lambda, t } => format!("marchenko_pastur[{}]", lambda * t),
            LimitRef::Solver(_) => "characteristic_solver".into(),
        }
    }
}

/// Real-axis offsets of the transform-deviation grid {x + i}.
pub const TRANSFORM_GRID: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

/// Everything measured on one replica path.
#[derive(Debug, Clone)]
struct ReplicaOutcome {
    /// Descending eigenvalues at each eval time.
    eigs: Vec<Vec<f64>>,
    min_gap: f64,
    max_jump_ratio: f64,
    jumps: usize,
}

fn simulate_replica(
    params: &MatrixEnsembleParams,
    horizon: f64,
    n_grid: usize,
    eval_times: &[f64],
    seed: u64,
) -> Result<ReplicaOutcome> {
    let mut eigs: Vec<Vec<f64>> = vec![Vec::new(); eval_times.len()];
    let mut min_gap = f64::INFINITY;
    let mut max_jump_ratio: f64 = 0.0;
    let mut jumps = 0usize;
    let mut failure: Option<Error> = None;
    simulate_path_with(params, horizon, n_grid, seed, |ev| {
        if failure.is_some() {
            return;
        }
        if let (Some(j), Some(pre)) = (ev.jump, ev.pre_jump) {
            let delta = ev.matrix.sub(pre);
            let ratio = second_singular_value_bound(&delta) / j.r;
            max_jump_ratio = max_jump_ratio.max(ratio);
            jumps += 1;
        }
        if ev.time > 0.0 {
            match eigvalsh(ev.matrix) {
                Ok(vals) => {
                    for w in vals.windows(2) {
                        min_gap = min_gap.min(w[0] - w[1]);
                    }
                    if ev.kind == EventKind::Grid {
                        if let Some(slot) = eval_times
                            .iter()
                            .position(|&t| (t - ev.time).abs() <= 1e-12 * t.abs().max(1.0))
                        {
                            eigs[slot] = vals;
                        }
                    }
                }
                Err(e) => failure = Some(e),
            }
        } else if let Some(slot) = eval_times.iter().position(|&t| t == 0.0) {
            eigs[slot] = vec![0.0; params.n];
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ReplicaOutcome {
        eigs,
        min_gap,
        max_jump_ratio,
        jumps,
    })
}

/// Aggregated statistics for one (n, t) cell.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CellSummary {
    pub n: usize,
    pub t: f64,
    pub reference: String,
    pub replicas_ok: usize,
    pub ks_mean: f64,
    pub ks_min: f64,
    pub ks_max: f64,
    /// Standard error of the mean KS over replicas.
    pub ks_se: f64,
    pub w1_mean: f64,
    pub transform_dev_max: f64,
    /// Mean over replicas of (1/n) tr X(t).
    pub moment_mean: f64,
    /// Mean over replicas of (1/n) tr X(t)² minus the squared mean.
    pub moment_var: f64,
    pub target_mean: f64,
    pub target_var: f64,
    /// Replica-level standard errors of the two trace statistics.
    pub se_replica_mean: f64,
    pub se_replica_second: f64,
    /// Pooled-eigenvalue Monte Carlo standard errors.
    pub se_pooled_mean: f64,
    pub se_pooled_var: f64,
    pub min_gap: f64,
    pub max_jump_sigma2_ratio: f64,
    /// Repulsion-moment estimate E[1/|λ_r − λ_l|^p] at p = 1.5 over the
    /// cell's replicas, with its standard error.
    pub repulsion_estimate: f64,
    pub repulsion_se: f64,
}

/// Exponent of the per-cell repulsion diagnostic.
pub const CELL_REPULSION_P: f64 = 1.5;

/// Per-replica status line for the manifest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PathStatus {
    pub n: usize,
    pub replica: usize,
    pub status: String,
    pub min_gap: f64,
    pub max_jump_sigma2_ratio: f64,
    pub jumps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub experiment: String,
    pub pair_label: String,
    pub master_seed: u64,
    pub version: String,
    pub cells: Vec<CellSummary>,
    pub total_cells: usize,
    pub failed_paths: usize,
}

/// Run the full Monte Carlo experiment described by the config, writing the
/// run directory (config copy, manifest, per-path ESD CSVs, summary) and
/// returning the summary. Deterministic given the master seed.
pub fn run_experiment(cfg: &RunConfig, out_override: Option<&Path>) -> Result<RunSummary> {
    cfg.validate()?;
    let resolved = cfg.resolve_pair()?;
    let out_dir: PathBuf = match (out_override, &cfg.output_dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => PathBuf::from("runs").join(&cfg.experiment),
    };
    std::fs::create_dir_all(&out_dir)?;
    export::write_json(&out_dir.join("config.json"), cfg)?;

    let kappa = free_cumulants(&resolved.pair, 2)?;
    let mut cells = Vec::new();
    let mut statuses: Vec<PathStatus> = Vec::new();
    let mut esd_files: Vec<(String, String)> = Vec::new();
    let mut failed_paths = 0usize;

    for (ni, &n) in cfg.n_list.iter().enumerate() {
        let params = build_matrix_params(&resolved.pair, n, cfg.alpha)?;
        let refs: Vec<LimitRef> = cfg
            .eval_times
            .iter()
            .map(|&t| LimitRef::for_kind(&resolved.kind, &resolved.pair, t))
            .collect::<Result<_>>()?;
        for r in &refs {
            r.prepare()?;
        }

        let outcomes: Vec<(usize, Result<ReplicaOutcome>)> = (0..cfg.replicas)
            .into_par_iter()
            .map(|rep| {
                let seed = derive_seed(cfg.master_seed, &[ni as u64, rep as u64]);
                (
                    rep,
                    simulate_replica(&params, cfg.horizon, cfg.n_grid, &cfg.eval_times, seed),
                )
            })
            .collect();

        let mut ok: Vec<(usize, ReplicaOutcome)> = Vec::new();
        for (rep, res) in outcomes {
            match res {
                Ok(o) => {
                    statuses.push(PathStatus {
                        n,
                        replica: rep,
                        status: "ok".into(),
                        min_gap: o.min_gap,
                        max_jump_sigma2_ratio: o.max_jump_ratio,
                        jumps: o.jumps,
                    });
                    ok.push((rep, o));
                }
                Err(e) => {
                    failed_paths += 1;
                    statuses.push(PathStatus {
                        n,
                        replica: rep,
                        status: format!("error: {e}"),
                        min_gap: f64::NAN,
                        max_jump_sigma2_ratio: f64::NAN,
                        jumps: 0,
                    });
                }
            }
        }
        ok.sort_by_key(|(rep, _)| *rep);

        // Persist per-path ESDs (eval times only).
        for (rep, o) in &ok {
            let proc_ = SpectralProcess {
                times: cfg.eval_times.clone(),
                measures: o
                    .eigs
                    .iter()
                    .map(|e| EmpiricalMeasure::from_eigenvalues(e.clone()))
                    .collect(),
            };
            esd_files.push((format!("esd_n{n}_r{rep}.csv"), export::esd_csv(&proc_)));
        }

        for (ti, &t) in cfg.eval_times.iter().enumerate() {
            cells.push(aggregate_cell(
                n,
                t,
                &refs[ti],
                ok.iter().map(|(_, o)| &o.eigs[ti]),
                ok.iter().map(|(_, o)| (o.min_gap, o.max_jump_ratio)),
                &kappa,
            )?);
        }
    }

    let total_cells = cfg.n_list.len() * cfg.replicas;
    if failed_paths * 5 > total_cells {
        return Err(Error::Experiment(format!(
            "{failed_paths} of {total_cells} paths failed (> 20%)"
        )));
    }

    let summary = RunSummary {
        experiment: cfg.experiment.clone(),
        pair_label: resolved.label.clone(),
        master_seed: cfg.master_seed,
        version: env!("CARGO_PKG_VERSION").into(),
        cells,
        total_cells,
        failed_paths,
    };

    // Serialized writes, fixed order.
    for (name, contents) in &esd_files {
        std::fs::write(out_dir.join(name), contents)?;
    }
    write_statuses(&out_dir, &statuses)?;
    export::write_json(&out_dir.join("manifest.json"), &manifest_value(&summary, &statuses))?;
    export::write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_statuses(dir: &Path, statuses: &[PathStatus]) -> Result<()> {
    let mut csv = String::from("n,replica,status,min_gap,max_jump_sigma2_ratio,jumps\n");
    for s in statuses {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.n,
            s.replica,
            s.status.replace(',', ";"),
            export::fmt_f64(s.min_gap),
            export::fmt_f64(s.max_jump_sigma2_ratio),
            s.jumps
        ));
    }
    std::fs::write(dir.join("paths.csv"), csv)?;
    Ok(())
}

fn manifest_value(summary: &RunSummary, statuses: &[PathStatus]) -> serde_json::Value {
    serde_json::json!({
        "master_seed": summary.master_seed,
        "version": summary.version,
        "experiment": summary.experiment,
        "pair": summary.pair_label,
        "paths": statuses,
    })
}

fn aggregate_cell<'a>(
    n: usize,
    t: f64,
    reference: &LimitRef,
    eigs: impl Iterator<Item = &'a Vec<f64>> + Clone,
    diags: impl Iterator<Item = (f64, f64)>,
    kappa: &[f64],
) -> Result<CellSummary> {
    let mut ks_all = Vec::new();
    let mut w1_all = Vec::new();
    let mut transform_dev_max: f64 = 0.0;
    let mut m1 = Vec::new();
    let mut m2 = Vec::new();
    let mut pool = Vec::new();

    for e in eigs.clone() {
        let m = EmpiricalMeasure::from_eigenvalues(e.clone());
        ks_all.push(kolmogorov_distance(&m, |x| reference.cdf(x)));
        w1_all.push(wasserstein1(&m, reference));
        for &x in TRANSFORM_GRID.iter() {
            let z = Complex64::new(x, 1.0);
            let dev = (stieltjes_of_esd(&m, z) - reference.cauchy(z)?).norm();
            transform_dev_max = transform_dev_max.max(dev);
        }
        m1.push(m.mean());
        m2.push(m.second_moment());
        pool.extend_from_slice(m.eigenvalues());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let se = |v: &[f64]| {
        if v.len() < 2 {
            return f64::NAN;
        }
        let m = mean(v);
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
        (var / v.len() as f64).sqrt()
    };
    let a = mean(&m1);
    let second = mean(&m2);
    let pool_n = pool.len().max(1) as f64;
    let pool_mean = pool.iter().sum::<f64>() / pool_n;
    let centered2: Vec<f64> = pool.iter().map(|x| (x - pool_mean) * (x - pool_mean)).collect();
    let pool_var = mean(&centered2);
    let se_pooled_mean = (pool_var / pool_n).sqrt();
    let var_of_sq = mean(
        &centered2
            .iter()
            .map(|c| (c - pool_var) * (c - pool_var))
            .collect::<Vec<_>>(),
    );
    let se_pooled_var = (var_of_sq / pool_n).sqrt();

    let mut min_gap = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    for (g, r) in diags {
        min_gap = min_gap.min(g);
        max_ratio = max_ratio.max(r);
    }

    let measures: Vec<EmpiricalMeasure> = eigs
        .map(|e| EmpiricalMeasure::from_eigenvalues(e.clone()))
        .collect();
    let repulsion = if measures.is_empty() || n < 2 {
        (f64::NAN, f64::NAN)
    } else {
        let d = gap_diagnostics(&measures, CELL_REPULSION_P)?;
        (d.repulsion_estimate, d.stderr)
    };

    Ok(CellSummary {
        n,
        t,
        reference: reference.label(),
        replicas_ok: ks_all.len(),
        ks_mean: mean(&ks_all),
        ks_min: ks_all.iter().copied().fold(f64::INFINITY, f64::min),
        ks_max: ks_all.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ks_se: se(&ks_all),
        w1_mean: mean(&w1_all),
        transform_dev_max,
        moment_mean: a,
        moment_var: second - a * a,
        target_mean: t * kappa[0],
        target_var: t * kappa[1],
        se_replica_mean: se(&m1),
        se_replica_second: se(&m2),
        se_pooled_mean,
        se_pooled_var,
        min_gap,
        max_jump_sigma2_ratio: max_ratio,
        repulsion_estimate: repulsion.0,
        repulsion_se: repulsion.1,
    })
}

/// W₁ estimate: mean |λ_(i) − F⁻¹((i − 1/2)/n)| over ascending eigenvalues.
fn wasserstein1(m: &EmpiricalMeasure, reference: &LimitRef) -> f64 {
    let n = m.len();
    let mut asc: Vec<f64> = m.eigenvalues().to_vec();
    asc.reverse();
    let mut acc = 0.0;
    for (i, &lam) in asc.iter().enumerate() {
        let q = (i as f64 + 0.5) / n as f64;
        acc += (lam - reference.quantile(q)).abs();
    }
    acc / n as f64
}

/// Distances of a spectral process to the solver law of a pair, per time:
/// Kolmogorov, W₁, and the maximal Stieltjes-transform deviation on the
/// grid {x + i : x ∈ −2..2}.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TimeDistance {
    pub t: f64,
    pub ks: f64,
    pub w1: f64,
    pub transform_dev: f64,
}

pub fn compare_to_limit(
    process: &SpectralProcess,
    pair: &GeneratingPair,
    times: &[f64],
) -> Result<Vec<TimeDistance>> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let idx = process
            .times
            .iter()
            .position(|&pt| (pt - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or_else(|| Error::Domain(format!("time {t} not in the spectral process")))?;
        let m = &process.measures[idx];
        let reference = LimitRef::Solver(LimitLaw::new(pair.clone(), t)?);
        reference.prepare()?;
        let ks = kolmogorov_distance(m, |x| reference.cdf(x));
        let w1 = wasserstein1(m, &reference);
        let mut dev: f64 = 0.0;
        for &x in TRANSFORM_GRID.iter() {
            let z = Complex64::new(x, 1.0);
            dev = dev.max((stieltjes_of_esd(m, z) - reference.cauchy(z)?).norm());
        }
        out.push(TimeDistance {
            t,
            ks,
            w1,
            transform_dev: dev,
        });
    }
    Ok(out)
}

/// Threshold checks for `compare --check`: mean KS at the largest n bounded
/// by the configured tolerance, and mean KS non-increasing in n up to one
/// Monte Carlo standard error.
pub fn check_summary(summary: &RunSummary, tol: &Tolerances) -> Vec<String> {
    let mut violations = Vec::new();
    let mut by_t: BTreeMap<u64, Vec<&CellSummary>> = BTreeMap::new();
    for c in &summary.cells {
        by_t.entry(c.t.to_bits()).or_default().push(c);
    }
    for cells in by_t.values() {
        let mut sorted: Vec<&&CellSummary> = cells.iter().collect();
        sorted.sort_by_key(|c| c.n);
        if let Some(last) = sorted.last() {
            if !(last.ks_mean <= tol.mean_ks) {
                violations.push(format!(
                    "t = {}: mean KS {:.4} at n = {} exceeds {}",
                    last.t, last.ks_mean, last.n, tol.mean_ks
                ));
            }
        }
        for w in sorted.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.ks_mean > a.ks_mean + a.ks_se {
                violations.push(format!(
                    "t = {}: mean KS rises from {:.4} (n = {}) to {:.4} (n = {}) beyond 1 se",
                    a.t, a.ks_mean, a.n, b.ks_mean, b.n
                ));
            }
        }
    }
    violations
}

/// Rebuild the summary of a finished run from its artifacts alone
/// (config.json, per-path ESD CSVs, paths.csv) and rewrite summary.json.
pub fn report(run_dir: &Path) -> Result<RunSummary> {
    let cfg = RunConfig::from_json(&std::fs::read_to_string(run_dir.join("config.json"))?)?;
    let resolved = cfg.resolve_pair()?;
    let kappa = free_cumulants(&resolved.pair, 2)?;
    let statuses = read_statuses(&run_dir.join("paths.csv"))?;

    let mut cells = Vec::new();
    let mut failed_paths = 0usize;
    for (ni, &n) in cfg.n_list.iter().enumerate() {
        let _ = ni;
        let refs: Vec<LimitRef> = cfg
            .eval_times
            .iter()
            .map(|&t| LimitRef::for_kind(&resolved.kind, &resolved.pair, t))
            .collect::<Result<_>>()?;
        for r in &refs {
            r.prepare()?;
        }
        let mut per_rep: Vec<(usize, Vec<Vec<f64>>, f64, f64)> = Vec::new();
        for s in statuses.iter().filter(|s| s.n == n) {
            if s.status != "ok" {
                failed_paths += 1;
                continue;
            }
            let name = format!("esd_n{n}_r{}.csv", s.replica);
            let eigs = read_esd_csv(&run_dir.join(&name), &cfg.eval_times)?;
            per_rep.push((s.replica, eigs, s.min_gap, s.max_jump_sigma2_ratio));
        }
        per_rep.sort_by_key(|(rep, ..)| *rep);
        for (ti, &t) in cfg.eval_times.iter().enumerate() {
            cells.push(aggregate_cell(
                n,
                t,
                &refs[ti],
                per_rep.iter().map(|(_, e, ..)| &e[ti]),
                per_rep.iter().map(|&(_, _, g, r)| (g, r)),
                &kappa,
            )?);
        }
    }
    let summary = RunSummary {
        experiment: cfg.experiment.clone(),
        pair_label: resolved.label,
        master_seed: cfg.master_seed,
        version: env!("CARGO_PKG_VERSION").into(),
        cells,
        total_cells: cfg.n_list.len() * cfg.replicas,
        failed_paths,
    };
    export::write_json(&run_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn read_statuses(path: &Path) -> Result<Vec<PathStatus>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(Error::Usage(format!("bad paths.csv line: {line}")));
        }
        let bad = |f: &str| Error::Usage(format!("bad paths.csv field {f}"));
        out.push(PathStatus {
            n: parts[0].parse().map_err(|_| bad("n"))?,
            replica: parts[1].parse().map_err(|_| bad("replica"))?,
            status: parts[2].to_string(),
            min_gap: parts[3].parse().map_err(|_| bad("min_gap"))?,
            max_jump_sigma2_ratio: parts[4].parse().map_err(|_| bad("ratio"))?,
            jumps: parts[5].parse().map_err(|_| bad("jumps"))?,
        });
    }
    Ok(out)
}

fn read_esd_csv(path: &Path, eval_times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut eigs: Vec<Vec<f64>> = vec![Vec::new(); eval_times.len()];
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Usage(format!("bad esd csv line: {line}")));
        }
        let t: f64 = parts[0]
            .parse()
            .map_err(|_| Error::Usage("bad esd time".into()))?;
        let lam: f64 = parts[2]
            .parse()
            .map_err(|_| Error::Usage("bad eigenvalue".into()))?;
        if let Some(slot) = eval_times
            .iter()
            .position(|&et| (et - t).abs() <= 1e-12 * t.abs().max(1.0))
        {
            eigs[slot].push(lam);
        }
    }
    Ok(eigs)
}

/// Repulsion diagnostics over samples of the (unscaled) Hermitian Brownian
/// motion at time t, for each requested dimension.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DiagnoseOutcome {
    pub n: usize,
    pub t: f64,
    pub diagnostics: GapDiagnostics,
}

pub fn run_gap_diagnostics(
    n_list: &[usize],
    t: f64,
    samples: usize,
    p: f64,
    master_seed: u64,
) -> Result<Vec<DiagnoseOutcome>> {
    if !(t > 0.0) {
        return Err(Error::Usage("t must be positive".into()));
    }
    if samples < 2 {
        return Err(Error::Usage("need at least 2 samples".into()));
    }
    let mut out = Vec::new();
    for (ni, &n) in n_list.iter().enumerate() {
        let measures: Vec<EmpiricalMeasure> = (0..samples)
            .into_par_iter()
            .map(|k| -> Result<EmpiricalMeasure> {
                let seed = derive_seed(master_seed, &[0xd1a6, ni as u64, k as u64]);
                let mut rng = crate::rng::path_rng(seed);
                let h = crate::ensemble::sample_hermitian_bm_increment(n, t, &mut rng)?;
                Ok(EmpiricalMeasure::from_eigenvalues(eigvalsh(&h)?))
            })
            .collect::<Result<_>>()?;
        out.push(DiagnoseOutcome {
            n,
            t,
            diagnostics: gap_diagnostics(&measures, p)?,
        });
    }
    Ok(out)
}
