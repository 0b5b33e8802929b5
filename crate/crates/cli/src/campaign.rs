//! Task execution and artifact writing.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;
use twofluid_core::closure::linear_coefficients;
use twofluid_core::linearlab::data::ELL;
use twofluid_core::linearlab::{
    combination_ratio, make_generic_data, make_lower_bound_data, read_norm_csv, verify_lower_bounds, verify_rates,
    write_fit_csv, write_norm_csv, LinearLab, NormSeries, RateReport, Variable,
};
use twofluid_core::solver::{
    init_state, weighted_sup_functionals, write_checkpoint, Grid, GridSpec, RunRecord, Solver,
};
use twofluid_core::spectral::{analyze_modes, log_grid, select_eta, write_mode_csv, Branch, ModeRecord};

use crate::config::{ConfigError, FitMode, RunConfig, Task};

/// Projector residual accepted by `analyze-modes`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] twofluid_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Message(String),
}

/// Result of a successful task run. `passed` is false when an acceptance check failed.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct BranchStats {
    pub distinct: usize,
    pub confluent: usize,
    pub ambiguous: usize,
    pub max_residual: f64,
}

impl BranchStats {
    fn from_records(records: &[ModeRecord]) -> Self {
        let mut s = BranchStats::default();
        for r in records {
            match r.branch {
                Branch::Distinct => s.distinct += 1,
                Branch::Confluent => s.confluent += 1,
            }
            s.ambiguous += r.ambiguous as usize;
            s.max_residual = s.max_residual.max(r.max_residual);
        }
        s
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    task: &'a str,
    config_hash: &'a str,
    eta: f64,
    combination_ratio: f64,
    branch_stats: BranchStats,
    passed: bool,
    files: Vec<String>,
    results: Value,
}

struct Artifacts {
    dir: PathBuf,
    hash: String,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn path(&mut self, stem: &str, ext: &str) -> PathBuf {
        let p = self.dir.join(format!("{stem}-{}.{ext}", self.hash));
        self.files.push(p.clone());
        p
    }

    fn writer(&mut self, stem: &str, ext: &str) -> Result<BufWriter<fs::File>, CliError> {
        Ok(BufWriter::new(fs::File::create(self.path(stem, ext))?))
    }

    fn names(&self) -> Vec<String> {
        self.files.iter().filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect()
    }
}

/// Per-task products before anything is written.
struct TaskResult {
    passed: bool,
    summary: String,
    results: Value,
    eta: Option<f64>,
}

/// Validates the configuration, runs its task and writes every artifact into `out`.
///
/// Nothing is written when validation fails.
pub fn run_campaign(cfg: &RunConfig, out: &Path, log: &dyn Fn(&str)) -> Result<Outcome, CliError> {
    let errors = cfg.validate();
    if !errors.is_empty() {
        return Err(ConfigError { errors }.into());
    }
    let coeffs = linear_coefficients(&cfg.params)?;
    let xis = log_grid(cfg.modes.xi_min, cfg.modes.xi_max, cfg.modes.count);
    let modes = analyze_modes(&coeffs, &xis)?;
    let stats = BranchStats::from_records(&modes);
    fs::create_dir_all(out)?;
    let mut art = Artifacts { dir: out.to_path_buf(), hash: cfg.hash(), files: Vec::new() };
    let task = cfg.task();
    log(&format!("{task}: config {}", art.hash));

    let result = match task {
        Task::AnalyzeModes => {
            write_mode_csv(art.writer("modes", "csv")?, &modes)?;
            let passed = stats.max_residual < RESIDUAL_TOLERANCE;
            Ok(TaskResult {
                passed,
                summary: format!(
                    "{} modes ({} distinct, {} confluent), max projector residual {:.2e}",
                    modes.len(),
                    stats.distinct,
                    stats.confluent,
                    stats.max_residual
                ),
                results: json!({ "residual_tolerance": RESIDUAL_TOLERANCE }),
                eta: None,
            })
        }
        Task::LinearDecay => linear_decay(cfg, &mut art, log),
        Task::LowerBound => lower_bound(cfg, &mut art, log),
        Task::Simulate => simulate(cfg, &mut art, log),
        Task::Fit => fit(cfg, &mut art),
    };
    let (result, failure) = match result {
        Ok(r) => (r, None),
        Err((r, e)) => (r, Some(e)),
    };

    let eta = match result.eta {
        Some(e) => e,
        None => select_eta(&coeffs)?,
    };
    let meta_path = art.path("metadata", "json");
    let meta = Metadata {
        tool: "twofluid",
        version: env!("CARGO_PKG_VERSION"),
        task: task.name(),
        config_hash: &art.hash,
        eta,
        combination_ratio: combination_ratio(&coeffs),
        branch_stats: stats,
        passed: result.passed && failure.is_none(),
        files: art.names(),
        results: result.results,
    };
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(&meta_path, text)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Outcome { passed: result.passed, summary: result.summary, files: art.files })
}

type TaskOutput = Result<TaskResult, (TaskResult, CliError)>;

fn plain<T, E: Into<CliError>>(r: Result<T, E>) -> Result<T, (TaskResult, CliError)> {
    r.map_err(|e| (TaskResult { passed: false, summary: String::new(), results: Value::Null, eta: None }, e.into()))
}

fn claims_json(report: &RateReport) -> Value {
    Value::Array(
        report
            .claims
            .iter()
            .map(|c| {
                json!({
                    "variable": c.variable.name(),
                    "k": c.k,
                    "exponent": c.fit.exponent,
                    "expected": c.expected,
                    "band": c.band,
                    "pass": c.pass,
                })
            })
            .collect(),
    )
}

fn lab_for(cfg: &RunConfig, eta: Option<f64>) -> Result<LinearLab, CliError> {
    Ok(match eta {
        Some(e) => LinearLab::with_coefficients(linear_coefficients(&cfg.params)?, e),
        None => LinearLab::new(&cfg.params)?,
    })
}

fn linear_decay(cfg: &RunConfig, art: &mut Artifacts, log: &dyn Fn(&str)) -> TaskOutput {
    let d = &cfg.decay;
    let lab = plain(lab_for(cfg, d.eta))?;
    let data = plain(make_generic_data(d.k0, lab.eta()))?;
    let times = log_grid(d.t_min, d.t_max, d.samples);
    log(&format!("linear-decay: {} samples, k in {:?}", times.len(), d.ks));
    let table = plain(lab.norm_table(&data, &times, &d.ks, d.low_pass))?;
    let report = plain(verify_rates(&table, [d.t_min, d.t_max], d.tolerance))?;
    let mut gaps = Vec::new();
    let mut gaps_ok = true;
    for &k in &d.ks {
        let exp = |v: Variable| report.claims.iter().find(|c| c.variable == v && c.k == k).map(|c| c.fit.exponent);
        if let (Some(c), Some(n)) = (exp(Variable::Combination), exp(Variable::NPlus)) {
            let gap = c - n;
            let ok = (gap + 0.5).abs() <= d.gap_tolerance;
            gaps_ok &= ok;
            gaps.push(json!({ "k": k, "gap": gap, "pass": ok }));
        }
    }
    plain(write_norm_csv(plain(art.writer("norms", "csv"))?, &table))?;
    plain(write_fit_csv(plain(art.writer("fit", "csv"))?, &report))?;
    let failed = report.failures().count();
    let passed = failed == 0 && gaps_ok;
    Ok(TaskResult {
        passed,
        summary: format!(
            "{} rate claims, {failed} failed; combination gap {}",
            report.claims.len(),
            if gaps_ok { "within tolerance" } else { "out of tolerance" }
        ),
        results: json!({ "claims": claims_json(&report), "combination_gap": gaps, "k0": d.k0 }),
        eta: Some(lab.eta()),
    })
}

fn lower_bound(cfg: &RunConfig, art: &mut Artifacts, log: &dyn Fn(&str)) -> TaskOutput {
    let l = &cfg.lower_bound;
    let lab = plain(lab_for(cfg, l.eta))?;
    let data = plain(make_lower_bound_data(l.k0, l.theta, l.s, lab.eta()))?;
    let times = log_grid(l.t_min, l.t_max, l.samples);
    log(&format!("lower-bound: {} samples", times.len()));
    let table = plain(lab.norm_table(&data, &times, &[0], true))?;
    let picked: Vec<NormSeries> = table
        .iter()
        .filter(|s| matches!(s.variable, Variable::NPlus | Variable::NMinus | Variable::PhiPlus | Variable::PhiMinus))
        .cloned()
        .collect();
    let report = plain(verify_lower_bounds(&picked, [l.t_min, l.t_max], l.max_ratio))?;
    plain(write_norm_csv(plain(art.writer("norms", "csv"))?, &table))?;
    plain(write_fit_csv(plain(art.writer("fit", "csv"))?, &report))?;
    let worst = report.claims.iter().filter_map(|c| c.band).fold(0.0, f64::max);
    Ok(TaskResult {
        passed: report.all_pass(),
        summary: format!(
            "{} lower-bound claims, max band ratio {worst:.3} (limit {})",
            report.claims.len(),
            l.max_ratio
        ),
        results: json!({ "claims": claims_json(&report), "c0": data.c0 }),
        eta: Some(lab.eta()),
    })
}

fn write_run(art: &mut Artifacts, rec: &RunRecord) -> Result<(), CliError> {
    rec.write_norm_csv(art.writer("norms", "csv")?)?;
    rec.write_energy_csv(art.writer("energy", "csv")?)?;
    let mut w = art.writer("functionals", "csv")?;
    let mut header = vec!["t".to_string()];
    header.extend((0..=ELL).map(|k| format!("e{k}_l")));
    header.push("e0_n".into());
    let mut text = header.join(",");
    text.push('\n');
    for v in weighted_sup_functionals(&rec.functionals, ELL as usize) {
        let mut row = vec![format!("{:e}", v.time)];
        row.extend(v.e_k.iter().map(|e| format!("{e:e}")));
        row.push(format!("{:e}", v.e_0));
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::io::Write::write_all(&mut w, text.as_bytes())?;
    Ok(())
}

fn simulate(cfg: &RunConfig, art: &mut Artifacts, log: &dyn Fn(&str)) -> TaskOutput {
    let s = &cfg.simulate;
    let grid = plain(Grid::new(GridSpec { dim: s.dim, n: s.points(), length: s.box_length() }))?;
    let mut solver = plain(Solver::new(grid.clone(), &cfg.params))?.with_cfl(s.cfl);
    if s.linear_only {
        solver = solver.linear_only();
    }
    let Some(data) = s.initial.to_initial_data(cfg.seed) else {
        return plain(Err(CliError::Message("seed is required for random_band initial data".into())));
    };
    let s0 = plain(init_state(&grid, &data))?;
    log(&format!("simulate: {}-D grid n = {}, {} steps of dt = {}", s.dim, s.points(), s.steps, s.dt));
    let (rec, err) = solver.run_partial(&s0, s.dt, s.steps, s.record_every, &s.ks);
    let last = rec.final_state.clone().expect("run leaves a state");
    if let Some(e) = err {
        let dump = (|| -> Result<(), CliError> {
            write_run(art, &rec)?;
            write_checkpoint(art.writer("blowup", "bin")?, &grid, &cfg.params, &last)?;
            Ok(())
        })();
        let results = json!({ "error": e.to_string(), "last_good_time": last.time });
        let tr = TaskResult { passed: false, summary: String::new(), results, eta: None };
        return Err((tr, dump.err().unwrap_or(e.into())));
    }
    plain(write_run(art, &rec))?;
    plain(write_checkpoint(plain(art.writer("checkpoint", "bin"))?, &grid, &cfg.params, &last))?;
    let drift = rec.max_mass_drift();
    let e0: Vec<f64> = rec.energy.iter().map(|e| e.e0).collect();
    let nonincreasing = e0.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + f64::MIN_POSITIVE);
    let passed = drift <= s.mass_tolerance;
    Ok(TaskResult {
        passed,
        summary: format!(
            "t = {:.4}, E0 {:.3e} -> {:.3e}, mass drift {drift:.1e} (limit {:.0e})",
            last.time,
            e0.first().copied().unwrap_or(0.0),
            e0.last().copied().unwrap_or(0.0),
            s.mass_tolerance
        ),
        results: json!({
            "final_time": last.time,
            "mass_drift": drift,
            "e0_initial": e0.first(),
            "e0_final": e0.last(),
            "e0_nonincreasing": nonincreasing,
            "hermitian_defect": last.hermitian_defect(&grid),
        }),
        eta: None,
    })
}

fn fit(cfg: &RunConfig, art: &mut Artifacts) -> TaskOutput {
    let f = &cfg.fit;
    let input = f.input.as_ref().expect("validated");
    let file = plain(fs::File::open(input).map_err(|e| CliError::Message(format!("{}: {e}", input.display()))))?;
    let series = plain(read_norm_csv(file))?;
    let wanted = match f.parsed_variables() {
        Some(v) => Some(plain(v.map_err(CliError::Message))?),
        None => None,
    };
    let window = [f.t_min, f.t_max];
    let mut skipped = Vec::new();
    let picked: Vec<NormSeries> = series
        .into_iter()
        .filter(|s| wanted.as_ref().is_none_or(|w| w.contains(&s.variable)))
        .filter(|s| {
            let ok = s
                .times
                .iter()
                .zip(&s.values)
                .filter(|(t, _)| **t >= window[0] && **t <= window[1])
                .all(|(_, v)| *v > 0.0);
            if !ok {
                skipped.push(format!("{}:k{}", s.variable, s.k));
            }
            ok
        })
        .collect();
    if picked.is_empty() {
        return plain(Err(CliError::Message(format!("no positive series to fit in {}", input.display()))));
    }
    let report = plain(match f.mode {
        FitMode::Rate => verify_rates(&picked, window, f.tolerance),
        FitMode::LowerBound => verify_lower_bounds(&picked, window, f.max_ratio),
    })?;
    plain(write_fit_csv(plain(art.writer("fit", "csv"))?, &report))?;
    let failed = report.failures().count();
    Ok(TaskResult {
        passed: failed == 0,
        summary: format!("{} claims, {failed} failed, {} series skipped", report.claims.len(), skipped.len()),
        results: json!({ "claims": claims_json(&report), "skipped": skipped, "input": input.display().to_string() }),
        eta: None,
    })
}
