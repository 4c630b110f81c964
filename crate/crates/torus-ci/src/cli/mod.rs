//! Config-driven front end: parses a run file, executes one subcommand and
//! collects the JSON report, CSV tables and field dumps it produces.

pub mod config;

use crate::error::{Error, Result};
use crate::field::{random_vector, write_field_dump, Field, Grid, NormKind, ScalarField, SymTensorField, TimeSeries, VectorField, TAU};
use crate::harmonic::{holder_norm, holder_sweep};
use crate::heat::{contraction_factor, duhamel_trajectory};
use crate::iteration::ledger::{render_table, write_csv};
use crate::iteration::{iterate, Context, DiagnosticsConfig, IterationParams, LedgerRow, LevelOverride};
use crate::jets::{jet_identity_checks, normalization_defect, supports_disjoint, JetParams, JetSystem};
use crate::noise::{member_seed, renorm_constant, sample_z, EnsembleRow, NoiseConfig, NoisePath};
pub use config::Config;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::Path;

pub const COMMANDS: [&str; 5] = ["noise-ensemble", "jets-verify", "iterate", "holder-sweep", "contraction-demo"];

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dump_times: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub pass: bool,
}

impl Assertion {
    fn at_most(name: impl Into<String>, value: f64, target: f64) -> Self {
        Assertion { name: name.into(), value, target, pass: value <= target }
    }

    fn at_least(name: impl Into<String>, value: f64, target: f64) -> Self {
        Assertion { name: name.into(), value, target, pass: value >= target }
    }
}

/// Everything a run writes.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub command: String,
    pub report: Value,
    /// File name and CSV text.
    pub tables: Vec<(String, String)>,
    /// File name and dump bytes.
    pub dumps: Vec<(String, Vec<u8>)>,
    pub assertions: Vec<Assertion>,
    /// Human-readable summary for the terminal.
    pub summary: String,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    pub fn report_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `report.json`, the tables and the dumps under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report_json())?;
        for (name, text) in &self.tables {
            std::fs::write(dir.join(name), text)?;
        }
        if !self.dumps.is_empty() {
            let fd = dir.join("fields");
            std::fs::create_dir_all(&fd)?;
            for (name, bytes) in &self.dumps {
                std::fs::write(fd.join(name), bytes)?;
            }
        }
        Ok(())
    }
}

/// Process exit status for an error: 2 for configuration problems, 3 for numerical failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::InvalidArgument(_) | Error::InvalidGrid(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

/// Parses `text` and runs the command it names.
pub fn execute(text: &str, ov: &Overrides) -> Result<Outcome> {
    let cfg = Config::parse(text)?;
    let command: String = cfg.require("run", "command")?;
    if !COMMANDS.contains(&command.as_str()) {
        return Err(cfg.invalid("run", "command", format!("unknown command '{command}', expected one of {}", COMMANDS.join(", "))));
    }
    let seed = match ov.seed {
        Some(s) => {
            cfg.get::<u64>("run", "seed")?;
            s
        }
        None => cfg.get_or("run", "seed", 0u64)?,
    };
    let threads: usize = cfg.get_or("run", "threads", 0)?;
    let file_dumps = cfg.get_list::<f64>("run", "dump_fields")?;
    let dumps = ov.dump_times.clone().or(file_dumps).unwrap_or_default();
    let selected = cfg.get_list::<String>("run", "assertions")?;
    let job = Job { cfg: &cfg, seed, dumps, selected };
    let run = || match command.as_str() {
        "iterate" => run_iterate(&job),
        "jets-verify" => run_jets(&job),
        "noise-ensemble" => run_noise(&job),
        "holder-sweep" => run_holder(&job),
        _ => run_contraction(&job),
    };
    let mut out = if threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(run)?
    } else {
        run()?
    };
    let pass = out.passed();
    let asserted = json!(out.assertions);
    if let Value::Object(m) = &mut out.report {
        m.insert("command".into(), json!(command));
        m.insert("seed".into(), json!(seed));
        // The thread count does not change any result, so it stays out of the report.
        let mut resolved = cfg.resolved();
        if let Some(run) = resolved.get_mut("run") {
            run.remove("threads");
        }
        m.insert("config".into(), json!(resolved));
        m.insert("assertions".into(), asserted);
        m.insert("pass".into(), json!(pass));
    }
    let mut table = String::new();
    for a in &out.assertions {
        table.push_str(&format!("{:<48} {:>14.6e} {:>14.6e} {}\n", a.name, a.value, a.target, if a.pass { "ok" } else { "FAIL" }));
    }
    out.summary.push_str(&table);
    Ok(out)
}

struct Job<'a> {
    cfg: &'a Config,
    seed: u64,
    dumps: Vec<f64>,
    selected: Option<Vec<String>>,
}

impl Job<'_> {
    /// Keeps the assertions named in `run.assertions`, or all of them.
    fn select(&self, all: Vec<Assertion>, key: impl Fn(&Assertion) -> String) -> Result<Vec<Assertion>> {
        let Some(names) = &self.selected else { return Ok(all) };
        if names.len() == 1 && names[0] == "none" {
            return Ok(Vec::new());
        }
        for n in names {
            if !all.iter().any(|a| key(a) == *n) {
                return Err(self.cfg.invalid("run", "assertions", format!("no assertion named '{n}'")));
            }
        }
        Ok(all.into_iter().filter(|a| names.contains(&key(a))).collect())
    }
}

fn grid_of(cfg: &Config) -> Result<Grid> {
    let n: usize = cfg.require("grid", "n")?;
    Grid::new(n).map_err(|e| cfg.invalid("grid", "n", e.to_string()))
}

fn positive(cfg: &Config, s: &str, k: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(cfg.invalid(s, k, format!("{s}.{k} must be positive, got {v}")))
    }
}

fn noise_config(cfg: &Config, seed: u64, dt: f64) -> Result<(NoiseConfig, bool)> {
    let enabled = cfg.get_or("noise", "enabled", true)?;
    let mut nc = NoiseConfig::new(seed, cfg.get_or("noise", "mode_cutoff", 3usize)?, dt);
    nc.amplitude = cfg.get_or("noise", "amplitude", 1.0)?;
    nc.eps = cfg.get_or("noise", "eps", 0.0)?;
    nc.include_zero_mode = cfg.get_or("noise", "include_zero_mode", false)?;
    if nc.amplitude < 0.0 {
        return Err(cfg.invalid("noise", "amplitude", "noise.amplitude must be nonnegative"));
    }
    let on = enabled && nc.amplitude > 0.0;
    Ok((nc, on))
}

fn jet_section(cfg: &Config, s: &str) -> Result<Option<JetParams>> {
    let keys = ["sigma", "eta", "nu", "mu", "theta"];
    let vals: Vec<Option<u32>> = keys.iter().map(|k| cfg.get::<u32>(s, k)).collect::<Result<_>>()?;
    if vals.iter().all(|v| v.is_none()) {
        return Ok(None);
    }
    if let Some(i) = vals.iter().position(|v| v.is_none()) {
        let (line, _) = cfg.position(s, keys.iter().zip(&vals).find(|(_, v)| v.is_some()).map(|(k, _)| *k).unwrap_or("sigma"));
        return Err(Error::Parse { line, col: 1, msg: format!("[{s}] sets some jet parameters but not '{}'", keys[i]) });
    }
    let v: Vec<u32> = vals.into_iter().map(|v| v.unwrap_or(0)).collect();
    let jp = JetParams { sigma: v[0], eta: v[1], nu: v[2], mu: v[3], theta: v[4] };
    jp.validate(0.0, false).map_err(|e| cfg.invalid(s, "sigma", e.to_string()))?;
    Ok(Some(jp))
}

fn iteration_params(cfg: &Config) -> Result<IterationParams> {
    let d = IterationParams::default();
    let s = "iteration";
    let band: Option<i64> = cfg.get(s, "jet_band")?;
    let mut p = IterationParams {
        a: cfg.get_or(s, "a", d.a)?,
        b: cfg.get_or(s, "b", d.b)?,
        alpha: cfg.get_or(s, "alpha", d.alpha)?,
        beta: cfg.get_or(s, "beta", d.beta)?,
        gamma: cfg.get_or(s, "gamma", d.gamma)?,
        big_k: cfg.get_or(s, "big_k", d.big_k)?,
        k_level: cfg.get_or(s, "k_level", d.k_level)?,
        level_l: cfg.get_or(s, "level_l", d.level_l)?,
        n_bound: cfg.get_or(s, "n_bound", d.n_bound)?,
        p: cfg.get_or(s, "p", d.p)?,
        kappa: cfg.get_or(s, "kappa", d.kappa)?,
        r_cut: cfg.get_or(s, "r_cut", d.r_cut)?,
        m0: cfg.get_or(s, "m0", d.m0)?,
        jet_band: band.or(d.jet_band),
        levels: BTreeMap::new(),
    };
    for name in cfg.section_names() {
        let Some(num) = name.strip_prefix("level.") else { continue };
        let l: usize = num.parse().map_err(|_| Error::Parse { line: 0, col: 1, msg: format!("section [{name}]: level must be a positive integer") })?;
        if l == 0 {
            return Err(Error::Parse { line: 0, col: 1, msg: "section [level.0]: levels start at 1".into() });
        }
        let o = LevelOverride { ell: cfg.get(&name, "ell")?, f: cfg.get(&name, "f")?, jet: jet_section(cfg, &name)? };
        p.levels.insert(l, o);
    }
    p.validate()?;
    Ok(p)
}

fn initial_datum(cfg: &Config, grid: &Grid, seed: u64) -> Result<VectorField> {
    let s = "initial";
    let kind: String = cfg.get_or(s, "kind", "zero".to_string())?;
    match kind.as_str() {
        "zero" => Ok(VectorField::zeros(grid)),
        "constant" => {
            let (ux, uy): (f64, f64) = (cfg.get_or(s, "ux", 0.0)?, cfg.get_or(s, "uy", 0.0)?);
            let pert: f64 = cfg.get_or(s, "perturbation", 0.0)?;
            let stream = ScalarField::from_fn(grid, |x, y| pert * (TAU * x).sin() * (TAU * y).cos());
            Ok(VectorField::new(ScalarField::constant(grid, ux), ScalarField::constant(grid, uy)).plus(&VectorField::perp_gradient(&stream)))
        }
        "random" => {
            let amp: f64 = cfg.get_or(s, "amplitude", 1.0)?;
            let band: i64 = cfg.get_or(s, "band", 3)?;
            let mut rng = ChaCha8Rng::seed_from_u64(member_seed(seed, u64::MAX));
            let v = random_vector(grid, band, 1.0, &mut rng).helmholtz_project().remove_mean();
            let l2 = v.norm(NormKind::Lp(2.0));
            Ok(if l2 > 0.0 { v.scaled(amp / l2) } else { v })
        }
        other => Err(cfg.invalid(s, "kind", format!("unknown initial kind '{other}', expected zero, constant or random"))),
    }
}

fn diagnostics(cfg: &Config) -> Result<DiagnosticsConfig> {
    let d = DiagnosticsConfig::default();
    let s = "diagnostics";
    Ok(DiagnosticsConfig {
        bound_ratio: cfg.get_or(s, "bound_ratio", d.bound_ratio)?,
        headline_target: cfg.get_or(s, "headline_target", d.headline_target)?,
        identity_tol: cfg.get_or(s, "identity_tol", d.identity_tol)?,
        divergence_tol: cfg.get_or(s, "divergence_tol", d.divergence_tol)?,
        reconstruction_tol: cfg.get_or(s, "reconstruction_tol", d.reconstruction_tol)?,
    })
}

/// Context of an `iterate` run, built from a parsed file (also used by the tests).
pub struct IterateSetup {
    pub ctx: Context,
    pub q_max: usize,
    pub t_max: f64,
    /// Lag window of the time-Hoelder seminorms in the stopping rule.
    pub window: usize,
}

pub fn iterate_setup(cfg: &Config, seed: u64) -> Result<IterateSetup> {
    let grid = grid_of(cfg)?;
    let dt = positive(cfg, "grid", "dt", cfg.require("grid", "dt")?)?;
    let t_max = positive(cfg, "grid", "t_max", cfg.require("grid", "t_max")?)?;
    let (nc, on) = noise_config(cfg, seed, dt)?;
    let params = iteration_params(cfg)?;
    let q_max: usize = cfg.get_or("iteration", "q_max", 2)?;
    let window: usize = cfg.get_or("iteration", "stopping_window", 64)?;
    let diag = diagnostics(cfg)?;
    let u0 = initial_datum(cfg, &grid, seed)?;
    let path = if on {
        nc.validate(&grid).map_err(|e| cfg.invalid("noise", "mode_cutoff", e.to_string()))?;
        sample_z(&nc, &grid, t_max)?
    } else {
        NoisePath::zero(&grid, dt, t_max)
    };
    let ctx = Context::new(params, diag, u0, path, t_max, window)?;
    Ok(IterateSetup { ctx, q_max, t_max, window })
}

fn run_iterate(job: &Job) -> Result<Outcome> {
    let cfg = job.cfg;
    let setup = iterate_setup(cfg, job.seed)?;
    cfg.finish()?;
    let ctx = &setup.ctx;
    let mut dumps = Vec::new();
    let dump_idx: Vec<(f64, usize)> = job
        .dumps
        .iter()
        .map(|&t| {
            let n = (t / ctx.dt).round();
            if t < 0.0 || n as usize > ctx.steps {
                Err(Error::InvalidArgument(format!("dump time {t} outside [0, {}]", ctx.t_end())))
            } else {
                Ok((t, n as usize))
            }
        })
        .collect::<Result<_>>()?;
    let reports = iterate(ctx, setup.q_max, |s| {
        for &(t, n) in &dump_idx {
            let mut put = |name: &str, write: &dyn Fn(&mut Vec<u8>) -> Result<()>| -> Result<()> {
                let mut b = Vec::new();
                write(&mut b)?;
                dumps.push((format!("level{}_{name}_t{t}.bin", s.q), b));
                Ok(())
            };
            let time = ctx.time(n);
            put("v1", &|b| write_field_dump(b, time, &s.v1.get::<VectorField>(n)))?;
            put("v2", &|b| write_field_dump(b, time, &s.v2.get::<VectorField>(n)))?;
            put("stress", &|b| write_field_dump(b, time, &s.stress.get::<SymTensorField>(n)))?;
        }
        Ok(())
    })?;
    let rows: Vec<LedgerRow> = reports.iter().flat_map(|r| r.rows.clone()).collect();
    let mut csv = Vec::new();
    write_csv(&rows, &mut csv)?;
    let all: Vec<Assertion> = rows
        .iter()
        .filter_map(|r| r.target.map(|t| Assertion { name: format!("level{}:{}", r.level, r.norm_name), value: r.value, target: t, pass: !r.failed() }))
        .collect();
    let assertions = job.select(all, |a| a.name.split(':').nth(1).unwrap_or("").to_string())?;
    let levels: Vec<Value> = reports
        .iter()
        .map(|r| {
            let norms: BTreeMap<String, Value> = r
                .rows
                .iter()
                .map(|x| (x.norm_name.clone(), json!({"window": x.window, "value": x.value, "target": x.target, "pass": x.pass})))
                .collect();
            json!({"level": r.level, "plan": r.plan, "norms": norms, "picard": r.picard, "active_directions": r.checks.active_directions})
        })
        .collect();
    let report = json!({
        "horizon": ctx.t_end(),
        "steps": ctx.steps,
        "dt": ctx.dt,
        "stopping": {"t_l": ctx.stopping.t_l, "t_l1": ctx.stopping.t_l1, "t_l2": ctx.stopping.t_l2, "t_l3": ctx.stopping.t_l3, "censored": ctx.censored},
        "implied_c": ctx.params.implied_c(),
        "params": ctx.params,
        "diagnostics": ctx.diag,
        "constraints": ctx.params.constraint_report(setup.q_max),
        "levels": levels,
    });
    Ok(Outcome {
        command: "iterate".into(),
        report,
        tables: vec![("ledger.csv".into(), String::from_utf8(csv).expect("utf8"))],
        dumps,
        assertions,
        summary: render_table(&rows),
    })
}

fn csv_text<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf8"))
}

#[derive(Serialize)]
struct JetRow {
    direction: usize,
    time: f64,
    perp_identity: f64,
    transport_dt: f64,
    transport_dt_half: f64,
    transport_order: f64,
    potential_dt: f64,
    potential_dt_half: f64,
    potential_order: f64,
    mean_w: f64,
}

fn run_jets(job: &Job) -> Result<Outcome> {
    let cfg = job.cfg;
    let grid = grid_of(cfg)?;
    let s = "jets";
    let jp = jet_section(cfg, s)?.unwrap_or(JetParams { sigma: 2, eta: 8, nu: 1, mu: 1, theta: 4 });
    let band: Option<i64> = cfg.get(s, "band")?;
    let fd: f64 = cfg.get_or(s, "dt", 1e-3)?;
    let times = cfg.get_list::<f64>(s, "times")?;
    let spatial_tol: f64 = cfg.get_or(s, "spatial_tol", 1e-8)?;
    let order_min: f64 = cfg.get_or(s, "order_min", 1.8)?;
    let norm_tol: f64 = cfg.get_or(s, "normalization_tol", 1e-6)?;
    // Sampled profiles need a finer grid than the spectral identities.
    let check_n: usize = cfg.get_or(s, "check_n", 2048)?;
    let fine = Grid::new(check_n).map_err(|e| cfg.invalid(s, "check_n", e.to_string()))?;
    cfg.finish()?;
    let js = JetSystem::new();
    let mut rows = Vec::new();
    let mut norms = Vec::new();
    for idx in 0..js.dirs.len() {
        let jet = js.stationary_jet(&jp, idx, &grid, band)?;
        // Inside the support of the oscillator by default, away from its zeros.
        let ts = times.clone().unwrap_or_else(|| vec![(js.offset(idx) + 0.3 / jp.eta as f64) / jp.sigma as f64]);
        for t in ts {
            let r = jet_identity_checks(&js, &jp, &jet, t, fd);
            rows.push(JetRow {
                direction: idx,
                time: t,
                perp_identity: r.perp_identity,
                transport_dt: r.transport_dt[0],
                transport_dt_half: r.transport_dt[1],
                transport_order: r.transport_order,
                potential_dt: r.potential_dt[0],
                potential_dt_half: r.potential_dt[1],
                potential_order: r.potential_order,
                mean_w: r.mean_w,
            });
        }
        norms.push(normalization_defect(&js, &jp, idx, &fine)?);
    }
    let disjoint = supports_disjoint(&js, &jp, &fine);
    let worst = |f: &dyn Fn(&JetRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    // Orders are only meaningful where the difference quotients are above rounding.
    let min_order = rows
        .iter()
        .filter(|r| r.transport_dt_half > 1e-11)
        .map(|r| r.transport_order.min(if r.potential_dt_half > 1e-11 { r.potential_order } else { f64::INFINITY }))
        .fold(f64::INFINITY, f64::min);
    let all = vec![
        Assertion::at_most("perp_identity", worst(&|r| r.perp_identity), spatial_tol),
        Assertion::at_most("mean_w", worst(&|r| r.mean_w), spatial_tol),
        Assertion::at_least("temporal_order", min_order, order_min),
        Assertion::at_most("normalization", norms.iter().cloned().fold(0.0, f64::max), norm_tol),
        Assertion::at_least("supports_disjoint", if disjoint { 1.0 } else { 0.0 }, 1.0),
    ];
    let assertions = job.select(all, |a| a.name.clone())?;
    let report = json!({"jet": jp, "band": band, "identities": rows, "normalization": norms, "supports_disjoint": disjoint});
    let summary = format!("{} identity rows over {} directions\n", rows.len(), js.dirs.len());
    Ok(Outcome { command: "jets-verify".into(), report, tables: vec![("identities.csv".into(), csv_text(&rows)?)], dumps: Vec::new(), assertions, summary })
}

fn run_noise(job: &Job) -> Result<Outcome> {
    let cfg = job.cfg;
    let grid = grid_of(cfg)?;
    let dt = positive(cfg, "grid", "dt", cfg.require("grid", "dt")?)?;
    let t_max = positive(cfg, "grid", "t_max", cfg.require("grid", "t_max")?)?;
    let (nc, _) = noise_config(cfg, job.seed, dt)?;
    nc.validate(&grid).map_err(|e| cfg.invalid("noise", "mode_cutoff", e.to_string()))?;
    let s = "ensemble";
    let paths: u64 = cfg.get_or(s, "paths", 100)?;
    let kappa: f64 = cfg.get_or(s, "kappa", 0.05)?;
    let times = cfg.get_list::<f64>(s, "times")?.unwrap_or_else(|| vec![t_max]);
    let z_max: f64 = cfg.get_or(s, "zscore_max", 3.0)?;
    cfg.finish()?;
    if paths < 2 {
        return Err(cfg.invalid(s, "paths", "need at least two paths"));
    }
    let idx: Vec<usize> = times
        .iter()
        .map(|&t| {
            let n = (t / dt).round() as usize;
            if t < 0.0 || t > t_max + 1e-12 {
                Err(cfg.invalid(s, "times", format!("time {t} outside [0, {t_max}]")))
            } else {
                Ok(n)
            }
        })
        .collect::<Result<_>>()?;
    // Per path and time: norm rows and the spatial mean of z_eps (x) z_eps and of the Wick square.
    type Sample = (Vec<EnsembleRow>, Vec<[f64; 3]>, Vec<[f64; 3]>);
    let per_path: Vec<Sample> = (0..paths)
        .into_par_iter()
        .map(|id| -> Result<Sample> {
            let mut c = nc.clone();
            c.seed = member_seed(job.seed, id);
            let p = sample_z(&c, &grid, t_max)?;
            let mut rows = Vec::new();
            let mut cov = Vec::new();
            let mut wick = Vec::new();
            for (&t, &n) in times.iter().zip(&idx) {
                let z = &p.z_eps.values[n];
                let w = p.wick_at(n);
                rows.push(EnsembleRow { path_id: id, t, norm_kind: "z_l2".into(), value: z.norm(NormKind::Lp(2.0)) });
                rows.push(EnsembleRow { path_id: id, t, norm_kind: "z_holder_minus_kappa".into(), value: holder_norm(z, -kappa) });
                rows.push(EnsembleRow { path_id: id, t, norm_kind: "wick_holder_minus_2kappa".into(), value: holder_norm(&w, -2.0 * kappa) });
                cov.push(VectorField::outer_self(z).mean());
                // One grid point: pointwise centering, not only the spatial average.
                let at0 = w.physical();
                wick.push([at0[0][0], at0[1][0], at0[2][0]]);
            }
            Ok((rows, cov, wick))
        })
        .collect::<Result<_>>()?;
    let m = paths as f64;
    let mut summary_rows = Vec::new();
    let mut worst_cov: f64 = 0.0;
    let mut worst_wick: f64 = 0.0;
    for (k, &t) in times.iter().enumerate() {
        let c = renorm_constant(&nc, t);
        let exact = [c[0][0], c[0][1], c[1][1]];
        for (e, name) in ["11", "12", "22"].iter().enumerate() {
            let stat = |f: &dyn Fn(&Sample) -> f64| {
                let mean = per_path.iter().map(f).sum::<f64>() / m;
                let var = per_path.iter().map(|s| (f(s) - mean).powi(2)).sum::<f64>() / (m - 1.0);
                (mean, (var / m).sqrt())
            };
            let (cm, cse) = stat(&|s| s.1[k][e]);
            let (wm, wse) = stat(&|s| s.2[k][e]);
            let zc = if cse > 0.0 { (cm - exact[e]).abs() / cse } else if (cm - exact[e]).abs() < 1e-15 { 0.0 } else { f64::INFINITY };
            let zw = if wse > 0.0 { wm.abs() / wse } else if wm.abs() < 1e-15 { 0.0 } else { f64::INFINITY };
            worst_cov = worst_cov.max(zc);
            worst_wick = worst_wick.max(zw);
            summary_rows.push(json!({"t": t, "entry": name, "exact": exact[e], "mean": cm, "std_err": cse, "zscore": zc, "wick_mean": wm, "wick_std_err": wse, "wick_zscore": zw}));
        }
    }
    let rows: Vec<EnsembleRow> = per_path.into_iter().flat_map(|s| s.0).collect();
    let all = vec![Assertion::at_most("covariance_zscore", worst_cov, z_max), Assertion::at_most("wick_centering_zscore", worst_wick, z_max + 1.0)];
    let assertions = job.select(all, |a| a.name.clone())?;
    let report = json!({"noise": nc, "paths": paths, "kappa": kappa, "covariance": summary_rows});
    let summary = format!("{paths} paths, {} times\n", times.len());
    Ok(Outcome { command: "noise-ensemble".into(), report, tables: vec![("ensemble.csv".into(), csv_text(&rows)?)], dumps: Vec::new(), assertions, summary })
}

fn profile_fn(name: &str) -> Option<fn(f64) -> f64> {
    match name {
        "step" => Some(|y| if y < 0.5 { 1.0 } else { 0.25 }),
        "sine" => Some(|y| (TAU * y).sin()),
        "sign" => Some(|y| if y < 0.5 { 1.0 } else { -1.0 }),
        _ => None,
    }
}

fn weight_fn(name: &str) -> Option<fn(f64) -> f64> {
    match name {
        "ramp" => Some(|x| 1.0 + x),
        "cosine" => Some(|x| 2.0 + (TAU * x).cos()),
        _ => None,
    }
}

fn run_holder(job: &Job) -> Result<Outcome> {
    let cfg = job.cfg;
    let s = "holder";
    let dim: usize = cfg.get_or(s, "dim", 1)?;
    let ps = cfg.get_list::<f64>(s, "p")?.unwrap_or_else(|| vec![1.0, 2.0]);
    let sigmas = cfg.get_list::<u32>(s, "sigmas")?.unwrap_or_else(|| vec![4, 8, 16, 32, 64]);
    let wname: String = cfg.get_or(s, "weight", "ramp".to_string())?;
    let pname: String = cfg.get_or(s, "profile", "step".to_string())?;
    let margin: f64 = cfg.get_or(s, "slope_margin", 0.2)?;
    cfg.finish()?;
    let w = weight_fn(&wname).ok_or_else(|| cfg.invalid(s, "weight", format!("unknown weight '{wname}', expected ramp or cosine")))?;
    let f = profile_fn(&pname).ok_or_else(|| cfg.invalid(s, "profile", format!("unknown profile '{pname}', expected step, sine or sign")))?;
    let a = move |x: &[f64]| x.iter().map(|&v| w(v)).product::<f64>();
    let g = move |y: &[f64]| y.iter().map(|&v| f(v)).product::<f64>();
    let mut sweeps = Vec::new();
    let mut all = Vec::new();
    let mut rows = Vec::new();
    for &p in &ps {
        let sw = holder_sweep(&a, &g, dim, p, &sigmas)?;
        all.push(Assertion::at_most(format!("slope_p{p}"), sw.slope, -1.0 / p + margin));
        for c in &sw.checks {
            rows.push(json!({"p": p, "sigma": c.sigma, "lhs": c.lhs, "product": c.product, "gap": c.gap, "bound": c.bound}));
        }
        sweeps.push(sw);
    }
    let assertions = job.select(all, |a| a.name.clone())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["p", "sigma", "lhs", "product", "gap", "bound"])?;
    for sw in &sweeps {
        for c in &sw.checks {
            w.serialize((sw.p, c.sigma, c.lhs, c.product, c.gap, c.bound))?;
        }
    }
    let table = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf8");
    let report = json!({"dim": dim, "weight": wname, "profile": pname, "sweeps": sweeps});
    Ok(Outcome { command: "holder-sweep".into(), report, tables: vec![("holder.csv".into(), table)], dumps: Vec::new(), assertions, summary: String::new() })
}

fn run_contraction(job: &Job) -> Result<Outcome> {
    let cfg = job.cfg;
    let grid = grid_of(cfg)?;
    let dt = positive(cfg, "grid", "dt", cfg.require("grid", "dt")?)?;
    let t_max = positive(cfg, "grid", "t_max", cfg.require("grid", "t_max")?)?;
    let (nc, on) = noise_config(cfg, job.seed, dt)?;
    let s = "contraction";
    let t_stars = cfg.get_list::<f64>(s, "t_stars")?.unwrap_or_else(|| vec![t_max, t_max / 2.0, t_max / 4.0]);
    let zeta: f64 = cfg.get_or(s, "zeta", 0.3)?;
    let kappa: f64 = cfg.get_or(s, "kappa", 0.1)?;
    let amp: f64 = cfg.get_or(s, "amplitude", 0.5)?;
    let band: i64 = cfg.get_or(s, "band", 3)?;
    cfg.finish()?;
    let steps = (t_max / dt).round() as usize;
    let z = if on {
        nc.validate(&grid).map_err(|e| cfg.invalid("noise", "mode_cutoff", e.to_string()))?;
        sample_z(&nc, &grid, t_max)?.z
    } else {
        NoisePath::zero(&grid, dt, t_max).z
    };
    // Two trajectories: heat flows of random divergence-free data forced by a fixed field.
    let mut rng = ChaCha8Rng::seed_from_u64(member_seed(job.seed, u64::MAX - 1));
    let mut traj = || -> Result<TimeSeries<VectorField>> {
        let a = random_vector(&grid, band, 1.0, &mut rng).helmholtz_project().remove_mean().scaled(amp);
        let f = random_vector(&grid, band, 1.0, &mut rng).helmholtz_project().remove_mean().scaled(amp);
        let forcing = TimeSeries::new(0.0, dt, vec![f; steps + 1])?;
        let d = duhamel_trajectory(&forcing);
        let vals = d.values.iter().enumerate().map(|(n, v)| v.plus(&crate::heat::heat_semigroup(&a, n as f64 * dt).expect("t >= 0"))).collect();
        TimeSeries::new(0.0, dt, vals)
    };
    let (v1, v2) = (traj()?, traj()?);
    let mut factors = Vec::new();
    for &t in &t_stars {
        factors.push(contraction_factor(&v1, &v2, &z, t, zeta, kappa)?);
    }
    let mut order: Vec<(f64, f64)> = t_stars.iter().cloned().zip(factors.iter().cloned()).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let worst_increase = order.windows(2).map(|w| w[0].1 - w[1].1).fold(f64::NEG_INFINITY, f64::max);
    let smallest = order.first().map(|x| x.1).unwrap_or(0.0);
    let all = vec![
        Assertion::at_most("monotone_in_t_star", worst_increase.max(0.0), 0.0),
        Assertion::at_most("contracts_at_smallest_t_star", smallest, 1.0),
    ];
    let assertions = job.select(all, |a| a.name.clone())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t_star", "factor"])?;
    for (t, f) in t_stars.iter().zip(&factors) {
        w.serialize((t, f))?;
    }
    let table = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf8");
    let report = json!({"t_stars": t_stars, "factors": factors, "zeta": zeta, "kappa": kappa});
    Ok(Outcome { command: "contraction-demo".into(), report, tables: vec![("contraction.csv".into(), table)], dumps: Vec::new(), assertions, summary: String::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIVIAL: &str = "command = iterate\nseed = 1\n[grid]\nn = 16\ndt = 0.0078125\nt_max = 0.4\n[noise]\nenabled = false\n[iteration]\nq_max = 1\njet_band = 7\n[level.1]\nell = 0.05\nsigma = 2\neta = 6\nnu = 1\nmu = 1\ntheta = 1\n";

    #[test]
    fn trivial_iteration_is_all_zero() {
        let out = execute(TRIVIAL, &Overrides::default()).unwrap();
        assert!(out.passed());
        let csv = &out.tables[0].1;
        let rows = crate::iteration::ledger::read_csv(csv.as_bytes()).unwrap();
        for r in rows.iter().filter(|r| r.norm_name.starts_with("v2") || r.norm_name.starts_with("stress_l1") || r.norm_name.starts_with("dv2")) {
            assert_eq!(r.value, 0.0, "{}", r.norm_name);
        }
    }

    #[test]
    fn identical_runs_give_identical_bytes() {
        let a = execute(TRIVIAL, &Overrides::default()).unwrap();
        let b = execute(TRIVIAL, &Overrides::default()).unwrap();
        assert_eq!(a.report_json(), b.report_json());
        assert_eq!(a.tables, b.tables);
        let c = execute(TRIVIAL, &Overrides { seed: Some(9), dump_times: Some(vec![0.2]) }).unwrap();
        assert_eq!(c.report["seed"], json!(9));
        assert_eq!(c.dumps.len(), 6);
    }

    #[test]
    fn errors_map_to_exit_codes() {
        let e = execute("command = iterate\n[grid]\nn = 16\nbogus = 1\n", &Overrides::default()).unwrap_err();
        assert_eq!(exit_code(&e), 2);
        let e = execute("command = fly\n", &Overrides::default()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, col: 11, .. }), "{e}");
        assert_eq!(exit_code(&Error::Numeric("stress lin".into())), 3);
        assert_eq!(exit_code(&Error::NonConvergence { iterations: 1, increment: 1.0, ratio: 2.0 }), 3);
    }

    #[test]
    fn selected_assertions_must_exist() {
        let text = TRIVIAL.replace("seed = 1\n", "seed = 1\nassertions = divergence, nonsense\n");
        assert!(matches!(execute(&text, &Overrides::default()), Err(Error::Parse { .. })));
        let text = TRIVIAL.replace("seed = 1\n", "seed = 1\nassertions = divergence\n");
        let out = execute(&text, &Overrides::default()).unwrap();
        assert_eq!(out.assertions.len(), 2);
    }

    #[test]
    fn small_commands_run() {
        let h = execute("command = holder-sweep\n[holder]\np = 1, 2\nsigmas = 4, 8, 16\n", &Overrides::default()).unwrap();
        assert!(h.passed(), "{}", h.summary);
        let c = execute("command = contraction-demo\n[grid]\nn = 16\ndt = 0.0005\nt_max = 0.02\n[noise]\nenabled = false\n[contraction]\nt_stars = 0.02, 0.01\n", &Overrides::default()).unwrap();
        assert!(c.passed(), "{}", c.summary);
        let n = execute("command = noise-ensemble\nseed = 3\n[grid]\nn = 8\ndt = 0.01\nt_max = 0.05\n[noise]\nmode_cutoff = 1\n[ensemble]\npaths = 200\n", &Overrides::default()).unwrap();
        assert!(n.tables[0].1.lines().count() == 1 + 200 * 3);
    }
}
