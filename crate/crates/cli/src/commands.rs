//! The five subcommands. Each one returns the files it wrote and the list of
//! acceptance checks that failed (only consulted under `--check`).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use holeflow::bogovskii::uniformity_probe;
use holeflow::cutoff::{cutoff_norm_report, CutoffSpec, NormKind};
use holeflow::experiment::{run_sweep, RowMetrics, SweepConfig, SweepReport};
use holeflow::grid::{make_grid, Geometry};
use holeflow::solver::{energy_inequality_check, write_snapshot, MonitorSeries, Solver};
use holeflow::testfn::{rate_probe, TestField};
use serde::Serialize;

use crate::config::SolveConfig;
use crate::emit::{col, labelled, write_json, write_table, Cell, Table};
use crate::error::{CliError, InModule};

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// One line per check, prefixed `PASS` or `FAIL`.
    pub checks: Vec<String>,
}

impl Outcome {
    fn check(&mut self, pass: bool, what: String) {
        self.checks.push(format!("{} {what}", if pass { "PASS" } else { "FAIL" }));
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|c| c.starts_with("FAIL")).cloned().collect()
    }
}

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

/// `alpha = max(2, |ln eps|)`.
pub fn default_alpha(eps: f64) -> f64 {
    eps.ln().abs().max(2.0)
}

pub fn cutoff_norms(
    eps_list: &[f64],
    alpha: Option<f64>,
    q_list: &[f64],
    kind: NormKind,
    tol: f64,
    out: &Path,
) -> Result<Outcome, CliError> {
    let mut table = Table::new(
        "cutoff_norms",
        "cutoff",
        vec![
            col("eps", "inner radius of the cutoff"),
            col("alpha", "ratio of outer to inner radius"),
            col("q", "Lebesgue exponent"),
            col("numeric", format!("q-th power of the L^q norm of {} by quadrature", kind.label())),
            col("closed_form", "exact value where one is known, empty otherwise"),
            col("rel_err", "|numeric - closed_form| / closed_form, empty without a closed form"),
        ],
    );
    let mut outcome = Outcome::default();
    for &eps in eps_list {
        let a = alpha.unwrap_or_else(|| default_alpha(eps));
        let spec = CutoffSpec::new(eps, a).map_err(|e| CliError::config("--eps/--alpha", e.to_string()))?;
        for &q in q_list {
            let r = cutoff_norm_report(&spec, q, kind).in_module("cutoff")?;
            if let Some(err) = r.rel_err {
                outcome.check(err <= tol, format!("eps={eps} alpha={a} q={q}: rel_err {err:.2e} (tol {tol:.0e})"));
            }
            table.push(vec![
                Cell::Num(r.eps),
                Cell::Num(r.alpha),
                Cell::Num(r.q),
                Cell::Num(r.numeric),
                Cell::Opt(r.closed_form),
                Cell::Opt(r.rel_err),
            ]);
        }
    }
    outcome.files = write_table(out, &table)?;
    Ok(outcome)
}

pub fn testfn_rates(
    field: TestField,
    p: f64,
    q: f64,
    eps_list: &[f64],
    half_width: f64,
    out: &Path,
) -> Result<Outcome, CliError> {
    let t = rate_probe(field, p, q, eps_list, half_width).in_module("testfn")?;
    let mut table = Table::new(
        "rates",
        "testfn",
        vec![
            col("eps", "hole radius"),
            col("value", "||Phi - phi||_p / ||phi||_{W1,q}"),
            col("gradient", "||grad Phi - n grad phi||_p / ||phi||_{W1,q}; empty unless p <= 2 < q"),
            col("divergence", "||div Phi - n div phi||_p / ||phi||_{W1,q}"),
        ],
    );
    for r in &t.rows {
        table.push(vec![Cell::Num(r.eps), Cell::Num(r.value), Cell::Opt(r.gradient), Cell::Num(r.divergence)]);
    }
    let mut outcome = Outcome::default();
    let value: Vec<f64> = t.rows.iter().map(|r| r.value).collect();
    let div: Vec<f64> = t.rows.iter().map(|r| r.divergence).collect();
    let grad: Vec<f64> = t.rows.iter().filter_map(|r| r.gradient).collect();
    outcome.check(non_increasing(&value), format!("{}: value column non-increasing", field.name()));
    outcome.check(non_increasing(&grad), format!("{}: gradient column non-increasing", field.name()));
    outcome.check(non_increasing(&div), format!("{}: divergence column non-increasing", field.name()));
    outcome.files = write_table(out, &table)?;
    Ok(outcome)
}

#[derive(Serialize)]
struct ResidualRecord {
    eps: f64,
    residual: f64,
    divform_residual: f64,
}

#[derive(Serialize)]
struct ResidualFile {
    n: usize,
    p: f64,
    q: f64,
    tol: f64,
    solves: Vec<ResidualRecord>,
}

/// Fixed smooth data for the uniformity probe.
pub fn probe_scalar(x: [f64; 2]) -> f64 {
    (2.0 * PI * x[0]).cos() + 4.0 * x[0] * x[1]
}

pub fn probe_vector(x: [f64; 2]) -> [f64; 2] {
    [(PI * x[1]).sin(), x[0] * x[0]]
}

pub const UNIFORMITY_FACTOR: f64 = 3.0;

pub fn bogovskii_check(
    eps_list: &[f64],
    p: f64,
    q: f64,
    n: usize,
    half_width: f64,
    tol: f64,
    out: &Path,
) -> Result<Outcome, CliError> {
    let rows = uniformity_probe(Geometry::new(n, half_width), &probe_scalar, &probe_vector, eps_list, p, q, tol)
        .in_module("bogovskii")?;
    let mut table = Table::new(
        "uniformity",
        "bogovskii",
        vec![
            col("eps", "hole radius"),
            col("w1p_ratio", "||B f||_{W1,p} / ||f||_p for the fixed scalar datum"),
            col("divform_ratio", "||B div F||_q / ||F||_q for the fixed vector datum"),
        ],
    );
    for r in &rows {
        table.push(vec![Cell::Num(r.eps), Cell::Num(r.w1p_ratio), Cell::Num(r.divform_ratio)]);
    }
    let mut outcome = Outcome {
        files: write_table(out, &table)?,
        ..Outcome::default()
    };
    let res = ResidualFile {
        n,
        p,
        q,
        tol,
        solves: rows
            .iter()
            .map(|r| ResidualRecord {
                eps: r.eps,
                residual: r.residual,
                divform_residual: r.divform_residual,
            })
            .collect(),
    };
    let mut numbers = labelled("residual", &rows.iter().map(|r| r.residual).collect::<Vec<_>>());
    numbers.extend(labelled("divform_residual", &rows.iter().map(|r| r.divform_residual).collect::<Vec<_>>()));
    outcome.files.push(write_json(&out.join("residuals.json"), &res, "bogovskii", &numbers)?);
    let ratios: Vec<f64> = rows.iter().map(|r| r.w1p_ratio).collect();
    let spread = ratios.iter().cloned().fold(f64::MIN, f64::max) / ratios.iter().cloned().fold(f64::MAX, f64::min);
    outcome.check(
        spread < UNIFORMITY_FACTOR,
        format!("W1,{p} ratio max/min {spread:.3} < {UNIFORMITY_FACTOR}"),
    );
    Ok(outcome)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    config: SolveEcho<'a>,
    seed: u64,
    steps: usize,
    snapshots: Vec<String>,
    energy: holeflow::solver::EnergyReport,
    mass_drift: f64,
}

#[derive(Serialize)]
struct SolveEcho<'a> {
    domain: &'a holeflow::DomainSpec,
    n: usize,
    phys: &'a holeflow::PhysParams,
    ic: &'a holeflow::InitialCondition,
    time: &'a holeflow::solver::TimeConfig,
}

pub const ENERGY_TOL: f64 = 1e-3;
pub const MASS_TOL: f64 = 1e-12;

pub fn monitor_table(name: &str, m: &MonitorSeries) -> Table {
    let docs = [
        "time",
        "total mass",
        "kinetic plus internal energy",
        "viscous dissipation rate",
        "dissipation integrated in time",
        "integral of rho^gamma away from the hole",
        "effective viscous flux functional",
        "L1 residual of the renormalized continuity equation",
    ];
    let mut t = Table::new(
        name,
        "solver",
        MonitorSeries::COLUMNS.iter().zip(docs).map(|(c, d)| col(*c, d)).collect(),
    );
    for k in 0..m.len() {
        t.push(m.row(k).iter().map(|x| Cell::Num(*x)).collect());
    }
    t
}

pub fn solve(cfg: &SolveConfig, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    let grid = make_grid(cfg.domain, cfg.n).map_err(|e| CliError::config("grid", e.to_string()))?;
    let solver = Solver::new(grid.clone(), cfg.phys);
    let init = solver.init_state(&cfg.ic).in_module("solver")?;
    let traj = solver.run(init, &cfg.time).in_module("solver")?;
    let table = monitor_table("monitors", &traj.monitors);
    table.check_finite()?;
    let mut outcome = Outcome::default();
    crate::emit::ensure_dir(out)?;
    let mut names = Vec::new();
    for (k, s) in traj.snapshots.iter().enumerate() {
        if s.rho.values.iter().chain(&s.m.u).chain(&s.m.v).any(|x| !x.is_finite()) {
            return Err(CliError::NonFinite {
                module: "solver",
                field: format!("snapshot {k}"),
            });
        }
        let name = format!("snapshot_{k:04}.bin");
        let path = out.join(&name);
        write_snapshot(&path, &grid, s).in_module("solver")?;
        outcome.files.push(path);
        names.push(name);
    }
    outcome.files.extend(write_table(out, &table)?);
    let energy = energy_inequality_check(&traj.monitors, ENERGY_TOL);
    let drift = traj.monitors.mass_drift();
    let summary = RunSummary {
        config: SolveEcho {
            domain: &cfg.domain,
            n: cfg.n,
            phys: &cfg.phys,
            ic: &cfg.ic,
            time: &cfg.time,
        },
        seed,
        steps: traj.steps,
        snapshots: names,
        energy,
        mass_drift: drift,
    };
    let numbers = vec![
        ("energy.max_violation".to_string(), energy.max_violation),
        ("mass_drift".to_string(), drift),
    ];
    outcome.files.push(write_json(&out.join("run.json"), &summary, "solver", &numbers)?);
    outcome.check(
        energy.passed,
        format!("energy inequality: violation {:.2e} (tol {ENERGY_TOL:.0e})", energy.max_violation),
    );
    outcome.check(drift <= MASS_TOL, format!("mass drift {drift:.2e} (tol {MASS_TOL:.0e})"));
    Ok(outcome)
}

type Scalar = (&'static str, &'static str, fn(&RowMetrics) -> f64);
type Vector = (&'static str, &'static str, fn(&RowMetrics) -> &Vec<f64>);

const SCALARS: [Scalar; 8] = [
    ("density_weak", "sup over checkpoints and chi of |int (rho_eps - rho) chi| away from B_{2 eps}", |m| m.density_weak),
    ("velocity_l2l2", "int_0^T ||u_eps - u||_2^2 dt", |m| m.velocity_l2l2),
    ("momentum_weak", "sup over checkpoints and chi of the corrected momentum discrepancy", |m| m.momentum_weak),
    ("pressure_functional", "int_0^T int rho^{gamma + theta} away from B_{2 eps}", |m| m.pressure_functional),
    ("energy_violation", "largest relative excess of E(t) + int D over E(0)", |m| m.energy_violation),
    ("mass_drift", "largest relative mass change", |m| m.mass_drift),
    ("min_density", "smallest density seen at any checkpoint", |m| m.min_density),
    ("steps", "time steps taken", |m| m.steps as f64),
];

const VECTORS: [Vector; 5] = [
    ("weak_residual_adhoc", "relative weak momentum residual, corrected test function", |m| &m.weak_residual_adhoc),
    ("weak_residual_naive", "relative weak momentum residual, truncated test function", |m| &m.weak_residual_naive),
    ("pressure_term_adhoc", "time-integrated pressure pairing with the corrected test function", |m| &m.pressure_term_adhoc),
    ("pressure_term_naive", "time-integrated pressure pairing with the truncated test function", |m| &m.pressure_term_naive),
    ("pressure_term_scaling", "same with the scaling cutoff", |m| &m.pressure_term_scaling),
];

fn sweep_numbers(r: &SweepReport) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for row in &r.rows {
        let tag = format!("rows[eps={}]", row.eps);
        if let Some(m) = &row.metrics {
            for (name, _, f) in SCALARS {
                out.push((format!("{tag}.{name}"), f(m)));
            }
            for (name, _, f) in VECTORS {
                out.extend(labelled(&format!("{tag}.{name}"), f(m)));
            }
        }
        if let Some(s) = &row.monitors {
            for k in 0..s.len() {
                for (c, x) in MonitorSeries::COLUMNS.iter().zip(s.row(k)) {
                    out.push((format!("{tag}.monitors.{c}[{k}]"), x));
                }
            }
        }
    }
    out
}

pub const DECAY_RATIO: f64 = 0.5;
pub const PRESSURE_SPREAD: f64 = 2.0;

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

#[derive(Serialize)]
struct Timing {
    eps: f64,
    seconds: f64,
}

pub fn homogenize(cfg: &SweepConfig, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    let outcome_run = run_sweep(cfg).in_module("homog_experiment")?;
    let mut report = outcome_run.report;
    report.notes.push(format!("seed {seed}; every battery is fixed and does not depend on it"));
    let mut outcome = Outcome::default();
    let numbers = sweep_numbers(&report);
    outcome
        .files
        .push(write_json(&out.join("sweep.json"), &report, "homog_experiment", &numbers)?);

    let completed: Vec<(f64, &RowMetrics)> = report
        .rows
        .iter()
        .filter_map(|r| r.metrics.as_ref().map(|m| (r.eps, m)))
        .collect();
    for (name, doc, f) in SCALARS {
        let mut t = Table::new(
            format!("metric_{name}"),
            "homog_experiment",
            vec![col("eps", "hole radius; 0 is the hole-free reference"), col(name, doc)],
        );
        for (eps, m) in &completed {
            t.push(vec![Cell::Num(*eps), Cell::Num(f(m))]);
        }
        outcome.files.extend(write_table(out, &t)?);
        let mut s = Table::new(
            format!("series_{name}"),
            "homog_experiment",
            vec![col("x", "hole radius eps"), col("y", doc)],
        );
        for (eps, m) in report.hole_rows() {
            s.push(vec![Cell::Num(eps), Cell::Num(f(m))]);
        }
        outcome.files.extend(write_table(out, &s)?);
    }
    let k = cfg.phi.len();
    for (name, doc, f) in VECTORS {
        let mut columns = vec![col("eps", "hole radius; 0 is the hole-free reference")];
        for (j, phi) in cfg.phi.iter().enumerate() {
            columns.push(col(format!("phi{j}"), format!("{doc}; test field {j} ({})", phi.name())));
        }
        let mut t = Table::new(format!("metric_{name}"), "homog_experiment", columns);
        for (eps, m) in &completed {
            let v = f(m);
            if v.len() == k {
                let mut row = vec![Cell::Num(*eps)];
                row.extend(v.iter().map(|x| Cell::Num(*x)));
                t.push(row);
            }
        }
        outcome.files.extend(write_table(out, &t)?);
    }
    for (j, row) in report.rows.iter().enumerate() {
        if let Some(m) = &row.monitors {
            outcome.files.extend(write_table(out, &monitor_table(&format!("monitors_row{j}"), m))?);
        }
    }
    let timings: Vec<Timing> = outcome_run
        .timings
        .iter()
        .map(|t| Timing {
            eps: t.eps,
            seconds: t.seconds,
        })
        .collect();
    let tnum = labelled("seconds", &timings.iter().map(|t| t.seconds).collect::<Vec<_>>());
    outcome
        .files
        .push(write_json(&out.join("timing.json"), &timings, "homog_experiment", &tnum)?);

    for row in &report.rows {
        if let Some(f) = &row.failure {
            outcome.check(false, format!("run eps={} completed: {f}", row.eps));
        }
    }
    let a: Vec<f64> = report.series(|m| m.density_weak).iter().map(|p| p.1).collect();
    let b: Vec<f64> = report.series(|m| m.velocity_l2l2).iter().map(|p| p.1).collect();
    let c: Vec<f64> = report.series(|m| m.momentum_weak).iter().map(|p| p.1).collect();
    outcome.check(strictly_decreasing(&a), format!("density metric decreasing {}", sci(&a)));
    outcome.check(strictly_decreasing(&b), format!("velocity metric decreasing {}", sci(&b)));
    outcome.check(strictly_decreasing(&c), format!("momentum metric decreasing {}", sci(&c)));
    if let (Some(first), Some(last)) = (b.first(), b.last()) {
        let ratio = last / first;
        outcome.check(ratio < DECAY_RATIO, format!("velocity metric final/first {ratio:.3} < {DECAY_RATIO}"));
    }
    let pf: Vec<f64> = report.series(|m| m.pressure_functional).iter().map(|p| p.1).collect();
    if !pf.is_empty() {
        let spread = pf.iter().cloned().fold(f64::MIN, f64::max) / pf.iter().cloned().fold(f64::MAX, f64::min);
        outcome.check(spread < PRESSURE_SPREAD, format!("pressure functional max/min {spread:.3} < {PRESSURE_SPREAD}"));
    }
    for (eps, m) in report.hole_rows() {
        for (j, (a, n)) in m.pressure_term_adhoc.iter().zip(&m.pressure_term_naive).enumerate() {
            outcome.check(a < n, format!("eps={eps} phi{j}: corrected pressure term {a:.3e} < truncated {n:.3e}"));
        }
    }
    Ok(outcome)
}
