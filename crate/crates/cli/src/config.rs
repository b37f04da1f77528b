//! TOML run configurations, validated in one pass so that every problem is
//! reported together with its key path.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use holeflow::experiment::{chi_battery, phi_battery, SweepConfig};
use holeflow::grid::{make_grid, DomainSpec};
use holeflow::solver::TimeConfig;
use holeflow::{InitialCondition, PhysParams};
use toml::{Table, Value};

use crate::error::{CliError, Violation};

pub const DEFAULT_CFL: f64 = 0.4;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_CHECKPOINTS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    pub domain: DomainSpec,
    pub n: usize,
    pub phys: PhysParams,
    pub ic: InitialCondition,
    pub time: TimeConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Solve(SolveConfig),
    Homogenize(SweepConfig),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// Linear-solve tolerance (`[probes] tol`).
    pub tol: f64,
    /// Recorded in the outputs; every battery is fixed, so it changes nothing.
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

/// Reads and validates a run configuration. A `[sweep]` table makes it a
/// homogenization config, otherwise it is a single solve.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::config("<file>", e.message().to_string()))?;
    let mut r = Reader {
        root: &root,
        errors: Vec::new(),
        seen: BTreeSet::new(),
    };
    let cfg = r.run_config();
    r.unknown_keys();
    match cfg {
        Some(c) if r.errors.is_empty() => Ok(c),
        _ => Err(CliError::Config(r.errors)),
    }
}

struct Reader<'a> {
    root: &'a Table,
    errors: Vec<Violation>,
    seen: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn lookup(&mut self, path: &str) -> Option<&'a Value> {
        self.seen.insert(path.to_string());
        let mut parts = path.split('.');
        let mut cur = self.root.get(parts.next()?)?;
        for p in parts {
            cur = cur.as_table()?.get(p)?;
        }
        Some(cur)
    }

    fn err(&mut self, path: &str, msg: impl Into<String>) {
        self.errors.push(Violation::new(path, msg));
    }

    fn opt_f64(&mut self, path: &str) -> Option<f64> {
        match self.lookup(path)? {
            Value::Float(x) => Some(*x),
            Value::Integer(k) => Some(*k as f64),
            other => {
                self.err(path, format!("expected a number, found {}", other.type_str()));
                None
            }
        }
    }

    fn f64(&mut self, path: &str) -> Option<f64> {
        let present = self.lookup(path).is_some();
        if !present {
            self.err(path, "missing key");
            return None;
        }
        self.opt_f64(path)
    }

    fn f64_or(&mut self, path: &str, default: f64) -> Option<f64> {
        if self.lookup(path).is_none() {
            return Some(default);
        }
        self.opt_f64(path)
    }

    fn opt_usize(&mut self, path: &str) -> Option<usize> {
        match self.lookup(path)? {
            Value::Integer(k) if *k >= 0 => Some(*k as usize),
            other => {
                let found = match other {
                    Value::Integer(k) => format!("{k}"),
                    v => v.type_str().to_string(),
                };
                self.err(path, format!("expected a non-negative integer, found {found}"));
                None
            }
        }
    }

    fn usize(&mut self, path: &str) -> Option<usize> {
        if self.lookup(path).is_none() {
            self.err(path, "missing key");
            return None;
        }
        self.opt_usize(path)
    }

    fn str(&mut self, path: &str) -> Option<&'a str> {
        match self.lookup(path) {
            None => {
                self.err(path, "missing key");
                None
            }
            Some(Value::String(s)) => Some(s.as_str()),
            Some(other) => {
                self.err(path, format!("expected a string, found {}", other.type_str()));
                None
            }
        }
    }

    fn f64_list(&mut self, path: &str) -> Option<Vec<f64>> {
        match self.lookup(path) {
            None => {
                self.err(path, "missing key");
                None
            }
            Some(Value::Array(items)) => {
                let mut out = Vec::new();
                for (k, v) in items.iter().enumerate() {
                    match v {
                        Value::Float(x) => out.push(*x),
                        Value::Integer(i) => out.push(*i as f64),
                        other => {
                            self.err(&format!("{path}[{k}]"), format!("expected a number, found {}", other.type_str()));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            Some(other) => {
                self.err(path, format!("expected an array, found {}", other.type_str()));
                None
            }
        }
    }

    fn point_or(&mut self, path: &str, default: [f64; 2]) -> Option<[f64; 2]> {
        if self.lookup(path).is_none() {
            return Some(default);
        }
        let v = self.f64_list(path)?;
        if v.len() != 2 {
            self.err(path, format!("expected 2 coordinates, found {}", v.len()));
            return None;
        }
        Some([v[0], v[1]])
    }

    fn core(&mut self, table: &str, e: holeflow::Error) {
        let (key, msg) = match &e {
            holeflow::Error::Parameter { name, reason } => (core_key(table, name), reason.clone()),
            other => (table.to_string(), other.to_string()),
        };
        self.err(&key, msg);
    }

    fn run_config(&mut self) -> Option<RunConfig> {
        let tol = self.f64_or("probes.tol", DEFAULT_TOL);
        if let Some(t) = tol {
            if !(t > 0.0 && t < 1.0) {
                self.err("probes.tol", format!("must lie in (0, 1), got {t}"));
            }
        }
        let seed = if self.lookup("seed").is_some() {
            self.opt_usize("seed").map(|s| s as u64)
        } else {
            Some(0)
        };
        let out_dir = match self.lookup("output.dir") {
            None => None,
            Some(_) => self.str("output.dir").map(PathBuf::from),
        };
        let half_width = self.f64("grid.L");
        let n = self.usize("grid.n");
        let phys = self.phys();
        let ic = self.ic();
        let time = self.time();
        let is_sweep = self.root.contains_key("sweep");
        let command = if is_sweep {
            let eps_list = self.f64_list("sweep.eps_list");
            let theta = self.opt_f64("sweep.theta");
            let cfg = SweepConfig {
                half_width: half_width?,
                n: n?,
                eps_list: eps_list?,
                phys: phys?,
                ic: ic?,
                time: time?,
                theta,
                chi: chi_battery(),
                phi: phi_battery(),
            };
            for e in cfg.violations() {
                let table = match &e {
                    holeflow::Error::Parameter { name, .. } => table_of(name),
                    _ => "sweep",
                };
                self.core(table, e);
            }
            Command::Homogenize(cfg)
        } else {
            let eps = self.f64("hole.eps");
            let (l, n, eps) = (half_width?, n?, eps?);
            let domain = match DomainSpec::new(l, eps) {
                Ok(d) => Some(d),
                Err(e) => {
                    self.core("hole.eps", e);
                    None
                }
            };
            if !(eps < 0.25 * l) {
                self.err("hole.eps", format!("hole radius must be below L/4 = {}, got {eps}", 0.25 * l));
            }
            if let Some(d) = domain {
                if let Err(e) = make_grid(d, n) {
                    self.core("grid", e);
                }
            }
            let (phys, ic, time) = (phys?, ic?, time?);
            if let Err(e) = time.validate() {
                self.core("time", e);
            }
            Command::Solve(SolveConfig {
                domain: domain?,
                n,
                phys,
                ic,
                time,
            })
        };
        Some(RunConfig {
            command,
            tol: tol?,
            seed: seed?,
            out_dir,
        })
    }

    fn phys(&mut self) -> Option<PhysParams> {
        let mu = self.f64("phys.mu");
        let lambda = self.f64_or("phys.lambda", 0.0);
        let gamma = self.f64("phys.gamma");
        let (mu, lambda, gamma) = (mu?, lambda?, gamma?);
        match PhysParams::new(mu, lambda, gamma) {
            Ok(p) => Some(p),
            Err(e) => {
                self.core("phys", e);
                // keep the raw values so later checks can still run
                Some(PhysParams { mu, lambda, gamma })
            }
        }
    }

    fn ic(&mut self) -> Option<InitialCondition> {
        let kind = self.str("ic.kind")?;
        let ic = match kind {
            "still" => InitialCondition::Still {
                rho0: self.f64_or("ic.rho0", 1.0)?,
            },
            "bump" => {
                let amplitude = self.f64("ic.amplitude");
                let sigma = self.f64("ic.sigma");
                let center = self.point_or("ic.center", [0.1, 0.0]);
                InitialCondition::Bump {
                    amplitude: amplitude?,
                    sigma: sigma?,
                    center: center?,
                }
            }
            "vortex" => {
                let amplitude = self.f64("ic.amplitude");
                let radius = self.f64("ic.radius");
                let center = self.point_or("ic.center", [0.05, 0.0]);
                InitialCondition::Vortex {
                    amplitude: amplitude?,
                    radius: radius?,
                    center: center?,
                }
            }
            other => {
                self.err("ic.kind", format!("expected one of still, bump, vortex; found {other:?}"));
                return None;
            }
        };
        if let Err(e) = ic.validate() {
            self.core("ic", e);
        }
        Some(ic)
    }

    fn time(&mut self) -> Option<TimeConfig> {
        let t_end = self.f64("time.T");
        let cfl = self.f64_or("time.cfl", DEFAULT_CFL);
        let checkpoints = if self.lookup("time.checkpoints").is_some() {
            self.opt_usize("time.checkpoints")
        } else {
            Some(DEFAULT_CHECKPOINTS)
        };
        Some(TimeConfig {
            t_end: t_end?,
            cfl: cfl?,
            checkpoints: checkpoints?,
        })
    }

    fn unknown_keys(&mut self) {
        let mut paths = Vec::new();
        for (k, v) in self.root {
            match v.as_table() {
                Some(t) => paths.extend(t.keys().map(|s| format!("{k}.{s}"))),
                None => paths.push(k.clone()),
            }
        }
        for p in paths {
            if !self.seen.contains(&p) {
                self.err(&p, "unknown key");
            }
        }
    }
}

fn table_of(name: &str) -> &'static str {
    match name {
        "L" | "n" => "grid",
        "mu" | "lambda" | "gamma" => "phys",
        "eps_list" | "theta" => "sweep",
        "t_end" | "T" | "cfl" | "checkpoints" => "time",
        _ => "ic",
    }
}

fn core_key(table: &str, name: &str) -> String {
    if table.contains('.') {
        return table.to_string();
    }
    let key = if name == "t_end" { "T" } else { name };
    format!("{table}.{key}")
}
