//! Configuration files, run orchestration and on-disk output.
//!
//! A configuration is plain text with `[section]` headers and `key = value`
//! lines; `#` starts a comment and arrays are comma-separated numbers:
//!
//! ```text
//! [run]
//! command = simulate
//! [grid]
//! x_min = -40
//! dx = 0.01953125
//! n = 4096
//! boundary = decaying
//! [equation]
//! k = 1
//! [time]
//! t_end = 5
//! [initial]
//! name = bump_momentum
//! a = 1
//! [output]
//! dir = out
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde_json::{json, Map, Value as Json};

use crate::characteristics::{flow, lagrangian_momentum_error};
use crate::conserved::{ConservationReport, ReportObserver};
use crate::decay::{decay_persistence, persistence_holds, support_radius, write_persistence_csv};
use crate::error::{Error, Result};
use crate::evolution::{simulate_observed, Scheme, SolverConfig, Trajectory};
use crate::grid::{Boundary, Field, Grid};
use crate::helmholtz::HelmholtzSolver;
use crate::initial::InitialDatum;
use crate::kinks::{integrate_kinks, kink_field, KinkEnsemble, KinkTrajectory};
use crate::output::{fmt_num, write_csv_file};
use crate::peakons::{integrate_peakons, peakon_field, PeakonEnsemble, PeakonTrajectory};

pub const DEFAULT_OUTPUT_DIR: &str = "out";
pub const MANIFEST: &str = "run.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Peakon,
    Kink,
    Characteristics,
    Decay,
    Verify,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Peakon => "peakon",
            Command::Kink => "kink",
            Command::Characteristics => "characteristics",
            Command::Decay => "decay",
            Command::Verify => "verify",
        }
    }

    fn solves_pde(&self) -> bool {
        matches!(
            self,
            Command::Simulate | Command::Characteristics | Command::Decay
        )
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "simulate" => Command::Simulate,
            "peakon" => Command::Peakon,
            "kink" => Command::Kink,
            "characteristics" => Command::Characteristics,
            "decay" => Command::Decay,
            "verify" => Command::Verify,
            other => return Err(Error::Domain(format!("unknown command `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Number(f64),
    Array(Vec<f64>),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(x) => write!(f, "{x}"),
            Value::Array(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "{}", parts.join(", "))
            }
            Value::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Number,
    Array,
    Text,
}

struct KeySpec {
    key: &'static str,
    kind: Kind,
    required: bool,
    default: Option<fn() -> Value>,
}

const fn req(key: &'static str, kind: Kind) -> KeySpec {
    KeySpec {
        key,
        kind,
        required: true,
        default: None,
    }
}

const fn opt(key: &'static str, kind: Kind) -> KeySpec {
    KeySpec {
        key,
        kind,
        required: false,
        default: None,
    }
}

const fn def(key: &'static str, kind: Kind, default: fn() -> Value) -> KeySpec {
    KeySpec {
        key,
        kind,
        required: false,
        default: Some(default),
    }
}

fn grid_keys(required: bool) -> Vec<KeySpec> {
    let make = if required { req } else { opt };
    vec![
        make("grid.x_min", Kind::Number),
        make("grid.dx", Kind::Number),
        make("grid.n", Kind::Number),
        make("grid.boundary", Kind::Text),
    ]
}

fn pde_keys() -> Vec<KeySpec> {
    let mut keys = grid_keys(true);
    keys.extend([
        req("equation.k", Kind::Number),
        def("equation.scheme", Kind::Text, || Value::Text("momentum".into())),
        req("time.t_end", Kind::Number),
        def("time.cfl", Kind::Number, || Value::Number(0.3)),
        def("time.snapshot_every", Kind::Number, || Value::Number(0.1)),
        def("time.monitor_every", Kind::Number, || Value::Number(0.05)),
        req("initial.name", Kind::Text),
        opt("initial.a", Kind::Number),
        opt("initial.w", Kind::Number),
        opt("initial.x0", Kind::Number),
        opt("initial.theta", Kind::Number),
        opt("initial.c", Kind::Number),
        opt("initial.q0", Kind::Number),
        opt("initial.mollified", Kind::Text),
    ]);
    keys
}

fn schema(cmd: Command) -> Vec<KeySpec> {
    let mut keys = match cmd {
        Command::Simulate => pde_keys(),
        Command::Characteristics => {
            let mut k = pde_keys();
            k.extend([
                req("characteristics.seed_min", Kind::Number),
                req("characteristics.seed_max", Kind::Number),
                def("characteristics.n_seeds", Kind::Number, || Value::Number(64.0)),
            ]);
            k
        }
        Command::Decay => {
            let mut k = pde_keys();
            k.extend([
                def("decay.tail_fraction", Kind::Number, || Value::Number(0.15)),
                def("decay.eps", Kind::Number, || Value::Number(1e-10)),
            ]);
            k
        }
        Command::Peakon | Command::Kink => {
            let mut k = grid_keys(false);
            k.extend([
                req("equation.k", Kind::Number),
                req("time.t_end", Kind::Number),
                def("time.snapshot_every", Kind::Number, || Value::Number(0.1)),
            ]);
            if cmd == Command::Peakon {
                k.extend([
                    req("peakon.p", Kind::Array),
                    req("peakon.q", Kind::Array),
                    def("peakon.dt", Kind::Number, || Value::Number(1e-3)),
                ]);
            } else {
                k.extend([
                    req("kink.c", Kind::Array),
                    req("kink.b", Kind::Array),
                    req("kink.p", Kind::Array),
                    def("kink.dt", Kind::Number, || Value::Number(1e-3)),
                ]);
            }
            k
        }
        Command::Verify => Vec::new(),
    };
    keys.push(def("output.dir", Kind::Text, || {
        Value::Text(DEFAULT_OUTPUT_DIR.into())
    }));
    keys
}

/// Parameters accepted by each built-in initial datum.
fn initial_params(name: &str) -> Result<&'static [&'static str]> {
    Ok(match name {
        "gaussian" => &["a", "w", "x0"],
        "exp_decay" => &["a", "theta", "x0"],
        "bump_momentum" => &["a"],
        "peakon" => &["c", "q0", "mollified"],
        other => {
            return Err(Error::Domain(format!(
                "unknown initial datum `{other}` (expected gaussian, exp_decay, bump_momentum or peakon)"
            )))
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    /// `section.key` → value, defaults filled in.
    pub params: BTreeMap<String, Value>,
    pub output_dir: PathBuf,
}

fn parse_number(raw: &str, key: &str, line: usize) -> Result<f64> {
    raw.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("`{key}` expects a finite number, got `{raw}`"),
        })
}

fn parse_array(raw: &str, key: &str, line: usize) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|part| {
            let part = part.trim();
            if part.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: format!("empty element in array `{key}`"),
                });
            }
            parse_number(part, key, line)
        })
        .collect()
}

pub fn parse_config(text: &str) -> Result<RunSpec> {
    let mut raw: BTreeMap<String, (String, usize)> = BTreeMap::new();
    let mut section: Option<String> = None;
    for (idx, full) in text.lines().enumerate() {
        let line = idx + 1;
        let content = full.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                line,
                message: format!("malformed section header `{content}`"),
            })?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Parse {
                    line,
                    message: format!("invalid section name `{name}`"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Parse {
                line,
                message: "key and value must both be nonempty".into(),
            });
        }
        let sec = section.as_ref().ok_or_else(|| Error::Parse {
            line,
            message: format!("`{key}` appears before any [section] header"),
        })?;
        if value.contains(',') {
            parse_array(value, key, line)?;
        }
        let full_key = format!("{sec}.{key}");
        if raw.contains_key(&full_key) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate key `{full_key}`"),
            });
        }
        raw.insert(full_key, (value.to_string(), line));
    }

    let (cmd_raw, _) = raw
        .remove("run.command")
        .ok_or_else(|| Error::MissingKey("run.command".into()))?;
    let command: Command = cmd_raw.parse()?;
    let keys = schema(command);

    if let Some(unknown) = raw.keys().find(|k| !keys.iter().any(|s| s.key == k.as_str())) {
        return Err(Error::UnknownKey(unknown.clone()));
    }

    let mut params = BTreeMap::new();
    for spec in &keys {
        match raw.get(spec.key) {
            Some((value, line)) => {
                let v = match spec.kind {
                    Kind::Number => {
                        if value.contains(',') {
                            return Err(Error::Parse {
                                line: *line,
                                message: format!("`{}` expects a single number", spec.key),
                            });
                        }
                        Value::Number(parse_number(value, spec.key, *line)?)
                    }
                    Kind::Array => Value::Array(parse_array(value, spec.key, *line)?),
                    Kind::Text => Value::Text(value.clone()),
                };
                params.insert(spec.key.to_string(), v);
            }
            None if spec.required => return Err(Error::MissingKey(spec.key.to_string())),
            None => {
                if let Some(d) = spec.default {
                    params.insert(spec.key.to_string(), d());
                }
            }
        }
    }
    let output_dir = match params.remove("output.dir") {
        Some(Value::Text(d)) => PathBuf::from(d),
        _ => PathBuf::from(DEFAULT_OUTPUT_DIR),
    };
    let spec = RunSpec {
        command,
        params,
        output_dir,
    };
    spec.validate()?;
    Ok(spec)
}

impl RunSpec {
    fn get(&self, key: &str) -> Result<&Value> {
        self.params
            .get(key)
            .ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    pub fn number(&self, key: &str) -> Result<f64> {
        match self.get(key)? {
            Value::Number(x) => Ok(*x),
            other => Err(Error::Domain(format!("`{key}` must be a number, got `{other}`"))),
        }
    }

    pub fn number_or(&self, key: &str, default: f64) -> Result<f64> {
        if self.params.contains_key(key) {
            self.number(key)
        } else {
            Ok(default)
        }
    }

    /// A number is accepted as a one-element array.
    pub fn array(&self, key: &str) -> Result<Vec<f64>> {
        match self.get(key)? {
            Value::Number(x) => Ok(vec![*x]),
            Value::Array(v) => Ok(v.clone()),
            Value::Text(t) => Err(Error::Domain(format!("`{key}` must be numeric, got `{t}`"))),
        }
    }

    pub fn text(&self, key: &str) -> Result<&str> {
        match self.get(key)? {
            Value::Text(s) => Ok(s),
            other => Err(Error::Domain(format!("`{key}` must be text, got `{other}`"))),
        }
    }

    fn integer(&self, key: &str) -> Result<i64> {
        let x = self.number(key)?;
        if x.fract() != 0.0 || x.abs() > 1e9 {
            return Err(Error::Domain(format!("`{key}` must be an integer, got {x}")));
        }
        Ok(x as i64)
    }

    pub fn k(&self) -> Result<i32> {
        let k = self.integer("equation.k")?;
        if k == 0 {
            return Err(Error::Domain(
                "k = 0 is excluded: the equation becomes linear (u_t - u_txx + u_x - u_xxx = 0)"
                    .into(),
            ));
        }
        Ok(k as i32)
    }

    pub fn has_grid(&self) -> bool {
        self.params.contains_key("grid.n")
    }

    pub fn grid(&self) -> Result<Grid> {
        let n = self.integer("grid.n")?;
        if n < 8 {
            return Err(Error::InvalidGrid(format!("need at least 8 points, got {n}")));
        }
        let boundary: Boundary = self.text("grid.boundary")?.parse()?;
        Grid::new(
            self.number("grid.x_min")?,
            self.number("grid.dx")?,
            n as usize,
            boundary,
        )
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let scheme: Scheme = self.text("equation.scheme")?.parse()?;
        let cfg = SolverConfig::new(self.k()?, self.number("time.t_end")?)
            .with_cfl(self.number("time.cfl")?)
            .with_snapshot_every(self.number("time.snapshot_every")?)
            .with_monitor_every(self.number("time.monitor_every")?)
            .with_scheme(scheme);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn initial(&self) -> Result<InitialDatum> {
        let name = self.text("initial.name")?;
        let allowed = initial_params(name)?;
        if let Some(extra) = self
            .params
            .keys()
            .filter_map(|k| k.strip_prefix("initial."))
            .find(|k| *k != "name" && !allowed.contains(k))
        {
            return Err(Error::UnknownKey(format!("initial.{extra} (not used by {name})")));
        }
        let num = |k: &str, d: f64| self.number_or(&format!("initial.{k}"), d);
        Ok(match name {
            "gaussian" => InitialDatum::Gaussian {
                a: num("a", 1.0)?,
                w: num("w", 1.0)?,
                x0: num("x0", 0.0)?,
            },
            "exp_decay" => InitialDatum::ExpDecay {
                a: num("a", 1.0)?,
                theta: num("theta", 0.5)?,
                x0: num("x0", 0.0)?,
            },
            "bump_momentum" => InitialDatum::BumpMomentum { a: num("a", 1.0)? },
            _ => {
                let mollified = match self.params.get("initial.mollified") {
                    None => false,
                    Some(Value::Text(t)) if t == "true" => true,
                    Some(Value::Text(t)) if t == "false" => false,
                    Some(other) => {
                        return Err(Error::Domain(format!(
                            "initial.mollified must be true or false, got `{other}`"
                        )))
                    }
                };
                InitialDatum::Peakon {
                    c: num("c", 1.0)?,
                    k: self.k()?,
                    q0: num("q0", 0.0)?,
                    mollified,
                }
            }
        })
    }

    fn validate(&self) -> Result<()> {
        if self.command == Command::Verify {
            return Ok(());
        }
        let k = self.k()?;
        let t_end = self.number("time.t_end")?;
        if !(t_end >= 0.0) {
            return Err(Error::Domain(format!("t_end must be nonnegative, got {t_end}")));
        }
        let every = self.number("time.snapshot_every")?;
        if !(every > 0.0) {
            return Err(Error::Domain(format!("snapshot_every must be positive, got {every}")));
        }
        if self.command.solves_pde() || self.command == Command::Kink {
            if k < 1 {
                return Err(Error::Domain(format!(
                    "{} needs a positive integer k, got {k}",
                    self.command.as_str()
                )));
            }
        }
        if self.command.solves_pde() {
            self.grid()?;
            self.solver_config()?;
            self.initial()?;
        } else {
            let present = ["grid.x_min", "grid.dx", "grid.n", "grid.boundary"]
                .iter()
                .filter(|k| self.params.contains_key(**k))
                .count();
            if present != 0 && present != 4 {
                return Err(Error::Domain(
                    "[grid] needs all of x_min, dx, n and boundary".into(),
                ));
            }
            if present == 4 {
                self.grid()?;
            }
        }
        match self.command {
            Command::Characteristics => {
                let n = self.integer("characteristics.n_seeds")?;
                if n < 2 {
                    return Err(Error::Domain(format!("n_seeds must be at least 2, got {n}")));
                }
                let (a, b) = (
                    self.number("characteristics.seed_min")?,
                    self.number("characteristics.seed_max")?,
                );
                if !(a < b) {
                    return Err(Error::Domain(format!(
                        "seed_min must be below seed_max (got {a} and {b})"
                    )));
                }
            }
            Command::Decay => {
                let f = self.number("decay.tail_fraction")?;
                if !(f > 0.0 && f < 0.4) {
                    return Err(Error::Domain(format!(
                        "tail_fraction must lie in (0, 0.4), got {f}"
                    )));
                }
                if !(self.number("decay.eps")? > 0.0) {
                    return Err(Error::Domain("eps must be positive".into()));
                }
            }
            Command::Peakon => {
                PeakonEnsemble::new(k, self.array("peakon.p")?, self.array("peakon.q")?)?;
                if !(self.number("peakon.dt")? > 0.0) {
                    return Err(Error::Domain("peakon.dt must be positive".into()));
                }
            }
            Command::Kink => {
                KinkEnsemble::new(
                    k,
                    self.array("kink.c")?,
                    self.array("kink.b")?,
                    self.array("kink.p")?,
                )?;
                if !(self.number("kink.dt")? > 0.0) {
                    return Err(Error::Domain("kink.dt must be positive".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Canonical configuration text; parsing it yields an identical spec.
    pub fn to_config_text(&self) -> String {
        let mut out = format!("[run]\ncommand = {}\n", self.command.as_str());
        let mut current = "";
        for (key, value) in &self.params {
            let (sec, name) = key.split_once('.').expect("keys are section.name");
            if sec != current {
                out.push_str(&format!("[{sec}]\n"));
                current = sec;
            }
            out.push_str(&format!("{name} = {value}\n"));
        }
        out.push_str(&format!("[output]\ndir = {}\n", self.output_dir.display()));
        out
    }
}

/// What a run produced.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Paths relative to the output directory.
    pub files: Vec<String>,
    pub results: Map<String, Json>,
}

struct Sink<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl<'a> Sink<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir,
            files: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<fs::File>> {
        let f = fs::File::create(self.dir.join(name))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn snapshot(&mut self, t: f64, u: &Field) -> Result<()> {
        let name = format!("u_t{t:.6}.csv");
        let g = u.grid();
        let rows: Vec<Vec<f64>> = (0..g.len()).map(|i| vec![g.x(i), u.values()[i]]).collect();
        write_csv_file(&self.dir.join(&name), &["x".into(), "u".into()], &rows)?;
        self.files.push(name);
        Ok(())
    }
}

fn grid_json(g: &Grid) -> Json {
    json!({
        "x_min": g.x_min(),
        "dx": g.dx(),
        "n": g.len(),
        "boundary": g.boundary().as_str(),
    })
}

fn write_manifest(
    spec: &RunSpec,
    dir: &Path,
    files: &[String],
    results: &Map<String, Json>,
    status: &str,
) -> Result<()> {
    let grid = if spec.has_grid() {
        spec.grid().map(|g| grid_json(&g)).unwrap_or(Json::Null)
    } else {
        Json::Null
    };
    let manifest = json!({
        "command": spec.command.as_str(),
        "status": status,
        "config": spec.to_config_text(),
        "grid": grid,
        "files": files,
        "results": results,
    });
    let mut w = BufWriter::new(fs::File::create(dir.join(MANIFEST))?);
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Executes `spec`, writing every output plus the manifest into
/// `spec.output_dir`. On failure the manifest records the error and lists
/// whatever was written before it.
pub fn run(spec: &RunSpec) -> Result<Outcome> {
    let dir = spec.output_dir.clone();
    let mut sink = Sink::new(&dir)?;
    let mut results = Map::new();
    let status = execute(spec, &mut sink, &mut results);
    let label = match &status {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("error: {e}"),
    };
    write_manifest(spec, &dir, &sink.files, &results, &label)?;
    status.map(|()| Outcome {
        files: sink.files,
        results,
    })
}

fn execute(spec: &RunSpec, sink: &mut Sink, results: &mut Map<String, Json>) -> Result<()> {
    match spec.command {
        Command::Simulate => {
            let (traj, report) = run_pde(spec, sink, results)?;
            drop((traj, report));
        }
        Command::Characteristics => {
            let (traj, _) = run_pde(spec, sink, results)?;
            let n = spec.integer("characteristics.n_seeds")? as usize;
            let a = spec.number("characteristics.seed_min")?;
            let b = spec.number("characteristics.seed_max")?;
            let seeds: Vec<f64> = (0..n)
                .map(|j| a + (b - a) * j as f64 / (n - 1) as f64)
                .collect();
            let fm = flow(&traj, &seeds)?;
            fm.write_csv(sink.create("characteristics.csv")?)?;
            let err = lagrangian_momentum_error(&traj, &fm)?;
            let m0 = HelmholtzSolver::new(*traj.grid()).momentum(traj.initial())?;
            results.insert("lagrangian_error".into(), json!(err));
            results.insert("max_abs_m0".into(), json!(m0.max_abs()));
            results.insert("monotone".into(), json!(fm.is_monotone()));
        }
        Command::Decay => {
            let (traj, _) = run_pde(spec, sink, results)?;
            let rows = decay_persistence(&traj, spec.number("decay.tail_fraction")?);
            write_persistence_csv(sink.create("decay.csv")?, &rows)?;
            let eps = spec.number("decay.eps")?;
            let radii: Vec<Vec<f64>> = traj
                .iter()
                .map(|(t, u)| Ok(vec![t, support_radius(u, eps)?]))
                .collect::<Result<_>>()?;
            let mut w = sink.create("support.csv")?;
            writeln!(w, "t,radius")?;
            for r in &radii {
                writeln!(w, "{},{}", fmt_num(r[0]), fmt_num(r[1]))?;
            }
            w.flush()?;
            let min_theta = rows
                .iter()
                .filter_map(|(_, r)| r.as_ref().ok())
                .map(|e| e.theta_left.min(e.theta_right))
                .fold(f64::INFINITY, f64::min);
            results.insert("persistence_holds".into(), json!(persistence_holds(&rows)));
            results.insert("min_theta".into(), json!(finite_or_null(min_theta)));
            if let Some(Err(e)) = rows.first().map(|r| &r.1) {
                return Err(clone_tail_error(e));
            }
        }
        Command::Peakon => {
            let e0 = PeakonEnsemble::new(spec.k()?, spec.array("peakon.p")?, spec.array("peakon.q")?)?;
            let t_end = spec.number("time.t_end")?;
            let outcome = integrate_peakons(&e0, t_end, spec.number("peakon.dt")?);
            let traj = match &outcome {
                Ok(t) => t.clone(),
                Err(Error::Collision { partial, .. }) => (**partial).clone(),
                Err(_) => return outcome.map(|_| ()),
            };
            traj.write_csv(sink.create("peakons.csv")?)?;
            peakon_snapshots(spec, &traj, sink)?;
            let (first, last) = (&traj.states[0], traj.last());
            results.insert("t_final".into(), json!(traj.times.last()));
            results.insert("p_final".into(), json!(last.p));
            results.insert("q_final".into(), json!(last.q));
            results.insert(
                "q_advance".into(),
                json!(last.q.iter().zip(&first.q).map(|(a, b)| a - b).collect::<Vec<_>>()),
            );
            results.insert("energy_initial".into(), json!(first.energy()));
            results.insert("energy_final".into(), json!(last.energy()));
            outcome?;
        }
        Command::Kink => {
            let e0 = KinkEnsemble::new(
                spec.k()?,
                spec.array("kink.c")?,
                spec.array("kink.b")?,
                spec.array("kink.p")?,
            )?;
            let traj = integrate_kinks(&e0, spec.number("time.t_end")?, spec.number("kink.dt")?)?;
            traj.write_csv(sink.create("kinks.csv")?)?;
            kink_snapshots(spec, &traj, sink)?;
            results.insert("t_final".into(), json!(traj.times.last()));
            results.insert("p_final".into(), json!(traj.last().p));
        }
        Command::Verify => verify(sink, results)?,
    }
    Ok(())
}

fn finite_or_null(x: f64) -> Json {
    if x.is_finite() {
        json!(x)
    } else {
        Json::Null
    }
}

fn clone_tail_error(e: &Error) -> Error {
    match e {
        Error::InsufficientTail { side, usable } => Error::InsufficientTail {
            side,
            usable: *usable,
        },
        other => Error::Domain(other.to_string()),
    }
}

fn run_pde(
    spec: &RunSpec,
    sink: &mut Sink,
    results: &mut Map<String, Json>,
) -> Result<(Trajectory, ConservationReport)> {
    let g = spec.grid()?;
    let cfg = spec.solver_config()?;
    let u0 = spec.initial()?.sample(g)?;
    let solver = HelmholtzSolver::new(g);
    let mut obs = ReportObserver::new(&solver);
    let traj = match simulate_observed(&u0, &cfg, &mut obs) {
        Ok(t) => t,
        Err(Error::BlowUp { time, partial }) => {
            for (t, u) in partial.iter() {
                sink.snapshot(t, u)?;
            }
            obs.report.write_csv(sink.create("conservation.csv")?)?;
            return Err(Error::BlowUp { time, partial });
        }
        Err(e) => return Err(e),
    };
    for (t, u) in traj.iter() {
        sink.snapshot(t, u)?;
    }
    let report = obs.report;
    let mut w = sink.create("conservation.csv")?;
    report.write_csv(&mut w)?;
    w.flush()?;
    results.insert("h0_drift".into(), json!(ConservationReport::drift(&report.h0)));
    results.insert("l1_u_drift".into(), json!(ConservationReport::drift(&report.l1_u)));
    results.insert("l1_m_drift".into(), json!(ConservationReport::drift(&report.l1_m)));
    results.insert(
        "min_m".into(),
        json!(report.min_m.iter().copied().fold(f64::INFINITY, f64::min)),
    );
    results.insert("slope_floor".into(), json!(report.slope_floor()));
    results.insert("snapshots".into(), json!(traj.len()));
    Ok((traj, report))
}

/// Indices of the recorded times closest to each multiple of `every`.
fn cadence(times: &[f64], every: f64) -> Vec<usize> {
    let t_end = *times.last().expect("nonempty");
    let mut out = Vec::new();
    let mut j = 0usize;
    loop {
        let target = (j as f64 * every).min(t_end);
        let i = times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
            .map(|(i, _)| i)
            .expect("nonempty");
        if out.last() != Some(&i) {
            out.push(i);
        }
        if target >= t_end {
            break;
        }
        j += 1;
    }
    out
}

fn peakon_snapshots(spec: &RunSpec, traj: &PeakonTrajectory, sink: &mut Sink) -> Result<()> {
    if !spec.has_grid() {
        return Ok(());
    }
    let g = spec.grid()?;
    for i in cadence(&traj.times, spec.number("time.snapshot_every")?) {
        sink.snapshot(traj.times[i], &peakon_field(&traj.states[i], g))?;
    }
    Ok(())
}

fn kink_snapshots(spec: &RunSpec, traj: &KinkTrajectory, sink: &mut Sink) -> Result<()> {
    if !spec.has_grid() {
        return Ok(());
    }
    let g = spec.grid()?;
    for i in cadence(&traj.times, spec.number("time.snapshot_every")?) {
        sink.snapshot(traj.times[i], &kink_field(&traj.states[i], g))?;
    }
    Ok(())
}

struct Scenario {
    name: &'static str,
    config: &'static str,
    check: fn(&Outcome) -> std::result::Result<(), String>,
}

fn result_f64(o: &Outcome, key: &str) -> std::result::Result<f64, String> {
    o.results
        .get(key)
        .and_then(Json::as_f64)
        .ok_or_else(|| format!("missing result `{key}`"))
}

fn result_vec(o: &Outcome, key: &str) -> std::result::Result<Vec<f64>, String> {
    o.results
        .get(key)
        .and_then(Json::as_array)
        .map(|v| v.iter().filter_map(Json::as_f64).collect())
        .ok_or_else(|| format!("missing result `{key}`"))
}

fn scenarios() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "positive_momentum_k1",
            config: "[run]\ncommand = simulate\n[grid]\nx_min = -40\ndx = 0.01953125\nn = 4096\nboundary = decaying\n\
                     [equation]\nk = 1\n[time]\nt_end = 2\n[initial]\nname = bump_momentum\na = 1\n",
            check: |o| {
                let drift = result_f64(o, "h0_drift")?;
                let min_m = result_f64(o, "min_m")?;
                if drift > 1e-6 {
                    return Err(format!("h0 drift {drift:e} exceeds 1e-6"));
                }
                if min_m < -1e-8 {
                    return Err(format!("momentum dipped to {min_m:e}"));
                }
                Ok(())
            },
        },
        Scenario {
            name: "single_peakon_k2",
            config: "[run]\ncommand = peakon\n[equation]\nk = 2\n[time]\nt_end = 1\n[peakon]\np = 2\nq = 0\n",
            check: |o| {
                let adv = result_vec(o, "q_advance")?;
                match adv.first() {
                    Some(a) if (a - 4.0).abs() <= 1e-9 => Ok(()),
                    other => Err(format!("peakon advanced {other:?}, expected 4")),
                }
            },
        },
        Scenario {
            name: "kink_pair_k1",
            config: "[run]\ncommand = kink\n[equation]\nk = 1\n[time]\nt_end = 3\n[kink]\nc = 0, 0\nb = 1, 1\np = 1, -1\n",
            check: |o| {
                let p = result_vec(o, "p_final")?;
                let exact = crate::kinks::exact_symmetric_kink_position(1.0, 3.0)
                    .map_err(|e| e.to_string())?;
                match p.first() {
                    Some(x) if (x - exact).abs() <= 1e-9 => Ok(()),
                    other => Err(format!("kink at {other:?}, closed form {exact}")),
                }
            },
        },
        Scenario {
            name: "two_peakon_k_minus_1",
            config: "[run]\ncommand = peakon\n[equation]\nk = -1\n[time]\nt_end = 3\n[peakon]\np = 1, 0.5\nq = -3, 3\n",
            check: |o| {
                let h0 = result_f64(o, "energy_initial")?;
                let h1 = result_f64(o, "energy_final")?;
                if (h1 / h0 - 1.0).abs() > 1e-8 {
                    return Err(format!("energy moved from {h0} to {h1}"));
                }
                Ok(())
            },
        },
    ]
}

fn verify(sink: &mut Sink, results: &mut Map<String, Json>) -> Result<()> {
    let base = sink.dir.to_path_buf();
    let outcomes: Vec<(&'static str, Result<Outcome>, fn(&Outcome) -> std::result::Result<(), String>)> =
        scenarios()
            .into_par_iter()
            .map(|s| {
                let outcome = parse_config(s.config).and_then(|mut spec| {
                    spec.output_dir = base.join(s.name);
                    run(&spec)
                });
                (s.name, outcome, s.check)
            })
            .collect();
    let mut failures = Vec::new();
    for (name, outcome, check) in outcomes {
        let verdict = match &outcome {
            Ok(o) => {
                sink.files
                    .extend(o.files.iter().map(|f| format!("{name}/{f}")));
                check(o)
            }
            Err(e) => Err(e.to_string()),
        };
        sink.files.push(format!("{name}/{MANIFEST}"));
        match verdict {
            Ok(()) => {
                results.insert(name.into(), json!("pass"));
            }
            Err(msg) => {
                results.insert(name.into(), json!(format!("fail: {msg}")));
                failures.push(format!("{name}: {msg}"));
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Verification(failures.join("; ")))
    }
}

/// Spec for the built-in verification suite writing into `dir`.
pub fn verify_spec(dir: PathBuf) -> RunSpec {
    RunSpec {
        command: Command::Verify,
        params: BTreeMap::new(),
        output_dir: dir,
    }
}
