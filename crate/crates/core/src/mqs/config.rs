//! Run configuration: `key = value` lines under `[section]` headers.
//!
//! ```text
//! [mesh]
//! n = 32
//! [conductor]
//! center = 0.5, 0.5
//! radius = 0.2
//! sigma = 1
//! [winding]
//! w1 = 0.1 0.2 0.4 0.6 100; 0.8 0.9 0.4 0.6 -100
//! [material]
//! model = rational
//! [circuit]
//! R = 1
//! voltage = step
//! amplitude = 1
//! [time]
//! T = 1
//! tau = 0.015625
//! ```
//!
//! `#` starts a comment. Matrix rows are separated by `;`, entries by `,`
//! or whitespace. Every key has a default, so an empty file is the default
//! configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use super::MqsError;
use crate::dae::InitialGuess;
use crate::fem::{Disk, SupportRect, WindingSpec};
use crate::material::{NuCurve, ReluctivityModel, ReluctivityTable, DEFAULT_N_GRID, DEFAULT_S_MAX};

/// Winding voltage `v(t) ∈ R^m`.
#[derive(Debug, Clone, PartialEq)]
pub enum VoltageSignal {
    Constant(DVector<f64>),
    /// `amplitude` for `t ≥ t_on`, zero before.
    Step { amplitude: DVector<f64>, t_on: f64 },
    /// Piecewise linear through `(t, v)` knots, constant beyond the ends.
    Table { times: Vec<f64>, values: Vec<DVector<f64>> },
}

impl VoltageSignal {
    pub fn m(&self) -> usize {
        match self {
            VoltageSignal::Constant(v) => v.len(),
            VoltageSignal::Step { amplitude, .. } => amplitude.len(),
            VoltageSignal::Table { values, .. } => values[0].len(),
        }
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        match self {
            VoltageSignal::Constant(v) => v.clone(),
            VoltageSignal::Step { amplitude, t_on } => {
                if t >= *t_on {
                    amplitude.clone()
                } else {
                    DVector::zeros(amplitude.len())
                }
            }
            VoltageSignal::Table { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 {
                    values[0].clone()
                } else if k == times.len() {
                    values[k - 1].clone()
                } else {
                    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                    &values[k - 1] * (1.0 - w) + &values[k] * w
                }
            }
        }
    }

    /// Right-endpoint samples `v(t_k)`, `k = 1..=n`.
    pub fn samples(&self, tau: f64, n: usize) -> Vec<DVector<f64>> {
        (1..=n).map(|k| self.at(k as f64 * tau)).collect()
    }

    /// Reads a CSV table with header `t,v_1,…,v_m`.
    pub fn table_from_csv(path: &Path) -> Result<Self, MqsError> {
        let bad = |msg: String| MqsError::Config(format!("{}: {msg}", path.display()));
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| bad(e.to_string()))?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let nums: Vec<f64> = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| bad(format!("not a number: {f:?}"))))
                .collect::<Result<_, _>>()?;
            if nums.len() < 2 {
                return Err(bad("each row needs t and at least one voltage".into()));
            }
            times.push(nums[0]);
            values.push(DVector::from_column_slice(&nums[1..]));
        }
        let sig = VoltageSignal::Table { times, values };
        sig.check().map_err(bad)?;
        Ok(sig)
    }

    fn check(&self) -> Result<(), String> {
        match self {
            VoltageSignal::Table { times, values } => {
                if times.is_empty() {
                    return Err("voltage table is empty".into());
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err("voltage table times must be strictly increasing".into());
                }
                if values.iter().any(|v| v.len() != values[0].len()) {
                    return Err("voltage table rows have different widths".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Source of the initial field coefficients.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialField {
    Zero,
    /// Independent uniform values in `[-amplitude, amplitude]` per dof.
    Random { amplitude: f64 },
    /// Whitespace-separated dof values.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MqsConfig {
    pub n: usize,
    pub conductor: Disk,
    pub winding: WindingSpec,
    pub material: ReluctivityModel,
    pub s_max: f64,
    pub n_grid: usize,
    pub sigma_c: f64,
    pub r: DMatrix<f64>,
    pub voltage: VoltageSignal,
    pub t_end: f64,
    pub tau: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub initial_guess: InitialGuess,
    pub a0: InitialField,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Adds the volumetric source of the manufactured solution to the field
    /// equation. Off for every physical run.
    pub manufactured_forcing: bool,
}

impl Default for MqsConfig {
    fn default() -> Self {
        Self {
            n: 32,
            conductor: Disk { center: [0.5, 0.5], radius: 0.2 },
            winding: WindingSpec::go_return(100.0),
            material: ReluctivityModel::rational_saturation(1.0, 5.0),
            s_max: DEFAULT_S_MAX,
            n_grid: DEFAULT_N_GRID,
            sigma_c: 1.0,
            r: DMatrix::identity(1, 1),
            voltage: VoltageSignal::Step { amplitude: DVector::from_element(1, 1.0), t_on: 0.0 },
            t_end: 1.0,
            tau: 1.0 / 64.0,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            initial_guess: InitialGuess::Previous,
            a0: InitialField::Zero,
            seed: 0,
            output_dir: PathBuf::from("out"),
            manufactured_forcing: false,
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("mesh", &["n"]),
    ("conductor", &["center", "radius", "sigma"]),
    ("winding", &["kappa"]),
    ("material", &["model", "nu0", "nu_min", "nu_max", "table", "s_max", "n_grid"]),
    ("circuit", &["R", "voltage", "amplitude", "t_on", "table"]),
    ("time", &["T", "tau", "newton_tol", "newton_max_iter", "initial_guess"]),
    ("initial", &["A0", "amplitude", "file", "seed"]),
    ("output", &["dir"]),
    ("forcing", &["manufactured"]),
];

fn known_key(section: &str, key: &str) -> bool {
    if section == "winding" && key.len() > 1 && key.starts_with('w') && key[1..].parse::<usize>().is_ok_and(|j| j >= 1) {
        return true;
    }
    KEYS.iter().any(|(s, ks)| *s == section && ks.contains(&key))
}

/// One accepted `section.key = value` assignment and where it came from.
#[derive(Debug, Clone)]
struct Entry {
    section: String,
    key: String,
    value: String,
    origin: String,
}

fn parse_entries(text: &str, source: &str) -> Result<Vec<Entry>, MqsError> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let origin = format!("{source}:{}: {}", no + 1, raw.trim());
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(MqsError::Config(format!("unknown section at {origin}")));
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(MqsError::Config(format!("expected `key = value` at {origin}")));
        };
        let Some(sec) = &section else {
            return Err(MqsError::Config(format!("key outside of any [section] at {origin}")));
        };
        let key = key.trim();
        if !known_key(sec, key) {
            return Err(MqsError::Config(format!("unknown key `{sec}.{key}` at {origin}")));
        }
        out.push(Entry { section: sec.clone(), key: key.to_string(), value: value.trim().to_string(), origin });
    }
    Ok(out)
}

/// Parses `section.key=value` command-line overrides.
fn parse_override(s: &str) -> Result<Entry, MqsError> {
    let origin = format!("--set {s}");
    let (lhs, value) = s.split_once('=').ok_or_else(|| MqsError::Config(format!("expected K=V in {origin}")))?;
    let (section, key) = lhs
        .trim()
        .split_once('.')
        .ok_or_else(|| MqsError::Config(format!("override key must be section.key in {origin}")))?;
    if !KEYS.iter().any(|(s, _)| *s == section) || !known_key(section, key) {
        return Err(MqsError::Config(format!("unknown key `{section}.{key}` in {origin}")));
    }
    Ok(Entry { section: section.into(), key: key.into(), value: value.trim().into(), origin })
}

fn numbers(e: &Entry) -> Result<Vec<f64>, MqsError> {
    e.value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| MqsError::Config(format!("`{t}` is not a number at {}", e.origin))))
        .collect()
}

fn scalar(e: &Entry) -> Result<f64, MqsError> {
    match numbers(e)?.as_slice() {
        [x] => Ok(*x),
        _ => Err(MqsError::Config(format!("expected one number at {}", e.origin))),
    }
}

fn integer<T: std::str::FromStr>(e: &Entry) -> Result<T, MqsError> {
    e.value.parse().map_err(|_| MqsError::Config(format!("expected a non-negative integer at {}", e.origin)))
}

fn matrix(e: &Entry) -> Result<DMatrix<f64>, MqsError> {
    let rows: Vec<Vec<f64>> = e
        .value
        .split(';')
        .map(|r| numbers(&Entry { value: r.to_string(), ..e.clone() }))
        .collect::<Result<_, _>>()?;
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(MqsError::Config(format!("ragged or empty matrix at {}", e.origin)));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rects(e: &Entry) -> Result<Vec<SupportRect>, MqsError> {
    e.value
        .split(';')
        .filter(|r| !r.trim().is_empty())
        .map(|r| match numbers(&Entry { value: r.to_string(), ..e.clone() })?.as_slice() {
            &[x0, x1, y0, y1, kappa] => Ok(SupportRect { x0, x1, y0, y1, kappa }),
            _ => Err(MqsError::Config(format!("a winding rectangle needs `x0 x1 y0 y1 kappa` at {}", e.origin))),
        })
        .collect()
}

impl MqsConfig {
    /// Parses a configuration file, then applies `overrides` (`section.key=value`).
    pub fn from_path(path: &Path, overrides: &[String]) -> Result<Self, MqsError> {
        let text = std::fs::read_to_string(path).map_err(|e| MqsError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse_with_base(&text, &path.display().to_string(), overrides, base)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, MqsError> {
        Self::parse_with_base(text, "<config>", overrides, Path::new("."))
    }

    /// Relative file paths in the config are resolved against `base`.
    fn parse_with_base(text: &str, source: &str, overrides: &[String], base: &Path) -> Result<Self, MqsError> {
        let mut entries = parse_entries(text, source)?;
        for o in overrides {
            entries.push(parse_override(o)?);
        }
        let get = |sec: &str, key: &str| entries.iter().rev().find(|e| e.section == sec && e.key == key);
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let mut cfg = MqsConfig::default();

        if let Some(e) = get("mesh", "n") {
            cfg.n = integer(e)?;
        }
        if let Some(e) = get("conductor", "center") {
            match numbers(e)?.as_slice() {
                &[x, y] => cfg.conductor.center = [x, y],
                _ => return Err(MqsError::Config(format!("center needs two coordinates at {}", e.origin))),
            }
        }
        if let Some(e) = get("conductor", "radius") {
            cfg.conductor.radius = scalar(e)?;
        }
        if let Some(e) = get("conductor", "sigma") {
            cfg.sigma_c = scalar(e)?;
        }

        let mut explicit: Vec<(usize, &Entry)> = entries
            .iter()
            .filter(|e| e.section == "winding" && e.key != "kappa")
            .map(|e| (e.key[1..].parse::<usize>().expect("checked by known_key"), e))
            .collect();
        if !explicit.is_empty() {
            explicit.sort_by_key(|(j, _)| *j);
            explicit.dedup_by_key(|(j, _)| *j);
            let m = explicit.last().map(|(j, _)| *j).unwrap_or(0);
            if explicit.len() != m {
                return Err(MqsError::Config(format!("windings must be numbered w1..w{m} without gaps")));
            }
            // later assignments to the same wJ win
            cfg.winding.windings =
                (1..=m).map(|j| rects(get("winding", &format!("w{j}")).expect("present"))).collect::<Result<_, _>>()?;
        } else if let Some(e) = get("winding", "kappa") {
            cfg.winding = WindingSpec::go_return(scalar(e)?);
        }

        let nu_min = get("material", "nu_min").map(scalar).transpose()?.unwrap_or(1.0);
        let nu_max = get("material", "nu_max").map(scalar).transpose()?.unwrap_or(5.0);
        let model = get("material", "model").map(|e| e.value.as_str()).unwrap_or("rational");
        cfg.material = match model {
            "rational" => ReluctivityModel::rational_saturation(nu_min, nu_max),
            "constant" => ReluctivityModel::constant(get("material", "nu0").map(scalar).transpose()?.unwrap_or(1.0)),
            "table" => {
                let e = get("material", "table")
                    .ok_or_else(|| MqsError::Config("material.model = table requires material.table".into()))?;
                let t = ReluctivityTable::from_csv_path(&resolve(&e.value))
                    .map_err(|err| MqsError::Config(format!("{err} at {}", e.origin)))?;
                ReluctivityModel::uniform(NuCurve::Tabulated(t))
            }
            other => {
                let e = get("material", "model").expect("present");
                return Err(MqsError::Config(format!(
                    "unknown material model `{other}` (constant | rational | table) at {}",
                    e.origin
                )));
            }
        };
        if let Some(e) = get("material", "s_max") {
            cfg.s_max = scalar(e)?;
        }
        if let Some(e) = get("material", "n_grid") {
            cfg.n_grid = integer(e)?;
        }

        if let Some(e) = get("circuit", "R") {
            cfg.r = matrix(e)?;
        }
        let m = cfg.winding.m();
        let amplitude = match get("circuit", "amplitude") {
            Some(e) => {
                let v = numbers(e)?;
                if v.len() == 1 {
                    DVector::from_element(m, v[0])
                } else {
                    DVector::from_vec(v)
                }
            }
            None => DVector::from_element(m, 1.0),
        };
        let kind = get("circuit", "voltage").map(|e| e.value.as_str()).unwrap_or("step");
        cfg.voltage = match kind {
            "constant" => VoltageSignal::Constant(amplitude),
            "step" => VoltageSignal::Step {
                amplitude,
                t_on: get("circuit", "t_on").map(scalar).transpose()?.unwrap_or(0.0),
            },
            "table" => {
                let e = get("circuit", "table")
                    .ok_or_else(|| MqsError::Config("circuit.voltage = table requires circuit.table".into()))?;
                VoltageSignal::table_from_csv(&resolve(&e.value))?
            }
            other => {
                let e = get("circuit", "voltage").expect("present");
                return Err(MqsError::Config(format!(
                    "unknown voltage kind `{other}` (constant | step | table) at {}",
                    e.origin
                )));
            }
        };

        if let Some(e) = get("time", "T") {
            cfg.t_end = scalar(e)?;
        }
        if let Some(e) = get("time", "tau") {
            cfg.tau = scalar(e)?;
        }
        if let Some(e) = get("time", "newton_tol") {
            cfg.newton_tol = scalar(e)?;
        }
        if let Some(e) = get("time", "newton_max_iter") {
            cfg.newton_max_iter = integer(e)?;
        }
        if let Some(e) = get("time", "initial_guess") {
            cfg.initial_guess = match e.value.as_str() {
                "previous" => InitialGuess::Previous,
                "zero" => InitialGuess::Zero,
                _ => return Err(MqsError::Config(format!("initial_guess must be previous | zero at {}", e.origin))),
            };
        }

        if let Some(e) = get("initial", "seed") {
            cfg.seed = integer(e)?;
        }
        let a0_amp = get("initial", "amplitude").map(scalar).transpose()?.unwrap_or(1.0);
        cfg.a0 = match get("initial", "A0").map(|e| e.value.as_str()).unwrap_or("zero") {
            "zero" => InitialField::Zero,
            "random" => InitialField::Random { amplitude: a0_amp },
            "file" => {
                let e = get("initial", "file")
                    .ok_or_else(|| MqsError::Config("initial.A0 = file requires initial.file".into()))?;
                InitialField::File(resolve(&e.value))
            }
            other => {
                let e = get("initial", "A0").expect("present");
                return Err(MqsError::Config(format!("unknown A0 source `{other}` (zero | random | file) at {}", e.origin)));
            }
        };
        if let Some(e) = get("output", "dir") {
            cfg.output_dir = PathBuf::from(&e.value);
        }
        if let Some(e) = get("forcing", "manufactured") {
            cfg.manufactured_forcing = match e.value.as_str() {
                "true" => true,
                "false" => false,
                _ => return Err(MqsError::Config(format!("expected true | false at {}", e.origin))),
            };
        }
        Ok(cfg)
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.tau).round() as usize
    }

    /// Structural checks that do not need the mesh.
    pub fn check_basic(&self) -> Result<(), MqsError> {
        let mut problems = Vec::new();
        if !(self.t_end > 0.0) {
            problems.push(format!("T must be positive, got {}", self.t_end));
        }
        if !(self.tau > 0.0 && self.tau <= self.t_end) {
            problems.push(format!("tau must lie in (0, T], got {}", self.tau));
        } else {
            let steps = self.t_end / self.tau;
            if (steps - steps.round()).abs() > 1e-9 * steps {
                problems.push(format!("T/tau = {steps} is not an integer"));
            }
        }
        if !(self.newton_tol > 0.0) {
            problems.push("newton_tol must be positive".into());
        }
        if self.voltage.m() != self.winding.m() {
            problems.push(format!("voltage has {} components but there are {} windings", self.voltage.m(), self.winding.m()));
        }
        if self.r.nrows() != self.winding.m() {
            problems.push(format!("R is {}x{} but there are {} windings", self.r.nrows(), self.r.ncols(), self.winding.m()));
        }
        if let Err(e) = self.voltage.check() {
            problems.push(e);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(MqsError::Validation(problems))
        }
    }

    /// Renders the effective configuration in the input format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let row = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "[mesh]\nn = {}", self.n);
        let _ = writeln!(
            s,
            "[conductor]\ncenter = {}, {}\nradius = {}\nsigma = {}",
            self.conductor.center[0], self.conductor.center[1], self.conductor.radius, self.sigma_c
        );
        let _ = writeln!(s, "[winding]");
        for (j, w) in self.winding.windings.iter().enumerate() {
            let rs: Vec<String> =
                w.iter().map(|r| format!("{} {} {} {} {}", r.x0, r.x1, r.y0, r.y1, r.kappa)).collect();
            let _ = writeln!(s, "w{} = {}", j + 1, rs.join("; "));
        }
        let _ = writeln!(s, "[material]");
        match self.material.curve(crate::material::Region::Conductor) {
            NuCurve::Constant { nu0 } => {
                let _ = writeln!(s, "model = constant\nnu0 = {nu0}");
            }
            NuCurve::RationalSaturation { nu_min, nu_max } => {
                let _ = writeln!(s, "model = rational\nnu_min = {nu_min}\nnu_max = {nu_max}");
            }
            NuCurve::Tabulated(_) => {
                let _ = writeln!(s, "model = table");
            }
        }
        let _ = writeln!(s, "s_max = {}\nn_grid = {}", self.s_max, self.n_grid);
        let rows: Vec<String> = self.r.row_iter().map(|r| row(r.transpose().as_slice())).collect();
        let _ = writeln!(s, "[circuit]\nR = {}", rows.join("; "));
        match &self.voltage {
            VoltageSignal::Constant(v) => {
                let _ = writeln!(s, "voltage = constant\namplitude = {}", row(v.as_slice()));
            }
            VoltageSignal::Step { amplitude, t_on } => {
                let _ = writeln!(s, "voltage = step\namplitude = {}\nt_on = {t_on}", row(amplitude.as_slice()));
            }
            VoltageSignal::Table { .. } => {
                let _ = writeln!(s, "voltage = table");
            }
        }
        let guess = match self.initial_guess {
            InitialGuess::Previous => "previous",
            InitialGuess::Zero => "zero",
        };
        let _ = writeln!(
            s,
            "[time]\nT = {}\ntau = {}\nnewton_tol = {}\nnewton_max_iter = {}\ninitial_guess = {guess}",
            self.t_end, self.tau, self.newton_tol, self.newton_max_iter
        );
        let _ = writeln!(s, "[initial]\nseed = {}", self.seed);
        match &self.a0 {
            InitialField::Zero => {
                let _ = writeln!(s, "A0 = zero");
            }
            InitialField::Random { amplitude } => {
                let _ = writeln!(s, "A0 = random\namplitude = {amplitude}");
            }
            InitialField::File(p) => {
                let _ = writeln!(s, "A0 = file\nfile = {}", p.display());
            }
        }
        let _ = writeln!(s, "[output]\ndir = {}", self.output_dir.display());
        let _ = writeln!(s, "[forcing]\nmanufactured = {}", self.manufactured_forcing);
        s
    }
}
