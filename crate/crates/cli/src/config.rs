//! Run configuration in TOML.
//!
//! Every key is optional; unknown keys are rejected. Constraint violations
//! report the dotted key name and, when the key appears in the text, its
//! line number.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use spinpic::solver1d::{SolverParams, Splitting};

/// A value given either once for every axis or per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAxis<T> {
    One(T),
    Each(Vec<T>),
}

impl<T: Copy> PerAxis<T> {
    fn resolve(&self, dims: usize) -> Option<Vec<T>> {
        match self {
            PerAxis::One(v) => Some(vec![*v; dims]),
            PerAxis::Each(v) if v.len() == dims => Some(v.clone()),
            PerAxis::Each(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "2d")]
    TwoD,
}

impl Model {
    pub fn dims(self) -> usize {
        match self {
            Model::OneD => 1,
            Model::TwoD => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplittingName {
    Lie,
    Strang,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<Model>,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    domain: RawDomain,
    #[serde(default)]
    time: RawTime,
    #[serde(default)]
    particles: RawParticles,
    #[serde(default)]
    physics: RawPhysics,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    cells: Option<PerAxis<i64>>,
    degree: Option<PerAxis<i64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    k0: Option<f64>,
    lengths: Option<PerAxis<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    dt: Option<f64>,
    t_end: Option<f64>,
    splitting: Option<SplittingName>,
    retry_halving: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParticles {
    count: Option<i64>,
    temperature: Option<f64>,
    seed: Option<u64>,
    spin_direction: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhysics {
    hbar: Option<f64>,
    e0: Option<f64>,
    k: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tol: Option<f64>,
    max_iter: Option<i64>,
    degeneracy_eps: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<String>,
    csv_stride: Option<i64>,
    checkpoint_stride: Option<i64>,
    modes: Option<Vec<String>>,
}

/// Which field a recorded Fourier mode is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeField {
    Ex,
    Ey,
    Ez,
    Ay,
    Az,
    Bz,
}

impl ModeField {
    fn parse(name: &str, model: Model) -> Option<Self> {
        let f = match name {
            "ex" => ModeField::Ex,
            "ey" => ModeField::Ey,
            "ez" => ModeField::Ez,
            "ay" => ModeField::Ay,
            "az" => ModeField::Az,
            "bz" => ModeField::Bz,
            _ => return None,
        };
        let ok = match model {
            Model::OneD => f != ModeField::Bz,
            Model::TwoD => f != ModeField::Ay,
        };
        ok.then_some(f)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModeField::Ex => "ex",
            ModeField::Ey => "ey",
            ModeField::Ez => "ez",
            ModeField::Ay => "ay",
            ModeField::Az => "az",
            ModeField::Bz => "bz",
        }
    }
}

/// A Fourier mode to record; `index` has one entry per axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub field: ModeField,
    pub index: Vec<usize>,
}

impl ModeSpec {
    /// CSV column name, e.g. `ex_m2` or `ez_m1_0`.
    pub fn column(&self) -> String {
        let idx: Vec<String> = self.index.iter().map(|m| m.to_string()).collect();
        format!("{}_m{}", self.field.name(), idx.join("_"))
    }

    fn spec_string(&self) -> String {
        let idx: Vec<String> = self.index.iter().map(|m| m.to_string()).collect();
        format!("{}:{}", self.field.name(), idx.join(","))
    }
}

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: Model,
    pub cells: Vec<usize>,
    pub degrees: Vec<usize>,
    pub lengths: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub splitting: Splitting,
    pub retry_halving: bool,
    pub particle_count: usize,
    pub temperature: f64,
    pub seed: u64,
    pub spin_direction: [f64; 3],
    pub hbar: f64,
    pub e0: f64,
    /// Wavenumber of the initial pump along the first axis.
    pub k: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub degeneracy_eps: f64,
    pub directory: Option<String>,
    pub csv_stride: u64,
    pub checkpoint_stride: u64,
    pub modes: Vec<ModeSpec>,
}

impl SimConfig {
    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            dt: self.dt,
            tol: self.tol,
            max_iter: self.max_iter,
            degeneracy_eps: self.degeneracy_eps,
            splitting: self.splitting,
        }
    }

    /// Number of steps to reach `t_end`; a final partial step is rounded up.
    pub fn step_count(&self) -> u64 {
        let ratio = self.t_end / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as u64
        } else {
            ratio.ceil() as u64
        }
    }

    /// The resolved configuration as TOML text.
    pub fn to_toml(&self) -> String {
        let list = |v: &[usize]| format!("[{}]", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "));
        let flist = |v: &[f64]| format!("[{}]", v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", "));
        let modes: Vec<String> = self.modes.iter().map(|m| format!("\"{}\"", m.spec_string())).collect();
        let mut s = String::new();
        s += &format!("model = \"{}\"\n\n", if self.model == Model::OneD { "1d" } else { "2d" });
        s += &format!("[grid]\ncells = {}\ndegree = {}\n\n", list(&self.cells), list(&self.degrees));
        s += &format!("[domain]\nlengths = {}\n\n", flist(&self.lengths));
        s += &format!(
            "[time]\ndt = {:?}\nt_end = {:?}\nsplitting = \"{}\"\nretry_halving = {}\n\n",
            self.dt,
            self.t_end,
            if self.splitting == Splitting::Lie { "lie" } else { "strang" },
            self.retry_halving
        );
        s += &format!(
            "[particles]\ncount = {}\ntemperature = {:?}\nseed = {}\nspin_direction = {}\n\n",
            self.particle_count,
            self.temperature,
            self.seed,
            flist(&self.spin_direction)
        );
        s += &format!("[physics]\nhbar = {:?}\ne0 = {:?}\nk = {:?}\n\n", self.hbar, self.e0, self.k);
        s += &format!(
            "[solver]\ntol = {:?}\nmax_iter = {}\ndegeneracy_eps = {:?}\n\n",
            self.tol, self.max_iter, self.degeneracy_eps
        );
        s += "[output]\n";
        if let Some(dir) = &self.directory {
            s += &format!("directory = {dir:?}\n");
        }
        s += &format!(
            "csv_stride = {}\ncheckpoint_stride = {}\nmodes = [{}]\n",
            self.csv_stride,
            self.checkpoint_stride,
            modes.join(", ")
        );
        s
    }
}

/// A configuration problem, located in the source text when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.field, self.line) {
            (Some(field), Some(line)) => write!(f, "line {line}: `{field}`: {}", self.message),
            (Some(field), None) => write!(f, "`{field}`: {}", self.message),
            (None, Some(line)) => write!(f, "line {line}: {}", self.message),
            (None, None) => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of `section.key` in `text`, found by a plain scan.
fn find_key_line(text: &str, field: &str) -> Option<usize> {
    let (section, key) = match field.split_once('.') {
        Some((s, k)) => (Some(s), k),
        None => (None, field),
    };
    let key = key.split('[').next().unwrap_or(key);
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = Some(rest.trim_end_matches(']').trim().to_string());
            continue;
        }
        let Some((k, _)) = line.split_once('=') else { continue };
        let k = k.trim();
        let matches = match (section, &current) {
            (Some(s), Some(c)) => c == s && k == key,
            (Some(s), None) => k == format!("{s}.{key}"),
            (None, None) => k == key,
            (None, Some(_)) => false,
        };
        if matches {
            return Some(i + 1);
        }
    }
    None
}

struct Checker<'a> {
    text: &'a str,
}

impl Checker<'_> {
    fn fail(&self, field: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            field: Some(field.to_string()),
            line: find_key_line(self.text, field),
            message: message.into(),
        }
    }

    fn positive(&self, field: &str, v: f64) -> Result<f64, ConfigError> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.fail(field, format!("must be a positive number, got {v}")))
        }
    }

    fn count(&self, field: &str, v: i64, min: i64) -> Result<usize, ConfigError> {
        if v >= min {
            Ok(v as usize)
        } else {
            Err(self.fail(field, format!("must be an integer >= {min}, got {v}")))
        }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parse and validate a configuration.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        field: None,
        line: e.span().map(|s| line_of_offset(text, s.start)),
        message: e.message().to_string(),
    })?;
    let ck = Checker { text };
    let model = raw.model.unwrap_or(Model::OneD);
    let dims = model.dims();

    let default_cells = if dims == 1 { PerAxis::One(128) } else { PerAxis::One(16) };
    let default_degree = if dims == 1 { PerAxis::One(3) } else { PerAxis::One(2) };
    let cells_raw = raw.grid.cells.unwrap_or(default_cells);
    let cells_raw = cells_raw
        .resolve(dims)
        .ok_or_else(|| ck.fail("grid.cells", format!("expected one value or {dims} values")))?;
    let degree_raw = raw.grid.degree.unwrap_or(default_degree);
    let degree_raw = degree_raw
        .resolve(dims)
        .ok_or_else(|| ck.fail("grid.degree", format!("expected one value or {dims} values")))?;
    let mut degrees = Vec::with_capacity(dims);
    for &d in &degree_raw {
        let d = ck.count("grid.degree", d, 1)?;
        if d > spinpic::spline::MAX_DEGREE {
            return Err(ck.fail("grid.degree", format!("must be at most {}", spinpic::spline::MAX_DEGREE)));
        }
        degrees.push(d);
    }
    let mut cells = Vec::with_capacity(dims);
    for (axis, &c) in cells_raw.iter().enumerate() {
        cells.push(ck.count("grid.cells", c, degrees[axis] as i64 + 1)?);
    }

    if raw.domain.k0.is_some() && raw.domain.lengths.is_some() {
        return Err(ck.fail("domain.lengths", "give either `k0` or `lengths`, not both"));
    }
    let lengths = match (&raw.domain.lengths, raw.domain.k0) {
        (Some(l), _) => {
            let l = l
                .resolve(dims)
                .ok_or_else(|| ck.fail("domain.lengths", format!("expected one value or {dims} values")))?;
            for &v in &l {
                ck.positive("domain.lengths", v)?;
            }
            l
        }
        (None, k0) => {
            let k0 = ck.positive("domain.k0", k0.unwrap_or(std::f64::consts::FRAC_1_SQRT_2))?;
            vec![2.0 * PI / k0; dims]
        }
    };

    let dt = ck.positive("time.dt", raw.time.dt.unwrap_or(0.02))?;
    let t_end = raw.time.t_end.unwrap_or(80.0);
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(ck.fail("time.t_end", format!("must be a non-negative number, got {t_end}")));
    }
    let splitting = match raw.time.splitting.unwrap_or(SplittingName::Lie) {
        SplittingName::Lie => Splitting::Lie,
        SplittingName::Strang => Splitting::Strang,
    };
    if model == Model::TwoD && splitting == Splitting::Strang {
        return Err(ck.fail("time.splitting", "the 2d model supports only `lie`"));
    }

    let particle_count = ck.count("particles.count", raw.particles.count.unwrap_or(4000), 1)?;
    let temperature = ck.positive("particles.temperature", raw.particles.temperature.unwrap_or(3.0 / 511.0))?;
    let spin_direction = raw.particles.spin_direction.unwrap_or([0.0, 0.0, 1.0]);
    let norm = spin_direction.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(ck.fail("particles.spin_direction", format!("must be a unit vector, has length {norm}")));
    }

    let hbar = raw.physics.hbar.unwrap_or(0.0);
    if !(hbar >= 0.0 && hbar.is_finite()) {
        return Err(ck.fail("physics.hbar", format!("must be non-negative, got {hbar}")));
    }
    let e0 = raw.physics.e0.unwrap_or(3f64.sqrt());
    if !e0.is_finite() {
        return Err(ck.fail("physics.e0", "must be finite"));
    }
    let k = ck.positive("physics.k", raw.physics.k.unwrap_or(2.0 * PI / lengths[0]))?;
    let periods = k * lengths[0] / (2.0 * PI);
    if (periods - periods.round()).abs() > 1e-9 * periods.max(1.0) {
        return Err(ck.fail(
            "physics.k",
            format!("k * L / (2 pi) = {periods} must be an integer for a periodic pump"),
        ));
    }

    let tol = ck.positive("solver.tol", raw.solver.tol.unwrap_or(1e-13))?;
    let max_iter = ck.count("solver.max_iter", raw.solver.max_iter.unwrap_or(100), 1)?;
    let degeneracy_eps = raw.solver.degeneracy_eps.unwrap_or(1e-10);
    if !(degeneracy_eps >= 0.0 && degeneracy_eps.is_finite()) {
        return Err(ck.fail("solver.degeneracy_eps", "must be non-negative"));
    }

    let csv_stride = ck.count("output.csv_stride", raw.output.csv_stride.unwrap_or(1), 1)? as u64;
    let checkpoint_stride = ck.count("output.checkpoint_stride", raw.output.checkpoint_stride.unwrap_or(0), 0)? as u64;
    let default_modes: Vec<String> = match model {
        Model::OneD => vec!["ex:2".into(), "ey:2".into()],
        Model::TwoD => vec!["ex:2,0".into(), "ez:1,0".into()],
    };
    let mut modes = Vec::new();
    for text_mode in raw.output.modes.unwrap_or(default_modes) {
        modes.push(parse_mode(&text_mode, model, &cells).map_err(|m| ck.fail("output.modes", m))?);
    }

    Ok(SimConfig {
        model,
        cells,
        degrees,
        lengths,
        dt,
        t_end,
        splitting,
        retry_halving: raw.time.retry_halving.unwrap_or(false),
        particle_count,
        temperature,
        seed: raw.particles.seed.unwrap_or(0),
        spin_direction,
        hbar,
        e0,
        k,
        tol,
        max_iter,
        degeneracy_eps,
        directory: raw.output.directory,
        csv_stride,
        checkpoint_stride,
        modes,
    })
}

fn parse_mode(text: &str, model: Model, cells: &[usize]) -> Result<ModeSpec, String> {
    let (name, idx) = text
        .split_once(':')
        .ok_or_else(|| format!("mode `{text}` must look like `field:index`"))?;
    let field = ModeField::parse(name.trim(), model)
        .ok_or_else(|| format!("unknown field `{name}` for this model"))?;
    let index: Vec<usize> = idx
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("mode `{text}` has a non-integer index"))?;
    if index.len() != model.dims() {
        return Err(format!("mode `{text}` needs {} indices", model.dims()));
    }
    for (m, c) in index.iter().zip(cells) {
        if *m > c / 2 {
            return Err(format!("mode `{text}` exceeds the Nyquist index {}", c / 2));
        }
    }
    Ok(ModeSpec { field, index })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.model, Model::OneD);
        assert_eq!(c.degrees, vec![3]);
        assert_eq!(c.cells, vec![128]);
        assert_eq!(c.tol, 1e-13);
        assert_eq!(c.splitting, Splitting::Lie);
        assert_eq!(c.modes.iter().map(|m| m.column()).collect::<Vec<_>>(), ["ex_m2", "ey_m2"]);
    }

    #[test]
    fn key_lines_are_found() {
        let text = "model = \"1d\"\n\n[time]\n# step\ndt = -0.1\n";
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.field.as_deref(), Some("time.dt"));
        assert_eq!(err.line, Some(5));
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = parse_config("[time]\ndt = 0.1\nbogus = 3\n").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.message.contains("bogus"), "{}", err.message);
    }

    #[test]
    fn non_integer_pump_is_rejected() {
        let err = parse_config("[physics]\nk = 1.0\n").unwrap_err();
        assert_eq!(err.field.as_deref(), Some("physics.k"));
    }

    #[test]
    fn resolved_config_parses_back() {
        let c = parse_config("model = \"2d\"\n[grid]\ncells = [8, 6]\n[output]\nmodes = [\"bz:1,1\"]\n").unwrap();
        let again = parse_config(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn step_count_rounds() {
        let c = parse_config("[time]\ndt = 0.02\nt_end = 10\n").unwrap();
        assert_eq!(c.step_count(), 500);
        let c = parse_config("[time]\ndt = 0.3\nt_end = 1\n").unwrap();
        assert_eq!(c.step_count(), 4);
    }
}
