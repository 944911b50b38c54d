//! Configuration files: a TOML document with the sections `grid`,
//! `material`, `boundary`, `source`, `initial`, `quasistatic`, `schedule`,
//! `solver`, `output` and `check`. Unknown keys are errors.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use evopiezo_core::coefficient::gaussian_convolution_block;
use evopiezo_core::evolution::{Schedule, SolverOptions, SourceComponent, TimeProfile};
use evopiezo_core::wellposedness::CheckOptions;
use evopiezo_core::{
    CoefficientBlock, Field, FieldKind, Grid, MaterialBlocks, MaterialConfig, Slot, SolverMethod,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error("cannot read config: {0}")]
    Io(String),
}

fn bad(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        key: key.into(),
        message: message.into(),
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Full,
    Quasistatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoigtConvention {
    /// Unweighted Voigt with engineering shear strains; converted on load.
    #[default]
    Engineering,
    /// Already in the √2-weighted convention.
    Weighted,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    mode: Mode,
    grid: RawGrid,
    #[serde(default)]
    material: RawMaterial,
    boundary: Option<RawBoundary>,
    #[serde(default)]
    source: Vec<RawSource>,
    #[serde(default)]
    initial: Vec<RawInitial>,
    quasistatic: Option<RawQuasi>,
    schedule: Option<RawSchedule>,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    check: RawCheck,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n: [i64; 3],
    length: [f64; 3],
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    #[serde(default)]
    voigt: VoigtConvention,
    rho: Option<RawBlock>,
    #[serde(rename = "C")]
    c: Option<RawBlock>,
    e: Option<RawBlock>,
    lambda: Option<RawBlock>,
    p: Option<RawBlock>,
    epsilon: Option<RawBlock>,
    mu: Option<RawBlock>,
    alpha: Option<RawBlock>,
    theta0: Option<RawBlock>,
    sigma: Option<RawBlock>,
    kappa0_inv: Option<RawBlock>,
    kappa1: Option<RawBlock>,
    beta: Option<RawBlock>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValue {
    value: Option<f64>,
    matrix: Option<Vec<Vec<f64>>>,
    vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    min: [f64; 3],
    max: [f64; 3],
    value: Option<f64>,
    matrix: Option<Vec<Vec<f64>>>,
    vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawBlock {
    Constant {
        value: Option<f64>,
        matrix: Option<Vec<Vec<f64>>>,
        vector: Option<Vec<f64>>,
    },
    Regions {
        default: RawValue,
        #[serde(default)]
        region: Vec<RawRegion>,
    },
    Gaussian {
        width: f64,
        amplitude: f64,
        #[serde(default)]
        shift: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    v: Option<String>,
    #[serde(rename = "E_tangential")]
    e_tangential: Option<String>,
    q_normal: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawSpatial {
    Constant {
        value: Vec<f64>,
    },
    GaussianBump {
        center: [f64; 3],
        width: f64,
        amplitude: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawTime {
    #[default]
    Constant,
    Sine {
        freq: f64,
    },
    Ramp {
        duration: f64,
    },
    Step {
        t0: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    channel: String,
    spatial: RawSpatial,
    #[serde(default)]
    time: RawTime,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    field: String,
    spatial: RawSpatial,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScalarSource {
    spatial: RawSpatial,
    #[serde(default)]
    time: RawTime,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuasi {
    psi: Option<RawScalarSource>,
    psi_dot: Option<RawScalarSource>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    dt: f64,
    steps: i64,
    #[serde(default = "default_theta")]
    theta: f64,
}

fn default_theta() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default = "default_solver_tol")]
    tolerance: f64,
    #[serde(default)]
    method: RawMethod,
}

impl Default for RawSolver {
    fn default() -> Self {
        Self {
            tolerance: default_solver_tol(),
            method: RawMethod::Direct,
        }
    }
}

fn default_solver_tol() -> f64 {
    evopiezo_core::solver::DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawMethod {
    #[default]
    Direct,
    Iterative,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    energy_log: Option<String>,
    #[serde(default)]
    snapshot_stride: usize,
    #[serde(default)]
    snapshot_fields: Vec<String>,
    report: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCheck {
    #[serde(default = "default_nu_cap")]
    nu_cap: f64,
    #[serde(default = "default_check_tol")]
    tol: f64,
}

impl Default for RawCheck {
    fn default() -> Self {
        Self {
            nu_cap: default_nu_cap(),
            tol: default_check_tol(),
        }
    }
}

fn default_nu_cap() -> f64 {
    evopiezo_core::wellposedness::DEFAULT_NU_CAP
}

fn default_check_tol() -> f64 {
    evopiezo_core::wellposedness::DEFAULT_TOL
}

/// A scalar field times a time profile (used for `ψ` and `ψ̇`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSource {
    pub field: Vec<f64>,
    pub profile: TimeProfile,
}

impl ScalarSource {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let s = self.profile.eval(t);
        self.field.iter().map(|v| v * s).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub energy_log: String,
    pub snapshot_stride: usize,
    pub snapshot_fields: Vec<String>,
    /// Report file; always written to stdout as well.
    pub report: Option<String>,
}

/// A fully validated configuration with all defaults applied.
#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub mode: Mode,
    pub grid: Grid,
    pub material: MaterialConfig,
    pub sources: Vec<SourceComponent>,
    pub initial: Vec<(Slot, Vec<f64>)>,
    pub psi: Option<ScalarSource>,
    pub psi_dot: Option<ScalarSource>,
    pub schedule: Option<Schedule>,
    pub solver: SolverOptions,
    pub output: OutputSpec,
    pub check: CheckOptions,
}

/// Source channel names `F0 … F5` and the state slot each one drives.
pub const CHANNELS: [(&str, Slot); 6] = [
    ("F0", Slot::V),
    ("F1", Slot::T),
    ("F2", Slot::E),
    ("F3", Slot::H),
    ("F4", Slot::Theta),
    ("F5", Slot::Q),
];

pub fn load_config(path: &Path) -> Result<SimulationSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_config(text: &str) -> Result<SimulationSpec> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    build(raw)
}

fn build(raw: RawConfig) -> Result<SimulationSpec> {
    let n = raw.grid.n;
    if n.iter().any(|&v| v < 1) {
        return Err(bad(
            "grid.n",
            format!("cell counts must be >= 1, got {n:?}"),
        ));
    }
    let grid = Grid::new(
        [n[0] as usize, n[1] as usize, n[2] as usize],
        raw.grid.length,
    )
    .map_err(|e| bad("grid", e.to_string()))?;

    if let Some(b) = &raw.boundary {
        for (key, v) in [
            ("boundary.v", &b.v),
            ("boundary.E_tangential", &b.e_tangential),
            ("boundary.q_normal", &b.q_normal),
        ] {
            if let Some(v) = v {
                if v != "zero" {
                    return Err(bad(
                        key,
                        format!(
                            "only homogeneous conditions are supported (\"zero\"), got \"{v}\""
                        ),
                    ));
                }
            }
        }
    }

    let material = build_material(&raw.material, &grid)?;
    if raw.mode == Mode::Quasistatic && !material.sigma.is_zero() {
        return Err(bad(
            "material.sigma",
            "quasistatic mode requires sigma = 0 (the reduction assumes no conductivity term)",
        ));
    }

    let mut sources = Vec::new();
    for (i, s) in raw.source.iter().enumerate() {
        let key = format!("source[{i}]");
        let slot = CHANNELS
            .iter()
            .find(|(name, _)| *name == s.channel)
            .map(|(_, slot)| *slot)
            .ok_or_else(|| {
                bad(
                    format!("{key}.channel"),
                    format!("unknown channel \"{}\" (expected F0..F5)", s.channel),
                )
            })?;
        if raw.mode == Mode::Quasistatic && matches!(slot, Slot::E | Slot::H) {
            return Err(bad(
                format!("{key}.channel"),
                "quasistatic mode has no E/H equations; use F0, F1, F4 or F5",
            ));
        }
        sources.push(SourceComponent {
            slot,
            field: spatial_field(&s.spatial, slot.kind(), &grid, &format!("{key}.spatial"))?,
            profile: time_profile(s.time, &format!("{key}.time"))?,
        });
    }

    let mut initial = Vec::new();
    for (i, s) in raw.initial.iter().enumerate() {
        let key = format!("initial[{i}]");
        let slot = Slot::from_name(&s.field).ok_or_else(|| {
            bad(
                format!("{key}.field"),
                format!("unknown field \"{}\"", s.field),
            )
        })?;
        if raw.mode == Mode::Quasistatic && matches!(slot, Slot::E | Slot::H) {
            return Err(bad(
                format!("{key}.field"),
                "E and H are not state variables in quasistatic mode",
            ));
        }
        initial.push((
            slot,
            spatial_field(&s.spatial, slot.kind(), &grid, &format!("{key}.spatial"))?,
        ));
    }

    let (psi, psi_dot) = match &raw.quasistatic {
        Some(q) => {
            if raw.mode != Mode::Quasistatic {
                return Err(bad(
                    "quasistatic",
                    "section only allowed with mode = \"quasistatic\"",
                ));
            }
            let conv = |s: &Option<RawScalarSource>, key: &str| -> Result<Option<ScalarSource>> {
                s.as_ref()
                    .map(|s| {
                        Ok(ScalarSource {
                            field: spatial_field(
                                &s.spatial,
                                FieldKind::Scalar,
                                &grid,
                                &format!("{key}.spatial"),
                            )?,
                            profile: time_profile(s.time, &format!("{key}.time"))?,
                        })
                    })
                    .transpose()
            };
            (
                conv(&q.psi, "quasistatic.psi")?,
                conv(&q.psi_dot, "quasistatic.psi_dot")?,
            )
        }
        None => (None, None),
    };

    let schedule = match &raw.schedule {
        Some(s) => {
            if !(s.dt > 0.0 && s.dt.is_finite()) {
                return Err(bad("schedule.dt", format!("dt must be > 0, got {}", s.dt)));
            }
            if s.steps < 1 {
                return Err(bad(
                    "schedule.steps",
                    format!("steps must be >= 1, got {}", s.steps),
                ));
            }
            if !(0.5..=1.0).contains(&s.theta) {
                return Err(bad(
                    "schedule.theta",
                    format!("theta out of [0.5,1] (got {})", s.theta),
                ));
            }
            Some(
                Schedule::new(s.dt, s.steps as usize, s.theta)
                    .map_err(|e| bad("schedule", e.to_string()))?,
            )
        }
        None => None,
    };

    if !(raw.solver.tolerance > 0.0 && raw.solver.tolerance < 1.0) {
        return Err(bad(
            "solver.tolerance",
            format!("must be in (0, 1), got {}", raw.solver.tolerance),
        ));
    }
    let solver = SolverOptions {
        tol: raw.solver.tolerance,
        method: match raw.solver.method {
            RawMethod::Direct => SolverMethod::Direct,
            RawMethod::Iterative => SolverMethod::Iterative,
        },
    };

    for f in &raw.output.snapshot_fields {
        let ok = match raw.mode {
            Mode::Full => Slot::from_name(f).is_some(),
            // E and the potential are reconstructed from the reduced state
            Mode::Quasistatic => f == "phi" || Slot::from_name(f).is_some_and(|s| s != Slot::H),
        };
        if !ok {
            return Err(bad(
                "output.snapshot_fields",
                format!("unknown field \"{f}\""),
            ));
        }
    }
    let output = OutputSpec {
        energy_log: raw
            .output
            .energy_log
            .clone()
            .unwrap_or_else(|| "energy.csv".into()),
        snapshot_stride: raw.output.snapshot_stride,
        snapshot_fields: raw.output.snapshot_fields.clone(),
        report: raw.output.report.clone(),
    };

    if !(raw.check.nu_cap >= 1.0 && raw.check.nu_cap.is_finite()) {
        return Err(bad(
            "check.nu_cap",
            format!("must be a finite number >= 1, got {}", raw.check.nu_cap),
        ));
    }
    if !(raw.check.tol.is_finite() && raw.check.tol > 0.0) {
        return Err(bad(
            "check.tol",
            format!("must be > 0, got {}", raw.check.tol),
        ));
    }
    let check = CheckOptions {
        nu_cap: raw.check.nu_cap,
        tol: raw.check.tol,
    };

    Ok(SimulationSpec {
        mode: raw.mode,
        grid,
        material,
        sources,
        initial,
        psi,
        psi_dot,
        schedule,
        solver,
        output,
        check,
    })
}

fn time_profile(t: RawTime, key: &str) -> Result<TimeProfile> {
    let finite = |v: f64, what: &str| -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad(key, format!("{what} must be finite")))
        }
    };
    Ok(match t {
        RawTime::Constant => TimeProfile::Constant,
        RawTime::Sine { freq } => TimeProfile::Sine {
            freq: finite(freq, "freq")?,
        },
        RawTime::Ramp { duration } => {
            if !(duration.is_finite() && duration >= 0.0) {
                return Err(bad(key, "ramp duration must be >= 0"));
            }
            TimeProfile::Ramp {
                duration: finite(duration, "duration")?,
            }
        }
        RawTime::Step { t0 } => TimeProfile::Step {
            t0: finite(t0, "t0")?,
        },
    })
}

fn spatial_field(s: &RawSpatial, kind: FieldKind, grid: &Grid, key: &str) -> Result<Vec<f64>> {
    let comps = kind.comps();
    let check_len = |v: &[f64], what: &str| -> Result<()> {
        if v.len() != comps {
            return Err(bad(
                key,
                format!("{what} needs {comps} components, got {}", v.len()),
            ));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(bad(key, format!("{what} must be finite")));
        }
        Ok(())
    };
    let field = match s {
        RawSpatial::Constant { value } => {
            check_len(value, "value")?;
            Field::from_fn(kind, grid, |_| value.clone())
        }
        RawSpatial::GaussianBump {
            center,
            width,
            amplitude,
        } => {
            check_len(amplitude, "amplitude")?;
            if !(width.is_finite() && *width > 0.0) {
                return Err(bad(key, "gaussian_bump width must be > 0"));
            }
            Field::from_fn(kind, grid, |x| {
                let r2: f64 = (0..3).map(|a| (x[a] - center[a]).powi(2)).sum();
                let g = (-r2 / (2.0 * width * width)).exp();
                amplitude.iter().map(|a| a * g).collect()
            })
        }
    };
    Ok(field.into_values())
}

fn value_matrix(
    value: Option<f64>,
    matrix: &Option<Vec<Vec<f64>>>,
    vector: &Option<Vec<f64>>,
    dims: (usize, usize),
    key: &str,
) -> Result<DMatrix<f64>> {
    let given = value.is_some() as u8 + matrix.is_some() as u8 + vector.is_some() as u8;
    if given != 1 {
        return Err(bad(key, "give exactly one of `value`, `matrix`, `vector`"));
    }
    let (r, c) = dims;
    let m = if let Some(v) = value {
        if r != c {
            return Err(bad(
                key,
                format!("a scalar `value` needs a square block, this one is {r}x{c}"),
            ));
        }
        DMatrix::identity(r, c) * v
    } else if let Some(rows) = matrix {
        if rows.len() != r || rows.iter().any(|row| row.len() != c) {
            return Err(bad(key, format!("`matrix` must be {r}x{c}")));
        }
        DMatrix::from_fn(r, c, |i, j| rows[i][j])
    } else {
        let v = vector.as_ref().expect("counted above");
        if c != 1 || v.len() != r {
            return Err(bad(
                key,
                format!("`vector` needs a {r}x1 block, this one is {r}x{c}"),
            ));
        }
        DMatrix::from_column_slice(r, 1, v)
    };
    if m.iter().any(|x| !x.is_finite()) {
        return Err(bad(key, "entries must be finite"));
    }
    Ok(m)
}

fn build_block(
    raw: &RawBlock,
    dims: (usize, usize),
    grid: &Grid,
    key: &str,
) -> Result<CoefficientBlock> {
    let cells = grid.cells();
    match raw {
        RawBlock::Constant {
            value,
            matrix,
            vector,
        } => Ok(CoefficientBlock::uniform(
            cells,
            value_matrix(*value, matrix, vector, dims, key)?,
        )),
        RawBlock::Regions { default, region } => {
            let base = value_matrix(
                default.value,
                &default.matrix,
                &default.vector,
                dims,
                &format!("{key}.default"),
            )?;
            let regions: Vec<([f64; 3], [f64; 3], DMatrix<f64>)> = region
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let k = format!("{key}.region[{i}]");
                    if (0..3).any(|a| r.min[a] > r.max[a]) {
                        return Err(bad(&k, "min must not exceed max"));
                    }
                    Ok((
                        r.min,
                        r.max,
                        value_matrix(r.value, &r.matrix, &r.vector, dims, &k)?,
                    ))
                })
                .collect::<Result<_>>()?;
            let blocks = (0..cells)
                .map(|c| {
                    let x = grid.center(c);
                    regions
                        .iter()
                        .rev()
                        .find(|(lo, hi, _)| (0..3).all(|a| x[a] >= lo[a] && x[a] <= hi[a]))
                        .map_or_else(|| base.clone(), |(_, _, m)| m.clone())
                })
                .collect();
            CoefficientBlock::per_cell(dims.0, dims.1, blocks).map_err(|e| bad(key, e.to_string()))
        }
        RawBlock::Gaussian {
            width,
            amplitude,
            shift,
        } => gaussian_convolution_block(grid, *width, *amplitude, *shift, dims)
            .map_err(|e| bad(key, e.to_string())),
    }
}

fn build_material(raw: &RawMaterial, grid: &Grid) -> Result<MaterialConfig> {
    let cells = grid.cells();
    let mut b = MaterialBlocks::identity(cells);
    let get = |r: &Option<RawBlock>,
               name: &str,
               dims: (usize, usize)|
     -> Result<Option<CoefficientBlock>> {
        r.as_ref()
            .map(|r| build_block(r, dims, grid, &format!("material.{name}")))
            .transpose()
    };
    if let Some(x) = get(&raw.rho, "rho", (3, 3))? {
        b.rho = x;
    }
    // engineering input is converted block by block; defaults are already weighted
    let to_weighted =
        |x: CoefficientBlock, name: &str, both_sides: bool| -> Result<CoefficientBlock> {
            if raw.voigt == VoigtConvention::Weighted {
                return Ok(x);
            }
            let w = CoefficientBlock::uniform(
                cells,
                DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    6,
                    evopiezo_core::voigt::engineering_weights().iter().copied(),
                )),
            );
            let key = format!("material.{name}");
            let left = w.mul(&x).map_err(|e| bad(&key, e.to_string()))?;
            if both_sides {
                left.mul(&w).map_err(|e| bad(&key, e.to_string()))
            } else {
                Ok(left)
            }
        };
    if let Some(x) = get(&raw.c, "C", (6, 6))? {
        b.c = to_weighted(x, "C", true)?;
    }
    if let Some(x) = get(&raw.e, "e", (6, 3))? {
        b.e = to_weighted(x, "e", false)?;
    }
    if let Some(x) = get(&raw.lambda, "lambda", (6, 1))? {
        b.lambda = to_weighted(x, "lambda", false)?;
    }
    if let Some(x) = get(&raw.p, "p", (3, 1))? {
        b.p = x;
    }
    if let Some(x) = get(&raw.epsilon, "epsilon", (3, 3))? {
        b.epsilon = x;
    }
    if let Some(x) = get(&raw.mu, "mu", (3, 3))? {
        b.mu = x;
    }
    if let Some(x) = get(&raw.alpha, "alpha", (1, 1))? {
        b.alpha = x;
    }
    if let Some(x) = get(&raw.sigma, "sigma", (3, 3))? {
        b.sigma = x;
    }
    if let Some(x) = get(&raw.kappa0_inv, "kappa0_inv", (3, 3))? {
        b.kappa0_inv = x;
    }
    if let Some(x) = get(&raw.kappa1, "kappa1", (3, 3))? {
        b.kappa1 = x;
    }
    b.beta = get(&raw.beta, "beta", (3, 3))?;
    if let Some(t) = get(&raw.theta0, "theta0", (1, 1))? {
        if t.is_nonlocal() {
            return Err(bad(
                "material.theta0",
                "the reference temperature must be local",
            ));
        }
        b.theta0 = (0..cells)
            .map(|c| t.cell_block(c).expect("local")[(0, 0)])
            .collect();
    }
    MaterialConfig::new(b).map_err(|e| bad("material", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[grid]\nn = [2, 2, 2]\nlength = [1.0, 1.0, 1.0]\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let s = parse_config(MINIMAL).unwrap();
        assert_eq!(s.mode, Mode::Full);
        assert_eq!(s.grid.cells(), 8);
        assert!(s.schedule.is_none());
        assert_eq!(s.solver.tol, 1e-12);
        assert_eq!(s.output.snapshot_stride, 0);
        assert_eq!(s.check.tol, 1e-10);
        assert_eq!(s.material.c, CoefficientBlock::identity(8, 6));
    }

    #[test]
    fn default_theta_is_half() {
        let s = parse_config(&format!("{MINIMAL}[schedule]\ndt = 0.1\nsteps = 3\n")).unwrap();
        assert_eq!(s.schedule.unwrap().theta, 0.5);
    }

    #[test]
    fn theta_out_of_range() {
        let err = parse_config(&format!(
            "{MINIMAL}[schedule]\ndt = 0.1\nsteps = 3\ntheta = 0.3\n"
        ))
        .unwrap_err();
        assert!(err.to_string().contains("theta out of [0.5,1]"), "{err}");
    }

    #[test]
    fn quasistatic_rejects_sigma() {
        let text = format!(
            "mode = \"quasistatic\"\n{MINIMAL}[material.sigma]\nkind = \"constant\"\nvalue = 1.0\n"
        );
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(&err, ConfigError::Validation { key, .. } if key == "material.sigma"));
        assert!(err.to_string().contains("sigma = 0"));
    }

    #[test]
    fn unknown_key_reports_position() {
        let err = parse_config(&format!(
            "{MINIMAL}[schedule]\ndt = 0.1\nsteps = 1\nbogus = 2\n"
        ))
        .unwrap_err();
        match err {
            ConfigError::Parse { line, message, .. } => {
                assert!(line >= 4, "line {line}");
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_line_and_column() {
        let err = parse_config("[grid]\nn = [2, 2\n").unwrap_err();
        assert!(
            matches!(err, ConfigError::Parse { line: 2.., .. }),
            "{err:?}"
        );
    }

    #[test]
    fn engineering_conversion() {
        let text = format!(
            "{MINIMAL}[material.C]\nkind = \"constant\"\nvalue = 2.0\n[material.lambda]\nkind = \"constant\"\nvector = [0, 0, 0, 1, 0, 0]\n"
        );
        let s = parse_config(&text).unwrap();
        let c = s.material.c.cell_block(0).unwrap();
        assert_eq!(c[(0, 0)], 2.0);
        assert!((c[(3, 3)] - 4.0).abs() < 1e-15);
        let l = s.material.lambda.cell_block(0).unwrap();
        assert!((l[(3, 0)] - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn regions_and_gaussian() {
        let text = format!(
            "{MINIMAL}[material.rho]\nkind = \"regions\"\ndefault = {{ value = 1.0 }}\n[[material.rho.region]]\nmin = [0.0, 0.0, 0.0]\nmax = [0.5, 1.0, 1.0]\nvalue = 3.0\n\
             [material.epsilon]\nkind = \"gaussian\"\nwidth = 0.5\namplitude = 0.2\nshift = 1.0\n"
        );
        let s = parse_config(&text).unwrap();
        assert_eq!(s.material.rho.cell_block(0).unwrap()[(0, 0)], 3.0);
        assert_eq!(s.material.rho.cell_block(7).unwrap()[(0, 0)], 1.0);
        assert!(s.material.epsilon.is_nonlocal());
    }

    #[test]
    fn sources_and_initial() {
        let text = format!(
            "{MINIMAL}[[source]]\nchannel = \"F2\"\nspatial = {{ kind = \"constant\", value = [1.0, 0.0, 0.0] }}\ntime = {{ kind = \"sine\", freq = 2.0 }}\n\
             [[initial]]\nfield = \"theta\"\nspatial = {{ kind = \"gaussian_bump\", center = [0.5, 0.5, 0.5], width = 0.2, amplitude = [1.0] }}\n"
        );
        let s = parse_config(&text).unwrap();
        assert_eq!(s.sources[0].slot, Slot::E);
        assert_eq!(s.sources[0].profile, TimeProfile::Sine { freq: 2.0 });
        assert_eq!(s.initial[0].0, Slot::Theta);
        assert_eq!(s.initial[0].1.len(), 8);
        let err = parse_config(&format!("{MINIMAL}[[source]]\nchannel = \"F9\"\nspatial = {{ kind = \"constant\", value = [1.0] }}\n")).unwrap_err();
        assert!(matches!(err, ConfigError::Validation { .. }));
    }

    #[test]
    fn rejects_bad_grid() {
        let err = parse_config("[grid]\nn = [0, 1, 1]\nlength = [1.0, 1.0, 1.0]\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation { key, .. } if key == "grid.n"));
    }
}
