//! JSON run configuration and the structured output formats.
//!
//! Numbers in every emitted file are written with 17 significant digits
//! (`{:.16e}`), enough to round-trip any `f64` exactly. Matrices are
//! row-major nested arrays; S12 tensors are nested `[i][j][k]` arrays.

use std::io;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conservation::InvariantReport;
use crate::dynamics::{Scheme, Trajectory};
use crate::error::{Error, Result};
use crate::jet::S12Tensor;
use crate::kernel::{Kernel, KernelFamily};
use crate::matching::{OptimizerSettings, RegistrationProblem, RegistrationResult, Target};
use crate::phase::{JetOrder, ParticleState, SystemState};
use crate::sample::randomize_momenta;

/// Scale of momenta drawn for fields left out of a config when a seed is
/// supplied.
pub const SEEDED_MOMENTUM_SCALE: f64 = 0.5;

type Matrix = Vec<Vec<f64>>;
type Cube = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dim: usize,
    pub order: usize,
    pub kernel: KernelConfig,
    pub integrator: IntegratorConfig,
    pub particles: Vec<ParticleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, rename = "match", skip_serializing_if = "Option::is_none")]
    pub matching: Option<MatchConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_family")]
    pub family: KernelFamily,
    #[serde(default = "one")]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub scheme: Scheme,
}

/// Particle record shared by configs and trajectory snapshots. Absent
/// jet fields default to the identity jet, absent momenta to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleConfig {
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Cube>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_g: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_s: Option<Cube>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Cube>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tolerance")]
    pub grad_tolerance: f64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let d = OptimizerSettings::default();
        OptimizerConfig {
            max_iters: d.max_iters,
            grad_tolerance: d.grad_tolerance,
            fd_step: d.fd_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchConfig {
    pub targets: Vec<TargetConfig>,
    pub lambda: f64,
    #[serde(default = "one")]
    pub w_g: f64,
    #[serde(default = "one")]
    pub w_s: f64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn default_family() -> KernelFamily {
    KernelFamily::Gaussian
}

fn one() -> f64 {
    1.0
}

fn default_max_iters() -> usize {
    OptimizerSettings::default().max_iters
}

fn default_tolerance() -> f64 {
    OptimizerSettings::default().grad_tolerance
}

fn default_fd_step() -> f64 {
    OptimizerSettings::default().fd_step
}

fn vector(field: &str, v: &[f64], d: usize) -> Result<Vec<f64>> {
    if v.len() != d {
        return Err(Error::validation(
            field,
            format!("expected {d} entries, found {}", v.len()),
        ));
    }
    if let Some(n) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::validation(format!("{field}[{n}]"), "not a finite number"));
    }
    Ok(v.to_vec())
}

fn matrix(field: &str, rows: &Matrix, d: usize) -> Result<DMatrix<f64>> {
    if rows.len() != d {
        return Err(Error::validation(
            field,
            format!("expected {d} rows, found {}", rows.len()),
        ));
    }
    let mut flat = Vec::with_capacity(d * d);
    for (i, row) in rows.iter().enumerate() {
        flat.extend(vector(&format!("{field}[{i}]"), row, d)?);
    }
    Ok(DMatrix::from_row_slice(d, d, &flat))
}

fn cube(field: &str, c: &Cube, d: usize) -> Result<S12Tensor> {
    if c.len() != d {
        return Err(Error::validation(
            field,
            format!("expected {d} slices, found {}", c.len()),
        ));
    }
    let mut flat = Vec::with_capacity(d * d * d);
    for (i, m) in c.iter().enumerate() {
        if m.len() != d {
            return Err(Error::validation(
                format!("{field}[{i}]"),
                format!("expected {d} rows, found {}", m.len()),
            ));
        }
        for (j, row) in m.iter().enumerate() {
            flat.extend(vector(&format!("{field}[{i}][{j}]"), row, d)?);
        }
    }
    S12Tensor::new(d, flat).map_err(|e| Error::validation(field, e.to_string()))
}

fn matrix_rows(m: &DMatrix<f64>) -> Matrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn cube_rows(t: &S12Tensor) -> Cube {
    let d = t.dim();
    (0..d)
        .map(|i| (0..d).map(|j| (0..d).map(|k| t.get(i, j, k)).collect()).collect())
        .collect()
}

impl ParticleConfig {
    pub fn from_particle(p: &ParticleState) -> Self {
        ParticleConfig {
            q: p.q().to_vec(),
            g: p.g().map(matrix_rows),
            s: p.s().map(cube_rows),
            pi_q: Some(p.pi_q().to_vec()),
            pi_g: p.pi_g().map(matrix_rows),
            pi_s: p.pi_s().map(cube_rows),
        }
    }

    fn has_momenta(&self) -> bool {
        self.pi_q.is_some() || self.pi_g.is_some() || self.pi_s.is_some()
    }

    fn build(&self, field: &str, order: JetOrder, d: usize) -> Result<ParticleState> {
        let q = vector(&format!("{field}.q"), &self.q, d)?;
        let pi_q = match &self.pi_q {
            Some(v) => vector(&format!("{field}.pi_q"), v, d)?,
            None => vec![0.0; d],
        };
        let forbid = |present: bool, key: &str| {
            if present {
                Err(Error::validation(
                    format!("{field}.{key}"),
                    format!("not allowed for order-{} particles", order.as_usize()),
                ))
            } else {
                Ok(())
            }
        };
        if order < JetOrder::One {
            forbid(self.g.is_some(), "g")?;
            forbid(self.pi_g.is_some(), "pi_g")?;
        }
        if order < JetOrder::Two {
            forbid(self.s.is_some(), "s")?;
            forbid(self.pi_s.is_some(), "pi_s")?;
        }
        let g = match &self.g {
            Some(m) => matrix(&format!("{field}.g"), m, d)?,
            None => DMatrix::identity(d, d),
        };
        let pi_g = match &self.pi_g {
            Some(m) => matrix(&format!("{field}.pi_g"), m, d)?,
            None => DMatrix::zeros(d, d),
        };
        let s = match &self.s {
            Some(c) => cube(&format!("{field}.s"), c, d)?,
            None => S12Tensor::zeros(d),
        };
        let pi_s = match &self.pi_s {
            Some(c) => cube(&format!("{field}.pi_s"), c, d)?,
            None => S12Tensor::zeros(d),
        };
        let built = match order {
            JetOrder::Zero => ParticleState::order0(q, pi_q),
            JetOrder::One => ParticleState::order1(q, g, pi_q, pi_g),
            JetOrder::Two => ParticleState::order2(q, g, s, pi_q, pi_g, pi_s),
        };
        built.map_err(|e| Error::validation(field, e.to_string()))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::validation("config", e.to_string()))
    }

    pub fn jet_order(&self) -> Result<JetOrder> {
        JetOrder::from_usize(self.order).map_err(|e| Error::validation("order", e.to_string()))
    }

    pub fn kernel(&self) -> Result<Kernel> {
        Kernel::new(self.kernel.family, self.kernel.sigma, self.dim).map_err(|e| {
            let field = if (1..=3).contains(&self.dim) {
                "kernel.sigma"
            } else {
                "dim"
            };
            Error::validation(field, e.to_string())
        })
    }

    /// Validated initial state. With a seed, particles that give no momenta
    /// at all receive seeded random momenta.
    pub fn build_state(&self, seed: Option<u64>) -> Result<SystemState> {
        let kernel = self.kernel()?;
        let order = self.jet_order()?;
        if self.particles.is_empty() {
            return Err(Error::validation("particles", "at least one particle is required"));
        }
        let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
        let particles = self
            .particles
            .iter()
            .enumerate()
            .map(|(n, p)| {
                let built = p.build(&format!("particles[{n}]"), order, self.dim)?;
                Ok(match rng.as_mut() {
                    Some(rng) if !p.has_momenta() => randomize_momenta(rng, &built, SEEDED_MOMENTUM_SCALE),
                    _ => built,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SystemState::new(kernel, particles).map_err(|e| Error::validation("particles", e.to_string()))
    }

    /// `(dt, t_final)` after validation.
    pub fn timing(&self) -> Result<(f64, f64)> {
        let IntegratorConfig { dt, t_final, .. } = self.integrator;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::validation("integrator.dt", "must be positive"));
        }
        if !(t_final.is_finite() && t_final >= 0.0) {
            return Err(Error::validation("integrator.t_final", "must be non-negative"));
        }
        if t_final > 0.0 && dt > t_final {
            return Err(Error::validation("integrator.dt", "must not exceed t_final"));
        }
        Ok((dt, t_final))
    }

    /// Grid points with the first axis varying fastest.
    pub fn grid_points(&self) -> Result<Vec<Vec<f64>>> {
        let grid = self
            .grid
            .as_ref()
            .ok_or_else(|| Error::validation("grid", "the flow command needs a grid block"))?;
        let d = self.dim;
        let lower = vector("grid.lower", &grid.lower, d)?;
        let upper = vector("grid.upper", &grid.upper, d)?;
        if grid.counts.len() != d {
            return Err(Error::validation("grid.counts", format!("expected {d} entries")));
        }
        if let Some(axis) = grid.counts.iter().position(|&c| c == 0) {
            return Err(Error::validation(format!("grid.counts[{axis}]"), "must be positive"));
        }
        let axes: Vec<Vec<f64>> = (0..d)
            .map(|a| {
                let n = grid.counts[a];
                (0..n)
                    .map(|i| {
                        if n == 1 {
                            lower[a]
                        } else {
                            lower[a] + (upper[a] - lower[a]) * i as f64 / (n - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let total: usize = grid.counts.iter().product();
        Ok((0..total)
            .map(|mut flat| {
                (0..d)
                    .map(|a| {
                        let i = flat % grid.counts[a];
                        flat /= grid.counts[a];
                        axes[a][i]
                    })
                    .collect()
            })
            .collect())
    }

    pub fn registration_problem(&self, seed: Option<u64>, dt: f64) -> Result<RegistrationProblem> {
        let m = self
            .matching
            .as_ref()
            .ok_or_else(|| Error::validation("match", "the match command needs a match block"))?;
        let source = self.build_state(seed)?;
        let d = self.dim;
        if m.targets.len() != source.len() {
            return Err(Error::validation(
                "match.targets",
                format!("expected {} targets, found {}", source.len(), m.targets.len()),
            ));
        }
        let targets = m
            .targets
            .iter()
            .enumerate()
            .map(|(n, t)| {
                let field = format!("match.targets[{n}]");
                Ok(Target {
                    y: vector(&format!("{field}.y"), &t.y, d)?,
                    g: t.g.as_ref().map(|g| matrix(&format!("{field}.g"), g, d)).transpose()?,
                    s: t.s.as_ref().map(|s| cube(&format!("{field}.s"), s, d)).transpose()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let settings = OptimizerSettings {
            max_iters: m.optimizer.max_iters,
            grad_tolerance: m.optimizer.grad_tolerance,
            fd_step: m.optimizer.fd_step,
        };
        RegistrationProblem::new(&source, targets, m.lambda, m.w_g, m.w_s, settings, dt)
    }
}

/// Writes floats with 17 significant digits; everything else compact.
struct SigFigFormatter;

impl serde_json::ser::Formatter for SigFigFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFigFormatter);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn fmt_number(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn particle_records(state: &SystemState) -> Vec<ParticleConfig> {
    state.particles().iter().map(ParticleConfig::from_particle).collect()
}

#[derive(Serialize)]
struct TrajectoryFile<'a> {
    times: &'a [f64],
    states: Vec<Vec<ParticleConfig>>,
    series: &'a std::collections::BTreeMap<String, Vec<Vec<f64>>>,
}

pub fn trajectory_json(traj: &Trajectory) -> String {
    to_json(&TrajectoryFile {
        times: &traj.times,
        states: traj.states.iter().map(particle_records).collect(),
        series: &traj.series,
    })
}

pub fn report_json(report: &InvariantReport) -> String {
    to_json(report)
}

#[derive(Serialize)]
struct MatchFile<'a> {
    converged: bool,
    iterations: usize,
    grad_norm: f64,
    history: &'a [f64],
    mismatch: &'a [f64],
    position_error: &'a [f64],
    momenta: Vec<ParticleConfig>,
    final_state: Vec<ParticleConfig>,
}

pub fn match_json(result: &RegistrationResult) -> String {
    to_json(&MatchFile {
        converged: result.converged,
        iterations: result.iterations,
        grad_norm: result.grad_norm,
        history: &result.history,
        mismatch: &result.mismatch,
        position_error: &result.position_error,
        momenta: particle_records(&result.initial),
        final_state: particle_records(result.trajectory.last()),
    })
}

/// `x0,y0[,z0],x1,y1[,z1]`: initial then advected coordinates, one point per row.
pub fn grid_csv(dim: usize, paths: &[Vec<Vec<f64>>]) -> String {
    const AXES: [&str; 3] = ["x", "y", "z"];
    let mut header: Vec<String> = Vec::with_capacity(2 * dim);
    for t in 0..2 {
        header.extend(AXES[..dim].iter().map(|a| format!("{a}{t}")));
    }
    let mut out = header.join(",");
    out.push('\n');
    for path in paths {
        let first = &path[0];
        let last = path.last().expect("paths start with the initial point");
        let row: Vec<String> = first.iter().chain(last).map(|&x| fmt_number(x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Config describing `state` at rest in time, for re-running or
/// inspecting a snapshot.
pub fn config_for_state(state: &SystemState, dt: f64, t_final: f64) -> RunConfig {
    RunConfig {
        dim: state.dim(),
        order: state.order().as_usize(),
        kernel: KernelConfig {
            family: state.kernel().family(),
            sigma: state.kernel().sigma(),
        },
        integrator: IntegratorConfig {
            dt,
            t_final,
            scheme: Scheme::Rk4,
        },
        particles: particle_records(state),
        grid: None,
        matching: None,
    }
}
