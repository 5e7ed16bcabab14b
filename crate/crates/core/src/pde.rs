//! Closed-loop simulation of `X_t + ΛX_z = N d` on `z ∈ (0, 1)` with the
//! saturated boundary `X(t, 0) = H X(t, 1) + B σ(K X(t, 1))`.
//!
//! The state lives on `M` cell centres `z_j = (j + ½)Δz`. One step of the
//! two-step Lax-Friedrichs (Richtmyer) scheme is
//!
//! ```text
//! X*_{j+½} = ½(X_j + X_{j+1}) - (Δt/2Δz) Λ (X_{j+1} - X_j) + (Δt/2) N d(t+Δt/2, z_{j+½})
//! X'_j     = X_j - (Δt/Δz) Λ (X*_{j+½} - X*_{j-½}) + Δt N d(t+Δt/2, z_j)
//! ```
//!
//! with a ghost cell left of `z = 0` holding the boundary value computed from
//! the last cell, and a ghost cell right of `z = 1` copying the last cell.
//! All spatial integrals are composite midpoint sums over the cells.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::control::{self, ControlError, Plant};
use crate::linalg::{DiagMatrix, Matrix};
use crate::math;

pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum PdeError {
    Config(&'static str),
    /// `λ_max Δt / Δz` above the allowed limit.
    Cfl { ratio: f64, limit: f64 },
    Dimension { what: &'static str, expected: usize, found: usize },
    /// A non-finite value appeared in the state after the step ending at `time`.
    BlowUp { time: f64 },
    Control(ControlError),
}

impl fmt::Display for PdeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PdeError::Config(msg) => write!(f, "invalid simulation config: {msg}"),
            PdeError::Cfl { ratio, limit } => write!(f, "CFL number {ratio} exceeds {limit}"),
            PdeError::Dimension { what, expected, found } => {
                write!(f, "{what}: expected {expected} components, found {found}")
            }
            PdeError::BlowUp { time } => write!(f, "state became non-finite at t = {time}"),
            PdeError::Control(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for PdeError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            PdeError::Control(e) => Some(e),
            _ => None,
        }
    }
}

impl From<ControlError> for PdeError {
    fn from(e: ControlError) -> Self {
        PdeError::Control(e)
    }
}

fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<(), PdeError> {
    if expected == found {
        Ok(())
    } else {
        Err(PdeError::Dimension { what, expected, found })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Sin,
    Cos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Space,
    Time,
}

/// Vector-valued signal of `(t, z)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalSpec {
    Zero { components: usize },
    /// Component `i` is `a·sin(z t)` or `a·cos(z t)`.
    SinusoidalProduct { amplitude: f64, phases: Vec<Phase> },
    /// Component `i` is `a·(cos(2π k_i z) - 1)`.
    CosineProfile { amplitude: f64, frequencies: Vec<f64> },
    /// Piecewise-linear interpolation along one axis; `values[s]` is the
    /// vector at `points[s]`.
    Tabulated { axis: Axis, points: Vec<f64>, values: Vec<Vec<f64>> },
}

impl SignalSpec {
    pub fn components(&self) -> usize {
        match self {
            SignalSpec::Zero { components } => *components,
            SignalSpec::SinusoidalProduct { phases, .. } => phases.len(),
            SignalSpec::CosineProfile { frequencies, .. } => frequencies.len(),
            SignalSpec::Tabulated { values, .. } => values.first().map_or(0, Vec::len),
        }
    }

    /// Checks internal consistency and that a tabulated signal covers
    /// `z ∈ [0, 1]` or `t ∈ [0, t_max]`.
    pub fn validate(&self, t_max: f64) -> Result<(), PdeError> {
        let finite = |v: f64| v.is_finite();
        match self {
            SignalSpec::Zero { .. } => Ok(()),
            SignalSpec::SinusoidalProduct { amplitude, .. } => {
                finite(*amplitude).then_some(()).ok_or(PdeError::Config("amplitude must be finite"))
            }
            SignalSpec::CosineProfile { amplitude, frequencies } => {
                if finite(*amplitude) && frequencies.iter().all(|k| finite(*k)) {
                    Ok(())
                } else {
                    Err(PdeError::Config("cosine profile parameters must be finite"))
                }
            }
            SignalSpec::Tabulated { axis, points, values } => {
                if points.len() < 2 || points.len() != values.len() {
                    return Err(PdeError::Config("tabulated signal needs ≥ 2 samples, one vector per point"));
                }
                if points.windows(2).any(|w| !(w[0] < w[1])) || !points.iter().all(|p| finite(*p)) {
                    return Err(PdeError::Config("tabulated sample points must be strictly increasing"));
                }
                let width = values[0].len();
                if values.iter().any(|v| v.len() != width || !v.iter().all(|x| finite(*x))) {
                    return Err(PdeError::Config("tabulated values must be finite with equal width"));
                }
                let hi = match axis {
                    Axis::Space => 1.0,
                    Axis::Time => t_max,
                };
                if points[0] > 0.0 || points[points.len() - 1] < hi {
                    return Err(PdeError::Config("tabulated samples do not cover the domain"));
                }
                Ok(())
            }
        }
    }

    pub fn eval_into(&self, t: f64, z: f64, out: &mut [f64]) {
        match self {
            SignalSpec::Zero { .. } => out.iter_mut().for_each(|v| *v = 0.0),
            SignalSpec::SinusoidalProduct { amplitude, phases } => {
                for (o, p) in out.iter_mut().zip(phases) {
                    *o = amplitude
                        * match p {
                            Phase::Sin => math::sin(z * t),
                            Phase::Cos => math::cos(z * t),
                        };
                }
            }
            SignalSpec::CosineProfile { amplitude, frequencies } => {
                for (o, k) in out.iter_mut().zip(frequencies) {
                    *o = amplitude * (math::cos(2.0 * PI * k * z) - 1.0);
                }
            }
            SignalSpec::Tabulated { axis, points, values } => {
                let x = match axis {
                    Axis::Space => z,
                    Axis::Time => t,
                };
                let s = points.partition_point(|p| *p <= x).clamp(1, points.len() - 1);
                let (x0, x1) = (points[s - 1], points[s]);
                let w = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (1.0 - w) * values[s - 1][i] + w * values[s][i];
                }
            }
        }
    }

    pub fn eval(&self, t: f64, z: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.components()];
        self.eval_into(t, z, &mut out);
        out
    }
}

/// `M` equal cells on `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    cells: usize,
}

impl Grid {
    pub fn new(cells: usize) -> Result<Grid, PdeError> {
        if cells < MIN_CELLS {
            return Err(PdeError::Config("grid needs at least 8 cells"));
        }
        Ok(Grid { cells })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dz(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) / self.cells as f64
    }

    /// Left edge of cell `i`; `i = M` gives `z = 1`.
    pub fn interface(&self, i: usize) -> f64 {
        i as f64 / self.cells as f64
    }
}

/// `n`-vector field on a grid, stored cell by cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    components: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid, components: usize) -> Field {
        Field { grid, components, data: vec![0.0; grid.cells * components] }
    }

    pub fn from_fn(grid: Grid, components: usize, mut f: impl FnMut(f64, &mut [f64])) -> Field {
        let mut field = Field::zeros(grid, components);
        for j in 0..grid.cells {
            let z = grid.center(j);
            f(z, field.cell_mut(j));
        }
        field
    }

    pub fn from_signal(grid: Grid, signal: &SignalSpec, t: f64) -> Field {
        Field::from_fn(grid, signal.components(), |z, out| signal.eval_into(t, z, out))
    }

    pub fn from_data(grid: Grid, components: usize, data: Vec<f64>) -> Result<Field, PdeError> {
        check_dim("field data", grid.cells * components, data.len())?;
        Ok(Field { grid, components, data })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn cell(&self, j: usize) -> &[f64] {
        &self.data[j * self.components..(j + 1) * self.components]
    }

    pub fn cell_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.components..(j + 1) * self.components]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Value fed to the controller as `X(t, 1)`.
    pub fn outflow_trace(&self) -> &[f64] {
        self.cell(self.grid.cells - 1)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self + s·other`
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect();
        Field { data, ..*self }
    }
}

/// `√(Σ_j |X_j|² Δz)`
pub fn l2_norm(field: &Field) -> f64 {
    math::sqrt(field.data.iter().map(|v| v * v).sum::<f64>() * field.grid.dz())
}

/// `Σ_j e^{-μ z_j} X_jᵀ P X_j Δz`
pub fn lyapunov_value(field: &Field, p: &DiagMatrix, mu: f64) -> f64 {
    let g = field.grid;
    let mut acc = 0.0;
    for j in 0..g.cells {
        let q: f64 = field.cell(j).iter().zip(p.entries()).map(|(x, w)| w * x * x).sum();
        acc += math::exp(-mu * g.center(j)) * q;
    }
    acc * g.dz()
}

/// `DV(X)h = 2 Σ_j e^{-μ z_j} ⟨P X_j, h_j⟩ Δz`
pub fn lyapunov_derivative(field: &Field, h: &Field, p: &DiagMatrix, mu: f64) -> f64 {
    let g = field.grid;
    let mut acc = 0.0;
    for j in 0..g.cells {
        let ip: f64 = field.cell(j).iter().zip(h.cell(j)).zip(p.entries()).map(|((x, y), w)| w * x * y).sum();
        acc += math::exp(-mu * g.center(j)) * ip;
    }
    2.0 * acc * g.dz()
}

/// Relative gap between the central difference `(V(X+sh) - V(X-sh))/2s`
/// and the analytic derivative. The denominator is
/// `max(|DV(X)h|, λ_max(P)·‖h‖²)` so that `X = 0` is well defined.
pub fn frechet_check(p: &DiagMatrix, mu: f64, x: &Field, h: &Field, step: f64) -> f64 {
    let fd = (lyapunov_value(&x.axpy(step, h), p, mu) - lyapunov_value(&x.axpy(-step, h), p, mu)) / (2.0 * step);
    let exact = lyapunov_derivative(x, h, p, mu);
    let hn = l2_norm(h);
    let scale = exact.abs().max(p.max() * hn * hn);
    if scale == 0.0 {
        return 0.0;
    }
    math::abs(fd - exact) / scale
}

/// Constants of a dissipation bound
/// `‖X(t)‖ ≤ e^{-c₃t/2} √(c₂/c₁) ‖X₀‖ + (χ/√c₁) √(∫₀ᵗ ‖d‖²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IssBoundParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub chi: f64,
    pub x0_norm: f64,
}

impl IssBoundParams {
    pub fn new(c1: f64, c2: f64, c3: f64, chi: f64, x0_norm: f64) -> Result<IssBoundParams, PdeError> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(c1) && pos(c2) && pos(c3) && pos(chi)) {
            return Err(PdeError::Config("c1, c2, c3, chi must be positive"));
        }
        if !(x0_norm >= 0.0) || !x0_norm.is_finite() {
            return Err(PdeError::Config("initial norm must be non-negative"));
        }
        if c1 > c2 {
            return Err(PdeError::Config("c1 must not exceed c2"));
        }
        Ok(IssBoundParams { c1, c2, c3, chi, x0_norm })
    }

    /// `c₁ = e^{-μ} λ_min(P)`, `c₂ = λ_max(P)`, `c₃ = α`.
    pub fn from_lyapunov(p: &DiagMatrix, mu: f64, alpha: f64, chi: f64, x0_norm: f64) -> Result<IssBoundParams, PdeError> {
        IssBoundParams::new(math::exp(-mu) * p.min(), p.max(), alpha, chi, x0_norm)
    }
}

pub fn iss_rhs(t: f64, params: &IssBoundParams, disturbance_energy: f64) -> f64 {
    math::exp(-params.c3 * t / 2.0) * math::sqrt(params.c2 / params.c1) * params.x0_norm
        + params.chi / math::sqrt(params.c1) * math::sqrt(disturbance_energy.max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: Grid,
    pub t_final: f64,
    pub cfl: f64,
    pub disturbance: SignalSpec,
    pub initial: SignalSpec,
    /// Record every `snapshot_stride`-th step (the last step is always kept).
    pub snapshot_stride: usize,
    pub record_snapshots: bool,
    /// `(P, μ)` of a Lyapunov functional to evaluate along the run.
    pub lyapunov: Option<(DiagMatrix, f64)>,
}

impl SimConfig {
    pub fn validate(&self, plant: &Plant) -> Result<(), PdeError> {
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(PdeError::Config("t_final must be positive"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(PdeError::Config("cfl must lie in (0, 1]"));
        }
        if self.snapshot_stride == 0 {
            return Err(PdeError::Config("snapshot stride must be positive"));
        }
        check_dim("disturbance", plant.disturbances(), self.disturbance.components())?;
        check_dim("initial condition", plant.states(), self.initial.components())?;
        self.disturbance.validate(self.t_final)?;
        self.initial.validate(self.t_final)?;
        if let Some((p, mu)) = &self.lyapunov {
            check_dim("Lyapunov weight", plant.states(), p.dim())?;
            if !p.is_positive() || !(*mu >= 0.0) {
                return Err(PdeError::Config("Lyapunov weight must be positive"));
            }
        }
        Ok(())
    }

    /// Uniform step `Δt = T / ⌈T / Δt_max⌉` with `Δt_max = cfl·Δz/λ_max`.
    pub fn time_step(&self, plant: &Plant) -> (f64, usize) {
        let lmax = plant.lambda().max();
        let dt_max = self.cfl * self.grid.dz() / lmax;
        let mut steps = math::ceil(self.t_final / dt_max) as usize;
        steps = steps.max(1);
        while lmax * (self.t_final / steps as f64) / self.grid.dz() > self.cfl {
            steps += 1;
        }
        (self.t_final / steps as f64, steps)
    }
}

/// Reusable buffers for [`step`].
#[derive(Debug, Clone)]
pub struct Workspace {
    interfaces: Vec<f64>,
    d: Vec<f64>,
    nd: Vec<f64>,
}

impl Workspace {
    pub fn new(plant: &Plant, grid: Grid) -> Workspace {
        Workspace {
            interfaces: vec![0.0; (grid.cells + 1) * plant.states()],
            d: vec![0.0; plant.disturbances()],
            nd: vec![0.0; plant.states()],
        }
    }
}

fn source(n: &Matrix, signal: &SignalSpec, t: f64, z: f64, ws_d: &mut [f64], out: &mut [f64]) {
    signal.eval_into(t, z, ws_d);
    for (i, o) in out.iter_mut().enumerate() {
        *o = n.row(i).iter().zip(ws_d.iter()).map(|(a, b)| a * b).sum();
    }
}

/// Advances `state` from `t` to `t + Δt` in place.
pub fn step(
    state: &mut Field,
    plant: &Plant,
    k: &Matrix,
    t: f64,
    dt: f64,
    disturbance: &SignalSpec,
    ws: &mut Workspace,
) -> Result<(), PdeError> {
    let grid = state.grid;
    let n = plant.states();
    check_dim("state", n, state.components)?;
    check_dim("disturbance", plant.disturbances(), disturbance.components())?;
    let lambda = plant.lambda().entries();
    let ratio = plant.lambda().max() * dt / grid.dz();
    if !(ratio <= 1.0) || !(dt > 0.0) {
        return Err(PdeError::Cfl { ratio, limit: 1.0 });
    }
    let r = dt / grid.dz();
    let th = t + dt / 2.0;
    let m = grid.cells;

    let inflow = control::closed_loop_boundary_direct(plant, k, state.outflow_trace())?;
    let outflow: Vec<f64> = state.outflow_trace().to_vec();

    for i in 0..=m {
        let left = if i == 0 { &inflow[..] } else { state.cell(i - 1) };
        let right = if i == m { &outflow[..] } else { state.cell(i) };
        source(plant.n(), disturbance, th, grid.interface(i), &mut ws.d, &mut ws.nd);
        for c in 0..n {
            ws.interfaces[i * n + c] =
                0.5 * (left[c] + right[c]) - 0.5 * r * lambda[c] * (right[c] - left[c]) + 0.5 * dt * ws.nd[c];
        }
    }
    for j in 0..m {
        source(plant.n(), disturbance, th, grid.center(j), &mut ws.d, &mut ws.nd);
        let cell = state.cell_mut(j);
        for c in 0..n {
            let flux = ws.interfaces[(j + 1) * n + c] - ws.interfaces[j * n + c];
            cell[c] += -r * lambda[c] * flux + dt * ws.nd[c];
        }
    }
    Ok(())
}

/// Recorded diagnostics of one run. All per-time lists share `times`'
/// length.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub dt: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    pub l2_norms: Vec<f64>,
    pub boundary_traces: Vec<Vec<f64>>,
    pub control_traces: Vec<Vec<f64>>,
    /// `∫₀ᵗ ∫₀¹ ‖d(θ, z)‖² dz dθ`, trapezoid rule over every step.
    pub disturbance_energy: Vec<f64>,
    pub lyapunov_values: Option<Vec<f64>>,
    pub snapshots: Option<Vec<Field>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn disturbance_sq_norm(signal: &SignalSpec, grid: Grid, t: f64, buf: &mut [f64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..grid.cells {
        signal.eval_into(t, grid.center(j), buf);
        acc += buf.iter().map(|v| v * v).sum::<f64>();
    }
    acc * grid.dz()
}

/// Runs from the configured initial signal.
pub fn simulate(plant: &Plant, k: &Matrix, config: &SimConfig) -> Result<Trajectory, PdeError> {
    config.validate(plant)?;
    simulate_from(plant, k, config, Field::from_signal(config.grid, &config.initial, 0.0))
}

/// Runs from an explicit initial field; `config.initial` is ignored.
pub fn simulate_from(plant: &Plant, k: &Matrix, config: &SimConfig, initial: Field) -> Result<Trajectory, PdeError> {
    let SimConfig { grid, snapshot_stride, .. } = *config;
    if !(config.t_final > 0.0) || !(config.cfl > 0.0 && config.cfl <= 1.0) || snapshot_stride == 0 {
        return Err(PdeError::Config("t_final, cfl and stride must be positive, cfl ≤ 1"));
    }
    check_dim("initial condition", plant.states(), initial.components)?;
    check_dim("disturbance", plant.disturbances(), config.disturbance.components())?;
    if initial.grid != grid {
        return Err(PdeError::Config("initial field grid differs from the configured grid"));
    }
    let controller = control::Controller::new(k.clone())?;
    let (dt, steps) = config.time_step(plant);
    let mut ws = Workspace::new(plant, grid);
    let mut dbuf = vec![0.0; plant.disturbances()];

    let capacity = steps / snapshot_stride + 2;
    let mut traj = Trajectory {
        grid,
        dt,
        steps,
        times: Vec::with_capacity(capacity),
        l2_norms: Vec::with_capacity(capacity),
        boundary_traces: Vec::with_capacity(capacity),
        control_traces: Vec::with_capacity(capacity),
        disturbance_energy: Vec::with_capacity(capacity),
        lyapunov_values: config.lyapunov.as_ref().map(|_| Vec::with_capacity(capacity)),
        snapshots: config.record_snapshots.then(|| Vec::with_capacity(capacity)),
    };
    let record = |traj: &mut Trajectory, state: &Field, t: f64, energy: f64| {
        let trace = state.outflow_trace().to_vec();
        traj.times.push(t);
        traj.l2_norms.push(l2_norm(state));
        traj.control_traces.push(controller.control(plant, &trace));
        traj.boundary_traces.push(trace);
        traj.disturbance_energy.push(energy);
        if let (Some(vals), Some((p, mu))) = (traj.lyapunov_values.as_mut(), config.lyapunov.as_ref()) {
            vals.push(lyapunov_value(state, p, *mu));
        }
        if let Some(snaps) = traj.snapshots.as_mut() {
            snaps.push(state.clone());
        }
    };

    let mut state = initial;
    if !state.is_finite() {
        return Err(PdeError::BlowUp { time: 0.0 });
    }
    let mut energy = 0.0;
    let mut d_prev = disturbance_sq_norm(&config.disturbance, grid, 0.0, &mut dbuf);
    record(&mut traj, &state, 0.0, energy);
    for s in 0..steps {
        let t = s as f64 * dt;
        step(&mut state, plant, k, t, dt, &config.disturbance, &mut ws)?;
        let t_next = (s + 1) as f64 * dt;
        if !state.is_finite() {
            return Err(PdeError::BlowUp { time: t_next });
        }
        let d_next = disturbance_sq_norm(&config.disturbance, grid, t_next, &mut dbuf);
        energy += 0.5 * dt * (d_prev + d_next);
        d_prev = d_next;
        if (s + 1) % snapshot_stride == 0 || s + 1 == steps {
            record(&mut traj, &state, t_next, energy);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn scalar_transport() -> Plant {
        Plant::new(
            DiagMatrix::new(vec![1.0]).unwrap(),
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 1),
            vec![1.0],
        )
        .unwrap()
    }

    fn config(cells: usize, t_final: f64, initial: SignalSpec, disturbance: SignalSpec) -> SimConfig {
        SimConfig {
            grid: Grid::new(cells).unwrap(),
            t_final,
            cfl: 0.9,
            disturbance,
            initial,
            snapshot_stride: 1,
            record_snapshots: false,
            lyapunov: None,
        }
    }

    #[test]
    fn grid_geometry() {
        assert!(Grid::new(7).is_err());
        let g = Grid::new(8).unwrap();
        assert_eq!(g.dz() * 8.0, 1.0);
        assert_eq!(g.center(0), 1.0 / 16.0);
        assert_eq!(g.interface(8), 1.0);
    }

    #[test]
    fn constant_state_is_steady_under_identity_reflection() {
        let plant = Plant::new(
            DiagMatrix::new(vec![1.0, 2.0]).unwrap(),
            Matrix::identity(2),
            Matrix::identity(2),
            Matrix::identity(2),
            vec![1.0, 1.0],
        )
        .unwrap();
        let init = SignalSpec::Tabulated { axis: Axis::Space, points: vec![0.0, 1.0], values: vec![vec![0.7, -1.3]; 2] };
        let cfg = config(40, 1.0, init, SignalSpec::Zero { components: 2 });
        let traj = simulate(&plant, &Matrix::zeros(2, 2), &cfg).unwrap();
        for tr in &traj.boundary_traces {
            assert!((tr[0] - 0.7).abs() < 1e-14 && (tr[1] + 1.3).abs() < 1e-14);
        }
    }

    #[test]
    fn equilibrium_stays_zero() {
        let plant = control::reference_plant();
        let cfg = config(32, 2.0, SignalSpec::Zero { components: 2 }, SignalSpec::Zero { components: 2 });
        let k = Matrix::from_rows(&[[-0.24, 0.0], [0.33, -0.08]]).unwrap();
        let traj = simulate(&plant, &k, &cfg).unwrap();
        assert!(traj.l2_norms.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let plant = scalar_transport();
        let mut f = Field::zeros(Grid::new(10).unwrap(), 1);
        let mut ws = Workspace::new(&plant, f.grid());
        let err = step(&mut f, &plant, &Matrix::zeros(1, 1), 0.0, 0.2, &SignalSpec::Zero { components: 1 }, &mut ws);
        assert!(matches!(err, Err(PdeError::Cfl { .. })));
    }

    #[test]
    fn time_step_divides_horizon() {
        let plant = control::reference_plant();
        let cfg = config(400, 25.0, SignalSpec::Zero { components: 2 }, SignalSpec::Zero { components: 2 });
        let (dt, steps) = cfg.time_step(&plant);
        assert!(plant.lambda().max() * dt / cfg.grid.dz() <= 0.9);
        assert!((dt * steps as f64 - 25.0).abs() < 1e-9);
    }

    #[test]
    fn tabulated_interpolation() {
        let s = SignalSpec::Tabulated { axis: Axis::Space, points: vec![0.0, 0.5, 1.0], values: vec![vec![0.0], vec![1.0], vec![3.0]] };
        assert_eq!(s.eval(0.0, 0.25), vec![0.5]);
        assert_eq!(s.eval(0.0, 0.75), vec![2.0]);
        assert_eq!(s.eval(0.0, 1.0), vec![3.0]);
        let short = SignalSpec::Tabulated { axis: Axis::Time, points: vec![0.0, 1.0], values: vec![vec![0.0], vec![1.0]] };
        assert!(short.validate(2.0).is_err());
    }

    #[test]
    fn lyapunov_constant_state() {
        let g = Grid::new(400).unwrap();
        let f = Field::from_fn(g, 2, |_, out| out.copy_from_slice(&[1.0, 0.0]));
        let p = DiagMatrix::new(vec![2.0, 3.0]).unwrap();
        let v = lyapunov_value(&f, &p, 1.0);
        let exact = 2.0 * (1.0 - math::exp(-1.0));
        assert!((v - exact).abs() / exact < 1e-3);
        assert!((l2_norm(&f) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iss_rhs_closed_forms() {
        let p = IssBoundParams::new(0.5, 2.0, 1.0, 1.5, 3.0).unwrap();
        assert!((iss_rhs(0.0, &p, 0.0) - 2.0 * 3.0).abs() < 1e-12);
        let p = IssBoundParams::new(0.5, 2.0, 1.0, 1.5, 0.0).unwrap();
        assert!((iss_rhs(4.0, &p, 4.0) - 1.5 / math::sqrt(0.5) * 2.0).abs() < 1e-12);
        assert!(IssBoundParams::new(3.0, 2.0, 1.0, 1.0, 0.0).is_err());
    }
}
