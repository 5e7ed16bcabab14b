//! Dense semidefinite programming by log-det barrier path following.
//!
//! Problems come from [`crate::lmi`] and are folded into standard form
//! `F_j(x) = F_j0 + Σ x_e F_je ⪰ 0` by [`crate::lmi::vectorize`]. The solver
//! is a textbook two-phase barrier method:
//!
//! 1. Phase 1 minimises an auxiliary slack `s` subject to `F_j(x) + sI ⪰ 0`,
//!    starting from a point where every block is positive definite by
//!    construction. A strictly negative `s` certifies strict feasibility.
//! 2. Phase 2 follows the central path of
//!    `t·cᵀx - Σ_j log det F_j(x)` for an increasing sequence of `t`,
//!    stopping once the duality-gap surrogate `ν/t` drops below tolerance.
//!
//! Each centering step is a damped Newton iteration with backtracking line
//! search. Gradient and Hessian are formed from the explicit inverse of each
//! block, which is the right trade-off for blocks of size ≤ 10.
//!
//! All iterates are kept inside the ball `‖x‖ < R` through an extra
//! `-log(R² - ‖x‖²)` term. It keeps the phase-1 problem bounded when the
//! feasible set is unbounded and keeps the Newton system positive definite.
//!
//! Infeasibility is a heuristic verdict: phase 1 converged (or its lower
//! bound rose above the declaration threshold) without finding `s < 0`. No
//! dual certificate is produced.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{self, Cholesky, SymMatrix};
use crate::lmi::{self, LmiError, LmiProblem, Point, Shape, StandardForm};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Cap on the total number of Newton steps across all centerings.
    pub max_newton_iterations: usize,
    /// Barrier weight `t` of the first centering.
    pub initial_barrier: f64,
    /// Factor by which `t` grows between centerings; must exceed 1.
    pub barrier_growth: f64,
    /// Target for the duality-gap surrogate `ν/t`, relative to
    /// `max(1, |objective|)` in phase 2 and absolute in phase 1.
    pub tolerance: f64,
    /// Phase 1 declares infeasibility once its certified lower bound on the
    /// optimal slack exceeds this value.
    pub infeasibility_threshold: f64,
    /// Radius `R` of the ball all iterates stay in.
    pub variable_bound: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_newton_iterations: 2000,
            initial_barrier: 1.0,
            barrier_growth: 20.0,
            tolerance: 1e-8,
            infeasibility_threshold: 1e-9,
            variable_bound: 1e4,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), SdpError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.max_newton_iterations == 0 {
            return Err(SdpError::InvalidOptions("max_newton_iterations must be positive"));
        }
        if !positive(self.initial_barrier) {
            return Err(SdpError::InvalidOptions("initial_barrier must be positive"));
        }
        if !(self.barrier_growth > 1.0) || !self.barrier_growth.is_finite() {
            return Err(SdpError::InvalidOptions("barrier_growth must exceed 1"));
        }
        if !positive(self.tolerance) {
            return Err(SdpError::InvalidOptions("tolerance must be positive"));
        }
        if !positive(self.infeasibility_threshold) {
            return Err(SdpError::InvalidOptions("infeasibility_threshold must be positive"));
        }
        if !positive(self.variable_bound) {
            return Err(SdpError::InvalidOptions("variable_bound must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Feasible,
    Optimal,
    Infeasible,
    NumericalFailure,
}

impl Status {
    pub fn is_success(self) -> bool {
        matches!(self, Status::Feasible | Status::Optimal)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Feasible => "feasible",
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::NumericalFailure => "numerical_failure",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// Final iterate; for `Infeasible` the best phase-1 point.
    pub point: Point,
    pub objective: Option<f64>,
    /// Per-constraint margins recomputed through [`lmi::margin`].
    pub margins: Vec<f64>,
    /// Best phase-1 slack reached; negative means strictly feasible.
    pub phase1_slack: f64,
    pub newton_iterations: usize,
}

impl Solution {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SdpError {
    InvalidOptions(&'static str),
    /// `minimize` was called on a problem without objective.
    MissingObjective,
    /// `solve_feasibility` was called on a problem with an objective.
    UnexpectedObjective,
    Lmi(LmiError),
}

impl fmt::Display for SdpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SdpError::InvalidOptions(msg) => write!(f, "invalid solver options: {msg}"),
            SdpError::MissingObjective => write!(f, "problem has no objective to minimise"),
            SdpError::UnexpectedObjective => write!(f, "feasibility problems must not carry an objective"),
            SdpError::Lmi(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SdpError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            SdpError::Lmi(e) => Some(e),
            _ => None,
        }
    }
}

impl From<LmiError> for SdpError {
    fn from(e: LmiError) -> Self {
        SdpError::Lmi(e)
    }
}

/// Finds a point satisfying every constraint strictly.
pub fn solve_feasibility(problem: &LmiProblem, opts: &SolveOptions) -> Result<Solution, SdpError> {
    if problem.objective().is_some() {
        return Err(SdpError::UnexpectedObjective);
    }
    opts.validate()?;
    let mut solver = Solver::new(problem, opts);
    let phase1 = solver.phase1(true);
    solver.finish(phase1, None)
}

/// Minimises the problem's linear objective.
pub fn minimize(problem: &LmiProblem, opts: &SolveOptions) -> Result<Solution, SdpError> {
    if problem.objective().is_none() {
        return Err(SdpError::MissingObjective);
    }
    opts.validate()?;
    let mut solver = Solver::new(problem, opts);
    let phase1 = solver.phase1(true);
    if phase1.status != Status::Feasible {
        return solver.finish(phase1, None);
    }
    let phase2 = solver.phase2(phase1.x.clone());
    let slack = phase1.slack;
    solver.finish(Outcome { slack, ..phase2 }, Some(()))
}

/// Runs phase 1 to convergence, maximising the smallest constraint margin.
///
/// The returned `phase1_slack` is the optimal slack `s*`; `-s*` is the best
/// achievable margin (within tolerance). Any objective is ignored.
pub fn maximize_margin(problem: &LmiProblem, opts: &SolveOptions) -> Result<Solution, SdpError> {
    opts.validate()?;
    let mut solver = Solver::new(problem, opts);
    let phase1 = solver.phase1(false);
    solver.finish(phase1, None)
}

struct Outcome {
    status: Status,
    x: Vec<f64>,
    slack: f64,
}

struct Solver<'a> {
    problem: &'a LmiProblem,
    form: StandardForm,
    opts: &'a SolveOptions,
    iterations: usize,
}

/// Barrier for `F_j(x) (+ sI) ⪰ 0` plus the ball term. With `slack`, the
/// last coordinate of `y` is `s` and it does not enter the ball.
struct Barrier<'f> {
    form: &'f StandardForm,
    slack: bool,
    radius2: f64,
    objective: Vec<f64>,
    nu: f64,
}

impl<'f> Barrier<'f> {
    fn new(form: &'f StandardForm, slack: bool, radius: f64) -> Self {
        let n = form.num_entries;
        let objective = if slack {
            let mut c = vec![0.0; n + 1];
            c[n] = 1.0;
            c
        } else {
            form.objective.clone()
        };
        let nu = form.blocks.iter().map(|b| b.dim() as f64).sum::<f64>() + 1.0;
        Barrier { form, slack, radius2: radius * radius, objective, nu }
    }

    fn nvars(&self) -> usize {
        self.objective.len()
    }

    fn x<'y>(&self, y: &'y [f64]) -> &'y [f64] {
        &y[..self.form.num_entries]
    }

    fn block(&self, j: usize, y: &[f64]) -> SymMatrix {
        let b = &self.form.blocks[j];
        let mut f = b.evaluate(self.x(y));
        if self.slack {
            f = f.add_scaled(&SymMatrix::identity(b.dim()), y[self.form.num_entries]);
        }
        f
    }

    fn ball_gap(&self, y: &[f64]) -> f64 {
        self.radius2 - self.x(y).iter().map(|v| v * v).sum::<f64>()
    }

    /// Log-barrier part of the objective (without `t·cᵀy`), or `None`
    /// outside the domain. The linear part is kept separate so line searches
    /// at large `t` do not difference two huge numbers.
    fn barrier_value(&self, y: &[f64]) -> Option<f64> {
        let gap = self.ball_gap(y);
        if !(gap > 0.0) {
            return None;
        }
        let mut f = -crate::math::ln(gap);
        for j in 0..self.form.blocks.len() {
            let chol = Cholesky::factor(&self.block(j, y))?;
            f -= chol.log_det();
        }
        f.is_finite().then_some(f)
    }

    fn grad_hess(&self, t: f64, y: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let nv = self.nvars();
        let nx = self.form.num_entries;
        let mut g: Vec<f64> = self.objective.iter().map(|c| t * c).collect();
        let mut h = vec![0.0; nv * nv];

        for (j, b) in self.form.blocks.iter().enumerate() {
            let d = b.dim();
            let finv = Cholesky::factor(&self.block(j, y))?.inverse();
            let fi = finv.as_slice();
            // M_e = F⁻¹ A_e for every coefficient touching this block
            let mut ms: Vec<(usize, Vec<f64>)> = b
                .coeffs
                .iter()
                .map(|(e, a)| (*e, matmul(fi, a.as_slice(), d)))
                .collect();
            if self.slack {
                ms.push((nx, fi.to_vec()));
            }
            for (a_idx, (ea, ma)) in ms.iter().enumerate() {
                g[*ea] -= (0..d).map(|i| ma[i * d + i]).sum::<f64>();
                for (eb, mb) in &ms[a_idx..] {
                    let tr = trace_prod(ma, mb, d);
                    h[ea * nv + eb] += tr;
                    if ea != eb {
                        h[eb * nv + ea] += tr;
                    }
                }
            }
        }

        let gap = self.ball_gap(y);
        let x = self.x(y);
        for i in 0..nx {
            g[i] += 2.0 * x[i] / gap;
            h[i * nv + i] += 2.0 / gap;
            for k in 0..nx {
                h[i * nv + k] += 4.0 * x[i] * x[k] / (gap * gap);
            }
        }
        Some((g, h))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

/// `tr(A B)` for row-major `d×d` matrices.
fn trace_prod(a: &[f64], b: &[f64], d: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..d {
        for k in 0..d {
            acc += a[i * d + k] * b[k * d + i];
        }
    }
    acc
}

enum Centering {
    Centered,
    /// Early exit requested by the step callback.
    Stopped,
    Stalled,
    IterationCap,
}

const NEWTON_DECREMENT_TOL: f64 = 1e-10;
const ARMIJO: f64 = 0.01;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-14;
const MAX_CENTERING_STEPS: usize = 60;
const PHASE1_EXIT_SLACK: f64 = -1.0;
/// Once the iterates reach the rounding floor (step cap or failed line
/// search), a point with Newton decrement below this is accepted as
/// approximately centred.
const LOOSE_DECREMENT: f64 = 1e-3;

impl<'a> Solver<'a> {
    fn new(problem: &'a LmiProblem, opts: &'a SolveOptions) -> Self {
        Solver { problem, form: lmi::vectorize(problem), opts, iterations: 0 }
    }

    /// Diagonal variables start at the identity, everything else at zero.
    fn initial_x(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.form.num_entries];
        for (spec, var) in self.problem.variables() {
            if let Shape::Diagonal(n) = spec.shape {
                for i in 0..n {
                    x[var.offset() + i] = 1.0;
                }
            }
        }
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        let r2 = self.opts.variable_bound * self.opts.variable_bound;
        if norm2 >= 0.25 * r2 {
            x.iter_mut().for_each(|v| *v = 0.0);
        }
        x
    }

    /// Damped Newton centering of the barrier at weight `t`. With
    /// `early_exit = Some(i)`, returns as soon as coordinate `i` (the
    /// phase-1 slack) turns negative.
    fn center(
        iterations: &mut usize,
        max_iterations: usize,
        barrier: &Barrier<'_>,
        t: f64,
        y: &mut [f64],
        early_exit: Option<usize>,
    ) -> Centering {
        let nv = barrier.nvars();
        let mut local = 0usize;
        loop {
            if *iterations >= max_iterations {
                return Centering::IterationCap;
            }
            local += 1;
            let Some((g, mut h)) = barrier.grad_hess(t, y) else {
                return Centering::Stalled;
            };
            let hs = match SymMatrix::new(nv, h.clone()) {
                Ok(hs) => hs,
                Err(_) => return Centering::Stalled,
            };
            let chol = match Cholesky::factor(&hs) {
                Some(c) => c,
                None => {
                    let scale = (0..nv).map(|i| h[i * nv + i].abs()).fold(0.0, f64::max).max(1.0);
                    for i in 0..nv {
                        h[i * nv + i] += 1e-12 * scale;
                    }
                    match Cholesky::factor_slice(nv, &h) {
                        Some(c) => c,
                        None => return Centering::Stalled,
                    }
                }
            };
            let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
            let dir = chol.solve(&neg_g);
            let slope = dot(&g, &dir);
            let decrement2 = -slope;
            if !decrement2.is_finite() {
                return Centering::Stalled;
            }
            if decrement2 / 2.0 <= NEWTON_DECREMENT_TOL {
                return Centering::Centered;
            }
            if local > MAX_CENTERING_STEPS && decrement2 <= LOOSE_DECREMENT {
                return Centering::Centered;
            }
            let Some(phi0) = barrier.barrier_value(y) else {
                return Centering::Stalled;
            };
            let lin_slope = t * dot(&barrier.objective, &dir);
            let mut step = 1.0;
            let mut trial = vec![0.0; nv];
            loop {
                for i in 0..nv {
                    trial[i] = y[i] + step * dir[i];
                }
                if let Some(phi1) = barrier.barrier_value(&trial) {
                    if step * lin_slope + (phi1 - phi0) <= ARMIJO * step * slope {
                        break;
                    }
                }
                step *= BACKTRACK;
                if step < MIN_STEP {
                    // Newton decrement this small means we are at the
                    // rounding floor of the barrier value.
                    return if decrement2 <= LOOSE_DECREMENT { Centering::Centered } else { Centering::Stalled };
                }
            }
            *iterations += 1;
            if let Some(idx) = early_exit {
                if trial[idx] < 0.0 {
                    // Stop on the first iterate with negative slack, pulled back
                    // along the step so a long step does not carry it to the
                    // edge of the ball. Both ends lie in the (convex) domain.
                    let target = trial[idx].max(PHASE1_EXIT_SLACK);
                    let theta = (y[idx] - target) / (y[idx] - trial[idx]);
                    for i in 0..nv {
                        y[i] += theta * (trial[i] - y[i]);
                    }
                    y[idx] = y[idx].min(target);
                    return Centering::Stopped;
                }
            }
            y.copy_from_slice(&trial);
        }
    }

    /// Phase 1 on `(x, s)`. With `stop_when_feasible`, returns as soon as an
    /// iterate with `s < 0` appears; otherwise runs to convergence.
    fn phase1(&mut self, stop_when_feasible: bool) -> Outcome {
        let n = self.form.num_entries;
        let x0 = self.initial_x();
        let barrier = Barrier::new(&self.form, true, self.opts.variable_bound);

        let mut worst = f64::NEG_INFINITY;
        for b in &self.form.blocks {
            match linalg::min_eig(&b.evaluate(&x0)) {
                Ok(v) => worst = worst.max(-v),
                Err(_) => return Outcome { status: Status::NumericalFailure, x: x0, slack: f64::INFINITY },
            }
        }
        if self.form.blocks.is_empty() {
            return Outcome { status: Status::Feasible, x: x0, slack: f64::NEG_INFINITY };
        }
        if stop_when_feasible && worst < 0.0 {
            return Outcome { status: Status::Feasible, x: x0, slack: worst };
        }

        let mut y = x0;
        y.push(worst.max(0.0) + 1.0);
        let mut t = self.opts.initial_barrier;
        let early_exit = stop_when_feasible.then_some(n);
        loop {
            let result = Self::center(&mut self.iterations, self.opts.max_newton_iterations, &barrier, t, &mut y, early_exit);
            let slack = y[n];
            match result {
                Centering::Stopped => {
                    return Outcome { status: Status::Feasible, x: y[..n].to_vec(), slack };
                }
                Centering::Stalled | Centering::IterationCap => {
                    let status = if slack < 0.0 { Status::Feasible } else { Status::NumericalFailure };
                    return Outcome { status, x: y[..n].to_vec(), slack };
                }
                Centering::Centered => {}
            }
            let gap = barrier.nu / t;
            if stop_when_feasible && slack < 0.0 {
                return Outcome { status: Status::Feasible, x: y[..n].to_vec(), slack };
            }
            if slack - gap > self.opts.infeasibility_threshold {
                return Outcome { status: Status::Infeasible, x: y[..n].to_vec(), slack };
            }
            if gap < self.opts.tolerance {
                let status = if slack < 0.0 { Status::Feasible } else { Status::Infeasible };
                return Outcome { status, x: y[..n].to_vec(), slack };
            }
            t *= self.opts.barrier_growth;
        }
    }

    fn phase2(&mut self, x: Vec<f64>) -> Outcome {
        let barrier = Barrier::new(&self.form, false, self.opts.variable_bound);
        let mut y = x;
        let mut t = self.opts.initial_barrier;
        loop {
            match Self::center(&mut self.iterations, self.opts.max_newton_iterations, &barrier, t, &mut y, None) {
                Centering::Centered => {}
                Centering::Stopped => unreachable!(),
                Centering::Stalled | Centering::IterationCap => {
                    return Outcome { status: Status::NumericalFailure, x: y, slack: f64::NAN };
                }
            }
            let scale = dot(&barrier.objective, &y).abs().max(1.0);
            if barrier.nu / t <= self.opts.tolerance * scale {
                return Outcome { status: Status::Optimal, x: y, slack: f64::NAN };
            }
            t *= self.opts.barrier_growth;
        }
    }

    fn finish(&self, outcome: Outcome, optimised: Option<()>) -> Result<Solution, SdpError> {
        let point = Point::from_values(&outcome.x);
        let margins = self.problem.margins(&point)?;
        let mut status = outcome.status;
        if optimised.is_none() && status == Status::Optimal {
            status = Status::Feasible;
        }
        if status.is_success() && margins.iter().any(|m| *m < 0.0) {
            status = Status::NumericalFailure;
        }
        let objective = if optimised.is_some() { self.problem.objective_value(&point)? } else { None };
        Ok(Solution {
            status,
            point,
            objective,
            margins,
            phase1_slack: outcome.slack,
            newton_iterations: self.iterations,
        })
    }
}
