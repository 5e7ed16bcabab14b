//! Plant model, saturation, and the LMI conditions for saturated boundary
//! feedback of
//!
//! ```text
//! X_t + Λ X_z = N d,    X(t, 0) = H X(t, 1) + B σ(K X(t, 1)),    z ∈ (0, 1)
//! ```
//!
//! Two families of conditions are built here:
//!
//! - *analysis*: with `K` fixed, find `P`, `T` diagonal, `Γ` symmetric and
//!   `χ²` such that the boundary, disturbance and decay blocks hold. `P`
//!   defines the Lyapunov functional `∫ e^{-μz} Xᵀ P X dz`.
//! - *synthesis*: the congruence-transformed version in `Q = P⁻¹`,
//!   `W = KQ`, `S`, `Γ̂`, linear in all unknowns, with `c ≥ λ_max(Q)`
//!   minimised so that the ISS gain `γ = √λ_max(Q)·e^{μ/2}` is small.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::linalg::{self, DiagMatrix, LinalgError, Matrix, SymMatrix};
use crate::lmi::{AffineMatrixExpr, LmiError, LmiProblem, MatExpr, Point, Sense, Shape, Var};
use crate::math;
use crate::sdp::{self, SdpError, SolveOptions, Status};

#[derive(Debug, Clone, PartialEq)]
pub enum ControlError {
    Dimension { what: &'static str, expected: usize, found: usize },
    /// A quantity that must be strictly positive is not.
    NonPositive(&'static str),
    NonFinite(&'static str),
    InvalidGrid(&'static str),
    /// Phase 1 could not find a strictly feasible point.
    Infeasible { phase1_slack: f64, margins: Vec<f64> },
    NumericalFailure { iterations: usize },
    Linalg(LinalgError),
    Lmi(LmiError),
    Sdp(SdpError),
}

impl fmt::Display for ControlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlError::Dimension { what, expected, found } => {
                write!(f, "{what}: expected dimension {expected}, found {found}")
            }
            ControlError::NonPositive(what) => write!(f, "{what} must be strictly positive"),
            ControlError::NonFinite(what) => write!(f, "{what} contains non-finite values"),
            ControlError::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            ControlError::Infeasible { phase1_slack, .. } => {
                write!(f, "LMIs infeasible (best phase-1 slack {phase1_slack:.3e})")
            }
            ControlError::NumericalFailure { iterations } => {
                write!(f, "solver stalled after {iterations} Newton steps")
            }
            ControlError::Linalg(e) => write!(f, "{e}"),
            ControlError::Lmi(e) => write!(f, "{e}"),
            ControlError::Sdp(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ControlError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            ControlError::Linalg(e) => Some(e),
            ControlError::Lmi(e) => Some(e),
            ControlError::Sdp(e) => Some(e),
            _ => None,
        }
    }
}

impl From<LinalgError> for ControlError {
    fn from(e: LinalgError) -> Self {
        ControlError::Linalg(e)
    }
}

impl From<LmiError> for ControlError {
    fn from(e: LmiError) -> Self {
        ControlError::Lmi(e)
    }
}

impl From<SdpError> for ControlError {
    fn from(e: SdpError) -> Self {
        ControlError::Sdp(e)
    }
}

fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<(), ControlError> {
    if expected == found {
        Ok(())
    } else {
        Err(ControlError::Dimension { what, expected, found })
    }
}

fn check_positive(what: &'static str, v: f64) -> Result<(), ControlError> {
    if !v.is_finite() {
        return Err(ControlError::NonFinite(what));
    }
    if v <= 0.0 {
        return Err(ControlError::NonPositive(what));
    }
    Ok(())
}

/// `(Λ, H, B, N, ū)` with `n` states, `m` inputs and `q` disturbance channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    lambda: DiagMatrix,
    h: Matrix,
    b: Matrix,
    n: Matrix,
    u_max: Vec<f64>,
}

impl Plant {
    pub fn new(lambda: DiagMatrix, h: Matrix, b: Matrix, n: Matrix, u_max: Vec<f64>) -> Result<Plant, ControlError> {
        let dim = lambda.dim();
        if !lambda.is_positive() {
            return Err(ControlError::NonPositive("lambda"));
        }
        check_dim("H rows", dim, h.rows())?;
        check_dim("H cols", dim, h.cols())?;
        check_dim("B rows", dim, b.rows())?;
        check_dim("N rows", dim, n.rows())?;
        check_dim("u_max length", b.cols(), u_max.len())?;
        if !h.is_finite() {
            return Err(ControlError::NonFinite("H"));
        }
        if !b.is_finite() {
            return Err(ControlError::NonFinite("B"));
        }
        if !n.is_finite() {
            return Err(ControlError::NonFinite("N"));
        }
        for &u in &u_max {
            check_positive("u_max", u)?;
        }
        Ok(Plant { lambda, h, b, n, u_max })
    }

    pub fn states(&self) -> usize {
        self.lambda.dim()
    }

    pub fn inputs(&self) -> usize {
        self.b.cols()
    }

    pub fn disturbances(&self) -> usize {
        self.n.cols()
    }

    pub fn lambda(&self) -> &DiagMatrix {
        &self.lambda
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn n(&self) -> &Matrix {
        &self.n
    }

    pub fn u_max(&self) -> &[f64] {
        &self.u_max
    }

    /// `H_cl = H + BK`
    pub fn closed_loop_matrix(&self, k: &Matrix) -> Matrix {
        &self.h + &(&self.b * k)
    }

    fn check_gain(&self, k: &Matrix) -> Result<(), ControlError> {
        check_dim("K rows", self.inputs(), k.rows())?;
        check_dim("K cols", self.states(), k.cols())?;
        if !k.is_finite() {
            return Err(ControlError::NonFinite("K"));
        }
        Ok(())
    }
}

/// Two coupled transport equations with speeds `1` and `√2`, a lower
/// triangular reflection, full actuation, and both disturbance channels
/// entering both states.
pub fn reference_plant() -> Plant {
    let lambda = DiagMatrix::new(vec![1.0, math::sqrt(2.0)]).expect("constant");
    let h = Matrix::from_rows(&[[0.25, 0.0], [-1.0, 0.25]]).expect("constant");
    Plant::new(lambda, h, Matrix::identity(2), Matrix::identity(2), vec![0.3, 0.3]).expect("valid reference plant")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    k: Matrix,
}

impl Controller {
    pub fn new(k: Matrix) -> Result<Controller, ControlError> {
        if !k.is_finite() {
            return Err(ControlError::NonFinite("K"));
        }
        Ok(Controller { k })
    }

    pub fn zero(plant: &Plant) -> Controller {
        Controller { k: Matrix::zeros(plant.inputs(), plant.states()) }
    }

    pub fn gain(&self) -> &Matrix {
        &self.k
    }

    /// `σ(K x1)`
    pub fn control(&self, plant: &Plant, x1: &[f64]) -> Vec<f64> {
        let u = self.k.mul_vec(x1);
        u.iter().zip(plant.u_max()).map(|(&u, &m)| sat(u, m)).collect()
    }
}

#[inline]
fn sat(u: f64, m: f64) -> f64 {
    if u > m {
        m
    } else if u < -m {
        -m
    } else {
        u
    }
}

fn check_levels(u: &[f64], u_max: &[f64]) -> Result<(), ControlError> {
    check_dim("saturation levels", u.len(), u_max.len())?;
    for &m in u_max {
        check_positive("u_max", m)?;
    }
    Ok(())
}

/// Componentwise `min(|u_i|, ū_i)·sign(u_i)`.
pub fn saturate(u: &[f64], u_max: &[f64]) -> Result<Vec<f64>, ControlError> {
    check_levels(u, u_max)?;
    Ok(u.iter().zip(u_max).map(|(&u, &m)| sat(u, m)).collect())
}

/// `φ(u) = σ(u) - u`
pub fn deadzone(u: &[f64], u_max: &[f64]) -> Result<Vec<f64>, ControlError> {
    check_levels(u, u_max)?;
    Ok(u.iter().zip(u_max).map(|(&u, &m)| sat(u, m) - u).collect())
}

/// `φ(ν)ᵀ T (φ(ν) + ν)`, which is never positive for diagonal `T > 0`.
pub fn sector_value(nu: &[f64], u_max: &[f64], t: &DiagMatrix) -> Result<f64, ControlError> {
    check_dim("T", nu.len(), t.dim())?;
    let phi = deadzone(nu, u_max)?;
    Ok(phi.iter().zip(nu).zip(t.entries()).map(|((p, v), w)| p * w * (p + v)).sum())
}

/// Inflow value `H_cl x1 + B φ(K x1)`.
pub fn closed_loop_boundary(plant: &Plant, k: &Matrix, x1: &[f64]) -> Result<Vec<f64>, ControlError> {
    plant.check_gain(k)?;
    check_dim("boundary trace", plant.states(), x1.len())?;
    let phi = deadzone(&k.mul_vec(x1), plant.u_max())?;
    let lin = plant.closed_loop_matrix(k).mul_vec(x1);
    let corr = plant.b().mul_vec(&phi);
    Ok(lin.iter().zip(&corr).map(|(a, b)| a + b).collect())
}

/// Inflow value `H x1 + B σ(K x1)`.
pub fn closed_loop_boundary_direct(plant: &Plant, k: &Matrix, x1: &[f64]) -> Result<Vec<f64>, ControlError> {
    plant.check_gain(k)?;
    check_dim("boundary trace", plant.states(), x1.len())?;
    let u = saturate(&k.mul_vec(x1), plant.u_max())?;
    let hx = plant.h().mul_vec(x1);
    let bu = plant.b().mul_vec(&u);
    Ok(hx.iter().zip(&bu).map(|(a, b)| a + b).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelledMargin {
    pub label: String,
    pub value: f64,
}

fn label_margins(problem: &LmiProblem, values: &[f64]) -> Vec<LabelledMargin> {
    problem
        .constraints()
        .iter()
        .zip(values)
        .map(|(c, &value)| LabelledMargin { label: c.label.clone(), value })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    /// Uniform strictness slack `ε`.
    pub epsilon: f64,
    pub solver: SolveOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions { epsilon: crate::lmi::DEFAULT_EPSILON, solver: SolveOptions::default() }
    }
}

/// Handles to the synthesis variables inside the problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisVars {
    pub q: Var,
    pub s: Var,
    pub w: Var,
    pub gamma_hat: Var,
    pub c: Var,
}

fn diag_scaled(lambda: &DiagMatrix, f: impl Fn(f64) -> f64) -> Matrix {
    Matrix::from_diag(&lambda.entries().iter().map(|&l| f(l)).collect::<Vec<_>>())
}

fn check_design(mu: f64, alpha: f64) -> Result<(), ControlError> {
    check_positive("mu", mu)?;
    check_positive("alpha", alpha)
}

/// Boundary block in the synthesis variables:
///
/// ```text
/// [ -QΛ⁻¹   HQ + BW     BS  ]
/// [   *    -e^{-μ}ΛQ   -Wᵀ  ]  ⪯ 0
/// [   *        *       -2S  ]
/// ```
fn synthesis_boundary(plant: &Plant, mu: f64, q: &MatExpr, s: &MatExpr, w: &MatExpr) -> Result<AffineMatrixExpr, ControlError> {
    let lambda_inv = diag_scaled(plant.lambda(), |l| 1.0 / l);
    let lambda = plant.lambda().to_matrix();
    let e = math::exp(-mu);
    Ok(AffineMatrixExpr::from_blocks(&[
        vec![Some(q.rmul(&lambda_inv).scale(-1.0)), Some(q.lmul(plant.h()).add(&w.lmul(plant.b()))), Some(s.lmul(plant.b()))],
        vec![None, Some(q.lmul(&lambda).scale(-e)), Some(w.transpose().scale(-1.0))],
        vec![None, None, Some(s.scale(-2.0))],
    ])?)
}

/// Variables `Q`, `S`, `W`, `Γ̂`, `c`; constraints in order: boundary
/// (`2n+m`), disturbance (`n+q`), decay (`n`), `Q ⪯ cI` (non-strict), then
/// positivity of `Q`, `S`, `Γ̂`. Objective: minimise `c`.
pub fn build_synthesis_lmis(plant: &Plant, mu: f64, alpha: f64, epsilon: f64) -> Result<(LmiProblem, SynthesisVars), ControlError> {
    check_design(mu, alpha)?;
    let (n, m, nq) = (plant.states(), plant.inputs(), plant.disturbances());
    let mut p = LmiProblem::new(epsilon)?;
    let q = p.add_var("Q", Shape::Diagonal(n))?;
    let s = p.add_var("S", Shape::Diagonal(m))?;
    let w = p.add_var("W", Shape::Full { rows: m, cols: n })?;
    let gh = p.add_var("Gamma_hat", Shape::Symmetric(n))?;
    let c = p.add_var("c", Shape::Scalar)?;
    let (qe, se, we, ge) = (q.expr(), s.expr(), w.expr(), gh.expr());

    p.add_constraint("boundary", synthesis_boundary(plant, mu, &qe, &se, &we)?, Sense::NegDef, true)?;

    let dist = AffineMatrixExpr::from_blocks(&[
        vec![Some(ge.clone()), Some(MatExpr::constant(plant.n().clone()))],
        vec![None, Some(MatExpr::constant(Matrix::identity(nq)))],
    ])?;
    p.add_constraint("disturbance", dist, Sense::PosDef, true)?;

    let decay = qe.rmul(&diag_scaled(plant.lambda(), |l| alpha - mu * l)).add(&ge);
    p.add_constraint("decay", AffineMatrixExpr::symmetric_part(&decay), Sense::NegDef, true)?;

    let cap = qe.sub(&MatExpr::term(c.entry(0, 0).expect("scalar"), Matrix::identity(n)));
    p.add_constraint("q_bound", AffineMatrixExpr::symmetric_part(&cap), Sense::NegDef, false)?;

    p.add_constraint("q_pos", AffineMatrixExpr::symmetric_part(&qe), Sense::PosDef, true)?;
    p.add_constraint("s_pos", AffineMatrixExpr::symmetric_part(&se), Sense::PosDef, true)?;
    p.add_constraint("gamma_hat_pos", AffineMatrixExpr::symmetric_part(&ge), Sense::PosDef, true)?;

    p.set_objective(vec![(c.entry(0, 0).expect("scalar"), 1.0)])?;
    Ok((p, SynthesisVars { q, s, w, gamma_hat: gh, c }))
}

/// ISS data of a closed loop: `‖X(t)‖ ≤ κ e^{-ωt} ‖X₀‖ + γ ‖d‖_{L²(0,t)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IssCoefficients {
    pub omega: f64,
    pub kappa: f64,
    pub gamma: f64,
}

/// `ω = α/2`, `κ = √(λ_max(P)/λ_min(P))·e^{μ/2}`, `γ = χ·e^{μ/2}/√λ_min(P)`.
pub fn iss_coefficients(p: &DiagMatrix, mu: f64, alpha: f64, chi: f64) -> Result<IssCoefficients, ControlError> {
    if !p.is_positive() {
        return Err(ControlError::NonPositive("P"));
    }
    let half = math::exp(mu / 2.0);
    let (lo, hi) = (p.min(), p.max());
    Ok(IssCoefficients {
        omega: alpha / 2.0,
        kappa: math::sqrt(hi / lo) * half,
        gamma: chi * half / math::sqrt(lo),
    })
}

/// Solution of the synthesis LMIs together with the derived gain and ISS
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisCertificate {
    pub q: DiagMatrix,
    pub s: DiagMatrix,
    pub w: Matrix,
    pub gamma_hat: SymMatrix,
    pub mu: f64,
    pub alpha: f64,
    pub c: f64,
    pub k: Matrix,
    pub gamma: f64,
    pub omega: f64,
    pub kappa: f64,
    pub margins: Vec<LabelledMargin>,
}

impl SynthesisCertificate {
    /// Builds a certificate from raw variable values, deriving `K`, `γ`,
    /// `ω`, `κ`. Margins are left empty.
    pub fn from_parts(
        q: DiagMatrix,
        s: DiagMatrix,
        w: Matrix,
        gamma_hat: SymMatrix,
        mu: f64,
        alpha: f64,
        c: f64,
    ) -> Result<SynthesisCertificate, ControlError> {
        let q_inv = linalg::invert_diag(&q)?;
        let k = w.mul_diag(&q_inv);
        let iss = iss_coefficients(&q_inv, mu, alpha, 1.0)?;
        Ok(SynthesisCertificate {
            gamma: math::sqrt(q.max()) * math::exp(mu / 2.0),
            omega: iss.omega,
            kappa: iss.kappa,
            q,
            s,
            w,
            gamma_hat,
            mu,
            alpha,
            c,
            k,
            margins: Vec::new(),
        })
    }

    /// Lyapunov weight `P = Q⁻¹`.
    pub fn p(&self) -> DiagMatrix {
        linalg::invert_diag(&self.q).expect("Q is positive")
    }

    /// Analysis multiplier `Γ = Q⁻¹ Γ̂ Q⁻¹`.
    pub fn gamma_analysis(&self) -> SymMatrix {
        let p = self.p();
        let g = self.gamma_hat.to_matrix();
        SymMatrix::from_matrix(&p.mul_matrix(&g).mul_diag(&p))
    }

    pub fn min_margin(&self) -> f64 {
        self.margins.iter().map(|m| m.value).fold(f64::INFINITY, f64::min)
    }
}

/// Solves the synthesis LMIs at `(μ, α)`, minimising `c`.
pub fn synthesize(plant: &Plant, mu: f64, alpha: f64, opts: &SynthesisOptions) -> Result<SynthesisCertificate, ControlError> {
    let (problem, vars) = build_synthesis_lmis(plant, mu, alpha, opts.epsilon)?;
    let sol = sdp::minimize(&problem, &opts.solver)?;
    match sol.status {
        Status::Optimal | Status::Feasible => {}
        Status::Infeasible => {
            return Err(ControlError::Infeasible { phase1_slack: sol.phase1_slack, margins: sol.margins })
        }
        Status::NumericalFailure => return Err(ControlError::NumericalFailure { iterations: sol.newton_iterations }),
    }
    let pt = &sol.point;
    let mut cert = SynthesisCertificate::from_parts(
        pt.diag(&vars.q)?,
        pt.diag(&vars.s)?,
        pt.full(&vars.w)?,
        pt.sym(&vars.gamma_hat)?,
        mu,
        alpha,
        pt.scalar(&vars.c)?,
    )?;
    // Independent re-check rather than trusting solver bookkeeping.
    let margins = problem.margins(&synthesis_point(&problem, &vars, &cert))?;
    cert.margins = label_margins(&problem, &margins);
    Ok(cert)
}

fn synthesis_point(problem: &LmiProblem, vars: &SynthesisVars, cert: &SynthesisCertificate) -> Point {
    let mut pt = Point::empty(problem.num_entries());
    pt.set_diag(&vars.q, &cert.q);
    pt.set_diag(&vars.s, &cert.s);
    pt.set_full(&vars.w, &cert.w);
    pt.set_sym(&vars.gamma_hat, &cert.gamma_hat);
    pt.set_scalar(&vars.c, cert.c);
    pt
}

/// Outcome of checking given synthesis values against the LMIs.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisCheck {
    /// The `S` that was used, either supplied or found.
    pub s: DiagMatrix,
    pub margins: Vec<LabelledMargin>,
}

impl SynthesisCheck {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().map(|m| m.value).fold(f64::INFINITY, f64::min)
    }
}

/// Margins of every synthesis constraint at `(Q, W, Γ̂)`, with
/// `c = λ_max(Q)`. When `s` is `None`, the `S` maximising the smallest
/// margin of the boundary block and `S ⪰ εI` is computed first.
#[allow(clippy::too_many_arguments)]
pub fn check_synthesis_point(
    plant: &Plant,
    mu: f64,
    alpha: f64,
    q: &DiagMatrix,
    w: &Matrix,
    gamma_hat: &SymMatrix,
    s: Option<&DiagMatrix>,
    opts: &SynthesisOptions,
) -> Result<SynthesisCheck, ControlError> {
    check_design(mu, alpha)?;
    check_dim("Q", plant.states(), q.dim())?;
    check_dim("W rows", plant.inputs(), w.rows())?;
    check_dim("W cols", plant.states(), w.cols())?;
    check_dim("Gamma_hat", plant.states(), gamma_hat.dim())?;
    let s = match s {
        Some(s) => {
            check_dim("S", plant.inputs(), s.dim())?;
            s.clone()
        }
        None => {
            let mut sp = LmiProblem::new(opts.epsilon)?;
            let sv = sp.add_var("S", Shape::Diagonal(plant.inputs()))?;
            let qc = MatExpr::constant(q.to_matrix());
            let wc = MatExpr::constant(w.clone());
            sp.add_constraint("boundary", synthesis_boundary(plant, mu, &qc, &sv.expr(), &wc)?, Sense::NegDef, true)?;
            sp.add_constraint("s_pos", AffineMatrixExpr::symmetric_part(&sv.expr()), Sense::PosDef, true)?;
            let sol = sdp::maximize_margin(&sp, &opts.solver)?;
            if sol.status == Status::NumericalFailure {
                return Err(ControlError::NumericalFailure { iterations: sol.newton_iterations });
            }
            sol.point.diag(&sv)?
        }
    };
    let (problem, vars) = build_synthesis_lmis(plant, mu, alpha, opts.epsilon)?;
    let mut cert = SynthesisCertificate::from_parts(q.clone(), s.clone(), w.clone(), gamma_hat.clone(), mu, alpha, q.max())?;
    cert.s = s.clone();
    let margins = problem.margins(&synthesis_point(&problem, &vars, &cert))?;
    Ok(SynthesisCheck { s, margins: label_margins(&problem, &margins) })
}

/// Handles to the analysis variables inside the problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisVars {
    pub p: Var,
    pub t: Var,
    pub gamma: Var,
    pub chi2: Var,
}

/// ```text
/// [ H_clᵀPΛH_cl - e^{-μ}PΛ    H_clᵀPΛB - KᵀT ]
/// [          *                 BᵀPΛB - 2T    ]  ⪯ 0
/// ```
fn analysis_boundary(plant: &Plant, k: &Matrix, mu: f64, p: &MatExpr, t: &MatExpr) -> Result<AffineMatrixExpr, ControlError> {
    let hcl = plant.closed_loop_matrix(k);
    let hcl_t = hcl.transpose();
    let lambda = plant.lambda().to_matrix();
    let lambda_b = &lambda * plant.b();
    let top_left = p.rmul(&(&lambda * &hcl)).lmul(&hcl_t).sub(&p.rmul(&lambda).scale(math::exp(-mu)));
    let top_right = p.rmul(&lambda_b).lmul(&hcl_t).sub(&t.lmul(&k.transpose()));
    let bottom = p.rmul(&lambda_b).lmul(&plant.b().transpose()).sub(&t.scale(2.0));
    Ok(AffineMatrixExpr::from_blocks(&[vec![Some(top_left), Some(top_right)], vec![None, Some(bottom)]])?)
}

fn analysis_disturbance(plant: &Plant, p: &MatExpr, gamma: &MatExpr, chi2: &MatExpr) -> Result<AffineMatrixExpr, ControlError> {
    Ok(AffineMatrixExpr::from_blocks(&[
        vec![Some(gamma.clone()), Some(p.rmul(plant.n()))],
        vec![None, Some(chi2.clone())],
    ])?)
}

fn analysis_decay(plant: &Plant, mu: f64, alpha: f64, p: &MatExpr, gamma: &MatExpr) -> AffineMatrixExpr {
    AffineMatrixExpr::symmetric_part(&p.rmul(&diag_scaled(plant.lambda(), |l| alpha - mu * l)).add(gamma))
}

/// Variables `P`, `T`, `Γ`, `χ²`; constraints in order: boundary (`n+m`),
/// disturbance (`n+q`), decay (`n`), then positivity of `P`, `T`, `Γ`,
/// `χ²`. No objective.
pub fn build_analysis_lmis(plant: &Plant, k: &Matrix, mu: f64, alpha: f64, epsilon: f64) -> Result<(LmiProblem, AnalysisVars), ControlError> {
    check_design(mu, alpha)?;
    plant.check_gain(k)?;
    let (n, m, nq) = (plant.states(), plant.inputs(), plant.disturbances());
    let mut pr = LmiProblem::new(epsilon)?;
    let p = pr.add_var("P", Shape::Diagonal(n))?;
    let t = pr.add_var("T", Shape::Diagonal(m))?;
    let g = pr.add_var("Gamma", Shape::Symmetric(n))?;
    let chi2 = pr.add_var("chi2", Shape::Scalar)?;
    let (pe, te, ge) = (p.expr(), t.expr(), g.expr());
    let chi_i = MatExpr::term(chi2.entry(0, 0).expect("scalar"), Matrix::identity(nq));

    pr.add_constraint("boundary", analysis_boundary(plant, k, mu, &pe, &te)?, Sense::NegDef, true)?;
    pr.add_constraint("disturbance", analysis_disturbance(plant, &pe, &ge, &chi_i)?, Sense::PosDef, true)?;
    pr.add_constraint("decay", analysis_decay(plant, mu, alpha, &pe, &ge), Sense::NegDef, true)?;
    pr.add_constraint("p_pos", AffineMatrixExpr::symmetric_part(&pe), Sense::PosDef, true)?;
    pr.add_constraint("t_pos", AffineMatrixExpr::symmetric_part(&te), Sense::PosDef, true)?;
    pr.add_constraint("gamma_pos", AffineMatrixExpr::symmetric_part(&ge), Sense::PosDef, true)?;
    pr.add_constraint("chi2_pos", AffineMatrixExpr::symmetric_part(&chi2.expr()), Sense::PosDef, true)?;
    Ok((pr, AnalysisVars { p, t, gamma: g, chi2 }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisCertificate {
    pub p: DiagMatrix,
    pub t: DiagMatrix,
    pub gamma: SymMatrix,
    pub mu: f64,
    pub chi: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisCheck {
    pub certificate: AnalysisCertificate,
    /// Whether phase 1 reported the `T` subproblem strictly feasible.
    pub t_status: Status,
    pub margins: Vec<LabelledMargin>,
}

impl AnalysisCheck {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().map(|m| m.value).fold(f64::INFINITY, f64::min)
    }
}

/// With `P`, `Γ`, `χ`, `μ`, `α` fixed, finds the `T` maximising the
/// smallest margin of the boundary block and `T ⪰ εI`, then reports the
/// margin of every analysis constraint.
#[allow(clippy::too_many_arguments)]
pub fn verify_analysis(
    plant: &Plant,
    k: &Matrix,
    p: &DiagMatrix,
    gamma: &SymMatrix,
    mu: f64,
    chi: f64,
    alpha: f64,
    opts: &SynthesisOptions,
) -> Result<AnalysisCheck, ControlError> {
    check_positive("chi", chi)?;
    let (problem, vars) = build_analysis_lmis(plant, k, mu, alpha, opts.epsilon)?;
    check_dim("P", plant.states(), p.dim())?;
    check_dim("Gamma", plant.states(), gamma.dim())?;

    let mut tp = LmiProblem::new(opts.epsilon)?;
    let tv = tp.add_var("T", Shape::Diagonal(plant.inputs()))?;
    let pc = MatExpr::constant(p.to_matrix());
    tp.add_constraint("boundary", analysis_boundary(plant, k, mu, &pc, &tv.expr())?, Sense::NegDef, true)?;
    tp.add_constraint("t_pos", AffineMatrixExpr::symmetric_part(&tv.expr()), Sense::PosDef, true)?;
    let sol = sdp::maximize_margin(&tp, &opts.solver)?;
    if sol.status == Status::NumericalFailure {
        return Err(ControlError::NumericalFailure { iterations: sol.newton_iterations });
    }
    let t = sol.point.diag(&tv)?;

    let mut pt = Point::empty(problem.num_entries());
    pt.set_diag(&vars.p, p);
    pt.set_diag(&vars.t, &t);
    pt.set_sym(&vars.gamma, gamma);
    pt.set_scalar(&vars.chi2, chi * chi);
    let margins = problem.margins(&pt)?;
    Ok(AnalysisCheck {
        certificate: AnalysisCertificate { p: p.clone(), t, gamma: gamma.clone(), mu, chi, alpha },
        t_status: sol.status,
        margins: label_margins(&problem, &margins),
    })
}

/// Shift constants making the closed-loop generator well posed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellPosednessConstants {
    pub tau: f64,
    pub mu_wp: f64,
    pub rho: f64,
    /// `ln ‖H_clᵀΛH_clΛ⁻¹ + τKᵀKΛ⁻¹ + ‖H_clᵀΛB‖²Λ⁻¹‖`
    pub log_bound: f64,
    /// `‖H_cl‖ + ‖BK‖`
    pub contraction: f64,
    pub delta: f64,
}

pub const DEFAULT_WELLPOSEDNESS_SLACK: f64 = 0.01;

/// The four defining inequalities, each as a signed slack (positive means
/// satisfied).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellPosednessCheck {
    /// `-1 - λ_max(BᵀΛB - τI)`
    pub tau_slack: f64,
    /// `μ_wp - log_bound`
    pub mu_slack: f64,
    /// `-μ_wp/2 - ρ`
    pub rho_half_mu_slack: f64,
    /// `1 - e^{ρ/λ_max(Λ)}(‖H_cl‖ + ‖BK‖)`
    pub rho_contraction_slack: f64,
}

impl WellPosednessCheck {
    pub fn holds(&self) -> bool {
        self.tau_slack >= 0.0 && self.mu_slack > 0.0 && self.rho_half_mu_slack > 0.0 && self.rho_contraction_slack > 0.0
    }
}

fn btlb(plant: &Plant) -> SymMatrix {
    let lb = plant.lambda().mul_matrix(plant.b());
    SymMatrix::from_matrix(&(&plant.b().transpose() * &lb))
}

fn log_bound(plant: &Plant, k: &Matrix, tau: f64) -> Result<f64, ControlError> {
    let hcl = plant.closed_loop_matrix(k);
    let lambda = plant.lambda();
    let lambda_inv = linalg::invert_diag(lambda)?;
    let ht = hcl.transpose();
    let a = (&ht * &lambda.mul_matrix(&hcl)).mul_diag(&lambda_inv);
    let b = (&k.transpose() * k).mul_diag(&lambda_inv).scale(tau);
    let cross = linalg::spectral_norm(&(&ht * &lambda.mul_matrix(plant.b())))?;
    let c = lambda_inv.to_matrix().scale(cross * cross);
    let total = &(&a + &b) + &c;
    Ok(math::ln(linalg::spectral_norm(&total)?))
}

fn contraction(plant: &Plant, k: &Matrix) -> Result<f64, ControlError> {
    Ok(linalg::spectral_norm(&plant.closed_loop_matrix(k))? + linalg::spectral_norm(&(plant.b() * k))?)
}

/// `τ = 1 + λ_max(BᵀΛB) + δ`, `μ_wp = max(bound, 0) + δ`,
/// `ρ = min(-μ_wp/2, -λ_max(Λ)·ln(‖H_cl‖ + ‖BK‖)) - δ`.
pub fn wellposedness_certificate(plant: &Plant, k: &Matrix, delta: f64) -> Result<WellPosednessConstants, ControlError> {
    plant.check_gain(k)?;
    check_positive("delta", delta)?;
    let tau = 1.0 + linalg::max_eig(&btlb(plant))? + delta;
    let log_bound = log_bound(plant, k, tau)?;
    let mu_wp = log_bound.max(0.0) + delta;
    let contraction = contraction(plant, k)?;
    let rho = (-mu_wp / 2.0).min(-plant.lambda().max() * math::ln(contraction)) - delta;
    Ok(WellPosednessConstants { tau, mu_wp, rho, log_bound, contraction, delta })
}

impl WellPosednessConstants {
    /// Re-evaluates the defining inequalities from scratch.
    pub fn check(&self, plant: &Plant, k: &Matrix) -> Result<WellPosednessCheck, ControlError> {
        plant.check_gain(k)?;
        let shifted = btlb(plant).add_scaled(&SymMatrix::identity(plant.inputs()), -self.tau);
        let bound = log_bound(plant, k, self.tau)?;
        let lmax = plant.lambda().max();
        Ok(WellPosednessCheck {
            tau_slack: -1.0 - linalg::max_eig(&shifted)?,
            mu_slack: self.mu_wp - bound,
            rho_half_mu_slack: -self.mu_wp / 2.0 - self.rho,
            rho_contraction_slack: 1.0 - math::exp(self.rho / lmax) * contraction(plant, k)?,
        })
    }
}

/// Strictly increasing, positive, finite, non-empty.
pub fn validate_grid(values: &[f64]) -> Result<(), ControlError> {
    if values.is_empty() {
        return Err(ControlError::InvalidGrid("grid is empty"));
    }
    if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(ControlError::InvalidGrid("grid values must be positive and finite"));
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(ControlError::InvalidGrid("grid must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub mu: f64,
    pub alpha: f64,
    pub status: Status,
    pub c: Option<f64>,
    /// `√c · e^{μ/2}`
    pub gamma: Option<f64>,
    pub phase1_slack: Option<f64>,
    pub error: Option<String>,
}

/// Solves one grid cell. Failures are recorded in the cell, never returned.
pub fn solve_cell(plant: &Plant, mu: f64, alpha: f64, opts: &SynthesisOptions) -> (GridCell, Option<SynthesisCertificate>) {
    let mut cell = GridCell { mu, alpha, status: Status::NumericalFailure, c: None, gamma: None, phase1_slack: None, error: None };
    match synthesize(plant, mu, alpha, opts) {
        Ok(cert) => {
            cell.status = Status::Optimal;
            cell.c = Some(cert.c);
            cell.gamma = Some(math::sqrt(cert.c) * math::exp(mu / 2.0));
            (cell, Some(cert))
        }
        Err(ControlError::Infeasible { phase1_slack, .. }) => {
            cell.status = Status::Infeasible;
            cell.phase1_slack = Some(phase1_slack);
            (cell, None)
        }
        Err(e) => {
            cell.error = Some(e.to_string());
            (cell, None)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityMap {
    pub mu_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    /// `μ`-major: cell `(i, j)` sits at `i·alpha_grid.len() + j`.
    pub cells: Vec<GridCell>,
    pub best: Option<SynthesisCertificate>,
}

impl FeasibilityMap {
    /// Assembles a map from solved cells in `μ`-major order. The choice of
    /// `best` depends only on the cell values, not on how they were produced.
    pub fn from_cells(
        mu_grid: Vec<f64>,
        alpha_grid: Vec<f64>,
        results: Vec<(GridCell, Option<SynthesisCertificate>)>,
    ) -> Result<FeasibilityMap, ControlError> {
        check_dim("grid cells", mu_grid.len() * alpha_grid.len(), results.len())?;
        let mut best: Option<(f64, SynthesisCertificate)> = None;
        let mut cells = Vec::with_capacity(results.len());
        for (cell, cert) in results {
            if let (Some(g), Some(cert)) = (cell.gamma, cert) {
                let better = match &best {
                    None => true,
                    Some((bg, bc)) => cell_order(g, cert.mu, cert.alpha, *bg, bc.mu, bc.alpha) == Ordering::Less,
                };
                if better {
                    best = Some((g, cert));
                }
            }
            cells.push(cell);
        }
        Ok(FeasibilityMap { mu_grid, alpha_grid, cells, best: best.map(|(_, c)| c) })
    }

    pub fn cell(&self, mu_index: usize, alpha_index: usize) -> &GridCell {
        &self.cells[mu_index * self.alpha_grid.len() + alpha_index]
    }

    pub fn feasible_count(&self) -> usize {
        self.cells.iter().filter(|c| c.status.is_success()).count()
    }
}

/// Smaller `γ` first, then smaller `μ`, then smaller `α`.
fn cell_order(g1: f64, mu1: f64, a1: f64, g2: f64, mu2: f64, a2: f64) -> Ordering {
    g1.total_cmp(&g2).then(mu1.total_cmp(&mu2)).then(a1.total_cmp(&a2))
}

/// Sequential sweep over every `(μ, α)` pair.
pub fn grid_search(plant: &Plant, mu_grid: &[f64], alpha_grid: &[f64], opts: &SynthesisOptions) -> Result<FeasibilityMap, ControlError> {
    validate_grid(mu_grid)?;
    validate_grid(alpha_grid)?;
    let mut results = Vec::with_capacity(mu_grid.len() * alpha_grid.len());
    for &mu in mu_grid {
        for &alpha in alpha_grid {
            results.push(solve_cell(plant, mu, alpha, opts));
        }
    }
    FeasibilityMap::from_cells(mu_grid.to_vec(), alpha_grid.to_vec(), results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_k() -> Matrix {
        Matrix::from_rows(&[[-0.24, 0.0], [0.33, -0.08]]).unwrap()
    }

    fn scalar_plant(h: f64, b: f64) -> Plant {
        Plant::new(
            DiagMatrix::new(vec![1.0]).unwrap(),
            Matrix::from_rows(&[[h]]).unwrap(),
            Matrix::from_rows(&[[b]]).unwrap(),
            Matrix::from_rows(&[[1.0]]).unwrap(),
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn saturation_examples() {
        assert_eq!(saturate(&[0.5], &[0.3]).unwrap(), vec![0.3]);
        assert_eq!(saturate(&[-0.2], &[0.3]).unwrap(), vec![-0.2]);
        assert_eq!(saturate(&[-1.0, 0.1], &[0.3, 0.3]).unwrap(), vec![-0.3, 0.1]);
        let dz = deadzone(&[0.5], &[0.3]).unwrap();
        assert!((dz[0] + 0.2).abs() < 1e-15);
        assert_eq!(deadzone(&[0.0], &[2.0]).unwrap(), vec![0.0]);
        assert!(saturate(&[1.0], &[0.3, 0.3]).is_err());
        assert!(saturate(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn sector_value_scalar() {
        let t = DiagMatrix::new(vec![1.0]).unwrap();
        assert!((sector_value(&[0.6], &[0.3], &t).unwrap() + 0.09).abs() < 1e-15);
        assert_eq!(sector_value(&[0.1], &[0.3], &t).unwrap(), 0.0);
    }

    #[test]
    fn boundary_forms() {
        let plant = reference_plant();
        let zero = Matrix::zeros(2, 2);
        assert_eq!(closed_loop_boundary(&plant, &zero, &[1.0, 2.0]).unwrap(), plant.h().mul_vec(&[1.0, 2.0]));
        assert_eq!(closed_loop_boundary(&plant, &reference_k(), &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let a = closed_loop_boundary(&plant, &reference_k(), &[1.0, 1.0]).unwrap();
        let b = closed_loop_boundary_direct(&plant, &reference_k(), &[1.0, 1.0]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn synthesis_problem_shape() {
        let (p, _) = build_synthesis_lmis(&reference_plant(), 1.0, 0.5, 1e-6).unwrap();
        assert_eq!(p.num_entries(), 12);
        let dims: Vec<usize> = p.constraints().iter().map(|c| c.expr.dim()).collect();
        assert_eq!(&dims[..4], &[6, 4, 2, 2]);
    }

    #[test]
    fn iss_coefficients_identity_and_reference() {
        let e = math::exp(0.5);
        let c = iss_coefficients(&DiagMatrix::identity(2), 1.0, 0.5, 1.0).unwrap();
        assert_eq!(c.omega, 0.25);
        assert!((c.kappa - e).abs() < 1e-14 && (c.gamma - e).abs() < 1e-14);
        let p = linalg::invert_diag(&DiagMatrix::new(vec![12.5, 82.0]).unwrap()).unwrap();
        let c = iss_coefficients(&p, 1.0, 0.5, 1.0).unwrap();
        assert!((c.kappa - 4.2229).abs() < 1e-3, "{}", c.kappa);
        assert!((c.gamma - 14.930).abs() < 1e-3, "{}", c.gamma);
    }

    #[test]
    fn scalar_wellposedness_constants() {
        let plant = scalar_plant(0.5, 1.0);
        let w = wellposedness_certificate(&plant, &Matrix::zeros(1, 1), 0.01).unwrap();
        assert!((w.tau - 2.01).abs() < 1e-12);
        assert!((w.log_bound - math::ln(0.5)).abs() < 1e-12);
        assert!((w.mu_wp - 0.01).abs() < 1e-12);
        assert!((w.rho + 0.015).abs() < 1e-12);
        assert!(w.check(&plant, &Matrix::zeros(1, 1)).unwrap().holds());
    }

    #[test]
    fn no_control_wellposedness() {
        let plant = scalar_plant(0.5, 0.0);
        let w = wellposedness_certificate(&plant, &Matrix::zeros(1, 1), 0.01).unwrap();
        assert!((w.tau - 1.01).abs() < 1e-12);
        assert!((w.log_bound - math::ln(0.25)).abs() < 1e-12);
        // the gain term does not involve B, so a nonzero K still counts
        let k = Matrix::from_rows(&[[3.0]]).unwrap();
        let w = wellposedness_certificate(&plant, &k, 0.01).unwrap();
        assert!((w.log_bound - math::ln(0.25 + 1.01 * 9.0)).abs() < 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[1.0, 1.0]).is_err());
        assert!(validate_grid(&[-1.0]).is_err());
        assert!(validate_grid(&[0.5, 1.0]).is_ok());
    }

    #[test]
    fn tie_break_prefers_small_mu_then_alpha() {
        assert_eq!(cell_order(1.0, 0.5, 0.2, 1.0, 1.0, 0.1), Ordering::Less);
        assert_eq!(cell_order(1.0, 0.5, 0.2, 1.0, 0.5, 0.3), Ordering::Less);
        assert_eq!(cell_order(2.0, 0.5, 0.2, 1.0, 1.0, 0.3), Ordering::Greater);
    }
}
