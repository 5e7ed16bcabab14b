//! Affine symmetric-matrix inequalities over structured decision variables.
//!
//! A [`LmiProblem`] owns a list of decision variables (scalars, diagonal,
//! full and symmetric matrices). Every scalar entry of every variable gets a
//! global index; symmetric variables contribute their upper triangle in
//! row-major order, full variables all entries row-major, diagonal variables
//! their diagonal.
//!
//! Matrix-valued building blocks are written with [`MatExpr`] (general,
//! possibly rectangular) and assembled into symmetric constraint matrices
//! with [`AffineMatrixExpr::from_blocks`], which takes the upper-triangular
//! block description and mirrors it, the way block LMIs are usually written
//! with `*` in the lower triangle.
//!
//! Every constraint is posed either as `F(x) ⪯ -εI` ([`Sense::NegDef`]) or as
//! `F(x) ⪰ εI` ([`Sense::PosDef`]), with one problem-wide strictness `ε`.
//! Constraints flagged non-strict drop the `ε` shift.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{self, DiagMatrix, LinalgError, Matrix, SymMatrix};

/// Default strictness slack applied to strict constraints.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum LmiError {
    DuplicateVariable(String),
    /// A point lacks a value for the given global entry.
    IncompletePoint { entry: usize },
    NonFinitePoint { entry: usize },
    /// A term references an entry the problem does not declare.
    UnknownEntry { entry: usize },
    /// Block sizes in an assembly or constraint do not line up.
    BlockShape(String),
    InvalidEpsilon(f64),
    Linalg(LinalgError),
}

impl fmt::Display for LmiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LmiError::DuplicateVariable(name) => write!(f, "variable `{name}` declared twice"),
            LmiError::IncompletePoint { entry } => write!(f, "point has no value for entry {entry}"),
            LmiError::NonFinitePoint { entry } => write!(f, "point entry {entry} is not finite"),
            LmiError::UnknownEntry { entry } => write!(f, "expression references unknown entry {entry}"),
            LmiError::BlockShape(msg) => write!(f, "inconsistent block shapes: {msg}"),
            LmiError::InvalidEpsilon(eps) => write!(f, "strictness slack must be >= 0, got {eps}"),
            LmiError::Linalg(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for LmiError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            LmiError::Linalg(e) => Some(e),
            _ => None,
        }
    }
}

impl From<LinalgError> for LmiError {
    fn from(e: LinalgError) -> Self {
        LmiError::Linalg(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Diagonal(usize),
    Full { rows: usize, cols: usize },
    Symmetric(usize),
}

impl Shape {
    /// Number of free scalar entries.
    pub fn len(&self) -> usize {
        match *self {
            Shape::Scalar => 1,
            Shape::Diagonal(n) => n,
            Shape::Full { rows, cols } => rows * cols,
            Shape::Symmetric(n) => n * (n + 1) / 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Matrix dimensions `(rows, cols)` of the variable.
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            Shape::Scalar => (1, 1),
            Shape::Diagonal(n) | Shape::Symmetric(n) => (n, n),
            Shape::Full { rows, cols } => (rows, cols),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarSpec {
    pub name: String,
    pub shape: Shape,
}

/// Handle to a declared variable; carries its global entry offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    offset: usize,
    shape: Shape,
}

impl Var {
    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Global index of the entry sitting at matrix position `(i, j)`, or
    /// `None` for structurally zero positions (off-diagonal of a diagonal).
    pub fn entry(&self, i: usize, j: usize) -> Option<usize> {
        let local = match self.shape {
            Shape::Scalar => (i == 0 && j == 0).then_some(0),
            Shape::Diagonal(n) => (i == j && i < n).then_some(i),
            Shape::Full { rows, cols } => (i < rows && j < cols).then_some(i * cols + j),
            Shape::Symmetric(n) => (i < n && j < n).then(|| {
                let (r, c) = if i <= j { (i, j) } else { (j, i) };
                sym_index(n, r, c)
            }),
        }?;
        Some(self.offset + local)
    }

    /// The variable as an affine matrix expression.
    pub fn expr(&self) -> MatExpr {
        let (rows, cols) = self.shape.dims();
        let mut terms: BTreeMap<usize, Matrix> = BTreeMap::new();
        for i in 0..rows {
            for j in 0..cols {
                if let Some(e) = self.entry(i, j) {
                    let coeff = terms.entry(e).or_insert_with(|| Matrix::zeros(rows, cols));
                    *coeff = &*coeff + &unit(rows, cols, i, j);
                }
            }
        }
        MatExpr { rows, cols, constant: Matrix::zeros(rows, cols), terms }
    }
}

/// Position of upper-triangle element `(r, c)`, `r <= c`, in row-major order.
fn sym_index(n: usize, r: usize, c: usize) -> usize {
    r * n - r * r.saturating_sub(1) / 2 + (c - r)
}

fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |a, b| if a == i && b == j { 1.0 } else { 0.0 })
}

/// General (rectangular) affine matrix expression
/// `constant + Σ x_e · coeff_e`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatExpr {
    rows: usize,
    cols: usize,
    constant: Matrix,
    terms: BTreeMap<usize, Matrix>,
}

impl MatExpr {
    pub fn constant(m: Matrix) -> MatExpr {
        MatExpr { rows: m.rows(), cols: m.cols(), constant: m, terms: BTreeMap::new() }
    }

    pub fn zeros(rows: usize, cols: usize) -> MatExpr {
        MatExpr::constant(Matrix::zeros(rows, cols))
    }

    /// Single-entry expression `x_entry · coeff`.
    pub fn term(entry: usize, coeff: Matrix) -> MatExpr {
        let (rows, cols) = (coeff.rows(), coeff.cols());
        let mut terms = BTreeMap::new();
        terms.insert(entry, coeff);
        MatExpr { rows, cols, constant: Matrix::zeros(rows, cols), terms }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn map(&self, f: impl Fn(&Matrix) -> Matrix) -> MatExpr {
        let constant = f(&self.constant);
        MatExpr {
            rows: constant.rows(),
            cols: constant.cols(),
            terms: self.terms.iter().map(|(e, c)| (*e, f(c))).collect(),
            constant,
        }
    }

    pub fn add(&self, other: &MatExpr) -> MatExpr {
        assert!(self.rows == other.rows && self.cols == other.cols, "affine sum shape mismatch");
        let mut out = self.clone();
        out.constant = &out.constant + &other.constant;
        for (e, c) in &other.terms {
            let slot = out.terms.entry(*e).or_insert_with(|| Matrix::zeros(self.rows, self.cols));
            *slot = &*slot + c;
        }
        out
    }

    pub fn sub(&self, other: &MatExpr) -> MatExpr {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> MatExpr {
        self.map(|m| m.scale(s))
    }

    /// `A · self`
    pub fn lmul(&self, a: &Matrix) -> MatExpr {
        self.map(|m| a * m)
    }

    /// `self · A`
    pub fn rmul(&self, a: &Matrix) -> MatExpr {
        self.map(|m| m * a)
    }

    pub fn transpose(&self) -> MatExpr {
        self.map(Matrix::transpose)
    }

    pub fn evaluate(&self, p: &Point) -> Result<Matrix, LmiError> {
        let mut acc = self.constant.clone();
        for (e, c) in &self.terms {
            acc = &acc + &c.scale(p.value(*e)?);
        }
        Ok(acc)
    }
}

/// Symmetric affine matrix expression `constant + Σ x_e · coeff_e`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrixExpr {
    dim: usize,
    constant: SymMatrix,
    terms: Vec<(usize, SymMatrix)>,
}

impl AffineMatrixExpr {
    pub fn constant(c: SymMatrix) -> AffineMatrixExpr {
        AffineMatrixExpr { dim: c.dim(), constant: c, terms: Vec::new() }
    }

    /// Builds `constant + Σ value(entry)·coeff` from explicit terms.
    pub fn new(constant: SymMatrix, terms: Vec<(usize, SymMatrix)>) -> Result<Self, LmiError> {
        let dim = constant.dim();
        let mut merged: BTreeMap<usize, SymMatrix> = BTreeMap::new();
        for (e, c) in terms {
            if c.dim() != dim {
                return Err(LmiError::BlockShape(alloc::format!(
                    "term for entry {e} is {}x{}, expression is {dim}x{dim}",
                    c.dim(),
                    c.dim()
                )));
            }
            let slot = merged.entry(e).or_insert_with(|| SymMatrix::zeros(dim));
            *slot = &*slot + &c;
        }
        Ok(AffineMatrixExpr { dim, constant, terms: merged.into_iter().collect() })
    }

    /// Symmetric part of a square [`MatExpr`].
    pub fn symmetric_part(m: &MatExpr) -> AffineMatrixExpr {
        assert_eq!(m.rows, m.cols, "symmetric part of a non-square expression");
        AffineMatrixExpr {
            dim: m.rows,
            constant: SymMatrix::from_matrix(&m.constant),
            terms: m.terms.iter().map(|(e, c)| (*e, SymMatrix::from_matrix(c))).collect(),
        }
    }

    /// Assembles a symmetric block matrix from its upper-triangular blocks.
    ///
    /// `blocks[r][c]` for `c >= r` holds block `(r, c)`; entries with `c < r`
    /// are ignored (they are the transposes of the upper blocks). `None`
    /// stands for a zero block. Diagonal blocks are symmetrised.
    pub fn from_blocks(blocks: &[Vec<Option<MatExpr>>]) -> Result<AffineMatrixExpr, LmiError> {
        let nb = blocks.len();
        let mut sizes = vec![None; nb];
        for (r, row) in blocks.iter().enumerate() {
            if row.len() != nb {
                return Err(LmiError::BlockShape(alloc::format!(
                    "block row {r} has {} blocks, expected {nb}",
                    row.len()
                )));
            }
            for (c, b) in row.iter().enumerate().skip(r) {
                if let Some(b) = b {
                    for (idx, size) in [(r, b.rows), (c, b.cols)] {
                        match sizes[idx] {
                            None => sizes[idx] = Some(size),
                            Some(s) if s != size => {
                                return Err(LmiError::BlockShape(alloc::format!(
                                    "block ({r},{c}) conflicts with size {s} of block row/col {idx}"
                                )))
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        let sizes: Vec<usize> = sizes
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| LmiError::BlockShape(alloc::format!("block {i} has undetermined size"))))
            .collect::<Result<_, _>>()?;
        let starts: Vec<usize> = sizes
            .iter()
            .scan(0, |acc, s| {
                let start = *acc;
                *acc += s;
                Some(start)
            })
            .collect();
        let dim: usize = sizes.iter().sum();

        let place = |target: &mut Vec<f64>, m: &Matrix, r: usize, c: usize| {
            for i in 0..m.rows() {
                for j in 0..m.cols() {
                    let (gi, gj) = (starts[r] + i, starts[c] + j);
                    let v = if r == c { 0.5 * (m.get(i, j) + m.get(j, i)) } else { m.get(i, j) };
                    target[gi * dim + gj] = v;
                    target[gj * dim + gi] = v;
                }
            }
        };

        let mut constant = vec![0.0; dim * dim];
        let mut terms: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (r, row) in blocks.iter().enumerate() {
            for (c, b) in row.iter().enumerate().skip(r) {
                let Some(b) = b else { continue };
                place(&mut constant, &b.constant, r, c);
                for (e, coeff) in &b.terms {
                    let slot = terms.entry(*e).or_insert_with(|| vec![0.0; dim * dim]);
                    place(slot, coeff, r, c);
                }
            }
        }
        Ok(AffineMatrixExpr {
            dim,
            constant: SymMatrix::new(dim, constant)?,
            terms: terms
                .into_iter()
                .map(|(e, d)| SymMatrix::new(dim, d).map(|s| (e, s)))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant_part(&self) -> &SymMatrix {
        &self.constant
    }

    pub fn terms(&self) -> &[(usize, SymMatrix)] {
        &self.terms
    }

    pub fn neg(&self) -> AffineMatrixExpr {
        AffineMatrixExpr {
            dim: self.dim,
            constant: -&self.constant,
            terms: self.terms.iter().map(|(e, c)| (*e, -c)).collect(),
        }
    }

    /// `constant + Σ value·coeff`, returned exactly symmetric.
    pub fn evaluate(&self, p: &Point) -> Result<SymMatrix, LmiError> {
        let mut acc = self.constant.clone();
        for (e, c) in &self.terms {
            acc = acc.add_scaled(c, p.value(*e)?);
        }
        Ok(SymMatrix::from_matrix(&acc.to_matrix()))
    }
}

/// Evaluates `expr` at `p`.
pub fn evaluate(expr: &AffineMatrixExpr, p: &Point) -> Result<SymMatrix, LmiError> {
    expr.evaluate(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `F ⪯ -εI`
    NegDef,
    /// `F ⪰ εI`
    PosDef,
}

/// Signed distance of `expr(p)` to the boundary of the constraint: positive
/// means strictly satisfied with room to spare.
///
/// `NegDef`: `-λ_max(F) - ε`; `PosDef`: `λ_min(F) - ε`.
pub fn margin(expr: &AffineMatrixExpr, sense: Sense, epsilon: f64, p: &Point) -> Result<f64, LmiError> {
    let f = expr.evaluate(p)?;
    Ok(match sense {
        Sense::NegDef => -linalg::max_eig(&f)? - epsilon,
        Sense::PosDef => linalg::min_eig(&f)? - epsilon,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub expr: AffineMatrixExpr,
    pub sense: Sense,
    /// Strict constraints are shifted by the problem's `ε`.
    pub strict: bool,
}

/// Scalar entry values. Entries that were never set are reported as missing
/// by evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    values: Vec<Option<f64>>,
}

impl Point {
    /// A point with `len` unset entries.
    pub fn empty(len: usize) -> Point {
        Point { values: vec![None; len] }
    }

    pub fn from_values(values: &[f64]) -> Point {
        Point { values: values.iter().map(|v| Some(*v)).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, entry: usize) -> Result<f64, LmiError> {
        match self.values.get(entry).copied().flatten() {
            None => Err(LmiError::IncompletePoint { entry }),
            Some(v) if !v.is_finite() => Err(LmiError::NonFinitePoint { entry }),
            Some(v) => Ok(v),
        }
    }

    /// All values, failing on the first missing or non-finite entry.
    pub fn values(&self) -> Result<Vec<f64>, LmiError> {
        (0..self.values.len()).map(|e| self.value(e)).collect()
    }

    pub fn set(&mut self, entry: usize, v: f64) {
        if entry >= self.values.len() {
            self.values.resize(entry + 1, None);
        }
        self.values[entry] = Some(v);
    }

    pub fn set_scalar(&mut self, var: &Var, v: f64) {
        self.set(var.offset, v);
    }

    pub fn set_diag(&mut self, var: &Var, d: &DiagMatrix) {
        for i in 0..d.dim() {
            if let Some(e) = var.entry(i, i) {
                self.set(e, d.get(i));
            }
        }
    }

    pub fn set_full(&mut self, var: &Var, m: &Matrix) {
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if let Some(e) = var.entry(i, j) {
                    self.set(e, m.get(i, j));
                }
            }
        }
    }

    /// Sets a symmetric variable from the upper triangle of `m`.
    pub fn set_sym(&mut self, var: &Var, m: &SymMatrix) {
        for i in 0..m.dim() {
            for j in i..m.dim() {
                if let Some(e) = var.entry(i, j) {
                    self.set(e, m.get(i, j));
                }
            }
        }
    }

    pub fn scalar(&self, var: &Var) -> Result<f64, LmiError> {
        self.value(var.offset)
    }

    pub fn diag(&self, var: &Var) -> Result<DiagMatrix, LmiError> {
        let (n, _) = var.shape.dims();
        let d = (0..n).map(|i| self.value(var.offset + i)).collect::<Result<Vec<_>, _>>()?;
        Ok(DiagMatrix::new(d)?)
    }

    pub fn full(&self, var: &Var) -> Result<Matrix, LmiError> {
        let (rows, cols) = var.shape.dims();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(match var.entry(i, j) {
                    Some(e) => self.value(e)?,
                    None => 0.0,
                });
            }
        }
        Ok(Matrix::new(rows, cols, data)?)
    }

    pub fn sym(&self, var: &Var) -> Result<SymMatrix, LmiError> {
        let (n, _) = var.shape.dims();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = match var.entry(i, j) {
                    Some(e) => self.value(e)?,
                    None => 0.0,
                };
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Ok(SymMatrix::new(n, data)?)
    }
}

/// A system of LMIs with an optional linear objective (to be minimised).
#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    variables: Vec<(VarSpec, Var)>,
    constraints: Vec<Constraint>,
    objective: Option<Vec<(usize, f64)>>,
    epsilon: f64,
    entries: usize,
}

impl LmiProblem {
    pub fn new(epsilon: f64) -> Result<LmiProblem, LmiError> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(LmiError::InvalidEpsilon(epsilon));
        }
        Ok(LmiProblem { variables: Vec::new(), constraints: Vec::new(), objective: None, epsilon, entries: 0 })
    }

    pub fn add_var(&mut self, name: &str, shape: Shape) -> Result<Var, LmiError> {
        if self.variables.iter().any(|(spec, _)| spec.name == name) {
            return Err(LmiError::DuplicateVariable(name.into()));
        }
        let var = Var { offset: self.entries, shape };
        self.entries += shape.len();
        self.variables.push((VarSpec { name: name.into(), shape }, var));
        Ok(var)
    }

    fn check_entries<'a>(&self, entries: impl IntoIterator<Item = &'a usize>) -> Result<(), LmiError> {
        for &e in entries {
            if e >= self.entries {
                return Err(LmiError::UnknownEntry { entry: e });
            }
        }
        Ok(())
    }

    pub fn add_constraint(
        &mut self,
        label: &str,
        expr: AffineMatrixExpr,
        sense: Sense,
        strict: bool,
    ) -> Result<usize, LmiError> {
        self.check_entries(expr.terms.iter().map(|(e, _)| e))?;
        self.constraints.push(Constraint { label: label.into(), expr, sense, strict });
        Ok(self.constraints.len() - 1)
    }

    /// Sets the objective `Σ weight·x_entry` (minimised).
    pub fn set_objective(&mut self, terms: Vec<(usize, f64)>) -> Result<(), LmiError> {
        self.check_entries(terms.iter().map(|(e, _)| e))?;
        self.objective = Some(terms);
        Ok(())
    }

    pub fn clear_objective(&mut self) {
        self.objective = None;
    }

    pub fn variables(&self) -> impl Iterator<Item = (&VarSpec, Var)> {
        self.variables.iter().map(|(s, v)| (s, *v))
    }

    pub fn var(&self, name: &str) -> Option<Var> {
        self.variables.iter().find(|(s, _)| s.name == name).map(|(_, v)| *v)
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> Option<&[(usize, f64)]> {
        self.objective.as_deref()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn num_entries(&self) -> usize {
        self.entries
    }

    pub fn constraint_epsilon(&self, c: &Constraint) -> f64 {
        if c.strict {
            self.epsilon
        } else {
            0.0
        }
    }

    /// Margin of every constraint at `p`, in declaration order.
    pub fn margins(&self, p: &Point) -> Result<Vec<f64>, LmiError> {
        self.constraints
            .iter()
            .map(|c| margin(&c.expr, c.sense, self.constraint_epsilon(c), p))
            .collect()
    }

    pub fn objective_value(&self, p: &Point) -> Result<Option<f64>, LmiError> {
        match &self.objective {
            None => Ok(None),
            Some(terms) => {
                let mut acc = 0.0;
                for (e, w) in terms {
                    acc += w * p.value(*e)?;
                }
                Ok(Some(acc))
            }
        }
    }
}

/// One constraint block in standard form `F(x) = F₀ + Σ x_e F_e ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StdBlock {
    pub constant: SymMatrix,
    pub coeffs: Vec<(usize, SymMatrix)>,
}

impl StdBlock {
    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn evaluate(&self, x: &[f64]) -> SymMatrix {
        let mut acc = self.constant.clone();
        for (e, c) in &self.coeffs {
            acc = acc.add_scaled(c, x[*e]);
        }
        acc
    }
}

/// Standard-form description consumed by the SDP solver: minimise `cᵀx`
/// subject to every block being positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub num_entries: usize,
    pub blocks: Vec<StdBlock>,
    /// Dense objective; all zeros when the problem has none.
    pub objective: Vec<f64>,
    pub has_objective: bool,
}

/// Folds senses and strictness into `F_j(x) ⪰ 0` blocks.
///
/// `NegDef`: `F = -expr - εI`; `PosDef`: `F = expr - εI`.
pub fn vectorize(problem: &LmiProblem) -> StandardForm {
    let blocks = problem
        .constraints
        .iter()
        .map(|c| {
            let sign = match c.sense {
                Sense::NegDef => -1.0,
                Sense::PosDef => 1.0,
            };
            let eps = problem.constraint_epsilon(c);
            let constant = c.expr.constant.scale(sign).add_scaled(&SymMatrix::identity(c.expr.dim), -eps);
            let coeffs = c.expr.terms.iter().map(|(e, m)| (*e, m.scale(sign))).collect();
            StdBlock { constant, coeffs }
        })
        .collect();
    let mut objective = vec![0.0; problem.entries];
    if let Some(terms) = &problem.objective {
        for (e, w) in terms {
            objective[*e] += w;
        }
    }
    StandardForm { num_entries: problem.entries, blocks, objective, has_objective: problem.objective.is_some() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_entries_follow_upper_triangle() {
        let mut prob = LmiProblem::new(0.0).unwrap();
        let _a = prob.add_var("a", Shape::Scalar).unwrap();
        let g = prob.add_var("g", Shape::Symmetric(3)).unwrap();
        let got: Vec<usize> = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
            .iter()
            .map(|&(i, j)| g.entry(i, j).unwrap())
            .collect();
        assert_eq!(got, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(g.entry(2, 0), g.entry(0, 2));
        assert_eq!(prob.num_entries(), 7);
    }

    #[test]
    fn entry_counts_by_shape() {
        let mut prob = LmiProblem::new(0.0).unwrap();
        prob.add_var("d", Shape::Diagonal(2)).unwrap();
        assert_eq!(prob.num_entries(), 2);
        prob.add_var("s", Shape::Symmetric(2)).unwrap();
        assert_eq!(prob.num_entries(), 5);
        prob.add_var("w", Shape::Full { rows: 2, cols: 3 }).unwrap();
        assert_eq!(prob.num_entries(), 11);
        assert!(matches!(prob.add_var("w", Shape::Scalar), Err(LmiError::DuplicateVariable(_))));
    }

    #[test]
    fn expression_without_terms_is_its_constant() {
        let c = SymMatrix::new(2, vec![1.0, 2.0, 2.0, -3.0]).unwrap();
        let e = AffineMatrixExpr::constant(c.clone());
        assert_eq!(e.evaluate(&Point::empty(0)).unwrap(), c);
    }

    #[test]
    fn scalar_constraint_at_boundary() {
        let mut prob = LmiProblem::new(0.0).unwrap();
        let x = prob.add_var("x", Shape::Scalar).unwrap();
        let e = AffineMatrixExpr::symmetric_part(&x.expr().sub(&MatExpr::constant(Matrix::identity(1))));
        let p = Point::from_values(&[1.0]);
        assert_eq!(e.evaluate(&p).unwrap().get(0, 0), 0.0);
        assert_eq!(margin(&e, Sense::NegDef, 0.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn violated_margin_includes_epsilon() {
        let e = AffineMatrixExpr::constant(SymMatrix::identity(1));
        let eps = 1e-6;
        let m = margin(&e, Sense::NegDef, eps, &Point::empty(0)).unwrap();
        assert_eq!(m, -1.0 - eps);
    }

    #[test]
    fn missing_entry_is_reported() {
        let mut prob = LmiProblem::new(0.0).unwrap();
        let x = prob.add_var("x", Shape::Diagonal(2)).unwrap();
        let e = AffineMatrixExpr::symmetric_part(&x.expr());
        let mut p = Point::empty(2);
        p.set(0, 1.0);
        assert_eq!(e.evaluate(&p).unwrap_err(), LmiError::IncompletePoint { entry: 1 });
    }

    #[test]
    fn block_assembly_mirrors_upper_blocks() {
        let mut prob = LmiProblem::new(0.0).unwrap();
        let x = prob.add_var("x", Shape::Full { rows: 1, cols: 2 }).unwrap();
        let e = AffineMatrixExpr::from_blocks(&[
            vec![Some(MatExpr::constant(Matrix::identity(1))), Some(x.expr())],
            vec![None, Some(MatExpr::constant(Matrix::identity(2).scale(2.0)))],
        ])
        .unwrap();
        let f = e.evaluate(&Point::from_values(&[3.0, -4.0])).unwrap();
        assert_eq!(f.dim(), 3);
        assert_eq!(f.get(0, 1), 3.0);
        assert_eq!(f.get(1, 0), 3.0);
        assert_eq!(f.get(2, 0), -4.0);
        assert_eq!(f.get(2, 2), 2.0);
    }

    #[test]
    fn unknown_entries_rejected() {
        let mut prob = LmiProblem::new(0.0).unwrap();
        let e = AffineMatrixExpr::new(SymMatrix::zeros(1), vec![(3, SymMatrix::identity(1))]).unwrap();
        assert_eq!(prob.add_constraint("c", e, Sense::PosDef, true).unwrap_err(), LmiError::UnknownEntry { entry: 3 });
        assert!(LmiProblem::new(-1.0).is_err());
    }
}
