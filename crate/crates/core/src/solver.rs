//! A uniform contract for the three program shapes the engine needs: linear
//! programs, convex diagonal quadratic programs, and 0/1 integer programs.
//!
//! LPs and QPs are handed to the `clarabel` interior-point solver with
//! tightened tolerances. Binary integer programs are solved by an exact
//! depth-first branch-and-bound with suffix bounds and LP-relaxation bounds;
//! among optimal solutions it returns the lexicographically smallest variable
//! assignment under the fixed variable order, so results are reproducible.
//!
//! Every `Optimal` result is re-checked by [`max_violation`], an independent
//! feasibility checker that never consults the solver, and QP results must
//! additionally pass a KKT stationarity check built from the returned duals.

use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use thiserror::Error;

use crate::EPS;

/// Strict tie tolerance used inside branch-and-bound.
const TIE_TOL: f64 = 1e-9;
/// Minimum number of free variables before a node pays for an LP bound.
const LP_BOUND_MIN_FREE: usize = 16;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// A decision variable with (possibly infinite) box bounds.
#[derive(Clone, Debug)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl Variable {
    pub fn free(name: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn nonnegative(name: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            lower: 0.0,
            upper: f64::INFINITY,
        }
    }

    pub fn bounded(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Variable {
            name: name.into(),
            lower,
            upper,
        }
    }
}

/// One dense linear row `coeffs . x  (sense)  rhs`.
#[derive(Clone, Debug)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<f64>, sense: Sense, rhs: f64) -> Self {
        LinearConstraint { coeffs, sense, rhs }
    }
}

#[derive(Clone, Debug)]
pub struct LinearProgramSpec {
    pub variables: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
    pub objective: Vec<f64>,
    pub direction: Direction,
}

impl LinearProgramSpec {
    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    fn validate(&self) -> Result<(), SolverError> {
        if self.objective.len() != self.num_vars() {
            return Err(SolverError::Malformed(format!(
                "objective has {} coefficients for {} variables",
                self.objective.len(),
                self.num_vars()
            )));
        }
        for (k, v) in self.variables.iter().enumerate() {
            if v.lower > v.upper {
                return Err(SolverError::Malformed(format!(
                    "variable {k} has lower bound {} above upper bound {}",
                    v.lower, v.upper
                )));
            }
        }
        for (r, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != self.num_vars() {
                return Err(SolverError::Malformed(format!(
                    "constraint {r} has {} coefficients for {} variables",
                    c.coeffs.len(),
                    self.num_vars()
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|w| !w.is_finite()) {
                return Err(SolverError::Malformed(format!(
                    "constraint {r} has a non-finite coefficient or rhs"
                )));
            }
        }
        if self.objective.iter().any(|w| !w.is_finite()) {
            return Err(SolverError::Malformed(
                "objective has a non-finite coefficient".into(),
            ));
        }
        Ok(())
    }
}

/// One separable quadratic objective term `weight * (x_k - center)^2`.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticTerm {
    pub weight: f64,
    pub center: f64,
}

/// Minimize `sum_k weight_k (x_k - center_k)^2 + objective . x` subject to the
/// base program's constraints. Weights must be nonnegative (convexity).
#[derive(Clone, Debug)]
pub struct QuadraticProgramSpec {
    pub base: LinearProgramSpec,
    pub quadratic: Vec<QuadraticTerm>,
}

impl QuadraticProgramSpec {
    fn validate(&self) -> Result<(), SolverError> {
        self.base.validate()?;
        if self.base.direction != Direction::Minimize {
            return Err(SolverError::Malformed(
                "quadratic programs are minimization problems".into(),
            ));
        }
        if self.quadratic.len() != self.base.num_vars() {
            return Err(SolverError::Malformed(format!(
                "{} quadratic terms for {} variables",
                self.quadratic.len(),
                self.base.num_vars()
            )));
        }
        for (k, t) in self.quadratic.iter().enumerate() {
            if t.weight < 0.0 || !t.weight.is_finite() || !t.center.is_finite() {
                return Err(SolverError::Malformed(format!(
                    "quadratic term {k} is not convex/finite (weight {}, center {})",
                    t.weight, t.center
                )));
            }
        }
        Ok(())
    }

    /// Value of the full quadratic objective at `x`.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let quad: f64 = self
            .quadratic
            .iter()
            .zip(x)
            .map(|(t, &v)| t.weight * (v - t.center) * (v - t.center))
            .sum();
        let lin: f64 = self.base.objective.iter().zip(x).map(|(&c, &v)| c * v).sum();
        quad + lin
    }
}

/// A binary integer program: the base program with every variable restricted
/// to {0, 1} (bounds may pin a variable to a single value).
#[derive(Clone, Debug)]
pub struct IntegerProgramSpec {
    pub base: LinearProgramSpec,
}

impl IntegerProgramSpec {
    fn validate(&self) -> Result<(), SolverError> {
        self.base.validate()?;
        for (k, v) in self.base.variables.iter().enumerate() {
            if v.lower < -TIE_TOL || v.upper > 1.0 + TIE_TOL {
                return Err(SolverError::Malformed(format!(
                    "binary variable {k} has bounds [{}, {}] outside [0, 1]",
                    v.lower, v.upper
                )));
            }
        }
        Ok(())
    }
}

/// An optimal solution: objective value, variable assignment, and (for LP/QP)
/// one dual multiplier per constraint row, in the spec's constraint order.
#[derive(Clone, Debug)]
pub struct Solution {
    pub objective: f64,
    pub values: Vec<f64>,
    pub duals: Vec<f64>,
}

#[derive(Clone, Debug)]
pub enum SolveResult {
    Optimal(Solution),
    Infeasible,
    Unbounded,
}

impl SolveResult {
    pub fn optimal(&self) -> Option<&Solution> {
        match self {
            SolveResult::Optimal(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, SolveResult::Infeasible)
    }

    pub fn status_name(&self) -> &'static str {
        match self {
            SolveResult::Optimal(_) => "Optimal",
            SolveResult::Infeasible => "Infeasible",
            SolveResult::Unbounded => "Unbounded",
        }
    }
}

/// Largest absolute constraint/bound violation of `x` in the given program.
///
/// This checker is deliberately independent of the solve path: it only reads
/// the spec and the candidate point.
pub fn max_violation(spec: &LinearProgramSpec, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for c in &spec.constraints {
        let lhs: f64 = c.coeffs.iter().zip(x).map(|(&w, &v)| w * v).sum();
        let gap = match c.sense {
            Sense::Le => lhs - c.rhs,
            Sense::Ge => c.rhs - lhs,
            Sense::Eq => (lhs - c.rhs).abs(),
        };
        worst = worst.max(gap);
    }
    for (v, &val) in spec.variables.iter().zip(x) {
        if v.lower.is_finite() {
            worst = worst.max(v.lower - val);
        }
        if v.upper.is_finite() {
            worst = worst.max(val - v.upper);
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// clarabel bridge
// ---------------------------------------------------------------------------

struct ConicForm {
    /// Rows in clarabel order: equalities, inequalities (as `a.x <= b`), bounds.
    rows: Vec<(Vec<(usize, f64)>, f64)>,
    n_eq: usize,
    /// For each original constraint index, its clarabel row and sign flip.
    row_of_constraint: Vec<(usize, f64)>,
}

/// Rewrites the spec's rows as `A x + s = b` with `s` in a zero cone (first
/// `n_eq` rows) then a nonnegative cone. `Ge` rows are negated, and finite
/// variable bounds become extra inequality rows at the end.
fn conic_form(spec: &LinearProgramSpec) -> ConicForm {
    let mut rows = Vec::new();
    let mut row_of_constraint = vec![(0usize, 1.0f64); spec.constraints.len()];

    let sparse = |coeffs: &[f64], flip: f64| -> Vec<(usize, f64)> {
        coeffs
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(k, &w)| (k, flip * w))
            .collect()
    };

    for (r, c) in spec.constraints.iter().enumerate() {
        if c.sense == Sense::Eq {
            row_of_constraint[r] = (rows.len(), 1.0);
            rows.push((sparse(&c.coeffs, 1.0), c.rhs));
        }
    }
    let n_eq = rows.len();
    for (r, c) in spec.constraints.iter().enumerate() {
        match c.sense {
            Sense::Le => {
                row_of_constraint[r] = (rows.len(), 1.0);
                rows.push((sparse(&c.coeffs, 1.0), c.rhs));
            }
            Sense::Ge => {
                row_of_constraint[r] = (rows.len(), -1.0);
                rows.push((sparse(&c.coeffs, -1.0), -c.rhs));
            }
            Sense::Eq => {}
        }
    }
    for (k, v) in spec.variables.iter().enumerate() {
        if v.upper.is_finite() {
            rows.push((vec![(k, 1.0)], v.upper));
        }
        if v.lower.is_finite() {
            rows.push((vec![(k, -1.0)], -v.lower));
        }
    }
    if rows.iter().all(|(row, _)| row.is_empty()) {
        // A vacuous 0.x <= 1 row with a structural entry; clarabel's qdldl
        // debug-asserts on an entirely empty constraint block.
        rows.push((vec![(0, 0.0)], 1.0));
    }
    ConicForm {
        rows,
        n_eq,
        row_of_constraint,
    }
}

fn csc_from_rows(rows: &[(Vec<(usize, f64)>, f64)], n: usize) -> CscMatrix<f64> {
    let mut ri = Vec::new();
    let mut ci = Vec::new();
    let mut vals = Vec::new();
    for (r, (row, _)) in rows.iter().enumerate() {
        for &(c, w) in row {
            ri.push(r);
            ci.push(c);
            vals.push(w);
        }
    }
    CscMatrix::new_from_triplets(rows.len(), n, ri, ci, vals)
}

fn settings() -> clarabel::solver::DefaultSettings<f64> {
    DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-10)
        .tol_gap_rel(1e-10)
        .tol_feas(1e-10)
        .build()
        .expect("static solver settings")
}

struct ConicSolution {
    status: SolverStatus,
    x: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
}

fn solve_conic(
    p_diag: &[f64],
    q: &[f64],
    form: &ConicForm,
    n: usize,
) -> Result<ConicSolution, SolverError> {
    // Structural diagonal zeros keep the matrix non-empty; clarabel's qdldl
    // permutation helpers debug-assert on fully empty workspaces.
    let p = {
        let idx: Vec<usize> = (0..n).collect();
        CscMatrix::new_from_triplets(n, n, idx.clone(), idx, p_diag.to_vec())
    };
    let a = csc_from_rows(&form.rows, n);
    let b: Vec<f64> = form.rows.iter().map(|(_, rhs)| *rhs).collect();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    if form.n_eq > 0 {
        cones.push(SupportedConeT::ZeroConeT(form.n_eq));
    }
    if form.rows.len() > form.n_eq {
        cones.push(SupportedConeT::NonnegativeConeT(form.rows.len() - form.n_eq));
    }
    let mut solver = DefaultSolver::new(&p, q, &a, &b, &cones, settings());
    solver.solve();
    Ok(ConicSolution {
        status: solver.solution.status,
        x: solver.solution.x.clone(),
        z: solver.solution.z.clone(),
        s: solver.solution.s.clone(),
    })
}

/// Extracts per-constraint duals in spec order, sign-corrected so that a dual
/// always refers to the constraint as written.
fn spec_duals(form: &ConicForm, z: &[f64]) -> Vec<f64> {
    form.row_of_constraint
        .iter()
        .map(|&(row, flip)| flip * z.get(row).copied().unwrap_or(0.0))
        .collect()
}

/// Degenerate zero-variable programs are decided without the solver.
fn solve_no_vars(spec: &LinearProgramSpec) -> SolveResult {
    let feasible = spec.constraints.iter().all(|c| match c.sense {
        Sense::Le => 0.0 <= c.rhs + EPS,
        Sense::Ge => 0.0 >= c.rhs - EPS,
        Sense::Eq => c.rhs.abs() <= EPS,
    });
    if feasible {
        SolveResult::Optimal(Solution {
            objective: 0.0,
            values: Vec::new(),
            duals: vec![0.0; spec.constraints.len()],
        })
    } else {
        SolveResult::Infeasible
    }
}

/// Solves a linear program.
///
/// `Optimal` results are feasible within [`EPS`] (checked independently);
/// infeasibility and unboundedness are reported as such.
pub fn solve_lp(spec: &LinearProgramSpec) -> Result<SolveResult, SolverError> {
    spec.validate()?;
    maybe_dump("lp", &write_lp_format(spec, None, false));
    if spec.num_vars() == 0 {
        return Ok(solve_no_vars(spec));
    }
    let n = spec.num_vars();
    let flip = match spec.direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    let q: Vec<f64> = spec.objective.iter().map(|&c| flip * c).collect();
    let form = conic_form(spec);
    let sol = solve_conic(&vec![0.0; n], &q, &form, n)?;
    finish_linear(spec, &form, sol)
}

fn finish_linear(
    spec: &LinearProgramSpec,
    form: &ConicForm,
    sol: ConicSolution,
) -> Result<SolveResult, SolverError> {
    match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let viol = max_violation(spec, &sol.x);
            if viol > EPS {
                return Err(SolverError::Numerical(format!(
                    "solver returned {:?} with constraint violation {viol:.3e}",
                    sol.status
                )));
            }
            let objective = spec
                .objective
                .iter()
                .zip(&sol.x)
                .map(|(&c, &v)| c * v)
                .sum();
            Ok(SolveResult::Optimal(Solution {
                objective,
                values: sol.x.clone(),
                duals: spec_duals(form, &sol.z),
            }))
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            Ok(SolveResult::Infeasible)
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            Ok(SolveResult::Unbounded)
        }
        other => Err(SolverError::Numerical(format!(
            "solver terminated with status {other:?}"
        ))),
    }
}

/// Solves a convex diagonal quadratic program.
///
/// Besides the independent feasibility check, every `Optimal` result must pass
/// a KKT stationarity check: the objective gradient is reproduced by the
/// returned multipliers (nonnegative on inequality rows) within [`EPS`].
pub fn solve_qp(spec: &QuadraticProgramSpec) -> Result<SolveResult, SolverError> {
    spec.validate()?;
    maybe_dump("qp", &write_lp_format(&spec.base, Some(&spec.quadratic), false));
    if spec.base.num_vars() == 0 {
        return Ok(solve_no_vars(&spec.base));
    }
    let n = spec.base.num_vars();
    // weight (x - r)^2 expands to weight x^2 - 2 weight r x + const.
    let p_diag: Vec<f64> = spec.quadratic.iter().map(|t| 2.0 * t.weight).collect();
    let q: Vec<f64> = spec
        .base
        .objective
        .iter()
        .zip(&spec.quadratic)
        .map(|(&c, t)| c - 2.0 * t.weight * t.center)
        .collect();
    let form = conic_form(&spec.base);
    let sol = solve_conic(&p_diag, &q, &form, n)?;
    match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let viol = max_violation(&spec.base, &sol.x);
            if viol > EPS {
                return Err(SolverError::Numerical(format!(
                    "QP solution violates constraints by {viol:.3e}"
                )));
            }
            check_kkt(&p_diag, &q, &form, &sol)?;
            Ok(SolveResult::Optimal(Solution {
                objective: spec.objective_at(&sol.x),
                values: sol.x.clone(),
                duals: spec_duals(&form, &sol.z),
            }))
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            Ok(SolveResult::Infeasible)
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            Ok(SolveResult::Unbounded)
        }
        other => Err(SolverError::Numerical(format!(
            "solver terminated with status {other:?}"
        ))),
    }
}

/// Stationarity + dual feasibility + complementary slackness for the conic
/// form `min 1/2 x'Px + q'x  s.t.  Ax + s = b`.
fn check_kkt(
    p_diag: &[f64],
    q: &[f64],
    form: &ConicForm,
    sol: &ConicSolution,
) -> Result<(), SolverError> {
    let n = q.len();
    let mut grad: Vec<f64> = (0..n).map(|k| p_diag[k] * sol.x[k] + q[k]).collect();
    for (r, (row, _)) in form.rows.iter().enumerate() {
        let z = sol.z.get(r).copied().unwrap_or(0.0);
        for &(k, w) in row {
            grad[k] += w * z;
        }
    }
    let scale = 1.0
        + sol.x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        + sol.z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let stat = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if stat > EPS * scale {
        return Err(SolverError::Numerical(format!(
            "KKT stationarity residual {stat:.3e} exceeds tolerance"
        )));
    }
    for r in form.n_eq..form.rows.len() {
        let z = sol.z.get(r).copied().unwrap_or(0.0);
        let s = sol.s.get(r).copied().unwrap_or(0.0);
        if z < -EPS {
            return Err(SolverError::Numerical(format!(
                "negative multiplier {z:.3e} on inequality row {r}"
            )));
        }
        if (z * s).abs() > EPS * scale {
            return Err(SolverError::Numerical(format!(
                "complementary slackness violated on row {r}: z*s = {:.3e}",
                z * s
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// binary integer programming
// ---------------------------------------------------------------------------

/// Solves a 0/1 integer program exactly.
///
/// The assignment returned is exactly integral and, among all optimal
/// assignments, lexicographically smallest under the fixed variable order.
pub fn solve_ip(spec: &IntegerProgramSpec) -> Result<SolveResult, SolverError> {
    spec.validate()?;
    maybe_dump("ip", &write_lp_format(&spec.base, None, true));
    let base = &spec.base;
    let n = base.num_vars();
    // Internally always maximize.
    let flip = match base.direction {
        Direction::Minimize => -1.0,
        Direction::Maximize => 1.0,
    };
    let obj: Vec<f64> = base.objective.iter().map(|&c| flip * c).collect();

    // Allowed binary values per variable given its bounds.
    let allowed: Vec<(bool, bool)> = base
        .variables
        .iter()
        .map(|v| (v.lower <= TIE_TOL, v.upper >= 1.0 - TIE_TOL))
        .collect();
    if allowed.iter().any(|&(a0, a1)| !a0 && !a1) {
        return Ok(SolveResult::Infeasible);
    }

    let search = BnbSearch::new(base, &obj, &allowed);

    // Phase 1: optimal value, searched in a value-guided order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| obj[b].partial_cmp(&obj[a]).unwrap().then(a.cmp(&b)));
    let best = search.optimum(&order, true);
    let z_star = match best {
        Some(z) => z,
        None => return Ok(SolveResult::Infeasible),
    };

    // Phase 2: first leaf in lexicographic order attaining the optimum.
    let natural: Vec<usize> = (0..n).collect();
    let assignment = search
        .lex_smallest_attaining(&natural, z_star)
        .ok_or_else(|| {
            SolverError::Numerical("branch-and-bound lost the incumbent it proved".into())
        })?;

    let objective: f64 = base
        .objective
        .iter()
        .zip(&assignment)
        .map(|(&c, &v)| c * v)
        .sum();
    Ok(SolveResult::Optimal(Solution {
        objective,
        values: assignment,
        duals: Vec::new(),
    }))
}

/// Shared state for the two branch-and-bound passes.
struct BnbSearch<'a> {
    base: &'a LinearProgramSpec,
    obj: &'a [f64],
    allowed: &'a [(bool, bool)],
    /// Per variable, the rows it appears in.
    columns: Vec<Vec<(usize, f64)>>,
}

struct Frame {
    /// Running lhs per row for the fixed prefix.
    lhs: Vec<f64>,
    value: f64,
}

impl<'a> BnbSearch<'a> {
    fn new(base: &'a LinearProgramSpec, obj: &'a [f64], allowed: &'a [(bool, bool)]) -> Self {
        let n = base.num_vars();
        let mut columns = vec![Vec::new(); n];
        for (r, c) in base.constraints.iter().enumerate() {
            for (k, &w) in c.coeffs.iter().enumerate() {
                if w != 0.0 {
                    columns[k].push((r, w));
                }
            }
        }
        BnbSearch {
            base,
            obj,
            allowed,
            columns,
        }
    }

    /// Suffix tables for a given search order: after fixing `order[..depth]`,
    /// the best possible remaining objective and the reachable lhs range of
    /// every row.
    fn suffix_tables(&self, order: &[usize]) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = order.len();
        let m = self.base.constraints.len();
        let mut obj_rest = vec![0.0; n + 1];
        let mut lo_rest = vec![vec![0.0; m]; n + 1];
        let mut hi_rest = vec![vec![0.0; m]; n + 1];
        for depth in (0..n).rev() {
            let k = order[depth];
            let (a0, a1) = self.allowed[k];
            let (vmin, vmax) = match (a0, a1) {
                (true, true) => (0.0, 1.0),
                (true, false) => (0.0, 0.0),
                (false, true) => (1.0, 1.0),
                (false, false) => unreachable!("checked before searching"),
            };
            let best_obj = (self.obj[k] * vmin).max(self.obj[k] * vmax);
            obj_rest[depth] = obj_rest[depth + 1] + best_obj;
            let (head, tail) = lo_rest.split_at_mut(depth + 1);
            head[depth].copy_from_slice(&tail[0]);
            let (head, tail) = hi_rest.split_at_mut(depth + 1);
            head[depth].copy_from_slice(&tail[0]);
            for &(r, w) in &self.columns[k] {
                lo_rest[depth][r] += (w * vmin).min(w * vmax);
                hi_rest[depth][r] += (w * vmin).max(w * vmax);
            }
        }
        (obj_rest, lo_rest, hi_rest)
    }

    /// A row is hopeless if no completion can satisfy it.
    fn row_hopeless(&self, r: usize, lhs: f64, lo_rest: f64, hi_rest: f64) -> bool {
        let c = &self.base.constraints[r];
        let tol = TIE_TOL * (1.0 + c.rhs.abs());
        match c.sense {
            Sense::Le => lhs + lo_rest > c.rhs + tol,
            Sense::Ge => lhs + hi_rest < c.rhs - tol,
            Sense::Eq => lhs + lo_rest > c.rhs + tol || lhs + hi_rest < c.rhs - tol,
        }
    }

    fn leaf_feasible(&self, lhs: &[f64]) -> bool {
        self.base.constraints.iter().zip(lhs).all(|(c, &v)| {
            let tol = TIE_TOL * (1.0 + c.rhs.abs());
            match c.sense {
                Sense::Le => v <= c.rhs + tol,
                Sense::Ge => v >= c.rhs - tol,
                Sense::Eq => (v - c.rhs).abs() <= tol,
            }
        })
    }

    /// LP-relaxation upper bound with the prefix `order[..depth]` fixed to
    /// `fixed`. Returns `None` when the relaxation is infeasible.
    fn lp_bound(&self, order: &[usize], fixed: &[f64], depth: usize) -> Option<f64> {
        let mut relax = self.base.clone();
        relax.direction = Direction::Maximize;
        relax.objective = self.obj.to_vec();
        for (k, v) in relax.variables.iter_mut().enumerate() {
            let (a0, a1) = self.allowed[k];
            v.lower = if a0 { 0.0 } else { 1.0 };
            v.upper = if a1 { 1.0 } else { 0.0 };
        }
        for d in 0..depth {
            let k = order[d];
            relax.variables[k].lower = fixed[d];
            relax.variables[k].upper = fixed[d];
        }
        match solve_lp(&relax) {
            Ok(SolveResult::Optimal(s)) => {
                // Guard against the relaxation slightly under-reporting.
                Some(s.objective + 1e-7 * (1.0 + s.objective.abs()))
            }
            Ok(SolveResult::Infeasible) => None,
            // A failed bound is only a lost pruning opportunity.
            _ => Some(f64::INFINITY),
        }
    }

    /// DFS for the optimal value. With `greedy`, explores the 1-branch first.
    fn optimum(&self, order: &[usize], greedy: bool) -> Option<f64> {
        let (obj_rest, lo_rest, hi_rest) = self.suffix_tables(order);
        let m = self.base.constraints.len();
        let mut frame = Frame {
            lhs: vec![0.0; m],
            value: 0.0,
        };
        let mut fixed = vec![0.0; order.len()];
        let mut incumbent: Option<f64> = None;
        self.dfs_value(
            order,
            0,
            &mut frame,
            &mut fixed,
            &mut incumbent,
            &obj_rest,
            &lo_rest,
            &hi_rest,
            greedy,
        );
        incumbent
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs_value(
        &self,
        order: &[usize],
        depth: usize,
        frame: &mut Frame,
        fixed: &mut [f64],
        incumbent: &mut Option<f64>,
        obj_rest: &[f64],
        lo_rest: &[Vec<f64>],
        hi_rest: &[Vec<f64>],
        greedy: bool,
    ) {
        if let Some(inc) = *incumbent {
            if frame.value + obj_rest[depth] <= inc + TIE_TOL {
                return;
            }
        }
        for r in 0..frame.lhs.len() {
            if self.row_hopeless(r, frame.lhs[r], lo_rest[depth][r], hi_rest[depth][r]) {
                return;
            }
        }
        if depth == order.len() {
            if self.leaf_feasible(&frame.lhs) {
                let beat = incumbent.map_or(true, |inc| frame.value > inc + TIE_TOL);
                if beat {
                    *incumbent = Some(frame.value);
                }
            }
            return;
        }
        if order.len() - depth >= LP_BOUND_MIN_FREE {
            match self.lp_bound(order, fixed, depth) {
                None => return,
                Some(bound) => {
                    if let Some(inc) = *incumbent {
                        if bound <= inc + TIE_TOL {
                            return;
                        }
                    }
                }
            }
        }
        let k = order[depth];
        let (a0, a1) = self.allowed[k];
        let mut branches: Vec<f64> = Vec::with_capacity(2);
        if greedy {
            if a1 {
                branches.push(1.0);
            }
            if a0 {
                branches.push(0.0);
            }
        } else {
            if a0 {
                branches.push(0.0);
            }
            if a1 {
                branches.push(1.0);
            }
        }
        for v in branches {
            fixed[depth] = v;
            if v == 1.0 {
                for &(r, w) in &self.columns[k] {
                    frame.lhs[r] += w;
                }
                frame.value += self.obj[k];
            }
            self.dfs_value(
                order, depth + 1, frame, fixed, incumbent, obj_rest, lo_rest, hi_rest, greedy,
            );
            if v == 1.0 {
                for &(r, w) in &self.columns[k] {
                    frame.lhs[r] -= w;
                }
                frame.value -= self.obj[k];
            }
        }
    }

    /// First leaf in lexicographic order (0 before 1, natural variable order)
    /// whose value attains `target`. Subtrees that cannot attain it are cut.
    fn lex_smallest_attaining(&self, order: &[usize], target: f64) -> Option<Vec<f64>> {
        let (obj_rest, lo_rest, hi_rest) = self.suffix_tables(order);
        let m = self.base.constraints.len();
        let mut frame = Frame {
            lhs: vec![0.0; m],
            value: 0.0,
        };
        let mut fixed = vec![0.0; order.len()];
        let mut out = None;
        self.dfs_lex(
            order, 0, &mut frame, &mut fixed, target, &mut out, &obj_rest, &lo_rest, &hi_rest,
        );
        out.map(|values: Vec<f64>| {
            // order is the identity here; keep the general permutation anyway.
            let mut natural = vec![0.0; values.len()];
            for (d, &k) in order.iter().enumerate() {
                natural[k] = values[d];
            }
            natural
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs_lex(
        &self,
        order: &[usize],
        depth: usize,
        frame: &mut Frame,
        fixed: &mut [f64],
        target: f64,
        out: &mut Option<Vec<f64>>,
        obj_rest: &[f64],
        lo_rest: &[Vec<f64>],
        hi_rest: &[Vec<f64>],
    ) -> bool {
        if out.is_some() {
            return true;
        }
        if frame.value + obj_rest[depth] < target - TIE_TOL {
            return false;
        }
        for r in 0..frame.lhs.len() {
            if self.row_hopeless(r, frame.lhs[r], lo_rest[depth][r], hi_rest[depth][r]) {
                return false;
            }
        }
        if depth == order.len() {
            if self.leaf_feasible(&frame.lhs) && frame.value >= target - TIE_TOL {
                *out = Some(fixed.to_vec());
                return true;
            }
            return false;
        }
        if order.len() - depth >= LP_BOUND_MIN_FREE {
            match self.lp_bound(order, fixed, depth) {
                None => return false,
                Some(bound) => {
                    if bound < target - TIE_TOL {
                        return false;
                    }
                }
            }
        }
        let k = order[depth];
        let (a0, a1) = self.allowed[k];
        if a0 {
            fixed[depth] = 0.0;
            if self.dfs_lex(
                order, depth + 1, frame, fixed, target, out, obj_rest, lo_rest, hi_rest,
            ) {
                return true;
            }
        }
        if a1 {
            fixed[depth] = 1.0;
            for &(r, w) in &self.columns[k] {
                frame.lhs[r] += w;
            }
            frame.value += self.obj[k];
            let found = self.dfs_lex(
                order, depth + 1, frame, fixed, target, out, obj_rest, lo_rest, hi_rest,
            );
            for &(r, w) in &self.columns[k] {
                frame.lhs[r] -= w;
            }
            frame.value -= self.obj[k];
            if found {
                return true;
            }
        }
        false
    }
}

// ---------------------------------------------------------------------------
// LP-format dump (debugging aid)
// ---------------------------------------------------------------------------

static LP_DUMP: Mutex<Option<(PathBuf, u64)>> = Mutex::new(None);

/// Routes a copy of every subsequently solved program to `dir` as an LP-format
/// text file. Pass `None` to turn dumping off.
pub fn set_lp_dump_dir(dir: Option<&Path>) -> io::Result<()> {
    let mut guard = LP_DUMP.lock().unwrap();
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            *guard = Some((d.to_path_buf(), 0));
        }
        None => *guard = None,
    }
    Ok(())
}

fn maybe_dump(kind: &str, text: &str) {
    let mut guard = LP_DUMP.lock().unwrap();
    if let Some((dir, counter)) = guard.as_mut() {
        let path = dir.join(format!("{counter:05}-{kind}.lp"));
        *counter += 1;
        // Best effort: a failed dump must not fail the solve.
        let _ = std::fs::write(path, text);
    }
}

fn lp_var_name(v: &Variable, k: usize) -> String {
    let cleaned: String = v
        .name
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if cleaned.is_empty() || cleaned.starts_with(|c: char| c.is_ascii_digit()) {
        format!("x{k}")
    } else {
        cleaned
    }
}

fn lp_terms(coeffs: &[f64], names: &[String]) -> String {
    let mut s = String::new();
    let mut first = true;
    for (k, &w) in coeffs.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        if first {
            if w < 0.0 {
                s.push_str("- ");
            }
            first = false;
        } else {
            s.push_str(if w < 0.0 { " - " } else { " + " });
        }
        s.push_str(&format!("{} {}", w.abs(), names[k]));
    }
    if first {
        s.push('0');
    }
    s
}

/// Renders a program in CPLEX LP text format. Quadratic objectives are
/// expanded (the constant term is dropped); binary sections are emitted for
/// integer programs.
pub fn write_lp_format(
    spec: &LinearProgramSpec,
    quadratic: Option<&[QuadraticTerm]>,
    binary: bool,
) -> String {
    let names: Vec<String> = spec
        .variables
        .iter()
        .enumerate()
        .map(|(k, v)| lp_var_name(v, k))
        .collect();
    let mut out = String::new();
    out.push_str(match spec.direction {
        Direction::Minimize => "Minimize\n",
        Direction::Maximize => "Maximize\n",
    });
    let mut lin = spec.objective.clone();
    if let Some(quads) = quadratic {
        for (c, t) in lin.iter_mut().zip(quads) {
            *c -= 2.0 * t.weight * t.center;
        }
    }
    out.push_str(&format!(" obj: {}", lp_terms(&lin, &names)));
    if let Some(quads) = quadratic {
        let mut qterms = String::new();
        let mut first = true;
        for (k, t) in quads.iter().enumerate() {
            if t.weight == 0.0 {
                continue;
            }
            if !first {
                qterms.push_str(" + ");
            }
            first = false;
            qterms.push_str(&format!("{} {} ^ 2", 2.0 * t.weight, names[k]));
        }
        if !first {
            out.push_str(&format!(" + [ {qterms} ] / 2"));
        }
    }
    out.push('\n');
    out.push_str("Subject To\n");
    for (r, c) in spec.constraints.iter().enumerate() {
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        out.push_str(&format!(" c{r}: {} {op} {}\n", lp_terms(&c.coeffs, &names), c.rhs));
    }
    out.push_str("Bounds\n");
    for (k, v) in spec.variables.iter().enumerate() {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) => out.push_str(&format!(" {} <= {} <= {}\n", v.lower, names[k], v.upper)),
            (true, false) => {
                if v.lower != 0.0 {
                    out.push_str(&format!(" {} >= {}\n", names[k], v.lower));
                }
            }
            (false, true) => out.push_str(&format!(" -inf <= {} <= {}\n", names[k], v.upper)),
            (false, false) => out.push_str(&format!(" {} free\n", names[k])),
        }
    }
    if binary {
        out.push_str("Binaries\n");
        for name in &names {
            out.push_str(&format!(" {name}\n"));
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(
        vars: Vec<Variable>,
        constraints: Vec<LinearConstraint>,
        objective: Vec<f64>,
        direction: Direction,
    ) -> LinearProgramSpec {
        LinearProgramSpec {
            variables: vars,
            constraints,
            objective,
            direction,
        }
    }

    #[test]
    fn lp_one_variable_lower_bound() {
        let spec = lp(
            vec![Variable::free("x")],
            vec![LinearConstraint::new(vec![1.0], Sense::Ge, 3.0)],
            vec![1.0],
            Direction::Minimize,
        );
        let sol = solve_lp(&spec).unwrap();
        let s = sol.optimal().expect("optimal");
        assert!((s.objective - 3.0).abs() < EPS);
        assert!(max_violation(&spec, &s.values) <= EPS);
    }

    #[test]
    fn lp_contradictory_bounds_infeasible() {
        let spec = lp(
            vec![Variable::free("x")],
            vec![
                LinearConstraint::new(vec![1.0], Sense::Ge, 3.0),
                LinearConstraint::new(vec![1.0], Sense::Le, 2.0),
            ],
            vec![1.0],
            Direction::Minimize,
        );
        assert!(solve_lp(&spec).unwrap().is_infeasible());
    }

    #[test]
    fn lp_unbounded() {
        let spec = lp(
            vec![Variable::free("x")],
            vec![],
            vec![1.0],
            Direction::Maximize,
        );
        assert!(matches!(solve_lp(&spec).unwrap(), SolveResult::Unbounded));
    }

    #[test]
    fn lp_malformed_row_width() {
        let spec = lp(
            vec![Variable::free("x")],
            vec![LinearConstraint::new(vec![1.0, 2.0], Sense::Ge, 0.0)],
            vec![1.0],
            Direction::Minimize,
        );
        assert!(matches!(solve_lp(&spec), Err(SolverError::Malformed(_))));
    }

    #[test]
    fn qp_projection_onto_half_line() {
        let spec = QuadraticProgramSpec {
            base: lp(
                vec![Variable::free("x")],
                vec![LinearConstraint::new(vec![1.0], Sense::Ge, 12.0)],
                vec![0.0],
                Direction::Minimize,
            ),
            quadratic: vec![QuadraticTerm {
                weight: 1.0,
                center: 10.0,
            }],
        };
        let sol = solve_qp(&spec).unwrap();
        let s = sol.optimal().expect("optimal");
        assert!((s.values[0] - 12.0).abs() < EPS);
        assert!((s.objective - 4.0).abs() < 1e-4);
    }

    #[test]
    fn qp_symmetric_projection() {
        // min sum (p_k - 10)^2 over { p1 + p2 = 28, p3 = 13, p >= 10 } -> (14, 14, 13).
        let spec = QuadraticProgramSpec {
            base: lp(
                vec![
                    Variable::nonnegative("p1"),
                    Variable::nonnegative("p2"),
                    Variable::nonnegative("p3"),
                ],
                vec![
                    LinearConstraint::new(vec![1.0, 1.0, 0.0], Sense::Eq, 28.0),
                    LinearConstraint::new(vec![0.0, 0.0, 1.0], Sense::Eq, 13.0),
                    LinearConstraint::new(vec![1.0, 0.0, 0.0], Sense::Ge, 10.0),
                    LinearConstraint::new(vec![0.0, 1.0, 0.0], Sense::Ge, 10.0),
                    LinearConstraint::new(vec![0.0, 0.0, 1.0], Sense::Ge, 10.0),
                ],
                vec![0.0; 3],
                Direction::Minimize,
            ),
            quadratic: vec![
                QuadraticTerm {
                    weight: 1.0,
                    center: 10.0,
                };
                3
            ],
        };
        let sol = solve_qp(&spec).unwrap();
        let s = sol.optimal().expect("optimal");
        for (got, want) in s.values.iter().zip([14.0, 14.0, 13.0]) {
            assert!((got - want).abs() < EPS, "{:?}", s.values);
        }
    }

    #[test]
    fn qp_infeasible() {
        let spec = QuadraticProgramSpec {
            base: lp(
                vec![Variable::bounded("x", 0.0, 1.0)],
                vec![LinearConstraint::new(vec![1.0], Sense::Ge, 2.0)],
                vec![0.0],
                Direction::Minimize,
            ),
            quadratic: vec![QuadraticTerm {
                weight: 1.0,
                center: 0.0,
            }],
        };
        assert!(solve_qp(&spec).unwrap().is_infeasible());
    }

    #[test]
    fn qp_rejects_nonconvex() {
        let spec = QuadraticProgramSpec {
            base: lp(
                vec![Variable::free("x")],
                vec![],
                vec![0.0],
                Direction::Minimize,
            ),
            quadratic: vec![QuadraticTerm {
                weight: -1.0,
                center: 0.0,
            }],
        };
        assert!(matches!(solve_qp(&spec), Err(SolverError::Malformed(_))));
    }

    fn binary_vars(n: usize) -> Vec<Variable> {
        (0..n).map(|k| Variable::bounded(format!("x{k}"), 0.0, 1.0)).collect()
    }

    #[test]
    fn ip_simple_packing() {
        let spec = IntegerProgramSpec {
            base: lp(
                binary_vars(2),
                vec![LinearConstraint::new(vec![1.0, 1.0], Sense::Le, 1.0)],
                vec![1.0, 1.0],
                Direction::Maximize,
            ),
        };
        let sol = solve_ip(&spec).unwrap();
        let s = sol.optimal().expect("optimal");
        assert!((s.objective - 1.0).abs() < EPS);
        // Lexicographically smallest optimum: x0 = 0, x1 = 1.
        assert_eq!(s.values, vec![0.0, 1.0]);
    }

    #[test]
    fn ip_empty_objective() {
        let spec = IntegerProgramSpec {
            base: lp(binary_vars(3), vec![], vec![0.0; 3], Direction::Maximize),
        };
        let s = solve_ip(&spec).unwrap();
        let s = s.optimal().expect("optimal");
        assert_eq!(s.objective, 0.0);
        assert_eq!(s.values, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn ip_infeasible() {
        let spec = IntegerProgramSpec {
            base: lp(
                binary_vars(2),
                vec![LinearConstraint::new(vec![1.0, 1.0], Sense::Ge, 3.0)],
                vec![1.0, 1.0],
                Direction::Maximize,
            ),
        };
        assert!(solve_ip(&spec).unwrap().is_infeasible());
    }

    #[test]
    fn ip_minimization_with_cover() {
        // min 3a + 2b + 4c  s.t. a + c >= 1, a + b >= 1, b + c >= 1.
        let spec = IntegerProgramSpec {
            base: lp(
                binary_vars(3),
                vec![
                    LinearConstraint::new(vec![1.0, 0.0, 1.0], Sense::Ge, 1.0),
                    LinearConstraint::new(vec![1.0, 1.0, 0.0], Sense::Ge, 1.0),
                    LinearConstraint::new(vec![0.0, 1.0, 1.0], Sense::Ge, 1.0),
                ],
                vec![3.0, 2.0, 4.0],
                Direction::Minimize,
            ),
        };
        let sol = solve_ip(&spec).unwrap();
        let s = sol.optimal().expect("optimal");
        assert!((s.objective - 5.0).abs() < EPS);
        assert_eq!(s.values, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn ip_fixed_variables_via_bounds() {
        let mut vars = binary_vars(2);
        vars[0].lower = 1.0; // force x0 = 1
        let spec = IntegerProgramSpec {
            base: lp(
                vars,
                vec![LinearConstraint::new(vec![1.0, 1.0], Sense::Le, 1.0)],
                vec![1.0, 5.0],
                Direction::Maximize,
            ),
        };
        let sol = solve_ip(&spec).unwrap();
        let s = sol.optimal().expect("optimal");
        assert_eq!(s.values, vec![1.0, 0.0]);
    }

    /// Exhaustive oracle over all 2^n assignments.
    fn enumerate_best(spec: &IntegerProgramSpec) -> Option<(f64, Vec<f64>)> {
        let n = spec.base.num_vars();
        let flip = match spec.base.direction {
            Direction::Minimize => -1.0,
            Direction::Maximize => 1.0,
        };
        let mut best: Option<(f64, Vec<f64>)> = None;
        'outer: for mask in 0..(1u32 << n) {
            let x: Vec<f64> = (0..n)
                .map(|k| if mask >> k & 1 == 1 { 1.0 } else { 0.0 })
                .collect();
            for (v, &val) in spec.base.variables.iter().zip(&x) {
                if val < v.lower - 1e-9 || val > v.upper + 1e-9 {
                    continue 'outer;
                }
            }
            if max_violation(&spec.base, &x) > 1e-9 {
                continue;
            }
            let obj: f64 = spec
                .base
                .objective
                .iter()
                .zip(&x)
                .map(|(&c, &v)| c * v)
                .sum();
            let better = match &best {
                None => true,
                Some((b, bx)) => {
                    flip * obj > flip * b + TIE_TOL
                        || ((flip * obj - flip * b).abs() <= TIE_TOL && x < *bx)
                }
            };
            if better {
                best = Some((obj, x));
            }
        }
        best
    }

    #[test]
    fn ip_matches_enumeration_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..40 {
            let n = rng.gen_range(1..=8);
            let m = rng.gen_range(0..=5);
            let constraints: Vec<LinearConstraint> = (0..m)
                .map(|_| {
                    let coeffs: Vec<f64> =
                        (0..n).map(|_| rng.gen_range(-3..=3) as f64).collect();
                    let sense = match rng.gen_range(0..3) {
                        0 => Sense::Le,
                        1 => Sense::Ge,
                        _ => Sense::Eq,
                    };
                    LinearConstraint::new(coeffs, sense, rng.gen_range(-2..=4) as f64)
                })
                .collect();
            let spec = IntegerProgramSpec {
                base: lp(
                    binary_vars(n),
                    constraints,
                    (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect(),
                    if rng.gen_bool(0.5) {
                        Direction::Maximize
                    } else {
                        Direction::Minimize
                    },
                ),
            };
            let got = solve_ip(&spec).unwrap();
            match (enumerate_best(&spec), got) {
                (None, SolveResult::Infeasible) => {}
                (Some((obj, x)), SolveResult::Optimal(s)) => {
                    assert!(
                        (obj - s.objective).abs() < 1e-9,
                        "trial {trial}: objective {obj} vs {}",
                        s.objective
                    );
                    assert_eq!(x, s.values, "trial {trial}: tie-break mismatch");
                }
                (want, got) => panic!("trial {trial}: oracle {want:?} vs solver {got:?}"),
            }
        }
    }

    #[test]
    fn optimal_results_pass_independent_residual_check() {
        let spec = lp(
            vec![
                Variable::bounded("x", 0.0, 4.0),
                Variable::bounded("y", 0.0, 4.0),
            ],
            vec![
                LinearConstraint::new(vec![1.0, 1.0], Sense::Le, 4.0),
                LinearConstraint::new(vec![2.0, 1.0], Sense::Ge, 2.0),
            ],
            vec![1.0, 2.0],
            Direction::Maximize,
        );
        let sol = solve_lp(&spec).unwrap();
        let s = sol.optimal().expect("optimal");
        assert!(max_violation(&spec, &s.values) <= EPS);
        assert!((s.objective - 8.0).abs() < EPS);
    }

    #[test]
    fn lp_format_render() {
        let spec = lp(
            vec![Variable::bounded("p1", 0.0, 20.0), Variable::free("g")],
            vec![LinearConstraint::new(vec![1.0, -1.0], Sense::Ge, 3.0)],
            vec![0.0, 1.0],
            Direction::Minimize,
        );
        let text = write_lp_format(&spec, None, false);
        assert!(text.contains("Minimize"));
        assert!(text.contains("c0: 1 p1 - 1 g >= 3"));
        assert!(text.contains("0 <= p1 <= 20"));
        assert!(text.contains("g free"));
        assert!(text.ends_with("End\n"));
    }

    #[test]
    fn lp_dump_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        set_lp_dump_dir(Some(dir.path())).unwrap();
        let spec = lp(
            vec![Variable::free("x")],
            vec![LinearConstraint::new(vec![1.0], Sense::Ge, 3.0)],
            vec![1.0],
            Direction::Minimize,
        );
        solve_lp(&spec).unwrap();
        set_lp_dump_dir(None).unwrap();
        let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert!(!entries.is_empty());
    }
}
