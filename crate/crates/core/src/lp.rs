//! Dense two-phase simplex and the Charnes–Cooper reduction for
//! linear-fractional programs.
//!
//! Problems in this crate are small (a few hundred variables) and highly
//! degenerate, so the solver favours determinism over speed: a dense
//! tableau, Dantzig pricing, and Bland's rule whenever a run of degenerate
//! pivots is detected.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Entries smaller than this are never used as pivots.
pub const PIVOT_TOL: f64 = 1e-9;
/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-7;
/// Reduced costs above `-OPT_TOL` are treated as nonnegative.
const OPT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_RUN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn token(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }

    fn flipped(self) -> Self {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Eq => Relation::Eq,
            Relation::Ge => Relation::Le,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `lower <= x <= upper`; `lower` may be `-inf`, `upper: None` means `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarBound {
    pub lower: f64,
    pub upper: Option<f64>,
}

impl Default for VarBound {
    fn default() -> Self {
        VarBound {
            lower: 0.0,
            upper: None,
        }
    }
}

/// `opt objective . x + constant` subject to dense linear constraints and
/// per-variable bounds (default `[0, inf)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<VarBound>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            sense,
            objective,
            objective_constant: 0.0,
            constraints: Vec::new(),
            bounds: vec![VarBound::default(); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Result<()> {
        if coeffs.len() != self.num_vars() {
            return Err(Error::MalformedProgram(format!(
                "constraint has {} coefficients, program has {} variables",
                coeffs.len(),
                self.num_vars()
            )));
        }
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        Ok(())
    }

    /// Adds a constraint given as `(variable, coefficient)` pairs; repeated
    /// variables accumulate.
    pub fn add_sparse(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) -> Result<()> {
        let mut coeffs = vec![0.0; self.num_vars()];
        for &(j, a) in terms {
            let slot = coeffs.get_mut(j).ok_or_else(|| {
                Error::MalformedProgram(format!("variable {j} out of range"))
            })?;
            *slot += a;
        }
        self.add_constraint(coeffs, relation, rhs)
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: Option<f64>) -> Result<()> {
        let b = self
            .bounds
            .get_mut(var)
            .ok_or_else(|| Error::MalformedProgram(format!("variable {var} out of range")))?;
        *b = VarBound { lower, upper };
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(Error::MalformedProgram("bounds length mismatch".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) || !self.objective_constant.is_finite() {
            return Err(Error::MalformedProgram("non-finite objective".into()));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(Error::MalformedProgram(format!("row {i} has wrong length")));
            }
            if row.coeffs.iter().any(|a| !a.is_finite()) || !row.rhs.is_finite() {
                return Err(Error::MalformedProgram(format!("row {i} is not finite")));
            }
        }
        for (j, b) in self.bounds.iter().enumerate() {
            if b.lower.is_nan() || b.lower == f64::INFINITY {
                return Err(Error::MalformedProgram(format!("bad lower bound on {j}")));
            }
            if let Some(u) = b.upper {
                if !u.is_finite() {
                    return Err(Error::MalformedProgram(format!("bad upper bound on {j}")));
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x) + self.objective_constant
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.constraints {
            let lhs = dot(&row.coeffs, x);
            let v = match row.relation {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (b, &xj) in self.bounds.iter().zip(x) {
            worst = worst.max(b.lower - xj);
            if let Some(u) = b.upper {
                worst = worst.max(xj - u);
            }
        }
        worst
    }

    /// Plain-text dump, one constraint per line:
    ///
    /// ```text
    /// lp <num_vars> <max|min>
    /// obj <constant> <c_1> ... <c_n>
    /// bound <j> <lower|-inf> <upper|inf>        (only non-default bounds)
    /// row <<=|=|>=> <rhs> <a_1> ... <a_n>
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let sense = match self.sense {
            Sense::Maximize => "max",
            Sense::Minimize => "min",
        };
        let _ = writeln!(out, "lp {} {}", self.num_vars(), sense);
        let _ = write!(out, "obj {}", fmt_num(self.objective_constant));
        for c in &self.objective {
            let _ = write!(out, " {}", fmt_num(*c));
        }
        out.push('\n');
        for (j, b) in self.bounds.iter().enumerate() {
            if *b != VarBound::default() {
                let upper = b.upper.map(fmt_num).unwrap_or_else(|| "inf".into());
                let _ = writeln!(out, "bound {} {} {}", j, fmt_num(b.lower), upper);
            }
        }
        for row in &self.constraints {
            let _ = write!(out, "row {} {}", row.relation.token(), fmt_num(row.rhs));
            for a in &row.coeffs {
                let _ = write!(out, " {}", fmt_num(*a));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the format written by [`LinearProgram::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::MalformedProgram(format!("line {line}: {msg}"));
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (ln, header) = lines.next().ok_or_else(|| bad(0, "empty input"))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("lp") {
            return Err(bad(ln, "expected `lp` header"));
        }
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(ln, "bad variable count"))?;
        let sense = match parts.next() {
            Some("max") => Sense::Maximize,
            Some("min") => Sense::Minimize,
            _ => return Err(bad(ln, "bad sense")),
        };
        let mut lp = LinearProgram::new(sense, vec![0.0; n]);
        let parse_nums = |ln: usize, it: std::str::SplitWhitespace<'_>| -> Result<Vec<f64>> {
            it.map(|s| parse_num(s).ok_or_else(|| bad(ln, "bad number")))
                .collect()
        };
        for (ln, line) in lines {
            let mut it = line.split_whitespace();
            match it.next() {
                Some("obj") => {
                    let nums = parse_nums(ln, it)?;
                    if nums.len() != n + 1 {
                        return Err(bad(ln, "objective length"));
                    }
                    lp.objective_constant = nums[0];
                    lp.objective = nums[1..].to_vec();
                }
                Some("bound") => {
                    let j: usize = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad(ln, "bad index"))?;
                    let lower = it.next().and_then(parse_num).ok_or_else(|| bad(ln, "bad lower"))?;
                    let upper = match it.next() {
                        Some("inf") => None,
                        Some(s) => Some(parse_num(s).ok_or_else(|| bad(ln, "bad upper"))?),
                        None => return Err(bad(ln, "missing upper")),
                    };
                    lp.set_bounds(j, lower, upper)?;
                }
                Some("row") => {
                    let relation = match it.next() {
                        Some("<=") => Relation::Le,
                        Some("=") => Relation::Eq,
                        Some(">=") => Relation::Ge,
                        _ => return Err(bad(ln, "bad relation")),
                    };
                    let nums = parse_nums(ln, it)?;
                    if nums.len() != n + 1 {
                        return Err(bad(ln, "row length"));
                    }
                    lp.add_constraint(nums[1..].to_vec(), relation, nums[0])?;
                }
                _ => return Err(bad(ln, "unknown directive")),
            }
        }
        Ok(lp)
    }
}

fn fmt_num(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else {
        // Shortest round-trip representation.
        format!("{x:?}")
    }
}

fn parse_num(s: &str) -> Option<f64> {
    match s {
        "-inf" => Some(f64::NEG_INFINITY),
        "inf" => Some(f64::INFINITY),
        _ => s.parse().ok(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value including the constant; meaningful when optimal.
    pub value: f64,
    /// Primal point; empty unless optimal.
    pub x: Vec<f64>,
    /// Feasibility certificate: largest constraint or bound violation of `x`.
    pub residual: f64,
    pub pivots: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, pivots: usize) -> Self {
        LpSolution {
            status,
            value: match status {
                LpStatus::Unbounded => f64::INFINITY,
                _ => f64::NAN,
            },
            x: Vec::new(),
            residual: f64::NAN,
            pivots,
        }
    }
}

/// How an original variable maps onto nonnegative tableau columns.
#[derive(Debug, Clone, Copy)]
enum Column {
    /// `x = offset + y`
    Shifted { col: usize, offset: f64 },
    /// `x = offset - y`
    Mirrored { col: usize, offset: f64 },
    /// `x = y_pos - y_neg`
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    /// Columns excluding the right-hand side.
    cols: usize,
    /// Row-major, `cols + 1` entries per row; the last holds the rhs.
    data: Vec<f64>,
    /// Reduced-cost row; the last entry holds minus the objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
    /// Columns that may never enter (artificials in phase two).
    banned: Vec<bool>,
    pivots: usize,
    max_pivots: usize,
    scratch: Vec<(usize, f64)>,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width() + self.cols]
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width();
        let p = self.data[r * w + q];
        let row_r = &mut self.data[r * w..(r + 1) * w];
        for v in row_r.iter_mut() {
            *v /= p;
        }
        row_r[q] = 1.0;
        self.scratch.clear();
        for (j, &v) in row_r.iter().enumerate() {
            if v != 0.0 {
                self.scratch.push((j, v));
            }
        }
        let (before, rest) = self.data.split_at_mut(r * w);
        let after = &mut rest[w..];
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[q];
            if f != 0.0 {
                for &(j, v) in &self.scratch {
                    row[j] -= f * v;
                }
                row[q] = 0.0;
            }
        }
        let f = self.cost[q];
        if f != 0.0 {
            for &(j, v) in &self.scratch {
                self.cost[j] -= f * v;
            }
            self.cost[q] = 0.0;
        }
        self.basis[r] = q;
        self.pivots += 1;
    }

    /// Runs primal simplex on the current cost row until optimality.
    fn optimize(&mut self) -> Result<Outcome> {
        let mut degenerate = 0usize;
        loop {
            if self.pivots > self.max_pivots {
                return Err(Error::NumericalFailure(format!(
                    "simplex exceeded {} pivots",
                    self.max_pivots
                )));
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let mut entering = None;
            let mut best = -OPT_TOL;
            for j in 0..self.cols {
                if self.banned[j] {
                    continue;
                }
                let rc = self.cost[j];
                if rc < -OPT_TOL {
                    if bland {
                        entering = Some(j);
                        break;
                    }
                    if rc < best {
                        best = rc;
                        entering = Some(j);
                    }
                }
            }
            let Some(q) = entering else {
                return Ok(Outcome::Optimal);
            };
            let mut leave: Option<(usize, f64, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, q);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr, la)) => {
                            if ratio < lr - 1e-12 {
                                true
                            } else if ratio <= lr + 1e-12 {
                                if bland {
                                    self.basis[i] < self.basis[li]
                                } else {
                                    a > la
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some((i, ratio, a));
                    }
                }
            }
            let Some((r, ratio, _)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, q);
        }
    }
}

/// Solves a linear program with the two-phase simplex method.
pub fn solve_lp(problem: &LinearProgram) -> Result<LpSolution> {
    problem.validate()?;
    let n = problem.num_vars();

    // Substitute every original variable by nonnegative columns.
    let mut columns = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for b in &problem.bounds {
        if let Some(u) = b.upper {
            if b.lower.is_finite() && u < b.lower - FEAS_TOL {
                return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
            }
        }
        let col = if b.lower.is_finite() {
            let c = Column::Shifted {
                col: ncols,
                offset: b.lower,
            };
            if let Some(u) = b.upper {
                bound_rows.push((ncols, (u - b.lower).max(0.0)));
            }
            ncols += 1;
            c
        } else if let Some(u) = b.upper {
            ncols += 1;
            Column::Mirrored {
                col: ncols - 1,
                offset: u,
            }
        } else {
            ncols += 2;
            Column::Split {
                pos: ncols - 2,
                neg: ncols - 1,
            }
        };
        columns.push(col);
    }
    let nstruct = ncols;

    // Rows over structural columns, normalised to nonnegative rhs.
    struct Row {
        coeffs: Vec<f64>,
        relation: Relation,
        rhs: f64,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(problem.constraints.len() + bound_rows.len());
    for con in &problem.constraints {
        let mut coeffs = vec![0.0; nstruct];
        let mut rhs = con.rhs;
        for (a, col) in con.coeffs.iter().zip(&columns) {
            if *a == 0.0 {
                continue;
            }
            match *col {
                Column::Shifted { col, offset } => {
                    coeffs[col] += a;
                    rhs -= a * offset;
                }
                Column::Mirrored { col, offset } => {
                    coeffs[col] -= a;
                    rhs -= a * offset;
                }
                Column::Split { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        let mut relation = con.relation;
        if coeffs.iter().all(|&a| a == 0.0) {
            let ok = match relation {
                Relation::Le => rhs >= -FEAS_TOL,
                Relation::Ge => rhs <= FEAS_TOL,
                Relation::Eq => rhs.abs() <= FEAS_TOL,
            };
            if !ok {
                return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
            }
            continue;
        }
        if rhs < 0.0 {
            coeffs.iter_mut().for_each(|a| *a = -*a);
            rhs = -rhs;
            relation = relation.flipped();
        }
        rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }
    for (col, cap) in bound_rows {
        let mut coeffs = vec![0.0; nstruct];
        coeffs[col] = 1.0;
        rows.push(Row {
            coeffs,
            relation: Relation::Le,
            rhs: cap,
        });
    }

    // Phase-two costs (minimisation) over structural columns.
    let sign = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut struct_cost = vec![0.0; nstruct];
    for (c, col) in problem.objective.iter().zip(&columns) {
        match *col {
            Column::Shifted { col, .. } => struct_cost[col] += sign * c,
            Column::Mirrored { col, .. } => struct_cost[col] -= sign * c,
            Column::Split { pos, neg } => {
                struct_cost[pos] += sign * c;
                struct_cost[neg] -= sign * c;
            }
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.relation != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.relation != Relation::Le).count();
    let cols = nstruct + n_slack + n_art;
    let w = cols + 1;
    let mut data = vec![0.0; m * w];
    let mut basis = vec![0usize; m];
    let mut is_art = vec![false; cols];
    let mut next_slack = nstruct;
    let mut next_art = nstruct + n_slack;
    for (i, row) in rows.iter().enumerate() {
        let line = &mut data[i * w..(i + 1) * w];
        line[..nstruct].copy_from_slice(&row.coeffs);
        line[cols] = row.rhs;
        match row.relation {
            Relation::Le => {
                line[next_slack] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                line[next_slack] = -1.0;
                next_slack += 1;
                line[next_art] = 1.0;
                is_art[next_art] = true;
                basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                line[next_art] = 1.0;
                is_art[next_art] = true;
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }

    let mut tab = Tableau {
        rows: m,
        cols,
        data,
        cost: vec![0.0; w],
        basis,
        banned: vec![false; cols],
        pivots: 0,
        max_pivots: 50 * (m + cols) + 1000,
        scratch: Vec::with_capacity(w),
    };

    if n_art > 0 {
        // Phase one: minimise the sum of artificials.
        for j in 0..cols {
            if is_art[j] {
                continue;
            }
            let mut rc = 0.0;
            for i in 0..m {
                if is_art[tab.basis[i]] {
                    rc -= tab.at(i, j);
                }
            }
            tab.cost[j] = rc;
        }
        let mut z = 0.0;
        for i in 0..m {
            if is_art[tab.basis[i]] {
                z += tab.rhs(i);
            }
        }
        tab.cost[cols] = -z;
        tab.optimize()?;
        let infeasibility = -tab.cost[cols];
        let scale = rows.iter().map(|r| r.rhs).fold(1.0, f64::max);
        if infeasibility > FEAS_TOL * scale {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, tab.pivots));
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..m {
            if !is_art[tab.basis[i]] {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..cols {
                if is_art[j] {
                    continue;
                }
                let a = tab.at(i, j).abs();
                if a > PIVOT_TOL && best.is_none_or(|(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            if let Some((j, _)) = best {
                tab.pivot(i, j);
            }
        }
        tab.banned.copy_from_slice(&is_art);
    }

    // Phase two.
    let mut full_cost = vec![0.0; cols];
    full_cost[..nstruct].copy_from_slice(&struct_cost);
    for j in 0..cols {
        let mut rc = full_cost[j];
        for i in 0..m {
            let cb = full_cost[tab.basis[i]];
            if cb != 0.0 {
                rc -= cb * tab.at(i, j);
            }
        }
        tab.cost[j] = rc;
    }
    let mut z = 0.0;
    for i in 0..m {
        z += full_cost[tab.basis[i]] * tab.rhs(i);
    }
    tab.cost[cols] = -z;
    if let Outcome::Unbounded = tab.optimize()? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, tab.pivots));
    }

    let mut y = vec![0.0; cols];
    for i in 0..m {
        y[tab.basis[i]] = tab.rhs(i).max(0.0);
    }
    let x: Vec<f64> = columns
        .iter()
        .map(|col| match *col {
            Column::Shifted { col, offset } => offset + y[col],
            Column::Mirrored { col, offset } => offset - y[col],
            Column::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let residual = problem.residual(&x);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value: problem.evaluate(&x),
        x,
        residual,
        pivots: tab.pivots,
    })
}

/// `coeffs . x + constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineForm {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl AffineForm {
    pub fn new(coeffs: Vec<f64>, constant: f64) -> Self {
        AffineForm { coeffs, constant }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x) + self.constant
    }
}

/// Maximise `numerator(x) / denominator(x)` over a polyhedron on which the
/// denominator is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfpProblem {
    pub numerator: AffineForm,
    pub denominator: AffineForm,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<VarBound>,
}

impl LfpProblem {
    pub fn new(numerator: AffineForm, denominator: AffineForm) -> Self {
        let n = numerator.coeffs.len();
        LfpProblem {
            numerator,
            denominator,
            constraints: Vec::new(),
            bounds: vec![VarBound::default(); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.numerator.coeffs.len()
    }

    pub fn add_sparse(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) -> Result<()> {
        let mut coeffs = vec![0.0; self.num_vars()];
        for &(j, a) in terms {
            let slot = coeffs.get_mut(j).ok_or_else(|| {
                Error::MalformedProgram(format!("variable {j} out of range"))
            })?;
            *slot += a;
        }
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        Ok(())
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: Option<f64>) -> Result<()> {
        let b = self
            .bounds
            .get_mut(var)
            .ok_or_else(|| Error::MalformedProgram(format!("variable {var} out of range")))?;
        *b = VarBound { lower, upper };
        Ok(())
    }

    /// The feasible region as an LP with the given objective.
    fn region_lp(&self, sense: Sense, objective: &AffineForm) -> LinearProgram {
        LinearProgram {
            sense,
            objective: objective.coeffs.clone(),
            objective_constant: objective.constant,
            constraints: self.constraints.clone(),
            bounds: self.bounds.clone(),
        }
    }

    pub fn ratio(&self, x: &[f64]) -> f64 {
        self.numerator.eval(x) / self.denominator.eval(x)
    }

    /// Charnes–Cooper homogenisation: variables `(z, s)` with `z = s x`,
    /// constraints `a.z - b s (rel) 0`, bound rows `z - l s >= 0` and
    /// `z - u s <= 0`, normalisation `denominator(z, s) = 1`, objective
    /// `numerator(z, s)`. The scale `s` is the last variable.
    pub fn charnes_cooper(&self) -> LinearProgram {
        let n = self.num_vars();
        let s = n;
        let mut objective = self.numerator.coeffs.clone();
        objective.push(self.numerator.constant);
        let mut lp = LinearProgram::new(Sense::Maximize, objective);
        for con in &self.constraints {
            let mut coeffs = con.coeffs.clone();
            coeffs.push(-con.rhs);
            lp.constraints.push(Constraint {
                coeffs,
                relation: con.relation,
                rhs: 0.0,
            });
        }
        for (j, b) in self.bounds.iter().enumerate() {
            if b.lower.is_finite() {
                if b.lower >= 0.0 {
                    lp.bounds[j] = VarBound::default();
                    // z >= 0 is implied by the bound; only a positive lower
                    // bound needs a row.
                    if b.lower > 0.0 {
                        let _ = lp.add_sparse(&[(j, 1.0), (s, -b.lower)], Relation::Ge, 0.0);
                    }
                } else {
                    lp.bounds[j] = VarBound {
                        lower: f64::NEG_INFINITY,
                        upper: None,
                    };
                    let _ = lp.add_sparse(&[(j, 1.0), (s, -b.lower)], Relation::Ge, 0.0);
                }
            } else {
                lp.bounds[j] = VarBound {
                    lower: f64::NEG_INFINITY,
                    upper: None,
                };
            }
            if let Some(u) = b.upper {
                let _ = lp.add_sparse(&[(j, 1.0), (s, -u)], Relation::Le, 0.0);
            }
        }
        let mut coeffs = self.denominator.coeffs.clone();
        coeffs.push(self.denominator.constant);
        lp.constraints.push(Constraint {
            coeffs,
            relation: Relation::Eq,
            rhs: 1.0,
        });
        lp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfpSolution {
    pub status: LpStatus,
    /// Supremum of the ratio.
    pub value: f64,
    /// Maximiser in the original variables; `None` when the supremum is only
    /// approached along an unbounded direction (zero scale).
    pub x: Option<Vec<f64>>,
    pub scale: f64,
    /// Minimum of the denominator over the feasible region.
    pub min_denominator: f64,
    /// Residual of the homogenised LP solution.
    pub residual: f64,
}

/// Solves a linear-fractional program through the Charnes–Cooper LP.
pub fn solve_lfp(problem: &LfpProblem) -> Result<LfpSolution> {
    let aux = solve_lp(&problem.region_lp(Sense::Minimize, &problem.denominator))?;
    let min_denominator = match aux.status {
        LpStatus::Infeasible => {
            return Ok(LfpSolution {
                status: LpStatus::Infeasible,
                value: f64::NAN,
                x: None,
                scale: 0.0,
                min_denominator: f64::NAN,
                residual: f64::NAN,
            })
        }
        LpStatus::Unbounded => return Err(Error::DenominatorNotPositive(f64::NEG_INFINITY)),
        LpStatus::Optimal => aux.value,
    };
    if min_denominator <= FEAS_TOL {
        return Err(Error::DenominatorNotPositive(min_denominator));
    }
    let lp = problem.charnes_cooper();
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let n = problem.num_vars();
            let scale = sol.x[n];
            let x = (scale > 1e-12).then(|| sol.x[..n].iter().map(|z| z / scale).collect());
            Ok(LfpSolution {
                status: LpStatus::Optimal,
                value: sol.value,
                x,
                scale,
                min_denominator,
                residual: sol.residual,
            })
        }
        status => Ok(LfpSolution {
            status,
            value: if status == LpStatus::Unbounded {
                f64::INFINITY
            } else {
                f64::NAN
            },
            x: None,
            scale: 0.0,
            min_denominator,
            residual: f64::NAN,
        }),
    }
}
