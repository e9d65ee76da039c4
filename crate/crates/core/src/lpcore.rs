//! Linear programs for l1 minimization and a dense two-phase simplex
//! solver.
//!
//! Two builders are provided: the proper-learning LP over a subcube
//! (table values constrained to be submodular and in `[0,1]`) and the
//! spectral-l1-constrained regression LP over a set of parities. All
//! variables are nonnegative by construction; signed quantities are
//! split into positive and negative parts. Identical (cell, label)
//! sample rows are merged with weights, which leaves the optimum and
//! objective unchanged while keeping tableaus small.
//!
//! The solver pivots by the Dantzig rule (most negative reduced cost,
//! lowest index on ties) and switches permanently to Bland's rule when
//! the objective stalls on degenerate pivots, so it cannot cycle. Both
//! rules are index-deterministic: a given problem always pivots the
//! same way.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::estim::SampleSet;
use crate::{Error, Result};

/// Comparison operator of one constraint row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpConstraint {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub op: Cmp,
    pub rhs: f64,
}

/// What an LP variable stands for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum VarMeaning {
    /// Hypothesis table value `h(z)` for the subcube assignment `z`.
    TableCell { assignment: u64 },
    /// Absolute-error slack shared by `count` samples that landed in
    /// `cell` with this label.
    SlackAbs { cell: u64, label: f64, count: usize },
    /// Positive part of the coefficient of the parity `mask`.
    CoeffPos { mask: u64 },
    /// Negative part of the coefficient of the parity `mask`.
    CoeffNeg { mask: u64 },
    Plain,
}

/// A linear program: minimize `objective . x` subject to the
/// constraint rows, with every variable implicitly `>= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub var_names: Vec<String>,
    pub var_meanings: Vec<VarMeaning>,
    pub objective: Vec<f64>,
    pub constraints: Vec<LpConstraint>,
    /// Number of samples behind the objective normalization, when the
    /// problem came from a sample set.
    pub sample_count: usize,
}

impl LpProblem {
    pub fn new() -> Self {
        LpProblem {
            var_names: Vec::new(),
            var_meanings: Vec::new(),
            objective: Vec::new(),
            constraints: Vec::new(),
            sample_count: 0,
        }
    }

    pub fn add_var(&mut self, name: String, meaning: VarMeaning, cost: f64) -> usize {
        self.var_names.push(name);
        self.var_meanings.push(meaning);
        self.objective.push(cost);
        self.var_names.len() - 1
    }

    pub fn add_constraint(&mut self, name: String, coeffs: Vec<(usize, f64)>, op: Cmp, rhs: f64) {
        self.constraints.push(LpConstraint { name, coeffs, op, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Plain-text dump. Grammar, one statement per line:
    ///
    /// ```text
    /// min: <coef> <var> [+ <coef> <var>]* ;
    /// <name>: <coef> <var> [+ <coef> <var>]* (<=|>=|=) <rhs> ;
    /// ```
    ///
    /// Every variable is nonnegative; no bound statements are emitted.
    pub fn to_lp_text(&self) -> String {
        let mut out = String::new();
        let term = |idx: usize, c: f64| format!("{} {}", crate::estim::fmt_float(c), self.var_names[idx]);
        let sum = |coeffs: &[(usize, f64)]| {
            if coeffs.is_empty() {
                "0".to_string()
            } else {
                coeffs.iter().map(|&(i, c)| term(i, c)).collect::<Vec<_>>().join(" + ")
            }
        };
        let objective: Vec<(usize, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (i, *c))
            .collect();
        let _ = writeln!(out, "min: {} ;", sum(&objective));
        for c in &self.constraints {
            let op = match c.op {
                Cmp::Le => "<=",
                Cmp::Ge => ">=",
                Cmp::Eq => "=",
            };
            let _ = writeln!(out, "{}: {} {} {} ;", c.name, sum(&c.coeffs), op, crate::estim::fmt_float(c.rhs));
        }
        out
    }
}

impl Default for LpProblem {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub assignment: Vec<f64>,
    pub objective: f64,
}

const PIVOT_TOL: f64 = 1e-9;
/// Minimum magnitude of a pivot element. Entries below this are
/// treated as zero in the ratio test; pivoting on them would scale
/// rows by their reciprocal and destroy the tableau.
const PIVOT_MIN: f64 = 1e-7;
/// Reduced costs above this are treated as optimal. Looser than the
/// pivot tolerance so roundoff on large tableaus cannot promote a
/// numerically-zero column into a (spuriously unbounded) entering
/// candidate.
const ENTER_TOL: f64 = 1e-7;
/// Only columns at least this improving may declare unboundedness.
const UNBOUNDED_TOL: f64 = 1e-5;
const CHECK_TOL: f64 = 1e-7;
const MAX_ITERS: usize = 200_000;
/// Pivots between cost-row rebuilds.
const REFRESH_EVERY: usize = 128;
/// Entries below this are snapped to zero at refresh time.
const SNAP_TOL: f64 = 1e-11;

struct Tableau {
    /// Rows of the constraint matrix, each `ncols + 1` wide (rhs last).
    rows: Vec<Vec<f64>>,
    /// Reduced-cost row for the active objective, `ncols + 1` wide.
    cost: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let scale = self.rows[row][col];
        for v in &mut self.rows[row] {
            *v /= scale;
        }
        let pivot_row = self.rows[row].clone();
        for (r, data) in self.rows.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = data[col];
            if factor != 0.0 {
                for (a, b) in data.iter_mut().zip(&pivot_row) {
                    *a -= factor * b;
                }
            }
        }
        let factor = self.cost[col];
        if factor != 0.0 {
            for (a, b) in self.cost.iter_mut().zip(&pivot_row) {
                *a -= factor * b;
            }
        }
        self.basis[row] = col;
    }

    /// Snaps numerically-zero entries and rebuilds the reduced-cost
    /// row from the base objective against the current basis, clearing
    /// accumulated pivot roundoff.
    fn rebuild_cost(&mut self, base: &[f64]) {
        for row in &mut self.rows {
            for v in row.iter_mut() {
                if v.abs() < SNAP_TOL {
                    *v = 0.0;
                }
            }
        }
        self.cost = base.to_vec();
        self.cost.push(0.0);
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = base[b];
            if cb != 0.0 {
                let row = self.rows[r].clone();
                for (a, v) in self.cost.iter_mut().zip(&row) {
                    *a -= cb * v;
                }
            }
        }
    }

    /// Minimum-ratio row. Under Bland's rule ties break toward the
    /// lowest basic index (anti-cycling); otherwise the largest pivot
    /// element among near-tied ratios wins, which keeps the tableau
    /// well scaled.
    fn leaving_row(&self, col: usize, bland: bool) -> Option<usize> {
        let mut leaving: Option<(usize, f64, f64)> = None;
        for (r, data) in self.rows.iter().enumerate() {
            let a = data[col];
            if a > PIVOT_MIN {
                let ratio = (data[self.ncols] / a).max(0.0);
                let better = match leaving {
                    None => true,
                    Some((lr, lratio, lpivot)) => {
                        if ratio < lratio - PIVOT_TOL {
                            true
                        } else if ratio > lratio + PIVOT_TOL {
                            false
                        } else if bland {
                            self.basis[r] < self.basis[lr]
                        } else {
                            a > lpivot * (1.0 + 1e-12)
                                || (a >= lpivot * (1.0 - 1e-12) && self.basis[r] < self.basis[lr])
                        }
                    }
                };
                if better {
                    leaving = Some((r, ratio, a));
                }
            }
        }
        leaving.map(|(r, _, _)| r)
    }

    /// One pivot. Entering column: most negative reduced cost (ties
    /// toward the lowest index), or strict lowest-index Bland choice
    /// when `bland` is set. Leaving row minimizes the ratio, ties
    /// broken toward the lowest basic variable index. Columns that are
    /// negative within roundoff of zero but admit no leaving row are
    /// skipped; a clearly improving column without one is a genuine
    /// ray. Returns false when optimal.
    fn step(&mut self, banned: &[bool], bland: bool, skip: &mut [bool]) -> Result<bool> {
        loop {
            let mut entering = None;
            if bland {
                for j in 0..self.ncols {
                    if !banned[j] && !skip[j] && self.cost[j] < -ENTER_TOL {
                        entering = Some(j);
                        break;
                    }
                }
            } else {
                let mut best = -ENTER_TOL;
                for j in 0..self.ncols {
                    if !banned[j] && !skip[j] && self.cost[j] < best {
                        best = self.cost[j];
                        entering = Some(j);
                    }
                }
            }
            let Some(col) = entering else { return Ok(false) };
            match self.leaving_row(col, bland) {
                Some(row) => {
                    self.pivot(row, col);
                    return Ok(true);
                }
                None if self.cost[col] < -UNBOUNDED_TOL => {
                    return Err(Error::Lp("unbounded objective".into()));
                }
                None => skip[col] = true,
            }
        }
    }
}

/// Solves the problem with a dense two-phase simplex. Deterministic:
/// the pivot sequence is fixed by Bland's rule.
pub fn solve(p: &LpProblem) -> Result<LpSolution> {
    let n = p.num_vars();
    let m = p.num_constraints();

    // Standard form: every row becomes an equality with slack/surplus,
    // rhs normalized nonnegative, artificials where no slack basis
    // exists.
    let mut ncols = n;
    let mut slack_of_row: Vec<Option<(usize, f64)>> = Vec::with_capacity(m);
    let mut artificial_of_row: Vec<Option<usize>> = vec![None; m];
    let mut norm_rows: Vec<(Vec<(usize, f64)>, f64, Cmp)> = Vec::with_capacity(m);
    for c in &p.constraints {
        let mut coeffs = c.coeffs.clone();
        let mut rhs = c.rhs;
        let mut op = c.op;
        if rhs < 0.0 {
            for (_, v) in &mut coeffs {
                *v = -*v;
            }
            rhs = -rhs;
            op = match op {
                Cmp::Le => Cmp::Ge,
                Cmp::Ge => Cmp::Le,
                Cmp::Eq => Cmp::Eq,
            };
        }
        match op {
            Cmp::Le => {
                slack_of_row.push(Some((ncols, 1.0)));
                ncols += 1;
            }
            Cmp::Ge => {
                slack_of_row.push(Some((ncols, -1.0)));
                ncols += 1;
            }
            Cmp::Eq => slack_of_row.push(None),
        }
        norm_rows.push((coeffs, rhs, op));
    }
    let first_artificial = ncols;
    for (r, (_, _, op)) in norm_rows.iter().enumerate() {
        if !matches!(op, Cmp::Le) {
            artificial_of_row[r] = Some(ncols);
            ncols += 1;
        }
    }

    let mut t = Tableau {
        rows: vec![vec![0.0; ncols + 1]; m],
        cost: vec![0.0; ncols + 1],
        basis: vec![0; m],
        ncols,
    };
    for (r, (coeffs, rhs, _)) in norm_rows.iter().enumerate() {
        for &(j, v) in coeffs {
            t.rows[r][j] += v;
        }
        if let Some((j, sign)) = slack_of_row[r] {
            t.rows[r][j] = sign;
        }
        if let Some(j) = artificial_of_row[r] {
            t.rows[r][j] = 1.0;
            t.basis[r] = j;
        } else {
            t.basis[r] = slack_of_row[r].expect("Le rows carry a slack").0;
        }
        t.rows[r][ncols] = *rhs;
    }

    let banned = vec![false; ncols];
    let mut iters = 0usize;

    // Pivot loop shared by both phases: the Dantzig rule by default,
    // switching permanently to Bland's rule after a degenerate stall
    // so cycling is impossible while typical problems stay fast. The
    // cost row is rebuilt from the base objective periodically to shed
    // accumulated roundoff; `target` lets phase 1 stop as soon as the
    // infeasibility reaches zero.
    fn run_phase(
        t: &mut Tableau,
        base: &[f64],
        banned: &[bool],
        target: Option<f64>,
        iters: &mut usize,
    ) -> Result<bool> {
        let mut bland = false;
        let mut stall = 0usize;
        let mut prev_obj = -t.cost[t.ncols];
        let mut skip = vec![false; t.ncols];
        let mut since_refresh = 0usize;
        let trace = std::env::var("JUNTALAB_LP_TRACE").is_ok();
        loop {
            if *iters >= MAX_ITERS {
                return Ok(false);
            }
            if let Some(goal) = target {
                if -t.cost[t.ncols] <= goal {
                    return Ok(true);
                }
            }
            *iters += 1;
            since_refresh += 1;
            if trace && *iters % 500 == 0 {
                eprintln!("lp iter {} obj {} bland {bland} stall {stall}", *iters, -t.cost[t.ncols]);
            }
            if since_refresh >= REFRESH_EVERY {
                t.rebuild_cost(base);
                skip.fill(false);
                since_refresh = 0;
            }
            if !t.step(banned, bland, &mut skip)? {
                // Confirm optimality against a fresh cost row.
                t.rebuild_cost(base);
                skip.fill(false);
                since_refresh = 0;
                if !t.step(banned, bland, &mut skip)? {
                    return Ok(true);
                }
            }
            let obj = -t.cost[t.ncols];
            if (obj - prev_obj).abs() <= 1e-12 {
                stall += 1;
                if stall >= 50 {
                    bland = true;
                }
            } else {
                stall = 0;
            }
            prev_obj = obj;
        }
    }

    // Phase 1: minimize the sum of artificials.
    if artificial_of_row.iter().any(Option::is_some) {
        let mut base1 = vec![0.0; ncols];
        for b in base1.iter_mut().skip(first_artificial) {
            *b = 1.0;
        }
        t.rebuild_cost(&base1);
        if !run_phase(&mut t, &base1, &banned, Some(1e-10), &mut iters)? {
            return Ok(iteration_limited(p, &t, n));
        }
        t.rebuild_cost(&base1);
        let infeasibility = -t.cost[ncols];
        if infeasibility > CHECK_TOL {
            return Ok(LpSolution { status: LpStatus::Infeasible, assignment: vec![0.0; n], objective: f64::NAN });
        }
        // Drive any remaining artificials out of the basis.
        for r in 0..m {
            if t.basis[r] >= first_artificial {
                let col = (0..first_artificial).find(|&j| t.rows[r][j].abs() > PIVOT_TOL);
                if let Some(col) = col {
                    t.pivot(r, col);
                }
                // A fully zero row is redundant; its artificial stays
                // basic at value zero, which is harmless with the
                // column banned below.
            }
        }
    }

    // Phase 2: the real objective, artificial columns banned. When
    // every cost coefficient is nonnegative the objective is bounded
    // below by zero, so reaching (numerical) zero certifies optimality
    // and sidesteps the degenerate churn of all-tight optima.
    let mut banned = vec![false; ncols];
    for b in banned.iter_mut().skip(first_artificial) {
        *b = true;
    }
    let mut base2 = vec![0.0; ncols];
    base2[..n].copy_from_slice(&p.objective);
    let zero_floor = p.objective.iter().all(|&c| c >= 0.0).then_some(1e-12);
    t.rebuild_cost(&base2);
    if !run_phase(&mut t, &base2, &banned, zero_floor, &mut iters)? {
        return Ok(iteration_limited(p, &t, n));
    }

    let assignment = extract(&t, n);
    let objective = dot(&p.objective, &assignment);
    Ok(LpSolution { status: LpStatus::Optimal, assignment, objective })
}

fn extract(t: &Tableau, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rows[r][t.ncols];
        }
    }
    x
}

fn dot(c: &[f64], x: &[f64]) -> f64 {
    c.iter().zip(x).map(|(a, b)| a * b).sum()
}

fn iteration_limited(p: &LpProblem, t: &Tableau, n: usize) -> LpSolution {
    let assignment = extract(t, n);
    let objective = dot(&p.objective, &assignment);
    LpSolution { status: LpStatus::IterationLimit, assignment, objective }
}

/// Independent feasibility/objective re-checker (no tableau state):
/// verifies every constraint within `1e-7` and returns the objective.
pub fn check_solution(p: &LpProblem, assignment: &[f64]) -> Result<f64> {
    if assignment.len() != p.num_vars() {
        return Err(Error::Lp(format!(
            "assignment has {} values for {} variables",
            assignment.len(),
            p.num_vars()
        )));
    }
    for (j, &v) in assignment.iter().enumerate() {
        if v < -CHECK_TOL {
            return Err(Error::Lp(format!("variable {} negative: {v}", p.var_names[j])));
        }
    }
    for c in &p.constraints {
        let lhs: f64 = c.coeffs.iter().map(|&(j, v)| v * assignment[j]).sum();
        let ok = match c.op {
            Cmp::Le => lhs <= c.rhs + CHECK_TOL,
            Cmp::Ge => lhs >= c.rhs - CHECK_TOL,
            Cmp::Eq => (lhs - c.rhs).abs() <= CHECK_TOL,
        };
        if !ok {
            return Err(Error::Lp(format!("constraint {} violated: lhs = {lhs}, rhs = {}", c.name, c.rhs)));
        }
    }
    Ok(dot(&p.objective, assignment))
}

fn group_key(label: f64) -> u64 {
    label.to_bits()
}

/// Proper-learning LP over the subcube spanned by `vars` (|vars| = t):
/// minimize the mean absolute error of a table `h` on the samples'
/// projections, subject to `h` being submodular on `{0,1}^t` and
/// `0 <= h <= 1`. Submodularity is one row per variable pair and
/// assignment of the remaining `t - 2` coordinates.
pub fn build_proper_lp(samples: &SampleSet, vars: &[usize]) -> Result<LpProblem> {
    let t = vars.len();
    if t > 12 {
        return Err(Error::ConfigCap(format!("proper LP on {} variables (cap 12)", t)));
    }
    for &v in vars {
        if v >= samples.n() {
            return Err(Error::IndexOutOfRange { index: v, n: samples.n() });
        }
    }
    let cells = 1usize << t;
    let mut p = LpProblem::new();
    p.sample_count = samples.len();
    for z in 0..cells {
        p.add_var(format!("h{z}"), VarMeaning::TableCell { assignment: z as u64 }, 0.0);
    }

    // Merge samples with identical (cell, label); weights preserve the
    // objective exactly.
    let m = samples.len();
    let mut groups: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for (x, label) in samples.samples() {
        let mut z = 0u64;
        for (k, &v) in vars.iter().enumerate() {
            if x.get(v) {
                z |= 1 << k;
            }
        }
        *groups.entry((z, group_key(*label))).or_insert(0) += 1;
    }
    for (gi, (&(z, lbits), &count)) in groups.iter().enumerate() {
        let label = f64::from_bits(lbits);
        let s = p.add_var(
            format!("s{gi}"),
            VarMeaning::SlackAbs { cell: z, label, count },
            count as f64 / m as f64,
        );
        let h = z as usize;
        p.add_constraint(format!("abs_pos{gi}"), vec![(h, 1.0), (s, -1.0)], Cmp::Le, label);
        p.add_constraint(format!("abs_neg{gi}"), vec![(h, -1.0), (s, -1.0)], Cmp::Le, -label);
    }

    // Submodularity on the subcube: for each pair (i, j) and each
    // assignment w of the remaining coordinates,
    // h(w + e_i + e_j) + h(w) <= h(w + e_i) + h(w + e_j).
    for i in 0..t {
        for j in i + 1..t {
            let (bi, bj) = (1usize << i, 1usize << j);
            let rest: Vec<usize> = (0..t).filter(|&k| k != i && k != j).collect();
            for w in 0..1usize << rest.len() {
                let mut base = 0usize;
                for (k, &pos) in rest.iter().enumerate() {
                    if w >> k & 1 == 1 {
                        base |= 1 << pos;
                    }
                }
                p.add_constraint(
                    format!("submod_{i}_{j}_{base}"),
                    vec![(base | bi | bj, 1.0), (base, 1.0), (base | bi, -1.0), (base | bj, -1.0)],
                    Cmp::Le,
                    0.0,
                );
            }
        }
    }
    for z in 0..cells {
        p.add_constraint(format!("ub{z}"), vec![(z, 1.0)], Cmp::Le, 1.0);
        p.add_constraint(format!("lb{z}"), vec![(z, 1.0)], Cmp::Ge, 0.0);
    }
    Ok(p)
}

/// Regression LP over explicit parities: minimize the mean absolute
/// error of `sum_S alpha_S chi_S(x)` on the samples subject to
/// `sum_S |alpha_S| <= w_cap`. Coefficients are split into positive
/// and negative parts for the l1-ball row.
pub fn build_sparse_l1_lp(samples: &SampleSet, parities: &[u64], w_cap: f64) -> Result<LpProblem> {
    if !(w_cap > 0.0) {
        return Err(Error::BadParameter(format!("W = {w_cap} must be positive")));
    }
    if parities.is_empty() {
        return Err(Error::BadParameter("empty parity list".into()));
    }
    let mut p = LpProblem::new();
    p.sample_count = samples.len();
    let mut pos = Vec::with_capacity(parities.len());
    let mut neg = Vec::with_capacity(parities.len());
    for &mask in parities {
        pos.push(p.add_var(format!("a{mask}+"), VarMeaning::CoeffPos { mask }, 0.0));
        neg.push(p.add_var(format!("a{mask}-"), VarMeaning::CoeffNeg { mask }, 0.0));
    }

    let union: u64 = parities.iter().fold(0, |acc, m| acc | m);
    let m = samples.len().max(1);
    let mut groups: BTreeMap<(u64, u64), (u64, usize)> = BTreeMap::new();
    for (x, label) in samples.samples() {
        let e = groups
            .entry((x.bits() & union, group_key(*label)))
            .or_insert((x.bits(), 0));
        e.1 += 1;
    }
    for (gi, (&(cell, lbits), &(xbits, count))) in groups.iter().enumerate() {
        let label = f64::from_bits(lbits);
        let s = p.add_var(
            format!("s{gi}"),
            VarMeaning::SlackAbs { cell, label, count },
            count as f64 / m as f64,
        );
        let mut row_pos: Vec<(usize, f64)> = Vec::with_capacity(2 * parities.len() + 1);
        let mut row_neg: Vec<(usize, f64)> = Vec::with_capacity(2 * parities.len() + 1);
        for (k, &mask) in parities.iter().enumerate() {
            let chi = if (mask & xbits).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            row_pos.push((pos[k], chi));
            row_pos.push((neg[k], -chi));
            row_neg.push((pos[k], -chi));
            row_neg.push((neg[k], chi));
        }
        row_pos.push((s, -1.0));
        row_neg.push((s, -1.0));
        p.add_constraint(format!("fit_pos{gi}"), row_pos, Cmp::Le, label);
        p.add_constraint(format!("fit_neg{gi}"), row_neg, Cmp::Le, -label);
    }

    let ball: Vec<(usize, f64)> = pos.iter().chain(&neg).map(|&j| (j, 1.0)).collect();
    p.add_constraint("l1_ball".into(), ball, Cmp::Le, w_cap);
    Ok(p)
}

/// Reads the fitted parity coefficients out of a sparse-l1 solution.
pub fn coefficients_from_solution(p: &LpProblem, sol: &LpSolution) -> Vec<(u64, f64)> {
    let mut map: BTreeMap<u64, f64> = BTreeMap::new();
    for (j, meaning) in p.var_meanings.iter().enumerate() {
        match meaning {
            VarMeaning::CoeffPos { mask } => *map.entry(*mask).or_insert(0.0) += sol.assignment[j],
            VarMeaning::CoeffNeg { mask } => *map.entry(*mask).or_insert(0.0) -= sol.assignment[j],
            _ => {}
        }
    }
    map.into_iter().collect()
}

/// Reads the hypothesis table out of a proper-LP solution.
pub fn table_from_solution(p: &LpProblem, sol: &LpSolution, t: usize) -> Vec<f64> {
    let mut table = vec![0.0; 1 << t];
    for (j, meaning) in p.var_meanings.iter().enumerate() {
        if let VarMeaning::TableCell { assignment } = meaning {
            table[*assignment as usize] = sol.assignment[j];
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfour;
    use crate::estim::{RngStream, SampleSource};
    use crate::setfn::{make_family, Family, FamilySpec, Point, SetFunction};

    fn or2() -> SetFunction {
        make_family(&FamilySpec::new(2, Family::PseudoBoolean { k: 1, active: vec![0, 1] })).unwrap()
    }

    #[test]
    fn trivial_min() {
        let mut p = LpProblem::new();
        let x = p.add_var("x".into(), VarMeaning::Plain, 1.0);
        p.add_constraint("ub".into(), vec![(x, 1.0)], Cmp::Le, 1.0);
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.objective.abs() < 1e-9);
        check_solution(&p, &sol.assignment).unwrap();
    }

    #[test]
    fn infeasible_toy() {
        let mut p = LpProblem::new();
        let x = p.add_var("x".into(), VarMeaning::Plain, 0.0);
        p.add_constraint("a".into(), vec![(x, 1.0)], Cmp::Le, 0.0);
        p.add_constraint("b".into(), vec![(x, 1.0)], Cmp::Ge, 1.0);
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn equality_and_negative_rhs() {
        // min x + y s.t. x - y = -2, x + y >= 4 -> x = 1, y = 3.
        let mut p = LpProblem::new();
        let x = p.add_var("x".into(), VarMeaning::Plain, 1.0);
        let y = p.add_var("y".into(), VarMeaning::Plain, 1.0);
        p.add_constraint("eq".into(), vec![(x, 1.0), (y, -1.0)], Cmp::Eq, -2.0);
        p.add_constraint("ge".into(), vec![(x, 1.0), (y, 1.0)], Cmp::Ge, 4.0);
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 4.0).abs() < 1e-7);
        assert!((sol.assignment[x] - 1.0).abs() < 1e-7);
        assert!((sol.assignment[y] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn proper_lp_constraint_counts() {
        let f = or2();
        let samples = crate::estim::SampleSet::exhaustive(&f).unwrap();
        let p = build_proper_lp(&samples, &[0, 1]).unwrap();
        let submod = p.constraints.iter().filter(|c| c.name.starts_with("submod")).count();
        assert_eq!(submod, 1);
        let bounds = p.constraints.iter().filter(|c| c.name.starts_with("ub") || c.name.starts_with("lb")).count();
        assert_eq!(bounds, 8);

        let g = make_family(&FamilySpec::new(3, Family::PseudoBoolean { k: 1, active: vec![0, 1, 2] })).unwrap();
        let samples = crate::estim::SampleSet::exhaustive(&g).unwrap();
        let p = build_proper_lp(&samples, &[0, 1, 2]).unwrap();
        let submod = p.constraints.iter().filter(|c| c.name.starts_with("submod")).count();
        assert_eq!(submod, 6);
    }

    #[test]
    fn proper_lp_recovers_noiseless_junta() {
        let f = or2();
        let samples = crate::estim::SampleSet::exhaustive(&f).unwrap();
        let p = build_proper_lp(&samples, &[0, 1]).unwrap();
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.objective < 1e-9);
        let table = table_from_solution(&p, &sol, 2);
        for z in 0..4u64 {
            assert!((table[z as usize] - f.eval_bits(z)).abs() < 1e-7);
        }
        check_solution(&p, &sol.assignment).unwrap();
    }

    #[test]
    fn proper_lp_empty_samples() {
        let samples = crate::estim::SampleSet::new(2, vec![], SampleSource::Uniform).unwrap();
        let p = build_proper_lp(&samples, &[0, 1]).unwrap();
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.objective.abs() < 1e-9);
    }

    #[test]
    fn sparse_lp_constant() {
        let c = SetFunction::from_table(2, vec![0.4; 4], Default::default(), (0.4, 0.4)).unwrap();
        let samples = crate::estim::SampleSet::exhaustive(&c).unwrap();
        let p = build_sparse_l1_lp(&samples, &[0], 1.0).unwrap();
        let sol = solve(&p).unwrap();
        assert!(sol.objective < 1e-9);
        let coeffs = coefficients_from_solution(&p, &sol);
        assert!((coeffs[0].1 - 0.4).abs() < 1e-7);
    }

    #[test]
    fn sparse_lp_or_full_spectrum() {
        let f = or2();
        let samples = crate::estim::SampleSet::exhaustive(&f).unwrap();
        let parities: Vec<u64> = (0..4).collect();
        let p = build_sparse_l1_lp(&samples, &parities, 2.0).unwrap();
        let sol = solve(&p).unwrap();
        assert!(sol.objective < 1e-9, "objective {}", sol.objective);
        let t = boolfour::transform(&f).unwrap();
        for (mask, coef) in coefficients_from_solution(&p, &sol) {
            assert!((coef - t.coeff(mask)).abs() < 1e-7, "mask {mask}");
        }
        // With W below the spectral l1-norm (1.5) the ball binds.
        let p = build_sparse_l1_lp(&samples, &parities, 1.0).unwrap();
        let sol = solve(&p).unwrap();
        assert!(sol.objective > 1e-4, "objective {}", sol.objective);
        check_solution(&p, &sol.assignment).unwrap();
    }

    #[test]
    fn objective_at_true_table_upper_bounds_lp() {
        // Solver objective <= empirical error of the projection table.
        let f = make_family(&FamilySpec::new(
            4,
            Family::Coverage {
                sets: vec![vec![0], vec![0, 1], vec![1, 2], vec![2]],
                universe_weights: vec![0.4, 0.3, 0.3],
            },
        ))
        .unwrap();
        let samples = crate::estim::SampleSet::exhaustive(&f).unwrap();
        let vars = [0usize, 2];
        let p = build_proper_lp(&samples, &vars).unwrap();
        let sol = solve(&p).unwrap();
        let proj = boolfour::projection(&f, &vars).unwrap();
        let mut emp = 0.0;
        for (x, l) in samples.samples() {
            emp += (proj.eval(*x) - l).abs();
        }
        emp /= samples.len() as f64;
        assert!(sol.objective <= emp + 1e-9);
    }

    #[test]
    fn lp_text_dump() {
        let mut p = LpProblem::new();
        let x = p.add_var("x".into(), VarMeaning::Plain, 1.0);
        p.add_constraint("c0".into(), vec![(x, 2.0)], Cmp::Ge, 1.0);
        let text = p.to_lp_text();
        assert!(text.contains("min: 1 x ;"));
        assert!(text.contains("c0: 2 x >= 1 ;"));
    }

    /// Brute-force LP oracle: evaluates every basic solution of the
    /// `Ax {<=,=} b` system (with nonnegativity rows) and returns the
    /// best feasible objective. Only for tiny test problems.
    fn brute_force_optimum(p: &LpProblem) -> Option<f64> {
        let n = p.num_vars();
        assert!(n <= 6);
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for c in &p.constraints {
            let mut a = vec![0.0; n];
            for &(j, v) in &c.coeffs {
                a[j] += v;
            }
            rows.push((a, c.rhs));
        }
        for j in 0..n {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            rows.push((a, 0.0));
        }
        let mut best: Option<f64> = None;
        let mut combo = vec![0usize; n];
        fn solve_square(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
            let n = b.len();
            let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
            let mut rhs = b.to_vec();
            for col in 0..n {
                let piv = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
                if m[piv][col].abs() < 1e-9 {
                    return None;
                }
                m.swap(col, piv);
                rhs.swap(col, piv);
                for i in 0..n {
                    if i != col {
                        let fac = m[i][col] / m[col][col];
                        for k in col..n {
                            m[i][k] -= fac * m[col][k];
                        }
                        rhs[i] -= fac * rhs[col];
                    }
                }
            }
            Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
        }
        fn rec(
            combo: &mut Vec<usize>,
            depth: usize,
            start: usize,
            rows: &[(Vec<f64>, f64)],
            p: &LpProblem,
            best: &mut Option<f64>,
        ) {
            let n = p.num_vars();
            if depth == n {
                let a: Vec<Vec<f64>> = combo.iter().map(|&i| rows[i].0.clone()).collect();
                let b: Vec<f64> = combo.iter().map(|&i| rows[i].1).collect();
                if let Some(x) = solve_square(&a, &b) {
                    if check_solution(p, &x).is_ok() {
                        let obj: f64 = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                        if best.is_none() || obj < best.unwrap() - 1e-12 {
                            *best = Some(obj);
                        }
                    }
                }
                return;
            }
            for i in start..rows.len() {
                combo[depth] = i;
                rec(combo, depth + 1, i + 1, rows, p, best);
            }
        }
        rec(&mut combo, 0, 0, &rows, p, &mut best);
        best
    }

    #[test]
    fn simplex_matches_vertex_enumeration() {
        use rand::Rng;
        let mut rng = RngStream::new(31).rng();
        for case in 0..25 {
            let n = 2 + (case % 3);
            let mut p = LpProblem::new();
            for j in 0..n {
                p.add_var(format!("x{j}"), VarMeaning::Plain, rng.random_range(-1.0..1.0));
            }
            for r in 0..n + 2 {
                let coeffs: Vec<(usize, f64)> =
                    (0..n).map(|j| (j, rng.random_range(-1.0..1.0))).collect();
                p.add_constraint(format!("c{r}"), coeffs, Cmp::Le, rng.random_range(0.2..2.0));
            }
            // Keep the region bounded.
            let all: Vec<(usize, f64)> = (0..n).map(|j| (j, 1.0)).collect();
            p.add_constraint("cap".into(), all, Cmp::Le, 5.0);
            let sol = solve(&p).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
            let brute = brute_force_optimum(&p).expect("origin is feasible");
            assert!((sol.objective - brute).abs() < 1e-6, "case {case}: {} vs {brute}", sol.objective);
            check_solution(&p, &sol.assignment).unwrap();
        }
    }

    #[test]
    fn proper_lp_respects_sample_projection() {
        // A wrong-variable LP still solves and self-checks.
        let f = or2();
        let mut rng = RngStream::new(12).rng();
        let dist = crate::estim::ProductDist::uniform(2);
        let samples = crate::estim::SampleSet::draw(&f, &dist, 64, &mut rng).unwrap();
        let p = build_proper_lp(&samples, &[1]).unwrap();
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        check_solution(&p, &sol.assignment).unwrap();
        let _ = Point::zero(2);
    }
}
