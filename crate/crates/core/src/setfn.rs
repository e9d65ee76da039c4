//! Set-function oracles and the built-in function families.
//!
//! Functions on `{0,1}^n` are identified with set functions on `[n]`;
//! an assignment is packed into the low `n` bits of a [`Point`]. Every
//! family constructor returns a [`SetFunction`] whose structural flags
//! (monotone, submodular, nonnegative, XOS) are derived from the family
//! rather than certified for arbitrary inputs.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, TOL};

/// Maximum dimension representable in a 64-bit mask.
pub const MAX_N: usize = 63;

/// An assignment `x` in `{0,1}^n`, packed as a bitmask. Bit `i` holds
/// the value of variable `i`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    bits: u64,
    n: usize,
}

impl Point {
    pub fn new(bits: u64, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_N {
            return Err(Error::BadParameter(format!("dimension {n} not in 1..={MAX_N}")));
        }
        if n < 64 && bits >> n != 0 {
            return Err(Error::BadParameter(format!(
                "mask {bits:#x} has bits set at position >= {n}"
            )));
        }
        Ok(Point { bits, n })
    }

    /// All-zeroes point.
    pub fn zero(n: usize) -> Self {
        Point::new(0, n).expect("dimension checked by caller")
    }

    /// All-ones point.
    pub fn ones(n: usize) -> Self {
        Point { bits: mask_all(n), n }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.n);
        self.bits >> i & 1 == 1
    }

    /// Copy of the point with coordinate `i` set to `b`.
    pub fn with(&self, i: usize, b: bool) -> Self {
        debug_assert!(i < self.n);
        let bits = if b { self.bits | 1 << i } else { self.bits & !(1 << i) };
        Point { bits, n: self.n }
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.count_ones()
    }

    /// Iterator over all `2^n` points in mask order.
    pub fn all(n: usize) -> impl Iterator<Item = Point> {
        (0u64..1 << n).map(move |bits| Point { bits, n })
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point({:0width$b})", self.bits, width = self.n)
    }
}

/// Mask with the low `n` bits set.
pub fn mask_all(n: usize) -> u64 {
    if n >= 64 { u64::MAX } else { (1u64 << n) - 1 }
}

/// Structural claims carried by a [`SetFunction`]. These are derived
/// from the family that built the function; they are not certified for
/// arbitrary tables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralFlags {
    pub claims_monotone: bool,
    pub claims_submodular: bool,
    pub claims_nonnegative: bool,
    /// Fractionally subadditive (max of nonnegative linear clauses).
    /// Implied for nonnegative monotone submodular families.
    pub claims_xos: bool,
}

type Evaluator = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// An evaluatable real-valued function on `{0,1}^n`. Evaluators are
/// pure and reentrant: values may be shared and invoked from many
/// threads with no synchronization.
#[derive(Clone)]
pub struct SetFunction {
    n: usize,
    eval: Evaluator,
    flags: StructuralFlags,
    range_hint: (f64, f64),
}

impl fmt::Debug for SetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SetFunction")
            .field("n", &self.n)
            .field("flags", &self.flags)
            .field("range_hint", &self.range_hint)
            .finish()
    }
}

impl SetFunction {
    pub fn from_fn<F>(n: usize, flags: StructuralFlags, range_hint: (f64, f64), eval: F) -> Result<Self>
    where
        F: Fn(Point) -> f64 + Send + Sync + 'static,
    {
        if n == 0 || n > MAX_N {
            return Err(Error::BadParameter(format!("dimension {n} not in 1..={MAX_N}")));
        }
        Ok(SetFunction { n, eval: Arc::new(eval), flags, range_hint })
    }

    /// Backs a function by an explicit value table in mask order. Flags
    /// are the caller's claims.
    pub fn from_table(n: usize, values: Vec<f64>, flags: StructuralFlags, range_hint: (f64, f64)) -> Result<Self> {
        if values.len() != 1usize << n {
            return Err(Error::BadParameter(format!(
                "table length {} does not match 2^{n}",
                values.len()
            )));
        }
        let values = Arc::new(values);
        Self::from_fn(n, flags, range_hint, move |x| values[x.bits() as usize])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn flags(&self) -> StructuralFlags {
        self.flags
    }

    pub fn range_hint(&self) -> (f64, f64) {
        self.range_hint
    }

    pub fn eval(&self, x: Point) -> f64 {
        debug_assert_eq!(x.n(), self.n);
        (self.eval)(x)
    }

    /// Evaluate at a raw mask.
    pub fn eval_bits(&self, bits: u64) -> f64 {
        (self.eval)(Point { bits, n: self.n })
    }

    /// Materializes all `2^n` values in mask order. Capped at `n <= 24`.
    pub fn value_table(&self) -> Result<Vec<f64>> {
        if self.n > 24 {
            return Err(Error::DimensionTooLarge { op: "value_table", n: self.n, cap: 24 });
        }
        Ok((0u64..1 << self.n).map(|bits| self.eval_bits(bits)).collect())
    }
}

/// Discrete derivative `d_i f(x) = f(x, i<-1) - f(x, i<-0)`. The value
/// does not depend on the i-th bit of `x`.
pub fn derivative(f: &SetFunction, i: usize, x: Point) -> Result<f64> {
    if i >= f.n() {
        return Err(Error::IndexOutOfRange { index: i, n: f.n() });
    }
    Ok(f.eval(x.with(i, true)) - f.eval(x.with(i, false)))
}

/// Second discrete derivative `d_{i,j} f = d_i d_j f`, a four-point
/// evaluation independent of bits `i` and `j` of `x`.
pub fn second_derivative(f: &SetFunction, i: usize, j: usize, x: Point) -> Result<f64> {
    if i >= f.n() {
        return Err(Error::IndexOutOfRange { index: i, n: f.n() });
    }
    if j >= f.n() {
        return Err(Error::IndexOutOfRange { index: j, n: f.n() });
    }
    if i == j {
        return Err(Error::BadParameter("second derivative needs i != j".into()));
    }
    let x11 = x.with(i, true).with(j, true);
    let x10 = x.with(i, true).with(j, false);
    let x01 = x.with(i, false).with(j, true);
    let x00 = x.with(i, false).with(j, false);
    Ok(f.eval(x11) - f.eval(x10) - f.eval(x01) + f.eval(x00))
}

/// Result of exhaustively checking monotonicity and submodularity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub is_submodular: bool,
    pub is_monotone: bool,
    /// Largest positive excess over either condition (`d_{i,j} f` above
    /// tolerance, or `-d_i f` above tolerance).
    pub max_violation: f64,
    pub max_submodular_violation: f64,
    pub max_monotone_violation: f64,
}

/// Exhaustive structure check: submodular iff all second derivatives
/// are `<= TOL`, monotone iff all first derivatives are `>= -TOL`.
/// Capped at `n <= 22`; use the tester module beyond that.
pub fn structure_check(f: &SetFunction) -> Result<StructureReport> {
    let n = f.n();
    if n > 22 {
        return Err(Error::DimensionTooLarge { op: "structure_check", n, cap: 22 });
    }
    let table: Vec<f64> = (0u64..1 << n).map(|b| f.eval_bits(b)).collect();
    let mut mono_excess: f64 = 0.0;
    let mut sub_excess: f64 = 0.0;
    for bits in 0u64..1 << n {
        for i in 0..n {
            if bits >> i & 1 == 1 {
                continue;
            }
            let di = table[(bits | 1 << i) as usize] - table[bits as usize];
            mono_excess = mono_excess.max(-di);
            for j in i + 1..n {
                if bits >> j & 1 == 1 {
                    continue;
                }
                let dij = table[(bits | 1 << i | 1 << j) as usize] - table[(bits | 1 << i) as usize]
                    - table[(bits | 1 << j) as usize]
                    + table[bits as usize];
                sub_excess = sub_excess.max(dij);
            }
        }
    }
    Ok(StructureReport {
        is_submodular: sub_excess <= TOL,
        is_monotone: mono_excess <= TOL,
        max_violation: sub_excess.max(mono_excess).max(0.0),
        max_submodular_violation: sub_excess.max(0.0),
        max_monotone_violation: mono_excess.max(0.0),
    })
}

/// Restriction of `f` to the subcube where the variables `vars` are
/// fixed to the assignment `z` (bit `k` of `z` is the value of
/// `vars[k]`). The result lives on the remaining `n - |vars|`
/// variables, re-indexed in increasing original order; flags and range
/// are preserved.
pub fn restrict(f: &SetFunction, vars: &[usize], z: u64) -> Result<SetFunction> {
    let n = f.n();
    let mut seen = 0u64;
    for &v in vars {
        if v >= n {
            return Err(Error::IndexOutOfRange { index: v, n });
        }
        if seen >> v & 1 == 1 {
            return Err(Error::BadParameter(format!("duplicate variable {v} in restriction")));
        }
        seen |= 1 << v;
    }
    if vars.len() >= n {
        return Err(Error::BadParameter("restriction must leave at least one free variable".into()));
    }
    if vars.len() < 64 && z >> vars.len() != 0 {
        return Err(Error::BadParameter("assignment has bits beyond |vars|".into()));
    }
    let mut fixed = 0u64;
    for (k, &v) in vars.iter().enumerate() {
        if z >> k & 1 == 1 {
            fixed |= 1 << v;
        }
    }
    let free: Vec<usize> = (0..n).filter(|i| seen >> i & 1 == 0).collect();
    let inner = f.clone();
    let m = free.len();
    SetFunction::from_fn(m, f.flags(), f.range_hint(), move |y: Point| {
        let mut bits = fixed;
        for (k, &v) in free.iter().enumerate() {
            if y.get(k) {
                bits |= 1 << v;
            }
        }
        inner.eval_bits(bits)
    })
}

/// Family selector plus its parameter record.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Family {
    /// `f(S) = sum_{i in S} weights[i]`.
    Linear { weights: Vec<f64> },
    /// Weighted coverage: variable `i` covers the universe elements in
    /// `sets[i]`; `f(S)` is the weight of the union covered by `S`.
    Coverage { sets: Vec<Vec<usize>>, universe_weights: Vec<f64> },
    /// Cut function of an undirected graph. Edge weights default to
    /// `1/|E|` each so values land in `[0,1]`.
    GraphCut { edges: Vec<(usize, usize)>, weights: Option<Vec<f64>> },
    /// Rank of a partition matroid: `sum_j min(|S ∩ blocks[j]|, caps[j])`,
    /// divided by the total capacity when `normalize` is set.
    MatroidRank { blocks: Vec<Vec<usize>>, caps: Vec<usize>, normalize: bool },
    /// `f(x) = min(sum_{i in active} x_i, 1)`.
    BudgetAdditive { active: Vec<usize> },
    /// `f(x) = (1/a) max_j sum_{i in A_j} x_i` over the contiguous
    /// partition `A_j = {(j-1)a, ..., ja-1}`; requires `n = a*b`.
    TribesXos { a: usize, b: usize },
    /// `f(x) = max_j sum_i clauses[j][i] * x_i` with nonnegative weights.
    MaxLinearXos { clauses: Vec<Vec<f64>> },
    /// `f(x) = clamp((2|x| - n)/sqrt(n), -1, 1)`.
    ClippedMajority {},
    /// `f(x) = min(|x ∩ active|, k)/k`, values on the `{0, 1/k, ..., 1}` grid.
    PseudoBoolean { k: usize, active: Vec<usize> },
    /// Explicit value table in mask order (`2^n` entries); structural
    /// flags are computed exhaustively (hence the `n <= 20` cap).
    ExplicitTable { values: Vec<f64> },
}

/// A fully parameterized family instance; serializes to
/// `{"family": ..., "n": ..., "params": {...}}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FamilySpec {
    pub n: usize,
    #[serde(flatten)]
    pub family: Family,
}

impl FamilySpec {
    pub fn new(n: usize, family: Family) -> Self {
        FamilySpec { n, family }
    }
}

fn check_vars(active: &[usize], n: usize, what: &str) -> Result<u64> {
    let mut mask = 0u64;
    for &v in active {
        if v >= n {
            return Err(Error::BadFamilyParams(format!("{what}: variable {v} out of range for n = {n}")));
        }
        if mask >> v & 1 == 1 {
            return Err(Error::BadFamilyParams(format!("{what}: duplicate variable {v}")));
        }
        mask |= 1 << v;
    }
    Ok(mask)
}

/// Builds the [`SetFunction`] described by `spec`, validating the
/// parameter record and deriving the structural flags.
pub fn make_family(spec: &FamilySpec) -> Result<SetFunction> {
    let n = spec.n;
    if n == 0 || n > MAX_N {
        return Err(Error::BadFamilyParams(format!("dimension {n} not in 1..={MAX_N}")));
    }
    match &spec.family {
        Family::Linear { weights } => {
            if weights.len() != n {
                return Err(Error::BadFamilyParams(format!(
                    "linear: {} weights for n = {n}",
                    weights.len()
                )));
            }
            let nonneg = weights.iter().all(|&w| w >= 0.0);
            let lo: f64 = weights.iter().filter(|&&w| w < 0.0).sum();
            let hi: f64 = weights.iter().filter(|&&w| w > 0.0).sum();
            let w = weights.clone();
            SetFunction::from_fn(
                n,
                StructuralFlags {
                    claims_monotone: nonneg,
                    claims_submodular: true,
                    claims_nonnegative: nonneg,
                    claims_xos: nonneg,
                },
                (lo.min(0.0), hi.max(0.0)),
                move |x| (0..x.n()).filter(|&i| x.get(i)).map(|i| w[i]).sum(),
            )
        }
        Family::Coverage { sets, universe_weights } => {
            if sets.len() != n {
                return Err(Error::BadFamilyParams(format!("coverage: {} sets for n = {n}", sets.len())));
            }
            let u = universe_weights.len();
            if u > 64 {
                return Err(Error::BadFamilyParams("coverage: universe larger than 64".into()));
            }
            if universe_weights.iter().any(|&w| w < 0.0) {
                return Err(Error::BadFamilyParams("coverage: negative universe weight".into()));
            }
            let mut covers = vec![0u64; n];
            for (i, s) in sets.iter().enumerate() {
                for &e in s {
                    if e >= u {
                        return Err(Error::BadFamilyParams(format!(
                            "coverage: element {e} outside universe of {u}"
                        )));
                    }
                    covers[i] |= 1 << e;
                }
            }
            let total: f64 = universe_weights.iter().sum();
            let w = universe_weights.clone();
            SetFunction::from_fn(
                n,
                StructuralFlags {
                    claims_monotone: true,
                    claims_submodular: true,
                    claims_nonnegative: true,
                    claims_xos: true,
                },
                (0.0, total),
                move |x| {
                    let mut covered = 0u64;
                    for i in 0..x.n() {
                        if x.get(i) {
                            covered |= covers[i];
                        }
                    }
                    let mut v = 0.0;
                    let mut rest = covered;
                    while rest != 0 {
                        let e = rest.trailing_zeros() as usize;
                        v += w[e];
                        rest &= rest - 1;
                    }
                    v
                },
            )
        }
        Family::GraphCut { edges, weights } => {
            if edges.is_empty() {
                return Err(Error::BadFamilyParams("graph_cut: empty edge list".into()));
            }
            for &(u, v) in edges {
                if u >= n || v >= n {
                    return Err(Error::BadFamilyParams(format!("graph_cut: edge ({u},{v}) out of range")));
                }
                if u == v {
                    return Err(Error::BadFamilyParams(format!("graph_cut: self-loop at {u}")));
                }
            }
            let w = match weights {
                Some(w) => {
                    if w.len() != edges.len() {
                        return Err(Error::BadFamilyParams(format!(
                            "graph_cut: {} weights for {} edges",
                            w.len(),
                            edges.len()
                        )));
                    }
                    if w.iter().any(|&x| x < 0.0) {
                        return Err(Error::BadFamilyParams("graph_cut: negative edge weight".into()));
                    }
                    w.clone()
                }
                None => vec![1.0 / edges.len() as f64; edges.len()],
            };
            let total: f64 = w.iter().sum();
            let e = edges.clone();
            SetFunction::from_fn(
                n,
                StructuralFlags {
                    claims_monotone: false,
                    claims_submodular: true,
                    claims_nonnegative: true,
                    claims_xos: false,
                },
                (0.0, total),
                move |x| {
                    e.iter()
                        .zip(&w)
                        .filter(|((u, v), _)| x.get(*u) != x.get(*v))
                        .map(|(_, &wt)| wt)
                        .sum()
                },
            )
        }
        Family::MatroidRank { blocks, caps, normalize } => {
            if blocks.len() != caps.len() {
                return Err(Error::BadFamilyParams(format!(
                    "matroid_rank: {} blocks but {} caps",
                    blocks.len(),
                    caps.len()
                )));
            }
            let mut masks = Vec::with_capacity(blocks.len());
            let mut seen = 0u64;
            for b in blocks {
                let m = check_vars(b, n, "matroid_rank")?;
                if m & seen != 0 {
                    return Err(Error::BadFamilyParams("matroid_rank: blocks overlap".into()));
                }
                seen |= m;
                masks.push(m);
            }
            if caps.iter().any(|&k| k == 0) {
                return Err(Error::BadFamilyParams("matroid_rank: zero capacity block".into()));
            }
            let total: usize = caps.iter().sum();
            let caps = caps.clone();
            let scale = if *normalize { 1.0 / total as f64 } else { 1.0 };
            let hi = if *normalize { 1.0 } else { total as f64 };
            SetFunction::from_fn(
                n,
                StructuralFlags {
                    claims_monotone: true,
                    claims_submodular: true,
                    claims_nonnegative: true,
                    claims_xos: true,
                },
                (0.0, hi),
                move |x| {
                    masks
                        .iter()
                        .zip(&caps)
                        .map(|(&m, &k)| ((x.bits() & m).count_ones() as usize).min(k) as f64)
                        .sum::<f64>()
                        * scale
                },
            )
        }
        Family::BudgetAdditive { active } => {
            let mask = check_vars(active, n, "budget_additive")?;
            if active.is_empty() {
                return Err(Error::BadFamilyParams("budget_additive: empty active set".into()));
            }
            SetFunction::from_fn(
                n,
                StructuralFlags {
                    claims_monotone: true,
                    claims_submodular: true,
                    claims_nonnegative: true,
                    claims_xos: true,
                },
                (0.0, 1.0),
                move |x| ((x.bits() & mask).count_ones().min(1)) as f64,
            )
        }
        Family::TribesXos { a, b } => {
            let (a, b) = (*a, *b);
            if a == 0 || b == 0 || a * b != n {
                return Err(Error::BadFamilyParams(format!("tribes_xos: need n = a*b, got {a}*{b} != {n}")));
            }
            let tribe_masks: Vec<u64> = (0..b).map(|j| mask_all(a) << (j * a)).collect();
            SetFunction::from_fn(
                n,
                StructuralFlags {
                    claims_monotone: true,
                    // A max over >= 2 multi-variable blocks is not submodular.
                    claims_submodular: a == 1 || b == 1,
                    claims_nonnegative: true,
                    claims_xos: true,
                },
                (0.0, 1.0),
                move |x| {
                    let best = tribe_masks.iter().map(|&m| (x.bits() & m).count_ones()).max().unwrap_or(0);
                    best as f64 / a as f64
                },
            )
        }
        Family::MaxLinearXos { clauses } => {
            if clauses.is_empty() {
                return Err(Error::BadFamilyParams("max_linear_xos: no clauses".into()));
            }
            for (j, c) in clauses.iter().enumerate() {
                if c.len() != n {
                    return Err(Error::BadFamilyParams(format!(
                        "max_linear_xos: clause {j} has {} weights for n = {n}",
                        c.len()
                    )));
                }
                if c.iter().any(|&w| w < 0.0) {
                    return Err(Error::BadFamilyParams(format!("max_linear_xos: negative weight in clause {j}")));
                }
            }
            let hi = clauses
                .iter()
                .map(|c| c.iter().sum::<f64>())
                .fold(0.0f64, f64::max);
            let cl = clauses.clone();
            SetFunction::from_fn(
                n,
                StructuralFlags {
                    claims_monotone: true,
                    claims_submodular: cl.len() == 1,
                    claims_nonnegative: true,
                    claims_xos: true,
                },
                (0.0, hi),
                move |x| {
                    cl.iter()
                        .map(|c| (0..x.n()).filter(|&i| x.get(i)).map(|i| c[i]).sum::<f64>())
                        .fold(0.0f64, f64::max)
                },
            )
        }
        Family::ClippedMajority {} => {
            let scale = 1.0 / (n as f64).sqrt();
            SetFunction::from_fn(
                n,
                StructuralFlags {
                    claims_monotone: true,
                    claims_submodular: false,
                    claims_nonnegative: false,
                    claims_xos: false,
                },
                (-1.0, 1.0),
                move |x| {
                    let s = 2.0 * x.count_ones() as f64 - x.n() as f64;
                    (s * scale).clamp(-1.0, 1.0)
                },
            )
        }
        Family::PseudoBoolean { k, active } => {
            let k = *k;
            if k == 0 {
                return Err(Error::BadFamilyParams("pseudo_boolean: k must be >= 1".into()));
            }
            let mask = check_vars(active, n, "pseudo_boolean")?;
            if active.is_empty() {
                return Err(Error::BadFamilyParams("pseudo_boolean: empty active set".into()));
            }
            SetFunction::from_fn(
                n,
                StructuralFlags {
                    claims_monotone: true,
                    claims_submodular: true,
                    claims_nonnegative: true,
                    claims_xos: true,
                },
                (0.0, 1.0),
                move |x| ((x.bits() & mask).count_ones() as usize).min(k) as f64 / k as f64,
            )
        }
        Family::ExplicitTable { values } => {
            if n > 20 {
                return Err(Error::BadFamilyParams(format!(
                    "explicit_table: n = {n} exceeds the cap of 20"
                )));
            }
            if values.len() != 1usize << n {
                return Err(Error::BadFamilyParams(format!(
                    "explicit_table: {} values for n = {n}",
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::BadFamilyParams("explicit_table: non-finite value".into()));
            }
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let nonneg = lo >= -TOL;
            let probe = SetFunction::from_table(n, values.clone(), StructuralFlags::default(), (lo, hi))?;
            let report = structure_check(&probe)?;
            SetFunction::from_table(
                n,
                values.clone(),
                StructuralFlags {
                    claims_monotone: report.is_monotone,
                    claims_submodular: report.is_submodular,
                    claims_nonnegative: nonneg,
                    claims_xos: false,
                },
                (lo, hi),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn or2() -> SetFunction {
        make_family(&FamilySpec::new(2, Family::PseudoBoolean { k: 1, active: vec![0, 1] })).unwrap()
    }

    fn and2() -> SetFunction {
        make_family(&FamilySpec::new(
            2,
            Family::ExplicitTable { values: vec![0.0, 0.0, 0.0, 1.0] },
        ))
        .unwrap()
    }

    #[test]
    fn linear_values() {
        let f = make_family(&FamilySpec::new(2, Family::Linear { weights: vec![0.5, 0.5] })).unwrap();
        assert_eq!(f.eval_bits(0b11), 1.0);
        assert_eq!(f.eval_bits(0b01), 0.5);
        assert!(f.flags().claims_submodular && f.flags().claims_monotone);
    }

    #[test]
    fn tribes_values() {
        // a = 2, b = 2: tribes {0,1} and {2,3}.
        let f = make_family(&FamilySpec::new(4, Family::TribesXos { a: 2, b: 2 })).unwrap();
        assert_eq!(f.eval_bits(0b0011), 1.0); // x1 = x2 = 1
        assert_eq!(f.eval_bits(0b0101), 0.5); // one variable in each tribe
        assert!(!f.flags().claims_submodular);
    }

    #[test]
    fn graph_cut_single_edge() {
        let f = make_family(&FamilySpec::new(2, Family::GraphCut { edges: vec![(0, 1)], weights: None })).unwrap();
        assert_eq!(f.eval_bits(0b01), 1.0);
        assert_eq!(f.eval_bits(0b11), 0.0);
        let rep = structure_check(&f).unwrap();
        assert!(rep.is_submodular && !rep.is_monotone);
    }

    #[test]
    fn tribes_bad_partition_rejected() {
        assert!(make_family(&FamilySpec::new(5, Family::TribesXos { a: 2, b: 2 })).is_err());
    }

    #[test]
    fn negative_xos_weights_rejected() {
        let err = make_family(&FamilySpec::new(
            2,
            Family::MaxLinearXos { clauses: vec![vec![1.0, -0.5]] },
        ));
        assert!(err.is_err());
    }

    #[test]
    fn restrict_or() {
        let f = or2();
        // Fix x0 = 1: absorbing, constant 1.
        let g = restrict(&f, &[0], 0b1).unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.eval_bits(0), 1.0);
        assert_eq!(g.eval_bits(1), 1.0);
        // Fix x0 = 0: identity on the remaining variable.
        let g = restrict(&f, &[0], 0b0).unwrap();
        assert_eq!(g.eval_bits(0), 0.0);
        assert_eq!(g.eval_bits(1), 1.0);
    }

    #[test]
    fn restrict_cut_edge() {
        let f = make_family(&FamilySpec::new(2, Family::GraphCut { edges: vec![(0, 1)], weights: None })).unwrap();
        let g = restrict(&f, &[0], 0b1).unwrap();
        assert_eq!(g.eval_bits(0), 1.0);
        assert_eq!(g.eval_bits(1), 0.0);
    }

    #[test]
    fn restrict_composes() {
        let f = make_family(&FamilySpec::new(
            6,
            Family::Coverage {
                sets: vec![vec![0, 1], vec![1, 2], vec![2], vec![3], vec![0, 3], vec![4]],
                universe_weights: vec![0.25, 0.25, 0.25, 0.125, 0.125],
            },
        ))
        .unwrap();
        let g1 = restrict(&restrict(&f, &[1], 0b1).unwrap(), &[2], 0b0).unwrap();
        // After removing var 1, original var 3 sits at index 2.
        let g2 = restrict(&f, &[1, 3], 0b01).unwrap();
        for x in Point::all(4) {
            assert_eq!(g1.eval(x), g2.eval(x));
        }
    }

    #[test]
    fn derivatives_or() {
        let f = or2();
        assert_eq!(derivative(&f, 0, Point::new(0b00, 2).unwrap()).unwrap(), 1.0);
        assert_eq!(derivative(&f, 0, Point::new(0b10, 2).unwrap()).unwrap(), 0.0);
        for x in Point::all(2) {
            assert_eq!(second_derivative(&f, 0, 1, x).unwrap(), -1.0);
        }
    }

    #[test]
    fn derivatives_linear() {
        let f = make_family(&FamilySpec::new(2, Family::Linear { weights: vec![0.5, 0.5] })).unwrap();
        for x in Point::all(2) {
            assert_eq!(derivative(&f, 0, x).unwrap(), 0.5);
            assert_eq!(second_derivative(&f, 0, 1, x).unwrap(), 0.0);
        }
    }

    #[test]
    fn structure_check_or_and() {
        let rep = structure_check(&or2()).unwrap();
        assert!(rep.is_submodular && rep.is_monotone);
        assert_eq!(rep.max_violation, 0.0);
        let rep = structure_check(&and2()).unwrap();
        assert!(!rep.is_submodular);
        assert!(rep.is_monotone);
        assert_eq!(rep.max_violation, 1.0);
    }

    #[test]
    fn pseudo_boolean_grid() {
        let f = make_family(&FamilySpec::new(
            6,
            Family::PseudoBoolean { k: 3, active: vec![0, 2, 3, 5] },
        ))
        .unwrap();
        for x in Point::all(6) {
            let v = f.eval(x) * 3.0;
            assert!((v - v.round()).abs() < TOL);
        }
    }

    #[test]
    fn max_linear_is_pointwise_max() {
        let clauses = vec![vec![0.5, 0.0, 0.25], vec![0.0, 0.75, 0.0]];
        let f = make_family(&FamilySpec::new(3, Family::MaxLinearXos { clauses: clauses.clone() })).unwrap();
        for x in Point::all(3) {
            let want = clauses
                .iter()
                .map(|c| (0..3).filter(|&i| x.get(i)).map(|i| c[i]).sum::<f64>())
                .fold(0.0f64, f64::max);
            assert_eq!(f.eval(x), want);
        }
    }

    #[test]
    fn family_spec_json_roundtrip() {
        let spec = FamilySpec::new(4, Family::TribesXos { a: 2, b: 2 });
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"family\":\"tribes_xos\""));
        let back: FamilySpec = serde_json::from_str(&s).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn explicit_table_flags_derived() {
        let f = and2();
        assert!(f.flags().claims_monotone);
        assert!(!f.flags().claims_submodular);
        assert!(f.flags().claims_nonnegative);
    }
}
