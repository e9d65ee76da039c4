//! Variable-selection procedures and the iteration drivers that build
//! junta approximations.
//!
//! Three selection criteria are implemented over a common scaffold:
//!
//! - additive: grow `S` while some unchosen variable has discrete
//!   derivative above `alpha` at a delta-biased random subset of `S`
//!   with probability more than 1/2, and symmetrically grow `T` for
//!   derivatives below `-alpha` near the top of the cube;
//! - multiplicative (monotone functions): the derivative is compared
//!   against `beta * f(1_{T ∪ S̄})`, the value at the top of the
//!   current subcube;
//! - product-distribution: the biased subset is drawn under the
//!   eta-tilted distribution derived from the target distribution.
//!
//! The criterion probability is computed exactly by enumeration while
//! the grown set is small (`CriterionCfg::exact_cap`) and by
//! Monte-Carlo beyond that. Ties at exactly 1/2 accept.

use serde::{Deserialize, Serialize};

use crate::boolfour;
use crate::estim::{sample_size, ProductDist, Prng};
use crate::setfn::{mask_all, Point, SetFunction};
use crate::{Error, Result, TOL};

/// Base-2 logarithm with the argument clamped to `>= 2`, so derived
/// `delta` values never exceed 1/2.
fn log2c(x: f64) -> f64 {
    x.max(2.0).log2()
}

/// How criterion probabilities are evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionCfg {
    /// Exact enumeration over subsets while the grown set has at most
    /// this many members.
    pub exact_cap: usize,
    /// Monte-Carlo draws beyond the exact cap.
    pub samples: usize,
}

impl Default for CriterionCfg {
    fn default() -> Self {
        CriterionCfg { exact_cap: 20, samples: 800 }
    }
}

/// One accepted variable with the criterion probability at inclusion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub var: usize,
    pub probability: f64,
    pub exact: bool,
}

/// Record of one selection run: the grown sets with per-variable
/// acceptance probabilities, the enforced cap and whether it was hit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub s_phase: Vec<Inclusion>,
    pub t_phase: Vec<Inclusion>,
    /// Per-phase size cap.
    pub phase_cap: f64,
    pub criterion: CriterionCfg,
}

impl SelectionTrace {
    /// Union of both phases, sorted ascending.
    pub fn selected_vars(&self) -> Vec<usize> {
        let mut vars: Vec<usize> =
            self.s_phase.iter().chain(&self.t_phase).map(|inc| inc.var).collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }
}

/// Probability that the event holds on a random sub-mask of `members`
/// where `members[k]` is kept independently with probability
/// `keep_prob[k]`.
fn criterion_probability(
    members: &[usize],
    keep_prob: &[f64],
    cfg: &CriterionCfg,
    rng: &mut Prng,
    event: impl Fn(u64) -> bool,
) -> (f64, bool) {
    debug_assert_eq!(members.len(), keep_prob.len());
    if members.len() <= cfg.exact_cap {
        let mut prob = 0.0;
        for choice in 0u64..1 << members.len() {
            let mut mask = 0u64;
            let mut weight = 1.0;
            for (k, &v) in members.iter().enumerate() {
                if choice >> k & 1 == 1 {
                    mask |= 1 << v;
                    weight *= keep_prob[k];
                } else {
                    weight *= 1.0 - keep_prob[k];
                }
            }
            if weight > 0.0 && event(mask) {
                prob += weight;
            }
        }
        (prob, true)
    } else {
        use rand::Rng;
        let mut hits = 0usize;
        for _ in 0..cfg.samples {
            let mut mask = 0u64;
            for (k, &v) in members.iter().enumerate() {
                if rng.random::<f64>() < keep_prob[k] {
                    mask |= 1 << v;
                }
            }
            if event(mask) {
                hits += 1;
            }
        }
        (hits as f64 / cfg.samples as f64, false)
    }
}

fn accepted(prob: f64) -> bool {
    prob >= 0.5 - 1e-12
}

struct Phase<'a> {
    members: Vec<usize>,
    keep_prob: Vec<f64>,
    inclusions: Vec<Inclusion>,
    cap: f64,
    cfg: &'a CriterionCfg,
}

impl<'a> Phase<'a> {
    fn new(cap: f64, cfg: &'a CriterionCfg) -> Self {
        Phase { members: Vec::new(), keep_prob: Vec::new(), inclusions: Vec::new(), cap, cfg }
    }

    /// Scans ascending indices, restarting from 0 after each inclusion,
    /// until no candidate passes. `event(i, mask)` is the criterion
    /// event for candidate `i` on sampled sub-mask `mask`.
    fn grow(
        &mut self,
        n: usize,
        prob_of: impl Fn(usize) -> f64,
        event: impl Fn(usize, u64) -> bool,
        rng: &mut Prng,
    ) -> Result<()> {
        'scan: loop {
            for i in 0..n {
                if self.members.contains(&i) {
                    continue;
                }
                let (prob, exact) = criterion_probability(
                    &self.members,
                    &self.keep_prob,
                    self.cfg,
                    rng,
                    |mask| event(i, mask),
                );
                if accepted(prob) {
                    if self.members.len() as f64 + 1.0 > self.cap + 1e-12 {
                        return Err(Error::SelectionCapExceeded { cap: self.cap as usize });
                    }
                    self.members.push(i);
                    self.keep_prob.push(prob_of(i));
                    self.inclusions.push(Inclusion { var: i, probability: prob, exact });
                    continue 'scan;
                }
            }
            return Ok(());
        }
    }
}

/// The additive criterion. Grows `S` while some `i ∉ S` has
/// `Pr[d_i f(1_{S(delta)}) > alpha] > 1/2` and `T` symmetrically on
/// `d_i f(1_{J \ T(delta)}) < -alpha`; each phase holds at most
/// `2/(alpha delta)` variables.
pub fn select_additive(
    f: &SetFunction,
    alpha: f64,
    delta: f64,
    cfg: &CriterionCfg,
    rng: &mut Prng,
) -> Result<SelectionTrace> {
    if !f.flags().claims_submodular {
        return Err(Error::FlagRequired("submodular"));
    }
    if !(alpha > 0.0 && alpha <= 0.5) || !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::BadParameter(format!("alpha = {alpha}, delta = {delta} outside (0, 1/2]")));
    }
    let n = f.n();
    let cap = 2.0 / (alpha * delta);

    let mut s = Phase::new(cap, cfg);
    s.grow(
        n,
        |_| delta,
        |i, mask| f.eval_bits(mask | 1 << i) - f.eval_bits(mask) > alpha,
        rng,
    )?;

    let full = mask_all(n);
    let mut t = Phase::new(cap, cfg);
    t.grow(
        n,
        |_| delta,
        |i, cleared| {
            let base = full & !cleared;
            f.eval_bits(base | 1 << i) - f.eval_bits(base & !(1 << i)) < -alpha
        },
        rng,
    )?;

    Ok(SelectionTrace {
        s_phase: s.inclusions,
        t_phase: t.inclusions,
        phase_cap: cap,
        criterion: cfg.clone(),
    })
}

/// The multiplicative criterion for monotone nonnegative submodular
/// functions: `Pr[d_i f(1_T) > beta f(1_{T ∪ S̄})] > 1/2` over
/// `T ~ S(delta)`; at most `2/(beta delta)` variables are selected.
pub fn select_multiplicative(
    f: &SetFunction,
    beta: f64,
    delta: f64,
    cfg: &CriterionCfg,
    rng: &mut Prng,
) -> Result<SelectionTrace> {
    let flags = f.flags();
    if !flags.claims_submodular {
        return Err(Error::FlagRequired("submodular"));
    }
    if !flags.claims_monotone {
        // The non-monotone multiplicative case is open.
        return Err(Error::FlagRequired("monotone"));
    }
    if !flags.claims_nonnegative {
        return Err(Error::FlagRequired("nonnegative"));
    }
    if !(beta > 0.0 && beta <= 0.5) || !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::BadParameter(format!("beta = {beta}, delta = {delta} outside (0, 1/2]")));
    }
    let n = f.n();
    let full = mask_all(n);
    let cap = 2.0 / (beta * delta);

    let mut s = Phase::new(cap, cfg);
    // `grow` only appends to members, so reading the current member
    // mask inside the event closure needs interior access; rebuild the
    // complement lazily from the phase state via a cell.
    let members_mask = std::cell::Cell::new(0u64);
    let result = {
        let event = |i: usize, mask: u64| {
            let outside = full & !members_mask.get();
            let top = mask | outside;
            f.eval_bits(mask | 1 << i) - f.eval_bits(mask) > beta * f.eval_bits(top)
        };
        'scan: loop {
            for i in 0..n {
                if s.members.contains(&i) {
                    continue;
                }
                let (prob, exact) =
                    criterion_probability(&s.members, &s.keep_prob, cfg, rng, |mask| event(i, mask));
                if accepted(prob) {
                    if s.members.len() as f64 + 1.0 > cap + 1e-12 {
                        break 'scan Err(Error::SelectionCapExceeded { cap: cap as usize });
                    }
                    s.members.push(i);
                    s.keep_prob.push(delta);
                    s.inclusions.push(Inclusion { var: i, probability: prob, exact });
                    members_mask.set(members_mask.get() | 1 << i);
                    continue 'scan;
                }
            }
            break Ok(());
        }
    };
    result?;

    Ok(SelectionTrace {
        s_phase: s.inclusions,
        t_phase: Vec::new(),
        phase_cap: cap,
        criterion: cfg.clone(),
    })
}

/// The product-distribution criterion. Subsets are drawn under the
/// eta-tilted distributions derived from `dist`; each phase holds at
/// most `2/(p0 alpha eta)` variables.
pub fn select_product(
    f: &SetFunction,
    dist: &ProductDist,
    alpha: f64,
    eta: f64,
    cfg: &CriterionCfg,
    rng: &mut Prng,
) -> Result<SelectionTrace> {
    if !f.flags().claims_submodular {
        return Err(Error::FlagRequired("submodular"));
    }
    if f.n() != dist.n() {
        return Err(Error::DimensionMismatch(f.n(), dist.n()));
    }
    if !(alpha > 0.0 && alpha <= 0.5) || !(eta > 0.0 && eta < 1.0) {
        return Err(Error::BadParameter(format!("alpha = {alpha}, eta = {eta} out of range")));
    }
    let n = f.n();
    let p = dist.marginals();
    // Under D0, Pr[x_i = 0] = (Pr_D[x_i = 0])^eta; a selected variable
    // survives into `x ∧ 1_S` with the complementary probability.
    let keep0: Vec<f64> = p.iter().map(|&pi| 1.0 - (1.0 - pi).powf(eta)).collect();
    // Under D1, Pr[x_i = 1] = (Pr_D[x_i = 1])^eta; a member of T is
    // zeroed in `x ∨ 1_{J \ T}` with the complementary probability.
    let zero1: Vec<f64> = p.iter().map(|&pi| 1.0 - pi.powf(eta)).collect();

    let cap = 2.0 / (dist.p0() * alpha * eta);
    let full = mask_all(n);

    let mut s = Phase::new(cap, cfg);
    s.grow(
        n,
        |i| keep0[i],
        |i, mask| f.eval_bits(mask | 1 << i) - f.eval_bits(mask) > alpha,
        rng,
    )?;

    let mut t = Phase::new(cap, cfg);
    t.grow(
        n,
        |i| zero1[i],
        |i, cleared| {
            let base = full & !cleared;
            f.eval_bits(base | 1 << i) - f.eval_bits(base & !(1 << i)) < -alpha
        },
        rng,
    )?;

    Ok(SelectionTrace {
        s_phase: s.inclusions,
        t_phase: t.inclusions,
        phase_cap: cap,
        criterion: cfg.clone(),
    })
}

/// Parameters recorded alongside a model, plus measured error metrics
/// where exhaustive measurement was feasible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub algorithm: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_error_l2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_disagreement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_success_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_hit: Option<bool>,
}

/// A junta hypothesis: an ordered variable list, a value table over
/// assignments to those variables, and a multiplicative scale applied
/// at prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JuntaModel {
    pub vars: Vec<usize>,
    pub table: Vec<f64>,
    pub scale: f64,
    #[serde(default)]
    pub provenance: Provenance,
}

impl JuntaModel {
    pub fn constant(value: f64, provenance: Provenance) -> Self {
        JuntaModel { vars: Vec::new(), table: vec![value], scale: 1.0, provenance }
    }

    pub fn cell_index(&self, x: Point) -> usize {
        let mut z = 0usize;
        for (k, &v) in self.vars.iter().enumerate() {
            if x.get(v) {
                z |= 1 << k;
            }
        }
        z
    }

    pub fn predict(&self, x: Point) -> f64 {
        self.scale * self.table[self.cell_index(x)]
    }

    /// Wraps the model as an oracle on `n` variables, carrying the
    /// given structural claims.
    pub fn to_set_function(&self, n: usize, flags: crate::setfn::StructuralFlags) -> Result<SetFunction> {
        for &v in &self.vars {
            if v >= n {
                return Err(Error::IndexOutOfRange { index: v, n });
            }
        }
        let model = self.clone();
        let lo = self.table.iter().cloned().fold(f64::INFINITY, f64::min) * self.scale;
        let hi = self.table.iter().cloned().fold(f64::NEG_INFINITY, f64::max) * self.scale;
        SetFunction::from_fn(n, flags, (lo.min(hi), hi.max(lo)), move |x| model.predict(x))
    }
}

/// Builds the projection table of `f` on `vars`: exact (one pass over
/// the cube) for `n <= 24`, otherwise per-cell Monte-Carlo means with
/// accuracy `cell_eps` at confidence 0.99.
pub fn projection_table(
    f: &SetFunction,
    vars: &[usize],
    cell_eps: Option<f64>,
    rng: &mut Prng,
) -> Result<Vec<f64>> {
    let n = f.n();
    if vars.len() > 24 {
        return Err(Error::ConfigCap(format!("junta table on {} variables", vars.len())));
    }
    if n <= 24 {
        let cells = 1usize << vars.len();
        let mut sums = vec![0.0f64; cells];
        for x in Point::all(n) {
            let mut z = 0usize;
            for (k, &v) in vars.iter().enumerate() {
                if x.get(v) {
                    z |= 1 << k;
                }
            }
            sums[z] += f.eval(x);
        }
        let per_cell = ((1u64 << n) / cells as u64) as f64;
        for s in &mut sums {
            *s /= per_cell;
        }
        Ok(sums)
    } else {
        let eps = cell_eps.ok_or(Error::DimensionTooLarge { op: "projection_table", n, cap: 24 })?;
        let (lo, hi) = f.range_hint();
        let m = sample_size(hi - lo, eps, 0.01).max(1);
        let cells = 1usize << vars.len();
        let mut table = Vec::with_capacity(cells);
        for z in 0..cells {
            table.push(crate::estim::estimate_subcube_mean(f, vars, z as u64, m, rng)?);
        }
        Ok(table)
    }
}

/// One pass of the additive reduction: selects coordinates with
/// `alpha = eps^2/16`, `delta = 1/(2 log(16 n / eps^2))` and returns
/// the projection onto them. Exhaustively measures the achieved l2
/// error when `n <= 20`.
pub fn reduce_once(f: &SetFunction, eps: f64, cfg: &CriterionCfg, rng: &mut Prng) -> Result<JuntaModel> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::BadParameter(format!("eps = {eps} outside (0,1]")));
    }
    let n = f.n();
    let alpha = eps * eps / 16.0;
    let delta = 1.0 / (2.0 * log2c(16.0 * n as f64 / (eps * eps)));
    let trace = select_additive(f, alpha, delta, cfg, rng)?;
    let vars = trace.selected_vars();
    let table = projection_table(f, &vars, Some(eps / 4.0), rng)?;
    let mut provenance = Provenance {
        algorithm: "additive_reduce".into(),
        alpha: Some(alpha),
        delta: Some(delta),
        eps: Some(eps),
        ..Default::default()
    };
    let model = JuntaModel { vars, table, scale: 1.0, provenance: provenance.clone() };
    if n <= 20 {
        let h = model.to_set_function(n, f.flags())?;
        provenance.measured_error_l2 = Some(boolfour::distance(f, &h, 2)?);
    }
    Ok(JuntaModel { provenance, ..model })
}

/// Stopping policy for [`approximate_junta`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub max_rounds: usize,
    /// Stop once the junta is at most this large.
    pub target: usize,
    /// Stop when a round fails to shrink the variable count by this
    /// fraction.
    pub min_shrink: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { max_rounds: 4, target: 0, min_shrink: 0.1 }
    }
}

/// Iterates [`reduce_once`] on successive projections with error
/// budgets `eps/2, eps/4, ...`; the triangle inequality bounds the
/// total error by `eps`. The final model is submodular whenever the
/// input is, since every round returns a projection.
pub fn approximate_junta(
    f: &SetFunction,
    eps: f64,
    schedule: &Schedule,
    cfg: &CriterionCfg,
    rng: &mut Prng,
) -> Result<JuntaModel> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::BadParameter(format!("eps = {eps} outside (0,1]")));
    }
    let n = f.n();
    let mut current = f.clone();
    let mut model: Option<JuntaModel> = None;
    let mut prev_size = n;
    let mut rounds = 0usize;
    for round in 0..schedule.max_rounds.max(1) {
        let round_eps = eps / 2f64.powi(round as i32);
        let m = reduce_once(&current, round_eps, cfg, rng)?;
        rounds = round + 1;
        let size = m.vars.len();
        current = m.to_set_function(n, f.flags())?;
        model = Some(m);
        if size <= schedule.target {
            break;
        }
        if (size as f64) > (prev_size as f64) * (1.0 - schedule.min_shrink) {
            break;
        }
        prev_size = size;
    }
    let mut model = model.expect("at least one round runs");
    model.provenance.algorithm = "approximate_junta".into();
    model.provenance.eps = Some(eps);
    model.provenance.rounds = Some(rounds);
    if n <= 20 {
        let h = model.to_set_function(n, f.flags())?;
        model.provenance.measured_error_l2 = Some(boolfour::distance(f, &h, 2)?);
    }
    Ok(model)
}

/// Multiplicative junta for monotone nonnegative submodular functions:
/// selects with `beta = gamma^2 / (108 log(4/eps))`,
/// `delta = 1/(2 log(2n/eps))`, and returns the projection scaled by
/// `1 + gamma/3`. Exhaustively measures
/// `Pr[f <= h <= (1+gamma) f]` when `n <= 20`.
pub fn multiplicative_junta(
    f: &SetFunction,
    gamma: f64,
    eps: f64,
    cfg: &CriterionCfg,
    rng: &mut Prng,
) -> Result<JuntaModel> {
    if !(gamma > 0.0 && gamma <= 1.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::BadParameter(format!("gamma = {gamma}, eps = {eps} out of range")));
    }
    let n = f.n();
    let beta = gamma * gamma / (108.0 * log2c(4.0 / eps));
    let delta = 1.0 / (2.0 * log2c(2.0 * n as f64 / eps));
    let trace = select_multiplicative(f, beta, delta, cfg, rng)?;
    let vars = trace.selected_vars();
    let table = projection_table(f, &vars, Some(eps / 4.0), rng)?;
    let scale = 1.0 + gamma / 3.0;
    let mut provenance = Provenance {
        algorithm: "multiplicative".into(),
        beta: Some(beta),
        delta: Some(delta),
        gamma: Some(gamma),
        eps: Some(eps),
        ..Default::default()
    };
    let model = JuntaModel { vars, table, scale, provenance: provenance.clone() };
    if n <= 20 {
        provenance.measured_success_prob = Some(multiplicative_success(f, &model, gamma)?);
    }
    Ok(JuntaModel { provenance, ..model })
}

/// Exhaustive `Pr[f(x) <= h(x) <= (1 + gamma) f(x)]` for `n <= 20`.
pub fn multiplicative_success(f: &SetFunction, model: &JuntaModel, gamma: f64) -> Result<f64> {
    let n = f.n();
    if n > 20 {
        return Err(Error::DimensionTooLarge { op: "multiplicative_success", n, cap: 20 });
    }
    let mut good = 0u64;
    for x in Point::all(n) {
        let fx = f.eval(x);
        let hx = model.predict(x);
        if fx <= hx + TOL && hx <= (1.0 + gamma) * fx + TOL {
            good += 1;
        }
    }
    Ok(good as f64 / (1u64 << n) as f64)
}

/// Junta captured from a pseudo-Boolean submodular function (values on
/// the `{0, 1/k, ..., 1}` grid): selects with `alpha = 1/(k+1)`,
/// `delta = 1/(2 log(2n/eps))` and tabulates `f(z, 1)` on the selected
/// variables. Measures the exact disagreement probability for `n <= 20`.
pub fn pseudo_boolean_junta(
    f: &SetFunction,
    k: usize,
    eps: f64,
    cfg: &CriterionCfg,
    rng: &mut Prng,
) -> Result<JuntaModel> {
    if k == 0 {
        return Err(Error::BadParameter("k must be >= 1".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::BadParameter(format!("eps = {eps} outside (0,1)")));
    }
    let n = f.n();
    if n <= 24 {
        for x in Point::all(n) {
            let scaled = f.eval(x) * k as f64;
            if (scaled - scaled.round()).abs() > TOL || !(-TOL..=k as f64 + TOL).contains(&scaled) {
                return Err(Error::ValuesOffGrid { k, mask: x.bits() });
            }
        }
    }
    let alpha = 1.0 / (k + 1) as f64;
    let delta = 1.0 / (2.0 * log2c(2.0 * n as f64 / eps));
    let trace = select_additive(f, alpha, delta, cfg, rng)?;
    let vars = trace.selected_vars();

    let full = mask_all(n);
    let mut kept_mask = 0u64;
    for &v in &vars {
        kept_mask |= 1 << v;
    }
    let discarded = full & !kept_mask;
    let cells = 1usize << vars.len();
    let mut table = Vec::with_capacity(cells);
    for z in 0..cells as u64 {
        let mut bits = discarded;
        for (kk, &v) in vars.iter().enumerate() {
            if z >> kk & 1 == 1 {
                bits |= 1 << v;
            }
        }
        table.push(f.eval_bits(bits));
    }
    let mut provenance = Provenance {
        algorithm: "pseudo_boolean".into(),
        alpha: Some(alpha),
        delta: Some(delta),
        eps: Some(eps),
        k: Some(k),
        ..Default::default()
    };
    let model = JuntaModel { vars, table, scale: 1.0, provenance: provenance.clone() };
    if n <= 20 {
        let mut disagree = 0u64;
        for x in Point::all(n) {
            if (f.eval(x) - model.predict(x)).abs() > TOL {
                disagree += 1;
            }
        }
        provenance.measured_disagreement = Some(disagree as f64 / (1u64 << n) as f64);
    }
    Ok(JuntaModel { provenance, ..model })
}

/// For each excluded variable, the exact fraction of assignments
/// `z ∈ {0,1}^{J'}` that are bad at the bottom (`d_i f(1_z) > alpha`)
/// and at the top (`d_i f(1_{z ∪ (J \ J')}) < -alpha`) of the
/// corresponding subcube. Capped at `|J'| <= 20`.
pub fn excluded_bad_fractions(
    f: &SetFunction,
    selected: &[usize],
    alpha: f64,
) -> Result<Vec<(usize, f64, f64)>> {
    let n = f.n();
    if selected.len() > 20 {
        return Err(Error::ConfigCap(format!("{} selected variables", selected.len())));
    }
    let mut sel_mask = 0u64;
    for &v in selected {
        if v >= n {
            return Err(Error::IndexOutOfRange { index: v, n });
        }
        sel_mask |= 1 << v;
    }
    let outside = mask_all(n) & !sel_mask;
    let cells = 1u64 << selected.len();
    let mut out = Vec::new();
    for i in 0..n {
        if sel_mask >> i & 1 == 1 {
            continue;
        }
        let (mut bad_bottom, mut bad_top) = (0u64, 0u64);
        for z in 0..cells {
            let mut bits = 0u64;
            for (k, &v) in selected.iter().enumerate() {
                if z >> k & 1 == 1 {
                    bits |= 1 << v;
                }
            }
            if f.eval_bits(bits | 1 << i) - f.eval_bits(bits & !(1 << i)) > alpha {
                bad_bottom += 1;
            }
            let top = bits | outside;
            if f.eval_bits(top | 1 << i) - f.eval_bits(top & !(1 << i)) < -alpha {
                bad_top += 1;
            }
        }
        out.push((i, bad_bottom as f64 / cells as f64, bad_top as f64 / cells as f64));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estim::RngStream;
    use crate::setfn::{make_family, structure_check, Family, FamilySpec};

    fn or2() -> SetFunction {
        make_family(&FamilySpec::new(2, Family::PseudoBoolean { k: 1, active: vec![0, 1] })).unwrap()
    }

    fn constant(n: usize, c: f64) -> SetFunction {
        make_family(&FamilySpec::new(n, Family::ExplicitTable { values: vec![c; 1 << n] })).unwrap()
    }

    #[test]
    fn additive_selects_linear_variables() {
        let f = make_family(&FamilySpec::new(2, Family::Linear { weights: vec![0.5, 0.5] })).unwrap();
        let mut rng = RngStream::new(1).rng();
        let trace = select_additive(&f, 0.4, 0.5, &CriterionCfg::default(), &mut rng).unwrap();
        assert_eq!(trace.selected_vars(), vec![0, 1]);
        assert!(trace.t_phase.is_empty());
        for inc in &trace.s_phase {
            assert_eq!(inc.probability, 1.0);
        }
    }

    #[test]
    fn additive_constant_selects_nothing() {
        let f = constant(4, 0.5);
        let mut rng = RngStream::new(1).rng();
        let trace = select_additive(&f, 0.1, 0.5, &CriterionCfg::default(), &mut rng).unwrap();
        assert!(trace.selected_vars().is_empty());
    }

    #[test]
    fn additive_cap_formula() {
        let f = constant(3, 0.0);
        let mut rng = RngStream::new(1).rng();
        let trace = select_additive(&f, 0.1, 0.5, &CriterionCfg::default(), &mut rng).unwrap();
        // Per-phase cap 2/(alpha delta) = 40, union cap 80.
        assert_eq!(trace.phase_cap, 40.0);
        assert_eq!(2.0 * trace.phase_cap, 80.0);
    }

    #[test]
    fn additive_t_phase_catches_cut_variables() {
        let f = make_family(&FamilySpec::new(3, Family::GraphCut { edges: vec![(0, 1)], weights: None })).unwrap();
        let mut rng = RngStream::new(1).rng();
        let trace = select_additive(&f, 0.3, 0.5, &CriterionCfg::default(), &mut rng).unwrap();
        // At the bottom both endpoints have derivative +1; at the top
        // both have derivative -1. Either phase may claim them.
        assert_eq!(trace.selected_vars(), vec![0, 1]);
        assert!(!trace.t_phase.is_empty());
    }

    #[test]
    fn reduce_once_or() {
        let f = or2();
        let mut rng = RngStream::new(2).rng();
        let model = reduce_once(&f, 0.8, &CriterionCfg::default(), &mut rng).unwrap();
        assert!(model.vars.iter().all(|&v| v < 2));
        assert!(model.provenance.measured_error_l2.unwrap() <= 0.4 + TOL);
    }

    #[test]
    fn reduce_once_constant() {
        let f = constant(5, 0.3);
        let mut rng = RngStream::new(2).rng();
        let model = reduce_once(&f, 0.4, &CriterionCfg::default(), &mut rng).unwrap();
        assert!(model.vars.is_empty());
        assert!(model.provenance.measured_error_l2.unwrap() < TOL);
    }

    #[test]
    fn reduce_once_coverage_16() {
        let sets: Vec<Vec<usize>> = (0..16).map(|i| vec![i % 8]).collect();
        let f = make_family(&FamilySpec::new(
            16,
            Family::Coverage { sets, universe_weights: vec![0.125; 8] },
        ))
        .unwrap();
        let mut rng = RngStream::new(3).rng();
        let model = reduce_once(&f, 0.4, &CriterionCfg::default(), &mut rng).unwrap();
        assert!(model.provenance.measured_error_l2.unwrap() <= 0.2 + TOL);
    }

    #[test]
    fn approximate_junta_planted() {
        let f = make_family(&FamilySpec::new(
            16,
            Family::MatroidRank { blocks: vec![vec![2, 7, 11]], caps: vec![2], normalize: true },
        ))
        .unwrap();
        let mut rng = RngStream::new(4).rng();
        let model =
            approximate_junta(&f, 0.3, &Schedule::default(), &CriterionCfg::default(), &mut rng).unwrap();
        assert!(model.vars.iter().all(|v| [2, 7, 11].contains(v)));
        assert!(model.provenance.measured_error_l2.unwrap() <= 0.3 + TOL);
        // Projection model of a submodular input is submodular.
        let h = model.to_set_function(16, f.flags()).unwrap();
        assert!(structure_check(&h).unwrap().is_submodular);
    }

    #[test]
    fn approximate_junta_identity_on_junta_input() {
        let f = or2();
        let mut rng = RngStream::new(4).rng();
        let model =
            approximate_junta(&f, 0.2, &Schedule::default(), &CriterionCfg::default(), &mut rng).unwrap();
        assert_eq!(model.vars, vec![0, 1]);
        assert_eq!(model.provenance.measured_error_l2.unwrap(), 0.0);
    }

    #[test]
    fn multiplicative_selects_dictator() {
        let mut w = vec![0.0; 6];
        w[0] = 1.0;
        let f = make_family(&FamilySpec::new(6, Family::Linear { weights: w })).unwrap();
        let mut rng = RngStream::new(5).rng();
        let trace = select_multiplicative(&f, 0.4, 0.5, &CriterionCfg::default(), &mut rng).unwrap();
        assert_eq!(trace.selected_vars(), vec![0]);
    }

    #[test]
    fn multiplicative_constant_and_cap() {
        let f = constant(4, 0.7);
        let mut rng = RngStream::new(5).rng();
        let trace = select_multiplicative(&f, 0.01, 0.1, &CriterionCfg::default(), &mut rng).unwrap();
        assert!(trace.selected_vars().is_empty());
        assert_eq!(trace.phase_cap, 2000.0);
    }

    #[test]
    fn multiplicative_rejects_non_monotone() {
        let f = make_family(&FamilySpec::new(2, Family::GraphCut { edges: vec![(0, 1)], weights: None })).unwrap();
        let mut rng = RngStream::new(5).rng();
        assert!(select_multiplicative(&f, 0.1, 0.1, &CriterionCfg::default(), &mut rng).is_err());
    }

    #[test]
    fn multiplicative_junta_constant() {
        let f = constant(3, 0.7);
        let mut rng = RngStream::new(6).rng();
        let model = multiplicative_junta(&f, 0.9, 0.3, &CriterionCfg::default(), &mut rng).unwrap();
        assert!(model.vars.is_empty());
        assert!((model.predict(Point::zero(3)) - 1.3 * 0.7).abs() < TOL);
        assert_eq!(model.provenance.measured_success_prob.unwrap(), 1.0);
    }

    #[test]
    fn multiplicative_junta_or() {
        let f = or2();
        let mut rng = RngStream::new(6).rng();
        let model = multiplicative_junta(&f, 1.0, 0.3, &CriterionCfg::default(), &mut rng).unwrap();
        assert!(model.provenance.measured_success_prob.unwrap() >= 0.7);
    }

    #[test]
    fn multiplicative_region_ratio_bound() {
        // On points inside the per-subcube concentration region the
        // hypothesis stays within factor (1+g/3)/(1-g/3) of f.
        let gamma = 0.5f64;
        let f = make_family(&FamilySpec::new(
            10,
            Family::Coverage {
                sets: (0..10).map(|i| vec![i % 5]).collect(),
                universe_weights: vec![0.2; 5],
            },
        ))
        .unwrap();
        let mut rng = RngStream::new(66).rng();
        let model = multiplicative_junta(&f, gamma, 0.25, &CriterionCfg::default(), &mut rng).unwrap();
        let ratio = (1.0 + gamma / 3.0) / (1.0 - gamma / 3.0);
        for x in Point::all(10) {
            let fx = f.eval(x);
            let cell_mean = model.table[model.cell_index(x)];
            let in_region =
                fx >= (1.0 - gamma / 3.0) * cell_mean - TOL && fx <= (1.0 + gamma / 3.0) * cell_mean + TOL;
            if in_region && fx > 0.0 {
                let hx = model.predict(x);
                assert!(hx >= fx - TOL);
                assert!(hx <= ratio * fx + TOL, "ratio exceeded at {x:?}: {hx} vs {fx}");
            }
        }
    }

    #[test]
    fn multiplicative_junta_matroid_16() {
        let f = make_family(&FamilySpec::new(
            16,
            Family::MatroidRank {
                blocks: vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7, 8]],
                caps: vec![2, 3],
                normalize: true,
            },
        ))
        .unwrap();
        let mut rng = RngStream::new(6).rng();
        let model = multiplicative_junta(&f, 0.5, 0.2, &CriterionCfg::default(), &mut rng).unwrap();
        assert!(model.provenance.measured_success_prob.unwrap() >= 0.8);
    }

    #[test]
    fn product_selection_budget_additive() {
        // p0 = 1 - (1/2)^{2/s} with s = 4 active variables.
        let s = 4usize;
        let p0 = 1.0 - 0.5f64.powf(2.0 / s as f64);
        let f = make_family(&FamilySpec::new(8, Family::BudgetAdditive { active: vec![0, 2, 4, 6] })).unwrap();
        let dist = ProductDist::new(vec![p0; 8]).unwrap();
        let eps: f64 = 0.7;
        let alpha = eps * eps / 16.0;
        let eta = 1.0 / (16.0 * 8.0 / (eps * eps)).log2();
        let mut rng = RngStream::new(7).rng();
        let trace = select_product(&f, &dist, alpha, eta, &CriterionCfg::default(), &mut rng).unwrap();
        let picked = trace.selected_vars();
        let active_picked = picked.iter().filter(|v| [0, 2, 4, 6].contains(v)).count();
        assert!(active_picked >= s / 2, "picked {picked:?}");
        assert!(picked.len() as f64 <= 4.0 / (dist.p0() * alpha * eta) + 1e-12);
    }

    #[test]
    fn product_cap_formula() {
        let f = constant(4, 0.0);
        let dist = ProductDist::new(vec![0.25; 4]).unwrap();
        let mut rng = RngStream::new(7).rng();
        let trace = select_product(&f, &dist, 0.1, 0.25, &CriterionCfg::default(), &mut rng).unwrap();
        assert_eq!(trace.phase_cap, 320.0);
        assert_eq!(2.0 * trace.phase_cap, 640.0);
    }

    #[test]
    fn pseudo_boolean_disjunction_recovered() {
        let f = make_family(&FamilySpec::new(8, Family::PseudoBoolean { k: 1, active: vec![1, 5] })).unwrap();
        let mut rng = RngStream::new(8).rng();
        let model = pseudo_boolean_junta(&f, 1, 0.1, &CriterionCfg::default(), &mut rng).unwrap();
        assert_eq!(model.vars, vec![1, 5]);
        assert_eq!(model.provenance.measured_disagreement.unwrap(), 0.0);
    }

    #[test]
    fn pseudo_boolean_constant_zero() {
        let f = constant(4, 0.0);
        let mut rng = RngStream::new(8).rng();
        let model = pseudo_boolean_junta(&f, 2, 0.2, &CriterionCfg::default(), &mut rng).unwrap();
        assert!(model.vars.is_empty());
        assert_eq!(model.provenance.measured_disagreement.unwrap(), 0.0);
    }

    #[test]
    fn pseudo_boolean_rank2_matroid() {
        let f = make_family(&FamilySpec::new(
            12,
            Family::MatroidRank { blocks: vec![vec![0, 3], vec![6, 9]], caps: vec![1, 1], normalize: true },
        ))
        .unwrap();
        let mut rng = RngStream::new(8).rng();
        let model = pseudo_boolean_junta(&f, 2, 0.2, &CriterionCfg::default(), &mut rng).unwrap();
        assert!(model.provenance.measured_disagreement.unwrap() <= 0.2);
        // Values stay on the grid.
        for v in &model.table {
            let scaled = v * 2.0;
            assert!((scaled - scaled.round()).abs() < TOL);
        }
    }

    #[test]
    fn pseudo_boolean_off_grid_rejected() {
        let f = constant(3, 0.37);
        let mut rng = RngStream::new(8).rng();
        assert!(matches!(
            pseudo_boolean_junta(&f, 2, 0.2, &CriterionCfg::default(), &mut rng),
            Err(Error::ValuesOffGrid { .. })
        ));
    }

    #[test]
    fn excluded_fraction_bound_on_coverage() {
        let sets: Vec<Vec<usize>> = (0..10).map(|i| vec![i % 5]).collect();
        let f = make_family(&FamilySpec::new(
            10,
            Family::Coverage { sets, universe_weights: vec![0.2; 5] },
        ))
        .unwrap();
        let eps = 0.6f64;
        let alpha = eps * eps / 16.0;
        let delta = 1.0 / (2.0 * log2c(16.0 * 10.0 / (eps * eps)));
        let mut rng = RngStream::new(9).rng();
        let trace = select_additive(&f, alpha, delta, &CriterionCfg::default(), &mut rng).unwrap();
        let vars = trace.selected_vars();
        let bound = 2f64.powf(-1.0 / (2.0 * delta));
        for (_, bottom, top) in excluded_bad_fractions(&f, &vars, alpha).unwrap() {
            assert!(bottom <= bound + TOL && top <= bound + TOL);
        }
    }

    #[test]
    fn model_json_roundtrip() {
        let f = or2();
        let mut rng = RngStream::new(2).rng();
        let model = reduce_once(&f, 0.5, &CriterionCfg::default(), &mut rng).unwrap();
        let s = serde_json::to_string(&model).unwrap();
        let back: JuntaModel = serde_json::from_str(&s).unwrap();
        assert_eq!(model, back);
    }
}
