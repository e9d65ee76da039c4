//! End-to-end learners: proper PAC via subset enumeration and the
//! submodular LP, the recursive PMAC reduction, low-influence least
//! squares regression, and agnostic l1 learning.
//!
//! The worst-case theoretical sample counts are impractical to
//! instantiate verbatim at desk scale, so every learner takes a config
//! whose `Option` fields default to the derived formulas and can be
//! overridden with explicit budgets; overrides skip the corresponding
//! statistical gates.

use serde::{Deserialize, Serialize};

use crate::detect;
use crate::estim::{sample_size, ProductDist, Prng, SampleSet, SampleSource};
use crate::junta::{JuntaModel, Provenance};
use crate::lpcore;
use crate::setfn::{Point, SetFunction};
use crate::{Error, Result, TOL};

/// A source of labeled random examples.
pub trait ExampleOracle {
    fn n(&self) -> usize;
    fn draw(&mut self, rng: &mut Prng) -> Result<(Point, f64)>;
}

/// Uniform (or product) examples of a concrete function.
pub struct FunctionOracle {
    f: SetFunction,
    dist: ProductDist,
}

impl FunctionOracle {
    pub fn uniform(f: &SetFunction) -> Self {
        FunctionOracle { f: f.clone(), dist: ProductDist::uniform(f.n()) }
    }

    pub fn new(f: &SetFunction, dist: ProductDist) -> Result<Self> {
        if f.n() != dist.n() {
            return Err(Error::DimensionMismatch(f.n(), dist.n()));
        }
        Ok(FunctionOracle { f: f.clone(), dist })
    }
}

impl ExampleOracle for FunctionOracle {
    fn n(&self) -> usize {
        self.dist.n()
    }

    fn draw(&mut self, rng: &mut Prng) -> Result<(Point, f64)> {
        let x = crate::estim::draw_point(&self.dist, rng);
        Ok((x, self.f.eval(x)))
    }
}

fn draw_sample_set(
    oracle: &mut dyn ExampleOracle,
    m: usize,
    rng: &mut Prng,
) -> Result<SampleSet> {
    let mut samples = Vec::with_capacity(m);
    for _ in 0..m {
        samples.push(oracle.draw(rng)?);
    }
    SampleSet::new(oracle.n(), samples, SampleSource::Uniform)
}

/// Configuration for [`pac_proper`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacConfig {
    /// Junta-size parameter fed to detection; `None` uses the
    /// structural bound `ceil(4000/eps^2 * log(1/eps))` capped by
    /// `t_cap`.
    pub s: Option<usize>,
    /// Subset size enumerated; `None` uses `min(s, t_cap)`.
    pub t: Option<usize>,
    pub t_cap: usize,
    /// Detection sample budget; `None` demands the Hoeffding count.
    pub detect_samples: Option<usize>,
    /// LP sample budget; `None` uses `ceil(8 * 2^t / eps^2 * (t + ln 6))`.
    pub lp_samples: Option<usize>,
    /// Abort if subset enumeration would exceed this many candidates.
    pub subset_cap: usize,
}

impl Default for PacConfig {
    fn default() -> Self {
        PacConfig {
            s: None,
            t: None,
            t_cap: 4,
            detect_samples: None,
            lp_samples: None,
            subset_cap: 100_000,
        }
    }
}

impl PacConfig {
    fn effective_s(&self, eps: f64) -> usize {
        self.s.unwrap_or_else(|| {
            let theory = (4000.0 / (eps * eps) * (1.0 / eps).log2().max(1.0)).ceil() as usize;
            theory.min(self.t_cap.max(1) * 1000)
        })
    }

    fn effective_t(&self, s: usize) -> usize {
        self.t.unwrap_or_else(|| s.min(self.t_cap)).min(12)
    }

    pub fn lp_sample_count(&self, t: usize, eps: f64) -> usize {
        self.lp_samples.unwrap_or_else(|| {
            (8.0 * (1u64 << t) as f64 / (eps * eps) * (t as f64 + 6f64.ln())).ceil() as usize
        })
    }
}

/// Result of one proper-PAC run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PacOutcome {
    pub model: JuntaModel,
    pub vars: Vec<usize>,
    /// Whether some subset's LP hypothesis met the acceptance
    /// threshold `3 eps/4`; `false` means the zero fallback.
    pub accepted: bool,
    pub empirical_error: f64,
    pub detected: Vec<usize>,
}

fn subsets_of_size(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let n = items.len();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        // Advance the combination lexicographically.
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if idx[pos] != pos + n - k {
                idx[pos] += 1;
                for j in pos + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return out;
            }
        }
        if k == 0 {
            return out;
        }
    }
}

/// Lower bound on any table hypothesis' empirical l1 error for the
/// given subset: cell-wise medians without the submodularity
/// constraints.
fn cellwise_lower_bound(samples: &SampleSet, vars: &[usize]) -> f64 {
    let cells = 1usize << vars.len();
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); cells];
    for (x, l) in samples.samples() {
        let mut z = 0usize;
        for (k, &v) in vars.iter().enumerate() {
            if x.get(v) {
                z |= 1 << k;
            }
        }
        buckets[z].push(*l);
    }
    let mut total = 0.0;
    for labels in &mut buckets {
        if labels.is_empty() {
            continue;
        }
        labels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = labels[(labels.len() - 1) / 2];
        total += labels.iter().map(|l| (l - med).abs()).sum::<f64>();
    }
    total / samples.len().max(1) as f64
}

fn empirical_l1(samples: &SampleSet, predict: impl Fn(Point) -> f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.samples().iter().map(|(x, l)| (predict(*x) - l).abs()).sum::<f64>()
        / samples.len() as f64
}

/// Proper PAC learning of a submodular target: detect candidate
/// variables from degree-1/2 coefficients, then for each size-`t`
/// subset solve the submodular-constrained l1 LP and accept the first
/// hypothesis with empirical error at most `3 eps / 4`. Falls back to
/// the zero model when no subset passes.
pub fn pac_proper(
    oracle: &mut dyn ExampleOracle,
    eps: f64,
    cfg: &PacConfig,
    rng: &mut Prng,
) -> Result<PacOutcome> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::BadParameter(format!("eps = {eps} outside (0,1)")));
    }
    let n = oracle.n();
    let s = cfg.effective_s(eps);
    let t = cfg.effective_t(s);

    let detection = match cfg.detect_samples {
        Some(m) => {
            let samples = draw_sample_set(oracle, m, rng)?;
            detect::find_influential_ungated(&samples, s, eps)?
        }
        None => {
            let targets = n + n * (n - 1) / 2;
            let required = sample_size(2.0, eps / (32.0 * (s * s) as f64), (1.0 / 6.0) / targets as f64);
            let samples = draw_sample_set(oracle, required, rng)?;
            detect::find_influential(&samples, s, eps)?
        }
    };
    let candidates = detection.vars.clone();

    let m = cfg.lp_sample_count(t, eps);
    let samples = draw_sample_set(oracle, m, rng)?;
    let threshold = 3.0 * eps / 4.0;

    let t_eff = t.min(candidates.len());
    let subsets = subsets_of_size(&candidates, t_eff);
    if subsets.len() > cfg.subset_cap {
        return Err(Error::ConfigCap(format!(
            "{} candidate subsets exceed cap {}",
            subsets.len(),
            cfg.subset_cap
        )));
    }
    for vars in &subsets {
        if cellwise_lower_bound(&samples, vars) > threshold + TOL {
            continue;
        }
        let lp = lpcore::build_proper_lp(&samples, vars)?;
        let sol = lpcore::solve(&lp)?;
        if sol.status != lpcore::LpStatus::Optimal {
            continue;
        }
        if sol.objective <= threshold + TOL {
            lpcore::check_solution(&lp, &sol.assignment)?;
            let table = lpcore::table_from_solution(&lp, &sol, vars.len());
            let model = JuntaModel {
                vars: vars.clone(),
                table,
                scale: 1.0,
                provenance: Provenance {
                    algorithm: "pac_proper".into(),
                    eps: Some(eps),
                    ..Default::default()
                },
            };
            return Ok(PacOutcome {
                vars: vars.clone(),
                accepted: true,
                empirical_error: sol.objective,
                detected: candidates,
                model,
            });
        }
    }
    let zero = JuntaModel::constant(
        0.0,
        Provenance { algorithm: "pac_proper".into(), eps: Some(eps), ..Default::default() },
    );
    let err = empirical_l1(&samples, |x| zero.predict(x));
    Ok(PacOutcome { model: zero, vars: Vec::new(), accepted: false, empirical_error: err, detected: candidates })
}

/// Structural flags appropriate for a proper-LP hypothesis.
pub fn proper_hypothesis_flags() -> crate::setfn::StructuralFlags {
    crate::setfn::StructuralFlags {
        claims_monotone: false,
        claims_submodular: true,
        claims_nonnegative: true,
        claims_xos: false,
    }
}

/// One node of a recursive PMAC hypothesis. Internal nodes split on a
/// junta's variables; every child map is total over the `2^|J|`
/// assignments, with unvisited assignments holding the zero leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PmacNode {
    Leaf { value: f64 },
    Internal { vars: Vec<usize>, children: Vec<PmacNode> },
}

impl PmacNode {
    fn depth(&self) -> usize {
        match self {
            PmacNode::Leaf { .. } => 0,
            PmacNode::Internal { children, .. } => {
                1 + children.iter().map(PmacNode::depth).max().unwrap_or(0)
            }
        }
    }

    fn count(&self) -> usize {
        match self {
            PmacNode::Leaf { .. } => 1,
            PmacNode::Internal { children, .. } => {
                1 + children.iter().map(PmacNode::count).sum::<usize>()
            }
        }
    }
}

/// Recursive PMAC hypothesis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmacTree {
    pub root: PmacNode,
    pub depth_cap: usize,
    pub node_count: usize,
    /// Set when the node budget or a filtering cap forced zero leaves.
    pub budget_hit: bool,
    pub gamma: f64,
    pub eps: f64,
}

impl PmacTree {
    pub fn predict(&self, x: Point) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                PmacNode::Leaf { value } => return *value,
                PmacNode::Internal { vars, children } => {
                    let mut z = 0usize;
                    for (k, &v) in vars.iter().enumerate() {
                        if x.get(v) {
                            z |= 1 << k;
                        }
                    }
                    node = &children[z];
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }
}

/// Configuration for [`pmac`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmacConfig {
    /// Maximum number of tree nodes.
    pub budget: usize,
    /// Per-node samples for the mean estimate; `None` derives the
    /// count from the 6/5-factor Hoeffding bound at `delta = 1/(9 budget)`.
    pub mean_samples: Option<usize>,
    /// Per-cell samples for the conditional error estimate.
    pub cond_samples: usize,
    /// Cap on rejected draws when filtering conditional examples.
    pub filter_attempts: usize,
    /// Inner l1 learner accuracy; `None` uses `gamma * eps / 2400`.
    pub inner_eps: Option<f64>,
    pub inner: PacConfig,
    /// Swap the inner learner for low-influence regression (XOS mode).
    pub xos_mode: bool,
    pub xos: LowInflConfig,
}

impl Default for PmacConfig {
    fn default() -> Self {
        PmacConfig {
            budget: 4096,
            mean_samples: None,
            cond_samples: 2000,
            filter_attempts: 400_000,
            inner_eps: None,
            inner: PacConfig {
                s: Some(4),
                t: None,
                t_cap: 4,
                detect_samples: Some(50_000),
                lp_samples: Some(16_000),
                subset_cap: 4096,
            },
            xos_mode: false,
            xos: LowInflConfig::default(),
        }
    }
}

struct Condition {
    vars: Vec<usize>,
    bits: u64,
}

impl Condition {
    fn matches(&self, x: Point) -> bool {
        self.vars.iter().enumerate().all(|(k, &v)| x.get(v) == (self.bits >> k & 1 == 1))
    }

    fn free(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|i| !self.vars.contains(i)).collect()
    }
}

/// Conditional oracle: filters the root oracle to a subcube, re-indexes
/// points to the free coordinates, and scales labels into `[0,1]`.
struct CondOracle<'a> {
    root: &'a mut dyn ExampleOracle,
    cond: &'a Condition,
    free: Vec<usize>,
    label_scale: f64,
    attempts: usize,
}

impl ExampleOracle for CondOracle<'_> {
    fn n(&self) -> usize {
        self.free.len()
    }

    fn draw(&mut self, rng: &mut Prng) -> Result<(Point, f64)> {
        for _ in 0..self.attempts {
            let (x, l) = self.root.draw(rng)?;
            if self.cond.matches(x) {
                let mut bits = 0u64;
                for (k, &v) in self.free.iter().enumerate() {
                    if x.get(v) {
                        bits |= 1 << k;
                    }
                }
                let label = (l * self.label_scale).clamp(0.0, 1.0);
                return Ok((Point::new(bits, self.free.len())?, label));
            }
        }
        Err(Error::FilterExhausted { attempts: self.attempts })
    }
}

enum InnerHypothesis {
    Junta(JuntaModel),
    Poly(PolynomialModel),
}

impl InnerHypothesis {
    fn vars(&self) -> Vec<usize> {
        match self {
            InnerHypothesis::Junta(m) => m.vars.clone(),
            InnerHypothesis::Poly(p) => p.support.clone(),
        }
    }

    /// Value on the cell where the hypothesis' variables are assigned
    /// `z` (the hypothesis depends on nothing else).
    fn cell_value(&self, local_n: usize, vars: &[usize], z: u64) -> f64 {
        let mut bits = 0u64;
        for (k, &v) in vars.iter().enumerate() {
            if z >> k & 1 == 1 {
                bits |= 1 << v;
            }
        }
        let x = Point::new(bits, local_n.max(1)).expect("cell assignment fits");
        match self {
            InnerHypothesis::Junta(m) => m.predict(x),
            InnerHypothesis::Poly(p) => p.predict(x),
        }
    }
}

struct PmacRunner<'a> {
    oracle: &'a mut dyn ExampleOracle,
    cfg: &'a PmacConfig,
    gamma: f64,
    eps_inner: f64,
    depth_cap: usize,
    mean_samples: usize,
    nodes_left: usize,
    budget_hit: bool,
}

impl PmacRunner<'_> {
    fn take_node(&mut self) -> bool {
        if self.nodes_left == 0 {
            self.budget_hit = true;
            return false;
        }
        self.nodes_left -= 1;
        true
    }

    fn zero_leaf(&mut self) -> PmacNode {
        // Budget accounting already happened in take_node callers.
        PmacNode::Leaf { value: 0.0 }
    }

    /// Mean of `count` labels drawn on the subcube, or `None` when
    /// filtering exhausts its attempt budget.
    fn conditional_label_mean(
        &mut self,
        cond: &Condition,
        count: usize,
        rng: &mut Prng,
    ) -> Result<Option<f64>> {
        let mut acc = 0.0;
        let mut left = self.cfg.filter_attempts;
        for _ in 0..count {
            loop {
                if left == 0 {
                    return Ok(None);
                }
                left -= 1;
                let (x, l) = self.oracle.draw(rng)?;
                if cond.matches(x) {
                    acc += l;
                    break;
                }
            }
        }
        Ok(Some(acc / count as f64))
    }

    /// Mean of `|target - clamp(scale * label)|` on the subcube.
    fn conditional_abs_error(
        &mut self,
        cond: &Condition,
        target: f64,
        scale: f64,
        count: usize,
        rng: &mut Prng,
    ) -> Result<Option<f64>> {
        let mut acc = 0.0;
        let mut left = self.cfg.filter_attempts;
        for _ in 0..count {
            loop {
                if left == 0 {
                    return Ok(None);
                }
                left -= 1;
                let (x, l) = self.oracle.draw(rng)?;
                if cond.matches(x) {
                    acc += (target - (l * scale).clamp(0.0, 1.0)).abs();
                    break;
                }
            }
        }
        Ok(Some(acc / count as f64))
    }

    fn build(&mut self, cond: &Condition, k: usize, rng: &mut Prng) -> Result<PmacNode> {
        if !self.take_node() {
            return Ok(PmacNode::Leaf { value: 0.0 });
        }
        if k >= self.depth_cap {
            return Ok(self.zero_leaf());
        }
        let n = self.oracle.n();
        let free = cond.free(n);
        if free.is_empty() {
            // Fully pinned subcube: one point, so its (noise-free)
            // label is the value itself.
            return match self.conditional_label_mean(cond, self.cfg.cond_samples.min(64).max(1), rng)? {
                Some(v) => Ok(PmacNode::Leaf { value: (1.0 + self.gamma / 60.0) * v }),
                None => {
                    self.budget_hit = true;
                    Ok(self.zero_leaf())
                }
            };
        }

        // Mean estimate with a 6/5 multiplicative guarantee:
        // |mean - E| <= E/11 whp gives E <= mu <= (6/5) E for
        // mu = (11/10) mean.
        let mean = match self.conditional_label_mean(cond, self.mean_samples, rng)? {
            Some(m) => m,
            None => {
                self.budget_hit = true;
                return Ok(self.zero_leaf());
            }
        };
        if mean == 0.0 {
            return Ok(self.zero_leaf());
        }
        let mu = mean * 1.1;
        let scale = 1.0 / (4.0 * mu);

        // Inner l1 learner on f' = f / (4 mu).
        let hypothesis = {
            let mut inner_oracle = CondOracle {
                root: self.oracle,
                cond,
                free: free.clone(),
                label_scale: scale,
                attempts: self.cfg.filter_attempts,
            };
            if self.cfg.xos_mode {
                match low_influence_regression(&mut inner_oracle, 1.0, self.eps_inner, &self.cfg.xos, rng) {
                    Ok(p) => InnerHypothesis::Poly(p),
                    Err(Error::FilterExhausted { .. }) => {
                        self.budget_hit = true;
                        return Ok(self.zero_leaf());
                    }
                    Err(e) => return Err(e),
                }
            } else {
                match pac_proper(&mut inner_oracle, self.eps_inner.min(0.999), &self.cfg.inner, rng) {
                    Ok(out) => InnerHypothesis::Junta(out.model),
                    Err(Error::FilterExhausted { .. }) => {
                        self.budget_hit = true;
                        return Ok(self.zero_leaf());
                    }
                    Err(e) => return Err(e),
                }
            }
        };

        let local_vars = hypothesis.vars();
        let split_vars: Vec<usize> = local_vars.iter().map(|&j| free[j]).collect();
        let cells = 1usize << split_vars.len();
        let local_n = free.len();

        let mut children = Vec::with_capacity(cells);
        for z in 0..cells as u64 {
            let g_z = hypothesis.cell_value(local_n, &local_vars, z);
            let mut child_cond_vars = cond.vars.clone();
            let mut child_bits = cond.bits;
            for (kk, &v) in split_vars.iter().enumerate() {
                if z >> kk & 1 == 1 {
                    child_bits |= 1 << child_cond_vars.len();
                }
                child_cond_vars.push(v);
            }
            let child_cond = Condition { vars: child_cond_vars, bits: child_bits };

            let mut good = false;
            if g_z >= 1.0 / 20.0 {
                // Estimate E|g(z) - f'| on the child subcube to eps'/2.
                match self.conditional_abs_error(&child_cond, g_z, scale, self.cfg.cond_samples, rng)? {
                    Some(est) => good = est <= 20.0 * self.eps_inner,
                    None => self.budget_hit = true,
                }
            }
            let child = if good {
                if self.take_node() {
                    PmacNode::Leaf { value: (4.0 * mu) * (1.0 + self.gamma / 60.0) * g_z }
                } else {
                    PmacNode::Leaf { value: 0.0 }
                }
            } else if split_vars.is_empty() {
                // Nothing split; a failed condition on the whole cube
                // deepens the recursion on the same subcube.
                return self.build_deeper(cond, k + 1, rng);
            } else {
                self.build(&child_cond, k + 1, rng)?
            };
            children.push(child);
        }
        if split_vars.is_empty() {
            // All-good single cell: the lone child stands in for this node.
            return Ok(children.pop().expect("one cell"));
        }
        Ok(PmacNode::Internal { vars: split_vars, children })
    }

    fn build_deeper(&mut self, cond: &Condition, k: usize, rng: &mut Prng) -> Result<PmacNode> {
        self.build(cond, k, rng)
    }
}

/// PMAC learning of a nonnegative submodular target from random
/// examples: estimate the mean, rescale, learn an l1 hypothesis `g`,
/// keep subcubes where `g` is accurate as constant leaves scaled by
/// `(4 mu)(1 + gamma/60)`, and recurse on the rest up to depth
/// `ceil(10 log(1/eps))` within the node budget.
pub fn pmac(
    oracle: &mut dyn ExampleOracle,
    gamma: f64,
    eps: f64,
    cfg: &PmacConfig,
    rng: &mut Prng,
) -> Result<PmacTree> {
    if !(gamma > 0.0 && gamma <= 1.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::BadParameter(format!("gamma = {gamma}, eps = {eps} out of range")));
    }
    let depth_cap = (10.0 * (1.0 / eps).log2()).ceil() as usize;
    let delta = 1.0 / (9.0 * cfg.budget.max(1) as f64);
    let mean_samples = cfg.mean_samples.unwrap_or_else(|| (968.0 * (2.0 / delta).ln()).ceil() as usize);
    let eps_inner = cfg.inner_eps.unwrap_or(gamma * eps / 2400.0);
    let mut runner = PmacRunner {
        oracle,
        cfg,
        gamma,
        eps_inner,
        depth_cap,
        mean_samples,
        nodes_left: cfg.budget.max(1),
        budget_hit: false,
    };
    let root = runner.build(&Condition { vars: Vec::new(), bits: 0 }, 0, rng)?;
    let node_count = root.count();
    debug_assert!(root.depth() <= depth_cap);
    Ok(PmacTree { root, depth_cap, node_count, budget_hit: runner.budget_hit, gamma, eps })
}

/// Exhaustive `Pr[f(x) <= h(x) <= (1 + gamma) f(x)]` for `n <= 20`.
pub fn pmac_success(f: &SetFunction, tree: &PmacTree, gamma: f64) -> Result<f64> {
    let n = f.n();
    if n > 20 {
        return Err(Error::DimensionTooLarge { op: "pmac_success", n, cap: 20 });
    }
    let mut good = 0u64;
    for x in Point::all(n) {
        let fx = f.eval(x);
        let hx = tree.predict(x);
        if fx <= hx + TOL && hx <= (1.0 + gamma) * fx + TOL {
            good += 1;
        }
    }
    Ok(good as f64 / (1u64 << n) as f64)
}

/// One parity term of a polynomial hypothesis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub mask: u64,
    pub coef: f64,
}

/// A low-degree polynomial over parities supported on a variable set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialModel {
    pub terms: Vec<Term>,
    pub support: Vec<usize>,
    pub degree: usize,
}

impl PolynomialModel {
    pub fn predict(&self, x: Point) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                if (t.mask & x.bits()).count_ones() % 2 == 0 {
                    t.coef
                } else {
                    -t.coef
                }
            })
            .sum()
    }

    pub fn spectral_l1(&self) -> f64 {
        self.terms.iter().map(|t| t.coef.abs()).sum()
    }

    pub fn to_set_function(&self, n: usize) -> Result<SetFunction> {
        let model = self.clone();
        let l1 = self.spectral_l1();
        SetFunction::from_fn(n, Default::default(), (-l1, l1), move |x| model.predict(x))
    }
}

/// Configuration for [`low_influence_regression`] and [`agnostic_l1`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowInflConfig {
    /// Detection sample budget; `None` demands the Hoeffding count for
    /// the theoretical threshold.
    pub detect_samples: Option<usize>,
    /// Overrides the degree-1 detection threshold `alpha/2`; the
    /// caller then owns the statistical budget.
    pub detect_threshold: Option<f64>,
    pub degree_cap: usize,
    pub parity_cap: usize,
    /// Regression sample budget; `None` uses
    /// `ceil(8 (parities + ln 6) / eps^2)`.
    pub reg_samples: Option<usize>,
    /// Use every variable (skip detection) when `n` is at most this.
    pub small_n: usize,
}

impl Default for LowInflConfig {
    fn default() -> Self {
        LowInflConfig {
            detect_samples: Some(50_000),
            detect_threshold: Some(0.01),
            degree_cap: 8,
            parity_cap: 2048,
            reg_samples: None,
            small_n: 6,
        }
    }
}

fn parities_up_to_degree(vars: &[usize], d: usize) -> Vec<u64> {
    let mut out = Vec::new();
    let k = vars.len();
    for choice in 0u64..1 << k {
        if choice.count_ones() as usize > d {
            continue;
        }
        let mut mask = 0u64;
        for (i, &v) in vars.iter().enumerate() {
            if choice >> i & 1 == 1 {
                mask |= 1 << v;
            }
        }
        out.push(mask);
    }
    out.sort_unstable();
    out
}

fn solve_normal_equations(gram: &mut [Vec<f64>], rhs: &mut [f64]) -> Result<Vec<f64>> {
    let p = rhs.len();
    for c in &mut *gram {
        debug_assert_eq!(c.len(), p);
    }
    for i in 0..p {
        gram[i][i] += 1e-10;
    }
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&a, &b| gram[a][col].abs().partial_cmp(&gram[b][col].abs()).unwrap())
            .unwrap();
        if gram[piv][col].abs() < 1e-12 {
            return Err(Error::BadParameter("singular normal equations".into()));
        }
        gram.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..p {
            if r != col {
                let fac = gram[r][col] / gram[col][col];
                if fac != 0.0 {
                    for k in col..p {
                        gram[r][k] -= fac * gram[col][k];
                    }
                    rhs[r] -= fac * rhs[col];
                }
            }
        }
    }
    Ok((0..p).map(|i| rhs[i] / gram[i][i]).collect())
}

/// Least-squares regression over all parities of degree at most
/// `d = 2a/eps^2` on the variables detected from degree-1
/// coefficients. For unate targets with total l1-influence at most `a`
/// this recovers an eps-accurate l2 hypothesis.
pub fn low_influence_regression(
    oracle: &mut dyn ExampleOracle,
    a: f64,
    eps: f64,
    cfg: &LowInflConfig,
    rng: &mut Prng,
) -> Result<PolynomialModel> {
    if !(a > 0.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::BadParameter(format!("a = {a}, eps = {eps}")));
    }
    let n = oracle.n();
    let d_real = 2.0 * a / (eps * eps);

    let support = if n <= cfg.small_n {
        (0..n).collect::<Vec<usize>>()
    } else {
        let alpha = 2f64.powf(-4.0 * d_real);
        let threshold = cfg.detect_threshold.unwrap_or(alpha / 2.0);
        let accuracy = if cfg.detect_threshold.is_some() { None } else { Some(alpha / 4.0) };
        let m = cfg.detect_samples.unwrap_or_else(|| {
            sample_size(2.0, accuracy.unwrap_or(threshold / 2.0), (1.0 / 6.0) / n as f64)
        });
        let samples = draw_sample_set(oracle, m, rng)?;
        detect::detect_deg1(&samples, threshold, accuracy)?.vars
    };

    let d = (d_real.ceil() as usize).min(cfg.degree_cap).min(support.len().max(1));
    let mut count: u128 = 0;
    for j in 0..=d.min(support.len()) {
        count += binomial(support.len(), j);
    }
    if count > cfg.parity_cap as u128 {
        return Err(Error::ConfigCap(format!(
            "{count} parities exceed cap {}; raise parity_cap or lower the degree",
            cfg.parity_cap
        )));
    }
    let parities = parities_up_to_degree(&support, d);
    let p = parities.len();

    let m = cfg
        .reg_samples
        .unwrap_or_else(|| ((8.0 * (p as f64 + 6f64.ln())) / (eps * eps)).ceil() as usize);
    let samples = draw_sample_set(oracle, m, rng)?;

    let mut gram = vec![vec![0.0f64; p]; p];
    let mut rhs = vec![0.0f64; p];
    let mut feat = vec![0.0f64; p];
    for (x, l) in samples.samples() {
        for (k, &mask) in parities.iter().enumerate() {
            feat[k] = if (mask & x.bits()).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        }
        for i in 0..p {
            rhs[i] += l * feat[i];
            for j in i..p {
                gram[i][j] += feat[i] * feat[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[i][j] = gram[j][i];
        }
    }
    let w = solve_normal_equations(&mut gram, &mut rhs)?;
    let terms = parities
        .iter()
        .zip(&w)
        .filter(|(_, c)| c.abs() > 1e-12)
        .map(|(&mask, &coef)| Term { mask, coef })
        .collect();
    Ok(PolynomialModel { terms, support, degree: d })
}

/// Configuration for [`agnostic_l1`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgnosticConfig {
    pub degree_cap: usize,
    pub parity_cap: usize,
    /// Use every variable when `n` is at most this; otherwise detect
    /// via degree-1/2 thresholding with this junta-size parameter.
    pub small_n: usize,
    pub s: usize,
}

impl Default for AgnosticConfig {
    fn default() -> Self {
        // Dense-LP tractability bounds the parity count well below the
        // theoretical degree; raise the caps explicitly for bigger
        // fits.
        AgnosticConfig { degree_cap: 4, parity_cap: 512, small_n: 10, s: 4 }
    }
}

/// Agnostic l1 learning: l1 regression over low-degree parities with
/// the spectral-l1 ball constraint `W`. The returned polynomial's
/// empirical error is within LP optimality of the best W-ball
/// polynomial on the same samples.
pub fn agnostic_l1(
    samples: &SampleSet,
    a: f64,
    eps: f64,
    w_cap: f64,
    cfg: &AgnosticConfig,
) -> Result<PolynomialModel> {
    if !(a > 0.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::BadParameter(format!("a = {a}, eps = {eps}")));
    }
    let n = samples.n();
    let support = if n <= cfg.small_n {
        (0..n).collect::<Vec<usize>>()
    } else {
        detect::find_influential_ungated(samples, cfg.s, eps)?.vars
    };
    let d = ((2.0 * a / (eps * eps)).ceil() as usize).min(cfg.degree_cap).min(support.len().max(1));
    let mut count: u128 = 0;
    for j in 0..=d.min(support.len()) {
        count += binomial(support.len(), j);
    }
    if count > cfg.parity_cap as u128 {
        return Err(Error::ConfigCap(format!("{count} parities exceed cap {}", cfg.parity_cap)));
    }
    let parities = parities_up_to_degree(&support, d);
    let lp = lpcore::build_sparse_l1_lp(samples, &parities, w_cap)?;
    let sol = lpcore::solve(&lp)?;
    if sol.status != lpcore::LpStatus::Optimal {
        return Err(Error::Lp(format!("sparse l1 LP ended with {:?}", sol.status)));
    }
    lpcore::check_solution(&lp, &sol.assignment)?;
    let terms = lpcore::coefficients_from_solution(&lp, &sol)
        .into_iter()
        .filter(|(_, c)| c.abs() > 1e-12)
        .map(|(mask, coef)| Term { mask, coef })
        .collect();
    Ok(PolynomialModel { terms, support, degree: d })
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut num: u128 = 1;
    for i in 0..k {
        num = num * (n - i) as u128 / (i + 1) as u128;
    }
    num
}

/// Any learned hypothesis, for uniform prediction and serialization.
/// Serialization is untagged: each kind keeps its own JSON schema and
/// deserialization disambiguates by shape (the field sets are
/// disjoint).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Model {
    Junta(JuntaModel),
    Pmac(PmacTree),
    Polynomial(PolynomialModel),
}

/// Deterministic prediction for any model kind.
pub fn predict(model: &Model, x: Point) -> f64 {
    match model {
        Model::Junta(m) => m.predict(x),
        Model::Pmac(t) => t.predict(x),
        Model::Polynomial(p) => p.predict(x),
    }
}
