//! Exact Fourier/Walsh analysis for small dimensions.
//!
//! The basis convention is `chi_S(x) = (-1)^{sum_{i in S} x_i}` on
//! `{0,1}^n`, so the transform is a scaled Walsh-Hadamard butterfly
//! over the value table in mask order. Exhaustive routines are capped
//! at `n <= 24` (`n <= 12` for the brute-force optimal-junta oracle).

use serde::{Deserialize, Serialize};

use crate::setfn::{Point, SetFunction, StructuralFlags};
use crate::{Error, Result, TOL};

/// Dense table of Fourier coefficients, indexed by subset mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierTable {
    pub n: usize,
    /// `coeffs[S]` is the coefficient of `chi_S`, in mask order.
    pub coeffs: Vec<f64>,
}

fn wht_in_place(v: &mut [f64]) {
    let len = v.len();
    let mut h = 1;
    while h < len {
        let mut i = 0;
        while i < len {
            for j in i..i + h {
                let (x, y) = (v[j], v[j + h]);
                v[j] = x + y;
                v[j + h] = x - y;
            }
            i += 2 * h;
        }
        h *= 2;
    }
}

impl FourierTable {
    pub fn coeff(&self, mask: u64) -> f64 {
        self.coeffs[mask as usize]
    }

    /// `sum_S f_hat(S)^2`, equal to `E[f^2]` by Parseval.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Spectral l1-norm `sum_S |f_hat(S)|`.
    pub fn spectral_l1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    /// Largest `|S|` with a coefficient above tolerance.
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > TOL)
            .map(|(s, _)| (s as u64).count_ones() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Energy on coefficients of degree strictly above `d`.
    pub fn tail_above_degree(&self, d: usize) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(s, _)| (*s as u64).count_ones() as usize > d)
            .map(|(_, c)| c * c)
            .sum()
    }

    /// Evaluates `sum_S f_hat(S) chi_S(x)` at one point.
    pub fn eval(&self, x: Point) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(s, c)| {
                let sign = if (s as u64 & x.bits()).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                c * sign
            })
            .sum()
    }

    /// Inverse transform: reconstructs the value table and wraps it as
    /// a [`SetFunction`] (no structural claims).
    pub fn inverse(&self) -> SetFunction {
        let mut v = self.coeffs.clone();
        wht_in_place(&mut v);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        SetFunction::from_table(self.n, v, StructuralFlags::default(), (lo, hi))
            .expect("table length matches 2^n by construction")
    }
}

/// Exact Fourier transform of `f`; capped at `n <= 24`.
pub fn transform(f: &SetFunction) -> Result<FourierTable> {
    let n = f.n();
    if n > 24 {
        return Err(Error::DimensionTooLarge { op: "transform", n, cap: 24 });
    }
    let mut v = f.value_table()?;
    wht_in_place(&mut v);
    let scale = 1.0 / (1u64 << n) as f64;
    for c in &mut v {
        *c *= scale;
    }
    Ok(FourierTable { n, coeffs: v })
}

/// Transform of an explicit value table in mask order.
pub fn transform_values(n: usize, values: &[f64]) -> Result<FourierTable> {
    if values.len() != 1usize << n {
        return Err(Error::BadParameter(format!("{} values for n = {n}", values.len())));
    }
    let mut v = values.to_vec();
    wht_in_place(&mut v);
    let scale = 1.0 / (1u64 << n) as f64;
    for c in &mut v {
        *c *= scale;
    }
    Ok(FourierTable { n, coeffs: v })
}

/// Per-variable and total l_kappa^kappa-influences,
/// `Infl^k_i(f) = E[|d_i f / 2|^k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    pub per_variable: Vec<f64>,
    pub total: f64,
    pub kappa: f64,
}

pub fn influences(f: &SetFunction, kappa: f64) -> Result<InfluenceReport> {
    let n = f.n();
    if n > 24 {
        return Err(Error::DimensionTooLarge { op: "influences", n, cap: 24 });
    }
    if !(1.0..=2.0).contains(&kappa) {
        return Err(Error::BadParameter(format!("kappa = {kappa} outside [1,2]")));
    }
    let table = f.value_table()?;
    let mut per = vec![0.0; n];
    let full = 1u64 << n;
    for (i, slot) in per.iter_mut().enumerate() {
        let bit = 1u64 << i;
        let mut acc = 0.0;
        let mut x = 0u64;
        while x < full {
            if x & bit == 0 {
                let half = (table[(x | bit) as usize] - table[x as usize]).abs() / 2.0;
                acc += if kappa == 1.0 {
                    half
                } else if kappa == 2.0 {
                    half * half
                } else {
                    half.powf(kappa)
                };
            }
            x += 1;
        }
        // Each unordered pair represents two points of the cube.
        *slot = acc * 2.0 / full as f64;
    }
    let total = per.iter().sum();
    Ok(InfluenceReport { per_variable: per, total, kappa })
}

/// Exact projection `f_I(x) = E_y[f(x_I, y)]` — the l2-closest I-junta
/// to `f`. The result keeps dimension `n` but depends only on `I`.
pub fn projection(f: &SetFunction, vars: &[usize]) -> Result<SetFunction> {
    let n = f.n();
    if n > 24 {
        return Err(Error::DimensionTooLarge { op: "projection", n, cap: 24 });
    }
    let mut seen = 0u64;
    for &v in vars {
        if v >= n {
            return Err(Error::IndexOutOfRange { index: v, n });
        }
        seen |= 1 << v;
    }
    let vars: Vec<usize> = (0..n).filter(|i| seen >> i & 1 == 1).collect();
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
    let flags = f.flags();
    let range = f.range_hint();
    SetFunction::from_fn(n, flags, range, move |x: Point| {
        let mut z = 0usize;
        for (k, &v) in vars.iter().enumerate() {
            if x.get(v) {
                z |= 1 << k;
            }
        }
        sums[z]
    })
}

/// Exact `L_p` distance over the uniform distribution, `p` in `{1, 2}`.
pub fn distance(f: &SetFunction, g: &SetFunction, p: u32) -> Result<f64> {
    if f.n() != g.n() {
        return Err(Error::DimensionMismatch(f.n(), g.n()));
    }
    if f.n() > 24 {
        return Err(Error::DimensionTooLarge { op: "distance", n: f.n(), cap: 24 });
    }
    if p != 1 && p != 2 {
        return Err(Error::BadParameter(format!("p = {p} not in {{1,2}}")));
    }
    let m = (1u64 << f.n()) as f64;
    let mut acc = 0.0;
    for x in Point::all(f.n()) {
        let d = (f.eval(x) - g.eval(x)).abs();
        acc += if p == 1 { d } else { d * d };
    }
    acc /= m;
    Ok(if p == 1 { acc } else { acc.sqrt() })
}

/// Exact variance over the uniform distribution.
pub fn variance(f: &SetFunction) -> Result<f64> {
    if f.n() > 24 {
        return Err(Error::DimensionTooLarge { op: "variance", n: f.n(), cap: 24 });
    }
    let table = f.value_table()?;
    let m = table.len() as f64;
    let mean: f64 = table.iter().sum::<f64>() / m;
    Ok(table.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m)
}

/// Exact `E[|f|]` (the l1-norm) over the uniform distribution.
pub fn norm_l1(f: &SetFunction) -> Result<f64> {
    if f.n() > 24 {
        return Err(Error::DimensionTooLarge { op: "norm_l1", n: f.n(), cap: 24 });
    }
    let table = f.value_table()?;
    Ok(table.iter().map(|v| v.abs()).sum::<f64>() / table.len() as f64)
}

/// Friedgut-style coordinate set: degree cutoff `d`, influence
/// threshold `alpha`, the retained variables `I`, the truncated
/// spectrum supported on `{S subset I, |S| <= d}` and the discarded
/// spectral mass.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FriedgutSet {
    pub d: usize,
    pub alpha: f64,
    pub kappa: f64,
    pub vars: Vec<usize>,
    pub p_coeffs: FourierTable,
    pub tail_mass: f64,
    /// Squared-error budget `eps^2` the tail is measured against.
    pub budget: f64,
}

impl FriedgutSet {
    pub fn success(&self) -> bool {
        self.tail_mass <= self.budget + TOL
    }
}

/// Computes the Friedgut set for the squared-error budget `eps^2`:
/// `d = ceil(2 Infl^2(f)/eps^2)`, `alpha = ((kappa-1)^{d-1} eps^2 /
/// (2 Infl^kappa(f)))^{kappa/(2-kappa)}`, `I = {i : Infl^kappa_i >= alpha}`.
/// The budget splits evenly between the tail by degree and the tail by
/// influence.
pub fn friedgut_set(f: &SetFunction, eps: f64, kappa: f64) -> Result<FriedgutSet> {
    let n = f.n();
    if n > 24 {
        return Err(Error::DimensionTooLarge { op: "friedgut_set", n, cap: 24 });
    }
    if !(eps > 0.0) {
        return Err(Error::BadParameter(format!("eps = {eps} must be positive")));
    }
    if !(kappa > 1.0 && kappa < 2.0) {
        return Err(Error::BadParameter(format!("kappa = {kappa} outside (1,2)")));
    }
    let budget = eps * eps;
    let spectrum = transform(f)?;
    let infl2 = influences(f, 2.0)?;
    let inflk = influences(f, kappa)?;

    let d = ((2.0 * infl2.total / budget).ceil() as usize).max(1);
    let (alpha, vars) = if inflk.total <= TOL {
        (f64::INFINITY, Vec::new())
    } else {
        let base = (kappa - 1.0).powi(d as i32 - 1) * budget / (2.0 * inflk.total);
        let alpha = base.powf(kappa / (2.0 - kappa));
        let vars: Vec<usize> = (0..n).filter(|&i| inflk.per_variable[i] >= alpha).collect();
        (alpha, vars)
    };

    let mut keep_mask = 0u64;
    for &v in &vars {
        keep_mask |= 1 << v;
    }
    let mut p = vec![0.0; spectrum.coeffs.len()];
    let mut tail_mass = 0.0;
    for (s, &c) in spectrum.coeffs.iter().enumerate() {
        let s_mask = s as u64;
        let inside = s_mask & !keep_mask == 0 && s_mask.count_ones() as usize <= d;
        if inside {
            p[s] = c;
        } else {
            tail_mass += c * c;
        }
    }
    Ok(FriedgutSet {
        d,
        alpha,
        kappa,
        vars,
        p_coeffs: FourierTable { n, coeffs: p },
        tail_mass,
        budget,
    })
}

/// Brute-force optimal-junta oracle: the smallest `|J|` with
/// `||f - f_J||_2 <= eps`, using the projection as the optimal junta.
/// Ties break toward the lexicographically smallest subset. Capped at
/// `n <= 12`.
pub fn optimal_junta_size(f: &SetFunction, eps: f64) -> Result<usize> {
    let n = f.n();
    if n > 12 {
        return Err(Error::DimensionTooLarge { op: "optimal_junta_size", n, cap: 12 });
    }
    let spectrum = transform(f)?;
    let total = spectrum.energy();
    let sq: Vec<f64> = spectrum.coeffs.iter().map(|c| c * c).collect();
    let budget = eps * eps + TOL;
    for size in 0..=n {
        // Numeric mask order doubles as lexicographic subset order here.
        for mask in 0u64..1 << n {
            if mask.count_ones() as usize != size {
                continue;
            }
            let mut inside = 0.0;
            let mut s = mask;
            loop {
                inside += sq[s as usize];
                if s == 0 {
                    break;
                }
                s = (s - 1) & mask;
            }
            if total - inside <= budget {
                return Ok(size);
            }
        }
    }
    Ok(n)
}
