//! Influential-variable detection from random examples.
//!
//! For submodular targets, variables are kept when their estimated
//! degree-1 or degree-2 Fourier coefficient clears thresholds derived
//! from the junta-size parameter `s`. For unate (e.g. monotone)
//! targets, `|f_hat({i})|` equals the l1-influence of variable `i`, so
//! degree-1 estimates alone suffice.

use serde::{Deserialize, Serialize};

use crate::estim::{sample_size, SampleSet};
use crate::{Error, Result, TOL};

/// Outcome of a detection pass: the kept variables, the thresholds
/// used, and the coefficient estimates retained for audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub vars: Vec<usize>,
    pub deg1_threshold: f64,
    /// Absent for the unate (degree-1 only) path.
    pub deg2_threshold: Option<f64>,
    /// Estimation accuracy the sample budget was checked against.
    pub accuracy: f64,
    /// Junta-size parameter `s`, when supplied.
    pub s: Option<usize>,
    /// Degree-1 estimates for every kept variable.
    pub deg1_estimates: Vec<(usize, f64)>,
    /// Pair estimates at or above the degree-2 threshold.
    pub deg2_estimates: Vec<(usize, usize, f64)>,
}

fn check_labels(samples: &SampleSet) -> Result<()> {
    if !samples.uniform_source() {
        return Err(Error::BadParameter("detection requires uniform-distribution samples".into()));
    }
    for (_, l) in samples.samples() {
        if !(-TOL..=1.0 + TOL).contains(l) {
            return Err(Error::BadParameter(format!("label {l} outside [0,1]")));
        }
    }
    Ok(())
}

fn is_exhaustive(samples: &SampleSet) -> bool {
    matches!(samples.source(), crate::estim::SampleSource::Exhaustive)
}

/// One pass over the samples computing every degree-1 and degree-2
/// coefficient estimate.
fn degree12_estimates(samples: &SampleSet) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = samples.n();
    let m = samples.len() as f64;
    let mut deg1 = vec![0.0f64; n];
    let mut deg2 = vec![vec![0.0f64; n]; n];
    let mut signs = vec![1.0f64; n];
    for (x, label) in samples.samples() {
        for i in 0..n {
            signs[i] = if x.get(i) { -1.0 } else { 1.0 };
        }
        for i in 0..n {
            let li = label * signs[i];
            deg1[i] += li;
            for j in i + 1..n {
                deg2[i][j] += li * signs[j];
            }
        }
    }
    for v in &mut deg1 {
        *v /= m;
    }
    for row in &mut deg2 {
        for v in row {
            *v /= m;
        }
    }
    (deg1, deg2)
}

/// Degree-1/2 thresholding for submodular targets. Estimates all
/// coefficients to accuracy `eps/(32 s^2)` and keeps variable `i` when
/// `|est({i})| >= 3 eps/(16 s)` or some `|est({i,j})| >= 3 eps/(32 s^2)`.
/// The sample budget is Hoeffding-checked against the accuracy unless
/// the sample set is exhaustive (estimates are then exact).
pub fn find_influential(samples: &SampleSet, s: usize, eps: f64) -> Result<DetectionResult> {
    if s == 0 || !(eps > 0.0) {
        return Err(Error::BadParameter(format!("s = {s}, eps = {eps}")));
    }
    check_labels(samples)?;
    let n = samples.n();
    let accuracy = eps / (32.0 * (s * s) as f64);
    if !is_exhaustive(samples) {
        let targets = n + n * (n - 1) / 2;
        let per_target_delta = (1.0 / 6.0) / targets as f64;
        let required = sample_size(2.0, accuracy, per_target_delta);
        if samples.len() < required {
            return Err(Error::InsufficientSamples { required, got: samples.len() });
        }
    }
    find_influential_ungated(samples, s, eps)
}

/// [`find_influential`] without the sample-budget gate, for callers
/// that own the statistical budget (engineering overrides at desk
/// scale). Thresholds are identical.
pub fn find_influential_ungated(samples: &SampleSet, s: usize, eps: f64) -> Result<DetectionResult> {
    if s == 0 || !(eps > 0.0) {
        return Err(Error::BadParameter(format!("s = {s}, eps = {eps}")));
    }
    check_labels(samples)?;
    let n = samples.n();
    let s_f = s as f64;
    let deg1_threshold = 3.0 * eps / (16.0 * s_f);
    let deg2_threshold = 3.0 * eps / (32.0 * s_f * s_f);
    let (deg1, deg2) = degree12_estimates(samples);
    let mut keep = vec![false; n];
    let mut deg2_estimates = Vec::new();
    for i in 0..n {
        if deg1[i].abs() >= deg1_threshold {
            keep[i] = true;
        }
        for j in i + 1..n {
            if deg2[i][j].abs() >= deg2_threshold {
                keep[i] = true;
                keep[j] = true;
                deg2_estimates.push((i, j, deg2[i][j]));
            }
        }
    }
    let vars: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
    let deg1_estimates = vars.iter().map(|&i| (i, deg1[i])).collect();
    Ok(DetectionResult {
        vars,
        deg1_threshold,
        deg2_threshold: Some(deg2_threshold),
        accuracy: eps / (32.0 * s_f * s_f),
        s: Some(s),
        deg1_estimates,
        deg2_estimates,
    })
}

/// Degree-1 thresholding for unate targets with total l1-influence at
/// most `a`: `d = 2a/eps^2`, `alpha = 2^{-4d}`, keep
/// `|est({i})| >= alpha/2` with estimates accurate to `alpha/4`.
pub fn find_influential_unate(samples: &SampleSet, a: f64, eps: f64) -> Result<DetectionResult> {
    if !(a > 0.0) || !(eps > 0.0) {
        return Err(Error::BadParameter(format!("a = {a}, eps = {eps}")));
    }
    check_labels(samples)?;
    let d = 2.0 * a / (eps * eps);
    let alpha = 2f64.powf(-4.0 * d);
    detect_deg1(samples, alpha / 2.0, Some(alpha / 4.0))
}

/// Degree-1 thresholding at an explicit threshold. When `accuracy` is
/// given, the sample budget is Hoeffding-checked against it (skipped
/// for exhaustive sets); with `None` the caller owns the statistical
/// budget.
pub fn detect_deg1(samples: &SampleSet, threshold: f64, accuracy: Option<f64>) -> Result<DetectionResult> {
    check_labels(samples)?;
    let n = samples.n();
    if let Some(acc) = accuracy {
        if !is_exhaustive(samples) {
            let per_target_delta = (1.0 / 6.0) / n as f64;
            let required = sample_size(2.0, acc, per_target_delta);
            if samples.len() < required {
                return Err(Error::InsufficientSamples { required, got: samples.len() });
            }
        }
    }
    let m = samples.len() as f64;
    let mut deg1 = vec![0.0f64; n];
    for (x, label) in samples.samples() {
        for (i, v) in deg1.iter_mut().enumerate() {
            *v += if x.get(i) { -label } else { *label };
        }
    }
    for v in &mut deg1 {
        *v /= m;
    }
    let vars: Vec<usize> = (0..n).filter(|&i| deg1[i].abs() >= threshold).collect();
    let deg1_estimates = vars.iter().map(|&i| (i, deg1[i])).collect();
    Ok(DetectionResult {
        vars,
        deg1_threshold: threshold,
        deg2_threshold: None,
        accuracy: accuracy.unwrap_or(0.0),
        s: None,
        deg1_estimates,
        deg2_estimates: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfour::{self, influences, transform};
    use crate::estim::{ProductDist, RngStream, SampleSet};
    use crate::setfn::{make_family, Family, FamilySpec, Point, SetFunction};

    #[test]
    fn threshold_formulas() {
        let f = make_family(&FamilySpec::new(4, Family::PseudoBoolean { k: 1, active: vec![0, 1] })).unwrap();
        let samples = SampleSet::exhaustive(&f).unwrap();
        let r = find_influential(&samples, 2, 0.2).unwrap();
        assert!((r.accuracy - 0.0015625).abs() < 1e-12);
        assert!((r.deg1_threshold - 0.01875).abs() < 1e-12);
        assert!((r.deg2_threshold.unwrap() - 0.0046875).abs() < 1e-12);
    }

    #[test]
    fn or_in_ten_dummies() {
        let f = make_family(&FamilySpec::new(10, Family::PseudoBoolean { k: 1, active: vec![0, 1] })).unwrap();
        let samples = SampleSet::exhaustive(&f).unwrap();
        let r = find_influential(&samples, 2, 0.2).unwrap();
        assert_eq!(r.vars, vec![0, 1]);
        // Bound |I| <= 32 s^2 / eps.
        assert!(r.vars.len() as f64 <= 32.0 * 4.0 / 0.2);
    }

    #[test]
    fn constant_detects_nothing() {
        let f = SetFunction::from_table(6, vec![0.5; 64], Default::default(), (0.5, 0.5)).unwrap();
        let samples = SampleSet::exhaustive(&f).unwrap();
        assert!(find_influential(&samples, 2, 0.2).unwrap().vars.is_empty());
        assert!(find_influential_unate(&samples, 1.0, 0.5).unwrap().vars.is_empty());
    }

    #[test]
    fn insufficient_samples_rejected() {
        let f = make_family(&FamilySpec::new(6, Family::PseudoBoolean { k: 1, active: vec![0, 1] })).unwrap();
        let mut rng = RngStream::new(3).rng();
        let samples = SampleSet::draw(&f, &ProductDist::uniform(6), 100, &mut rng).unwrap();
        match find_influential(&samples, 2, 0.2) {
            Err(Error::InsufficientSamples { required, got }) => {
                assert_eq!(got, 100);
                assert!(required > 100);
            }
            other => panic!("expected insufficiency, got {other:?}"),
        }
    }

    #[test]
    fn unate_dictator() {
        let mut w = vec![0.0; 8];
        w[0] = 1.0;
        let f = make_family(&FamilySpec::new(8, Family::Linear { weights: w })).unwrap();
        let samples = SampleSet::exhaustive(&f).unwrap();
        let r = find_influential_unate(&samples, 1.0, 0.7).unwrap();
        assert_eq!(r.vars, vec![0]);
    }

    #[test]
    fn unate_tribes_all_variables() {
        let f = make_family(&FamilySpec::new(4, Family::TribesXos { a: 2, b: 2 })).unwrap();
        let samples = SampleSet::exhaustive(&f).unwrap();
        let r = find_influential_unate(&samples, 1.0, 0.7).unwrap();
        assert_eq!(r.vars, vec![0, 1, 2, 3]);
    }

    #[test]
    fn exhaustive_thresholding_matches_true_coefficients() {
        let f = make_family(&FamilySpec::new(
            8,
            Family::Coverage {
                sets: vec![vec![0], vec![0, 1], vec![], vec![2], vec![], vec![], vec![1], vec![]],
                universe_weights: vec![0.4, 0.3, 0.3],
            },
        ))
        .unwrap();
        let samples = SampleSet::exhaustive(&f).unwrap();
        let r = find_influential(&samples, 3, 0.3).unwrap();
        let t = transform(&f).unwrap();
        let mut expect = Vec::new();
        for i in 0..8 {
            let single = t.coeff(1 << i).abs() >= r.deg1_threshold;
            let pair = (0..8).any(|j| {
                j != i && t.coeff(1 << i | 1 << j).abs() >= r.deg2_threshold.unwrap()
            });
            if single || pair {
                expect.push(i);
            }
        }
        assert_eq!(r.vars, expect);
    }

    #[test]
    fn second_coefficient_is_derivative_influence() {
        // |f_hat({i,j})| = Infl^1_i(d_j f) / 2 for submodular f.
        for f in [
            make_family(&FamilySpec::new(6, Family::GraphCut { edges: vec![(0, 3), (1, 4), (3, 5)], weights: None }))
                .unwrap(),
            make_family(&FamilySpec::new(
                6,
                Family::MatroidRank { blocks: vec![vec![0, 1, 2], vec![3, 4]], caps: vec![2, 1], normalize: true },
            ))
            .unwrap(),
        ] {
            let t = transform(&f).unwrap();
            let n = f.n();
            for j in 0..n {
                let fj = f.clone();
                let d = SetFunction::from_fn(n, Default::default(), (-1.0, 1.0), move |x: Point| {
                    fj.eval(x.with(j, true)) - fj.eval(x.with(j, false))
                })
                .unwrap();
                let infl = influences(&d, 1.0).unwrap();
                for i in 0..n {
                    if i == j {
                        continue;
                    }
                    let lhs = t.coeff(1 << i | 1 << j).abs();
                    assert!((lhs - infl.per_variable[i] / 2.0).abs() < crate::TOL, "i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn projection_error_chain() {
        // ||f - f_I||_1 <= sum_{j not in I} Infl^1_j(f).
        use rand::Rng;
        let f = make_family(&FamilySpec::new(6, Family::TribesXos { a: 3, b: 2 })).unwrap();
        let infl = influences(&f, 1.0).unwrap();
        let mut rng = RngStream::new(5).rng();
        for _ in 0..20 {
            let mask: u64 = rng.random_range(0..64);
            let vars: Vec<usize> = (0..6).filter(|&i| mask >> i & 1 == 1).collect();
            let proj = boolfour::projection(&f, &vars).unwrap();
            let lhs = boolfour::distance(&f, &proj, 1).unwrap();
            let rhs: f64 = (0..6).filter(|i| !vars.contains(i)).map(|i| infl.per_variable[i]).sum();
            assert!(lhs <= rhs + crate::TOL);
        }
    }
}
