//! Built-in instance corpus: the named functions the verification
//! suites and acceptance checks run on, plus seeded generators for
//! planted-junta learning targets and random down-closed families.

use rand::Rng;

use crate::estim::{Prng, RngStream};
use crate::setfn::{make_family, Family, FamilySpec, SetFunction};

/// A named corpus instance.
#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub f: SetFunction,
}

fn entry(name: impl Into<String>, spec: FamilySpec) -> CorpusEntry {
    CorpusEntry { name: name.into(), f: make_family(&spec).expect("built-in corpus specs are valid") }
}

fn cycle_edges(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|i| (i, (i + 1) % n)).collect()
}

/// Submodular instances with range `[0,1]`, at dimension `n`.
pub fn submodular_unit(n: usize) -> Vec<CorpusEntry> {
    assert!(n >= 4);
    let mut out = vec![
        entry(
            format!("linear_uniform_n{n}"),
            FamilySpec::new(n, Family::Linear { weights: vec![1.0 / n as f64; n] }),
        ),
        // Geometrically decaying weights: selection genuinely drops the
        // tail variables at moderate eps.
        entry(
            format!("linear_decay_n{n}"),
            FamilySpec::new(n, Family::Linear { weights: (0..n).map(|i| 0.5f64.powi(i as i32 + 1)).collect() }),
        ),
        entry(
            format!("or_pair_n{n}"),
            FamilySpec::new(n, Family::PseudoBoolean { k: 1, active: vec![0, n / 2] }),
        ),
        entry(
            format!("budget_additive_n{n}"),
            FamilySpec::new(n, Family::BudgetAdditive { active: (0..n / 2).collect() }),
        ),
        entry(
            format!("cut_cycle_n{n}"),
            FamilySpec::new(n, Family::GraphCut { edges: cycle_edges(n), weights: None }),
        ),
        entry(
            format!("cut_single_edge_n{n}"),
            FamilySpec::new(n, Family::GraphCut { edges: vec![(0, 1)], weights: None }),
        ),
        entry(
            format!("matroid_rank_n{n}"),
            FamilySpec::new(
                n,
                Family::MatroidRank {
                    blocks: vec![(0..n / 2).collect(), (n / 2..n).collect()],
                    caps: vec![2, 1],
                    normalize: true,
                },
            ),
        ),
        entry(
            format!("pseudo_boolean_k3_n{n}"),
            FamilySpec::new(n, Family::PseudoBoolean { k: 3, active: (0..(3 * n / 4).max(4)).collect() }),
        ),
    ];
    // Coverage: element i is covered by variables i and i+1 (mod n/2).
    let universe = n / 2;
    let sets: Vec<Vec<usize>> = (0..n).map(|i| vec![i % universe, (i + 1) % universe]).collect();
    out.push(entry(
        format!("coverage_n{n}"),
        FamilySpec::new(n, Family::Coverage { sets, universe_weights: vec![1.0 / universe as f64; universe] }),
    ));
    out
}

/// XOS instances with range `[0,1]` (not necessarily submodular).
pub fn xos_unit(n: usize) -> Vec<CorpusEntry> {
    let mut out = Vec::new();
    // Tribes at every nontrivial factorization of n.
    for a in 2..n {
        if n % a == 0 && n / a >= 2 {
            out.push(entry(
                format!("tribes_a{a}_b{}_n{n}", n / a),
                FamilySpec::new(n, Family::TribesXos { a, b: n / a }),
            ));
        }
    }
    // Two overlapping weighted clauses.
    let mut c1 = vec![0.0; n];
    let mut c2 = vec![0.0; n];
    for i in 0..n {
        if i % 2 == 0 {
            c1[i] = 2.0 / n as f64;
        }
        if i % 3 == 0 {
            c2[i] = 3.0 / n as f64;
        }
    }
    out.push(entry(
        format!("max_linear_n{n}"),
        FamilySpec::new(n, Family::MaxLinearXos { clauses: vec![c1, c2] }),
    ));
    out
}

/// Monotone nonnegative submodular instances (for the multiplicative
/// suites), range `[0,1]`.
pub fn monotone_submodular_unit(n: usize) -> Vec<CorpusEntry> {
    submodular_unit(n)
        .into_iter()
        .filter(|e| e.f.flags().claims_monotone)
        .collect()
}

/// 1-Lipschitz integer-valued nonnegative submodular instances (for
/// the concentration suite): discrete derivatives in `[-1,1]`.
pub fn lipschitz(n: usize) -> Vec<CorpusEntry> {
    let mut out = vec![
        entry(
            format!("coordinate_sum_n{n}"),
            FamilySpec::new(n, Family::Linear { weights: vec![1.0; n] }),
        ),
        entry(
            format!("uniform_matroid_rank_n{n}"),
            FamilySpec::new(
                n,
                Family::MatroidRank { blocks: vec![(0..n).collect()], caps: vec![n / 2], normalize: false },
            ),
        ),
        entry(
            format!("partition_matroid_rank_n{n}"),
            FamilySpec::new(
                n,
                Family::MatroidRank {
                    blocks: vec![(0..n / 2).collect(), (n / 2..n).collect()],
                    caps: vec![1, 2],
                    normalize: false,
                },
            ),
        ),
        entry(
            format!("budget_additive_n{n}"),
            FamilySpec::new(n, Family::BudgetAdditive { active: (0..n).collect() }),
        ),
    ];
    // A perfect matching's cut: every variable touches one unit edge.
    let edges: Vec<(usize, usize)> = (0..n / 2).map(|i| (2 * i, 2 * i + 1)).collect();
    let weights = Some(vec![1.0; edges.len()]);
    out.push(entry(
        format!("matching_cut_n{n}"),
        FamilySpec::new(n, Family::GraphCut { edges, weights }),
    ));
    out
}

/// The standard dimensions the suites sweep.
pub const SUITE_DIMS: [usize; 4] = [4, 8, 12, 16];

/// Whole built-in corpus: submodular and XOS instances across
/// [`SUITE_DIMS`].
pub fn builtin() -> Vec<CorpusEntry> {
    let mut out = Vec::new();
    for &n in &SUITE_DIMS {
        out.extend(submodular_unit(n));
        out.extend(xos_unit(n));
    }
    out
}

/// AND-gadget cores for the far (non-submodular) test corpus. Each is
/// supermodular with l1-distance exactly 1/4 to the submodular cone,
/// which the acceptance suite re-verifies by LP. Composite gadgets
/// (averaged or OR-ed pairs of ANDs) measure only 1/8 and 3/16 far and
/// are deliberately excluded.
pub fn far_cores() -> Vec<CorpusEntry> {
    let and2 = |n: usize, i: usize, j: usize| {
        let mut values = vec![0.0; 1 << n];
        for (mask, v) in values.iter_mut().enumerate() {
            if mask >> i & 1 == 1 && mask >> j & 1 == 1 {
                *v = 1.0;
            }
        }
        entry(format!("and2_n{n}"), FamilySpec::new(n, Family::ExplicitTable { values }))
    };
    vec![and2(2, 0, 1), and2(4, 1, 3)]
}

/// Far corpus at embedding dimension `n`: AND on two of `n` variables.
/// Distance to the submodular cone is preserved under adding
/// irrelevant variables.
pub fn far_embedded(n: usize) -> Vec<CorpusEntry> {
    assert!(n >= 4);
    let mut and2 = vec![0.0; 1 << n];
    for (mask, v) in and2.iter_mut().enumerate() {
        if mask >> 1 & 1 == 1 && mask >> 3 & 1 == 1 {
            *v = 1.0;
        }
    }
    vec![entry(format!("and2_embedded_n{n}"), FamilySpec::new(n, Family::ExplicitTable { values: and2 }))]
}

/// Seeded planted-junta submodular target: a submodular function on a
/// random set of `t` of `n` variables, drawn from templates whose
/// degree-1/2 coefficients are bounded away from zero. Returns the
/// function and the planted variable set.
pub fn planted_submodular_junta(n: usize, t: usize, seed: u64) -> (SetFunction, Vec<usize>) {
    assert!(t >= 1 && t <= n);
    let mut rng: Prng = RngStream::new(seed).child(0xb1).rng();
    let mut vars: Vec<usize> = (0..n).collect();
    // Seeded Fisher-Yates prefix.
    for i in 0..t {
        let j = rng.random_range(i..n);
        vars.swap(i, j);
    }
    let mut active: Vec<usize> = vars[..t].to_vec();
    active.sort_unstable();

    let template = rng.random_range(0..4u32);
    let spec = match template {
        0 => FamilySpec::new(n, Family::PseudoBoolean { k: 1, active: active.clone() }),
        1 => FamilySpec::new(
            n,
            Family::MatroidRank {
                blocks: vec![active.clone()],
                caps: vec![t.div_ceil(2)],
                normalize: true,
            },
        ),
        2 => {
            // Every active variable covers its own element plus a
            // shared one.
            let universe = t + 1;
            let mut sets = vec![Vec::new(); n];
            for (k, &v) in active.iter().enumerate() {
                sets[v] = vec![k, t];
            }
            let w = 1.0 / universe as f64;
            FamilySpec::new(n, Family::Coverage { sets, universe_weights: vec![w; universe] })
        }
        _ => {
            let mut weights = vec![0.0; n];
            for &v in &active {
                weights[v] = 1.0 / t as f64;
            }
            FamilySpec::new(n, Family::Linear { weights })
        }
    };
    (make_family(&spec).expect("templates are valid"), active)
}

/// Seeded random down-closed family on `ground` elements, generated by
/// downward-closing a few random maximal sets.
pub fn random_down_closed(ground: usize, seed: u64) -> Vec<bool> {
    assert!(ground <= 16);
    let mut rng: Prng = RngStream::new(seed).child(0xdc).rng();
    let mut members = vec![false; 1usize << ground];
    members[0] = true;
    let maximal_count = rng.random_range(2..=5usize);
    for _ in 0..maximal_count {
        let m: u64 = rng.random_range(0..1u64 << ground);
        // Mark all subsets of m.
        let mut sub = m;
        loop {
            members[sub as usize] = true;
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & m;
        }
    }
    members
}
