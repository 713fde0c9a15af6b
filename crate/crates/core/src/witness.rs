//! Fidelity-based certification: bounded-rank overlap maxima, the
//! dimensionality threshold, fidelity assembly from density-matrix elements
//! and the two-level GHZ witness.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ket_label, parse_ket, schmidt_decompose, Dims, PureState};

/// The four kets carrying amplitude 1/2 in the target state.
pub const SIGNAL_KETS: [[usize; 3]; 4] = [[0, 0, 0], [1, 1, 1], [2, 2, 0], [3, 3, 1]];

/// Local dimensions of the target state.
pub const TARGET_DIMS: [usize; 3] = [4, 4, 2];

/// The six unique off-diagonal pairs between signal kets.
pub fn signal_pairs() -> Vec<([usize; 3], [usize; 3])> {
    let mut out = Vec::with_capacity(6);
    for (i, a) in SIGNAL_KETS.iter().enumerate() {
        for b in &SIGNAL_KETS[i + 1..] {
            out.push((*a, *b));
        }
    }
    out
}

/// A set of rank vectors closed under the party permutations that keep
/// every rank within its local dimension. `(4,3,2)` on dims `(4,4,2)`
/// yields `{(4,3,2), (3,4,2)}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankVectorClass {
    pub ranks: Vec<usize>,
}

impl RankVectorClass {
    pub fn new(ranks: Vec<usize>) -> Self {
        Self { ranks }
    }

    /// Distinct permutations of the ranks that are valid for `dims`.
    pub fn members(&self, dims: &Dims) -> Result<Vec<Vec<usize>>> {
        if self.ranks.len() != dims.parties() {
            return Err(Error::DimensionMismatch {
                expected: dims.as_slice().to_vec(),
                found: self.ranks.clone(),
            });
        }
        if self.ranks.contains(&0) {
            return Err(Error::InvalidDims(format!("rank vector {:?}", self.ranks)));
        }
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut perm = self.ranks.clone();
        perm.sort_unstable();
        loop {
            let valid = perm.iter().zip(dims.as_slice()).all(|(&r, &d)| r <= d);
            if valid && !out.contains(&perm) {
                out.push(perm.clone());
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidDims(format!(
                "no arrangement of {:?} fits dims {dims}",
                self.ranks
            )));
        }
        // keep the caller's ordering first
        if let Some(pos) = out.iter().position(|m| *m == self.ranks) {
            out.swap(0, pos);
        }
        Ok(out)
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len())
        .rev()
        .find(|&j| v[j] > v[i - 1])
        .expect("pivot");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Largest `|⟨target|Φ⟩|²` over states Φ whose reduction on `cut` has rank
/// at most `rank`: the sum of the `rank` largest squared Schmidt
/// coefficients.
pub fn max_overlap_bounded_rank(target: &PureState, cut: &[usize], rank: usize) -> Result<f64> {
    let data = schmidt_decompose(target, cut)?;
    let max = data.coefficients.len();
    if rank == 0 || rank > max {
        return Err(Error::RankOutOfRange { rank, max });
    }
    let sum: f64 = data.weights().iter().take(rank).sum();
    Ok(sum.min(1.0))
}

/// Upper bound on the overlap of `target` with any state in the class:
/// the maximum over class members of the minimum over single-party cuts.
pub fn fmax_class_bound(target: &PureState, class: &RankVectorClass) -> Result<f64> {
    let dims = target.dims();
    let mut best = 0.0f64;
    for member in class.members(dims)? {
        let mut bound = 1.0f64;
        for (party, &rank) in member.iter().enumerate() {
            let others: usize = dims.total() / dims.get(party);
            let cap = dims.get(party).min(others);
            let overlap = max_overlap_bounded_rank(target, &[party], rank.min(cap))?;
            bound = bound.min(overlap);
        }
        best = best.max(bound);
    }
    Ok(best)
}

/// Bra/ket pair addressing one density-matrix element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementLabel {
    pub bra: Vec<usize>,
    pub ket: Vec<usize>,
}

impl ElementLabel {
    pub fn diagonal(ket: &[usize]) -> Self {
        Self {
            bra: ket.to_vec(),
            ket: ket.to_vec(),
        }
    }

    pub fn new(bra: &[usize], ket: &[usize]) -> Self {
        Self {
            bra: bra.to_vec(),
            ket: ket.to_vec(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.bra == self.ket
    }

    /// True for `⟨a|ρ|b⟩` and `⟨b|ρ|a⟩` alike; both share one real part.
    pub fn same_real_part(&self, bra: &[usize], ket: &[usize]) -> bool {
        (self.bra == bra && self.ket == ket) || (self.bra == ket && self.ket == bra)
    }

    pub fn parse(s: &str) -> Result<Self> {
        let inner = s
            .strip_prefix('<')
            .and_then(|r| r.strip_suffix('>'))
            .ok_or_else(|| Error::Parse(format!("bad element label {s:?}")))?;
        let parts: Vec<&str> = inner.split('|').collect();
        match parts.as_slice() {
            [bra, "rho", ket] => Ok(Self {
                bra: parse_ket(bra)?,
                ket: parse_ket(ket)?,
            }),
            _ => Err(Error::Parse(format!("bad element label {s:?}"))),
        }
    }
}

impl fmt::Display for ElementLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}|rho|{}>", ket_label(&self.bra), ket_label(&self.ket))
    }
}

/// An estimated element (real part for off-diagonals).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementEstimate {
    pub label: ElementLabel,
    pub value: f64,
    pub std_dev: f64,
    #[serde(default)]
    pub low_statistics: bool,
}

impl ElementEstimate {
    pub fn new(label: ElementLabel, value: f64, std_dev: f64) -> Self {
        Self {
            label,
            value,
            std_dev,
            low_statistics: false,
        }
    }
}

fn find<'a>(
    elements: &'a [ElementEstimate],
    bra: &[usize],
    ket: &[usize],
) -> Result<&'a ElementEstimate> {
    elements
        .iter()
        .find(|e| e.label.same_real_part(bra, ket))
        .ok_or_else(|| Error::MissingElement(ElementLabel::new(bra, ket).to_string()))
}

/// Sum of the full computational diagonal, checked to lie within 2% of 1.
pub fn diagonal_trace(dims: &Dims, diagonals: &[ElementEstimate]) -> Result<f64> {
    let mut sum = 0.0;
    for idx in 0..dims.total() {
        let digits = dims.digits(idx);
        sum += find(diagonals, &digits, &digits)?.value;
    }
    if (sum - 1.0).abs() > 0.02 {
        return Err(Error::Normalization { sum });
    }
    Ok(sum)
}

/// Fidelity with an equal-weight real superposition of `kets`, from the
/// diagonal estimates over the whole space and the real parts of the
/// off-diagonals between kets. All elements are divided by the measured
/// trace.
pub fn fidelity_with_uniform_target(
    dims: &Dims,
    kets: &[&[usize]],
    diagonals: &[ElementEstimate],
    offdiagonals: &[ElementEstimate],
) -> Result<f64> {
    let trace = diagonal_trace(dims, diagonals)?;
    let mut total = 0.0;
    for &k in kets {
        total += find(diagonals, k, k)?.value;
    }
    for i in 0..kets.len() {
        for j in i + 1..kets.len() {
            total += 2.0 * find(offdiagonals, kets[i], kets[j])?.value;
        }
    }
    Ok(total / (kets.len() as f64 * trace))
}

/// Fidelity with the (4,4,2) target from its 32 diagonal elements and the
/// six unique off-diagonal real parts.
pub fn fidelity_from_elements(
    diagonals: &[ElementEstimate],
    offdiagonals: &[ElementEstimate],
) -> Result<f64> {
    let dims = Dims::new(TARGET_DIMS.to_vec())?;
    let kets: Vec<&[usize]> = SIGNAL_KETS.iter().map(|k| k.as_slice()).collect();
    fidelity_with_uniform_target(&dims, &kets, diagonals, offdiagonals)
}

/// Local two-level observable used in a correlator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sigma {
    X,
    Y,
}

/// Correlator patterns whose signed sum isolates `|bra⟩⟨ket| + h.c.` when
/// `m` parties change level: every assignment with an even number of `Y`,
/// signed `(−1)^(#Y/2)`. The sum equals `2^(m−1)·(|bra⟩⟨ket| + h.c.)`, so
/// the real part is the signed sum divided by `2^m`.
pub fn correlator_patterns(m: usize) -> Vec<(Vec<Sigma>, f64)> {
    (0u32..1 << m)
        .filter(|mask| mask.count_ones() % 2 == 0)
        .map(|mask| {
            let pattern = (0..m)
                .map(|i| {
                    if mask & (1 << (m - 1 - i)) != 0 {
                        Sigma::Y
                    } else {
                        Sigma::X
                    }
                })
                .collect();
            let sign = if (mask.count_ones() / 2) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            (pattern, sign)
        })
        .collect()
}

fn check_expectation(value: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&value) || value.is_nan() {
        return Err(Error::OutOfRange {
            name: "correlator expectation",
            value,
            lo: -1.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// Real part of an element from the signed correlator expectations listed
/// by [`correlator_patterns`] for `m` level-changing parties.
pub fn offdiag_from_patterns(m: usize, expectations: &[f64]) -> Result<f64> {
    let patterns = correlator_patterns(m);
    if expectations.len() != patterns.len() {
        return Err(Error::Parse(format!(
            "{} correlators for {m} parties, expected {}",
            expectations.len(),
            patterns.len()
        )));
    }
    let mut sum = 0.0;
    for ((_, sign), &e) in patterns.iter().zip(expectations) {
        check_expectation(e)?;
        sum += sign * e;
    }
    Ok(sum / f64::from(1u32 << m))
}

/// `ℜ⟨ijk|ρ|lmn⟩` when all three parties change level, from the
/// full-state expectations of `σx σx σx`, `σy σy σx`, `σy σx σy`, `σx σy σy`
/// on the levels `(i,l)`, `(j,m)`, `(k,n)`.
///
/// The signed sum equals `4·(|ijk⟩⟨lmn| + h.c.)`, which gives the 1/8.
pub fn offdiag_from_correlators(
    exp_xxx: f64,
    exp_yyx: f64,
    exp_yxy: f64,
    exp_xyy: f64,
) -> Result<f64> {
    for e in [exp_xxx, exp_yyx, exp_yxy, exp_xyy] {
        check_expectation(e)?;
    }
    Ok((exp_xxx - exp_yyx - exp_yxy - exp_xyy) / 8.0)
}

/// Two-party variant (the third party keeps its level and is projected on
/// it): `ℜ = (⟨σx σx⟩ − ⟨σy σy⟩)/4`.
pub fn offdiag_from_pair_correlators(exp_xx: f64, exp_yy: f64) -> Result<f64> {
    check_expectation(exp_xx)?;
    check_expectation(exp_yy)?;
    Ok((exp_xx - exp_yy) / 4.0)
}

/// Fidelity with `(|a⟩ + |b⟩)/√2` from elements already renormalized to
/// the two-level population.
pub fn subspace_fidelity(diag_a: f64, diag_b: f64, offdiag: f64) -> f64 {
    (diag_a + diag_b + 2.0 * offdiag) / 2.0
}

/// [`subspace_fidelity`] after dividing by the subspace population.
pub fn renormalized_subspace_fidelity(diag_a: f64, diag_b: f64, offdiag: f64) -> Result<f64> {
    let pop = diag_a + diag_b;
    if pop <= 0.0 {
        return Err(Error::EmptySamples("no population in the subspace".into()));
    }
    Ok(subspace_fidelity(diag_a / pop, diag_b / pop, offdiag / pop))
}

/// Expectation of `W = I/2 − |Ψ⟩⟨Ψ|` for a two-term GHZ target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhzWitness {
    /// `Tr(Wρ) = 1/2 − F`; negative means genuine multipartite entanglement.
    pub expectation: f64,
    /// `F − 1/2`.
    pub margin: f64,
    pub witnessed: bool,
}

pub fn ghz_witness_value(fidelity: f64) -> Result<GhzWitness> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::OutOfRange {
            name: "fidelity",
            value: fidelity,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let expectation = 0.5 - fidelity;
    Ok(GhzWitness {
        expectation,
        margin: -expectation,
        witnessed: expectation < 0.0,
    })
}

/// Comparison of a measured fidelity with a dimensionality bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub fidelity: f64,
    pub std_dev: f64,
    pub bound: f64,
    /// `(F − bound)/σ`.
    pub margin_sigma: f64,
    pub certified: bool,
}

pub fn certify_dimensionality(fidelity: f64, std_dev: f64, bound: f64) -> Result<Certification> {
    if std_dev <= 0.0 || !std_dev.is_finite() {
        return Err(Error::OutOfRange {
            name: "standard deviation",
            value: std_dev,
            lo: f64::MIN_POSITIVE,
            hi: f64::INFINITY,
        });
    }
    Ok(Certification {
        fidelity,
        std_dev,
        bound,
        margin_sigma: (fidelity - bound) / std_dev,
        certified: fidelity > bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photonic::make_psi442;
    use crate::tensor::{c, DensityOperator};
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ghz222() -> PureState {
        PureState::from_terms(
            Dims::new(vec![2, 2, 2]).unwrap(),
            &[(&[0, 0, 0], c(1.0)), (&[1, 1, 1], c(1.0))],
        )
        .unwrap()
    }

    fn random_state(rng: &mut impl Rng, dims: &[usize]) -> PureState {
        let dims = Dims::new(dims.to_vec()).unwrap();
        let amps = DVector::from_fn(dims.total(), |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        PureState::normalized(dims, amps).unwrap()
    }

    fn random_density(rng: &mut impl Rng, dims: &[usize]) -> DensityOperator {
        let dims = Dims::new(dims.to_vec()).unwrap();
        let n = dims.total();
        let g = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let m = &g * g.adjoint();
        let tr = m.trace();
        let m = m.map(|z| z / tr);
        let m = (&m + m.adjoint()).scale(0.5);
        DensityOperator::new(dims, m).unwrap()
    }

    fn exact_elements(rho: &DensityOperator) -> (Vec<ElementEstimate>, Vec<ElementEstimate>) {
        let dims = rho.dims();
        let diagonals = (0..dims.total())
            .map(|i| {
                let d = dims.digits(i);
                ElementEstimate::new(ElementLabel::diagonal(&d), rho.element(&d, &d).re, 0.0)
            })
            .collect();
        let offdiagonals = signal_pairs()
            .iter()
            .map(|(a, b)| ElementEstimate::new(ElementLabel::new(a, b), rho.element(a, b).re, 0.0))
            .collect();
        (diagonals, offdiagonals)
    }

    #[test]
    fn class_members_respect_local_dims() {
        let dims = Dims::new(vec![4, 4, 2]).unwrap();
        let members = RankVectorClass::new(vec![4, 3, 2]).members(&dims).unwrap();
        assert_eq!(members, vec![vec![4, 3, 2], vec![3, 4, 2]]);
        let members = RankVectorClass::new(vec![2, 1, 2])
            .members(&Dims::new(vec![2, 2, 2]).unwrap())
            .unwrap();
        assert_eq!(members.len(), 3);
        assert!(RankVectorClass::new(vec![4, 4]).members(&dims).is_err());
    }

    #[test]
    fn bounded_rank_overlaps() {
        let psi = make_psi442();
        assert_abs_diff_eq!(
            max_overlap_bounded_rank(&psi, &[0], 3).unwrap(),
            0.75,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            max_overlap_bounded_rank(&psi, &[2], 2).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            max_overlap_bounded_rank(&psi, &[1], 4).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            max_overlap_bounded_rank(&psi, &[2], 3),
            Err(Error::RankOutOfRange { rank: 3, max: 2 })
        ));
        assert!(max_overlap_bounded_rank(&psi, &[0], 0).is_err());
    }

    #[test]
    fn class_bounds() {
        let psi = make_psi442();
        let f = fmax_class_bound(&psi, &RankVectorClass::new(vec![4, 3, 2])).unwrap();
        assert_abs_diff_eq!(f, 0.75, epsilon = 1e-12);
        let g = fmax_class_bound(&ghz222(), &RankVectorClass::new(vec![2, 1, 2])).unwrap();
        assert_abs_diff_eq!(g, 0.5, epsilon = 1e-12);
        let full = fmax_class_bound(&psi, &RankVectorClass::new(vec![4, 4, 2])).unwrap();
        assert_abs_diff_eq!(full, 1.0, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn bounded_overlap_is_monotone_in_rank(seed in any::<u64>(), party in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = random_state(&mut rng, &[4, 4, 2]);
            let max = if party == 2 { 2 } else { 4 };
            let mut prev = 0.0;
            for r in 1..=max {
                let v = max_overlap_bounded_rank(&psi, &[party], r).unwrap();
                prop_assert!(v + 1e-12 >= prev);
                prev = v;
            }
            prop_assert!((prev - 1.0).abs() < 1e-10);
        }
    }

    fn table_elements() -> (Vec<ElementEstimate>, Vec<ElementEstimate>) {
        let table = crate::fixtures::density_elements();
        (table.diagonals, table.offdiagonals)
    }

    #[test]
    fn fidelity_from_published_elements() {
        let (d, o) = table_elements();
        let f = fidelity_from_elements(&d, &o).unwrap();
        assert_abs_diff_eq!(f, 0.854, epsilon = 1e-3);
    }

    #[test]
    fn fidelity_of_ideal_and_mixed_elements() {
        let ideal = make_psi442().projector();
        let (d, o) = exact_elements(&ideal);
        assert_abs_diff_eq!(
            fidelity_from_elements(&d, &o).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let mixed = DensityOperator::maximally_mixed(ideal.dims().clone());
        let (d, o) = exact_elements(&mixed);
        assert_abs_diff_eq!(
            fidelity_from_elements(&d, &o).unwrap(),
            1.0 / 32.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn missing_elements_are_named() {
        let (mut d, o) = table_elements();
        d.retain(|e| e.label.bra != vec![2, 1, 1]);
        match fidelity_from_elements(&d, &o) {
            Err(Error::MissingElement(label)) => assert_eq!(label, "<211|rho|211>"),
            other => panic!("unexpected {other:?}"),
        }
        let (d, mut o) = table_elements();
        o.pop();
        assert!(matches!(
            fidelity_from_elements(&d, &o),
            Err(Error::MissingElement(_))
        ));
    }

    #[test]
    fn badly_normalized_diagonals_are_rejected() {
        let (mut d, o) = table_elements();
        d[0].value += 0.05;
        assert!(matches!(
            fidelity_from_elements(&d, &o),
            Err(Error::Normalization { .. })
        ));
    }

    #[test]
    fn fidelity_from_exact_elements_matches_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let psi = make_psi442();
        for _ in 0..50 {
            let rho = random_density(&mut rng, &[4, 4, 2]);
            let (d, o) = exact_elements(&rho);
            let f = fidelity_from_elements(&d, &o).unwrap();
            assert_abs_diff_eq!(f, rho.fidelity_pure(&psi).unwrap(), epsilon = 1e-10);
        }
    }

    #[test]
    fn pattern_lists() {
        let p3 = correlator_patterns(3);
        assert_eq!(p3.len(), 4);
        assert_eq!(p3[0], (vec![Sigma::X, Sigma::X, Sigma::X], 1.0));
        assert!(p3[1..].iter().all(|(_, s)| *s == -1.0));
        let p2 = correlator_patterns(2);
        assert_eq!(
            p2,
            vec![
                (vec![Sigma::X, Sigma::X], 1.0),
                (vec![Sigma::Y, Sigma::Y], -1.0)
            ]
        );
        let p4 = correlator_patterns(4);
        assert_eq!(p4.len(), 8);
        assert_eq!(p4.last().unwrap(), &(vec![Sigma::Y; 4], 1.0));
    }

    #[test]
    fn correlator_formulas() {
        // ideal target, <000|rho|111>: full-state expectations are ±1/2
        let v = offdiag_from_correlators(0.5, -0.5, -0.5, -0.5).unwrap();
        assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        assert_eq!(offdiag_from_correlators(0.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!(offdiag_from_correlators(1.1, 0.0, 0.0, 0.0).is_err());
        assert_abs_diff_eq!(
            offdiag_from_pair_correlators(0.5, -0.5).unwrap(),
            0.25,
            epsilon = 1e-15
        );
        assert!(offdiag_from_pair_correlators(0.0, -1.5).is_err());
        assert_abs_diff_eq!(
            offdiag_from_patterns(3, &[0.5, -0.5, -0.5, -0.5]).unwrap(),
            0.25,
            epsilon = 1e-15
        );
    }

    #[test]
    fn subspace_fidelity_examples() {
        assert_abs_diff_eq!(subspace_fidelity(0.5, 0.5, 0.5), 1.0);
        assert_abs_diff_eq!(subspace_fidelity(0.5, 0.5, 0.0), 0.5);
        assert_abs_diff_eq!(
            renormalized_subspace_fidelity(0.25, 0.25, 0.25).unwrap(),
            1.0
        );
        assert!(renormalized_subspace_fidelity(0.0, 0.0, 0.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn subspace_fidelity_of_two_term_states(
            theta in 0.0f64..std::f64::consts::PI,
            phi in 0.0f64..std::f64::consts::TAU,
            p in 0.0f64..=1.0,
        ) {
            // rho = p|chi><chi| + (1-p)·I/2 within span{|a>, |b>}
            let (s, co) = (theta / 2.0).sin_cos();
            let coherence = p * co * s * phi.cos();
            let da = p * co * co + (1.0 - p) / 2.0;
            let db = p * s * s + (1.0 - p) / 2.0;
            let f = subspace_fidelity(da, db, coherence);
            prop_assert!(f <= 1.0 + 1e-12);
            if f > 1.0 - 1e-10 {
                // only the balanced, in-phase, pure superposition gets here
                prop_assert!(p > 1.0 - 1e-9);
                prop_assert!((da - 0.5).abs() < 1e-4 && (coherence - 0.5).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn subspace_fidelity_hits_one_only_on_target() {
        let h = 0.5;
        assert_abs_diff_eq!(subspace_fidelity(h, h, h), 1.0);
        assert!(subspace_fidelity(h, h, -h) < 1e-12);
        assert!(subspace_fidelity(0.6, 0.4, 0.48989794855663565) < 1.0 - 1e-3);
    }

    #[test]
    fn witness_sign_and_decision() {
        let w = ghz_witness_value(0.910).unwrap();
        assert!(w.witnessed);
        assert_abs_diff_eq!(w.margin, 0.41, epsilon = 1e-12);
        assert_abs_diff_eq!(w.expectation, -0.41, epsilon = 1e-12);
        assert!(!ghz_witness_value(0.5).unwrap().witnessed);
        assert_abs_diff_eq!(ghz_witness_value(1.0).unwrap().expectation, -0.5);
        assert!(ghz_witness_value(1.2).is_err());
    }

    #[test]
    fn certification_examples() {
        let cert = certify_dimensionality(0.854, 0.007, 0.750).unwrap();
        assert_abs_diff_eq!(cert.margin_sigma, 14.857142857142856, epsilon = 1e-9);
        assert!(cert.certified);
        assert_eq!(cert.margin_sigma.floor(), 14.0);
        let edge = certify_dimensionality(0.750, 0.01, 0.750).unwrap();
        assert_eq!(edge.margin_sigma, 0.0);
        assert!(!edge.certified);
        let below = certify_dimensionality(0.74, 0.01, 0.750).unwrap();
        assert!(below.margin_sigma < 0.0 && !below.certified);
        assert!(certify_dimensionality(0.8, 0.0, 0.75).is_err());
    }

    #[test]
    fn element_labels_parse_and_print() {
        let l = ElementLabel::new(&[0, 0, 0], &[1, 1, 1]);
        assert_eq!(l.to_string(), "<000|rho|111>");
        assert_eq!(ElementLabel::parse("<000|rho|111>").unwrap(), l);
        assert!(ElementLabel::parse("000|111").is_err());
        assert!(l.same_real_part(&[1, 1, 1], &[0, 0, 0]));
    }
}
