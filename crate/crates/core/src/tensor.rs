//! Dense complex linear algebra for small multipartite Hilbert spaces.
//!
//! Composite indices use a mixed-radix, row-major layout in which party 0 is
//! the most significant digit, so the ket `|ijk⟩` sits at
//! `i * d1 * d2 + j * d2 + k`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest composite dimension handled by the dense routines.
pub const MAX_TOTAL_DIM: usize = 4096;

const NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const POSITIVITY_TOL: f64 = 1e-10;

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Ordered per-party dimensions (or ranks) of a multipartite system.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Dims(Vec<usize>);

impl Dims {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidDims("no parties".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d == 0) {
            return Err(Error::InvalidDims(format!("entry {d} must be >= 1")));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&t| t <= MAX_TOTAL_DIM);
        if total.is_none() {
            return Err(Error::InvalidDims(format!(
                "{dims:?} exceeds total dimension {MAX_TOTAL_DIM}"
            )));
        }
        Ok(Self(dims))
    }

    pub fn parties(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    pub fn get(&self, party: usize) -> usize {
        self.0[party]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Splits a composite index into per-party digits.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.0.len()];
        for (slot, &d) in out.iter_mut().zip(&self.0).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    /// Composite index of a digit tuple. Digits must be in range.
    pub fn index(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.0.len());
        digits
            .iter()
            .zip(&self.0)
            .fold(0, |acc, (&digit, &d)| acc * d + digit)
    }

    pub fn check_digits(&self, digits: &[usize]) -> Result<()> {
        if digits.len() != self.0.len() {
            return Err(Error::Parse(format!(
                "expected {} digits, found {}",
                self.0.len(),
                digits.len()
            )));
        }
        for (&digit, &dim) in digits.iter().zip(&self.0) {
            if digit >= dim {
                return Err(Error::InvalidDigit { digit, dim });
            }
        }
        Ok(())
    }

    pub fn concat(&self, other: &Dims) -> Result<Dims> {
        Dims::new(self.0.iter().chain(&other.0).copied().collect())
    }

    fn check_party(&self, party: usize) -> Result<()> {
        if party >= self.parties() {
            return Err(Error::InvalidParty {
                party,
                parties: self.parties(),
            });
        }
        Ok(())
    }

    /// Validates a party subset and returns it sorted.
    fn subset(&self, parties: &[usize]) -> Result<Vec<usize>> {
        let mut sorted = parties.to_vec();
        sorted.sort_unstable();
        for &p in &sorted {
            self.check_party(p)?;
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidCut(format!("repeated party in {parties:?}")));
        }
        Ok(sorted)
    }
}

impl TryFrom<Vec<usize>> for Dims {
    type Error = Error;

    fn try_from(value: Vec<usize>) -> Result<Self> {
        Dims::new(value)
    }
}

impl From<Dims> for Vec<usize> {
    fn from(value: Dims) -> Self {
        value.0
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

/// Formats a digit tuple as a ket label such as `"220"`.
pub fn ket_label(digits: &[usize]) -> String {
    digits
        .iter()
        .map(|&d| char::from_digit(d as u32, 36).unwrap_or('?'))
        .collect()
}

/// Parses a ket label such as `"331"` into digits.
pub fn parse_ket(label: &str) -> Result<Vec<usize>> {
    label
        .chars()
        .map(|ch| {
            ch.to_digit(36)
                .map(|d| d as usize)
                .ok_or_else(|| Error::Parse(format!("bad ket label {label:?}")))
        })
        .collect()
}

/// Maps composite indices onto (kept, traced) index pairs for a party split.
struct Split {
    kept_dims: Vec<usize>,
    kept_total: usize,
    rest_total: usize,
    /// `full[k * rest_total + t]` is the composite index with kept part `k` and rest `t`.
    full: Vec<usize>,
}

impl Split {
    fn new(dims: &Dims, kept: &[usize]) -> Self {
        let kept_dims: Vec<usize> = kept.iter().map(|&p| dims.get(p)).collect();
        let rest: Vec<usize> = (0..dims.parties()).filter(|p| !kept.contains(p)).collect();
        let rest_dims: Vec<usize> = rest.iter().map(|&p| dims.get(p)).collect();
        let kept_total: usize = kept_dims.iter().product();
        let rest_total: usize = rest_dims.iter().product();
        let mut full = vec![0; kept_total * rest_total];
        for idx in 0..dims.total() {
            let digits = dims.digits(idx);
            let k = kept.iter().fold(0, |acc, &p| acc * dims.get(p) + digits[p]);
            let t = rest.iter().fold(0, |acc, &p| acc * dims.get(p) + digits[p]);
            full[k * rest_total + t] = idx;
        }
        Self {
            kept_dims,
            kept_total,
            rest_total,
            full,
        }
    }

    fn at(&self, kept: usize, rest: usize) -> usize {
        self.full[kept * self.rest_total + rest]
    }
}

/// A normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    dims: Dims,
    amps: DVector<Complex64>,
}

impl PureState {
    /// Builds a state, rejecting amplitude vectors whose squared norm deviates from 1.
    pub fn new(dims: Dims, amps: DVector<Complex64>) -> Result<Self> {
        check_len(&dims, amps.len())?;
        let norm_sqr = amps.norm_squared();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self { dims, amps })
    }

    /// Builds a state after dividing by the norm; fails on the zero vector.
    pub fn normalized(dims: Dims, amps: DVector<Complex64>) -> Result<Self> {
        check_len(&dims, amps.len())?;
        let norm = amps.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized {
                norm_sqr: norm * norm,
            });
        }
        Ok(Self {
            dims,
            amps: amps.unscale(norm),
        })
    }

    /// Equal-weight or weighted superposition of basis kets, normalized.
    pub fn from_terms(dims: Dims, terms: &[(&[usize], Complex64)]) -> Result<Self> {
        let mut amps = DVector::zeros(dims.total());
        for (digits, amp) in terms {
            dims.check_digits(digits)?;
            amps[dims.index(digits)] += amp;
        }
        Self::normalized(dims, amps)
    }

    pub fn basis(dims: Dims, digits: &[usize]) -> Result<Self> {
        Self::from_terms(dims, &[(digits, c(1.0))])
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amps
    }

    pub fn amplitude(&self, digits: &[usize]) -> Complex64 {
        self.amps[self.dims.index(digits)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        check_same_dims(&self.dims, &other.dims)?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// Euclidean distance between amplitude vectors (no phase alignment).
    pub fn distance(&self, other: &PureState) -> Result<f64> {
        check_same_dims(&self.dims, &other.dims)?;
        Ok((&self.amps - &other.amps).norm())
    }

    pub fn projector(&self) -> DensityOperator {
        DensityOperator {
            dims: self.dims.clone(),
            matrix: &self.amps * self.amps.adjoint(),
        }
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        Ok(PureState {
            dims: self.dims.concat(&other.dims)?,
            amps: self.amps.kronecker(&other.amps),
        })
    }

    /// Reduced density operator on `keep`.
    pub fn reduced(&self, keep: &[usize]) -> Result<DensityOperator> {
        let keep = self.dims.subset(keep)?;
        if keep.is_empty() {
            return Err(Error::InvalidCut("nothing to keep".into()));
        }
        let split = Split::new(&self.dims, &keep);
        let m = self.reshape(&split);
        Ok(DensityOperator {
            dims: Dims::new(split.kept_dims)?,
            matrix: &m * m.adjoint(),
        })
    }

    /// Amplitudes as a `kept × rest` matrix.
    fn reshape(&self, split: &Split) -> DMatrix<Complex64> {
        DMatrix::from_fn(split.kept_total, split.rest_total, |k, t| {
            self.amps[split.at(k, t)]
        })
    }
}

fn check_len(dims: &Dims, len: usize) -> Result<()> {
    if dims.total() != len {
        return Err(Error::InvalidDims(format!(
            "{} amplitudes for dims {dims}",
            len
        )));
    }
    Ok(())
}

fn check_same_dims(a: &Dims, b: &Dims) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a.as_slice().to_vec(),
            found: b.as_slice().to_vec(),
        });
    }
    Ok(())
}

/// An unnormalized amplitude vector, used for intermediate circuit states
/// before post-selection and renormalization.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    dims: Dims,
    amps: DVector<Complex64>,
}

impl Ket {
    pub fn new(dims: Dims, amps: DVector<Complex64>) -> Result<Self> {
        check_len(&dims, amps.len())?;
        Ok(Self { dims, amps })
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn tensor(&self, other: &Ket) -> Result<Ket> {
        Ok(Ket {
            dims: self.dims.concat(&other.dims)?,
            amps: self.amps.kronecker(&other.amps),
        })
    }

    /// Applies a `d_out × d_in` operator to one party. Non-square operators
    /// (isometries, bras) change that party's dimension.
    pub fn apply_local(&self, party: usize, op: &DMatrix<Complex64>) -> Result<Ket> {
        self.dims.check_party(party)?;
        let d_in = self.dims.get(party);
        if op.ncols() != d_in {
            return Err(Error::DimensionMismatch {
                expected: vec![d_in],
                found: vec![op.ncols()],
            });
        }
        let d_out = op.nrows();
        let mut new_dims = self.dims.as_slice().to_vec();
        new_dims[party] = d_out;
        let new_dims = Dims::new(new_dims)?;

        let stride: usize = self.dims.as_slice()[party + 1..].iter().product();
        let outer: usize = self.dims.as_slice()[..party].iter().product();
        let mut out = DVector::zeros(new_dims.total());
        for hi in 0..outer {
            for j in 0..d_out {
                for k in 0..d_in {
                    let w = op[(j, k)];
                    if w == Complex64::ZERO {
                        continue;
                    }
                    let src = hi * d_in * stride + k * stride;
                    let dst = hi * d_out * stride + j * stride;
                    for lo in 0..stride {
                        out[dst + lo] += w * self.amps[src + lo];
                    }
                }
            }
        }
        Ok(Ket {
            dims: new_dims,
            amps: out,
        })
    }

    /// Zeroes every amplitude whose digit tuple fails `keep`.
    pub fn filter(&self, keep: impl Fn(&[usize]) -> bool) -> Ket {
        let mut amps = self.amps.clone();
        for (idx, amp) in amps.iter_mut().enumerate() {
            if !keep(&self.dims.digits(idx)) {
                *amp = Complex64::ZERO;
            }
        }
        Ket {
            dims: self.dims.clone(),
            amps,
        }
    }

    /// Drops parties of dimension 1.
    pub fn squeeze(self) -> Result<Ket> {
        let kept: Vec<usize> = self
            .dims
            .as_slice()
            .iter()
            .copied()
            .filter(|&d| d > 1)
            .collect();
        let dims = if kept.is_empty() {
            Dims::new(vec![1])?
        } else {
            Dims::new(kept)?
        };
        Ok(Ket {
            dims,
            amps: self.amps,
        })
    }

    /// Renormalizes, returning the state and the squared norm that was removed.
    pub fn into_state(self) -> Result<(PureState, f64)> {
        let norm_sqr = self.norm_sqr();
        if norm_sqr <= f64::EPSILON * f64::EPSILON {
            return Err(Error::PostSelectionEmpty);
        }
        Ok((PureState::normalized(self.dims, self.amps)?, norm_sqr))
    }
}

impl From<&PureState> for Ket {
    fn from(state: &PureState) -> Self {
        Ket {
            dims: state.dims.clone(),
            amps: state.amps.clone(),
        }
    }
}

/// A density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    dims: Dims,
    matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(dims: Dims, matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = dims.total();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidDensity(format!(
                "{}x{} matrix for dims {dims}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let asym = (&matrix - matrix.adjoint()).camax();
        if asym > HERMITIAN_TOL {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (max deviation {asym:e})"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace {trace}")));
        }
        let hermitian = (&matrix + matrix.adjoint()).scale(0.5);
        let min_eig = hermitian
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -POSITIVITY_TOL {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self { dims, matrix })
    }

    pub fn maximally_mixed(dims: Dims) -> Self {
        let n = dims.total();
        Self {
            matrix: DMatrix::identity(n, n).unscale(n as f64),
            dims,
        }
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// `⟨bra|ρ|ket⟩` for digit tuples.
    pub fn element(&self, bra: &[usize], ket: &[usize]) -> Complex64 {
        self.matrix[(self.dims.index(bra), self.dims.index(ket))]
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn tensor(&self, other: &DensityOperator) -> Result<DensityOperator> {
        Ok(DensityOperator {
            dims: self.dims.concat(&other.dims)?,
            matrix: self.matrix.kronecker(&other.matrix),
        })
    }

    /// Convex combination `p·self + (1−p)·other`.
    pub fn mix(&self, p: f64, other: &DensityOperator) -> Result<DensityOperator> {
        check_same_dims(&self.dims, &other.dims)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange {
                name: "mixing weight",
                value: p,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(DensityOperator {
            dims: self.dims.clone(),
            matrix: self.matrix.scale(p) + other.matrix.scale(1.0 - p),
        })
    }

    /// Traces out every party not listed in `keep`. The result orders the
    /// kept parties ascending.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        let keep = self.dims.subset(keep)?;
        if keep.is_empty() {
            return Err(Error::InvalidCut("nothing to keep".into()));
        }
        let split = Split::new(&self.dims, &keep);
        let out = DMatrix::from_fn(split.kept_total, split.kept_total, |r, c| {
            (0..split.rest_total)
                .map(|t| self.matrix[(split.at(r, t), split.at(c, t))])
                .sum()
        });
        Ok(DensityOperator {
            dims: Dims::new(split.kept_dims)?,
            matrix: out,
        })
    }

    /// `⟨ψ|ρ|ψ⟩`, clamped to `[0, 1]`.
    pub fn fidelity_pure(&self, target: &PureState) -> Result<f64> {
        check_same_dims(&self.dims, &target.dims)?;
        let value = target.amps.dotc(&(&self.matrix * &target.amps)).re;
        Ok(value.clamp(0.0, 1.0))
    }
}

/// Schmidt decomposition of a pure state across `cut | rest`.
#[derive(Clone, Debug)]
pub struct SchmidtData {
    /// Parties on the left of the cut, ascending.
    pub cut: Vec<usize>,
    /// Schmidt coefficients λ_i, descending, with Σλ_i² = 1.
    pub coefficients: Vec<f64>,
    /// Left Schmidt vectors over the cut parties.
    pub left: Vec<DVector<Complex64>>,
    /// Right Schmidt vectors over the remaining parties.
    pub right: Vec<DVector<Complex64>>,
    dims: Dims,
}

impl SchmidtData {
    /// Squared coefficients λ_i², descending.
    pub fn weights(&self) -> Vec<f64> {
        self.coefficients.iter().map(|l| l * l).collect()
    }

    /// Number of coefficients above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.coefficients.iter().filter(|&&l| l > tol).count()
    }

    /// Rebuilds `Σ λ_i |left_i⟩ ⊗ |right_i⟩` in the original party order.
    pub fn reconstruct(&self) -> Result<PureState> {
        let split = Split::new(&self.dims, &self.cut);
        let mut amps = DVector::zeros(self.dims.total());
        for ((lam, l), r) in self.coefficients.iter().zip(&self.left).zip(&self.right) {
            for k in 0..split.kept_total {
                for t in 0..split.rest_total {
                    amps[split.at(k, t)] += l[k] * r[t] * *lam;
                }
            }
        }
        PureState::normalized(self.dims.clone(), amps)
    }
}

/// Schmidt decomposition across `cut | complement`.
pub fn schmidt_decompose(psi: &PureState, cut: &[usize]) -> Result<SchmidtData> {
    let cut = psi.dims.subset(cut)?;
    if cut.is_empty() || cut.len() == psi.dims.parties() {
        return Err(Error::InvalidCut(format!(
            "{cut:?} is not a proper non-empty subset"
        )));
    }
    let split = Split::new(&psi.dims, &cut);
    let m = psi.reshape(&split);
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    Ok(SchmidtData {
        coefficients: order.iter().map(|&i| svd.singular_values[i]).collect(),
        left: order.iter().map(|&i| u.column(i).into_owned()).collect(),
        right: order
            .iter()
            .map(|&i| v_t.row(i).transpose().into_owned())
            .collect(),
        cut,
        dims: psi.dims.clone(),
    })
}

/// Per-party Schmidt ranks (the ranks of the single-party reductions).
///
/// `tol` is an absolute threshold on λ_i; `None` uses `1e-8` times the
/// largest coefficient of each cut.
pub fn rank_vector(psi: &PureState, tol: Option<f64>) -> Result<Dims> {
    let ranks = (0..psi.dims.parties())
        .map(|p| {
            let data = schmidt_decompose(psi, &[p])?;
            let threshold = tol.unwrap_or(1e-8 * data.coefficients[0]);
            Ok(data.rank(threshold).max(1))
        })
        .collect::<Result<Vec<_>>>()?;
    Dims::new(ranks)
}

/// Kronecker product of states.
pub fn tensor_product(a: &PureState, b: &PureState) -> Result<PureState> {
    a.tensor(b)
}

pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    rho.partial_trace(keep)
}

pub fn fidelity_pure(rho: &DensityOperator, target: &PureState) -> Result<f64> {
    rho.fidelity_pure(target)
}
