//! Linear-optics model of the state preparation: polarization Bell pairs,
//! PBS fusion into a three-photon GHZ state, and the beam-displacer device
//! that doubles the local dimension by post-selection.
//!
//! A photon is either a bare polarization qubit (dimension 2, `H = 0`,
//! `V = 1`) or, after a beam displacer, a polarization ⊗ path ququart whose
//! digit is `2·pol + path`. That layout is exactly the logical encoding
//! `(H,u)→0, (H,l)→1, (V,u)→2, (V,l)→3`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8};

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{c, DensityOperator, Dims, Ket, PureState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarization {
    H,
    V,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PathMode {
    Upper,
    Lower,
}

/// Hybrid polarization–path mode of one photon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModeLabel {
    pub polarization: Polarization,
    pub path: PathMode,
}

impl ModeLabel {
    pub fn digit(self) -> usize {
        let pol = match self.polarization {
            Polarization::H => 0,
            Polarization::V => 1,
        };
        let path = match self.path {
            PathMode::Upper => 0,
            PathMode::Lower => 1,
        };
        2 * pol + path
    }

    pub fn from_digit(digit: usize) -> Result<Self> {
        if digit > 3 {
            return Err(Error::InvalidDigit { digit, dim: 4 });
        }
        Ok(Self {
            polarization: if digit < 2 {
                Polarization::H
            } else {
                Polarization::V
            },
            path: if digit.is_multiple_of(2) {
                PathMode::Upper
            } else {
                PathMode::Lower
            },
        })
    }
}

/// Jones matrix of a half-wave plate with fast axis at `theta`, on `(H, V)`.
pub fn hwp_matrix(theta: f64) -> Matrix2<f64> {
    let (s, c2) = (2.0 * theta).sin_cos();
    Matrix2::new(c2, s, s, -c2)
}

/// Quarter-wave plate: `diag(1, i)` in the frame rotated by `theta`.
pub fn qwp_matrix(theta: f64) -> Matrix2<Complex64> {
    let (s, co) = theta.sin_cos();
    let rot = Matrix2::new(c(co), c(-s), c(s), c(co));
    let retarder = Matrix2::new(c(1.0), Complex64::ZERO, Complex64::ZERO, Complex64::i());
    rot * retarder * rot.transpose()
}

/// Which path modes a waveplate covers once a photon carries a path qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PathSelector {
    #[default]
    Both,
    Only(PathMode),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ElementKind {
    /// Half-wave plate at the given angle (radians).
    Hwp(f64),
    /// Quarter-wave plate at the given angle (radians).
    Qwp(f64),
    /// Beam displacer: `H` to the upper path, `V` to the lower path.
    BeamDisplacer,
    /// Polarizing beam splitter shared with `partner`, followed by the
    /// one-photon-per-output coincidence condition.
    Pbs { partner: usize },
}

/// An optical element placed on one photon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpticalElement {
    pub kind: ElementKind,
    pub party: usize,
    pub paths: PathSelector,
}

impl OpticalElement {
    pub fn new(kind: ElementKind, party: usize) -> Self {
        Self {
            kind,
            party,
            paths: PathSelector::Both,
        }
    }

    pub fn on_path(mut self, path: PathMode) -> Self {
        self.paths = PathSelector::Only(path);
        self
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        let parties = ket.dims().parties();
        if self.party >= parties {
            return Err(Error::InvalidParty {
                party: self.party,
                parties,
            });
        }
        let dim = ket.dims().get(self.party);
        match self.kind {
            ElementKind::Hwp(theta) => {
                if !theta.is_finite() {
                    return Err(Error::Parse(format!("waveplate angle {theta}")));
                }
                let m = hwp_matrix(theta).map(c);
                self.apply_waveplate(ket, dim, &m)
            }
            ElementKind::Qwp(theta) => {
                if !theta.is_finite() {
                    return Err(Error::Parse(format!("waveplate angle {theta}")));
                }
                self.apply_waveplate(ket, dim, &qwp_matrix(theta))
            }
            ElementKind::BeamDisplacer => {
                if dim != 2 {
                    return Err(Error::DimensionMismatch {
                        expected: vec![2],
                        found: vec![dim],
                    });
                }
                let h_upper = ModeLabel {
                    polarization: Polarization::H,
                    path: PathMode::Upper,
                };
                let v_lower = ModeLabel {
                    polarization: Polarization::V,
                    path: PathMode::Lower,
                };
                let mut iso = DMatrix::zeros(4, 2);
                iso[(h_upper.digit(), 0)] = c(1.0);
                iso[(v_lower.digit(), 1)] = c(1.0);
                ket.apply_local(self.party, &iso)
            }
            ElementKind::Pbs { partner } => {
                if partner >= parties || partner == self.party {
                    return Err(Error::InvalidParty {
                        party: partner,
                        parties,
                    });
                }
                let dims = ket.dims().clone();
                let (a, b) = (self.party, partner);
                Ok(ket.filter(|digits| {
                    polarization_bit(&dims, a, digits[a]) == polarization_bit(&dims, b, digits[b])
                }))
            }
        }
    }

    fn apply_waveplate(&self, ket: &Ket, dim: usize, m: &Matrix2<Complex64>) -> Result<Ket> {
        match (dim, self.paths) {
            (2, PathSelector::Both) => {
                let op = DMatrix::from_iterator(2, 2, m.iter().copied());
                ket.apply_local(self.party, &op)
            }
            (4, sel) => {
                let mut op = DMatrix::zeros(4, 4);
                for path in 0..2 {
                    let covered = match sel {
                        PathSelector::Both => true,
                        PathSelector::Only(PathMode::Upper) => path == 0,
                        PathSelector::Only(PathMode::Lower) => path == 1,
                    };
                    for (po, pi) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let w = if covered {
                            m[(po, pi)]
                        } else if po == pi {
                            c(1.0)
                        } else {
                            Complex64::ZERO
                        };
                        op[(2 * po + path, 2 * pi + path)] = w;
                    }
                }
                ket.apply_local(self.party, &op)
            }
            _ => Err(Error::DimensionMismatch {
                expected: vec![4],
                found: vec![dim],
            }),
        }
    }
}

fn polarization_bit(dims: &Dims, party: usize, digit: usize) -> usize {
    if dims.get(party) == 4 {
        digit / 2
    } else {
        digit
    }
}

/// A post-selected circuit output.
#[derive(Clone, Debug)]
pub struct CircuitOutcome {
    pub state: PureState,
    /// Squared norm of the kept component.
    pub success_probability: f64,
}

fn qubit_dims(n: usize) -> Dims {
    Dims::new(vec![2; n]).expect("small qubit register")
}

/// `(|HH⟩ + |VV⟩)/√2`.
pub fn bell_pair() -> PureState {
    PureState::from_terms(qubit_dims(2), &[(&[0, 0], c(1.0)), (&[1, 1], c(1.0))])
        .expect("valid Bell pair")
}

fn require_dims(psi: &PureState, prefix: &[usize], exact: bool) -> Result<()> {
    let dims = psi.dims().as_slice();
    let ok = dims.len() >= prefix.len()
        && dims[..prefix.len()] == *prefix
        && (!exact || dims.len() == prefix.len());
    if !ok {
        return Err(Error::DimensionMismatch {
            expected: prefix.to_vec(),
            found: dims.to_vec(),
        });
    }
    if (psi.norm_sqr() - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized {
            norm_sqr: psi.norm_sqr(),
        });
    }
    Ok(())
}

/// Fuses two polarization pairs on a PBS (photons 2 and 3), keeping only
/// one-photon-per-output coincidences.
///
/// Photon 3 is the trigger: it is detected in the diagonal basis and the
/// `−` outcome is undone by a phase flip, so the herald carries no extra
/// cost. The returned state lives on photons (1, 2, 4) and
/// `success_probability` is the PBS coincidence probability.
pub fn ghz_fuse(pair1: &PureState, pair2: &PureState) -> Result<CircuitOutcome> {
    require_dims(pair1, &[2, 2], true)?;
    require_dims(pair2, &[2, 2], true)?;
    let joint = Ket::from(pair1).tensor(&Ket::from(pair2))?;
    let fused = OpticalElement::new(ElementKind::Pbs { partner: 2 }, 1).apply(&joint)?;
    let success_probability = fused.norm_sqr();
    let plus = DMatrix::from_row_slice(1, 2, &[c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)]);
    let heralded = fused.apply_local(2, &plus)?.squeeze()?;
    let (state, _) = heralded.into_state()?;
    Ok(CircuitOutcome {
        state,
        success_probability,
    })
}

/// The dimension-doubling optics on the first two photons, in order.
pub fn doubling_elements() -> Vec<OpticalElement> {
    vec![
        OpticalElement::new(ElementKind::BeamDisplacer, 0),
        OpticalElement::new(ElementKind::BeamDisplacer, 1),
        OpticalElement::new(ElementKind::Hwp(FRAC_PI_8), 0),
        OpticalElement::new(ElementKind::Hwp(FRAC_PI_8), 1),
        OpticalElement::new(ElementKind::Pbs { partner: 1 }, 0),
    ]
}

/// Turns polarization qubits on parties 0 and 1 into ququarts: beam
/// displacers, 22.5° half-wave plates on both paths, and PBS coincidence.
/// Any further parties pass through untouched.
pub fn dimension_double(psi: &PureState) -> Result<CircuitOutcome> {
    require_dims(psi, &[2, 2], false)?;
    let mut ket = Ket::from(psi);
    for element in doubling_elements() {
        ket = element.apply(&ket)?;
    }
    let (state, success_probability) = ket.into_state()?;
    Ok(CircuitOutcome {
        state,
        success_probability,
    })
}

/// `(|000⟩ + |111⟩ + |220⟩ + |331⟩)/2` on dims (4, 4, 2).
pub fn make_psi442() -> PureState {
    let half = c(0.5);
    PureState::from_terms(
        Dims::new(vec![4, 4, 2]).expect("valid dims"),
        &[
            (&[0, 0, 0], half),
            (&[1, 1, 1], half),
            (&[2, 2, 0], half),
            (&[3, 3, 1], half),
        ],
    )
    .expect("valid target state")
}

/// Result of running the full preparation chain.
#[derive(Clone, Debug)]
pub struct Preparation {
    pub state: PureState,
    pub fusion_probability: f64,
    pub doubling_probability: f64,
}

impl Preparation {
    pub fn total_probability(&self) -> f64 {
        self.fusion_probability * self.doubling_probability
    }
}

/// Two Bell pairs → GHZ fusion → dimension doubling.
pub fn prepare_psi442() -> Result<Preparation> {
    let ghz = ghz_fuse(&bell_pair(), &bell_pair())?;
    let doubled = dimension_double(&ghz.state)?;
    Ok(Preparation {
        state: doubled.state,
        fusion_probability: ghz.success_probability,
        doubling_probability: doubled.success_probability,
    })
}

/// `v·|ψ⟩⟨ψ| + (1−v)·I/D`.
pub fn apply_white_noise(psi: &PureState, visibility: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::OutOfRange {
            name: "visibility",
            value: visibility,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let mixed = DensityOperator::maximally_mixed(psi.dims().clone());
    psi.projector().mix(visibility, &mixed)
}

/// Visibility that gives fidelity `f` with the pure target under white noise.
pub fn visibility_for_fidelity(f: f64, total_dim: usize) -> f64 {
    let d = total_dim as f64;
    (f - 1.0 / d) / (1.0 - 1.0 / d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::rank_vector;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Brute-force PBS fusion: expand both pairs over the 16 polarization
    /// patterns, route H straight through and V across, and keep patterns
    /// with exactly one photon in each output port.
    fn fusion_oracle(p1: &PureState, p2: &PureState) -> (Vec<Complex64>, f64) {
        let mut kept = vec![Complex64::ZERO; 16];
        for a in 0..2 {
            for b in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        let amp = p1.amplitude(&[a, b]) * p2.amplitude(&[x, y]);
                        // photon 2 enters port 0, photon 3 enters port 1;
                        // H transmits, V reflects into the other port
                        let port2 = if b == 0 { 0 } else { 1 };
                        let port3 = if x == 0 { 1 } else { 0 };
                        if port2 != port3 {
                            kept[a * 8 + b * 4 + x * 2 + y] = amp;
                        }
                    }
                }
            }
        }
        let p = kept.iter().map(|z| z.norm_sqr()).sum();
        (kept, p)
    }

    #[test]
    fn mode_labels_biject_onto_digits() {
        for d in 0..4 {
            assert_eq!(ModeLabel::from_digit(d).unwrap().digit(), d);
        }
        let hl = ModeLabel {
            polarization: Polarization::H,
            path: PathMode::Lower,
        };
        assert_eq!(hl.digit(), 1);
        let vu = ModeLabel {
            polarization: Polarization::V,
            path: PathMode::Upper,
        };
        assert_eq!(vu.digit(), 2);
        assert!(ModeLabel::from_digit(4).is_err());
    }

    #[test]
    fn bell_pair_amplitudes_and_marginal() {
        let bell = bell_pair();
        let h = FRAC_1_SQRT_2;
        let amps: Vec<f64> = bell.amplitudes().iter().map(|z| z.re).collect();
        assert_abs_diff_eq!(
            amps.as_slice(),
            [h, 0.0, 0.0, h].as_slice(),
            epsilon = 1e-15
        );
        let rho = bell.projector();
        let marginal = rho.partial_trace(&[1]).unwrap();
        assert_abs_diff_eq!(marginal.element(&[0], &[0]).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(marginal.element(&[0], &[1]).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.fidelity_pure(&bell).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn waveplate_examples() {
        let zero = hwp_matrix(0.0);
        assert_abs_diff_eq!(zero, Matrix2::new(1.0, 0.0, 0.0, -1.0), epsilon = 1e-15);
        let h = FRAC_1_SQRT_2;
        assert_abs_diff_eq!(
            hwp_matrix(FRAC_PI_8),
            Matrix2::new(h, h, h, -h),
            epsilon = 1e-15
        );
        let swap = hwp_matrix(std::f64::consts::FRAC_PI_4);
        assert_abs_diff_eq!(swap, Matrix2::new(0.0, 1.0, 1.0, 0.0), epsilon = 1e-15);
        let q0 = qwp_matrix(0.0);
        assert_abs_diff_eq!(q0[(1, 1)].im, 1.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn waveplates_are_unitary(theta in -10.0f64..10.0) {
            let h = hwp_matrix(theta);
            prop_assert!((h * h.transpose() - Matrix2::identity()).camax() < 1e-12);
            let q = qwp_matrix(theta);
            prop_assert!((q * q.adjoint() - Matrix2::identity()).camax() < 1e-12);
        }
    }

    #[test]
    fn fusion_of_bell_pairs_matches_oracle() {
        let bell = bell_pair();
        let (kept, p) = fusion_oracle(&bell, &bell);
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
        // only |HHHH> and |VVVV> survive
        assert_abs_diff_eq!(kept[0].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(kept[15].re, 0.5, epsilon = 1e-15);

        let out = ghz_fuse(&bell, &bell).unwrap();
        assert_abs_diff_eq!(out.success_probability, 0.5, epsilon = 1e-12);
        let ghz =
            PureState::from_terms(qubit_dims(3), &[(&[0, 0, 0], c(1.0)), (&[1, 1, 1], c(1.0))])
                .unwrap();
        assert!(out.state.distance(&ghz).unwrap() < 1e-12);
        assert_abs_diff_eq!(
            out.state.projector().fidelity_pure(&ghz).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn fusion_of_product_pairs() {
        let hh = PureState::basis(qubit_dims(2), &[0, 0]).unwrap();
        let (_, p) = fusion_oracle(&hh, &hh);
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-15);
        let out = ghz_fuse(&hh, &hh).unwrap();
        assert_abs_diff_eq!(out.success_probability, 1.0, epsilon = 1e-12);
        let hhh = PureState::basis(qubit_dims(3), &[0, 0, 0]).unwrap();
        assert!(out.state.distance(&hhh).unwrap() < 1e-12);

        // |HV> ⊗ |HV>: photon 2 is V and photon 3 is H, both exit the same port
        let hv = PureState::basis(qubit_dims(2), &[0, 1]).unwrap();
        assert!(matches!(ghz_fuse(&hv, &hv), Err(Error::PostSelectionEmpty)));
    }

    #[test]
    fn fusion_rejects_wrong_inputs() {
        let single = PureState::basis(qubit_dims(1), &[0]).unwrap();
        assert!(ghz_fuse(&single, &bell_pair()).is_err());
        assert!(matches!(
            PureState::new(qubit_dims(2), nalgebra::DVector::from_element(4, c(1.0))),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn doubling_of_bell_pair() {
        let out = dimension_double(&bell_pair()).unwrap();
        assert_abs_diff_eq!(out.success_probability, 0.5, epsilon = 1e-12);
        let expected = PureState::from_terms(
            Dims::new(vec![4, 4]).unwrap(),
            &[
                (&[0, 0], c(1.0)),
                (&[1, 1], c(1.0)),
                (&[2, 2], c(1.0)),
                (&[3, 3], c(1.0)),
            ],
        )
        .unwrap();
        assert!(out.state.distance(&expected).unwrap() < 1e-12);
    }

    #[test]
    fn doubling_of_hh_term() {
        // |H_u H_u> -> (H_u + V_u)(H_u + V_u)/2 -> keep H_uH_u + V_uV_u = |00> + |22>
        let hh = PureState::basis(qubit_dims(2), &[0, 0]).unwrap();
        let out = dimension_double(&hh).unwrap();
        assert_abs_diff_eq!(out.success_probability, 0.5, epsilon = 1e-12);
        let expected = PureState::from_terms(
            Dims::new(vec![4, 4]).unwrap(),
            &[(&[0, 0], c(1.0)), (&[2, 2], c(1.0))],
        )
        .unwrap();
        assert!(out.state.distance(&expected).unwrap() < 1e-12);
    }

    #[test]
    fn doubling_rejects_malformed_input() {
        let psi = PureState::basis(Dims::new(vec![4, 2]).unwrap(), &[0, 0]).unwrap();
        assert!(matches!(
            dimension_double(&psi),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn full_chain_produces_target() {
        let prep = prepare_psi442().unwrap();
        let target = make_psi442();
        assert!(prep.state.distance(&target).unwrap() < 1e-12);
        assert_abs_diff_eq!(prep.fusion_probability, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(prep.doubling_probability, 0.5, epsilon = 1e-12);
        assert_eq!(rank_vector(&target, None).unwrap().as_slice(), &[4, 4, 2]);
    }

    #[test]
    fn target_amplitudes_and_subspace_overlap() {
        let psi = make_psi442();
        for idx in 0..32 {
            let digits = psi.dims().digits(idx);
            let signal = [[0, 0, 0], [1, 1, 1], [2, 2, 0], [3, 3, 1]]
                .iter()
                .any(|k| k.as_slice() == digits.as_slice());
            let expected = if signal { 0.5 } else { 0.0 };
            assert_abs_diff_eq!(psi.amplitudes()[idx].re, expected, epsilon = 1e-15);
        }
        let ghz = PureState::from_terms(
            psi.dims().clone(),
            &[(&[0, 0, 0], c(1.0)), (&[1, 1, 1], c(1.0))],
        )
        .unwrap();
        assert_abs_diff_eq!(
            ghz.projector().fidelity_pure(&psi).unwrap(),
            0.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn white_noise_examples() {
        let psi = make_psi442();
        let pure = apply_white_noise(&psi, 1.0).unwrap();
        assert!((pure.matrix() - psi.projector().matrix()).camax() < 1e-15);
        let mixed = apply_white_noise(&psi, 0.0).unwrap();
        assert_abs_diff_eq!(
            mixed.element(&[1, 2, 1], &[1, 2, 1]).re,
            1.0 / 32.0,
            epsilon = 1e-15
        );
        let v = visibility_for_fidelity(0.854, 32);
        assert_abs_diff_eq!(v, 0.8493, epsilon = 1e-4);
        let noisy = apply_white_noise(&psi, v).unwrap();
        assert_abs_diff_eq!(noisy.fidelity_pure(&psi).unwrap(), 0.854, epsilon = 1e-12);
        assert!(apply_white_noise(&psi, 1.5).is_err());
        assert!(apply_white_noise(&psi, -0.1).is_err());
    }

    #[test]
    fn waveplate_on_single_path() {
        let psi = PureState::basis(Dims::new(vec![4]).unwrap(), &[1]).unwrap(); // H, lower
        let ket = Ket::from(&psi);
        let upper_only = OpticalElement::new(ElementKind::Hwp(std::f64::consts::FRAC_PI_4), 0)
            .on_path(PathMode::Upper);
        let out = upper_only.apply(&ket).unwrap();
        assert_eq!(out.amplitudes()[1], c(1.0));
        let lower_only = OpticalElement::new(ElementKind::Hwp(std::f64::consts::FRAC_PI_4), 0)
            .on_path(PathMode::Lower);
        let out = lower_only.apply(&ket).unwrap();
        assert_abs_diff_eq!(out.amplitudes()[3].re, 1.0, epsilon = 1e-15);
    }
}
