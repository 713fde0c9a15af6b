//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use layered_core::tensor::Dims;
use layered_core::{Complex64, DensityOperator, PureState};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_state(dims: Dims, rng: &mut impl Rng) -> PureState {
    let amps = DVector::from_fn(dims.total(), |_, _| gaussian(rng));
    PureState::normalized(dims, amps).unwrap()
}

/// Ginibre-distributed density operator of full rank.
pub fn random_density(dims: Dims, rng: &mut impl Rng) -> DensityOperator {
    let n = dims.total();
    let g = DMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let m = &g * g.adjoint();
    let tr = m.trace();
    let m = m.map(|z| z / tr);
    DensityOperator::new(dims, (&m + m.adjoint()).scale(0.5)).unwrap()
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations on its real
/// 2n×2n embedding. Every eigenvalue appears twice in the embedding; one
/// copy of each is returned, descending.
pub fn jacobi_hermitian_eigenvalues(h: &DMatrix<Complex64>) -> Vec<f64> {
    let n = h.nrows();
    let m = 2 * n;
    let mut a = vec![vec![0.0f64; m]; m];
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            a[i][j] = z.re;
            a[i + n][j + n] = z.re;
            a[i][j + n] = -z.im;
            a[i + n][j] = z.im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..m).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
    eig.chunks(2)
        .map(|pair| 0.5 * (pair[0] + pair[1]))
        .collect()
}

/// Reduced density matrix of one party, by explicit index sums.
pub fn single_party_reduced(psi: &PureState, party: usize) -> DMatrix<Complex64> {
    let dims = psi.dims();
    let d = dims.get(party);
    let mut out = DMatrix::zeros(d, d);
    for i in 0..dims.total() {
        let di = dims.digits(i);
        for j in 0..dims.total() {
            let dj = dims.digits(j);
            let same_rest = (0..dims.parties()).all(|p| p == party || di[p] == dj[p]);
            if same_rest {
                out[(di[party], dj[party])] += psi.amplitudes()[i] * psi.amplitudes()[j].conj();
            }
        }
    }
    out
}

// ---- bounded-rank overlap hill climb on dims (4, 4, 2) ----

type Vec32 = [Complex64; 32];
type Mat4 = [[Complex64; 4]; 4];

/// `Σ_k U[:,k] U[:,k]†` over the first three columns, applied on `party`.
fn apply_rank3(x: &Vec32, u: &Mat4, party: usize) -> Vec32 {
    let mut out = [Complex64::new(0.0, 0.0); 32];
    let index = |a: usize, b: usize, c: usize| a * 8 + b * 2 + c;
    for o1 in 0..4 {
        for o2 in 0..2 {
            let pick = |l: usize| {
                if party == 0 {
                    index(l, o1, o2)
                } else {
                    index(o1, l, o2)
                }
            };
            let v: [Complex64; 4] = std::array::from_fn(|l| x[pick(l)]);
            for k in 0..3 {
                let coeff: Complex64 = (0..4).map(|l| u[l][k].conj() * v[l]).sum();
                for l in 0..4 {
                    out[pick(l)] += u[l][k] * coeff;
                }
            }
        }
    }
    out
}

fn overlap(x: &Vec32, u: &Mat4, party: usize) -> f64 {
    let phi = apply_rank3(x, u, party);
    let norm: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
    if norm < 1e-300 {
        return 0.0;
    }
    let amp = 0.5 * (phi[0] + phi[8 + 2 + 1] + phi[2 * 8 + 2 * 2] + phi[3 * 8 + 3 * 2 + 1]);
    amp.norm_sqr() / norm
}

fn orthonormalize(u: &mut Mat4) {
    for k in 0..4 {
        for j in 0..k {
            let proj: Complex64 = (0..4).map(|l| u[l][j].conj() * u[l][k]).sum();
            for l in 0..4 {
                let v = u[l][j];
                u[l][k] -= proj * v;
            }
        }
        let norm = (0..4).map(|l| u[l][k].norm_sqr()).sum::<f64>().sqrt();
        for row in u.iter_mut() {
            row[k] /= norm;
        }
    }
}

/// Best overlap of `Ψ442` found by one (1+1) evolution-strategy climb over
/// states `P·X/‖P·X‖` with `P` a rank-3 projector on party `party`.
pub fn hill_climb(seed: u64, restart: u64, steps: usize) -> f64 {
    let mut rng = rng(seed, restart);
    let party = (restart % 2) as usize;
    let mut x: Vec32 = std::array::from_fn(|_| gaussian(&mut rng));
    let mut u: Mat4 = std::array::from_fn(|_| std::array::from_fn(|_| gaussian(&mut rng)));
    orthonormalize(&mut u);
    let mut best = overlap(&x, &u, party);
    let (mut step_x, mut step_u) = (0.5, 0.5);
    for s in 0..steps {
        if s % 2 == 0 {
            let mut cand = x;
            for z in cand.iter_mut() {
                *z += gaussian(&mut rng) * step_x;
            }
            let f = overlap(&cand, &u, party);
            if f > best {
                best = f;
                x = cand;
                step_x *= 1.5;
            } else {
                step_x *= 0.9;
            }
        } else {
            let mut cand = u;
            for row in cand.iter_mut() {
                for z in row.iter_mut() {
                    *z += gaussian(&mut rng) * step_u;
                }
            }
            orthonormalize(&mut cand);
            let f = overlap(&x, &cand, party);
            if f > best {
                best = f;
                u = cand;
                step_u *= 1.5;
            } else {
                step_u *= 0.9;
            }
        }
        step_x = step_x.clamp(1e-9, 2.0);
        step_u = step_u.clamp(1e-9, 2.0);
    }
    best
}
