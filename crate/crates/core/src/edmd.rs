//! Core Koopman approximation: Gram assembly, the pseudoinverse Koopman
//! matrix, its eigendecomposition with mode reconstruction, and the SVD-based
//! DMD baseline.
//!
//! With complex feature matrices the Gram pair uses conjugate transposes,
//! `G = Psi_X^H Psi_X` and `H = Psi_X^H Psi_Y`; for real features these
//! reduce to the plain transposes. The Koopman matrix is the minimum-norm
//! least-squares solution `A = G^+ H`.

use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::{Eig, Norm};
use num_complex::Complex64;

use crate::data::SnapshotSet;
use crate::error::{Error, Result};
use crate::features::FeatureMatrices;
use crate::linalg::{adjoint, complexify, hermitian_pinv, hermitize, svd_pinv, vec_norm};

/// Default relative cutoff for pseudoinverse truncation. Random-feature Gram
/// matrices are routinely near-singular.
pub const DEFAULT_RCOND: f64 = 1e-10;

/// Eigenvalues whose eigenvector residual exceeds this fraction of `||A||`
/// mark the decomposition as defective.
pub const EIG_RESIDUAL_TOL: f64 = 1e-8;

/// Tolerance used when detecting conjugate eigenvalue pairs.
pub const CONJUGATE_PAIR_TOL: f64 = 1e-8;

/// The Gram pair `G = Psi_X^H Psi_X` (Hermitian PSD) and cross-Gram
/// `H = Psi_X^H Psi_Y`.
#[derive(Debug, Clone)]
pub struct GramPair {
    pub g: Array2<Complex64>,
    pub h: Array2<Complex64>,
}

/// Assemble the Gram pair from feature matrices.
pub fn build_gram(psi: &FeatureMatrices) -> Result<GramPair> {
    let psi_x_h = adjoint(&psi.psi_x);
    let mut g = psi_x_h.dot(&psi.psi_x);
    let h = psi_x_h.dot(&psi.psi_y);
    let finite = g
        .iter()
        .chain(h.iter())
        .all(|z| z.re.is_finite() && z.im.is_finite());
    if !finite {
        return Err(Error::Numeric("Gram matrices have non-finite entries".into()));
    }
    // G is Hermitian in exact arithmetic; enforce it so downstream
    // eigensolves and block updates see an exactly Hermitian operand.
    hermitize(&mut g);
    Ok(GramPair { g, h })
}

/// Koopman matrix `A = G^+ H` with relative truncation `rcond`.
pub fn koopman_matrix(gram: &GramPair, rcond: f64) -> Result<Array2<Complex64>> {
    if gram.g.dim() != gram.h.dim() {
        return Err(Error::DimensionMismatch(format!(
            "G is {:?} but H is {:?}",
            gram.g.dim(),
            gram.h.dim()
        )));
    }
    let (g_pinv, _) = hermitian_pinv(&gram.g, rcond)?;
    Ok(g_pinv.dot(&gram.h))
}

/// A (possibly truncated) Koopman eigendecomposition.
///
/// Eigenpairs are ordered by ascending `|Re(ln(mu)/dt)|` — proximity of the
/// continuous-time eigenvalue to the imaginary axis — with conjugate pairs
/// kept adjacent. Mode columns are phase-normalized so their
/// largest-magnitude component is real and positive.
#[derive(Debug, Clone)]
pub struct KoopmanDecomposition {
    /// The Koopman (or reduced DMD) matrix the spectrum was taken from.
    pub a: Array2<Complex64>,
    /// Discrete-time eigenvalues, one per retained pair.
    pub mu: Array1<Complex64>,
    /// Right eigenvectors (eigenfunction coefficients), one column per pair.
    pub xi: Array2<Complex64>,
    /// Koopman modes as `d x n` columns.
    pub modes: Array2<Complex64>,
    /// Continuous-time eigenvalues `ln(mu) / dt`.
    pub cont_eigs: Array1<Complex64>,
    /// Sampling interval the continuous-time eigenvalues refer to.
    pub dt: f64,
    /// Eigenvector residuals `||A xi_i - mu_i xi_i||`, one per pair.
    pub eig_residuals: Array1<f64>,
    /// True when any residual exceeds `EIG_RESIDUAL_TOL * ||A||_F`.
    pub defective: bool,
}

impl KoopmanDecomposition {
    /// Number of retained eigenpairs.
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

fn continuous_eigenvalue(mu: Complex64, dt: f64) -> Complex64 {
    mu.ln() / dt
}

/// Order eigenvalue indices by ascending `|Re(ln(mu)/dt)|`, then pull each
/// detected conjugate partner up to sit adjacent to its mate (positive
/// imaginary part first).
fn order_eigenpairs(mu: &Array1<Complex64>, dt: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..mu.len()).collect();
    let key = |i: usize| continuous_eigenvalue(mu[i], dt).re.abs();
    order.sort_by(|&a, &b| {
        key(a)
            .total_cmp(&key(b))
            .then(mu[b].im.total_cmp(&mu[a].im))
    });
    // Conjugate-pair adjacency pass.
    let mut pos = 0;
    while pos < order.len() {
        let i = order[pos];
        let scale = mu[i].norm().max(1.0);
        if mu[i].im.abs() > CONJUGATE_PAIR_TOL * scale {
            // Look for the conjugate among the remaining entries.
            if let Some(offset) = order[pos + 1..]
                .iter()
                .position(|&j| (mu[j] - mu[i].conj()).norm() <= CONJUGATE_PAIR_TOL * scale)
            {
                let target = pos + 1 + offset;
                order[pos + 1..=target].rotate_right(1);
                pos += 2;
                continue;
            }
        }
        pos += 1;
    }
    order
}

/// Rotate each mode column so its largest-magnitude entry is real positive.
fn normalize_mode_phases(modes: &mut Array2<Complex64>) {
    for mut col in modes.columns_mut() {
        let mut best = Complex64::default();
        for &z in col.iter() {
            if z.norm_sqr() > best.norm_sqr() {
                best = z;
            }
        }
        let mag = best.norm();
        if mag > 0.0 {
            let rot = best.conj() / mag;
            col.mapv_inplace(|z| z * rot);
        }
    }
}

fn assemble_decomposition(
    a: Array2<Complex64>,
    mu_all: Array1<Complex64>,
    xi_all: Array2<Complex64>,
    modes_all: Array2<Complex64>,
    dt: f64,
    n_modes: usize,
) -> KoopmanDecomposition {
    let order = order_eigenpairs(&mu_all, dt);
    let n = n_modes.min(order.len());
    let selected = &order[..n];
    let mu = Array1::from_iter(selected.iter().map(|&i| mu_all[i]));
    let xi = xi_all.select(Axis(1), selected);
    let mut modes = modes_all.select(Axis(1), selected);
    normalize_mode_phases(&mut modes);
    let cont_eigs = mu.mapv(|m| continuous_eigenvalue(m, dt));
    let a_norm = a.norm_l2();
    let eig_residuals = Array1::from_iter(selected.iter().map(|&i| {
        let xi_i = xi_all.column(i).to_owned();
        let lhs = a.dot(&xi_i);
        let rhs = xi_i.mapv(|v| v * mu_all[i]);
        vec_norm(&(&lhs - &rhs))
    }));
    let defective = eig_residuals
        .iter()
        .any(|&r| r > EIG_RESIDUAL_TOL * a_norm.max(f64::MIN_POSITIVE));
    KoopmanDecomposition {
        a,
        mu,
        xi,
        modes,
        cont_eigs,
        dt,
        eig_residuals,
        defective,
    }
}

/// Eigendecompose a Koopman matrix and reconstruct the leading Koopman
/// modes from the snapshot data.
///
/// Eigenfunction samples are `Phi = Psi_X xi`; the mode matrix solves the
/// least-squares reconstruction `X^T ~ Phi V` over all retained
/// eigenfunctions, after which the leading `n_modes` pairs are returned.
pub fn spectrum(
    a: &Array2<Complex64>,
    psi: &FeatureMatrices,
    snapshots: &SnapshotSet,
    n_modes: usize,
) -> Result<KoopmanDecomposition> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "Koopman matrix must be square, got {:?}",
            a.dim()
        )));
    }
    if a.nrows() != psi.num_features() {
        return Err(Error::DimensionMismatch(format!(
            "Koopman matrix is {} x {} but features have K = {}",
            a.nrows(),
            a.ncols(),
            psi.num_features()
        )));
    }
    if psi.num_snapshots() != snapshots.num_pairs() {
        return Err(Error::DimensionMismatch(format!(
            "feature matrices have M = {} but snapshots have M = {}",
            psi.num_snapshots(),
            snapshots.num_pairs()
        )));
    }
    let (mu_all, xi_all) = a.eig()?;
    // Koopman modes: X^T ~ Phi V with Phi = Psi_X xi, solved over all
    // eigenfunctions so the retained modes do not depend on n_modes.
    let phi = psi.psi_x.dot(&xi_all);
    let v = svd_pinv(&phi, DEFAULT_RCOND)?.dot(&complexify(snapshots.x().reversed_axes()));
    let modes_all = v.reversed_axes().mapv(|z| z); // d x K, owned
    Ok(assemble_decomposition(
        a.clone(),
        mu_all,
        xi_all,
        modes_all,
        snapshots.dt(),
        n_modes,
    ))
}

/// Koopman eigenfunction quality on the data:
/// `r_i = ||Psi_Y xi_i - mu_i Psi_X xi_i|| / ||Psi_X xi_i||`.
/// A zero-norm eigenfunction sample reports `+inf`.
pub fn eigenfunction_residuals(
    dec: &KoopmanDecomposition,
    psi: &FeatureMatrices,
) -> Result<Array1<f64>> {
    if psi.num_features() != dec.xi.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "features have K = {} but eigenvectors have length {}",
            psi.num_features(),
            dec.xi.nrows()
        )));
    }
    let phi_x = psi.psi_x.dot(&dec.xi);
    let phi_y = psi.psi_y.dot(&dec.xi);
    let mut out = Array1::zeros(dec.len());
    for i in 0..dec.len() {
        let fx = phi_x.column(i).to_owned();
        let fy = phi_y.column(i).to_owned();
        let num = vec_norm(&(&fy - &fx.mapv(|v| v * dec.mu[i])));
        let den = vec_norm(&fx);
        out[i] = if den > 0.0 { num / den } else { f64::INFINITY };
    }
    Ok(out)
}

/// Standard SVD-based DMD on raw snapshots: `X = U S V^H` truncated to
/// `rank`, reduced operator `U^H Y V S^{-1}`, modes lifted as `U w`.
pub fn dmd(snapshots: &SnapshotSet, rank: Option<usize>) -> Result<KoopmanDecomposition> {
    use ndarray_linalg::svddc::{JobSvd, SVDDC};

    let x = snapshots.x();
    let y = snapshots.y();
    let p = x.nrows().min(x.ncols());
    if let Some(r) = rank {
        if r == 0 || r > p {
            return Err(Error::InvalidArgument(format!(
                "rank {r} out of range 1..={p}"
            )));
        }
    }
    let (u, s, vt) = x.to_owned().svddc(JobSvd::Some)?;
    let u = u.expect("requested U");
    let vt = vt.expect("requested V^T");
    if !(s[0] > 0.0) {
        return Err(Error::DegenerateData("snapshot matrix X is zero".into()));
    }
    // Numeric rank cutoff guards the S^{-1} scaling below.
    let numeric_rank = s.iter().take_while(|&&v| v > 1e-12 * s[0]).count();
    let r = rank.unwrap_or(numeric_rank).min(numeric_rank);
    let u_r = u.slice(ndarray::s![.., ..r]);
    let v_r = vt.slice(ndarray::s![..r, ..]).reversed_axes().to_owned(); // M x r
    // A_tilde = U^T Y V S^{-1}
    let mut yv = y.dot(&v_r); // d x r
    for (mut col, &sv) in yv.columns_mut().into_iter().zip(s.iter()) {
        col.mapv_inplace(|v| v / sv);
    }
    let a_tilde = u_r.t().dot(&yv); // r x r real
    let (mu_all, w_all) = a_tilde.eig()?;
    let modes_all = complexify(u_r).dot(&w_all); // d x r
    Ok(assemble_decomposition(
        complexify(a_tilde.view()),
        mu_all,
        w_all,
        modes_all,
        snapshots.dt(),
        r,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_feature_matrices, FeatureMethod};
    use approx::assert_relative_eq;
    use ndarray::array;
    use ndarray_linalg::Solve;
    use rand::Rng;

    fn complex(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Snapshot pairs (x_k, D x_k) for random states and a given propagator.
    fn linear_system_snapshots(d_matrix: &Array2<f64>, m: usize, seed: u64) -> SnapshotSet {
        let mut rng = crate::rng::seeded(seed);
        let x = Array2::from_shape_fn((d_matrix.nrows(), m), |_| rng.random::<f64>() * 2.0 - 1.0);
        let y = d_matrix.dot(&x);
        SnapshotSet::from_pairs(x, y, 1.0).unwrap()
    }

    fn feature_pair(x: Array2<Complex64>, y: Array2<Complex64>) -> FeatureMatrices {
        FeatureMatrices::new(x, y).unwrap()
    }

    #[test]
    fn gram_of_identity_features_is_identity() {
        let eye = Array2::from_shape_fn((4, 4), |(i, j)| {
            complex(if i == j { 1.0 } else { 0.0 }, 0.0)
        });
        let psi = feature_pair(eye.clone(), eye);
        let gram = build_gram(&psi).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(gram.g[[i, j]].re, want, epsilon = 1e-15);
                assert_relative_eq!(gram.g[[i, j]].im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn gram_matches_naive_triple_loop() {
        let mut rng = crate::rng::seeded(30);
        let px = Array2::from_shape_fn((20, 6), |_| complex(rng.random::<f64>() - 0.5, 0.0));
        let py = Array2::from_shape_fn((20, 6), |_| complex(rng.random::<f64>() - 0.5, 0.0));
        let psi = feature_pair(px.clone(), py.clone());
        let gram = build_gram(&psi).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let mut g = Complex64::default();
                let mut h = Complex64::default();
                for m in 0..20 {
                    g += px[[m, i]].conj() * px[[m, j]];
                    h += px[[m, i]].conj() * py[[m, j]];
                }
                assert!((gram.g[[i, j]] - g).norm() < 1e-12);
                assert!((gram.h[[i, j]] - h).norm() < 1e-12);
            }
        }
        // Hermitian and PSD.
        assert!(crate::linalg::hermitian_defect(&gram.g) < 1e-14);
    }

    #[test]
    fn gram_zero_feature_column_annihilates() {
        let mut rng = crate::rng::seeded(31);
        let mut px = Array2::from_shape_fn((10, 4), |_| complex(rng.random::<f64>(), 0.0));
        for m in 0..10 {
            px[[m, 2]] = Complex64::default();
        }
        let psi = feature_pair(px.clone(), px.clone());
        let gram = build_gram(&psi).unwrap();
        for j in 0..4 {
            assert_eq!(gram.g[[2, j]], Complex64::default());
            assert_eq!(gram.g[[j, 2]], Complex64::default());
        }
    }

    #[test]
    fn identity_dynamics_give_identity_koopman() {
        let mut rng = crate::rng::seeded(32);
        let px = Array2::from_shape_fn((30, 5), |_| {
            complex(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let psi = feature_pair(px.clone(), px.clone());
        let a = koopman_matrix(&build_gram(&psi).unwrap(), DEFAULT_RCOND).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((a[[i, j]] - complex(want, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn truncated_direction_is_nulled() {
        let gram = GramPair {
            g: array![
                [complex(2.0, 0.0), complex(0.0, 0.0)],
                [complex(0.0, 0.0), complex(0.0, 0.0)]
            ],
            h: array![
                [complex(2.0, 0.0), complex(0.0, 0.0)],
                [complex(0.0, 0.0), complex(5.0, 0.0)]
            ],
        };
        let a = koopman_matrix(&gram, 1e-10).unwrap();
        assert!((a[[0, 0]] - complex(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(a[[1, 1]], Complex64::default());
        assert_eq!(a[[0, 1]], Complex64::default());
        assert_eq!(a[[1, 0]], Complex64::default());
    }

    #[test]
    fn full_rank_koopman_matches_direct_solve() {
        let mut rng = crate::rng::seeded(33);
        let px = Array2::from_shape_fn((40, 6), |_| {
            complex(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let py = Array2::from_shape_fn((40, 6), |_| {
            complex(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let psi = feature_pair(px, py);
        let gram = build_gram(&psi).unwrap();
        let a = koopman_matrix(&gram, DEFAULT_RCOND).unwrap();
        // Column-by-column dense solve of G a_j = h_j.
        for j in 0..6 {
            let rhs = gram.h.column(j).to_owned();
            let direct = gram.g.solve(&rhs).unwrap();
            for i in 0..6 {
                assert!((a[[i, j]] - direct[i]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn koopman_invariant_under_feature_scaling() {
        let mut rng = crate::rng::seeded(34);
        let px = Array2::from_shape_fn((25, 5), |_| {
            complex(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let py = Array2::from_shape_fn((25, 5), |_| {
            complex(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let psi = feature_pair(px, py);
        let a = koopman_matrix(&build_gram(&psi).unwrap(), DEFAULT_RCOND).unwrap();
        let scaled = psi.scaled(7.3);
        let a_scaled = koopman_matrix(&build_gram(&scaled).unwrap(), DEFAULT_RCOND).unwrap();
        let rel = (&a_scaled - &a).norm_l2() / a.norm_l2();
        assert!(rel <= 1e-12, "scaling changed A by {rel}");
    }

    #[test]
    fn diagonal_system_spectrum() {
        let d_matrix = array![[0.9, 0.0], [0.0, 0.5]];
        let snaps = linear_system_snapshots(&d_matrix, 30, 35);
        let build = build_feature_matrices(FeatureMethod::Linear, &snaps, 0, None, 0).unwrap();
        let gram = build_gram(&build.matrices).unwrap();
        let a = koopman_matrix(&gram, DEFAULT_RCOND).unwrap();
        let dec = spectrum(&a, &build.matrices, &snaps, 2).unwrap();
        let mut mus: Vec<f64> = dec.mu.iter().map(|m| m.re).collect();
        mus.sort_by(f64::total_cmp);
        assert_relative_eq!(mus[0], 0.5, epsilon = 1e-10);
        assert_relative_eq!(mus[1], 0.9, epsilon = 1e-10);
        // Modes are the coordinate axes up to scale.
        for i in 0..2 {
            let col = dec.modes.column(i);
            let big = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let small: f64 = col
                .iter()
                .map(|z| z.norm())
                .filter(|&v| v < big)
                .sum();
            assert!(small < 1e-8 * big.max(1.0), "mode {i} is not axis-aligned");
        }
        assert!(!dec.defective);
    }

    #[test]
    fn generic_linear_system_eigenvalues_match_truth() {
        let mut rng = crate::rng::seeded(36);
        let mut d_matrix = Array2::from_shape_fn((10, 10), |_| rng.random::<f64>() - 0.5);
        d_matrix.mapv_inplace(|v| v * 0.3);
        let snaps = linear_system_snapshots(&d_matrix, 50, 37);
        let build = build_feature_matrices(FeatureMethod::Linear, &snaps, 0, None, 0).unwrap();
        let gram = build_gram(&build.matrices).unwrap();
        let a = koopman_matrix(&gram, DEFAULT_RCOND).unwrap();
        let dec = spectrum(&a, &build.matrices, &snaps, 10).unwrap();
        let (truth, _) = d_matrix.eig().unwrap();
        let mut got: Vec<Complex64> = dec.mu.to_vec();
        for t in truth.iter() {
            let (idx, dist) = got
                .iter()
                .enumerate()
                .map(|(i, g)| (i, (g - t).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(dist < 1e-8, "eigenvalue {t} unmatched (best {dist})");
            got.swap_remove(idx);
        }
    }

    #[test]
    fn spectrum_ordering_is_a_permutation_of_raw_eig() {
        let mut rng = crate::rng::seeded(38);
        let k = 6;
        let a = Array2::from_shape_fn((k, k), |_| {
            complex(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let px = Array2::from_shape_fn((15, k), |_| {
            complex(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let psi = feature_pair(px.clone(), px.clone());
        let snaps = {
            let x = Array2::from_shape_fn((4, 15), |_| rng.random::<f64>());
            SnapshotSet::from_pairs(x.clone(), x, 1.0).unwrap()
        };
        let dec = spectrum(&a, &psi, &snaps, k).unwrap();
        let (raw_mu, raw_xi) = a.eig().unwrap();
        for i in 0..k {
            let j = (0..k)
                .min_by(|&p, &q| {
                    (raw_mu[p] - dec.mu[i])
                        .norm()
                        .total_cmp(&(raw_mu[q] - dec.mu[i]).norm())
                })
                .unwrap();
            assert_eq!(raw_mu[j], dec.mu[i], "eigenvalue values must be unaltered");
            assert_eq!(raw_xi.column(j), dec.xi.column(i), "eigenvectors must be unaltered");
        }
        // Ordering key is nondecreasing.
        let keys: Vec<f64> = dec.cont_eigs.iter().map(|c| c.re.abs()).collect();
        assert!(keys.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    }

    #[test]
    fn conjugate_pairs_are_adjacent() {
        // Rotation by 0.3 rad plus a fast decaying direction.
        let theta: f64 = 0.3;
        let d_matrix = array![
            [0.95 * theta.cos(), -0.95 * theta.sin(), 0.0],
            [0.95 * theta.sin(), 0.95 * theta.cos(), 0.0],
            [0.0, 0.0, 0.2]
        ];
        let snaps = linear_system_snapshots(&d_matrix, 40, 39);
        let dec = dmd(&snaps, None).unwrap();
        assert_eq!(dec.len(), 3);
        assert!(dec.mu[0].im > 0.0, "positive imaginary member first");
        assert!((dec.mu[1] - dec.mu[0].conj()).norm() < 1e-10);
    }

    #[test]
    fn residuals_of_exact_linear_system_are_tiny() {
        let mut rng = crate::rng::seeded(40);
        let mut d_matrix = Array2::from_shape_fn((6, 6), |_| rng.random::<f64>() - 0.5);
        d_matrix.mapv_inplace(|v| v * 0.4);
        let snaps = linear_system_snapshots(&d_matrix, 30, 41);
        let build = build_feature_matrices(FeatureMethod::Linear, &snaps, 0, None, 0).unwrap();
        let gram = build_gram(&build.matrices).unwrap();
        let a = koopman_matrix(&gram, DEFAULT_RCOND).unwrap();
        let dec = spectrum(&a, &build.matrices, &snaps, 6).unwrap();
        let res = eigenfunction_residuals(&dec, &build.matrices).unwrap();
        assert!(res.iter().all(|&r| r < 1e-8), "residuals {res:?}");
    }

    #[test]
    fn residuals_of_identity_dynamics_vanish_for_unit_eigenvalues() {
        let mut rng = crate::rng::seeded(42);
        let px = Array2::from_shape_fn((20, 4), |_| {
            complex(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let psi = feature_pair(px.clone(), px.clone());
        let a = koopman_matrix(&build_gram(&psi).unwrap(), DEFAULT_RCOND).unwrap();
        let x = Array2::from_shape_fn((3, 20), |_| rng.random::<f64>());
        let snaps = SnapshotSet::from_pairs(x.clone(), x, 1.0).unwrap();
        let dec = spectrum(&a, &psi, &snaps, 4).unwrap();
        let res = eigenfunction_residuals(&dec, &psi).unwrap();
        for (i, &r) in res.iter().enumerate() {
            if (dec.mu[i] - complex(1.0, 0.0)).norm() < 1e-8 {
                assert!(r < 1e-8, "unit eigenvalue residual {r}");
            }
        }
    }

    #[test]
    fn residuals_of_unrelated_matrix_are_large() {
        let mut rng = crate::rng::seeded(43);
        let px = Array2::from_shape_fn((30, 5), |_| {
            complex(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let py = Array2::from_shape_fn((30, 5), |_| {
            complex(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let psi = feature_pair(px, py);
        let random_a = Array2::from_shape_fn((5, 5), |_| {
            complex(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let x = Array2::from_shape_fn((3, 30), |_| rng.random::<f64>());
        let snaps = SnapshotSet::from_pairs(x.clone(), x, 1.0).unwrap();
        let dec = spectrum(&random_a, &psi, &snaps, 5).unwrap();
        let res = eigenfunction_residuals(&dec, &psi).unwrap();
        assert!(res.iter().any(|&r| r > 0.1), "expected O(1) residuals, got {res:?}");
    }

    #[test]
    fn zero_norm_eigenfunction_reports_infinity() {
        let psi = feature_pair(
            Array2::zeros((10, 2)),
            Array2::zeros((10, 2)),
        );
        let dec = KoopmanDecomposition {
            a: Array2::eye(2).mapv(|v: f64| complex(v, 0.0)),
            mu: array![complex(1.0, 0.0)],
            xi: array![[complex(1.0, 0.0)], [complex(0.0, 0.0)]],
            modes: Array2::zeros((3, 1)),
            cont_eigs: array![complex(0.0, 0.0)],
            dt: 1.0,
            eig_residuals: array![0.0],
            defective: false,
        };
        let res = eigenfunction_residuals(&dec, &psi).unwrap();
        assert!(res[0].is_infinite());
    }

    #[test]
    fn dmd_identity_dynamics() {
        let mut rng = crate::rng::seeded(44);
        let x = Array2::from_shape_fn((5, 20), |_| rng.random::<f64>() - 0.5);
        let snaps = SnapshotSet::from_pairs(x.clone(), x, 1.0).unwrap();
        let dec = dmd(&snaps, None).unwrap();
        for m in dec.mu.iter() {
            assert!((m - complex(1.0, 0.0)).norm() < 1e-10, "eigenvalue {m}");
        }
    }

    #[test]
    fn dmd_diagonal_system() {
        let d_matrix = array![[0.9, 0.0], [0.0, 0.5]];
        let snaps = linear_system_snapshots(&d_matrix, 25, 45);
        let dec = dmd(&snaps, None).unwrap();
        let mut mus: Vec<f64> = dec.mu.iter().map(|m| m.re).collect();
        mus.sort_by(f64::total_cmp);
        assert_relative_eq!(mus[0], 0.5, epsilon = 1e-10);
        assert_relative_eq!(mus[1], 0.9, epsilon = 1e-10);
    }

    #[test]
    fn dmd_matches_random_stable_truth() {
        let mut rng = crate::rng::seeded(46);
        let mut d_matrix = Array2::from_shape_fn((10, 10), |_| rng.random::<f64>() - 0.5);
        d_matrix.mapv_inplace(|v| v * 0.3);
        let snaps = linear_system_snapshots(&d_matrix, 60, 47);
        let dec = dmd(&snaps, None).unwrap();
        let (truth, _) = d_matrix.eig().unwrap();
        let mut got: Vec<Complex64> = dec.mu.to_vec();
        for t in truth.iter() {
            let (idx, dist) = got
                .iter()
                .enumerate()
                .map(|(i, g)| (i, (g - t).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(dist < 1e-8, "eigenvalue {t} unmatched (best {dist})");
            got.swap_remove(idx);
        }
    }

    #[test]
    fn dmd_rank_validation() {
        let mut rng = crate::rng::seeded(48);
        let x = Array2::from_shape_fn((4, 10), |_| rng.random::<f64>());
        let y = Array2::from_shape_fn((4, 10), |_| rng.random::<f64>());
        let snaps = SnapshotSet::from_pairs(x, y, 1.0).unwrap();
        assert!(matches!(
            dmd(&snaps, Some(5)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(dmd(&snaps, Some(3)).is_ok());
    }
}
