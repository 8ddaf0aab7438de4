//! Efficient Koopman-matrix update when new feature columns are appended to
//! an existing model.
//!
//! Appending `K_new` features to a `K_0`-feature model only requires the new
//! Gram blocks `G_1 = Psi_X^H Psi_Xnew` and `G_2 = Psi_Xnew^H Psi_Xnew` (and
//! their `H` analogues). The updated pseudoinverse is assembled in block form
//! from the stored `G_0^+` via the Schur-complement-like matrix
//! `Q = G_2 - G_1^H G_0^+ G_1`; the identity is valid whenever
//! `rank(G) = rank(G_0) + rank(G_2)`, which holds when the new features are
//! linearly independent of the old ones. The eigendecomposition is not
//! updated incrementally; re-run the spectrum on the updated matrix.
//!
//! Rank-condition failures are detected a posteriori by Moore-Penrose
//! residual checks on the assembled pseudoinverse, with an automatic
//! fallback to a batch recomputation (flagged in the report).

use ndarray::{s, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::edmd::GramPair;
use crate::error::{Error, Result};
use crate::features::FeatureMatrices;
use crate::linalg::{
    adjoint, hermitian_pinv, hermitian_pinv_or_zero, hermitize, penrose_residuals,
};

/// Moore-Penrose residual beyond which the block update is abandoned in
/// favor of a batch recomputation.
pub const MP_FALLBACK_TOL: f64 = 1e-6;

/// A fitted EDMD model carrying the quantities the block update reuses:
/// the feature matrices, the Gram pair, the stored pseudoinverse `G^+`, and
/// the Koopman matrix `A = G^+ H`.
#[derive(Debug, Clone)]
pub struct AdaptiveState {
    psi: FeatureMatrices,
    gram: GramPair,
    g_pinv: Array2<Complex64>,
    a: Array2<Complex64>,
    rcond: f64,
}

/// What happened during an extension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtendReport {
    /// True when the assembled block pseudoinverse failed its Moore-Penrose
    /// check and the update fell back to a batch recomputation.
    pub used_fallback: bool,
    /// Worst relative Moore-Penrose residual of the assembled pseudoinverse.
    pub mp_residual: f64,
    /// Predicted flop counts for this update.
    pub cost: CostReport,
}

impl AdaptiveState {
    /// Build the initial state from scratch.
    pub fn new(psi: FeatureMatrices, rcond: f64) -> Result<Self> {
        let gram = crate::edmd::build_gram(&psi)?;
        let (g_pinv, _) = hermitian_pinv(&gram.g, rcond)?;
        let a = g_pinv.dot(&gram.h);
        Ok(AdaptiveState {
            psi,
            gram,
            g_pinv,
            a,
            rcond,
        })
    }

    /// Reassemble a state from persisted parts, validating shapes and the
    /// stored pseudoinverse.
    pub fn from_parts(
        psi: FeatureMatrices,
        gram: GramPair,
        g_pinv: Array2<Complex64>,
        a: Array2<Complex64>,
        rcond: f64,
    ) -> Result<Self> {
        let k = psi.num_features();
        for (name, m) in [("G", &gram.g), ("H", &gram.h), ("G^+", &g_pinv), ("A", &a)] {
            if m.dim() != (k, k) {
                return Err(Error::DimensionMismatch(format!(
                    "stored {name} is {:?}, expected {k} x {k}",
                    m.dim()
                )));
            }
        }
        let mp = penrose_residuals(&gram.g, &g_pinv);
        let worst = mp.iter().cloned().fold(0.0, f64::max);
        if worst > 1e-9 {
            return Err(Error::Numeric(format!(
                "stored pseudoinverse fails Moore-Penrose checks (residual {worst:.3e})"
            )));
        }
        Ok(AdaptiveState {
            psi,
            gram,
            g_pinv,
            a,
            rcond,
        })
    }

    pub fn num_features(&self) -> usize {
        self.psi.num_features()
    }

    pub fn num_snapshots(&self) -> usize {
        self.psi.num_snapshots()
    }

    pub fn feature_matrices(&self) -> &FeatureMatrices {
        &self.psi
    }

    pub fn gram(&self) -> &GramPair {
        &self.gram
    }

    pub fn g_pinv(&self) -> &Array2<Complex64> {
        &self.g_pinv
    }

    /// The Koopman matrix `A = G^+ H`.
    pub fn koopman(&self) -> &Array2<Complex64> {
        &self.a
    }

    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    /// Append new feature columns, computing only the new Gram blocks and
    /// assembling the updated pseudoinverse in block form.
    pub fn extend(&self, psi_new: &FeatureMatrices) -> Result<(AdaptiveState, ExtendReport)> {
        let k0 = self.num_features();
        let k_new = psi_new.num_features();
        let m = self.num_snapshots();
        let cost = update_cost_report(k0, k_new, m);
        if k_new == 0 {
            return Ok((
                self.clone(),
                ExtendReport {
                    used_fallback: false,
                    mp_residual: 0.0,
                    cost,
                },
            ));
        }
        if psi_new.num_snapshots() != m {
            return Err(Error::DimensionMismatch(format!(
                "new features have M = {}, state has M = {m}",
                psi_new.num_snapshots()
            )));
        }

        let psi_x0_h = adjoint(&self.psi.psi_x);
        let psi_xn_h = adjoint(&psi_new.psi_x);
        let g1 = psi_x0_h.dot(&psi_new.psi_x); // K0 x Kn
        let mut g2 = psi_xn_h.dot(&psi_new.psi_x); // Kn x Kn
        hermitize(&mut g2);
        let h1 = psi_x0_h.dot(&psi_new.psi_y);
        let h2 = psi_xn_h.dot(&self.psi.psi_y);
        let h3 = psi_xn_h.dot(&psi_new.psi_y);

        // Q = G2 - G1^H G0^+ G1
        let g0p_g1 = self.g_pinv.dot(&g1); // K0 x Kn
        let mut q = &g2 - &adjoint(&g1).dot(&g0p_g1);
        hermitize(&mut q);
        let (q_pinv, _) = hermitian_pinv_or_zero(&q, self.rcond)?;

        let k = k0 + k_new;
        let mut g = Array2::<Complex64>::zeros((k, k));
        g.slice_mut(s![..k0, ..k0]).assign(&self.gram.g);
        g.slice_mut(s![..k0, k0..]).assign(&g1);
        g.slice_mut(s![k0.., ..k0]).assign(&adjoint(&g1));
        g.slice_mut(s![k0.., k0..]).assign(&g2);

        let mut h = Array2::<Complex64>::zeros((k, k));
        h.slice_mut(s![..k0, ..k0]).assign(&self.gram.h);
        h.slice_mut(s![..k0, k0..]).assign(&h1);
        h.slice_mut(s![k0.., ..k0]).assign(&h2);
        h.slice_mut(s![k0.., k0..]).assign(&h3);

        // Block pseudoinverse assembly from the stored G0^+.
        let p = g0p_g1.dot(&q_pinv); // K0 x Kn
        let mut g_pinv = Array2::<Complex64>::zeros((k, k));
        let tl = &self.g_pinv + &p.dot(&adjoint(&g0p_g1));
        g_pinv.slice_mut(s![..k0, ..k0]).assign(&tl);
        g_pinv.slice_mut(s![..k0, k0..]).assign(&p.mapv(|z| -z));
        g_pinv.slice_mut(s![k0.., ..k0]).assign(&adjoint(&p).mapv(|z| -z));
        g_pinv.slice_mut(s![k0.., k0..]).assign(&q_pinv);

        let mp = penrose_residuals(&g, &g_pinv);
        let mp_residual = mp.iter().cloned().fold(0.0, f64::max);
        let used_fallback = mp_residual > MP_FALLBACK_TOL;
        if used_fallback {
            let (batch, _) = hermitian_pinv(&g, self.rcond)?;
            g_pinv = batch;
        }

        let a = g_pinv.dot(&h);
        let psi_x = ndarray::concatenate(
            ndarray::Axis(1),
            &[self.psi.psi_x.view(), psi_new.psi_x.view()],
        )
        .expect("same row count");
        let psi_y = ndarray::concatenate(
            ndarray::Axis(1),
            &[self.psi.psi_y.view(), psi_new.psi_y.view()],
        )
        .expect("same row count");
        let state = AdaptiveState {
            psi: FeatureMatrices::new(psi_x, psi_y)?,
            gram: GramPair { g, h },
            g_pinv,
            a,
            rcond: self.rcond,
        };
        Ok((
            state,
            ExtendReport {
                used_fallback,
                mp_residual,
                cost,
            },
        ))
    }
}

/// Leading-order flop counts for the incremental update versus a batch
/// recomputation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CostReport {
    pub k0: usize,
    pub k_new: usize,
    pub m: usize,
    /// New Gram/cross-Gram blocks: `2 K0 Knew M + Knew^2 M`.
    pub incremental_gram_flops: u128,
    /// Recomputing the full Gram pair: `(K0 + Knew)^2 M`.
    pub batch_gram_flops: u128,
    /// Dominant cost of the block pseudoinverse assembly: `K0^2 Knew`.
    pub incremental_pinv_flops: u128,
    /// Dense pseudoinverse of the full matrix: `(K0 + Knew)^3`.
    pub batch_pinv_flops: u128,
    /// Forming `A = G^+ H`, identical for both routes: `(K0 + Knew)^3`.
    pub koopman_product_flops: u128,
}

impl CostReport {
    /// Ratio batch / incremental for the Gram update, when defined.
    pub fn gram_savings_factor(&self) -> Option<f64> {
        if self.incremental_gram_flops == 0 {
            None
        } else {
            Some(self.batch_gram_flops as f64 / self.incremental_gram_flops as f64)
        }
    }
}

/// Predicted update costs for appending `k_new` features to a `k0`-feature
/// model over `m` snapshots.
pub fn update_cost_report(k0: usize, k_new: usize, m: usize) -> CostReport {
    let (k0_, kn, m_) = (k0 as u128, k_new as u128, m as u128);
    let k = k0_ + kn;
    CostReport {
        k0,
        k_new,
        m,
        incremental_gram_flops: 2 * k0_ * kn * m_ + kn * kn * m_,
        batch_gram_flops: k * k * m_,
        incremental_pinv_flops: k0_ * k0_ * kn,
        batch_pinv_flops: k * k * k,
        koopman_product_flops: k * k * k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edmd::{build_gram, koopman_matrix, DEFAULT_RCOND};
    use ndarray::Axis;
    use ndarray_linalg::Norm;
    use rand::Rng;

    fn random_features(m: usize, k: usize, seed: u64) -> Array2<Complex64> {
        let mut rng = crate::rng::seeded(seed);
        Array2::from_shape_fn((m, k), |_| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn pair(x: Array2<Complex64>, y: Array2<Complex64>) -> FeatureMatrices {
        FeatureMatrices::new(x, y).unwrap()
    }

    fn concat_features(a: &FeatureMatrices, b: &FeatureMatrices) -> FeatureMatrices {
        pair(
            ndarray::concatenate(Axis(1), &[a.psi_x.view(), b.psi_x.view()]).unwrap(),
            ndarray::concatenate(Axis(1), &[a.psi_y.view(), b.psi_y.view()]).unwrap(),
        )
    }

    fn rel_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
        (a - b).norm_l2() / b.norm_l2().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn empty_extension_returns_state_unchanged() {
        let psi = pair(random_features(30, 8, 1), random_features(30, 8, 2));
        let state = AdaptiveState::new(psi, DEFAULT_RCOND).unwrap();
        let empty = pair(
            Array2::zeros((30, 0)),
            Array2::zeros((30, 0)),
        );
        let (next, report) = state.extend(&empty).unwrap();
        assert_eq!(next.num_features(), 8);
        assert!(!report.used_fallback);
        assert_eq!(next.koopman(), state.koopman());
    }

    #[test]
    fn orthogonal_new_features_give_block_diagonal_pinv() {
        // Old features live on the first 10 snapshots, new ones on the rest,
        // so G1 = Psi_X0^H Psi_Xnew = 0 and Q = G2.
        let m = 20;
        let mut rng = crate::rng::seeded(5);
        let mut old_x = Array2::<Complex64>::zeros((m, 4));
        let mut new_x = Array2::<Complex64>::zeros((m, 3));
        for r in 0..10 {
            for c in 0..4 {
                old_x[[r, c]] = Complex64::new(rng.random::<f64>() - 0.5, 0.0);
            }
        }
        for r in 10..m {
            for c in 0..3 {
                new_x[[r, c]] = Complex64::new(rng.random::<f64>() - 0.5, 0.0);
            }
        }
        let old = pair(old_x.clone(), old_x.clone());
        let new = pair(new_x.clone(), new_x.clone());
        let state = AdaptiveState::new(old.clone(), DEFAULT_RCOND).unwrap();
        let (next, report) = state.extend(&new).unwrap();
        assert!(!report.used_fallback);

        let g2 = build_gram(&new).unwrap().g;
        let (g0p, _) = hermitian_pinv(&build_gram(&old).unwrap().g, DEFAULT_RCOND).unwrap();
        let (g2p, _) = hermitian_pinv(&g2, DEFAULT_RCOND).unwrap();
        let gp = next.g_pinv();
        assert!(rel_diff(&gp.slice(s![..4, ..4]).to_owned(), &g0p) < 1e-10);
        assert!(rel_diff(&gp.slice(s![4.., 4..]).to_owned(), &g2p) < 1e-10);
        let off = gp.slice(s![..4, 4..]).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(off < 1e-10, "off-diagonal leak {off}");
    }

    #[test]
    fn incremental_matches_batch() {
        let m = 100;
        let base = pair(random_features(m, 20, 10), random_features(m, 20, 11));
        let extra = pair(random_features(m, 5, 12), random_features(m, 5, 13));
        let state = AdaptiveState::new(base.clone(), DEFAULT_RCOND).unwrap();
        let (next, report) = state.extend(&extra).unwrap();
        assert!(!report.used_fallback, "rank condition should hold");

        let full = concat_features(&base, &extra);
        let batch_gram = build_gram(&full).unwrap();
        let batch_a = koopman_matrix(&batch_gram, DEFAULT_RCOND).unwrap();
        let rel = rel_diff(next.koopman(), &batch_a);
        assert!(rel < 1e-8, "A mismatch {rel}");
        assert!(rel_diff(&next.gram().g, &batch_gram.g) < 1e-12);
        assert!(rel_diff(&next.gram().h, &batch_gram.h) < 1e-12);
    }

    #[test]
    fn assembled_pinv_satisfies_moore_penrose() {
        let m = 60;
        let base = pair(random_features(m, 12, 20), random_features(m, 12, 21));
        let extra = pair(random_features(m, 6, 22), random_features(m, 6, 23));
        let state = AdaptiveState::new(base, DEFAULT_RCOND).unwrap();
        let (next, report) = state.extend(&extra).unwrap();
        assert!(!report.used_fallback);
        let res = penrose_residuals(&next.gram().g, next.g_pinv());
        for r in res {
            assert!(r < 1e-9, "MP residual {r}");
        }
    }

    #[test]
    fn chained_extension_equals_concatenated_extension() {
        let m = 80;
        let base = pair(random_features(m, 10, 30), random_features(m, 10, 31));
        let b = pair(random_features(m, 4, 32), random_features(m, 4, 33));
        let c = pair(random_features(m, 3, 34), random_features(m, 3, 35));
        let state = AdaptiveState::new(base, DEFAULT_RCOND).unwrap();
        let (chained, _) = state.extend(&b).unwrap();
        let (chained, _) = chained.extend(&c).unwrap();
        let bc = concat_features(&b, &c);
        let (direct, _) = state.extend(&bc).unwrap();
        let rel = rel_diff(chained.koopman(), direct.koopman());
        assert!(rel < 1e-8, "chained vs concatenated A differ by {rel}");
    }

    #[test]
    fn dependent_features_fall_back_to_batch() {
        let m = 40;
        let base_x = random_features(m, 6, 40);
        let base = pair(base_x.clone(), random_features(m, 6, 41));
        // New features duplicate old columns: rank condition violated.
        let dup = base_x.slice(s![.., ..2]).to_owned();
        let new = pair(dup.clone(), dup);
        let state = AdaptiveState::new(base.clone(), DEFAULT_RCOND).unwrap();
        let (next, report) = state.extend(&new).unwrap();
        assert!(report.used_fallback, "duplicate features must trip the MP check");
        assert!(report.mp_residual > MP_FALLBACK_TOL);
        // The fallback still produces a valid pseudoinverse and Koopman matrix.
        let res = penrose_residuals(&next.gram().g, next.g_pinv());
        for r in res {
            assert!(r < 1e-8, "fallback MP residual {r}");
        }
        let full = concat_features(&base, &pair(
            base_x.slice(s![.., ..2]).to_owned(),
            base_x.slice(s![.., ..2]).to_owned(),
        ));
        let batch_a = koopman_matrix(&build_gram(&full).unwrap(), DEFAULT_RCOND).unwrap();
        assert!(rel_diff(next.koopman(), &batch_a) < 1e-8);
    }

    #[test]
    fn cost_report_equal_split_saves_four_thirds() {
        let r = update_cost_report(50, 50, 200);
        let factor = r.gram_savings_factor().unwrap();
        assert!((factor - 4.0 / 3.0).abs() < 1e-12, "factor {factor}");
    }

    #[test]
    fn cost_report_small_extension_dominant_savings() {
        let (k0, kn, m) = (1000usize, 5usize, 300usize);
        let r = update_cost_report(k0, kn, m);
        let factor = r.gram_savings_factor().unwrap();
        let dominant = k0 as f64 / (2.0 * kn as f64);
        assert!(
            (factor - dominant).abs() / dominant < 0.02,
            "factor {factor} vs dominant-term estimate {dominant}"
        );
    }

    #[test]
    fn cost_report_degenerate_zero_snapshots() {
        let r = update_cost_report(10, 5, 0);
        assert_eq!(r.incremental_gram_flops, 0);
        assert_eq!(r.batch_gram_flops, 0);
        assert!(r.gram_savings_factor().is_none());
    }
}
