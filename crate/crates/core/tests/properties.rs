//! Property tests for the data formats and kernel primitives.

use kedmd::data::{self, MatrixData, SnapshotSet};
use kedmd::kernels::{KernelFamily, KernelSpec};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use proptest::prelude::*;

/// Finite `f64` values including signed zeros and subnormals.
fn finite_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::POSITIVE,
        prop::num::f64::NEGATIVE,
        prop::num::f64::ZERO,
        prop::num::f64::SUBNORMAL,
    ]
    .prop_filter("finite", |v| v.is_finite())
}

fn real_matrix(max_dim: usize) -> impl Strategy<Value = Array2<f64>> {
    (0..=max_dim, 0..=max_dim).prop_flat_map(|(r, c)| {
        prop::collection::vec(finite_f64(), r * c)
            .prop_map(move |data| Array2::from_shape_vec((r, c), data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kmx_real_round_trip_is_bit_exact(m in real_matrix(8)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.kmx");
        data::save_real_matrix(m.view(), &path).unwrap();
        let back = data::load_matrix(&path).unwrap().into_real().unwrap();
        prop_assert_eq!(m.dim(), back.dim());
        for (a, b) in m.iter().zip(back.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn kmx_complex_round_trip_is_bit_exact(re in real_matrix(6), im_seed in any::<u64>()) {
        let (r, c) = re.dim();
        let mut state = im_seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            f64::from_bits((state >> 12) | 0x3ff0000000000000) - 1.5
        };
        let m = Array2::from_shape_fn((r, c), |(i, j)| Complex64::new(re[[i, j]], next()));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.kmx");
        data::save_complex_matrix(m.view(), &path).unwrap();
        match data::load_matrix(&path).unwrap() {
            MatrixData::Complex(back) => {
                for (a, b) in m.iter().zip(back.iter()) {
                    prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                    prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
                }
            }
            MatrixData::Real(_) => prop_assert!(false, "kind flag lost"),
        }
    }

    #[test]
    fn trajectory_pairing_shifts_columns(
        d in 1usize..6,
        m in 2usize..12,
        seed in any::<u64>(),
    ) {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let traj = Array2::from_shape_fn((d, m), |_| next());
        let snaps = SnapshotSet::from_trajectory(traj.view(), 1.0).unwrap();
        let x = snaps.x();
        let y = snaps.y();
        for j in 0..snaps.num_pairs() - 1 {
            prop_assert_eq!(y.column(j), x.column(j + 1));
        }
        prop_assert_eq!(snaps.num_pairs(), m - 1);
    }

    #[test]
    fn kernels_are_symmetric_normalized_and_bounded(
        family_idx in 0usize..3,
        sigma in 0.05f64..10.0,
        xs in prop::collection::vec(-50.0f64..50.0, 1..6),
        ys in prop::collection::vec(-50.0f64..50.0, 1..6),
    ) {
        let family = [
            KernelFamily::Gaussian,
            KernelFamily::Laplacian,
            KernelFamily::Cauchy,
        ][family_idx];
        let n = xs.len().min(ys.len());
        let x = Array1::from_vec(xs[..n].to_vec());
        let y = Array1::from_vec(ys[..n].to_vec());
        let spec = KernelSpec::new(family, sigma).unwrap();
        let kxy = spec.eval(x.view(), y.view()).unwrap();
        let kyx = spec.eval(y.view(), x.view()).unwrap();
        prop_assert_eq!(kxy.to_bits(), kyx.to_bits(), "symmetry must be exact");
        prop_assert!((0.0..=1.0).contains(&kxy), "kernel value {} out of range", kxy);
        prop_assert_eq!(spec.eval(x.view(), x.view()).unwrap(), 1.0);
        // Strict bounds hold wherever the exponentials stay within f64
        // range; huge scaled distances legitimately underflow to 0.
        let l1: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()).sum();
        let log_scale = match family {
            KernelFamily::Gaussian => {
                let sq: f64 = x
                    .iter()
                    .zip(y.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                sq / (2.0 * sigma * sigma)
            }
            KernelFamily::Laplacian => l1 / sigma,
            KernelFamily::Cauchy => x
                .iter()
                .zip(y.iter())
                .map(|(a, b)| {
                    let t = (a - b) / sigma;
                    (1.0 + t * t).ln()
                })
                .sum(),
        };
        if log_scale < 500.0 && l1 > 1e-6 * sigma {
            prop_assert!(kxy > 0.0, "kernel underflow at moderate distance");
            prop_assert!(kxy < 1.0, "kernel saturated at distinct points");
        }
    }

    #[test]
    fn rff_features_have_unit_modulus(
        sigma in 0.1f64..4.0,
        seed in any::<u64>(),
        point in prop::collection::vec(-20.0f64..20.0, 3),
    ) {
        let kernel = KernelSpec::new(KernelFamily::Gaussian, sigma).unwrap();
        let basis = kedmd::FourierBasis::sample(kernel, 16, 3, seed).unwrap();
        let states = Array2::from_shape_vec((3, 1), point).unwrap();
        let psi = basis.evaluate(states.view()).unwrap();
        for z in psi.iter() {
            prop_assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }
}
