//! Feature-map construction: random Fourier bases, Nyström empirical
//! eigenfunction bases (cheap and expensive variants), and the linear
//! baseline. Produces the feature matrices consumed by the decomposition
//! stage.
//!
//! Feature matrices are `M x K` with row `m` holding the `K` feature values
//! of snapshot `m` (the transpose of the column-per-snapshot convention used
//! for raw data). Random Fourier features are the complex exponentials
//! `psi_z(x) = exp(i <z, x>)`; all downstream linear algebra is complex so
//! the real-valued Nyström and linear features are widened on construction.

use std::fmt;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data::{self, MatrixData, SnapshotSet};
use crate::error::{Error, Result};
use crate::kernels::{self, KernelSpec};
use crate::linalg::complexify;

/// Default relative eigenvalue truncation for Nyström fits. Kernel matrices
/// are PSD in exact arithmetic but acquire tiny negative eigenvalues in
/// floating point; truncation also guards the interpolation formula's
/// division by small eigenvalues.
pub const DEFAULT_TRUNC_TOL: f64 = 1e-12;

/// Which feature dictionary to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMethod {
    Rff,
    NystromCheap,
    NystromExpensive,
    Linear,
}

impl fmt::Display for FeatureMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            FeatureMethod::Rff => "rff",
            FeatureMethod::NystromCheap => "nystrom-cheap",
            FeatureMethod::NystromExpensive => "nystrom-expensive",
            FeatureMethod::Linear => "linear",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for FeatureMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rff" => Ok(FeatureMethod::Rff),
            "nystrom-cheap" | "nystrom_cheap" => Ok(FeatureMethod::NystromCheap),
            "nystrom-expensive" | "nystrom_expensive" => Ok(FeatureMethod::NystromExpensive),
            "linear" => Ok(FeatureMethod::Linear),
            other => Err(Error::InvalidArgument(format!(
                "unknown feature method {other:?}"
            ))),
        }
    }
}

/// Random Fourier feature basis: `K x d` frequency rows drawn from the
/// spectral density of the kernel it approximates.
#[derive(Debug, Clone)]
pub struct FourierBasis {
    frequencies: Array2<f64>,
    kernel: KernelSpec,
    seed: Option<u64>,
}

impl FourierBasis {
    /// Draw `k` frequencies for states of dimension `d`.
    pub fn sample(kernel: KernelSpec, k: usize, d: usize, seed: u64) -> Result<Self> {
        let frequencies = kernel.sample_frequencies(k, d, seed)?;
        Ok(FourierBasis {
            frequencies,
            kernel,
            seed: Some(seed),
        })
    }

    /// Wrap an explicit frequency matrix (rows are frequencies).
    pub fn from_frequencies(frequencies: Array2<f64>, kernel: KernelSpec) -> Result<Self> {
        if frequencies.nrows() == 0 || frequencies.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "frequency matrix must be at least 1 x 1".into(),
            ));
        }
        if frequencies.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("frequency matrix has non-finite entries".into()));
        }
        Ok(FourierBasis {
            frequencies,
            kernel,
            seed: None,
        })
    }

    pub fn num_features(&self) -> usize {
        self.frequencies.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.frequencies.ncols()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn frequencies(&self) -> ArrayView2<'_, f64> {
        self.frequencies.view()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Evaluate the features at every column of `s` (`d x n`), producing the
    /// `n x K` matrix with entry `(m, j) = exp(i <z_j, x_m>)`. The complex
    /// map runs in parallel over entries; every entry is computed by exactly
    /// one thread, so results are independent of the thread count.
    pub fn evaluate(&self, states: ArrayView2<'_, f64>) -> Result<Array2<Complex64>> {
        if states.nrows() != self.state_dim() {
            return Err(Error::DimensionMismatch(format!(
                "states have dimension {}, basis expects {}",
                states.nrows(),
                self.state_dim()
            )));
        }
        let phases = states.t().dot(&self.frequencies.t()); // n x K
        let mut out = Array2::from_elem(phases.dim(), Complex64::default());
        Zip::from(&mut out)
            .and(&phases)
            .par_for_each(|o, &p| *o = Complex64::new(p.cos(), p.sin()));
        Ok(out)
    }

    /// Monte Carlo kernel estimate: the real part of
    /// `(1/K) sum_j exp(i <z_j, x - y>)`. The imaginary part carries no
    /// information about the (real) kernel and is discarded.
    pub fn kernel_estimate(
        &self,
        x: ArrayView1<'_, f64>,
        y: ArrayView1<'_, f64>,
    ) -> Result<f64> {
        if x.len() != self.state_dim() || y.len() != self.state_dim() {
            return Err(Error::DimensionMismatch(format!(
                "points have dimensions {} and {}, basis expects {}",
                x.len(),
                y.len(),
                self.state_dim()
            )));
        }
        let diff = &x.to_owned() - &y;
        let phases = self.frequencies.dot(&diff);
        let sum: f64 = phases.iter().map(|p| p.cos()).sum();
        Ok(sum / self.num_features() as f64)
    }

    /// A new basis whose frequency rows are `self`'s followed by `extra`
    /// fresh draws controlled by `seed`.
    pub fn extended(&self, extra: usize, seed: u64) -> Result<(FourierBasis, FourierBasis)> {
        let new = FourierBasis::sample(self.kernel, extra, self.state_dim(), seed)?;
        let combined = ndarray::concatenate(
            Axis(0),
            &[self.frequencies.view(), new.frequencies.view()],
        )
        .expect("same column count");
        Ok((
            FourierBasis {
                frequencies: combined,
                kernel: self.kernel,
                seed: self.seed,
            },
            new,
        ))
    }
}

/// Nyström empirical eigenfunction basis built from `K` landmark snapshots.
///
/// Stores the retained eigenpairs of the landmark kernel matrix `M_k` with
/// `(M_k)_{ij} = k(x_i, x_j)`: eigenvector columns `U` (orthonormal) and
/// eigenvalues `Lambda` sorted descending, truncated at
/// `trunc_tol * Lambda_max`. Feature `i` evaluated at landmark `j` is
/// `sqrt(K) U_{ji}`; the kernel-operator eigenvalue estimate is
/// `Lambda_i / K`.
#[derive(Debug, Clone)]
pub struct NystromBasis {
    landmarks: Array2<f64>, // d x K
    u: Array2<f64>,         // K x r
    lambda: Array1<f64>,    // r, descending
    kernel: KernelSpec,
    trunc_tol: f64,
    landmark_indices: Option<Vec<usize>>,
    seed: Option<u64>,
}

impl NystromBasis {
    /// Build the landmark kernel matrix and take its symmetric
    /// eigendecomposition, keeping eigenpairs above the truncation threshold.
    pub fn fit(
        landmarks: ArrayView2<'_, f64>,
        kernel: KernelSpec,
        trunc_tol: f64,
    ) -> Result<Self> {
        if landmarks.ncols() == 0 || landmarks.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "at least one landmark column is required".into(),
            ));
        }
        if !(0.0..1.0).contains(&trunc_tol) {
            return Err(Error::InvalidArgument(format!(
                "trunc_tol must lie in [0, 1), got {trunc_tol}"
            )));
        }
        let mk = kernels::kernel_matrix(&kernel, landmarks, landmarks)?;
        use ndarray_linalg::{Eigh, UPLO};
        let (eigs, vecs) = mk.eigh(UPLO::Lower)?;
        let lambda_max = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(lambda_max > 0.0) {
            return Err(Error::DegenerateData(
                "landmark kernel matrix has no positive eigenvalues".into(),
            ));
        }
        let threshold = trunc_tol * lambda_max;
        // eigh returns ascending order; walk backwards for descending.
        let mut kept: Vec<usize> = (0..eigs.len())
            .rev()
            .filter(|&i| eigs[i] > threshold)
            .collect();
        if kept.is_empty() {
            return Err(Error::DegenerateData(
                "all kernel eigenvalues fall below the truncation tolerance".into(),
            ));
        }
        kept.sort_by(|&a, &b| eigs[b].total_cmp(&eigs[a]));
        let lambda = Array1::from_iter(kept.iter().map(|&i| eigs[i]));
        let mut u = vecs.select(Axis(1), &kept);
        // Fix the sign ambiguity: largest-magnitude entry of each column
        // is made positive so fits are reproducible.
        for mut col in u.columns_mut() {
            let (mut best, mut best_abs) = (0usize, 0.0f64);
            for (i, &v) in col.iter().enumerate() {
                if v.abs() > best_abs {
                    best_abs = v.abs();
                    best = i;
                }
            }
            if col[best] < 0.0 {
                col.mapv_inplace(|v| -v);
            }
        }
        Ok(NystromBasis {
            landmarks: landmarks.to_owned(),
            u,
            lambda,
            kernel,
            trunc_tol,
            landmark_indices: None,
            seed: None,
        })
    }

    pub fn num_landmarks(&self) -> usize {
        self.landmarks.ncols()
    }

    pub fn state_dim(&self) -> usize {
        self.landmarks.nrows()
    }

    /// Number of retained eigenpairs.
    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn landmarks(&self) -> ArrayView2<'_, f64> {
        self.landmarks.view()
    }

    pub fn eigenvectors(&self) -> ArrayView2<'_, f64> {
        self.u.view()
    }

    /// Kernel matrix eigenvalues (descending, retained only).
    pub fn matrix_eigenvalues(&self) -> ArrayView1<'_, f64> {
        self.lambda.view()
    }

    /// Kernel-operator eigenvalue estimates `Lambda_i / K`.
    pub fn operator_eigenvalues(&self) -> Array1<f64> {
        let k = self.num_landmarks() as f64;
        self.lambda.mapv(|l| l / k)
    }

    /// Indices of the landmark columns within the snapshot set the basis was
    /// drawn from, when known.
    pub fn landmark_indices(&self) -> Option<&[usize]> {
        self.landmark_indices.as_deref()
    }

    /// Feature values at the landmarks themselves: `sqrt(K) U` (`K x r`).
    pub fn landmark_features(&self) -> Array2<f64> {
        let scale = (self.num_landmarks() as f64).sqrt();
        &self.u * scale
    }

    /// Interpolate the retained eigenfunctions at the columns of `states`
    /// (`d x n`), producing `n x r` with entry
    /// `(m, i) = (sqrt(K) / Lambda_i) sum_j k(x_m, l_j) U_{ji}`.
    pub fn interpolate(&self, states: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if states.nrows() != self.state_dim() {
            return Err(Error::DimensionMismatch(format!(
                "states have dimension {}, basis expects {}",
                states.nrows(),
                self.state_dim()
            )));
        }
        let cross = kernels::kernel_matrix(&self.kernel, states, self.landmarks.view())?;
        let scale = (self.num_landmarks() as f64).sqrt();
        let mut weights = self.u.clone();
        for (mut col, &l) in weights.columns_mut().into_iter().zip(self.lambda.iter()) {
            col.mapv_inplace(|v| v * scale / l);
        }
        Ok(cross.dot(&weights))
    }
}

/// The feature matrices of a snapshot pair: `Psi_X` and `Psi_Y`, both
/// `M x K` complex.
#[derive(Debug, Clone)]
pub struct FeatureMatrices {
    pub psi_x: Array2<Complex64>,
    pub psi_y: Array2<Complex64>,
}

impl FeatureMatrices {
    pub fn new(psi_x: Array2<Complex64>, psi_y: Array2<Complex64>) -> Result<Self> {
        if psi_x.dim() != psi_y.dim() {
            return Err(Error::DimensionMismatch(format!(
                "Psi_X is {:?} but Psi_Y is {:?}",
                psi_x.dim(),
                psi_y.dim()
            )));
        }
        let finite = psi_x
            .iter()
            .chain(psi_y.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return Err(Error::Numeric("feature matrices have non-finite entries".into()));
        }
        Ok(FeatureMatrices { psi_x, psi_y })
    }

    pub fn num_snapshots(&self) -> usize {
        self.psi_x.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.psi_x.ncols()
    }

    /// Multiply both matrices by a common scalar (used by invariance tests).
    pub fn scaled(&self, factor: f64) -> FeatureMatrices {
        FeatureMatrices {
            psi_x: self.psi_x.mapv(|z| z * factor),
            psi_y: self.psi_y.mapv(|z| z * factor),
        }
    }
}

/// The basis object produced alongside the feature matrices.
#[derive(Debug, Clone)]
pub enum Basis {
    Fourier(FourierBasis),
    Nystrom(NystromBasis),
    Linear,
}

impl Basis {
    pub fn method_hint(&self) -> &'static str {
        match self {
            Basis::Fourier(_) => "fourier",
            Basis::Nystrom(_) => "nystrom",
            Basis::Linear => "linear",
        }
    }
}

/// Result of [`build_feature_matrices`].
#[derive(Debug, Clone)]
pub struct FeatureBuild {
    pub matrices: FeatureMatrices,
    pub basis: Basis,
    /// For the cheap Nyström variant, the snapshot-pair indices the feature
    /// rows correspond to (the effective `M` shrinks to `K`). `None` means
    /// all pairs in their original order.
    pub used_indices: Option<Vec<usize>>,
}

impl FeatureBuild {
    /// The snapshot pairs matching the feature rows: the full set, or the
    /// landmark-restricted subset for the cheap Nyström variant.
    pub fn effective_snapshots(&self, snapshots: &SnapshotSet) -> Result<SnapshotSet> {
        match &self.used_indices {
            None => Ok(snapshots.clone()),
            Some(idx) => snapshots.select_pairs(idx),
        }
    }
}

/// Build `Psi_X`, `Psi_Y` for the requested method.
///
/// * `rff`: sample `k` frequencies, evaluate at all `M` columns of X and Y.
/// * `nystrom-expensive`: fit on `k` landmark columns of X (sampled without
///   replacement), interpolate both matrices at all `M` points.
/// * `nystrom-cheap`: landmark evaluation for `Psi_X`, interpolation at the
///   `k` successor snapshots only for `Psi_Y`; the effective `M` becomes `k`.
/// * `linear`: features are the state coordinates themselves (`k` ignored).
///
/// `kernel` is required for every method except `linear`.
pub fn build_feature_matrices(
    method: FeatureMethod,
    snapshots: &SnapshotSet,
    k: usize,
    kernel: Option<KernelSpec>,
    seed: u64,
) -> Result<FeatureBuild> {
    let m = snapshots.num_pairs();
    let require_kernel = || {
        kernel.ok_or_else(|| {
            Error::InvalidArgument(format!("method {method} requires a kernel specification"))
        })
    };
    match method {
        FeatureMethod::Linear => {
            let psi_x = complexify(snapshots.x().reversed_axes());
            let psi_y = complexify(snapshots.y().reversed_axes());
            Ok(FeatureBuild {
                matrices: FeatureMatrices::new(psi_x, psi_y)?,
                basis: Basis::Linear,
                used_indices: None,
            })
        }
        FeatureMethod::Rff => {
            if k == 0 {
                return Err(Error::InvalidArgument(
                    "number of random Fourier features must be positive".into(),
                ));
            }
            let basis = FourierBasis::sample(require_kernel()?, k, snapshots.state_dim(), seed)?;
            let psi_x = basis.evaluate(snapshots.x())?;
            let psi_y = basis.evaluate(snapshots.y())?;
            Ok(FeatureBuild {
                matrices: FeatureMatrices::new(psi_x, psi_y)?,
                basis: Basis::Fourier(basis),
                used_indices: None,
            })
        }
        FeatureMethod::NystromCheap | FeatureMethod::NystromExpensive => {
            if k == 0 {
                return Err(Error::InvalidArgument(
                    "number of landmarks must be positive".into(),
                ));
            }
            if k > m {
                return Err(Error::InvalidArgument(format!(
                    "cannot draw {k} landmarks without replacement from {m} snapshots"
                )));
            }
            let indices = kernels::sample_indices_without_replacement(m, k, seed);
            let landmarks = snapshots.x().select(Axis(1), &indices);
            let mut basis =
                NystromBasis::fit(landmarks.view(), require_kernel()?, DEFAULT_TRUNC_TOL)?;
            basis.landmark_indices = Some(indices.clone());
            basis.seed = Some(seed);
            match method {
                FeatureMethod::NystromExpensive => {
                    let psi_x = complexify(basis.interpolate(snapshots.x())?.view());
                    let psi_y = complexify(basis.interpolate(snapshots.y())?.view());
                    Ok(FeatureBuild {
                        matrices: FeatureMatrices::new(psi_x, psi_y)?,
                        basis: Basis::Nystrom(basis),
                        used_indices: None,
                    })
                }
                _ => {
                    let psi_x = complexify(basis.landmark_features().view());
                    let successors = snapshots.y().select(Axis(1), &indices);
                    let psi_y = complexify(basis.interpolate(successors.view())?.view());
                    Ok(FeatureBuild {
                        matrices: FeatureMatrices::new(psi_x, psi_y)?,
                        basis: Basis::Nystrom(basis),
                        used_indices: Some(indices),
                    })
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Basis persistence: KMX1 matrices plus a JSON sidecar.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum BasisSidecar {
    Fourier {
        kernel: KernelSpec,
        seed: Option<u64>,
    },
    Nystrom {
        kernel: KernelSpec,
        seed: Option<u64>,
        trunc_tol: f64,
        num_landmarks: usize,
        landmark_indices: Option<Vec<usize>>,
    },
    Linear,
}

/// File names used by [`Basis::save`] within the target directory.
pub const BASIS_SIDECAR_FILE: &str = "basis.json";
pub const FOURIER_FREQUENCIES_FILE: &str = "frequencies.kmx";
pub const NYSTROM_LANDMARKS_FILE: &str = "landmarks.kmx";
pub const NYSTROM_EIGENVECTORS_FILE: &str = "nystrom_u.kmx";
pub const NYSTROM_EIGENVALUES_FILE: &str = "nystrom_lambda.kmx";

impl Basis {
    /// Persist the basis into `dir` as KMX1 matrices plus a JSON sidecar.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let sidecar = match self {
            Basis::Fourier(b) => {
                data::save_real_matrix(b.frequencies(), dir.join(FOURIER_FREQUENCIES_FILE))?;
                BasisSidecar::Fourier {
                    kernel: b.kernel,
                    seed: b.seed,
                }
            }
            Basis::Nystrom(b) => {
                data::save_real_matrix(b.landmarks(), dir.join(NYSTROM_LANDMARKS_FILE))?;
                data::save_real_matrix(b.eigenvectors(), dir.join(NYSTROM_EIGENVECTORS_FILE))?;
                let lambda_col = b
                    .lambda
                    .view()
                    .insert_axis(Axis(1))
                    .to_owned();
                data::save_real_matrix(lambda_col.view(), dir.join(NYSTROM_EIGENVALUES_FILE))?;
                BasisSidecar::Nystrom {
                    kernel: b.kernel,
                    seed: b.seed,
                    trunc_tol: b.trunc_tol,
                    num_landmarks: b.num_landmarks(),
                    landmark_indices: b.landmark_indices.clone(),
                }
            }
            Basis::Linear => BasisSidecar::Linear,
        };
        let json = serde_json::to_string_pretty(&sidecar)
            .map_err(|e| Error::Numeric(e.to_string()))?;
        std::fs::write(dir.join(BASIS_SIDECAR_FILE), json)?;
        Ok(())
    }

    /// Load a basis previously written by [`Basis::save`].
    pub fn load(dir: impl AsRef<Path>) -> Result<Basis> {
        let dir = dir.as_ref();
        let text = std::fs::read_to_string(dir.join(BASIS_SIDECAR_FILE))?;
        let sidecar: BasisSidecar = serde_json::from_str(&text).map_err(|e| Error::Format {
            offset: e.column() as u64,
            message: format!("invalid basis sidecar: {e}"),
        })?;
        match sidecar {
            BasisSidecar::Fourier { kernel, seed } => {
                let z = match data::load_matrix(dir.join(FOURIER_FREQUENCIES_FILE))? {
                    MatrixData::Real(m) => m,
                    MatrixData::Complex(_) => {
                        return Err(Error::InvalidArgument(
                            "frequency matrix must be real".into(),
                        ))
                    }
                };
                let mut basis = FourierBasis::from_frequencies(z, kernel)?;
                basis.seed = seed;
                Ok(Basis::Fourier(basis))
            }
            BasisSidecar::Nystrom {
                kernel,
                seed,
                trunc_tol,
                num_landmarks,
                landmark_indices,
            } => {
                let landmarks = data::load_matrix(dir.join(NYSTROM_LANDMARKS_FILE))?.into_real()?;
                let u = data::load_matrix(dir.join(NYSTROM_EIGENVECTORS_FILE))?.into_real()?;
                let lambda2 = data::load_matrix(dir.join(NYSTROM_EIGENVALUES_FILE))?.into_real()?;
                if landmarks.ncols() != num_landmarks || u.nrows() != num_landmarks {
                    return Err(Error::DimensionMismatch(
                        "landmark count disagrees between sidecar and matrices".into(),
                    ));
                }
                let lambda = lambda2.slice(s![.., 0]).to_owned();
                if lambda.len() != u.ncols() {
                    return Err(Error::DimensionMismatch(
                        "eigenvalue count disagrees with eigenvector columns".into(),
                    ));
                }
                Ok(Basis::Nystrom(NystromBasis {
                    landmarks,
                    u,
                    lambda,
                    kernel,
                    trunc_tol,
                    landmark_indices,
                    seed,
                }))
            }
            BasisSidecar::Linear => Ok(Basis::Linear),
        }
    }
}
