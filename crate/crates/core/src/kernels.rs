//! Translation-invariant kernels, their spectral densities, and the
//! empirical bandwidth heuristic.
//!
//! All families are normalized so `k(x, x) = 1`. Under that convention the
//! spectral density dual to each kernel (the distribution the random Fourier
//! frequencies are drawn from) has per-coordinate scale `1/sigma`:
//!
//! | kernel                                | frequency distribution        |
//! |---------------------------------------|-------------------------------|
//! | Gaussian  `exp(-||r||^2 / (2 s^2))`   | normal, std `1/s`             |
//! | Laplacian `exp(-||r||_1 / s)`         | Cauchy, scale `1/s`           |
//! | Cauchy    `prod 1/(1 + (r_j/s)^2)`    | Laplace, scale `1/s`          |

use std::collections::HashSet;
use std::fmt;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Cauchy, Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default cap on sampled snapshot pairs in [`estimate_bandwidth`].
pub const DEFAULT_MAX_PAIRS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Laplacian,
    Cauchy,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Laplacian => "laplacian",
            KernelFamily::Cauchy => "cauchy",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "rbf" => Ok(KernelFamily::Gaussian),
            "laplacian" => Ok(KernelFamily::Laplacian),
            "cauchy" => Ok(KernelFamily::Cauchy),
            other => Err(Error::InvalidArgument(format!(
                "unknown kernel family {other:?} (expected gaussian, laplacian, or cauchy)"
            ))),
        }
    }
}

/// A kernel family with its bandwidth, in state-space units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub sigma: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "kernel bandwidth must be positive and finite, got {sigma}"
            )));
        }
        Ok(KernelSpec { family, sigma })
    }

    /// Evaluate `k(x, y)`. Result lies in `(0, 1]`, with 1 iff `x == y`.
    pub fn eval(&self, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "kernel arguments have lengths {} and {}",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::InvalidArgument("kernel arguments are empty".into()));
        }
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
        let s = self.sigma;
        match self.family {
            KernelFamily::Gaussian => {
                let sq: f64 = x
                    .iter()
                    .zip(y.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (-sq / (2.0 * s * s)).exp()
            }
            KernelFamily::Laplacian => {
                let l1: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()).sum();
                (-l1 / s).exp()
            }
            KernelFamily::Cauchy => x
                .iter()
                .zip(y.iter())
                .map(|(a, b)| {
                    let t = (a - b) / s;
                    1.0 / (1.0 + t * t)
                })
                .product(),
        }
    }

    /// Draw `k x d` frequency rows i.i.d. from the kernel's spectral density.
    /// Deterministic for a fixed seed.
    pub fn sample_frequencies(&self, k: usize, d: usize, seed: u64) -> Result<Array2<f64>> {
        if k == 0 || d == 0 {
            return Err(Error::InvalidArgument(format!(
                "frequency matrix dimensions must be positive, got K = {k}, d = {d}"
            )));
        }
        let inv_sigma = 1.0 / self.sigma;
        let mut rng = rng::seeded(seed);
        let mut draw: Box<dyn FnMut(&mut rand_chacha::ChaCha8Rng) -> f64> = match self.family {
            KernelFamily::Gaussian => {
                let dist = Normal::new(0.0, inv_sigma).expect("valid std");
                Box::new(move |r| dist.sample(r))
            }
            KernelFamily::Laplacian => {
                let dist = Cauchy::new(0.0, inv_sigma).expect("valid scale");
                Box::new(move |r| dist.sample(r))
            }
            KernelFamily::Cauchy => Box::new(move |r| {
                // Laplace(0, 1/sigma) as a sign-symmetrized exponential.
                let e: f64 = r.sample(Exp1);
                let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
                sign * inv_sigma * e
            }),
        };
        let mut z = Array2::zeros((k, d));
        for v in z.iter_mut() {
            *v = draw(&mut rng);
        }
        Ok(z)
    }
}

/// Cross kernel matrix: entry `(i, j) = k(a_i, b_j)` for column vectors of
/// `a` (`d x n`) and `b` (`d x m`). Rows are computed in parallel; each
/// entry is produced by exactly one thread, so results do not depend on the
/// thread count.
pub fn kernel_matrix(
    spec: &KernelSpec,
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "kernel matrix operands have state dimensions {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let mut out = Array2::zeros((a.ncols(), b.ncols()));
    Zip::from(out.rows_mut())
        .and(a.axis_iter(Axis(1)))
        .par_for_each(|mut row, ai| {
            for (j, bj) in b.axis_iter(Axis(1)).enumerate() {
                row[j] = spec.eval_unchecked(ai, bj);
            }
        });
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("kernel matrix has non-finite entries".into()));
    }
    Ok(out)
}

/// Mean Euclidean distance over an explicit list of snapshot column pairs.
pub fn mean_pair_distance(x: ArrayView2<'_, f64>, pairs: &[(usize, usize)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("empty pair list".into()));
    }
    let m = x.ncols();
    let mut sum = 0.0;
    for &(i, j) in pairs {
        if i >= m || j >= m {
            return Err(Error::InvalidArgument(format!(
                "pair ({i}, {j}) out of range for M = {m}"
            )));
        }
        let diff_sq: f64 = x
            .column(i)
            .iter()
            .zip(x.column(j).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        sum += diff_sq.sqrt();
    }
    Ok(sum / pairs.len() as f64)
}

/// Empirical bandwidth: the mean Euclidean distance over up to `max_pairs`
/// uniformly sampled distinct snapshot pairs. Deterministic for a fixed seed.
pub fn estimate_bandwidth(
    x: ArrayView2<'_, f64>,
    max_pairs: usize,
    seed: u64,
) -> Result<f64> {
    let m = x.ncols();
    if m < 2 {
        return Err(Error::InsufficientData(format!(
            "bandwidth estimation needs at least 2 snapshots, got {m}"
        )));
    }
    if max_pairs == 0 {
        return Err(Error::InvalidArgument("max_pairs must be positive".into()));
    }
    let total = m * (m - 1) / 2;
    let pairs: Vec<(usize, usize)> = if total <= max_pairs {
        (0..m)
            .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
            .collect()
    } else {
        let mut rng = rng::seeded(seed);
        let mut seen = HashSet::with_capacity(max_pairs);
        let mut pairs = Vec::with_capacity(max_pairs);
        while pairs.len() < max_pairs {
            let i = rng.random_range(0..m);
            let j = rng.random_range(0..m);
            if i == j {
                continue;
            }
            let key = (i.min(j), i.max(j));
            if seen.insert(key) {
                pairs.push(key);
            }
        }
        pairs
    };
    let mean = mean_pair_distance(x, &pairs)?;
    if mean <= 0.0 {
        return Err(Error::DegenerateData(
            "all sampled snapshot pairs coincide; bandwidth is undefined".into(),
        ));
    }
    Ok(mean)
}

/// Sample `count` column indices without replacement from `0..m`,
/// returned in ascending order. Deterministic for a fixed seed.
pub(crate) fn sample_indices_without_replacement(
    m: usize,
    count: usize,
    seed: u64,
) -> Vec<usize> {
    debug_assert!(count <= m);
    // Partial Fisher-Yates over an index vector.
    let mut idx: Vec<usize> = (0..m).collect();
    let mut rng = rng::seeded_stream(seed, 1);
    for i in 0..count {
        let j = rng.random_range(i..m);
        idx.swap(i, j);
    }
    let mut chosen = idx[..count].to_vec();
    chosen.sort_unstable();
    chosen
}
