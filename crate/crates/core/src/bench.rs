//! Runtime measurement harness for the three pipeline phases — basis
//! construction, Koopman matrix, eigenspectrum — across `(K, M, d)` grids,
//! with log-log slope fits against the asymptotic cost model:
//!
//! | method             | basis                  | koopman      | eigenspectrum       |
//! |--------------------|------------------------|--------------|---------------------|
//! | cheap Nyström      | `K^2 d + K^3`          | `K^3`        | `K^2 d + K^3`       |
//! | random Fourier     | `K M d`                | `K^2 M + K^3`| `K M d + K^2 d + K^3` |
//! | expensive Nyström  | `K M d + K^2(d+M) + K^3` | `K^2 M + K^3`| `K M d + K^2 d + K^3` |
//!
//! Benchmarks synthesize seeded standard-normal snapshots (the dynamics are
//! irrelevant to runtime), discard one warm-up run, and report medians.

use std::fmt;
use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::SnapshotSet;
use crate::edmd::{self, DEFAULT_RCOND};
use crate::error::{Error, Result};
use crate::features::{build_feature_matrices, FeatureMethod};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::rng;

/// Default memory budget for a single case: 2 GiB.
pub const DEFAULT_MEM_BUDGET: u64 = 2 * 1024 * 1024 * 1024;

/// One benchmark configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchCase {
    pub method: FeatureMethod,
    pub k: usize,
    pub m: usize,
    pub d: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl BenchCase {
    pub fn validate(&self) -> Result<()> {
        if self.method == FeatureMethod::Linear {
            return Err(Error::InvalidArgument(
                "the benchmark harness covers the kernel-approximation methods only".into(),
            ));
        }
        if self.k == 0 || self.m == 0 || self.d == 0 {
            return Err(Error::InvalidArgument(format!(
                "benchmark dimensions must be positive, got K = {}, M = {}, d = {}",
                self.k, self.m, self.d
            )));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be at least 1".into()));
        }
        if matches!(
            self.method,
            FeatureMethod::NystromCheap | FeatureMethod::NystromExpensive
        ) && self.k > self.m
        {
            return Err(Error::InvalidArgument(format!(
                "Nyström methods need K <= M, got K = {}, M = {}",
                self.k, self.m
            )));
        }
        Ok(())
    }

    /// Working-set estimate used by the memory guard:
    /// `16 (K M + M d + K^2)` bytes.
    pub fn memory_estimate(&self) -> u64 {
        let (k, m, d) = (self.k as u64, self.m as u64, self.d as u64);
        16 * (k * m + m * d + k * k)
    }
}

/// Harness configuration.
#[derive(Debug, Clone, Copy)]
pub struct BenchConfig {
    pub mem_budget_bytes: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            mem_budget_bytes: DEFAULT_MEM_BUDGET,
        }
    }
}

/// Median per-phase wall times for one case.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BenchResult {
    pub case: BenchCase,
    pub basis_seconds: f64,
    pub koopman_seconds: f64,
    pub eigen_seconds: f64,
    pub total_seconds: f64,
    pub peak_mem_estimate: u64,
}

impl BenchResult {
    pub fn phase_seconds(&self, phase: BenchPhase) -> f64 {
        match phase {
            BenchPhase::Basis => self.basis_seconds,
            BenchPhase::Koopman => self.koopman_seconds,
            BenchPhase::Eigen => self.eigen_seconds,
            BenchPhase::Total => self.total_seconds,
        }
    }
}

/// The timed phases. `Total` is measured end-to-end around the pipeline,
/// not summed from the parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchPhase {
    Basis,
    Koopman,
    Eigen,
    Total,
}

impl fmt::Display for BenchPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            BenchPhase::Basis => "basis",
            BenchPhase::Koopman => "koopman",
            BenchPhase::Eigen => "eigen",
            BenchPhase::Total => "total",
        };
        f.write_str(name)
    }
}

/// Axis swept by a scaling study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingAxis {
    K,
    M,
    D,
}

impl fmt::Display for ScalingAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingAxis::K => "K",
            ScalingAxis::M => "M",
            ScalingAxis::D => "d",
        })
    }
}

impl std::str::FromStr for ScalingAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "k" => Ok(ScalingAxis::K),
            "m" => Ok(ScalingAxis::M),
            "d" => Ok(ScalingAxis::D),
            other => Err(Error::InvalidArgument(format!(
                "unknown scaling axis {other:?} (expected K, M, or d)"
            ))),
        }
    }
}

/// Seeded standard-normal snapshot pairs for benchmarking.
pub fn synthetic_snapshots(d: usize, m: usize, seed: u64) -> Result<SnapshotSet> {
    let mut rng = rng::seeded(seed);
    let x = Array2::from_shape_fn((d, m), |_| rng.sample::<f64, _>(StandardNormal));
    let y = Array2::from_shape_fn((d, m), |_| rng.sample::<f64, _>(StandardNormal));
    SnapshotSet::from_pairs(x, y, 1.0)
}

struct PhaseSample {
    basis: f64,
    koopman: f64,
    eigen: f64,
    total: f64,
}

fn run_pipeline_once(case: &BenchCase, snapshots: &SnapshotSet) -> Result<PhaseSample> {
    // Bandwidth fixed at the typical pairwise distance of N(0, I_d) points
    // so kernel matrices are well conditioned at every scale.
    let kernel = KernelSpec::new(KernelFamily::Gaussian, (2.0 * case.d as f64).sqrt())?;
    let t_start = Instant::now();

    let t0 = Instant::now();
    let build = build_feature_matrices(case.method, snapshots, case.k, Some(kernel), case.seed)?;
    let basis = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let gram = edmd::build_gram(&build.matrices)?;
    let a = edmd::koopman_matrix(&gram, DEFAULT_RCOND)?;
    let koopman = t1.elapsed().as_secs_f64();

    let effective = build.effective_snapshots(snapshots)?;
    let t2 = Instant::now();
    let dec = edmd::spectrum(&a, &build.matrices, &effective, build.matrices.num_features())?;
    let eigen = t2.elapsed().as_secs_f64();

    let total = t_start.elapsed().as_secs_f64();
    std::hint::black_box(&dec);
    Ok(PhaseSample {
        basis,
        koopman,
        eigen,
        total,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Run one benchmark case: synthesize data, run one warm-up, then time
/// `repeats` end-to-end pipelines and report per-phase medians.
pub fn run_case(case: &BenchCase, config: &BenchConfig) -> Result<BenchResult> {
    case.validate()?;
    let required = case.memory_estimate();
    if required > config.mem_budget_bytes {
        return Err(Error::MemoryBudget {
            required,
            budget: config.mem_budget_bytes,
        });
    }
    let snapshots = synthetic_snapshots(case.d, case.m, case.seed)?;
    run_pipeline_once(case, &snapshots)?; // warm-up, discarded
    let mut basis = Vec::with_capacity(case.repeats);
    let mut koopman = Vec::with_capacity(case.repeats);
    let mut eigen = Vec::with_capacity(case.repeats);
    let mut total = Vec::with_capacity(case.repeats);
    for _ in 0..case.repeats {
        let sample = run_pipeline_once(case, &snapshots)?;
        basis.push(sample.basis);
        koopman.push(sample.koopman);
        eigen.push(sample.eigen);
        total.push(sample.total);
    }
    Ok(BenchResult {
        case: *case,
        basis_seconds: median(&mut basis),
        koopman_seconds: median(&mut koopman),
        eigen_seconds: median(&mut eigen),
        total_seconds: median(&mut total),
        peak_mem_estimate: required,
    })
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument(
            "slope fit needs at least two (x, y) samples".into(),
        ));
    }
    if xs.iter().chain(ys.iter()).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(
            "slope fit requires strictly positive values".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in lx.iter().zip(ly.iter()) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        return Err(Error::DegenerateData(
            "slope fit axis values are all equal".into(),
        ));
    }
    Ok(num / den)
}

fn axis_value(case: &BenchCase, axis: ScalingAxis) -> usize {
    match axis {
        ScalingAxis::K => case.k,
        ScalingAxis::M => case.m,
        ScalingAxis::D => case.d,
    }
}

/// Fit the log-log slope of one phase's time against one axis across a set
/// of results that vary only along that axis.
pub fn fit_scaling(
    results: &[BenchResult],
    axis: ScalingAxis,
    phase: BenchPhase,
) -> Result<f64> {
    if results.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "scaling fit needs at least 3 results, got {}",
            results.len()
        )));
    }
    let first = &results[0].case;
    for r in results {
        let c = &r.case;
        let fixed_match = match axis {
            ScalingAxis::K => c.m == first.m && c.d == first.d,
            ScalingAxis::M => c.k == first.k && c.d == first.d,
            ScalingAxis::D => c.k == first.k && c.m == first.m,
        };
        if c.method != first.method || !fixed_match {
            return Err(Error::InvalidArgument(
                "scaling fit requires cases varying only along the chosen axis".into(),
            ));
        }
    }
    let mut sorted: Vec<&BenchResult> = results.iter().collect();
    sorted.sort_by_key(|r| axis_value(&r.case, axis));
    if sorted
        .windows(2)
        .any(|w| axis_value(&w[0].case, axis) == axis_value(&w[1].case, axis))
    {
        return Err(Error::DegenerateData(
            "scaling fit axis values must be distinct".into(),
        ));
    }
    let xs: Vec<f64> = sorted
        .iter()
        .map(|r| axis_value(&r.case, axis) as f64)
        .collect();
    let ys: Vec<f64> = sorted
        .iter()
        .map(|r| r.phase_seconds(phase).max(1e-9))
        .collect();
    log_log_slope(&xs, &ys)
}

/// Dominant-term exponent predicted by the asymptotic cost model for the
/// given phase and axis at a representative case size.
pub fn predicted_slope(case: &BenchCase, axis: ScalingAxis, phase: BenchPhase) -> f64 {
    // Terms as (K, M, d) exponents per the cost model in the module docs.
    type Term = (u32, u32, u32);
    const CN_BASIS: &[Term] = &[(2, 0, 1), (3, 0, 0)];
    const CN_KOOP: &[Term] = &[(3, 0, 0)];
    const CN_EIG: &[Term] = &[(2, 0, 1), (3, 0, 0)];
    const RF_BASIS: &[Term] = &[(1, 1, 1)];
    const RF_KOOP: &[Term] = &[(2, 1, 0), (3, 0, 0)];
    const RF_EIG: &[Term] = &[(1, 1, 1), (2, 0, 1), (3, 0, 0)];
    const EN_BASIS: &[Term] = &[(1, 1, 1), (2, 0, 1), (2, 1, 0), (3, 0, 0)];

    let terms: Vec<Term> = match (case.method, phase) {
        (FeatureMethod::NystromCheap, BenchPhase::Basis) => CN_BASIS.to_vec(),
        (FeatureMethod::NystromCheap, BenchPhase::Koopman) => CN_KOOP.to_vec(),
        (FeatureMethod::NystromCheap, BenchPhase::Eigen) => CN_EIG.to_vec(),
        (FeatureMethod::NystromCheap, BenchPhase::Total) => {
            [CN_BASIS, CN_KOOP, CN_EIG].concat()
        }
        (FeatureMethod::Rff, BenchPhase::Basis) => RF_BASIS.to_vec(),
        (FeatureMethod::NystromExpensive, BenchPhase::Basis) => EN_BASIS.to_vec(),
        (_, BenchPhase::Koopman) => RF_KOOP.to_vec(),
        (_, BenchPhase::Eigen) => RF_EIG.to_vec(),
        (FeatureMethod::Rff, BenchPhase::Total) => [RF_BASIS, RF_KOOP, RF_EIG].concat(),
        (FeatureMethod::NystromExpensive, BenchPhase::Total) => {
            [EN_BASIS, RF_KOOP, RF_EIG].concat()
        }
        (FeatureMethod::Linear, _) => vec![(2, 1, 0), (3, 0, 0)],
    };
    let evaluate = |t: &Term| -> f64 {
        (case.k as f64).powi(t.0 as i32)
            * (case.m as f64).powi(t.1 as i32)
            * (case.d as f64).powi(t.2 as i32)
    };
    let dominant = terms
        .iter()
        .max_by(|a, b| evaluate(a).total_cmp(&evaluate(b)))
        .expect("nonempty term list");
    match axis {
        ScalingAxis::K => dominant.0 as f64,
        ScalingAxis::M => dominant.1 as f64,
        ScalingAxis::D => dominant.2 as f64,
    }
}
