//! Fitzhugh-Nagumo reaction-diffusion simulator: the built-in desk-scale
//! snapshot generator.
//!
//! The system integrated is
//!
//! ```text
//! v_t = v_xx + v - w - v^3
//! w_t = delta w_xx + epsilon (v - c1 w - c0)
//! ```
//!
//! on `x in [0, L]` with zero-flux (Neumann) boundaries, discretized with
//! second-order central differences and ghost points, advanced with explicit
//! Euler steps. Datasets record the `v` field every `dt_snap` time units,
//! starting from a tanh front relaxed over a burn-in period; the evolving
//! state is kicked every `perturb_every` snapshots by a sum of seeded
//! Gaussian bumps.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::SnapshotSet;
use crate::error::{Error, Result};
use crate::rng;

/// Burn-in integration time used to relax the initial front before
/// snapshots are recorded.
pub const BURN_IN_TIME: f64 = 50.0;

/// Number of Gaussian bumps per perturbation event.
const PERTURB_BUMPS: usize = 5;

/// Simulation configuration. Defaults reproduce the built-in benchmark
/// dataset: 100 grid points on `[0, 20]`, 2500 snapshot pairs at unit
/// intervals, perturbed every 25 snapshots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FnConfig {
    /// Grid points.
    pub nx: usize,
    /// Domain length `L`.
    pub domain_length: f64,
    pub c0: f64,
    pub c1: f64,
    /// Diffusion ratio multiplying `w_xx`.
    pub delta: f64,
    pub epsilon: f64,
    /// Snapshot interval.
    pub dt_snap: f64,
    /// Explicit Euler step; must divide `dt_snap` and satisfy the diffusion
    /// stability bound `inner_dt < dx^2 / (2 max(1, delta))`.
    pub inner_dt: f64,
    /// Number of snapshot pairs to generate (`M`).
    pub n_snapshots: usize,
    /// Apply a perturbation after every this many snapshots.
    pub perturb_every: usize,
    /// Bump amplitude of the perturbing field.
    pub perturb_amp: f64,
    pub seed: u64,
}

impl Default for FnConfig {
    fn default() -> Self {
        FnConfig {
            nx: 100,
            domain_length: 20.0,
            c0: -0.03,
            c1: 2.0,
            delta: 4.0,
            epsilon: 0.02,
            dt_snap: 1.0,
            inner_dt: 0.004,
            n_snapshots: 2500,
            perturb_every: 25,
            // Large enough to keep the slow front modes excited, small
            // enough that the forcing response stays in the linear regime.
            perturb_amp: 0.1,
            seed: 0,
        }
    }
}

impl FnConfig {
    /// Grid spacing.
    pub fn dx(&self) -> f64 {
        self.domain_length / (self.nx as f64 - 1.0)
    }

    /// Explicit-diffusion stability bound on `inner_dt`.
    pub fn stability_bound(&self) -> f64 {
        let dx = self.dx();
        dx * dx / (2.0 * self.delta.max(1.0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 3 {
            return Err(Error::InvalidArgument(format!(
                "need at least 3 grid points, got {}",
                self.nx
            )));
        }
        if !(self.domain_length > 0.0) {
            return Err(Error::InvalidArgument("domain length must be positive".into()));
        }
        if !(self.inner_dt > 0.0) || !(self.dt_snap > 0.0) {
            return Err(Error::InvalidArgument("time steps must be positive".into()));
        }
        let ratio = self.dt_snap / self.inner_dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "inner_dt {} must divide dt_snap {}",
                self.inner_dt, self.dt_snap
            )));
        }
        if self.inner_dt >= self.stability_bound() {
            return Err(Error::InvalidArgument(format!(
                "inner_dt {} violates the stability bound {:.6}",
                self.inner_dt,
                self.stability_bound()
            )));
        }
        if self.perturb_every == 0 {
            return Err(Error::InvalidArgument("perturb_every must be positive".into()));
        }
        if !self.perturb_amp.is_finite() || self.perturb_amp < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "perturb_amp must be finite and nonnegative, got {}",
                self.perturb_amp
            )));
        }
        Ok(())
    }

    /// Integer number of Euler steps per snapshot interval.
    pub fn steps_per_snapshot(&self) -> usize {
        (self.dt_snap / self.inner_dt).round() as usize
    }
}

/// Instantaneous simulator state.
#[derive(Debug, Clone)]
pub struct FnState {
    pub v: Array1<f64>,
    pub w: Array1<f64>,
    pub t: f64,
}

impl FnState {
    /// The relaxing tanh front centered at `L/2`, `w = 0`.
    pub fn front(cfg: &FnConfig) -> FnState {
        let half = cfg.domain_length / 2.0;
        let dx = cfg.dx();
        let v = Array1::from_shape_fn(cfg.nx, |i| (i as f64 * dx - half).tanh());
        FnState {
            v,
            w: Array1::zeros(cfg.nx),
            t: 0.0,
        }
    }
}

/// Second-order Neumann Laplacian via ghost points (zero flux at both ends).
#[inline]
fn laplacian(field: &[f64], i: usize, nx: usize, inv_dx2: f64) -> f64 {
    if i == 0 {
        2.0 * (field[1] - field[0]) * inv_dx2
    } else if i == nx - 1 {
        2.0 * (field[nx - 2] - field[nx - 1]) * inv_dx2
    } else {
        (field[i - 1] - 2.0 * field[i] + field[i + 1]) * inv_dx2
    }
}

fn step_into(
    v: &[f64],
    w: &[f64],
    v_out: &mut [f64],
    w_out: &mut [f64],
    cfg: &FnConfig,
) {
    let nx = cfg.nx;
    let dx = cfg.dx();
    let inv_dx2 = 1.0 / (dx * dx);
    let dt = cfg.inner_dt;
    for i in 0..nx {
        let lap_v = laplacian(v, i, nx, inv_dx2);
        let lap_w = laplacian(w, i, nx, inv_dx2);
        let vi = v[i];
        let wi = w[i];
        v_out[i] = vi + dt * (lap_v + vi - wi - vi * vi * vi);
        w_out[i] = wi + dt * (cfg.delta * lap_w + cfg.epsilon * (vi - cfg.c1 * wi - cfg.c0));
    }
}

/// Advance the state by one `inner_dt` step.
pub fn fn_step(state: &FnState, cfg: &FnConfig) -> Result<FnState> {
    cfg.validate()?;
    let mut v_out = vec![0.0; cfg.nx];
    let mut w_out = vec![0.0; cfg.nx];
    step_into(
        state.v.as_slice().expect("contiguous"),
        state.w.as_slice().expect("contiguous"),
        &mut v_out,
        &mut w_out,
        cfg,
    );
    if v_out.iter().chain(w_out.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Instability { step: 1 });
    }
    Ok(FnState {
        v: Array1::from_vec(v_out),
        w: Array1::from_vec(w_out),
        t: state.t + cfg.inner_dt,
    })
}

struct Integrator {
    v: Vec<f64>,
    w: Vec<f64>,
    v_next: Vec<f64>,
    w_next: Vec<f64>,
    steps_taken: usize,
}

impl Integrator {
    fn new(state: &FnState) -> Integrator {
        Integrator {
            v: state.v.to_vec(),
            w: state.w.to_vec(),
            v_next: vec![0.0; state.v.len()],
            w_next: vec![0.0; state.w.len()],
            steps_taken: 0,
        }
    }

    fn advance(&mut self, steps: usize, cfg: &FnConfig) -> Result<()> {
        for _ in 0..steps {
            step_into(&self.v, &self.w, &mut self.v_next, &mut self.w_next, cfg);
            std::mem::swap(&mut self.v, &mut self.v_next);
            std::mem::swap(&mut self.w, &mut self.w_next);
            self.steps_taken += 1;
            if self.v.iter().chain(self.w.iter()).any(|x| !x.is_finite()) {
                return Err(Error::Instability {
                    step: self.steps_taken,
                });
            }
        }
        Ok(())
    }
}

/// Add a sum of Gaussian bumps with seeded centers and signs to `v`.
fn perturb(v: &mut [f64], cfg: &FnConfig, rng: &mut rand_chacha::ChaCha8Rng) {
    let width = cfg.domain_length / 10.0;
    let dx = cfg.dx();
    for _ in 0..PERTURB_BUMPS {
        let center = rng.random::<f64>() * cfg.domain_length;
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let amp = sign * cfg.perturb_amp;
        for (i, vi) in v.iter_mut().enumerate() {
            let x = i as f64 * dx;
            let arg = (x - center) / width;
            *vi += amp * (-0.5 * arg * arg).exp();
        }
    }
}

/// Integrate the configured system and return the recorded `v` trajectory as
/// an `nx x (n_snapshots + 1)` matrix. Column `j` is the state at snapshot
/// time `j`; perturbations are applied right after recording, so each
/// perturbed interval's response lands in the following column.
pub fn generate_trajectory(cfg: &FnConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    if cfg.n_snapshots == 0 {
        return Err(Error::InsufficientData(
            "n_snapshots must be positive to produce a trajectory".into(),
        ));
    }
    let mut rng = rng::seeded(cfg.seed);
    let mut integrator = Integrator::new(&FnState::front(cfg));
    let burn_in_steps = (BURN_IN_TIME / cfg.inner_dt).round() as usize;
    integrator.advance(burn_in_steps, cfg)?;

    let steps = cfg.steps_per_snapshot();
    let mut trajectory = Array2::zeros((cfg.nx, cfg.n_snapshots + 1));
    trajectory
        .column_mut(0)
        .iter_mut()
        .zip(integrator.v.iter())
        .for_each(|(o, &v)| *o = v);
    for j in 1..=cfg.n_snapshots {
        integrator.advance(steps, cfg)?;
        trajectory
            .column_mut(j)
            .iter_mut()
            .zip(integrator.v.iter())
            .for_each(|(o, &v)| *o = v);
        if j % cfg.perturb_every == 0 && j < cfg.n_snapshots {
            perturb(&mut integrator.v, cfg, &mut rng);
        }
    }
    Ok(trajectory)
}

/// Generate the paired snapshot set of the `v` observable.
pub fn generate_dataset(cfg: &FnConfig) -> Result<SnapshotSet> {
    let trajectory = generate_trajectory(cfg)?;
    SnapshotSet::from_trajectory(trajectory.view(), cfg.dt_snap)
}
