//! Dyson Brownian motion for the coupled pair (H_t, minor of H_t).
//!
//! The ground object is the exact matrix flow dH_t = dB_t/sqrt(N), where B is
//! a Hermitian Brownian motion with GOE/GUE variance profile; the minor is
//! driven by the corner restriction of the same B, with the *same* 1/sqrt(N)
//! normalization. `evolve_matrix_flow` integrates this exactly (Gaussian
//! increments per grid interval) and records, at every grid time, the top
//! eigenvalues of both levels together with the eigenvector overlap matrix
//!
//!   Theta_ij(t) = |< w_i^(1)(t), w_j^(2)(t) >|^2
//!
//! (minor vectors zero-padded). `evolve_particle_sde` integrates the
//! eigenvalue SDE
//!
//!   dlambda_i = sqrt(2/(beta N)) db_i + N^{-1} sum_{j != i} dt/(lambda_i - lambda_j)
//!
//! by Euler-Maruyama, with the two levels' top-m drivers jointly Gaussian with
//! cross-covariance Theta(t) dt taken from a matrix-flow companion run. The
//! diffusion coefficient sqrt(2/(beta N)) is the one that makes the SDE agree
//! with the matrix flow for our entry normalization (E|H_ij|^2 = 1/N); the
//! drift sign is repulsive, i.e. +1/(lambda_i - lambda_j).
//!
//! `coupling_experiment` runs the coupled matrix-flow pair plus an independent
//! comparison DBM started from an independent Gaussian-invariant spectrum of
//! matching size (scaled by sqrt(N_l/N)), sharing the top-m driver tape with
//! the true process, and reports the coupling distances and overlap inputs.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_gauss_invariant, HermitianMatrix, Symmetry};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{stream, Purpose};
use crate::spectral::{self, SpectralData};

/// Default exponent offset for the coupling time t1 = N^(-1/3 + OMEGA0).
pub const OMEGA0: f64 = 0.1;

/// Default number of tracked top indices per level.
pub const DEFAULT_TRACKED: usize = 5;

/// Collision guard: reject SDE steps bringing adjacent particles closer than
/// GUARD_SCALE / N.
pub const GUARD_SCALE: f64 = 1e-3;

const MAX_HALVINGS: u32 = 20;

pub fn coupling_time(n: usize) -> f64 {
    (n as f64).powf(-1.0 / 3.0 + OMEGA0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DbmMode {
    MatrixFlow,
    ParticleSde,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DbmConfig {
    pub n: usize,
    pub k: usize,
    /// Increasing nonnegative recording times; by convention the last entry is
    /// the coupling time t1.
    pub t_grid: Vec<f64>,
    pub mode: DbmMode,
    /// Maximum Euler-Maruyama substep (particle_sde only).
    pub step: f64,
    pub beta: u8,
    /// Tracked top indices per level.
    pub m: usize,
}

impl DbmConfig {
    /// Uniform grid of `intervals` steps on [0, t1] with t1 = N^(-1/3+omega0).
    pub fn uniform(n: usize, k: usize, beta: u8, intervals: usize, mode: DbmMode) -> Self {
        let t1 = coupling_time(n);
        let t_grid = (0..=intervals)
            .map(|j| t1 * j as f64 / intervals as f64)
            .collect();
        DbmConfig {
            n,
            k,
            t_grid,
            mode,
            step: t1 / intervals as f64,
            beta,
            m: DEFAULT_TRACKED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k >= self.n {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= k < n, got n={}, k={}",
                self.n, self.k
            )));
        }
        if self.beta != 1 && self.beta != 2 {
            return Err(Error::InvalidArgument("beta must be 1 or 2".into()));
        }
        if self.t_grid.is_empty() || self.t_grid[0] < 0.0 {
            return Err(Error::InvalidArgument("t_grid must be nonempty, nonnegative".into()));
        }
        if self.t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("t_grid must be strictly increasing".into()));
        }
        if self.mode == DbmMode::ParticleSde && self.step <= 0.0 {
            return Err(Error::InvalidArgument("step must be positive".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("m must be positive".into()));
        }
        Ok(())
    }

    fn symmetry(&self) -> Symmetry {
        if self.beta == 1 {
            Symmetry::Real
        } else {
            Symmetry::Complex
        }
    }

    fn tracked(&self) -> usize {
        self.m.min(self.n - self.k)
    }
}

/// Standard-normalized driver increments db_i (variance = interval length) of
/// the top tracked indices, one row per grid interval, extracted from a
/// matrix-flow run via db_i = sqrt(beta N / 2) <w_i, dH w_i>.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriverTape {
    pub full: Vec<Vec<f64>>,
    pub minor: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoupledTrajectory {
    pub times: Vec<f64>,
    /// top_full[t][i]: i-th largest eigenvalue of the full level at times[t].
    pub top_full: Vec<Vec<f64>>,
    pub top_minor: Vec<Vec<f64>>,
    /// theta[t][i][j] = |<w_i^(1), w_j^(2)>|^2 for tracked i, j.
    pub theta: Vec<Vec<Vec<f64>>>,
    pub tape: Option<DriverTape>,
}

impl CoupledTrajectory {
    pub fn sup_theta(&self) -> f64 {
        self.theta
            .iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |a, &b| a.max(b))
    }

    /// Trajectory CSV: time, level, index, eigenvalue.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,level,index,eigenvalue")?;
        for (t, time) in self.times.iter().enumerate() {
            for (level, vals) in [(1, &self.top_full[t]), (2, &self.top_minor[t])] {
                for (i, v) in vals.iter().enumerate() {
                    writeln!(w, "{:.17e},{},{},{:.17e}", time, level, i + 1, v)?;
                }
            }
        }
        Ok(())
    }

    /// Overlap CSV: time, i, j, theta.
    pub fn write_theta_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,i,j,theta")?;
        for (t, time) in self.times.iter().enumerate() {
            for (i, row) in self.theta[t].iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    writeln!(w, "{:.17e},{},{},{:.17e}", time, i + 1, j + 1, v)?;
                }
            }
        }
        Ok(())
    }
}

/// Squared overlaps between full-level eigenvectors and zero-padded minor
/// eigenvectors: Theta_ij = |sum_r conj(V1[k+r, i]) V2[r, j]|^2.
pub fn overlap_matrix(
    full: &SpectralData,
    minor: &SpectralData,
    k: usize,
    rows: usize,
    cols: usize,
) -> Vec<Vec<f64>> {
    let n2 = minor.eigenvalues.len();
    let mut theta = vec![vec![0.0; cols]; rows];
    for (i, row) in theta.iter_mut().enumerate() {
        for (j, out) in row.iter_mut().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for r in 0..n2 {
                s += full.eigenvectors[[k + r, i]].conj() * minor.eigenvectors[[r, j]];
            }
            *out = s.norm_sqr();
        }
    }
    theta
}

/// Exact matrix-flow evolution of H and its lower-right minor under common
/// Brownian increments; diagonalizes at each grid time and records eigenvalues,
/// overlaps, and the top-index driver tape.
pub fn evolve_matrix_flow(
    h: &HermitianMatrix,
    config: &DbmConfig,
    master_seed: u64,
    replica: u64,
) -> Result<CoupledTrajectory> {
    config.validate()?;
    if config.mode != DbmMode::MatrixFlow {
        return Err(Error::InvalidArgument("mode must be matrix_flow".into()));
    }
    if h.dim() != config.n {
        return Err(Error::DimensionMismatch {
            expected: config.n,
            got: h.dim(),
        });
    }
    if h.symmetry() != config.symmetry() {
        return Err(Error::InvalidArgument("beta does not match matrix symmetry".into()));
    }
    let n = config.n;
    let k = config.k;
    let m = config.tracked();
    let mut rng = stream(master_seed, replica, Purpose::MatrixFlow);
    let sym = h.symmetry();
    let beta = config.beta as f64;

    let mut current = h.entries().clone();
    let mut times = Vec::with_capacity(config.t_grid.len());
    let mut top_full = Vec::with_capacity(config.t_grid.len());
    let mut top_minor = Vec::with_capacity(config.t_grid.len());
    let mut theta = Vec::with_capacity(config.t_grid.len());
    let mut tape_full = Vec::new();
    let mut tape_minor = Vec::new();

    let mut prev_t = 0.0;
    let mut prev_spectra: Option<(SpectralData, SpectralData)> = None;
    for &t in &config.t_grid {
        let dt = t - prev_t;
        if dt > 0.0 {
            let u = sample_gauss_invariant(sym, n, &mut rng);
            let scale = Complex64::new(dt.sqrt(), 0.0);
            let increment = u.entries().mapv(|v| v * scale);
            // Driver tape over this interval, projected on the eigenvectors
            // at its start.
            if let Some((full, minor)) = &prev_spectra {
                let coeff = (beta * n as f64 / 2.0).sqrt();
                tape_full.push(project_diag(full, &increment, 0, m, coeff));
                tape_minor.push(project_diag(minor, &increment, k, m, coeff));
            }
            current += &increment;
        }
        let h_t = HermitianMatrix::from_array(sym, current.clone())?;
        let full = spectral::eigh(&h_t)?;
        let minor = spectral::eigh(&h_t.minor(k)?)?;
        times.push(t);
        top_full.push(full.eigenvalues[..m].to_vec());
        top_minor.push(minor.eigenvalues[..m].to_vec());
        theta.push(overlap_matrix(&full, &minor, k, m, m));
        prev_spectra = Some((full, minor));
        prev_t = t;
    }
    Ok(CoupledTrajectory {
        times,
        top_full,
        top_minor,
        theta,
        tape: Some(DriverTape {
            full: tape_full,
            minor: tape_minor,
        }),
    })
}

/// db_i = coeff * <w_i, dH w_i> for the top `m` eigenvectors, where dH is the
/// sub-block of `increment` starting at `offset`.
fn project_diag(
    spectra: &SpectralData,
    increment: &Array2<Complex64>,
    offset: usize,
    m: usize,
    coeff: f64,
) -> Vec<f64> {
    let dim = spectra.eigenvalues.len();
    (0..m)
        .map(|i| {
            let mut s = Complex64::new(0.0, 0.0);
            for r in 0..dim {
                let mut row = Complex64::new(0.0, 0.0);
                for c in 0..dim {
                    row += increment[[offset + r, offset + c]] * spectra.eigenvectors[[c, i]];
                }
                s += spectra.eigenvectors[[r, i]].conj() * row;
            }
            coeff * s.re
        })
        .collect()
}

fn repulsion_drift(lambda: &[f64], n_outer: usize) -> Vec<f64> {
    let inv_n = 1.0 / n_outer as f64;
    let len = lambda.len();
    let mut drift = vec![0.0; len];
    for i in 0..len {
        let mut s = 0.0;
        for j in 0..len {
            if j != i {
                s += 1.0 / (lambda[i] - lambda[j]);
            }
        }
        drift[i] = inv_n * s;
    }
    drift
}

/// One Euler-Maruyama step; `db` are driver increments of variance dt.
fn euler_step(lambda: &[f64], db: &[f64], dt: f64, n_outer: usize, beta: f64) -> Vec<f64> {
    let sigma = (2.0 / (beta * n_outer as f64)).sqrt();
    let drift = repulsion_drift(lambda, n_outer);
    lambda
        .iter()
        .zip(db)
        .zip(&drift)
        .map(|((&l, &b), &d)| l + sigma * b + d * dt)
        .collect()
}

fn ordered_with_gap(lambda: &[f64], guard: f64) -> bool {
    lambda.windows(2).all(|w| w[0] - w[1] > guard)
}

/// PSD square root of the 2m x 2m driver covariance [[I, Theta], [Theta^T, I]];
/// negative eigenvalues from numerical noise are clamped to zero.
fn joint_driver_sqrt(theta: &[Vec<f64>]) -> Result<Array2<f64>> {
    let m = theta.len();
    let d = 2 * m;
    let mut c = Array2::<f64>::eye(d);
    for i in 0..m {
        for j in 0..m {
            c[[i, m + j]] = theta[i][j];
            c[[m + j, i]] = theta[i][j];
        }
    }
    let (e, v) = linalg::eigh_real(&c, true)?;
    let v = v.unwrap();
    let mut s = Array2::<f64>::zeros((d, d));
    for (idx, &ev) in e.iter().enumerate() {
        let root = ev.max(0.0).sqrt();
        for i in 0..d {
            for j in 0..d {
                s[[i, j]] += root * v[[i, idx]] * v[[j, idx]];
            }
        }
    }
    Ok(s)
}

struct SdeState {
    full: Vec<f64>,
    minor: Vec<f64>,
    guard: f64,
    beta: f64,
    n_outer: usize,
    m: usize,
}

impl SdeState {
    /// Advance both levels by `dt_total` with correlated top drivers.
    /// `fixed_top` pins the total top-m driver increments over the step (tape
    /// replay); partial substeps take a proportional share. Steps are halved
    /// when the explicit Euler stability bound dt < N gap^2 fails or when a
    /// proposed step violates the collision guard; more than MAX_HALVINGS
    /// consecutive halvings aborts.
    fn advance<R: Rng>(
        &mut self,
        dt_total: f64,
        sqrt_c: &Array2<f64>,
        fixed_top: Option<(&[f64], &[f64])>,
        rng: &mut R,
    ) -> Result<()> {
        let m = self.m;
        let mut remaining = dt_total;
        let mut dt = dt_total;
        let mut halvings: u32 = 0;
        while remaining > 0.0 {
            dt = dt.min(remaining);
            if halvings > MAX_HALVINGS {
                return Err(Error::SdeAbort(format!(
                    "collision persists after {MAX_HALVINGS} halvings (dt = {dt:.3e}, min gaps {:.3e}/{:.3e})",
                    min_gap(&self.full),
                    min_gap(&self.minor)
                )));
            }
            // Explicit Euler on the 1/(N gap) drift is stable only below
            // dt ~ N gap^2; shrink before drawing noise if the current
            // configuration is too tight for this step.
            let g = min_gap(&self.full).min(min_gap(&self.minor));
            if g.is_finite() && dt > (0.25 * self.n_outer as f64 * g * g).max(1e-12) {
                dt /= 2.0;
                halvings += 1;
                continue;
            }
            let sqrt_dt = dt.sqrt();
            let share = dt / dt_total;
            let (top_full, top_minor): (Vec<f64>, Vec<f64>) = match fixed_top {
                Some((f, mi)) => (
                    f.iter().map(|v| v * share).collect(),
                    mi.iter().map(|v| v * share).collect(),
                ),
                None => {
                    let g: Vec<f64> =
                        (0..2 * m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    let mut z = vec![0.0; 2 * m];
                    for i in 0..2 * m {
                        for j in 0..2 * m {
                            z[i] += sqrt_c[[i, j]] * g[j];
                        }
                    }
                    (
                        z[..m].iter().map(|v| v * sqrt_dt).collect(),
                        z[m..].iter().map(|v| v * sqrt_dt).collect(),
                    )
                }
            };
            let mut db_full = top_full;
            db_full
                .extend((m..self.full.len()).map(|_| sqrt_dt * rng.sample::<f64, _>(StandardNormal)));
            let mut db_minor = top_minor;
            db_minor
                .extend((m..self.minor.len()).map(|_| sqrt_dt * rng.sample::<f64, _>(StandardNormal)));

            let new_full = euler_step(&self.full, &db_full, dt, self.n_outer, self.beta);
            let new_minor = euler_step(&self.minor, &db_minor, dt, self.n_outer, self.beta);
            if ordered_with_gap(&new_full, self.guard) && ordered_with_gap(&new_minor, self.guard) {
                self.full = new_full;
                self.minor = new_minor;
                remaining -= dt;
                halvings = 0;
                dt *= 2.0;
            } else {
                dt /= 2.0;
                halvings += 1;
            }
        }
        Ok(())
    }
}

fn min_gap(lambda: &[f64]) -> f64 {
    lambda
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min)
}

/// Euler-Maruyama integration of the coupled eigenvalue SDEs. The overlap
/// process Theta(t) (and optionally the top-index driver tape) comes from a
/// matrix-flow `companion` run on the same grid; Theta is held piecewise
/// constant between grid times. Initial spectra must be strictly decreasing.
pub fn evolve_particle_sde(
    initial_full: &[f64],
    initial_minor: &[f64],
    companion: &CoupledTrajectory,
    config: &DbmConfig,
    master_seed: u64,
    replica: u64,
    tape: Option<&DriverTape>,
) -> Result<CoupledTrajectory> {
    config.validate()?;
    if config.mode != DbmMode::ParticleSde {
        return Err(Error::InvalidArgument("mode must be particle_sde".into()));
    }
    if initial_full.len() != config.n || initial_minor.len() != config.n - config.k {
        return Err(Error::DimensionMismatch {
            expected: config.n,
            got: initial_full.len(),
        });
    }
    if !ordered_with_gap(initial_full, 0.0) || !ordered_with_gap(initial_minor, 0.0) {
        return Err(Error::InvalidArgument("initial spectra must be strictly decreasing".into()));
    }
    if companion.times.len() != config.t_grid.len()
        || companion
            .times
            .iter()
            .zip(&config.t_grid)
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::InvalidArgument("companion grid does not match t_grid".into()));
    }
    let m = config.tracked();
    if companion.theta[0].len() < m {
        return Err(Error::InvalidArgument("companion tracks fewer indices than m".into()));
    }
    if let Some(t) = tape {
        if t.full.len() + 1 != config.t_grid.len() && config.t_grid[0] == 0.0 {
            return Err(Error::InvalidArgument("tape length does not match grid intervals".into()));
        }
    }

    let mut rng = stream(master_seed, replica, Purpose::SdeDriver);
    let mut state = SdeState {
        full: initial_full.to_vec(),
        minor: initial_minor.to_vec(),
        guard: GUARD_SCALE / config.n as f64,
        beta: config.beta as f64,
        n_outer: config.n,
        m,
    };

    let mut times = Vec::with_capacity(config.t_grid.len());
    let mut top_full = Vec::with_capacity(config.t_grid.len());
    let mut top_minor = Vec::with_capacity(config.t_grid.len());
    let mut prev_t = 0.0;
    let mut interval = 0usize;
    for (g, &t) in config.t_grid.iter().enumerate() {
        let dt_total = t - prev_t;
        if dt_total > 0.0 {
            let theta_rows: Vec<Vec<f64>> = companion.theta[g.saturating_sub(1)]
                .iter()
                .take(m)
                .map(|row| row[..m].to_vec())
                .collect();
            let sqrt_c = joint_driver_sqrt(&theta_rows)?;
            if let Some(tape) = tape {
                // Tape increments cover the whole grid interval; replay in one
                // step so driver sums match the matrix flow exactly.
                state.advance(
                    dt_total,
                    &sqrt_c,
                    Some((&tape.full[interval], &tape.minor[interval])),
                    &mut rng,
                )?;
            } else {
                let nsub = (dt_total / config.step).ceil().max(1.0) as usize;
                let dt = dt_total / nsub as f64;
                for _ in 0..nsub {
                    state.advance(dt, &sqrt_c, None, &mut rng)?;
                }
            }
            interval += 1;
        }
        prev_t = t;
        times.push(t);
        top_full.push(state.full[..m].to_vec());
        top_minor.push(state.minor[..m].to_vec());
    }
    Ok(CoupledTrajectory {
        times,
        top_full,
        top_minor,
        theta: companion.theta.clone(),
        tape: None,
    })
}

/// Per-replica output of the independence coupling experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingReport {
    pub t1: f64,
    /// Top-m eigenvalues of the true coupled pair at t1.
    pub lambda_full: Vec<f64>,
    pub lambda_minor: Vec<f64>,
    /// Top-m eigenvalues of the comparison DBM at t1.
    pub mu_full: Vec<f64>,
    pub mu_minor: Vec<f64>,
    /// |lambda_i - mu_i| at t1 per level.
    pub diff_full: Vec<f64>,
    pub diff_minor: Vec<f64>,
    /// sup over grid times and tracked i, j of Theta_ij(t).
    pub sup_theta: f64,
    /// Reference coupling scale N^(-2/3).
    pub edge_scale: f64,
}

/// Runs the coupled matrix-flow pair and the independent comparison DBM
/// (started from independent Gaussian-invariant spectra of matching sizes,
/// scaled by sqrt(N_l/N), and sharing the true pair's top-m driver tape).
pub fn coupling_experiment(
    h: &HermitianMatrix,
    config: &DbmConfig,
    master_seed: u64,
    replica: u64,
) -> Result<CouplingReport> {
    let mut mf_config = config.clone();
    mf_config.mode = DbmMode::MatrixFlow;
    let coupled = evolve_matrix_flow(h, &mf_config, master_seed, replica)?;
    let tape = coupled.tape.clone().expect("matrix flow records a tape");

    let n = config.n;
    let k = config.k;
    let sym = config.symmetry();
    let mut rng = stream(master_seed, replica, Purpose::Comparison);
    let init_full = spectral::eigvalsh(&sample_gauss_invariant(sym, n, &mut rng))?;
    let ratio = ((n - k) as f64 / n as f64).sqrt();
    let init_minor: Vec<f64> = spectral::eigvalsh(&sample_gauss_invariant(sym, n - k, &mut rng))?
        .iter()
        .map(|v| v * ratio)
        .collect();

    let mut sde_config = config.clone();
    sde_config.mode = DbmMode::ParticleSde;
    let comparison = evolve_particle_sde(
        &init_full,
        &init_minor,
        &coupled,
        &sde_config,
        master_seed,
        replica,
        Some(&tape),
    )?;

    let last = coupled.times.len() - 1;
    let m = config.tracked();
    let lambda_full = coupled.top_full[last].clone();
    let lambda_minor = coupled.top_minor[last].clone();
    let mu_full = comparison.top_full[last].clone();
    let mu_minor = comparison.top_minor[last].clone();
    let diff_full = (0..m).map(|i| (lambda_full[i] - mu_full[i]).abs()).collect();
    let diff_minor = (0..m)
        .map(|i| (lambda_minor[i] - mu_minor[i]).abs())
        .collect();
    Ok(CouplingReport {
        t1: coupled.times[last],
        sup_theta: coupled.sup_theta(),
        lambda_full,
        lambda_minor,
        mu_full,
        mu_minor,
        diff_full,
        diff_minor,
        edge_scale: (n as f64).powf(-2.0 / 3.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{additive_flow_sample, sample_wigner, EnsembleSpec, EntryLaw};
    use crate::stats;

    fn test_matrix(n: usize, sym: Symmetry, seed: u64) -> HermitianMatrix {
        let spec = EnsembleSpec {
            dimension: n,
            symmetry: sym,
            entry_law: EntryLaw::Gaussian,
        };
        sample_wigner(&spec, &mut stream(seed, 0, Purpose::Sample))
    }

    #[test]
    fn time_zero_matches_eigh() {
        let h = test_matrix(20, Symmetry::Complex, 1);
        let cfg = DbmConfig::uniform(20, 4, 2, 5, DbmMode::MatrixFlow);
        let traj = evolve_matrix_flow(&h, &cfg, 9, 0).unwrap();
        let full = spectral::eigvalsh(&h).unwrap();
        let minor = spectral::eigvalsh(&h.minor(4).unwrap()).unwrap();
        for i in 0..cfg.tracked() {
            assert!((traj.top_full[0][i] - full[i]).abs() < 1e-13);
            assert!((traj.top_minor[0][i] - minor[i]).abs() < 1e-13);
        }
        for row in &traj.theta[0] {
            for &v in row {
                assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
        }
    }

    #[test]
    fn theta_identity_at_k_zero() {
        let h = test_matrix(14, Symmetry::Real, 2);
        let cfg = DbmConfig::uniform(14, 0, 1, 3, DbmMode::MatrixFlow);
        let traj = evolve_matrix_flow(&h, &cfg, 5, 0).unwrap();
        for theta in &traj.theta {
            for (i, row) in theta.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-10, "theta[{i}][{j}] = {v}");
                }
            }
        }
    }

    #[test]
    fn theta_doubly_substochastic() {
        // Full index sets: m = n - k covers every minor eigenvector.
        let h = test_matrix(22, Symmetry::Complex, 3);
        let mut cfg = DbmConfig::uniform(22, 2, 2, 4, DbmMode::MatrixFlow);
        cfg.m = 20;
        let traj = evolve_matrix_flow(&h, &cfg, 7, 0).unwrap();
        for theta in &traj.theta {
            for row in theta {
                let s: f64 = row.iter().sum();
                assert!(s <= 1.0 + 1e-8, "row sum {s}");
            }
            for j in 0..20 {
                let s: f64 = theta.iter().map(|row| row[j]).sum();
                // Columns over the full minor basis sum to the mass of the
                // padded full vector, which is at most 1; with all 20 full
                // vectors it is exactly ||P w_j||^2 <= 1.
                assert!(s <= 1.0 + 1e-8, "col sum {s}");
            }
        }
    }

    #[test]
    fn matrix_flow_bitwise_reproducible() {
        let h = test_matrix(16, Symmetry::Real, 4);
        let cfg = DbmConfig::uniform(16, 3, 1, 6, DbmMode::MatrixFlow);
        let a = evolve_matrix_flow(&h, &cfg, 11, 2).unwrap();
        let b = evolve_matrix_flow(&h, &cfg, 11, 2).unwrap();
        assert_eq!(a.top_full, b.top_full);
        assert_eq!(a.top_minor, b.top_minor);
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.tape.unwrap().full, b.tape.unwrap().full);
        let c = evolve_matrix_flow(&h, &cfg, 12, 2).unwrap();
        assert_ne!(a.top_full, c.top_full);
    }

    #[test]
    fn marginal_matches_additive_flow() {
        // H_t has the same law as H_0 + sqrt(t) U; compare top eigenvalues.
        let h = test_matrix(40, Symmetry::Real, 5);
        let t = 0.3;
        let cfg = DbmConfig {
            n: 40,
            k: 8,
            t_grid: vec![0.0, t],
            mode: DbmMode::MatrixFlow,
            step: t,
            beta: 1,
            m: 1,
        };
        let mut flow_tops = Vec::new();
        let mut additive_tops = Vec::new();
        for rep in 0..200u64 {
            let traj = evolve_matrix_flow(&h, &cfg, 21, rep).unwrap();
            flow_tops.push(traj.top_full[1][0]);
            let mut rng = stream(22, rep, Purpose::AdditiveFlow);
            let alt = additive_flow_sample(&h, t, &mut rng).unwrap();
            additive_tops.push(spectral::eigvalsh(&alt).unwrap()[0]);
        }
        let ks = stats::ks_two_sample(&flow_tops, &additive_tops).unwrap();
        assert!(ks.p_value > 0.005, "KS p = {}", ks.p_value);
    }

    #[test]
    fn zero_noise_repulsion_grows_gap() {
        // N = 2 with the noise switched off: the drift alone must separate
        // the particles monotonically.
        let mut lambda = vec![0.05, -0.05];
        let mut prev_gap = lambda[0] - lambda[1];
        for _ in 0..100 {
            lambda = euler_step(&lambda, &[0.0, 0.0], 1e-3, 2, 1.0);
            let gap = lambda[0] - lambda[1];
            assert!(gap > prev_gap, "gap shrank: {gap} < {prev_gap}");
            prev_gap = gap;
        }
    }

    #[test]
    fn joint_driver_sqrt_reproduces_covariance() {
        let theta = vec![vec![0.5, 0.1], vec![0.2, 0.3]];
        let s = joint_driver_sqrt(&theta).unwrap();
        let mut c = Array2::<f64>::zeros((4, 4));
        for i in 0..4 {
            for j in 0..4 {
                for l in 0..4 {
                    c[[i, j]] += s[[i, l]] * s[[j, l]];
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!((c[[i, 2 + j]] - theta[i][j]).abs() < 1e-10);
            }
            assert!((c[[i, i]] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sde_preserves_ordering_and_reproduces() {
        let h = test_matrix(12, Symmetry::Complex, 6);
        let cfg_mf = DbmConfig::uniform(12, 3, 2, 10, DbmMode::MatrixFlow);
        let companion = evolve_matrix_flow(&h, &cfg_mf, 13, 0).unwrap();
        let init_full = spectral::eigvalsh(&h).unwrap();
        let init_minor = spectral::eigvalsh(&h.minor(3).unwrap()).unwrap();
        let mut cfg = cfg_mf.clone();
        cfg.mode = DbmMode::ParticleSde;
        cfg.step = 1e-3;
        let a = evolve_particle_sde(&init_full, &init_minor, &companion, &cfg, 14, 0, None).unwrap();
        let b = evolve_particle_sde(&init_full, &init_minor, &companion, &cfg, 14, 0, None).unwrap();
        assert_eq!(a.top_full, b.top_full);
        for tops in &a.top_full {
            assert!(ordered_with_gap(tops, 0.0));
        }
        for (t, tops) in a.top_full.iter().enumerate() {
            for v in tops {
                assert!(v.is_finite(), "non-finite at grid index {t}");
            }
        }
    }

    #[test]
    fn sde_tracks_matrix_flow_mean() {
        // Smoke-scale cross-validation; the acceptance suite runs the spec
        // profile (N = 30, 300 replicas).
        let n = 12;
        let reps = 80u64;
        let cfg_mf = DbmConfig::uniform(n, 3, 1, 12, DbmMode::MatrixFlow);
        let mut cfg_sde = cfg_mf.clone();
        cfg_sde.mode = DbmMode::ParticleSde;
        cfg_sde.step = 2e-3;
        let mut mf_tops = Vec::new();
        let mut sde_tops = Vec::new();
        for rep in 0..reps {
            let h = test_matrix(n, Symmetry::Real, 100 + rep);
            let traj = evolve_matrix_flow(&h, &cfg_mf, 31, rep).unwrap();
            mf_tops.push(*traj.top_full.last().unwrap().first().unwrap());
            let init_full = spectral::eigvalsh(&h).unwrap();
            let init_minor = spectral::eigvalsh(&h.minor(3).unwrap()).unwrap();
            let sde =
                evolve_particle_sde(&init_full, &init_minor, &traj, &cfg_sde, 32, rep, None)
                    .unwrap();
            sde_tops.push(*sde.top_full.last().unwrap().first().unwrap());
        }
        let diff = (stats::mean(&mf_tops) - stats::mean(&sde_tops)).abs();
        let sigma = ((stats::variance(&mf_tops) + stats::variance(&sde_tops)) / reps as f64).sqrt();
        assert!(diff < 4.0 * sigma + 0.05, "mean diff {diff}, sigma {sigma}");
    }

    #[test]
    fn coupling_experiment_reports() {
        let n = 24;
        let h = test_matrix(n, Symmetry::Complex, 8);
        let cfg = DbmConfig::uniform(n, 6, 2, 10, DbmMode::MatrixFlow);
        let report = coupling_experiment(&h, &cfg, 41, 0).unwrap();
        assert_eq!(report.lambda_full.len(), cfg.tracked());
        assert!(report.sup_theta <= 1.0 + 1e-10);
        assert!(report.diff_full.iter().all(|d| d.is_finite() && *d >= 0.0));
        assert!((report.t1 - coupling_time(n)).abs() < 1e-12);
        // k = 0: levels coincide, sup Theta is 1 on the diagonal.
        let cfg0 = DbmConfig::uniform(n, 0, 2, 5, DbmMode::MatrixFlow);
        let r0 = coupling_experiment(&h, &cfg0, 42, 0).unwrap();
        assert!((r0.sup_theta - 1.0).abs() < 1e-10);
        assert_eq!(r0.lambda_full, r0.lambda_minor);
    }

    #[test]
    fn config_validation() {
        let mut cfg = DbmConfig::uniform(10, 2, 2, 4, DbmMode::MatrixFlow);
        assert!(cfg.validate().is_ok());
        cfg.t_grid[2] = cfg.t_grid[1];
        assert!(cfg.validate().is_err());
        let bad = DbmConfig::uniform(10, 10, 2, 4, DbmMode::MatrixFlow);
        assert!(bad.validate().is_err());
        let h = test_matrix(10, Symmetry::Real, 9);
        let cfg2 = DbmConfig::uniform(10, 2, 2, 4, DbmMode::MatrixFlow);
        assert!(evolve_matrix_flow(&h, &cfg2, 1, 0).is_err());
    }
}
