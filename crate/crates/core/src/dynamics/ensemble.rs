use nalgebra::DMatrix;
use rayon::prelude::*;

use super::master::Observables;
use super::mcwf::{mcwf_phases, TrajectoryRecord};
use super::options::{IntegrationOptions, Phase};
use super::series::TimeSeries;
use crate::error::{Error, Result};
use crate::qcore::{DensityMatrix, StateVector, C64};

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of trajectory `index` under `master_seed`; independent of how the
/// ensemble is scheduled.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

/// Runs `f(index, seed)` for every trajectory, in parallel, returning results
/// in index order.
pub fn run_indexed<T, F>(n_traj: usize, master_seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    (0..n_traj)
        .into_par_iter()
        .map(|i| f(i, trajectory_seed(master_seed, i as u64)))
        .collect()
}

/// Averaged trajectory observables.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    /// For every trajectory column `x`: the mean `x` and its standard error
    /// `x_stderr`.
    pub series: TimeSeries,
    pub records: Vec<TrajectoryRecord>,
}

/// Mean and standard error of the mean (zero for a single sample).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `n_traj` trajectories and averages their recorded observables.
pub fn ensemble_average(
    phases: &[Phase],
    psi0: &StateVector,
    opts: &IntegrationOptions,
    obs: &Observables,
    n_traj: usize,
    master_seed: u64,
) -> Result<EnsembleRun> {
    if n_traj == 0 {
        return Err(Error::InvalidParam("n_traj must be >= 1".into()));
    }
    let obs = Observables {
        snapshots: false,
        ..obs.clone()
    };
    let runs = run_indexed(n_traj, master_seed, |_, seed| {
        mcwf_phases(phases, psi0, opts, seed, &obs)
    })?;
    let grid = runs[0].series.t().to_vec();
    let mut series = TimeSeries::new(grid.clone());
    let names: Vec<String> = runs[0].series.names().map(str::to_string).collect();
    for name in &names {
        let mut mean = Vec::with_capacity(grid.len());
        let mut err = Vec::with_capacity(grid.len());
        let cols: Vec<&[f64]> = runs.iter().map(|r| r.series.require(name)).collect::<Result<_>>()?;
        let mut buf = vec![0.0; n_traj];
        for k in 0..grid.len() {
            for (b, c) in buf.iter_mut().zip(&cols) {
                *b = c[k];
            }
            let (m, e) = mean_stderr(&buf);
            mean.push(m);
            err.push(e);
        }
        series.push_column(name.clone(), mean)?;
        series.push_column(format!("{name}_stderr"), err)?;
    }
    Ok(EnsembleRun {
        series,
        records: runs.into_iter().map(|r| r.record).collect(),
    })
}

/// Trajectories processed together when accumulating ensemble densities.
const CHUNK: usize = 32;

/// Ensemble average of `|psi><psi|` at every recorded time.
///
/// Trajectories run in parallel chunks; each chunk's states are folded into
/// the running sums in index order, so the result does not depend on the
/// thread count. The sums use real matrix products:
/// `V V† = (A A^T + B B^T) + i (B A^T - A B^T)` for `V = A + iB`.
pub fn ensemble_density(
    phases: &[Phase],
    psi0: &StateVector,
    opts: &IntegrationOptions,
    n_traj: usize,
    master_seed: u64,
) -> Result<Vec<DensityMatrix>> {
    if n_traj == 0 {
        return Err(Error::InvalidParam("n_traj must be >= 1".into()));
    }
    let layout = phases
        .first()
        .ok_or_else(|| Error::InvalidParam("schedule has no phases".into()))?
        .model
        .layout()
        .clone();
    let dim = layout.total_dim();
    let obs = Observables::default().with_snapshots();
    let mut re: Vec<DMatrix<f64>> = Vec::new();
    let mut im: Vec<DMatrix<f64>> = Vec::new();

    let mut start = 0;
    while start < n_traj {
        let end = (start + CHUNK).min(n_traj);
        let snaps: Vec<Vec<nalgebra::DVector<C64>>> = (start..end)
            .into_par_iter()
            .map(|i| {
                mcwf_phases(phases, psi0, opts, trajectory_seed(master_seed, i as u64), &obs)
                    .map(|r| r.snapshots)
            })
            .collect::<Result<_>>()?;
        let n_rec = snaps[0].len();
        if re.is_empty() {
            re = vec![DMatrix::zeros(dim, dim); n_rec];
            im = vec![DMatrix::zeros(dim, dim); n_rec];
        }
        let k = end - start;
        for r in 0..n_rec {
            let a = DMatrix::from_fn(dim, k, |row, col| snaps[col][r][row].re);
            let b = DMatrix::from_fn(dim, k, |row, col| snaps[col][r][row].im);
            let (at, bt) = (a.transpose(), b.transpose());
            re[r].gemm(1.0, &a, &at, 1.0);
            re[r].gemm(1.0, &b, &bt, 1.0);
            im[r].gemm(1.0, &b, &at, 1.0);
            im[r].gemm(-1.0, &a, &bt, 1.0);
        }
        start = end;
    }
    let scale = 1.0 / n_traj as f64;
    re.into_iter()
        .zip(im)
        .map(|(r, i)| {
            let m = DMatrix::from_fn(dim, dim, |a, b| C64::new(r[(a, b)], i[(a, b)]) * scale);
            DensityMatrix::new(layout.clone(), m)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::mcwf::mcwf_trajectory;
    use crate::model::{LindbladModel, ModelParams};
    use crate::qcore::{embed, number_op};

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..1000).map(|i| trajectory_seed(42, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), a.len());
        assert_eq!(trajectory_seed(42, 5), a[5]);
        assert_ne!(trajectory_seed(43, 5), a[5]);
    }

    #[test]
    fn single_member_matches_direct_trajectory() {
        let p = ModelParams::symmetric(1.0, 1.0, 0.1);
        let model = LindbladModel::single_node(&p, 1, 10).unwrap();
        let n = embed(&number_op(10).unwrap(), "cav1", model.layout()).unwrap();
        let psi0 = StateVector::basis(model.layout().clone(), 0).unwrap();
        let opts = IntegrationOptions::new(0.005, 2.0, 20);
        let obs = Observables::default().expect("n", n);
        let ens = ensemble_average(&[Phase::new(model.clone(), 2.0)], &psi0, &opts, &obs, 1, 9).unwrap();
        let direct = mcwf_trajectory(&model, &psi0, &opts, trajectory_seed(9, 0), &obs).unwrap();
        assert_eq!(ens.series.require("n").unwrap(), direct.series.require("n").unwrap());
        assert!(ens.series.require("n_stderr").unwrap().iter().all(|&e| e == 0.0));
        assert_eq!(ens.records[0], direct.record);
    }

    #[test]
    fn density_of_one_trajectory_is_its_projector() {
        let p = ModelParams::symmetric(1.0, 1.0, 0.0);
        let model = LindbladModel::single_node(&p, 1, 8).unwrap();
        let psi0 = StateVector::basis(model.layout().clone(), 0).unwrap();
        let opts = IntegrationOptions::new(0.005, 1.0, 100);
        let phases = [Phase::new(model.clone(), 1.0)];
        let rhos = ensemble_density(&phases, &psi0, &opts, 1, 5).unwrap();
        let run = mcwf_trajectory(&model, &psi0, &opts, trajectory_seed(5, 0), &Observables::default().with_snapshots())
            .unwrap();
        for (rho, v) in rhos.iter().zip(&run.snapshots) {
            let proj = v * v.adjoint();
            assert!((rho.entries() - proj).norm() < 1e-14);
        }
    }

    #[test]
    fn mean_and_stderr() {
        let (m, e) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((e - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }
}
