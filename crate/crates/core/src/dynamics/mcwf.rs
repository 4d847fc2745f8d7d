use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::master::Observables;
use super::options::{plan, record_grid, IntegrationOptions, Phase};
use super::series::TimeSeries;
use crate::error::{Error, Result};
use crate::model::{ChannelLabel, LindbladModel};
use crate::qcore::{Operator, StateVector, C64};

/// One quantum jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Click {
    pub t: f64,
    pub channel: ChannelLabel,
}

/// Outcome of one quantum-jump realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    /// All jumps in time order, detected or not.
    pub clicks: Vec<Click>,
    /// Number of `c` clicks mod 2.
    pub c_parity: u8,
    /// Number of `d` clicks mod 2.
    pub d_parity: u8,
    /// Normalized state at the end of the schedule.
    pub final_state: StateVector,
}

impl TrajectoryRecord {
    /// Clicks on detected channels only.
    pub fn detector_clicks(&self) -> impl Iterator<Item = &Click> {
        self.clicks.iter().filter(|c| c.channel.is_detected())
    }

    pub fn count(&self, label: ChannelLabel) -> usize {
        self.clicks.iter().filter(|c| c.channel == label).count()
    }
}

/// Output of one trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryRun {
    pub record: TrajectoryRecord,
    /// Observables on the normalized state plus `detector_clicks`, the
    /// cumulative number of detector clicks.
    pub series: TimeSeries,
    /// Normalized state at every recorded time, when requested.
    pub snapshots: Vec<DVector<C64>>,
}

enum Propagator {
    /// Exact per-step factors `exp(-i h_j dt)` for a diagonal `H_nh`.
    Diagonal(Vec<C64>),
    /// `-i dt H_nh`, applied through the fourth-order Taylor polynomial
    /// (identical to classical RK4 for this linear system).
    Taylor(Operator),
}

struct PhaseKernel {
    propagator: Propagator,
    jumps: Vec<(ChannelLabel, Operator)>,
}

impl PhaseKernel {
    fn new(model: &LindbladModel, dt: f64) -> Self {
        let hnh = model.effective_nonhermitian();
        let propagator = if hnh.is_diagonal() {
            Propagator::Diagonal(
                hnh.diagonal()
                    .into_iter()
                    .map(|h| (C64::new(0.0, -dt) * h).exp())
                    .collect(),
            )
        } else {
            Propagator::Taylor(hnh.scale(C64::new(0.0, -dt)))
        };
        PhaseKernel {
            propagator,
            jumps: model.channels().iter().map(|c| (c.label, c.op.clone())).collect(),
        }
    }
}

struct Workspace {
    term: Vec<C64>,
    tmp: Vec<C64>,
}

fn step(kernel: &PhaseKernel, psi: &mut [C64], ws: &mut Workspace) {
    match &kernel.propagator {
        Propagator::Diagonal(f) => {
            for (x, g) in psi.iter_mut().zip(f) {
                *x *= g;
            }
        }
        Propagator::Taylor(g) => {
            ws.term.copy_from_slice(psi);
            for order in 1..=4 {
                g.apply_into(&ws.term, &mut ws.tmp);
                let s = 1.0 / order as f64;
                for (x, t) in psi.iter_mut().zip(ws.tmp.iter_mut()) {
                    *t *= s;
                    *x += *t;
                }
                std::mem::swap(&mut ws.term, &mut ws.tmp);
            }
        }
    }
}

fn norm_sq(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Single-model trajectory over `opts.t_max`.
pub fn mcwf_trajectory(
    model: &LindbladModel,
    psi0: &StateVector,
    opts: &IntegrationOptions,
    seed: u64,
    obs: &Observables,
) -> Result<TrajectoryRun> {
    mcwf_phases(&[Phase::new(model.clone(), opts.t_max)], psi0, opts, seed, obs)
}

/// First-order quantum-jump trajectory through consecutive phases.
///
/// Between jumps the unnormalized state follows `H - (i/2) sum L†L`. One
/// uniform threshold is drawn per no-jump segment; when the squared norm
/// falls below it at the end of a step, a jump is applied with channel
/// weights `||L_k psi||^2`, the state is renormalized and a new threshold is
/// drawn. The result is a deterministic function of its arguments.
pub fn mcwf_phases(
    phases: &[Phase],
    psi0: &StateVector,
    opts: &IntegrationOptions,
    seed: u64,
    obs: &Observables,
) -> Result<TrajectoryRun> {
    let steps = plan(phases, opts)?;
    let layout = phases[0].model.layout().clone();
    if psi0.layout().dims() != layout.dims() {
        return Err(Error::Structure(format!(
            "initial state layout {} differs from model layout {layout}",
            psi0.layout()
        )));
    }
    if !obs.integrate.is_empty() {
        return Err(Error::InvalidParam(
            "trajectories record instantaneous observables only".into(),
        ));
    }
    if (psi0.norm() - 1.0).abs() > crate::qcore::NORM_TOLERANCE {
        return Err(Error::Integrity(format!("initial state norm {}", psi0.norm())));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = layout.total_dim();
    let total: usize = steps.iter().sum();
    let grid = record_grid(total, opts);
    let mut cols = vec![Vec::with_capacity(grid.len()); obs.expect.len()];
    let mut click_col = Vec::with_capacity(grid.len());
    let mut snapshots = Vec::new();
    let mut clicks = Vec::new();
    let mut n_detector = 0usize;

    let mut psi: Vec<C64> = psi0.amplitudes().iter().copied().collect();
    let mut ws = Workspace {
        term: vec![C64::new(0.0, 0.0); dim],
        tmp: vec![C64::new(0.0, 0.0); dim],
    };
    let mut jumped = vec![C64::new(0.0, 0.0); dim];
    let mut scratch = vec![C64::new(0.0, 0.0); dim];
    let mut obs_buf = vec![C64::new(0.0, 0.0); dim];
    let mut threshold: f64 = rng.gen();

    let mut record = |psi: &[C64], n_detector: usize| {
        let nrm = norm_sq(psi);
        for ((_, op), col) in obs.expect.iter().zip(cols.iter_mut()) {
            op.apply_into(psi, &mut obs_buf);
            let e: C64 = psi.iter().zip(&obs_buf).map(|(a, b)| a.conj() * b).sum();
            col.push(e.re / nrm);
        }
        click_col.push(n_detector as f64);
        if obs.snapshots {
            let s = C64::new(1.0 / nrm.sqrt(), 0.0);
            snapshots.push(DVector::from_iterator(dim, psi.iter().map(|z| z * s)));
        }
    };

    record(&psi, 0);
    let mut k = 0usize;
    for (phase, &n) in phases.iter().zip(&steps) {
        let kernel = PhaseKernel::new(&phase.model, opts.dt);
        for _ in 0..n {
            let before = norm_sq(&psi);
            step(&kernel, &mut psi, &mut ws);
            k += 1;
            let after = norm_sq(&psi);
            debug_assert!(after <= before * (1.0 + 1e-10), "norm grew: {before} -> {after}");
            if !after.is_finite() {
                return Err(Error::Integrity(format!("non-finite state norm at t = {}", k as f64 * opts.dt)));
            }
            if !kernel.jumps.is_empty() && after < threshold {
                let t = k as f64 * opts.dt;
                let mut weights = Vec::with_capacity(kernel.jumps.len());
                for (_, op) in &kernel.jumps {
                    op.apply_into(&psi, &mut scratch);
                    weights.push(norm_sq(&scratch));
                }
                let total_w: f64 = weights.iter().sum();
                if !(total_w > 0.0) {
                    return Err(Error::Integrity(format!(
                        "jump threshold {threshold:.6} crossed at t = {t} with zero total jump rate (norm^2 = {after:.6e})"
                    )));
                }
                let mut u = rng.gen::<f64>() * total_w;
                let mut chosen = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        chosen = i;
                        break;
                    }
                    u -= w;
                }
                let (label, op) = &kernel.jumps[chosen];
                op.apply_into(&psi, &mut jumped);
                let s = C64::new(1.0 / norm_sq(&jumped).sqrt(), 0.0);
                for (x, j) in psi.iter_mut().zip(&jumped) {
                    *x = j * s;
                }
                debug_assert!((norm_sq(&psi) - 1.0).abs() < 1e-10);
                clicks.push(Click { t, channel: *label });
                if label.is_detected() {
                    n_detector += 1;
                }
                threshold = rng.gen();
            }
            if k % opts.record_stride == 0 {
                record(&psi, n_detector);
            }
        }
    }

    let c_parity = (clicks.iter().filter(|c| c.channel == ChannelLabel::C).count() % 2) as u8;
    let d_parity = (clicks.iter().filter(|c| c.channel == ChannelLabel::D).count() % 2) as u8;
    let final_state = StateVector::unnormalized(layout, DVector::from_vec(psi))?.normalize()?;

    let mut series = TimeSeries::new(grid);
    for ((name, _), col) in obs.expect.iter().zip(cols) {
        series.push_column(name.clone(), col)?;
    }
    series.push_column("detector_clicks", click_col)?;
    Ok(TrajectoryRun {
        record: TrajectoryRecord {
            seed,
            clicks,
            c_parity,
            d_parity,
            final_state,
        },
        series,
        snapshots,
    })
}
