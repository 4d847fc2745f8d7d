use nalgebra::DMatrix;

use super::options::{plan, record_grid, IntegrationOptions, Phase};
use super::series::TimeSeries;
use crate::error::{Error, Result};
use crate::model::LindbladModel;
use crate::qcore::{DensityMatrix, Operator, C64};

/// Largest tolerated `max|rho - rho†|` at a recorded point.
pub const HERMITICITY_TOLERANCE: f64 = 1e-10;
/// Most negative tolerated eigenvalue at a recorded point.
pub const POSITIVITY_TOLERANCE: f64 = 1e-8;

/// What to record during a master-equation run.
#[derive(Debug, Clone, Default)]
pub struct Observables {
    /// `Re Tr(O rho(t))` at each recorded time.
    pub expect: Vec<(String, Operator)>,
    /// `∫_0^t Re Tr(O rho(s)) ds`, integrated at the step order.
    pub integrate: Vec<(String, Operator)>,
    /// Keep `rho` at every recorded time.
    pub snapshots: bool,
    /// Compute the minimum eigenvalue at every recorded time.
    pub positivity: bool,
}

impl Observables {
    pub fn expect(mut self, name: impl Into<String>, op: Operator) -> Self {
        self.expect.push((name.into(), op));
        self
    }

    pub fn integrate(mut self, name: impl Into<String>, op: Operator) -> Self {
        self.integrate.push((name.into(), op));
        self
    }

    pub fn with_snapshots(mut self) -> Self {
        self.snapshots = true;
        self
    }

    pub fn with_positivity(mut self) -> Self {
        self.positivity = true;
        self
    }
}

/// Output of [`propagate_master`].
#[derive(Debug, Clone)]
pub struct MasterRun {
    /// Columns: each observable, each integrated observable, `trace_err`,
    /// `herm_defect` and, when requested, `min_eig`.
    pub series: TimeSeries,
    pub final_state: DensityMatrix,
    pub snapshots: Vec<DensityMatrix>,
}

/// Lindblad generator `L(rho) = -i[H, rho] + sum_k (L_k rho L_k† - {L_k†L_k, rho}/2)`
/// with `-i H_nh` precomputed.
struct Generator {
    minus_i_hnh: Operator,
    jumps: Vec<Operator>,
}

impl Generator {
    fn new(model: &LindbladModel) -> Self {
        Generator {
            minus_i_hnh: model.effective_nonhermitian().scale(C64::new(0.0, -1.0)),
            jumps: model.channels().iter().map(|c| c.op.clone()).collect(),
        }
    }

    /// Uses Hermiticity of `rho`: `-i H_nh rho + h.c.` and `L rho L† = L (L rho)†`.
    /// The jump sum is symmetrized so the result is exactly Hermitian.
    fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let m = self.minus_i_hnh.mul_dense(rho);
        let mut out = &m + m.adjoint();
        if self.jumps.is_empty() {
            return out;
        }
        let mut j = DMatrix::zeros(rho.nrows(), rho.ncols());
        for l in &self.jumps {
            let x = l.mul_dense(rho);
            j += l.mul_dense(&x.adjoint());
        }
        out += (&j + j.adjoint()) * C64::new(0.5, 0.0);
        out
    }
}

/// Integrates the master equation for one model over `opts.t_max`.
pub fn propagate_master(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    opts: &IntegrationOptions,
    obs: &Observables,
) -> Result<MasterRun> {
    propagate_master_phases(&[Phase::new(model.clone(), opts.t_max)], rho0, opts, obs)
}

/// Integrates the master equation through consecutive phases on one grid.
///
/// The step is classical fourth-order Runge–Kutta. For a time-independent
/// linear generator it coincides with the fourth-order Taylor polynomial of
/// `exp(dt L)`, which is the form evaluated here; integrated observables use
/// the exact integral of that polynomial over the step.
pub fn propagate_master_phases(
    phases: &[Phase],
    rho0: &DensityMatrix,
    opts: &IntegrationOptions,
    obs: &Observables,
) -> Result<MasterRun> {
    let steps = plan(phases, opts)?;
    let layout = phases[0].model.layout().clone();
    if rho0.layout().dims() != layout.dims() {
        return Err(Error::Structure(format!(
            "initial state layout {} differs from model layout {layout}",
            rho0.layout()
        )));
    }
    rho0.check(opts.tolerance_trace, HERMITICITY_TOLERANCE, POSITIVITY_TOLERANCE)?;

    let total: usize = steps.iter().sum();
    let grid = record_grid(total, opts);
    let mut expect_cols = vec![Vec::with_capacity(grid.len()); obs.expect.len()];
    let mut integ_cols = vec![Vec::with_capacity(grid.len()); obs.integrate.len()];
    let mut integ_acc = vec![0.0; obs.integrate.len()];
    let mut trace_err = Vec::with_capacity(grid.len());
    let mut herm = Vec::with_capacity(grid.len());
    let mut min_eig = Vec::new();
    let mut snapshots = Vec::new();

    let mut rho = rho0.entries().clone();
    let dt = opts.dt;

    let mut record = |k: usize, rho: &DMatrix<C64>, integ_acc: &[f64]| -> Result<()> {
        let state = DensityMatrix::new(layout.clone(), rho.clone())?;
        for ((_, op), col) in obs.expect.iter().zip(expect_cols.iter_mut()) {
            col.push(op.trace_product(rho).re);
        }
        for (acc, col) in integ_acc.iter().zip(integ_cols.iter_mut()) {
            col.push(*acc);
        }
        let t = k as f64 * dt;
        trace_err.push((rho.trace() - C64::new(1.0, 0.0)).norm());
        let h = state.hermiticity_defect();
        if h > HERMITICITY_TOLERANCE {
            return Err(Error::Integrity(format!(
                "Hermiticity defect {h:.3e} at t = {t}"
            )));
        }
        herm.push(h);
        if obs.positivity {
            let m = state.min_eigenvalue();
            if m < -POSITIVITY_TOLERANCE {
                return Err(Error::Integrity(format!("minimum eigenvalue {m:.3e} at t = {t}")));
            }
            min_eig.push(m);
        }
        if obs.snapshots {
            snapshots.push(state);
        }
        Ok(())
    };

    record(0, &rho, &integ_acc)?;
    let mut k = 0;
    for (phase, &n) in phases.iter().zip(&steps) {
        let gen = Generator::new(&phase.model);
        for _ in 0..n {
            let mut term = rho.clone();
            let mut next = rho.clone();
            for (acc, (_, op)) in integ_acc.iter_mut().zip(&obs.integrate) {
                *acc += dt * op.trace_product(&term).re;
            }
            for order in 1..=4 {
                term = gen.apply(&term) * C64::new(dt / order as f64, 0.0);
                next += &term;
                for (acc, (_, op)) in integ_acc.iter_mut().zip(&obs.integrate) {
                    *acc += dt / (order + 1) as f64 * op.trace_product(&term).re;
                }
            }
            rho = next;
            k += 1;
            let err = (rho.trace() - C64::new(1.0, 0.0)).norm();
            if !(err <= opts.tolerance_trace) {
                return Err(Error::TraceDivergence {
                    t: k as f64 * dt,
                    error: err,
                    tolerance: opts.tolerance_trace,
                });
            }
            if k % opts.record_stride == 0 {
                record(k, &rho, &integ_acc)?;
            }
        }
    }

    let mut series = TimeSeries::new(grid);
    for ((name, _), col) in obs.expect.iter().zip(expect_cols) {
        series.push_column(name.clone(), col)?;
    }
    for ((name, _), col) in obs.integrate.iter().zip(integ_cols) {
        series.push_column(name.clone(), col)?;
    }
    series.push_column("trace_err", trace_err)?;
    series.push_column("herm_defect", herm)?;
    if obs.positivity {
        series.push_column("min_eig", min_eig)?;
    }
    Ok(MasterRun {
        series,
        final_state: DensityMatrix::new(layout, rho)?,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{branch_amplitude_analytic, y_state, Channel, ChannelLabel, ModelParams};
    use crate::qcore::{annihilation_op, coherent_state, number_op, HilbertLayout, StateVector};

    fn damped_cavity(n: usize, kappa: f64) -> LindbladModel {
        let layout = HilbertLayout::single("cav1", n);
        let a = annihilation_op(n).unwrap().with_layout(layout.clone()).unwrap();
        LindbladModel::new(
            layout.clone(),
            Operator::zeros(layout),
            vec![Channel {
                label: ChannelLabel::Cavity(1),
                op: a.scale_re(kappa.sqrt()),
                detected: true,
            }],
        )
        .unwrap()
    }

    #[test]
    fn free_model_leaves_state_unchanged() {
        let layout = HilbertLayout::single("q", 3);
        let model = LindbladModel::new(layout.clone(), Operator::zeros(layout.clone()), vec![]).unwrap();
        let rho0 = DensityMatrix::maximally_mixed(layout);
        let run = propagate_master(&model, &rho0, &IntegrationOptions::new(0.1, 5.0, 10), &Observables::default())
            .unwrap();
        assert!((run.final_state.entries() - rho0.entries()).norm() < 1e-12);
    }

    #[test]
    fn damped_cavity_moments() {
        let n = 20;
        let model = damped_cavity(n, 1.0);
        let a = annihilation_op(n).unwrap();
        let rho0 = coherent_state(C64::new(1.0, 0.0), n).unwrap().state.to_density();
        let rho0 = rho0.with_layout(model.layout().clone()).unwrap();
        let obs = Observables::default()
            .expect("a", a.clone().with_layout(model.layout().clone()).unwrap())
            .expect("n", number_op(n).unwrap().with_layout(model.layout().clone()).unwrap())
            .integrate("emitted", number_op(n).unwrap().with_layout(model.layout().clone()).unwrap())
            .with_positivity();
        let run = propagate_master(&model, &rho0, &IntegrationOptions::new(0.005, 2.0, 40), &obs).unwrap();
        let s = &run.series;
        for (k, &t) in s.t().iter().enumerate() {
            assert!((s.require("a").unwrap()[k] - (-t / 2.0).exp()).abs() < 1e-6);
            assert!((s.require("n").unwrap()[k] - (-t).exp()).abs() < 1e-6);
            assert!((s.require("emitted").unwrap()[k] - (1.0 - (-t).exp())).abs() < 1e-6);
            assert!(s.require("min_eig").unwrap()[k] >= -1e-8);
        }
        assert!((s.last("n").unwrap() - 0.1353).abs() < 1e-4);
        assert!((s.last("a").unwrap() - 0.3679).abs() < 1e-4);
    }

    #[test]
    fn closed_single_node_follows_branch_amplitude() {
        let n = 36;
        let p = ModelParams::symmetric(1.0, 0.0, 0.0);
        let model = LindbladModel::single_node(&p, 1, n).unwrap();
        let psi0 = StateVector::from_amplitudes(
            model.layout().clone(),
            y_state(1, 2).unwrap().kronecker(&crate::model::fock_vector(0, n)),
        )
        .unwrap();
        let num = crate::qcore::embed(&number_op(n).unwrap(), "cav1", model.layout()).unwrap();
        let obs = Observables::default().expect("n", num).with_snapshots();
        let run = propagate_master(&model, &psi0.to_density(), &IntegrationOptions::new(0.002, 2.0, 100), &obs)
            .unwrap();
        for (k, &t) in run.series.t().iter().enumerate() {
            assert!((run.series.require("n").unwrap()[k] - t * t).abs() < 1e-5);
            assert!((run.snapshots[k].purity() - 1.0).abs() < 1e-8);
        }
        let alpha = branch_amplitude_analytic(1.0, 0.0, 2.0, 1);
        let coh = coherent_state(alpha, n).unwrap().state;
        let target = StateVector::from_amplitudes(
            model.layout().clone(),
            y_state(1, 2).unwrap().kronecker(coh.amplitudes()),
        )
        .unwrap();
        let f = crate::qcore::fidelity_pure(&run.final_state, &target).unwrap();
        assert!(f > 1.0 - 1e-6, "{f}");
    }

    #[test]
    fn trace_divergence_is_reported() {
        let n = 6;
        let model = damped_cavity(n, 1.0);
        let rho0 = DensityMatrix::new(
            model.layout().clone(),
            crate::model::fock_vector(5, n) * crate::model::fock_vector(5, n).adjoint(),
        )
        .unwrap();
        let mut opts = IntegrationOptions::new(0.05, 1.0, 1);
        opts.tolerance_trace = 1e-30;
        assert!(matches!(
            propagate_master(&model, &rho0, &opts, &Observables::default()),
            Err(Error::TraceDivergence { .. })
        ));
    }
}
