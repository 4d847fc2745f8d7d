use serde::Serialize;

use crate::dynamics::{
    mcwf_phases, mean_stderr, run_indexed, IntegrationOptions, Observables, Phase, TimeSeries,
    TrajectoryRecord,
};
use crate::error::{Error, Result};
use crate::model::{bell_y_state, dot_label, two_node_ground, ChannelLabel, LindbladModel, ModelParams};
use crate::qcore::{fidelity_pure, DensityMatrix, StateVector};

use super::schedule::{fock_for, ProtocolSchedule};

/// Detector that heralded a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum HeraldPort {
    C,
    D,
    None,
}

impl std::fmt::Display for HeraldPort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HeraldPort::C => "c",
            HeraldPort::D => "d",
            HeraldPort::None => "none",
        })
    }
}

/// Result of one heralding attempt.
#[derive(Debug, Clone)]
pub struct HeraldOutcome {
    pub record: TrajectoryRecord,
    /// Port of the first detector click.
    pub herald_port: HeraldPort,
    /// Bell state expected for the port and its click parity.
    pub target_state: Option<StateVector>,
    /// Fidelity of the two-dot state with `target_state`.
    pub fidelity: Option<f64>,
    /// Fidelity with the even-parity target of the heralding port.
    pub fixed_target_fidelity: Option<f64>,
    /// At least one detector click.
    pub success: bool,
}

impl HeraldOutcome {
    /// Reduced state of the two dots at the end of the schedule.
    pub fn dot_state(&self) -> Result<DensityMatrix> {
        dot_state(&self.record.final_state)
    }

    pub fn first_click_time(&self) -> Option<f64> {
        self.record.detector_clicks().next().map(|c| c.t)
    }
}

fn dot_state(psi: &StateVector) -> Result<DensityMatrix> {
    let (d1, d2) = (dot_label(1), dot_label(2));
    psi.partial_trace(&[d1.as_str(), d2.as_str()])
}

/// Bell target for a port: `(|y+y+> + (-1)^p |y-y->)/sqrt 2` for `c` and
/// `(|y+y-> + (-1)^p |y-y+>)/sqrt 2` for `d`, `p` the click parity.
pub fn herald_target(port: HeraldPort, parity: u8) -> Result<StateVector> {
    let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
    match port {
        HeraldPort::C => bell_y_state(1, 1, sign),
        HeraldPort::D => bell_y_state(1, -1, sign),
        HeraldPort::None => Err(Error::InvalidParam("no target without a herald".into())),
    }
}

/// Two-node protocol prepared once and run for many seeds.
#[derive(Debug, Clone)]
pub struct HeraldExperiment {
    n_fock: usize,
    phases: Vec<Phase>,
    psi0: StateVector,
    opts: IntegrationOptions,
}

impl HeraldExperiment {
    /// Drive under `H_eff` for `t_drive`, then ring down with the couplings
    /// off and every collapse channel kept, from `|X->|X->|0>|0>`.
    pub fn new(params: &ModelParams, schedule: &ProtocolSchedule) -> Result<Self> {
        params.validate()?;
        schedule.validate()?;
        let n_fock = fock_for(params, schedule.t_drive);
        let model = LindbladModel::two_node(params, n_fock)?;
        let mut phases = vec![Phase::new(model.clone(), schedule.t_drive)];
        if schedule.t_ringdown > 0.0 {
            phases.push(Phase::new(model.free_decay(), schedule.t_ringdown));
        }
        Ok(HeraldExperiment {
            n_fock,
            phases,
            psi0: two_node_ground(n_fock)?,
            opts: schedule.options(),
        })
    }

    pub fn n_fock(&self) -> usize {
        self.n_fock
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.psi0
    }

    pub fn options(&self) -> &IntegrationOptions {
        &self.opts
    }

    pub fn run(&self, seed: u64) -> Result<HeraldOutcome> {
        let run = mcwf_phases(&self.phases, &self.psi0, &self.opts, seed, &Observables::default())?;
        outcome_from(run.record)
    }
}

/// Classifies a finished trajectory and scores its dot state.
pub fn outcome_from(record: TrajectoryRecord) -> Result<HeraldOutcome> {
    let herald_port = match record.detector_clicks().next().map(|c| c.channel) {
        Some(ChannelLabel::C) => HeraldPort::C,
        Some(ChannelLabel::D) => HeraldPort::D,
        Some(other) => {
            return Err(Error::Structure(format!(
                "channel {other} is not a beamsplitter port"
            )))
        }
        None => HeraldPort::None,
    };
    if herald_port == HeraldPort::None {
        return Ok(HeraldOutcome {
            record,
            herald_port,
            target_state: None,
            fidelity: None,
            fixed_target_fidelity: None,
            success: false,
        });
    }
    let parity = match herald_port {
        HeraldPort::C => record.c_parity,
        _ => record.d_parity,
    };
    let rho = dot_state(&record.final_state)?;
    let target = herald_target(herald_port, parity)?;
    let fidelity = fidelity_pure(&rho, &target)?;
    let fixed = fidelity_pure(&rho, &herald_target(herald_port, 0)?)?;
    Ok(HeraldOutcome {
        record,
        herald_port,
        target_state: Some(target),
        fidelity: Some(fidelity),
        fixed_target_fidelity: Some(fixed),
        success: true,
    })
}

/// One heralding attempt with the default prepared experiment.
pub fn run_herald_protocol(params: &ModelParams, schedule: &ProtocolSchedule, seed: u64) -> Result<HeraldOutcome> {
    HeraldExperiment::new(params, schedule)?.run(seed)
}

/// Mean and standard error over the trajectories that contribute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityStats {
    pub count: usize,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
}

impl FidelityStats {
    fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return FidelityStats {
                count: 0,
                mean: None,
                stderr: None,
            };
        }
        let (m, e) = mean_stderr(values);
        FidelityStats {
            count: values.len(),
            mean: Some(m),
            stderr: Some(e),
        }
    }
}

/// Per-trajectory summary row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeraldRow {
    pub index: usize,
    pub seed: u64,
    pub port: HeraldPort,
    pub first_click_t: Option<f64>,
    pub c_clicks: usize,
    pub d_clicks: usize,
    /// Undetected jumps (dot or trion channels).
    pub other_jumps: usize,
    pub c_parity: u8,
    pub d_parity: u8,
    pub fidelity: Option<f64>,
    pub fixed_target_fidelity: Option<f64>,
}

impl HeraldRow {
    fn new(index: usize, o: &HeraldOutcome) -> Self {
        let r = &o.record;
        let c = r.count(ChannelLabel::C);
        let d = r.count(ChannelLabel::D);
        HeraldRow {
            index,
            seed: r.seed,
            port: o.herald_port,
            first_click_t: o.first_click_time(),
            c_clicks: c,
            d_clicks: d,
            other_jumps: r.clicks.len() - c - d,
            c_parity: r.c_parity,
            d_parity: r.d_parity,
            fidelity: o.fidelity,
            fixed_target_fidelity: o.fixed_target_fidelity,
        }
    }
}

/// Ensemble summary of the heralding protocol.
#[derive(Debug, Clone, Serialize)]
pub struct HeraldStatistics {
    pub n_traj: usize,
    pub n_success: usize,
    pub success_probability: f64,
    pub success_stderr: f64,
    /// Over all successful trajectories.
    pub pooled: FidelityStats,
    pub port_c: FidelityStats,
    pub port_d: FidelityStats,
    /// Pooled fidelity with the even-parity targets.
    pub fixed_target: FidelityStats,
    pub rows: Vec<HeraldRow>,
}

impl HeraldStatistics {
    fn from_rows(rows: Vec<HeraldRow>) -> Self {
        let n_traj = rows.len();
        let hits: Vec<f64> = rows
            .iter()
            .map(|r| if r.port == HeraldPort::None { 0.0 } else { 1.0 })
            .collect();
        let (p, pe) = mean_stderr(&hits);
        let pick = |port: Option<HeraldPort>, fixed: bool| -> Vec<f64> {
            rows.iter()
                .filter(|r| r.port != HeraldPort::None && port.map_or(true, |p| r.port == p))
                .filter_map(|r| if fixed { r.fixed_target_fidelity } else { r.fidelity })
                .collect()
        };
        HeraldStatistics {
            n_traj,
            n_success: hits.iter().filter(|&&h| h > 0.0).count(),
            success_probability: p,
            success_stderr: pe,
            pooled: FidelityStats::of(&pick(None, false)),
            port_c: FidelityStats::of(&pick(Some(HeraldPort::C), false)),
            port_d: FidelityStats::of(&pick(Some(HeraldPort::D), false)),
            fixed_target: FidelityStats::of(&pick(None, true)),
            rows,
        }
    }
}

/// Runs `n_traj` heralding attempts with seeds derived from `master_seed`.
pub fn herald_statistics(
    params: &ModelParams,
    schedule: &ProtocolSchedule,
    n_traj: usize,
    master_seed: u64,
) -> Result<HeraldStatistics> {
    if n_traj == 0 {
        return Err(Error::InvalidParam("n_traj must be >= 1".into()));
    }
    let exp = HeraldExperiment::new(params, schedule)?;
    let rows = run_indexed(n_traj, master_seed, |i, seed| Ok(HeraldRow::new(i, &exp.run(seed)?)))?;
    Ok(HeraldStatistics::from_rows(rows))
}

/// Heralded fidelity against drive length, with the ring-down of `schedule`
/// kept fixed. Grid: the drive lengths. Columns: `lambda_T`, `F_mean`,
/// `F_stderr`, `F_c`, `F_d`, `success_probability`, `success_stderr`;
/// missing means are NaN.
pub fn fidelity_curve(
    params: &ModelParams,
    schedule: &ProtocolSchedule,
    t_drives: &[f64],
    n_traj: usize,
    master_seed: u64,
) -> Result<TimeSeries> {
    let lambda = params.node(1)?.lambda;
    let mut cols: [Vec<f64>; 7] = Default::default();
    for &t in t_drives {
        let st = herald_statistics(params, &schedule.with_drive(t), n_traj, master_seed)?;
        let nan = f64::NAN;
        let vals = [
            lambda * t,
            st.pooled.mean.unwrap_or(nan),
            st.pooled.stderr.unwrap_or(nan),
            st.port_c.mean.unwrap_or(nan),
            st.port_d.mean.unwrap_or(nan),
            st.success_probability,
            st.success_stderr,
        ];
        for (c, v) in cols.iter_mut().zip(vals) {
            c.push(v);
        }
    }
    let mut s = TimeSeries::new(t_drives.to_vec());
    let names = ["lambda_T", "F_mean", "F_stderr", "F_c", "F_d", "success_probability", "success_stderr"];
    for (name, c) in names.into_iter().zip(cols) {
        s.push_column(name, c)?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(t_drive: f64, t_ringdown: f64) -> ProtocolSchedule {
        ProtocolSchedule::new(t_drive, t_ringdown, 0.0025, 400)
    }

    #[test]
    fn no_coupling_no_clicks() {
        let p = ModelParams::symmetric(0.0, 1.0, 0.0);
        let o = run_herald_protocol(&p, &sched(1.0, 1.0), 1).unwrap();
        assert!(!o.success);
        assert_eq!(o.herald_port, HeraldPort::None);
        assert!(o.fidelity.is_none() && o.target_state.is_none());
    }

    #[test]
    fn targets_are_orthonormal_bell_states() {
        let states: Vec<StateVector> = [(HeraldPort::C, 0), (HeraldPort::C, 1), (HeraldPort::D, 0), (HeraldPort::D, 1)]
            .iter()
            .map(|&(p, q)| herald_target(p, q).unwrap())
            .collect();
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let ov = a.inner(b).unwrap().norm();
                assert!((ov - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        assert!(herald_target(HeraldPort::None, 0).is_err());
    }

    #[test]
    fn clicks_stay_at_the_first_port() {
        let mut p = ModelParams::symmetric(1.0, 1.0, 0.0);
        p.n_fock = Some(12);
        let exp = HeraldExperiment::new(&p, &sched(1.5, 8.0)).unwrap();
        let mut heralded = 0;
        for seed in 0..20 {
            let o = exp.run(seed).unwrap();
            let ports: Vec<_> = o.record.detector_clicks().map(|c| c.channel).collect();
            if let Some(first) = ports.first() {
                heralded += 1;
                assert!(ports.iter().all(|c| c == first));
                let f = o.fidelity.unwrap();
                assert!(f > 0.99, "fidelity {f}");
                let fixed = o.fixed_target_fidelity.unwrap();
                let parity = if *first == ChannelLabel::C { o.record.c_parity } else { o.record.d_parity };
                assert!((fixed - if parity == 0 { f } else { 1.0 - f }).abs() < 1e-9);
            }
        }
        assert!(heralded > 10);
    }

    #[test]
    fn statistics_are_reproducible() {
        let p = ModelParams::symmetric(1.0, 1.0, 0.1);
        let s = sched(1.0, 2.0);
        let a = herald_statistics(&p, &s, 8, 3).unwrap();
        let b = herald_statistics(&p, &s, 8, 3).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.n_traj, 8);
        assert_eq!(a.port_c.count + a.port_d.count, a.n_success);
    }
}
