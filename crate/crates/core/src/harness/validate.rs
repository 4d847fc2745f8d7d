use nalgebra::DVector;
use serde_json::json;

use crate::dynamics::{mcwf_trajectory, propagate_master, IntegrationOptions, Observables};
use crate::error::Result;
use crate::model::{
    branch_amplitude_analytic, branch_emission_analytic, dot_projector, fock_vector, inas, lambda_from_physical,
    level_state, single_node_layout, y_state, DotLevel, LindbladModel, ModelParams,
};
use crate::protocol::{
    dot_coherence_analytic, herald_statistics, mean_detected_photons, trion_admixture_bound, trion_population,
    unconditional_states, unravelling_distance, HeraldExperiment, ProtocolSchedule, TrionStart,
};
use crate::qcore::{coherent_state, embed, expectation, C64};

use super::config::{parse_config_for, RunConfig, Scenario};
use super::gates::{effective_gates, TRACE_TOLERANCE};
use super::output::{Cell, Check, ScenarioOutput, Table};
use super::scenarios::{value_label, Log};
use crate::dynamics::{HERMITICITY_TOLERANCE, POSITIVITY_TOLERANCE};

/// `(|y+>|alpha_+> + |y->|alpha_->)/sqrt 2` for one closed node.
pub fn closed_node_state(lambda: f64, t: f64, n_fock: usize) -> Result<DVector<C64>> {
    let mut v = DVector::zeros(2 * n_fock);
    for s in [1i8, -1] {
        let field = coherent_state(branch_amplitude_analytic(lambda, 0.0, t, s), n_fock)?;
        v += y_state(s, 2)?.kronecker(field.state.amplitudes()) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    }
    Ok(v)
}

/// Lowest overlap of master-equation and trajectory states with the
/// closed-form state of one node, `kappa = Gamma = 0`, up to `lambda t = t_max`.
pub fn closed_system_overlaps(n_fock: usize, t_max: f64) -> Result<(f64, f64)> {
    let p = ModelParams::symmetric(1.0, 0.0, 0.0);
    let model = LindbladModel::single_node(&p, 1, n_fock)?;
    let psi0 = crate::qcore::StateVector::from_amplitudes(
        single_node_layout(1, 2, n_fock),
        level_state(DotLevel::XMinus, 2)?.kronecker(&fock_vector(0, n_fock)),
    )?;
    let opts = IntegrationOptions::new(0.0025, t_max, 40);
    let obs = Observables::default().with_snapshots();
    let me = propagate_master(&model, &psi0.to_density(), &opts, &obs)?;
    let traj = mcwf_trajectory(&model, &psi0, &opts, 0, &obs)?;
    let (mut worst_me, mut worst_traj) = (1.0f64, 1.0f64);
    for ((t, rho), psi) in me.series.t().iter().zip(&me.snapshots).zip(&traj.snapshots) {
        let v = closed_node_state(1.0, *t, n_fock)?;
        worst_me = worst_me.min(v.dotc(&(rho.entries() * &v)).re);
        worst_traj = worst_traj.min(v.dotc(psi).norm_sqr());
    }
    Ok((worst_me, worst_traj))
}

/// The invariant suite. Every check is expected to pass.
pub fn validate_suite(cfg: &RunConfig, log: Log) -> Result<ScenarioOutput> {
    let seed = cfg.master_seed;
    let mut checks = Vec::new();

    log("validate: coupling from the InAs inputs");
    let plus = lambda_from_physical(inas::OMEGA_PLUS_UEV, inas::G_UEV, inas::DELTA_PLUS_UEV)?;
    let minus = lambda_from_physical(inas::OMEGA_MINUS_UEV, inas::G_UEV, inas::DELTA_MINUS_UEV)?;
    checks.push(Check::new("branch products differ (µeV)", (plus.micro_ev - minus.micro_ev).abs(), "<", 1e-9));
    checks.push(Check::new(
        "lambda/2pi relative to 2.2 GHz",
        (plus.cyclic_ghz() - 2.2).abs() / 2.2,
        "<",
        0.02,
    ));
    let phys = parse_config_for(
        "params.unit_mode = \"physical-µeV\"\nparams.omega_plus = 41.4\nparams.omega_minus = 46.0\nparams.g = 90.0\nparams.delta_plus = 414.0\nparams.delta_minus = 460.0",
        Some(Scenario::Custom),
    )?;
    checks.push(Check::new(
        "physical config resolves lambda_1 to 1 reduced",
        (phys.params.nodes[0].lambda - 1.0).abs(),
        "<",
        1e-12,
    ));

    log("validate: closed-system oracle");
    let (me, traj) = closed_system_overlaps(36, 2.0)?;
    checks.push(Check::new("closed system, master-equation overlap", me, ">", 1.0 - 1e-6));
    checks.push(Check::new("closed system, trajectory overlap", traj, ">", 1.0 - 1e-6));

    log("validate: master-equation integrity and gates");
    let p = ModelParams::symmetric(1.0, 1.0, 0.05);
    let sched = ProtocolSchedule::for_params(&p, 3.0)?;
    let s = mean_detected_photons(&p, &sched)?;
    let fold = |name: &str, f: fn(f64, f64) -> f64, init: f64| -> Result<f64> {
        Ok(s.require(name)?.iter().copied().fold(init, f))
    };
    checks.push(Check::new("trace error", fold("trace_err", f64::max, 0.0)?, "<", TRACE_TOLERANCE));
    checks.push(Check::new("Hermiticity defect", fold("herm_defect", f64::max, 0.0)?, "<", HERMITICITY_TOLERANCE));
    checks.push(Check::new("minimum eigenvalue", fold("min_eig", f64::min, 0.0)?, ">=", -POSITIVITY_TOLERANCE));
    checks.extend(effective_gates(&p, &sched, 1e-6, "gate")?);

    log("validate: dot coherence");
    let p0 = ModelParams::symmetric(1.0, 1.0, 0.0);
    let (t, states) = unconditional_states(&p0, &ProtocolSchedule::new(2.0, 0.0, 0.0025, 40))?;
    let op = embed(&dot_projector(DotLevel::XMinus, 2)?, "dot1", states[0].layout())?;
    let mut worst = 0.0f64;
    for (t, rho) in t.iter().zip(&states) {
        let pm = expectation(&op, rho)?.re;
        worst = worst.max((pm - 0.5 * (1.0 + dot_coherence_analytic(1.0, 1.0, *t))).abs());
    }
    checks.push(Check::new("dot coherence vs closed form", worst, "<", 1e-6));

    log("validate: photon counts");
    let mut finals = Vec::new();
    for k in [0.1, 0.2, 0.5, 1.0] {
        let pk = ModelParams::symmetric(1.0, k, 0.0);
        let n = mean_detected_photons(&pk, &ProtocolSchedule::new(3.0, 0.0, 0.0025, 100))?.last("N")?;
        let exact = branch_emission_analytic(1.0, k, 3.0);
        checks.push(Check::new(format!("N(3) at kappa {} vs closed form", value_label(k)), (n - exact).abs() / exact, "<", 1e-6));
        finals.push(n);
    }
    checks.push(Check::flag("N(3) increases with kappa", finals.windows(2).all(|w| w[0] < w[1])));

    log("validate: perfect heralding");
    let mut ph = ModelParams::symmetric(1.0, 1.0, 0.0);
    ph.n_fock = Some(14);
    let st = herald_statistics(&ph, &ProtocolSchedule::new(1.5, 20.0, 0.0025, 400), 24, seed)?;
    let min_f = st.rows.iter().filter_map(|r| r.fidelity).fold(1.0, f64::min);
    checks.push(Check::new("heralded fidelity at Gamma = 0, worst", min_f, ">", 1.0 - 1e-6));
    checks.push(Check::new("heralded trajectories", st.n_success as f64, ">=", 12.0));

    log("validate: unravelling");
    let mut pu = ModelParams::symmetric(1.0, 1.0, 0.05);
    pu.n_fock = Some(10);
    let n_u = 200;
    let d = unravelling_distance(&pu, &ProtocolSchedule::new(1.0, 1.0, 0.0025, 200), n_u, seed)?;
    let worst = d.require("trace_distance")?.iter().copied().fold(0.0, f64::max);
    checks.push(Check::new("trajectory ensemble vs master equation", worst, "<", 5.0 / (n_u as f64).sqrt()));

    log("validate: node exchange");
    let mut pa = ModelParams::symmetric(1.0, 1.0, 0.1);
    pa.nodes[1].lambda = 0.8;
    pa.nodes[1].kappa = 0.6;
    pa.n_fock = Some(10);
    let sa = ProtocolSchedule::new(1.0, 4.0, 0.0025, 40);
    let a = mean_detected_photons(&pa, &sa)?;
    let b = mean_detected_photons(&pa.swapped(), &sa)?;
    let dn = a
        .require("N")?
        .iter()
        .zip(b.require("N")?)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    checks.push(Check::new("N(t) change under node exchange", dn, "<", 1e-12));
    let ha = herald_statistics(&pa, &sa, 40, seed)?;
    let hb = herald_statistics(&pa.swapped(), &sa, 40, seed)?;
    let tol = 3.0 * (ha.success_stderr.powi(2) + hb.success_stderr.powi(2)).sqrt();
    checks.push(Check::new(
        "success probability change under node exchange",
        (ha.success_probability - hb.success_probability).abs(),
        "<=",
        tol.max(1e-12),
    ));

    log("validate: reproducibility");
    let exp = HeraldExperiment::new(&pa, &sa)?;
    let again = herald_statistics(&pa, &sa, 40, seed)?;
    checks.push(Check::flag("identical seeds give identical ensembles", again.rows == ha.rows));
    checks.push(Check::flag(
        "trajectory replay matches the ensemble",
        exp.run(ha.rows[7].seed)?.record.clicks.len() == ha.rows[7].c_clicks + ha.rows[7].d_clicks + ha.rows[7].other_jumps,
    ));

    log("validate: four-level node, early trion population");
    let mut pf = ModelParams::inas(1.0, 0.0);
    pf.n_fock = Some(6);
    let tp = trion_population(&pf, &ProtocolSchedule::new(1.0, 0.0, 0.0005, 200), TrionStart::Dressed)?;
    let pt = tp.require("P_trion")?.iter().copied().fold(0.0, f64::max);
    checks.push(Check::new("early trion population", pt, "<=", trion_admixture_bound(&pf.nodes[0])));

    let mut table = Table::new(
        "validate",
        ["check", "value", "comparison", "threshold", "pass"].iter().map(|s| s.to_string()).collect(),
    );
    for c in &checks {
        table.push_row(vec![
            Cell::Text(c.name.clone()),
            Cell::Num(c.value),
            Cell::Text(c.comparison.clone()),
            Cell::Num(c.threshold),
            Cell::Text(c.pass.to_string()),
        ])?;
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    let mut out = ScenarioOutput::new(vec![table], json!({"checks": checks.len(), "passed": passed}));
    out.checks = checks;
    Ok(out)
}
