use serde_json::json;

use crate::error::{Error, Result};
use crate::model::{branch_emission_analytic, ModelParams};
use crate::protocol::{
    fit_trion_loss, herald_statistics, mean_detected_photons, trion_admixture_bound, trion_population,
    trion_rate_estimates, HeraldStatistics,
};

use super::config::{RunConfig, Scenario};
use super::gates::{check_integrity, effective_gates, require_pass, trion_gates};
use super::output::{Cell, Check, ScenarioOutput, Table};
use super::validate::validate_suite;

/// Progress sink for long runs.
pub type Log<'a> = &'a (dyn Fn(&str) + Sync);

/// Column label of a swept value: `1.0`, `0.05`.
pub fn value_label(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.1}")
    } else {
        format!("{x}")
    }
}

/// Runs the scenario of `cfg` without progress output.
pub fn run_scenario(cfg: &RunConfig) -> Result<ScenarioOutput> {
    run_scenario_with(cfg, &|_| {})
}

/// Runs the scenario of `cfg`, reporting progress through `log`.
pub fn run_scenario_with(cfg: &RunConfig, log: Log) -> Result<ScenarioOutput> {
    match cfg.scenario {
        Scenario::Fig2 => fig2(cfg, log),
        Scenario::Fig3 => fig3(cfg, log),
        Scenario::Fig4 => fig4(cfg, log),
        Scenario::Herald => herald(cfg, log),
        Scenario::Validate => validate_suite(cfg, log),
        Scenario::Custom => custom(cfg, log),
    }
}

fn nonempty<'a>(v: &'a [f64], key: &str) -> Result<&'a [f64]> {
    if v.is_empty() {
        return Err(Error::Config {
            line: 0,
            message: format!("{key} must list at least one value"),
        });
    }
    Ok(v)
}

fn with_kappa(params: &ModelParams, kappa: f64) -> ModelParams {
    let mut p = params.clone();
    for n in p.nodes.iter_mut() {
        n.kappa = kappa;
    }
    p
}

fn with_gamma(params: &ModelParams, gamma: f64) -> ModelParams {
    let mut p = params.clone();
    for n in p.nodes.iter_mut() {
        n.gamma = gamma;
    }
    p
}

fn fig2(cfg: &RunConfig, log: Log) -> Result<ScenarioOutput> {
    let kappas = nonempty(&cfg.sweep.kappa, "sweep.kappa")?;
    let mut gates = Vec::new();
    let mut runs = Vec::new();
    for &k in kappas {
        let p = with_kappa(&cfg.params, k);
        let label = format!("fig2 kappa {}", value_label(k));
        log(&format!("{label}: master equation"));
        let s = mean_detected_photons(&p, &cfg.schedule)?;
        check_integrity(&s, &label)?;
        if cfg.gates.enabled {
            gates.extend(effective_gates(&p, &cfg.schedule, cfg.gates.tolerance, &label)?);
        }
        runs.push(s);
    }
    require_pass(&gates)?;
    let [n1, n2] = &cfg.params.nodes;
    let mut header = vec!["lambda_t".to_string()];
    header.extend(kappas.iter().map(|k| format!("N_kappa_{}", value_label(*k))));
    header.extend(kappas.iter().map(|k| format!("N_closed_kappa_{}", value_label(*k))));
    let mut table = Table::new("fig2", header);
    let t = runs[0].t().to_vec();
    let lt = runs[0].require("lambda_t")?.to_vec();
    for (i, &ti) in t.iter().enumerate() {
        let mut row = vec![Cell::Num(lt[i])];
        for r in &runs {
            row.push(Cell::Num(r.require("N")?[i]));
        }
        for &k in kappas {
            let closed = 0.5 * (branch_emission_analytic(n1.lambda, k, ti) + branch_emission_analytic(n2.lambda, k, ti));
            row.push(Cell::Num(closed));
        }
        table.push_row(row)?;
    }
    let finals: Vec<_> = kappas
        .iter()
        .zip(&runs)
        .map(|(&k, r)| {
            let n = r.last("N")?;
            let t = cfg.schedule.t_total();
            let closed = 0.5 * (branch_emission_analytic(n1.lambda, k, t) + branch_emission_analytic(n2.lambda, k, t));
            Ok(json!({"kappa": k, "N": n, "closed_form": closed, "relative_error": (n - closed) / closed}))
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<(f64, f64)> = kappas
        .iter()
        .zip(&runs)
        .map(|(&k, r)| Ok((k, r.last("N")?)))
        .collect::<Result<_>>()?;
    order.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut out = ScenarioOutput::new(
        vec![table],
        json!({
            "final": finals,
            "bottom_to_top_kappa": order.iter().map(|o| o.0).collect::<Vec<_>>(),
        }),
    );
    out.gates = gates;
    Ok(out)
}

/// Drive lengths for `lambda_t` values, checked against the step grid.
fn drive_lengths(cfg: &RunConfig, lambda_t: &[f64]) -> Result<Vec<f64>> {
    let lambda = cfg.params.nodes[0].lambda;
    if lambda <= 0.0 {
        return Err(Error::Config {
            line: 0,
            message: "sweep.lambda_t needs lambda_1 > 0".into(),
        });
    }
    lambda_t
        .iter()
        .map(|lt| {
            let t = lt / lambda;
            let steps = (t / cfg.schedule.dt).round();
            if (steps * cfg.schedule.dt - t).abs() > 1e-9 * t.max(1.0) {
                return Err(Error::Config {
                    line: 0,
                    message: format!("drive length {t} for lambda_t = {lt} is not a multiple of dt = {}", cfg.schedule.dt),
                });
            }
            Ok(steps * cfg.schedule.dt)
        })
        .collect()
}

fn fig3(cfg: &RunConfig, log: Log) -> Result<ScenarioOutput> {
    let gammas = nonempty(&cfg.sweep.gamma, "sweep.gamma")?;
    let lambda_t = nonempty(&cfg.sweep.lambda_t, "sweep.lambda_t")?;
    let drives = drive_lengths(cfg, lambda_t)?;
    let t_max = drives.iter().copied().fold(0.0, f64::max);
    let mut gates = Vec::new();
    if cfg.gates.enabled {
        for &g in gammas {
            let p = with_gamma(&cfg.params, g);
            log(&format!("fig3 gates at gamma {}", value_label(g)));
            gates.extend(effective_gates(
                &p,
                &cfg.schedule.with_drive(t_max),
                cfg.gates.tolerance,
                &format!("fig3 gamma {}", value_label(g)),
            )?);
        }
        require_pass(&gates)?;
    }
    let mut stats: Vec<Vec<HeraldStatistics>> = Vec::new();
    for &g in gammas {
        let p = with_gamma(&cfg.params, g);
        let mut row = Vec::new();
        for (&t, &lt) in drives.iter().zip(lambda_t) {
            log(&format!("fig3 gamma {} lambda_T {}: {} trajectories", value_label(g), value_label(lt), cfg.n_traj));
            let mut st = herald_statistics(&p, &cfg.schedule.with_drive(t), cfg.n_traj, cfg.master_seed)?;
            st.rows.clear();
            row.push(st);
        }
        stats.push(row);
    }
    let labels: Vec<String> = gammas.iter().map(|g| value_label(*g)).collect();
    let mut header = vec!["lambda_T".to_string()];
    for prefix in ["F_mean", "F_stderr", "success", "success_stderr"] {
        header.extend(labels.iter().map(|l| format!("{prefix}_Γ{l}")));
    }
    let mut table = Table::new("fig3", header);
    for (k, &lt) in lambda_t.iter().enumerate() {
        let mut row = vec![Cell::Num(lt)];
        row.extend(stats.iter().map(|s| Cell::opt(s[k].pooled.mean)));
        row.extend(stats.iter().map(|s| Cell::opt(s[k].pooled.stderr)));
        row.extend(stats.iter().map(|s| Cell::Num(s[k].success_probability)));
        row.extend(stats.iter().map(|s| Cell::Num(s[k].success_stderr)));
        table.push_row(row)?;
    }
    for l in &labels {
        let reason = "no heralded trajectory at this drive length";
        table = table
            .with_gap_reason(&format!("F_mean_Γ{l}"), reason)
            .with_gap_reason(&format!("F_stderr_Γ{l}"), reason);
    }
    let plateaus: Vec<_> = gammas
        .iter()
        .zip(&stats)
        .map(|(&g, s)| {
            let best = s
                .iter()
                .zip(lambda_t)
                .filter_map(|(st, &lt)| st.pooled.mean.map(|m| (m, st.pooled.stderr.unwrap_or(0.0), lt)))
                .max_by(|a, b| a.0.total_cmp(&b.0));
            json!({
                "gamma": g,
                "plateau_F": best.map(|b| b.0),
                "plateau_stderr": best.map(|b| b.1),
                "plateau_lambda_T": best.map(|b| b.2),
            })
        })
        .collect();
    let mut out = ScenarioOutput::new(vec![table], json!({ "n_traj": cfg.n_traj, "plateaus": plateaus }));
    out.gates = gates;
    Ok(out)
}

fn fig4(cfg: &RunConfig, log: Log) -> Result<ScenarioOutput> {
    let p = &cfg.params;
    let mut warnings = p.full_model_warnings(1)?;
    let mut gates = Vec::new();
    if cfg.gates.enabled {
        log(&format!("fig4 gates on the first {} time units", cfg.gates.window));
        gates = trion_gates(p, &cfg.schedule, cfg.trion.start, cfg.gates.window, cfg.gates.tolerance)?;
        require_pass(&gates)?;
    }
    log("fig4: four-level master equation");
    let series = trion_population(p, &cfg.schedule, cfg.trion.start)?;
    check_integrity(&series, "fig4")?;
    let fit = fit_trion_loss(p, &series, cfg.trion.early_until)?;
    let (plus, minus) = trion_rate_estimates(p)?;
    let table = Table::from_series(
        "fig4",
        &series,
        &["t_ns", "P_trion", "P_T_plus", "P_T_minus", "P_X_minus", "P_X_plus", "n_cav", "survival", "lambda_t"],
    )?;
    if fit.p_trion_early_max > trion_admixture_bound(&p.nodes[0]) {
        warnings.push(format!(
            "early trion population {:.4} exceeds the perturbative bound {:.4}",
            fit.p_trion_early_max,
            trion_admixture_bound(&p.nodes[0])
        ));
    }
    let mut out = ScenarioOutput::new(
        vec![table],
        json!({
            "start": cfg.trion.start,
            "fit": fit,
            "admixture_bound": trion_admixture_bound(&p.nodes[0]),
            "rate_estimates_mhz": {"plus": p.rate_to_mhz(plus), "minus": p.rate_to_mhz(minus)},
            "time_unit_ns": p.time_unit_s() * 1e9,
        }),
    );
    out.gates = gates;
    out.warnings = warnings;
    Ok(out)
}

/// Per-trajectory table of a herald run.
pub fn herald_table(name: &str, stats: &HeraldStatistics) -> Result<Table> {
    let header = [
        "index",
        "seed",
        "port",
        "first_click_t",
        "c_clicks",
        "d_clicks",
        "other_jumps",
        "c_parity",
        "d_parity",
        "fidelity",
        "fixed_target_fidelity",
    ];
    let mut t = Table::new(name, header.iter().map(|s| s.to_string()).collect());
    for r in &stats.rows {
        t.push_row(vec![
            Cell::Int(r.index as u64),
            Cell::Int(r.seed),
            Cell::Text(r.port.to_string()),
            Cell::opt(r.first_click_t),
            Cell::Int(r.c_clicks as u64),
            Cell::Int(r.d_clicks as u64),
            Cell::Int(r.other_jumps as u64),
            Cell::Int(r.c_parity as u64),
            Cell::Int(r.d_parity as u64),
            Cell::opt(r.fidelity),
            Cell::opt(r.fixed_target_fidelity),
        ])?;
    }
    let reason = "no detector click, nothing heralded";
    Ok(t.with_gap_reason("first_click_t", reason)
        .with_gap_reason("fidelity", reason)
        .with_gap_reason("fixed_target_fidelity", reason))
}

fn herald_summary(stats: &HeraldStatistics) -> serde_json::Value {
    json!({
        "n_traj": stats.n_traj,
        "n_success": stats.n_success,
        "success_probability": stats.success_probability,
        "success_stderr": stats.success_stderr,
        "pooled": stats.pooled,
        "port_c": stats.port_c,
        "port_d": stats.port_d,
        "fixed_target": stats.fixed_target,
    })
}

fn herald(cfg: &RunConfig, log: Log) -> Result<ScenarioOutput> {
    let mut gates = Vec::new();
    if cfg.gates.enabled {
        log("herald gates");
        gates = effective_gates(&cfg.params, &cfg.schedule, cfg.gates.tolerance, "herald")?;
        require_pass(&gates)?;
    }
    log(&format!("herald: {} trajectories", cfg.n_traj));
    let stats = herald_statistics(&cfg.params, &cfg.schedule, cfg.n_traj, cfg.master_seed)?;
    let mut out = ScenarioOutput::new(vec![herald_table("herald", &stats)?], herald_summary(&stats));
    out.gates = gates;
    Ok(out)
}

fn custom(cfg: &RunConfig, log: Log) -> Result<ScenarioOutput> {
    let mut gates = Vec::new();
    if cfg.gates.enabled {
        log("custom gates");
        gates = effective_gates(&cfg.params, &cfg.schedule, cfg.gates.tolerance, "custom")?;
        require_pass(&gates)?;
    }
    log("custom: master equation");
    let photons = mean_detected_photons(&cfg.params, &cfg.schedule)?;
    check_integrity(&photons, "custom")?;
    let mut tables = vec![Table::from_series(
        "custom_photons",
        &photons,
        &["t", "lambda_t", "N", "N_total", "N_1", "N_2"],
    )?];
    log(&format!("custom: {} trajectories", cfg.n_traj));
    let stats = herald_statistics(&cfg.params, &cfg.schedule, cfg.n_traj, cfg.master_seed)?;
    tables.push(herald_table("custom_herald", &stats)?);
    let mut out = ScenarioOutput::new(
        tables,
        json!({
            "N_final": photons.last("N")?,
            "herald": herald_summary(&stats),
        }),
    );
    out.gates = gates;
    Ok(out)
}

/// Pass/fail lines of gates and checks.
pub fn check_lines(checks: &[Check]) -> Vec<String> {
    checks.iter().map(Check::line).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config_for;

    #[test]
    fn labels_keep_one_decimal() {
        assert_eq!(value_label(1.0), "1.0");
        assert_eq!(value_label(0.05), "0.05");
        assert_eq!(value_label(0.1), "0.1");
    }

    #[test]
    fn small_fig2_run() {
        let cfg = parse_config_for(
            "sweep.kappa = [0.5, 1.0]\nschedule.t_drive = 1.0\nschedule.record_stride = 100",
            Some(Scenario::Fig2),
        )
        .unwrap();
        let out = run_scenario(&cfg).unwrap();
        let t = out.table("fig2").unwrap();
        assert_eq!(t.header, ["lambda_t", "N_kappa_0.5", "N_kappa_1.0", "N_closed_kappa_0.5", "N_closed_kappa_1.0"]);
        let n = t.numbers("N_kappa_1.0").unwrap();
        let c = t.numbers("N_closed_kappa_1.0").unwrap();
        assert!((n.last().unwrap() - c.last().unwrap()).abs() < 1e-6);
        assert_eq!(out.gates.len(), 8);
        assert!(out.gates.iter().all(|g| g.pass));
    }

    #[test]
    fn small_fig3_run_has_declared_columns() {
        let cfg = parse_config_for(
            "sweep.lambda_t = [0.5, 1.0]\nsweep.gamma = [0.1]\nrun.n_traj = 4\nschedule.t_ringdown = 2.0\ngates.enabled = false",
            Some(Scenario::Fig3),
        )
        .unwrap();
        let out = run_scenario(&cfg).unwrap();
        let t = out.table("fig3").unwrap();
        assert_eq!(t.header, ["lambda_T", "F_mean_Γ0.1", "F_stderr_Γ0.1", "success_Γ0.1", "success_stderr_Γ0.1"]);
        assert_eq!(t.rows.len(), 2);
    }

    #[test]
    fn off_grid_drive_is_a_config_error() {
        let cfg = parse_config_for("sweep.lambda_t = [0.0001]\ngates.enabled = false", Some(Scenario::Fig3)).unwrap();
        assert_eq!(run_scenario(&cfg).unwrap_err().exit_code(), 2);
    }
}
