use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use toml::{Spanned, Value};

use crate::error::{Error, Result};
use crate::model::{inas, DotDecoherence, ModelParams, NodeParams, UnitMode};
use crate::protocol::{ProtocolSchedule, TrionStart};

/// Named preset, one per CLI subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Fig2,
    Fig3,
    Fig4,
    Herald,
    Validate,
    Custom,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig2 => "fig2",
            Scenario::Fig3 => "fig3",
            Scenario::Fig4 => "fig4",
            Scenario::Herald => "herald",
            Scenario::Validate => "validate",
            Scenario::Custom => "custom",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Scenario::Fig2,
            Scenario::Fig3,
            Scenario::Fig4,
            Scenario::Herald,
            Scenario::Validate,
            Scenario::Custom,
        ]
        .into_iter()
        .find(|x| x.name() == s)
        .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

/// Which output files a run writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Csv,
    Json,
    Both,
}

impl Emit {
    pub fn csv(self) -> bool {
        matches!(self, Emit::Csv | Emit::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Emit::Json | Emit::Both)
    }
}

impl FromStr for Emit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Emit::Csv),
            "json" => Ok(Emit::Json),
            "both" => Ok(Emit::Both),
            _ => Err(format!("emit must be csv, json or both, got `{s}`")),
        }
    }
}

/// Swept values; an empty list means the scenario does not sweep it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    /// Drive lengths in units of `1/lambda_1`.
    pub lambda_t: Vec<f64>,
    /// Dot decoherence rates, applied to both nodes.
    pub gamma: Vec<f64>,
    /// Cavity rates, applied to both nodes.
    pub kappa: Vec<f64>,
}

/// Convergence gates: `dt` halving and Fock-cutoff doubling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateConfig {
    pub enabled: bool,
    /// Largest accepted `max|change| / max|observable|`.
    pub tolerance: f64,
    /// Length of the gated prefix of four-level runs.
    pub window: f64,
}

/// Four-level run settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrionConfig {
    pub start: TrionStart,
    /// End of the early window for the trion bound.
    pub early_until: f64,
}

/// Fully resolved run, in reduced units.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub params: ModelParams,
    pub schedule: ProtocolSchedule,
    pub n_traj: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub emit: Emit,
    pub sweep: Sweep,
    pub gates: GateConfig,
    pub trion: TrionConfig,
    /// Resolution report, one line per decision.
    #[serde(skip)]
    pub report: Vec<String>,
}

pub const DEFAULT_SEED: u64 = 20_100_601;
pub const DEFAULT_N_TRAJ: usize = 1000;
pub const FIG3_GAMMAS: [f64; 5] = [0.01, 0.05, 0.1, 0.5, 1.0];
pub const FIG3_LAMBDA_T: [f64; 6] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
pub const FIG2_KAPPAS: [f64; 4] = [0.1, 0.2, 0.5, 1.0];

impl RunConfig {
    /// Preset of `scenario` with default parameters.
    pub fn preset(scenario: Scenario) -> Result<RunConfig> {
        let params = preset_params(scenario);
        let schedule = preset_schedule(scenario, &params)?;
        let (sweep, n_traj) = match scenario {
            Scenario::Fig2 => (
                Sweep {
                    lambda_t: vec![],
                    gamma: vec![],
                    kappa: FIG2_KAPPAS.to_vec(),
                },
                0,
            ),
            Scenario::Fig3 => (
                Sweep {
                    lambda_t: FIG3_LAMBDA_T.to_vec(),
                    gamma: FIG3_GAMMAS.to_vec(),
                    kappa: vec![],
                },
                DEFAULT_N_TRAJ,
            ),
            Scenario::Fig4 | Scenario::Validate => (empty_sweep(), 0),
            Scenario::Herald => (empty_sweep(), DEFAULT_N_TRAJ),
            Scenario::Custom => (empty_sweep(), 200),
        };
        let early_until = 1.0 / params.nodes[0].kappa.max(f64::MIN_POSITIVE);
        Ok(RunConfig {
            scenario,
            params,
            schedule,
            n_traj,
            master_seed: DEFAULT_SEED,
            output_dir: PathBuf::from("results"),
            emit: Emit::Both,
            sweep,
            gates: GateConfig {
                enabled: true,
                tolerance: 1e-6,
                window: 5.0,
            },
            trion: TrionConfig {
                start: TrionStart::Dressed,
                early_until,
            },
            report: Vec::new(),
        })
    }

    /// Applies command-line overrides, which take precedence over the file.
    pub fn apply_cli(&mut self, seed: Option<u64>, out: Option<PathBuf>, n_traj: Option<usize>, emit: Option<Emit>) -> Result<()> {
        if let Some(s) = seed {
            self.master_seed = s;
            self.report.push(format!("run.seed = {s} (command line)"));
        }
        if let Some(o) = out {
            self.report.push(format!("run.output_dir = {} (command line)", o.display()));
            self.output_dir = o;
        }
        if let Some(n) = n_traj {
            if n == 0 {
                return Err(Error::Config {
                    line: 0,
                    message: "--n-traj must be >= 1".into(),
                });
            }
            self.n_traj = n;
            self.report.push(format!("run.n_traj = {n} (command line)"));
        }
        if let Some(e) = emit {
            self.emit = e;
            self.report.push(format!("run.emit = {e:?} (command line)"));
        }
        Ok(())
    }
}

fn empty_sweep() -> Sweep {
    Sweep {
        lambda_t: vec![],
        gamma: vec![],
        kappa: vec![],
    }
}

fn preset_params(scenario: Scenario) -> ModelParams {
    match scenario {
        Scenario::Fig2 => ModelParams::symmetric(1.0, 1.0, 0.0),
        Scenario::Fig4 => ModelParams::inas(1.0, 0.0),
        _ => ModelParams::symmetric(1.0, 1.0, 0.05),
    }
}

fn preset_schedule(scenario: Scenario, params: &ModelParams) -> Result<ProtocolSchedule> {
    match scenario {
        Scenario::Fig2 => Ok(ProtocolSchedule::new(3.0, 0.0, crate::protocol::DEFAULT_DT, 20)),
        Scenario::Fig4 => Ok(ProtocolSchedule::full_model(20.0)),
        Scenario::Herald | Scenario::Custom => ProtocolSchedule::for_params(params, 2.0),
        Scenario::Fig3 | Scenario::Validate => ProtocolSchedule::for_params(params, 3.0),
    }
}

/// One `section.key = value` entry of a config file.
struct Entry {
    section: String,
    key: String,
    value: Value,
    line: usize,
}

impl Entry {
    fn path(&self) -> String {
        format!("{}.{}", self.section, self.key)
    }

    fn err(&self, message: impl fmt::Display) -> Error {
        Error::Config {
            line: self.line,
            message: format!("{}: {message}", self.path()),
        }
    }

    fn float(&self) -> Result<f64> {
        match &self.value {
            Value::Float(x) => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            v => Err(self.err(format!("expected a number, got {}", v.type_str()))),
        }
    }

    fn nonneg(&self) -> Result<f64> {
        let x = self.float()?;
        if !x.is_finite() || x < 0.0 {
            return Err(self.err(format!("{} must be finite and >= 0, got {x}", self.key)));
        }
        Ok(x)
    }

    fn positive(&self) -> Result<f64> {
        let x = self.nonneg()?;
        if x == 0.0 {
            return Err(self.err(format!("{} must be > 0", self.key)));
        }
        Ok(x)
    }

    fn uint(&self) -> Result<u64> {
        match &self.value {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            v => Err(self.err(format!("expected a nonnegative integer, got {v}"))),
        }
    }

    fn string(&self) -> Result<&str> {
        self.value
            .as_str()
            .ok_or_else(|| self.err(format!("expected a string, got {}", self.value.type_str())))
    }

    fn boolean(&self) -> Result<bool> {
        self.value
            .as_bool()
            .ok_or_else(|| self.err(format!("expected true or false, got {}", self.value.type_str())))
    }

    fn list(&self) -> Result<Vec<f64>> {
        let items: Vec<Value> = match &self.value {
            Value::Array(a) => a.clone(),
            v => vec![v.clone()],
        };
        items
            .into_iter()
            .map(|v| match v {
                Value::Float(x) if x.is_finite() && x >= 0.0 => Ok(x),
                Value::Integer(i) if i >= 0 => Ok(i as f64),
                v => Err(self.err(format!("expected nonnegative numbers, got {v}"))),
            })
            .collect()
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn read_entries(text: &str) -> Result<Vec<Entry>> {
    type Doc = BTreeMap<String, BTreeMap<String, Spanned<Value>>>;
    let doc: Doc = toml::from_str(text).map_err(|e| Error::Config {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    let mut out: Vec<(usize, Entry)> = Vec::new();
    for (section, table) in doc {
        for (key, v) in table {
            let start = v.span().start;
            out.push((
                start,
                Entry {
                    section: section.clone(),
                    key,
                    line: line_of(text, start),
                    value: v.into_inner(),
                },
            ));
        }
    }
    out.sort_by_key(|(s, _)| *s);
    Ok(out.into_iter().map(|(_, e)| e).collect())
}

const ENERGY_KEYS: [&str; 7] = [
    "lambda",
    "omega_plus",
    "omega_minus",
    "g_plus",
    "g_minus",
    "delta_plus",
    "delta_minus",
];
const RATE_KEYS: [&str; 2] = ["kappa", "gamma"];

/// Splits `kappa_2` into (`kappa`, nodes [2]); an unsuffixed key names both
/// nodes. `g` stands for `g_plus` and `g_minus`.
fn node_key(key: &str) -> Option<(Vec<&'static str>, Vec<usize>)> {
    let (base, nodes) = match key.rsplit_once('_') {
        Some((b, "1")) => (b, vec![0]),
        Some((b, "2")) => (b, vec![1]),
        _ => (key, vec![0, 1]),
    };
    if base == "g" {
        return Some((vec!["g_plus", "g_minus"], nodes));
    }
    ENERGY_KEYS
        .iter()
        .chain(RATE_KEYS.iter())
        .find(|k| **k == base)
        .map(|k| (vec![*k], nodes))
}

fn field<'a>(n: &'a mut NodeParams, name: &str) -> &'a mut f64 {
    match name {
        "lambda" => &mut n.lambda,
        "kappa" => &mut n.kappa,
        "gamma" => &mut n.gamma,
        "omega_plus" => &mut n.omega_plus,
        "omega_minus" => &mut n.omega_minus,
        "g_plus" => &mut n.g_plus,
        "g_minus" => &mut n.g_minus,
        "delta_plus" => &mut n.delta_plus,
        "delta_minus" => &mut n.delta_minus,
        _ => unreachable!("field names come from ENERGY_KEYS and RATE_KEYS"),
    }
}

fn parse_unit_mode(e: &Entry) -> Result<UnitMode> {
    match e.string()? {
        "reduced" => Ok(UnitMode::Reduced),
        "physical-µeV" | "physical-ueV" | "physical" => Ok(UnitMode::PhysicalMicroEv),
        s => Err(e.err(format!("expected reduced or physical-µeV, got `{s}`"))),
    }
}

/// Energy unit of a physical-mode file: explicit, else `lambda_1`, else
/// `Omega+ g+ / Delta+` of node 1, else the InAs coupling.
fn energy_unit(entries: &[Entry]) -> Result<(f64, String)> {
    let find = |names: &[&str]| entries.iter().find(|e| e.section == "params" && names.contains(&e.key.as_str()));
    if let Some(e) = find(&["energy_unit_uev"]) {
        return Ok((e.positive()?, "params.energy_unit_uev".into()));
    }
    if let Some(e) = find(&["lambda_1", "lambda"]) {
        return Ok((e.positive()?, format!("{} (µeV)", e.path())));
    }
    if let (Some(o), Some(g), Some(d)) = (
        find(&["omega_plus_1", "omega_plus"]),
        find(&["g_plus_1", "g_plus", "g_1", "g"]),
        find(&["delta_plus_1", "delta_plus"]),
    ) {
        let d = d.positive()?;
        let unit = o.nonneg()? * g.nonneg()? / d;
        if unit > 0.0 {
            return Ok((unit, "Omega+ g+ / Delta+ of node 1".into()));
        }
    }
    Ok((inas::LAMBDA_UEV, "InAs default".into()))
}

/// Parses a config file onto the fig3 preset, or onto the preset named by
/// `run.scenario`.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_for(text, None)
}

/// Parses a config file onto the preset of `scenario`, which takes precedence
/// over any `run.scenario` in the file.
pub fn parse_config_for(text: &str, scenario: Option<Scenario>) -> Result<RunConfig> {
    let entries = read_entries(text)?;
    let mut report = Vec::new();
    let file_scenario = entries
        .iter()
        .find(|e| e.section == "run" && e.key == "scenario")
        .map(|e| e.string()?.parse::<Scenario>().map_err(|m| e.err(m)))
        .transpose()?;
    let scenario = match (scenario, file_scenario) {
        (Some(s), Some(f)) if s != f => {
            report.push(format!("scenario {s} (command line) overrides run.scenario = {f}"));
            s
        }
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => Scenario::Fig3,
    };
    report.push(format!("scenario {scenario}"));

    let mut params = preset_params(scenario);
    let mut lambda_given = [false, false];
    let mut kappa_given = false;
    let mode = entries
        .iter()
        .find(|e| e.section == "params" && e.key == "unit_mode")
        .map(parse_unit_mode)
        .transpose()?
        .unwrap_or(UnitMode::Reduced);
    if mode == UnitMode::PhysicalMicroEv {
        let (unit, source) = energy_unit(&entries)?;
        params.unit_mode = mode;
        params.energy_unit_uev = unit;
        report.push(format!("physical units: energies in µeV, rates in MHz; 1 reduced unit = {unit} µeV from {source}"));
    }
    let unit = params.energy_unit_uev;

    for e in entries.iter().filter(|e| e.section == "params") {
        match e.key.as_str() {
            "unit_mode" => {}
            "energy_unit_uev" => params.energy_unit_uev = e.positive()?,
            "dot_decoherence" => {
                params.dot_decoherence = match e.string()? {
                    "relaxation" => DotDecoherence::Relaxation,
                    "dephasing" => DotDecoherence::Dephasing,
                    s => return Err(e.err(format!("expected relaxation or dephasing, got `{s}`"))),
                };
                report.push(format!("line {}: dot decoherence {:?}", e.line, params.dot_decoherence));
            }
            "n_fock" => {
                let n = e.uint()? as usize;
                if n < 2 {
                    return Err(e.err("n_fock must be >= 2"));
                }
                params.n_fock = Some(n);
                report.push(format!("line {}: n_fock = {n}", e.line));
            }
            "gamma_t" => {
                let v = e.nonneg()?;
                params.gamma_t = if mode == UnitMode::PhysicalMicroEv { params.rate_from_mhz(v) } else { v };
                report.push(format!("line {}: gamma_t = {} reduced", e.line, params.gamma_t));
            }
            key => {
                let (names, nodes) = node_key(key).ok_or_else(|| e.err("unknown key"))?;
                let raw = e.nonneg()?;
                let value = match (mode, RATE_KEYS.contains(&names[0])) {
                    (UnitMode::Reduced, _) => raw,
                    (UnitMode::PhysicalMicroEv, true) => params.rate_from_mhz(raw),
                    (UnitMode::PhysicalMicroEv, false) => raw / unit,
                };
                for &i in &nodes {
                    for name in &names {
                        *field(&mut params.nodes[i], name) = value;
                    }
                    if names[0] == "lambda" {
                        lambda_given[i] = true;
                    }
                }
                kappa_given |= names[0] == "kappa";
                report.push(format!("line {}: {} = {value} reduced", e.line, e.path()));
            }
        }
    }
    for (i, node) in params.nodes.iter_mut().enumerate() {
        if lambda_given[i] {
            continue;
        }
        if let (Some(p), _) = node.branch_products() {
            node.lambda = p;
            report.push(format!(
                "lambda_{} = Omega+ g+ / Delta+ = {} µeV = {p} reduced",
                i + 1,
                p * params.energy_unit_uev
            ));
        }
    }
    params.validate().map_err(|e| Error::Config {
        line: 0,
        message: e.to_string(),
    })?;
    if params.nodes.iter().any(|n| n.delta_plus > 0.0 || n.delta_minus > 0.0) {
        for node in 1..=2 {
            report.extend(params.full_model_warnings(node)?.into_iter().map(|w| format!("warning: {w}")));
        }
    }

    let mut cfg = RunConfig::preset(scenario)?;
    cfg.schedule = if kappa_given || params != cfg.params {
        preset_schedule(scenario, &params)?
    } else {
        cfg.schedule
    };
    cfg.params = params;
    cfg.trion.early_until = 1.0 / cfg.params.nodes[0].kappa.max(f64::MIN_POSITIVE);
    let mut schedule_line = 0;
    for e in entries.iter().filter(|e| e.section != "params") {
        match (e.section.as_str(), e.key.as_str()) {
            ("run", "scenario") => {}
            ("run", "n_traj") => {
                cfg.n_traj = e.uint()? as usize;
                if cfg.n_traj == 0 {
                    return Err(e.err("n_traj must be >= 1"));
                }
            }
            ("run", "seed") => cfg.master_seed = e.uint()?,
            ("run", "output_dir") => cfg.output_dir = PathBuf::from(e.string()?),
            ("run", "emit") => cfg.emit = e.string()?.parse().map_err(|m| e.err(m))?,
            ("schedule", key) => {
                schedule_line = schedule_line.max(e.line);
                match key {
                    "t_drive" => cfg.schedule.t_drive = e.nonneg()?,
                    "t_ringdown" => cfg.schedule.t_ringdown = e.nonneg()?,
                    "dt" => cfg.schedule.dt = e.positive()?,
                    "record_stride" => {
                        cfg.schedule.record_stride = e.uint()? as usize;
                        if cfg.schedule.record_stride == 0 {
                            return Err(e.err("record_stride must be >= 1"));
                        }
                    }
                    _ => return Err(e.err("unknown key")),
                }
            }
            ("sweep", "lambda_t") => cfg.sweep.lambda_t = e.list()?,
            ("sweep", "gamma") => cfg.sweep.gamma = e.list()?,
            ("sweep", "kappa") => cfg.sweep.kappa = e.list()?,
            ("gates", "enabled") => cfg.gates.enabled = e.boolean()?,
            ("gates", "tolerance") => cfg.gates.tolerance = e.positive()?,
            ("gates", "window") => cfg.gates.window = e.positive()?,
            ("fig4", "start") => {
                cfg.trion.start = match e.string()? {
                    "dressed" => TrionStart::Dressed,
                    "bare" => TrionStart::Bare,
                    s => return Err(e.err(format!("expected dressed or bare, got `{s}`"))),
                }
            }
            ("fig4", "early_until") => cfg.trion.early_until = e.positive()?,
            _ => return Err(e.err("unknown key")),
        }
        report.push(format!("line {}: {} = {}", e.line, e.path(), e.value));
    }
    cfg.schedule.validate().map_err(|e| Error::Config {
        line: schedule_line,
        message: e.to_string(),
    })?;
    report.push(format!(
        "schedule: t_drive = {}, t_ringdown = {}, dt = {}, record every {}",
        cfg.schedule.t_drive,
        cfg.schedule.t_ringdown,
        cfg.schedule.dt,
        cfg.schedule.record_every()
    ));
    cfg.report = report;
    Ok(cfg)
}
