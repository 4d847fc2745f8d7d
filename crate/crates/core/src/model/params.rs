use serde::Serialize;

use crate::error::{Error, Result};

/// Reduced Planck constant in eV·s.
pub const HBAR_EV_S: f64 = 6.582119569e-16;

/// How parameter values were supplied. Internally every quantity is held in
/// reduced units where node 1's coupling `lambda` sets the energy scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UnitMode {
    Reduced,
    PhysicalMicroEv,
}

/// Form of the dot decoherence channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DotDecoherence {
    /// `|X-><X+|`
    Relaxation,
    /// `|X+><X+| - |X-><X-|`
    Dephasing,
}

/// Parameters of one dot–cavity node, in reduced units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeParams {
    pub lambda: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub g_plus: f64,
    pub g_minus: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
}

impl NodeParams {
    /// Effective-model node with couplings to the trion levels unset.
    pub fn effective(lambda: f64, kappa: f64, gamma: f64) -> Self {
        NodeParams {
            lambda,
            kappa,
            gamma,
            omega_plus: 0.0,
            omega_minus: 0.0,
            g_plus: 0.0,
            g_minus: 0.0,
            delta_plus: 0.0,
            delta_minus: 0.0,
        }
    }

    /// `(Omega+ g+ / Delta+, Omega- g- / Delta-)`; a branch with zero detuning
    /// reports `None`.
    pub fn branch_products(&self) -> (Option<f64>, Option<f64>) {
        let prod = |o: f64, g: f64, d: f64| (d > 0.0).then(|| o * g / d);
        (
            prod(self.omega_plus, self.g_plus, self.delta_plus),
            prod(self.omega_minus, self.g_minus, self.delta_minus),
        )
    }

    /// `max(Omega, g) / min(Delta)`, the small parameter of the elimination.
    pub fn validity_ratio(&self) -> f64 {
        let num = self
            .omega_plus
            .max(self.omega_minus)
            .max(self.g_plus)
            .max(self.g_minus);
        num / self.delta_plus.min(self.delta_minus)
    }
}

/// Complete parameter record for the effective and full models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    pub nodes: [NodeParams; 2],
    pub gamma_t: f64,
    pub n_fock: Option<usize>,
    pub unit_mode: UnitMode,
    pub dot_decoherence: DotDecoherence,
    /// Energy of one reduced unit in µeV; fixes the physical time unit.
    pub energy_unit_uev: f64,
}

/// The laser, cavity and detuning values of the InAs-dot parameter set, in µeV.
pub mod inas {
    pub const OMEGA_PLUS_UEV: f64 = 41.4;
    pub const OMEGA_MINUS_UEV: f64 = 46.0;
    pub const G_UEV: f64 = 90.0;
    pub const DELTA_PLUS_UEV: f64 = 414.0;
    pub const DELTA_MINUS_UEV: f64 = 460.0;
    /// Trion decay rate `Gamma_T / 2pi` in MHz.
    pub const GAMMA_T_MHZ: f64 = 130.0;
    /// Coupling `lambda` in µeV.
    pub const LAMBDA_UEV: f64 = OMEGA_PLUS_UEV * G_UEV / DELTA_PLUS_UEV;
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams::symmetric(1.0, 1.0, 0.05)
    }
}

impl ModelParams {
    /// Two identical effective-model nodes.
    pub fn symmetric(lambda: f64, kappa: f64, gamma: f64) -> Self {
        let node = NodeParams::effective(lambda, kappa, gamma);
        ModelParams {
            nodes: [node.clone(), node],
            gamma_t: 0.0,
            n_fock: None,
            unit_mode: UnitMode::Reduced,
            dot_decoherence: DotDecoherence::Relaxation,
            energy_unit_uev: inas::LAMBDA_UEV,
        }
    }

    /// InAs-dot parameter set, converted to reduced units, with the given
    /// cavity and dot rates (already reduced).
    pub fn inas(kappa: f64, gamma: f64) -> Self {
        let e = inas::LAMBDA_UEV;
        let node = NodeParams {
            lambda: 1.0,
            kappa,
            gamma,
            omega_plus: inas::OMEGA_PLUS_UEV / e,
            omega_minus: inas::OMEGA_MINUS_UEV / e,
            g_plus: inas::G_UEV / e,
            g_minus: inas::G_UEV / e,
            delta_plus: inas::DELTA_PLUS_UEV / e,
            delta_minus: inas::DELTA_MINUS_UEV / e,
        };
        let mut p = ModelParams {
            nodes: [node.clone(), node],
            gamma_t: 0.0,
            n_fock: None,
            unit_mode: UnitMode::PhysicalMicroEv,
            dot_decoherence: DotDecoherence::Relaxation,
            energy_unit_uev: e,
        };
        p.gamma_t = p.rate_from_mhz(inas::GAMMA_T_MHZ);
        p
    }

    pub fn node(&self, i: usize) -> Result<&NodeParams> {
        match i {
            1 | 2 => Ok(&self.nodes[i - 1]),
            _ => Err(Error::InvalidParam(format!("node index {i} is not 1 or 2"))),
        }
    }

    /// Seconds per reduced time unit, `hbar / E_unit`.
    pub fn time_unit_s(&self) -> f64 {
        HBAR_EV_S / (self.energy_unit_uev * 1e-6)
    }

    /// Reduced rate for a cyclic frequency `2pi x f` with `f` in MHz.
    pub fn rate_from_mhz(&self, f_mhz: f64) -> f64 {
        std::f64::consts::TAU * f_mhz * 1e6 * self.time_unit_s()
    }

    /// Cyclic frequency in MHz (`rate / 2pi`) for a reduced rate.
    pub fn rate_to_mhz(&self, rate: f64) -> f64 {
        rate / (std::f64::consts::TAU * 1e6 * self.time_unit_s())
    }

    /// Node labels whose cavities are swapped: 1 <-> 2.
    pub fn swapped(&self) -> Self {
        let mut p = self.clone();
        p.nodes.swap(0, 1);
        p
    }

    /// Checks the hard invariants: rates nonnegative and finite.
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if !v.is_finite() || v < 0.0 {
                Err(Error::InvalidParam(format!("{name} must be finite and >= 0, got {v}")))
            } else {
                Ok(())
            }
        };
        for (i, n) in self.nodes.iter().enumerate() {
            let i = i + 1;
            check(&format!("lambda_{i}"), n.lambda)?;
            check(&format!("kappa_{i}"), n.kappa)?;
            check(&format!("gamma_{i}"), n.gamma)?;
            check(&format!("omega_plus_{i}"), n.omega_plus)?;
            check(&format!("omega_minus_{i}"), n.omega_minus)?;
            check(&format!("g_plus_{i}"), n.g_plus)?;
            check(&format!("g_minus_{i}"), n.g_minus)?;
            check(&format!("delta_plus_{i}"), n.delta_plus)?;
            check(&format!("delta_minus_{i}"), n.delta_minus)?;
        }
        check("gamma_t", self.gamma_t)?;
        check("energy_unit_uev", self.energy_unit_uev)?;
        if self.energy_unit_uev == 0.0 {
            return Err(Error::InvalidParam("energy_unit_uev must be > 0".into()));
        }
        if self.n_fock.is_some_and(|n| n < 2) {
            return Err(Error::InvalidParam("n_fock must be >= 2".into()));
        }
        Ok(())
    }

    /// Soft checks for the full model: branch balance and the elimination
    /// validity ratio.
    pub fn full_model_warnings(&self, node: usize) -> Result<Vec<String>> {
        let n = self.node(node)?;
        let mut out = Vec::new();
        if let (Some(p), Some(m)) = n.branch_products() {
            let diff_uev = (p - m).abs() * self.energy_unit_uev;
            if diff_uev > 1e-9 {
                out.push(format!(
                    "lambda mismatch on node {node}: plus branch {:.6} µeV, minus branch {:.6} µeV",
                    p * self.energy_unit_uev,
                    m * self.energy_unit_uev
                ));
            }
        }
        let r = n.validity_ratio();
        if r > 0.25 {
            out.push(format!(
                "elimination validity ratio max(Omega, g)/min(Delta) = {r:.3} on node {node} exceeds 0.25"
            ));
        }
        Ok(out)
    }
}

/// Coupling `Omega g / Delta` from physical inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalLambda {
    pub micro_ev: f64,
    /// Angular frequency in rad/s.
    pub angular_hz: f64,
}

impl PhysicalLambda {
    /// Cyclic frequency `lambda / 2pi` in GHz.
    pub fn cyclic_ghz(&self) -> f64 {
        self.angular_hz / std::f64::consts::TAU * 1e-9
    }
}

/// `lambda = Omega g / Delta`, all in µeV.
pub fn lambda_from_physical(omega_uev: f64, g_uev: f64, delta_uev: f64) -> Result<PhysicalLambda> {
    if delta_uev == 0.0 || !delta_uev.is_finite() {
        return Err(Error::InvalidParam(format!("detuning must be nonzero, got {delta_uev}")));
    }
    let micro_ev = omega_uev * g_uev / delta_uev;
    Ok(PhysicalLambda {
        micro_ev,
        angular_hz: micro_ev * 1e-6 / HBAR_EV_S,
    })
}
