use serde::Serialize;

use super::basis::{
    cavity_label, dot_label, dot_transition, sigma_z, single_node_layout, two_node_layout,
    DotLevel, EFFECTIVE_DOT_DIM, FULL_DOT_DIM,
};
use super::hamiltonian::{build_effective_hamiltonian, build_full_hamiltonian, nodes_in};
use super::params::{DotDecoherence, ModelParams};
use crate::error::{Error, Result};
use crate::qcore::{annihilation_op, embed, HilbertLayout, Operator, C64};

/// Which Hamiltonian a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModelKind {
    Effective,
    Full,
}

/// Identity of a dissipation channel; detector channels are `C` and `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ChannelLabel {
    C,
    D,
    Cavity(u8),
    Dot(u8),
    Trion,
}

impl ChannelLabel {
    /// Channels whose emissions reach a photon counter.
    pub fn is_detected(self) -> bool {
        matches!(self, ChannelLabel::C | ChannelLabel::D | ChannelLabel::Cavity(_))
    }
}

impl std::fmt::Display for ChannelLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChannelLabel::C => write!(f, "c"),
            ChannelLabel::D => write!(f, "d"),
            ChannelLabel::Cavity(i) => write!(f, "cav{i}"),
            ChannelLabel::Dot(i) => write!(f, "dot{i}"),
            ChannelLabel::Trion => write!(f, "trion"),
        }
    }
}

/// A collapse operator with its rate folded in.
#[derive(Debug, Clone)]
pub struct Channel {
    pub label: ChannelLabel,
    pub op: Operator,
    /// Whether emissions on this channel reach a detector.
    pub detected: bool,
}

fn node_dot_dim(kind: ModelKind) -> usize {
    match kind {
        ModelKind::Effective => EFFECTIVE_DOT_DIM,
        ModelKind::Full => FULL_DOT_DIM,
    }
}

/// Collapse operators of the nodes in `layout`: `sqrt(kappa_i) a_i`
/// (detected), `sqrt(Gamma_i) L_dot` and, for the full model, the two trion
/// decays `sqrt(Gamma_T)|X+-><T+-|`. Zero-rate channels are omitted.
pub fn collapse_operators(
    params: &ModelParams,
    layout: &HilbertLayout,
    kind: ModelKind,
) -> Result<Vec<Channel>> {
    let nodes = nodes_in(layout);
    if nodes.is_empty() {
        return Err(Error::Structure(format!("layout {layout} has no dot<i>/cav<i> pair")));
    }
    let dim = node_dot_dim(kind);
    let mut out = Vec::new();
    for &i in &nodes {
        let (dot, cav) = (dot_label(i), cavity_label(i));
        if layout.dim_of(&dot)? != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: layout.dim_of(&dot)?,
            });
        }
        let p = params.node(i)?;
        if p.kappa > 0.0 {
            let a = embed(&annihilation_op(layout.dim_of(&cav)?)?, &cav, layout)?;
            out.push(Channel {
                label: ChannelLabel::Cavity(i as u8),
                op: a.scale_re(p.kappa.sqrt()),
                detected: true,
            });
        }
        if p.gamma > 0.0 {
            let l = match params.dot_decoherence {
                DotDecoherence::Relaxation => dot_transition(DotLevel::XMinus, DotLevel::XPlus, dim)?,
                DotDecoherence::Dephasing => sigma_z(dim)?,
            };
            out.push(Channel {
                label: ChannelLabel::Dot(i as u8),
                op: embed(&l, &dot, layout)?.scale_re(p.gamma.sqrt()),
                detected: false,
            });
        }
    }
    if kind == ModelKind::Full && params.gamma_t > 0.0 {
        let dot = dot_label(nodes[0]);
        for (to, from) in [
            (DotLevel::XPlus, DotLevel::TPlus),
            (DotLevel::XMinus, DotLevel::TMinus),
        ] {
            out.push(Channel {
                label: ChannelLabel::Trion,
                op: embed(&dot_transition(to, from, dim)?, &dot, layout)?
                    .scale_re(params.gamma_t.sqrt()),
                detected: false,
            });
        }
    }
    Ok(out)
}

/// Beamsplitter output modes
/// `c = -i(sqrt(k1) a1 + sqrt(k2) a2)/sqrt 2`, `d = -i(sqrt(k1) a1 - sqrt(k2) a2)/sqrt 2`.
pub fn detector_jump_ops(params: &ModelParams, layout: &HilbertLayout) -> Result<(Operator, Operator)> {
    if !(layout.has("cav1") && layout.has("cav2")) {
        return Err(Error::Structure(format!(
            "detector modes need both cavities, layout is {layout}"
        )));
    }
    let a1 = embed(&annihilation_op(layout.dim_of("cav1")?)?, "cav1", layout)?
        .scale_re(params.node(1)?.kappa.sqrt());
    let a2 = embed(&annihilation_op(layout.dim_of("cav2")?)?, "cav2", layout)?
        .scale_re(params.node(2)?.kappa.sqrt());
    let pre = C64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2);
    Ok(((&a1 + &a2).scale(pre), (&a1 - &a2).scale(pre)))
}

/// Hamiltonian plus labeled collapse operators on a shared layout.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    layout: HilbertLayout,
    hamiltonian: Operator,
    channels: Vec<Channel>,
}

/// Largest tolerated `max|H - H†|`.
pub const HERMITICITY_TOLERANCE: f64 = 1e-10;

impl LindbladModel {
    pub fn new(layout: HilbertLayout, hamiltonian: Operator, channels: Vec<Channel>) -> Result<Self> {
        let check = |op: &Operator, what: &str| {
            if op.layout().dims() != layout.dims() {
                Err(Error::Structure(format!(
                    "{what} layout {} differs from model layout {layout}",
                    op.layout()
                )))
            } else {
                Ok(())
            }
        };
        check(&hamiltonian, "Hamiltonian")?;
        for ch in &channels {
            check(&ch.op, &format!("channel {}", ch.label))?;
        }
        let defect = hamiltonian.hermiticity_defect();
        if defect > HERMITICITY_TOLERANCE {
            return Err(Error::Integrity(format!("Hamiltonian Hermiticity defect {defect:.3e}")));
        }
        Ok(LindbladModel {
            layout,
            hamiltonian,
            channels,
        })
    }

    /// Two-node effective model whose cavity emissions are routed through
    /// the beamsplitter to detectors `c` and `d`.
    pub fn two_node(params: &ModelParams, n_fock: usize) -> Result<Self> {
        params.validate()?;
        let layout = two_node_layout(n_fock);
        let h = build_effective_hamiltonian(params, &layout)?;
        let (c, d) = detector_jump_ops(params, &layout)?;
        let mut channels = Vec::new();
        if !c.is_zero() {
            channels.push(Channel {
                label: ChannelLabel::C,
                op: c,
                detected: true,
            });
        }
        if !d.is_zero() {
            channels.push(Channel {
                label: ChannelLabel::D,
                op: d,
                detected: true,
            });
        }
        channels.extend(
            collapse_operators(params, &layout, ModelKind::Effective)?
                .into_iter()
                .filter(|ch| !matches!(ch.label, ChannelLabel::Cavity(_))),
        );
        Self::new(layout, h, channels)
    }

    /// One effective node with its own cavity channel.
    pub fn single_node(params: &ModelParams, node: usize, n_fock: usize) -> Result<Self> {
        params.validate()?;
        let layout = single_node_layout(node, EFFECTIVE_DOT_DIM, n_fock);
        let h = build_effective_hamiltonian(params, &layout)?;
        let channels = collapse_operators(params, &layout, ModelKind::Effective)?;
        Self::new(layout, h, channels)
    }

    /// Four-level dot of node 1 with its cavity.
    pub fn full_single_node(params: &ModelParams, n_fock: usize) -> Result<Self> {
        params.validate()?;
        let layout = single_node_layout(1, FULL_DOT_DIM, n_fock);
        let h = build_full_hamiltonian(params, &layout)?;
        let channels = collapse_operators(params, &layout, ModelKind::Full)?;
        Self::new(layout, h, channels)
    }

    /// Same channels, Hamiltonian replaced.
    pub fn with_hamiltonian(&self, hamiltonian: Operator) -> Result<Self> {
        Self::new(self.layout.clone(), hamiltonian, self.channels.clone())
    }

    /// Same channels with the Hamiltonian switched off.
    pub fn free_decay(&self) -> Self {
        LindbladModel {
            layout: self.layout.clone(),
            hamiltonian: Operator::zeros(self.layout.clone()),
            channels: self.channels.clone(),
        }
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, label: ChannelLabel) -> Option<&Channel> {
        self.channels.iter().find(|c| c.label == label)
    }

    pub fn detected_labels(&self) -> Vec<ChannelLabel> {
        self.channels
            .iter()
            .filter(|c| c.detected)
            .map(|c| c.label)
            .collect()
    }

    /// `sum_k L_k† L_k`.
    pub fn damping_operator(&self) -> Operator {
        self.channels
            .iter()
            .fold(Operator::zeros(self.layout.clone()), |acc, ch| {
                &acc + &ch.op.adjoint().matmul(&ch.op)
            })
    }

    /// `H - (i/2) sum_k L_k† L_k`.
    pub fn effective_nonhermitian(&self) -> Operator {
        &self.hamiltonian + &self.damping_operator().scale(C64::new(0.0, -0.5))
    }
}
