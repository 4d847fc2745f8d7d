use nalgebra::{DMatrix, DVector};

use super::layout::HilbertLayout;
use super::C64;
use crate::error::{Error, Result};

/// Norm tolerance for vectors flagged as normalized.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Pure state on a composite space.
///
/// Quantum-jump trajectories carry sub-normalized vectors between jumps; the
/// `normalized` flag says which kind this is. Constructors that produce a
/// normalized flag check the norm.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: HilbertLayout,
    amplitudes: DVector<C64>,
    normalized: bool,
}

impl StateVector {
    pub fn from_amplitudes(layout: HilbertLayout, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dim(),
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Integrity(format!(
                "state flagged normalized has norm {norm}"
            )));
        }
        Ok(StateVector {
            layout,
            amplitudes,
            normalized: true,
        })
    }

    /// Wraps a vector without a norm check; it is flagged sub-normalized.
    pub fn unnormalized(layout: HilbertLayout, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dim(),
                found: amplitudes.len(),
            });
        }
        Ok(StateVector {
            layout,
            amplitudes,
            normalized: false,
        })
    }

    pub fn basis(layout: HilbertLayout, index: usize) -> Result<Self> {
        let n = layout.total_dim();
        if index >= n {
            return Err(Error::InvalidParam(format!("basis index {index} >= {n}")));
        }
        let mut v = DVector::zeros(n);
        v[index] = C64::new(1.0, 0.0);
        Self::from_amplitudes(layout, v)
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Scales to unit norm; fails on the zero vector.
    pub fn normalize(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Integrity(format!("cannot normalize vector of norm {n}")));
        }
        self.amplitudes /= C64::new(n, 0.0);
        self.normalized = true;
        Ok(self)
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_same_dims(&self.layout, &other.layout)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Product state with `self`'s factors first.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let layout = self.layout.concat(&other.layout)?;
        let amplitudes = self.amplitudes.kronecker(&other.amplitudes);
        Ok(StateVector {
            layout,
            amplitudes,
            normalized: self.normalized && other.normalized,
        })
    }

    pub fn with_layout(mut self, layout: HilbertLayout) -> Result<Self> {
        check_same_dims(&self.layout, &layout)?;
        self.layout = layout;
        Ok(self)
    }

    /// `|psi><psi|`.
    pub fn to_density(&self) -> DensityMatrix {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix {
            layout: self.layout.clone(),
            entries: m,
        }
    }

    /// Reduced density matrix over `keep`, computed from the amplitudes
    /// directly (no full `|psi><psi|`).
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let split = TraceSplit::new(&self.layout, keep)?;
        let k = split.kept.total_dim();
        let mut out = DMatrix::zeros(k, k);
        for t in 0..split.traced_dim {
            for i in 0..k {
                let ai = self.amplitudes[split.index[i * split.traced_dim + t]];
                if ai == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..k {
                    out[(i, j)] += ai * self.amplitudes[split.index[j * split.traced_dim + t]].conj();
                }
            }
        }
        Ok(DensityMatrix {
            layout: split.kept,
            entries: out,
        })
    }
}

fn check_same_dims(a: &HilbertLayout, b: &HilbertLayout) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Structure(format!("layout mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// Flat-index bookkeeping for tracing out factors: `index[k * traced + t]`
/// is the full-space index of kept index `k` and traced index `t`.
struct TraceSplit {
    kept: HilbertLayout,
    traced_dim: usize,
    index: Vec<usize>,
}

impl TraceSplit {
    fn new(layout: &HilbertLayout, keep: &[&str]) -> Result<Self> {
        let kept = layout.restrict(keep)?;
        let is_kept: Vec<bool> = layout
            .labels()
            .map(|l| keep.contains(&l))
            .collect();
        let traced_dim = layout.total_dim() / kept.total_dim();
        let mut index = vec![0; layout.total_dim()];
        for flat in 0..layout.total_dim() {
            let multi = layout.multi_index(flat);
            let (mut k, mut t) = (0, 0);
            for ((&i, f), &kf) in multi.iter().zip(layout.factors()).zip(&is_kept) {
                if kf {
                    k = k * f.dim + i;
                } else {
                    t = t * f.dim + i;
                }
            }
            index[k * traced_dim + t] = flat;
        }
        Ok(TraceSplit {
            kept,
            traced_dim,
            index,
        })
    }
}

/// Density matrix on a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    layout: HilbertLayout,
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(layout: HilbertLayout, entries: DMatrix<C64>) -> Result<Self> {
        let n = layout.total_dim();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: entries.nrows().max(entries.ncols()),
            });
        }
        Ok(DensityMatrix { layout, entries })
    }

    pub fn maximally_mixed(layout: HilbertLayout) -> Self {
        let n = layout.total_dim();
        let entries = DMatrix::identity(n, n) * C64::new(1.0 / n as f64, 0.0);
        DensityMatrix { layout, entries }
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// Largest entrywise |rho - rho†|.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn purity(&self) -> f64 {
        // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(DensityMatrix {
            layout,
            entries: self.entries.kronecker(&other.entries),
        })
    }

    pub fn with_layout(mut self, layout: HilbertLayout) -> Result<Self> {
        check_same_dims(&self.layout, &layout)?;
        self.layout = layout;
        Ok(self)
    }

    /// Same operator with its factors reordered to `order`, which must name
    /// every factor exactly once.
    pub fn permuted(&self, order: &[&str]) -> Result<DensityMatrix> {
        let n = self.layout.factors().len();
        if order.len() != n {
            return Err(Error::Structure(format!(
                "permutation names {} factors, layout {} has {n}",
                order.len(),
                self.layout
            )));
        }
        let src: Vec<usize> = order
            .iter()
            .map(|l| self.layout.position(l))
            .collect::<Result<_>>()?;
        let layout = HilbertLayout::new(order.iter().map(|l| {
            let f = &self.layout.factors()[self.layout.position(l).expect("checked above")];
            (f.label.clone(), f.dim)
        }))?;
        let dim = layout.total_dim();
        let map: Vec<usize> = (0..dim)
            .map(|flat| {
                let multi = layout.multi_index(flat);
                let mut old = vec![0; n];
                for (&pos, &i) in src.iter().zip(&multi) {
                    old[pos] = i;
                }
                self.layout.flat_index(&old)
            })
            .collect();
        let entries = DMatrix::from_fn(dim, dim, |i, j| self.entries[(map[i], map[j])]);
        Ok(DensityMatrix { layout, entries })
    }

    /// Eigenvalues in ascending order, computed blockwise over the connected
    /// components of the nonzero pattern.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Checks the density-matrix invariants at the given tolerances.
    pub fn check(&self, trace_tol: f64, herm_tol: f64, positivity_tol: f64) -> Result<()> {
        let tr_err = (self.trace() - C64::new(1.0, 0.0)).norm();
        if tr_err > trace_tol {
            return Err(Error::Integrity(format!("trace error {tr_err:.3e}")));
        }
        let h = self.hermiticity_defect();
        if h > herm_tol {
            return Err(Error::Integrity(format!("Hermiticity defect {h:.3e}")));
        }
        let m = self.min_eigenvalue();
        if m < -positivity_tol {
            return Err(Error::Integrity(format!("minimum eigenvalue {m:.3e}")));
        }
        Ok(())
    }
}

/// Reduced density matrix over `keep_labels` (kept in layout order).
pub fn partial_trace(rho: &DensityMatrix, keep_labels: &[&str]) -> Result<DensityMatrix> {
    if keep_labels.is_empty() {
        return Err(Error::Structure("partial trace must keep at least one factor".into()));
    }
    let split = TraceSplit::new(&rho.layout, keep_labels)?;
    let k = split.kept.total_dim();
    let t = split.traced_dim;
    let mut out = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut s = C64::new(0.0, 0.0);
            for x in 0..t {
                s += rho.entries[(split.index[i * t + x], split.index[j * t + x])];
            }
            out[(i, j)] = s;
        }
    }
    Ok(DensityMatrix {
        layout: split.kept,
        entries: out,
    })
}

/// `<target|rho|target>`, clamped to [0, 1] after a range check.
pub fn fidelity_pure(rho: &DensityMatrix, target: &StateVector) -> Result<f64> {
    check_same_dims(&rho.layout, &target.layout)?;
    if (target.norm() - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::Integrity(format!(
            "fidelity target has norm {}",
            target.norm()
        )));
    }
    let v = target.amplitudes();
    let f = v.dotc(&(&rho.entries * v)).re;
    if !(-1e-8..=1.0 + 1e-8).contains(&f) || !f.is_finite() {
        return Err(Error::Integrity(format!("fidelity {f} outside [0, 1]")));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// Trace distance `½‖a − b‖₁`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_same_dims(&a.layout, &b.layout)?;
    let diff = &a.entries - &b.entries;
    Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|x| x.abs()).sum::<f64>())
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// Rows and columns are split into the connected components of the nonzero
/// pattern first; symmetry sectors of the dynamics then diagonalize
/// separately.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows());
    for block in connected_blocks(m) {
        let sub = DMatrix::from_fn(block.len(), block.len(), |i, j| m[(block[i], block[j])]);
        if block.len() == 1 {
            out.push(sub[(0, 0)].re);
            continue;
        }
        let eig = sub.symmetric_eigenvalues();
        out.extend(eig.iter().copied());
    }
    out.sort_by(|x, y| x.total_cmp(y));
    out
}

fn connected_blocks(m: &DMatrix<C64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for j in 0..n {
        for i in 0..n {
            if i != j && m[(i, j)] != C64::new(0.0, 0.0) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[root_slot[r]].push(i);
    }
    blocks
}
