use serde::Serialize;

use crate::error::{Error, Result};

/// One tensor factor of a composite Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

/// Ordered tensor-factor structure of a composite space.
///
/// Flat indices are row-major over the factors: the first factor is the most
/// significant digit, so for factors `(A, B)` the flat index is
/// `i_A * dim_B + i_B`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct HilbertLayout {
    factors: Vec<Factor>,
    total_dim: usize,
}

impl HilbertLayout {
    pub fn new<I, S>(factors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let factors: Vec<Factor> = factors
            .into_iter()
            .map(|(label, dim)| Factor {
                label: label.into(),
                dim,
            })
            .collect();
        if factors.is_empty() {
            return Err(Error::Structure("layout needs at least one factor".into()));
        }
        for (i, f) in factors.iter().enumerate() {
            if f.dim == 0 {
                return Err(Error::Structure(format!("factor `{}` has dimension 0", f.label)));
            }
            if factors[..i].iter().any(|g| g.label == f.label) {
                return Err(Error::Structure(format!("duplicate factor label `{}`", f.label)));
            }
        }
        let total_dim = factors.iter().map(|f| f.dim).product();
        Ok(HilbertLayout { factors, total_dim })
    }

    /// Single-factor layout.
    pub fn single(label: impl Into<String>, dim: usize) -> Self {
        Self::new([(label.into(), dim)]).expect("a single nonzero factor is always valid")
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.factors.iter().map(|f| f.label.as_str())
    }

    pub fn has(&self, label: &str) -> bool {
        self.factors.iter().any(|f| f.label == label)
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.factors[self.position(label)?].dim)
    }

    /// Layout with `other`'s factors appended after this one's.
    pub fn concat(&self, other: &HilbertLayout) -> Result<Self> {
        Self::new(
            self.factors
                .iter()
                .chain(other.factors.iter())
                .map(|f| (f.label.clone(), f.dim)),
        )
    }

    /// Same dimensions, factor labels replaced.
    pub fn relabeled<S: Into<String>>(&self, labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != self.factors.len() {
            return Err(Error::Structure(format!(
                "relabel needs {} labels, got {}",
                self.factors.len(),
                labels.len()
            )));
        }
        Self::new(labels.into_iter().zip(self.factors.iter().map(|f| f.dim)))
    }

    /// Sub-layout made of the listed factors, kept in this layout's order.
    pub fn restrict(&self, keep: &[&str]) -> Result<Self> {
        for label in keep {
            self.position(label)?;
        }
        if keep.is_empty() {
            return Err(Error::Structure("restriction to an empty factor set".into()));
        }
        Self::new(
            self.factors
                .iter()
                .filter(|f| keep.contains(&f.label.as_str()))
                .map(|f| (f.label.clone(), f.dim)),
        )
    }

    /// Flat index of a multi-index (one entry per factor).
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.factors.len());
        multi
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (&i, f)| {
                debug_assert!(i < f.dim);
                acc * f.dim + i
            })
    }

    /// Multi-index of a flat index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (slot, f) in out.iter_mut().zip(&self.factors).rev() {
            *slot = flat % f.dim;
            flat /= f.dim;
        }
        out
    }
}

impl std::fmt::Display for HilbertLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|x| format!("{}:{}", x.label, x.dim))
            .collect();
        write!(f, "({})", parts.join(", "))
    }
}
