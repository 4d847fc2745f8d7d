use serde::Serialize;

use crate::error::{Error, Result};

/// Named real-valued columns on a shared, uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    t: Vec<f64>,
    columns: Vec<(String, Vec<f64>)>,
}

impl TimeSeries {
    pub fn new(t: Vec<f64>) -> Self {
        TimeSeries {
            t,
            columns: Vec::new(),
        }
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Adds a column; its length must match the grid and its name must be new.
    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.t.len() {
            return Err(Error::DimensionMismatch {
                expected: self.t.len(),
                found: values.len(),
            });
        }
        if self.column(&name).is_some() {
            return Err(Error::Structure(format!("duplicate column `{name}`")));
        }
        self.columns.push((name, values));
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Like [`column`](Self::column) but an unknown name is an error.
    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .ok_or_else(|| Error::Structure(format!("no column `{name}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn columns(&self) -> &[(String, Vec<f64>)] {
        &self.columns
    }

    /// Value of `name` at the grid point nearest to `t`.
    pub fn at(&self, name: &str, t: f64) -> Result<f64> {
        let col = self.require(name)?;
        let k = self
            .t
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .ok_or_else(|| Error::Structure("empty time series".into()))?;
        Ok(col[k])
    }

    pub fn last(&self, name: &str) -> Result<f64> {
        self.require(name)?
            .last()
            .copied()
            .ok_or_else(|| Error::Structure("empty time series".into()))
    }
}
