//! Snapshot data model: time-ordered rows of flattened velocity fields.

mod io;
mod synthetic;

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_snapshots, save_snapshots, save_snapshots_csv};
pub use synthetic::{generate_synthetic_flow, SyntheticFlowConfig};

/// How physical components are flattened into the state columns.
///
/// Layout is component-major: all samples of the first component, then all of
/// the second, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentLayout {
    pub components: u32,
}

impl ComponentLayout {
    pub const SCALAR: Self = Self { components: 1 };
    pub const VELOCITY_2D: Self = Self { components: 2 };

    pub fn tag(self) -> u32 {
        self.components
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        (1..=3).contains(&tag).then_some(Self { components: tag })
    }

    /// Column range of component `c` for a state of width `m`.
    pub fn component_range(self, m: usize, c: usize) -> Range<usize> {
        let per = m / self.components as usize;
        c * per..(c + 1) * per
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    data: DMatrix<f64>,
    dt: f64,
    layout: ComponentLayout,
}

impl SnapshotMatrix {
    pub fn new(data: DMatrix<f64>, dt: f64, layout: ComponentLayout) -> Result<Self> {
        let (n, m) = data.shape();
        if n < 2 {
            return Err(Error::argument(format!(
                "snapshot matrix needs at least 2 rows, got {n}"
            )));
        }
        if m == 0 {
            return Err(Error::argument("snapshot matrix needs at least 1 column"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::argument(format!("dt must be positive and finite, got {dt}")));
        }
        if layout.components == 0 || m % layout.components as usize != 0 {
            return Err(Error::argument(format!(
                "{m} columns cannot be split into {} components",
                layout.components
            )));
        }
        if let Some((row, col)) = first_non_finite(&data) {
            return Err(Error::Numeric(format!("non-finite value at row {row}, column {col}")));
        }
        Ok(Self { data, dt, layout })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn m(&self) -> usize {
        self.data.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn layout(&self) -> ComponentLayout {
        self.layout
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn time(&self, row: usize) -> f64 {
        row as f64 * self.dt
    }

    /// Contiguous block of rows, keeping dt and layout.
    pub fn rows(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.n() || range.start >= range.end {
            return Err(Error::argument(format!(
                "row range {range:?} invalid for {} rows",
                self.n()
            )));
        }
        Self::new(
            self.data.rows(range.start, range.len()).into_owned(),
            self.dt,
            self.layout,
        )
    }

    pub fn component_range(&self, c: usize) -> Range<usize> {
        self.layout.component_range(self.m(), c)
    }
}

pub(crate) fn first_non_finite(data: &DMatrix<f64>) -> Option<(usize, usize)> {
    for r in 0..data.nrows() {
        for c in 0..data.ncols() {
            if !data[(r, c)].is_finite() {
                return Some((r, c));
            }
        }
    }
    None
}
