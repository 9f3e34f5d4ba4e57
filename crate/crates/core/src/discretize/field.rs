use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Phase, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    ScalarNode,
    VectorNode,
    /// Face velocities (`3 * cell + d`) with cell pressure.
    FaceVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Support {
    Solid,
    Fluid,
    Whole,
}

impl From<Phase> for Support {
    fn from(p: Phase) -> Self {
        match p {
            Phase::Solid => Support::Solid,
            Phase::Fluid => Support::Fluid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub problem: String,
    pub fingerprint: String,
    pub iterations: usize,
    pub residual: f64,
    /// Bordered scalar unknown, when the problem has one.
    pub bordered: Option<f64>,
}

/// A corrector on the full periodic grid, zero outside its support.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub kind: FieldKind,
    pub support: Support,
    pub n: usize,
    pub values: Vec<f64>,
    pub pressure: Option<Vec<f64>>,
    pub meta: FieldMeta,
}

impl CellField {
    pub fn components(&self) -> usize {
        match self.kind {
            FieldKind::ScalarNode => 1,
            _ => 3,
        }
    }

    pub fn get(&self, idx: usize, comp: usize) -> f64 {
        self.values[idx * self.components() + comp]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Largest entrywise difference to another field on the same grid.
    pub fn max_diff(&self, other: &CellField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Cyclic shift by `d` grid steps.
    pub fn shifted(&self, d: [isize; 3]) -> CellField {
        let n = self.n as isize;
        let nc = self.components();
        let mut values = vec![0.0; self.values.len()];
        let shift = |idx: usize| {
            let c = [idx % self.n, (idx / self.n) % self.n, idx / (self.n * self.n)];
            let w = |k: usize| (c[k] as isize + d[k]).rem_euclid(n) as usize;
            w(0) + self.n * (w(1) + self.n * w(2))
        };
        for idx in 0..self.n.pow(3) {
            let t = shift(idx);
            values[t * nc..t * nc + nc].copy_from_slice(&self.values[idx * nc..idx * nc + nc]);
        }
        let pressure = self.pressure.as_ref().map(|p| {
            let mut out = vec![0.0; p.len()];
            for (idx, v) in p.iter().enumerate() {
                out[shift(idx)] = *v;
            }
            out
        });
        CellField {
            values,
            pressure,
            ..self.clone()
        }
    }

    /// CSV rows `ix,iy,iz,component,value`; pressure is component 3.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "ix,iy,iz,component,value")?;
        let n = self.n;
        let nc = self.components();
        for idx in 0..n.pow(3) {
            let (x, y, z) = (idx % n, (idx / n) % n, idx / (n * n));
            for c in 0..nc {
                writeln!(w, "{x},{y},{z},{c},{:e}", self.values[idx * nc + c])?;
            }
            if let Some(p) = &self.pressure {
                writeln!(w, "{x},{y},{z},3,{:e}", p[idx])?;
            }
        }
        Ok(())
    }
}
