//! Periodic unit cell `Y = (0,1)^3` as a binary voxel grid.
//!
//! Voxel `(x, y, z)` is stored at `x + n*(y + n*z)`; value 1 marks the fluid
//! part `Y_f`, 0 the solid part `Y_s`. The fluid/solid interface is the set of
//! voxel faces separating the two phases.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Phase, Result};

const MAGIC: &[u8] = b"VOXCELL1\n";
const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeometryKind {
    /// Fluid slab of thickness `fluid_fraction` normal to `axis` (0-based).
    Laminate { axis: usize, fluid_fraction: f64 },
    /// Fluid slit open along `axis`; its normal is the next axis cyclically.
    Channel { axis: usize, width: f64 },
    /// Ball of `phase` in a matrix of the other phase, periodic distance.
    Sphere {
        center: [f64; 3],
        radius: f64,
        phase: Phase,
    },
    VoxelImport { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub resolution: usize,
}

impl GeometrySpec {
    pub fn laminate(axis: usize, fluid_fraction: f64, n: usize) -> Self {
        Self {
            kind: GeometryKind::Laminate {
                axis,
                fluid_fraction,
            },
            resolution: n,
        }
    }

    pub fn channel(axis: usize, width: f64, n: usize) -> Self {
        Self {
            kind: GeometryKind::Channel { axis, width },
            resolution: n,
        }
    }

    pub fn sphere(center: [f64; 3], radius: f64, phase: Phase, n: usize) -> Self {
        Self {
            kind: GeometryKind::Sphere {
                center,
                radius,
                phase,
            },
            resolution: n,
        }
    }

    pub fn import(path: impl Into<PathBuf>) -> Self {
        Self {
            kind: GeometryKind::VoxelImport { path: path.into() },
            resolution: 0,
        }
    }
}

/// Outcome of a percolation query on one phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Connectivity {
    /// A single face-connected component that wraps through the periodic faces.
    Percolating,
    /// Several components, or a single one that never touches its periodic image.
    Isolated,
    EmptyPhase,
}

impl Connectivity {
    pub fn is_connected(self) -> bool {
        matches!(self, Connectivity::Percolating)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelCell {
    n: usize,
    chi: Vec<u8>,
    m: f64,
    fluid_connected: bool,
    solid_connected: bool,
}

impl VoxelCell {
    /// Builds a cell from raw occupancy (1 = fluid, 0 = solid).
    pub fn from_chi(n: usize, chi: Vec<u8>) -> Result<Self> {
        if n < 4 {
            return Err(Error::Geometry(format!("resolution {n} is below the minimum of 4")));
        }
        if chi.len() != n * n * n {
            return Err(Error::Geometry(format!(
                "expected {} voxels, got {}",
                n * n * n,
                chi.len()
            )));
        }
        if let Some(pos) = chi.iter().position(|&c| c > 1) {
            return Err(Error::Geometry(format!(
                "voxel {pos} has occupancy {} (expected 0 or 1)",
                chi[pos]
            )));
        }
        let fluid = chi.iter().filter(|&&c| c == 1).count();
        let m = fluid as f64 / chi.len() as f64;
        let mut cell = Self {
            n,
            chi,
            m,
            fluid_connected: false,
            solid_connected: false,
        };
        cell.fluid_connected = cell.connectivity(Phase::Fluid).is_connected();
        cell.solid_connected = cell.connectivity(Phase::Solid).is_connected();
        Ok(cell)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn chi(&self) -> &[u8] {
        &self.chi
    }

    pub fn porosity(&self) -> f64 {
        self.m
    }

    pub fn fluid_connected(&self) -> bool {
        self.fluid_connected
    }

    pub fn solid_connected(&self) -> bool {
        self.solid_connected
    }

    pub fn num_voxels(&self) -> usize {
        self.chi.len()
    }

    pub fn voxel_volume(&self) -> f64 {
        let h = 1.0 / self.n as f64;
        h * h * h
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.n * (y + self.n * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    /// Index of the voxel displaced by `d` (periodic wrap).
    #[inline]
    pub fn shifted(&self, idx: usize, d: [isize; 3]) -> usize {
        let c = self.coords(idx);
        let n = self.n as isize;
        let w = |v: usize, s: isize| (v as isize + s).rem_euclid(n) as usize;
        self.index(w(c[0], d[0]), w(c[1], d[1]), w(c[2], d[2]))
    }

    #[inline]
    pub fn is_fluid(&self, idx: usize) -> bool {
        self.chi[idx] == 1
    }

    #[inline]
    pub fn phase_of(&self, idx: usize) -> Phase {
        if self.is_fluid(idx) {
            Phase::Fluid
        } else {
            Phase::Solid
        }
    }

    pub fn count(&self, phase: Phase) -> usize {
        let want = u8::from(phase == Phase::Fluid);
        self.chi.iter().filter(|&&c| c == want).count()
    }

    /// Percolation of one phase under periodic 6-neighbour adjacency.
    pub fn connectivity(&self, phase: Phase) -> Connectivity {
        let want = u8::from(phase == Phase::Fluid);
        let Some(start) = self.chi.iter().position(|&c| c == want) else {
            return Connectivity::EmptyPhase;
        };
        let n = self.n as i64;
        // Unwrapped coordinates of every visited voxel; a second visit with a
        // different unwrapped position means the component meets its own image.
        let mut unwrapped: Vec<Option<[i64; 3]>> = vec![None; self.chi.len()];
        let c0 = self.coords(start);
        unwrapped[start] = Some([c0[0] as i64, c0[1] as i64, c0[2] as i64]);
        let mut queue = VecDeque::from([start]);
        let mut visited = 1usize;
        let mut wraps = false;
        while let Some(idx) = queue.pop_front() {
            let u = unwrapped[idx].expect("queued voxels are visited");
            for axis in 0..3 {
                for step in [-1i64, 1] {
                    let mut nu = u;
                    nu[axis] += step;
                    let wrapped = [nu[0].rem_euclid(n), nu[1].rem_euclid(n), nu[2].rem_euclid(n)];
                    let nidx = self.index(wrapped[0] as usize, wrapped[1] as usize, wrapped[2] as usize);
                    if self.chi[nidx] != want {
                        continue;
                    }
                    match unwrapped[nidx] {
                        None => {
                            unwrapped[nidx] = Some(nu);
                            visited += 1;
                            queue.push_back(nidx);
                        }
                        Some(prev) => {
                            if prev != nu {
                                wraps = true;
                            }
                        }
                    }
                }
            }
        }
        if visited == self.count(phase) && wraps {
            Connectivity::Percolating
        } else {
            Connectivity::Isolated
        }
    }

    /// Hex SHA-256 over resolution and occupancy.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        h.update(&self.chi);
        hex::encode(h.finalize())
    }

    /// Swaps fluid and solid.
    pub fn complement(&self) -> Result<Self> {
        Self::from_chi(self.n, self.chi.iter().map(|&c| 1 - c).collect())
    }

    /// Cyclic shift of the geometry by `d` voxels.
    pub fn shift(&self, d: [isize; 3]) -> Result<Self> {
        let mut chi = vec![0u8; self.chi.len()];
        for (idx, &c) in self.chi.iter().enumerate() {
            chi[self.shifted(idx, d)] = c;
        }
        Self::from_chi(self.n, chi)
    }

    /// Relabels axes: new axis `k` is old axis `perm[k]`.
    pub fn permute_axes(&self, perm: [usize; 3]) -> Result<Self> {
        let mut chi = vec![0u8; self.chi.len()];
        for (idx, &c) in self.chi.iter().enumerate() {
            let old = self.coords(idx);
            let new = [old[perm[0]], old[perm[1]], old[perm[2]]];
            chi[self.index(new[0], new[1], new[2])] = c;
        }
        Self::from_chi(self.n, chi)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(format!("{}\n", self.n).as_bytes());
        out.extend_from_slice(&self.chi);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            let offset = bytes
                .iter()
                .zip(MAGIC)
                .position(|(a, b)| a != b)
                .unwrap_or(bytes.len().min(MAGIC.len()));
            return Err(Error::Parse {
                offset,
                message: "missing VOXCELL1 header".into(),
            });
        }
        let rest = &bytes[MAGIC.len()..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            return Err(Error::Parse {
                offset: bytes.len(),
                message: "unterminated resolution line".into(),
            });
        };
        if let Some(bad) = rest[..nl].iter().position(|b| !b.is_ascii_digit()) {
            return Err(Error::Parse {
                offset: MAGIC.len() + bad,
                message: "resolution must be a decimal integer".into(),
            });
        }
        let n: usize = std::str::from_utf8(&rest[..nl])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                offset: MAGIC.len(),
                message: "empty or oversized resolution".into(),
            })?;
        let body_start = MAGIC.len() + nl + 1;
        let body = &bytes[body_start..];
        let expected = n.checked_pow(3).ok_or_else(|| Error::Parse {
            offset: MAGIC.len(),
            message: "resolution overflows".into(),
        })?;
        if body.len() != expected {
            return Err(Error::Parse {
                offset: body_start + body.len().min(expected),
                message: format!("expected {expected} voxel bytes, found {}", body.len()),
            });
        }
        if let Some(bad) = body.iter().position(|&b| b > 1) {
            return Err(Error::Parse {
                offset: body_start + bad,
                message: format!("voxel byte {} is not 0 or 1", body[bad]),
            });
        }
        Self::from_chi(n, body.to_vec())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn aligned_layers(fraction: f64, n: usize, what: &str) -> Result<usize> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Geometry(format!("{what} {fraction} is outside [0, 1]")));
    }
    let layers = fraction * n as f64;
    let rounded = layers.round();
    if (layers - rounded).abs() > ALIGN_TOL {
        return Err(Error::Geometry(format!(
            "{what} {fraction} is not voxel-aligned at n={n}: {layers} layers, need an exact integer"
        )));
    }
    Ok(rounded as usize)
}

fn check_axis(axis: usize) -> Result<()> {
    if axis > 2 {
        return Err(Error::Geometry(format!("axis {axis} is out of range (0..=2)")));
    }
    Ok(())
}

fn slab(n: usize, normal: usize, layers: usize) -> Vec<u8> {
    let mut chi = vec![0u8; n * n * n];
    for (idx, c) in chi.iter_mut().enumerate() {
        let coords = [idx % n, (idx / n) % n, idx / (n * n)];
        if coords[normal] < layers {
            *c = 1;
        }
    }
    chi
}

/// Builds a voxel cell from a geometry description. Deterministic.
pub fn build_cell(spec: &GeometrySpec) -> Result<VoxelCell> {
    let n = spec.resolution;
    if !matches!(spec.kind, GeometryKind::VoxelImport { .. }) && n < 4 {
        return Err(Error::Geometry(format!("resolution {n} is below the minimum of 4")));
    }
    match &spec.kind {
        GeometryKind::Laminate {
            axis,
            fluid_fraction,
        } => {
            check_axis(*axis)?;
            let layers = aligned_layers(*fluid_fraction, n, "laminate fluid fraction")?;
            VoxelCell::from_chi(n, slab(n, *axis, layers))
        }
        GeometryKind::Channel { axis, width } => {
            check_axis(*axis)?;
            if *width <= 0.0 || *width >= 1.0 {
                return Err(Error::Geometry(format!("channel width {width} is outside (0, 1)")));
            }
            let layers = aligned_layers(*width, n, "channel width")?;
            VoxelCell::from_chi(n, slab(n, (axis + 1) % 3, layers))
        }
        GeometryKind::Sphere {
            center,
            radius,
            phase,
        } => {
            if center.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::Geometry(format!("sphere center {center:?} is outside the cell")));
            }
            if *radius <= 0.0 || *radius >= 1.0 {
                return Err(Error::Geometry(format!("sphere radius {radius} is outside (0, 1)")));
            }
            let h = 1.0 / n as f64;
            let inside = u8::from(*phase == Phase::Fluid);
            let mut chi = vec![1 - inside; n * n * n];
            for (idx, c) in chi.iter_mut().enumerate() {
                let coords = [idx % n, (idx / n) % n, idx / (n * n)];
                let r2: f64 = (0..3)
                    .map(|k| {
                        let d = (coords[k] as f64 + 0.5) * h - center[k];
                        let d = d - d.round();
                        d * d
                    })
                    .sum();
                if r2 < radius * radius {
                    *c = inside;
                }
            }
            VoxelCell::from_chi(n, chi)
        }
        GeometryKind::VoxelImport { path } => VoxelCell::read(path),
    }
}

/// Convenience: `connectivity(cell, phase)` as a free function.
pub fn connectivity(cell: &VoxelCell, phase: Phase) -> Connectivity {
    cell.connectivity(phase)
}

pub fn porosity(cell: &VoxelCell) -> f64 {
    cell.porosity()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laminate_half() {
        let cell = build_cell(&GeometrySpec::laminate(0, 0.5, 16)).unwrap();
        assert_eq!(cell.porosity(), 0.5);
        assert!(cell.fluid_connected());
        assert!(cell.solid_connected());
    }

    #[test]
    fn interior_sphere_pore_is_isolated() {
        let cell = build_cell(&GeometrySpec::sphere([0.5; 3], 0.25, Phase::Fluid, 32)).unwrap();
        assert!(!cell.fluid_connected());
        assert!(cell.solid_connected());
        assert_eq!(cell.connectivity(Phase::Fluid), Connectivity::Isolated);
    }

    #[test]
    fn full_solid_and_full_fluid() {
        let solid = build_cell(&GeometrySpec::laminate(0, 0.0, 8)).unwrap();
        assert_eq!(solid.porosity(), 0.0);
        assert!(!solid.fluid_connected());
        assert_eq!(solid.connectivity(Phase::Fluid), Connectivity::EmptyPhase);
        let fluid = build_cell(&GeometrySpec::laminate(0, 1.0, 8)).unwrap();
        assert_eq!(fluid.porosity(), 1.0);
        assert_eq!(fluid.connectivity(Phase::Fluid), Connectivity::Percolating);
    }

    #[test]
    fn channel_quarter() {
        let cell = build_cell(&GeometrySpec::channel(0, 0.25, 16)).unwrap();
        assert_eq!(cell.porosity(), 0.25);
        assert!(cell.fluid_connected());
    }

    #[test]
    fn misaligned_fraction_is_rejected() {
        let err = build_cell(&GeometrySpec::laminate(0, 0.3, 16)).unwrap_err();
        assert!(err.to_string().contains("not voxel-aligned"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn two_separate_slabs_are_not_one_component() {
        let n = 8;
        let mut chi = vec![0u8; n * n * n];
        for (idx, c) in chi.iter_mut().enumerate() {
            let x = idx % n;
            if x == 1 || x == 5 {
                *c = 1;
            }
        }
        let cell = VoxelCell::from_chi(n, chi).unwrap();
        assert_eq!(cell.connectivity(Phase::Fluid), Connectivity::Isolated);
        assert_eq!(cell.connectivity(Phase::Solid), Connectivity::Isolated);
    }

    #[test]
    fn voxel_roundtrip_and_parse_errors() {
        let cell = build_cell(&GeometrySpec::sphere([0.3, 0.5, 0.7], 0.2, Phase::Fluid, 8)).unwrap();
        let bytes = cell.to_bytes();
        assert_eq!(VoxelCell::from_bytes(&bytes).unwrap(), cell);

        let mut bad = bytes.clone();
        bad[2] = b'Q';
        match VoxelCell::from_bytes(&bad).unwrap_err() {
            Error::Parse { offset, .. } => assert_eq!(offset, 2),
            e => panic!("unexpected {e}"),
        }
        let mut bad = bytes.clone();
        let body = MAGIC.len() + 2;
        bad[body + 17] = 7;
        match VoxelCell::from_bytes(&bad).unwrap_err() {
            Error::Parse { offset, .. } => assert_eq!(offset, body + 17),
            e => panic!("unexpected {e}"),
        }
        match VoxelCell::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err() {
            Error::Parse { message, .. } => assert!(message.contains("expected 512")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn deterministic_build() {
        let spec = GeometrySpec::sphere([0.4, 0.5, 0.5], 0.3, Phase::Solid, 12);
        assert_eq!(build_cell(&spec).unwrap().to_bytes(), build_cell(&spec).unwrap().to_bytes());
    }
}
