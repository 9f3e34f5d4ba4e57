use super::grid::PeriodicGrid;
use crate::error::{Error, Phase, Result};
use crate::microcell::VoxelCell;
use crate::sparse::CsrMatrix;

const NONE: usize = usize::MAX;

/// Marker-and-cell Stokes discretization on the fluid voxels.
///
/// Velocity component `d` of voxel `c` lives on the lower face between `c - e_d`
/// and `c`; that face is active when both voxels are fluid. Pressure lives in
/// fluid voxels. The system is `μ L u + G p = f`, `Gᵀ u = 0`.
#[derive(Debug, Clone)]
pub struct StokesSystem {
    pub n: usize,
    pub h: f64,
    pub mu: f64,
    pub fingerprint: String,
    /// Active faces as `3 * cell + d`.
    pub faces: Vec<usize>,
    face_slot: Vec<usize>,
    pub cells: Vec<usize>,
    cell_slot: Vec<usize>,
    /// `-Δ_h` on active faces, no-slip by reflection across walls.
    pub laplacian: CsrMatrix,
    pub grad: CsrMatrix,
    pub grad_t: CsrMatrix,
    /// Pressure kernel: fluid voxels grouped by face-connected component.
    pub pressure_components: Vec<Vec<usize>>,
    pub forcing: Vec<f64>,
}

impl StokesSystem {
    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn face_slot(&self, face: usize) -> Option<usize> {
        match self.face_slot[face] {
            NONE => None,
            s => Some(s),
        }
    }

    pub fn cell_slot(&self, cell: usize) -> Option<usize> {
        match self.cell_slot[cell] {
            NONE => None,
            s => Some(s),
        }
    }

    /// Unit body force along `dir` on the active faces.
    pub fn unit_forcing(&self, dir: usize) -> Vec<f64> {
        self.faces.iter().map(|&f| if f % 3 == dir { 1.0 } else { 0.0 }).collect()
    }

    /// `∫_{Y_f} u` per direction.
    pub fn flux(&self, u: &[f64]) -> [f64; 3] {
        let vol = self.h * self.h * self.h;
        let mut out = [0.0; 3];
        for (s, &f) in self.faces.iter().enumerate() {
            out[f % 3] += vol * u[s];
        }
        out
    }

    /// Discrete divergence per fluid cell.
    pub fn divergence(&self, u: &[f64]) -> Vec<f64> {
        self.grad_t.matvec(u).into_iter().map(|v| -v).collect()
    }

    /// Zero-mean pressure per component.
    pub fn project_pressure(&self, p: &mut [f64]) {
        for comp in &self.pressure_components {
            let mean = comp.iter().map(|&s| p[s]).sum::<f64>() / comp.len() as f64;
            for &s in comp {
                p[s] -= mean;
            }
        }
    }

    /// Full-grid face velocity (`3 * cell + d`) and voxel pressure arrays.
    pub fn scatter(&self, u: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut uf = vec![0.0; 3 * self.n.pow(3)];
        let mut pf = vec![0.0; self.n.pow(3)];
        for (s, &f) in self.faces.iter().enumerate() {
            uf[f] = u[s];
        }
        for (s, &c) in self.cells.iter().enumerate() {
            pf[c] = p[s];
        }
        (uf, pf)
    }
}

/// Assembles the Stokes cell problem with forcing `e_dir`. `steady` enforces
/// the percolation requirement of the permeability problem.
pub fn assemble_stokes(cell: &VoxelCell, mu: f64, dir: usize, steady: bool) -> Result<StokesSystem> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Parameter(format!("mu1 must be positive and finite, got {mu}")));
    }
    if dir > 2 {
        return Err(Error::Parameter(format!("forcing direction {dir} out of range")));
    }
    if cell.count(Phase::Fluid) == 0 {
        return Err(Error::EmptyPhase(Phase::Fluid));
    }
    if steady && !cell.fluid_connected() {
        return Err(Error::Disconnected {
            phase: Phase::Fluid,
            hint: "pores are isolated; the flow laws do not apply, use regime II".into(),
        });
    }
    let grid = PeriodicGrid::new(cell);
    let h = grid.h();
    let nc = grid.num_elements();
    let fluid = |c: usize| cell.is_fluid(c);
    let unit = |d: usize, s: isize| {
        let mut v = [0isize; 3];
        v[d] = s;
        v
    };

    let mut cell_slot = vec![NONE; nc];
    let mut cells = Vec::new();
    for c in 0..nc {
        if fluid(c) {
            cell_slot[c] = cells.len();
            cells.push(c);
        }
    }
    let mut face_slot = vec![NONE; 3 * nc];
    let mut faces = Vec::new();
    for c in 0..nc {
        for d in 0..3 {
            if fluid(c) && fluid(grid.offset(c, unit(d, -1))) {
                face_slot[3 * c + d] = faces.len();
                faces.push(3 * c + d);
            }
        }
    }

    let ih2 = 1.0 / (h * h);
    let lap_rows = crate::par::map_range(faces.len(), |s| {
        let f = faces[s];
        let (c, d) = (f / 3, f % 3);
        let mut row = Vec::with_capacity(7);
        let mut diag = 0.0;
        for k in 0..3 {
            for step in [-1isize, 1] {
                let nb = 3 * grid.offset(c, unit(k, step)) + d;
                match face_slot[nb] {
                    NONE if k == d => diag += ih2,
                    NONE => diag += 2.0 * ih2,
                    t => {
                        diag += ih2;
                        row.push((t, -ih2));
                    }
                }
            }
        }
        row.push((s, diag));
        row
    });
    let laplacian = CsrMatrix::from_rows(faces.len(), lap_rows);

    let grad_rows: Vec<Vec<(usize, f64)>> = faces
        .iter()
        .map(|&f| {
            let (c, d) = (f / 3, f % 3);
            let lower = grid.offset(c, unit(d, -1));
            vec![(cell_slot[c], 1.0 / h), (cell_slot[lower], -1.0 / h)]
        })
        .collect();
    let grad = CsrMatrix::from_rows(cells.len(), grad_rows);
    let grad_t = grad.transpose();

    // Pressure components over active faces.
    let mut parent: Vec<usize> = (0..cells.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for &f in &faces {
        let (c, d) = (f / 3, f % 3);
        let a = find(&mut parent, cell_slot[c]);
        let b = find(&mut parent, cell_slot[grid.offset(c, unit(d, -1))]);
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); cells.len()];
    for s in 0..cells.len() {
        let r = find(&mut parent, s);
        by_root[r].push(s);
    }
    let pressure_components = by_root.into_iter().filter(|v| !v.is_empty()).collect();

    let mut sys = StokesSystem {
        n: cell.n(),
        h,
        mu,
        fingerprint: cell.fingerprint(),
        faces,
        face_slot,
        cells,
        cell_slot,
        laplacian,
        grad,
        grad_t,
        pressure_components,
        forcing: Vec::new(),
    };
    sys.forcing = sys.unit_forcing(dir);
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microcell::{build_cell, GeometrySpec};

    #[test]
    fn operators_are_symmetric_and_adjoint() {
        let cell = build_cell(&GeometrySpec::sphere([0.5; 3], 0.35, Phase::Solid, 8)).unwrap();
        let sys = assemble_stokes(&cell, 1.0, 0, true).unwrap();
        assert!(sys.laplacian.symmetry_defect() < 1e-14);
        assert_eq!(sys.pressure_components.len(), 1);
        let ones = vec![1.0; sys.num_cells()];
        assert!(sys.grad.matvec(&ones).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn poiseuille_profile_is_discrete_solution() {
        // slit of 4 voxels normal to y at n = 16, flow along x
        let cell = build_cell(&GeometrySpec::channel(0, 0.25, 16)).unwrap();
        let sys = assemble_stokes(&cell, 1.0, 0, true).unwrap();
        let h = sys.h;
        let width = 0.25;
        let u: Vec<f64> = sys
            .faces
            .iter()
            .map(|&f| {
                if f % 3 != 0 {
                    return 0.0;
                }
                let y = ((f / 3 / 16) % 16) as f64 * h + 0.5 * h;
                (y * (width - y) + h * h / 4.0) / 2.0
            })
            .collect();
        let res = sys.laplacian.matvec(&u);
        for (r, f) in res.iter().zip(&sys.forcing) {
            assert!((r - f).abs() < 1e-9, "{r} vs {f}");
        }
        assert!(sys.divergence(&u).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn isolated_pore_is_refused() {
        let cell = build_cell(&GeometrySpec::sphere([0.5; 3], 0.25, Phase::Fluid, 8)).unwrap();
        assert!(matches!(assemble_stokes(&cell, 1.0, 0, true), Err(Error::Disconnected { .. })));
        let solid = build_cell(&GeometrySpec::laminate(0, 0.0, 8)).unwrap();
        assert!(matches!(assemble_stokes(&solid, 1.0, 0, true), Err(Error::EmptyPhase(_))));
    }
}
