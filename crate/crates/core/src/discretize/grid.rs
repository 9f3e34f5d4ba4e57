use crate::error::Phase;
use crate::microcell::VoxelCell;

/// Offsets of the eight nodes of an element, local index `a = ax + 2*ay + 4*az`.
pub const LOCAL: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

const NONE: usize = usize::MAX;

/// Periodic node/element numbering on an `n^3` voxel grid. Node `(i,j,k)` sits
/// at the lower corner of voxel `(i,j,k)`, so nodes and elements share indices.
#[derive(Debug, Clone)]
pub struct PeriodicGrid {
    n: usize,
    h: f64,
    phase: Vec<Phase>,
}

impl PeriodicGrid {
    pub fn new(cell: &VoxelCell) -> Self {
        let phase = (0..cell.num_voxels()).map(|e| cell.phase_of(e)).collect();
        Self {
            n: cell.n(),
            h: 1.0 / cell.n() as f64,
            phase,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_nodes(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn num_elements(&self) -> usize {
        self.num_nodes()
    }

    pub fn element_phase(&self, e: usize) -> Phase {
        self.phase[e]
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.n * (c[1] + self.n * c[2])
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    #[inline]
    pub fn offset(&self, idx: usize, d: [isize; 3]) -> usize {
        let c = self.coords(idx);
        let n = self.n as isize;
        let w = |k: usize| (c[k] as isize + d[k]).rem_euclid(n) as usize;
        self.index([w(0), w(1), w(2)])
    }

    pub fn element_nodes(&self, e: usize) -> [usize; 8] {
        let mut out = [0; 8];
        for (a, o) in LOCAL.iter().enumerate() {
            out[a] = self.offset(e, [o[0] as isize, o[1] as isize, o[2] as isize]);
        }
        out
    }

    /// The eight `(element, local index of node in it)` pairs around a node.
    pub fn node_elements(&self, node: usize) -> [(usize, usize); 8] {
        let mut out = [(0, 0); 8];
        for (a, o) in LOCAL.iter().enumerate() {
            let e = self.offset(node, [-(o[0] as isize), -(o[1] as isize), -(o[2] as isize)]);
            out[a] = (e, a);
        }
        out
    }

    pub fn touches(&self, node: usize, phase: Phase) -> bool {
        self.node_elements(node).iter().any(|&(e, _)| self.phase[e] == phase)
    }

    pub fn interior_to(&self, node: usize, phase: Phase) -> bool {
        self.node_elements(node).iter().all(|&(e, _)| self.phase[e] == phase)
    }
}

/// Map between grid nodes and unknowns of a phase-restricted problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    node_to_dof: Vec<usize>,
    dof_to_node: Vec<usize>,
    block: usize,
}

impl DofMap {
    /// Nodes touching at least one element of `phase` (natural boundary on γ).
    pub fn touching(grid: &PeriodicGrid, phase: Phase, block: usize) -> Self {
        Self::select(grid, block, |node| grid.touches(node, phase))
    }

    /// Nodes strictly inside `phase` (homogeneous Dirichlet on γ).
    pub fn interior(grid: &PeriodicGrid, phase: Phase, block: usize) -> Self {
        Self::select(grid, block, |node| grid.interior_to(node, phase))
    }

    fn select(grid: &PeriodicGrid, block: usize, keep: impl Fn(usize) -> bool) -> Self {
        let mut node_to_dof = vec![NONE; grid.num_nodes()];
        let mut dof_to_node = Vec::new();
        for (node, slot) in node_to_dof.iter_mut().enumerate() {
            if keep(node) {
                *slot = dof_to_node.len();
                dof_to_node.push(node);
            }
        }
        Self {
            node_to_dof,
            dof_to_node,
            block,
        }
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn num_nodes(&self) -> usize {
        self.dof_to_node.len()
    }

    pub fn len(&self) -> usize {
        self.dof_to_node.len() * self.block
    }

    pub fn is_empty(&self) -> bool {
        self.dof_to_node.is_empty()
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        match self.node_to_dof[node] {
            NONE => None,
            d => Some(d),
        }
    }

    pub fn node(&self, dof: usize) -> usize {
        self.dof_to_node[dof]
    }

    pub fn grid_len(&self) -> usize {
        self.node_to_dof.len()
    }

    /// Scatters a dof vector onto all grid nodes (zero off-support).
    pub fn scatter(&self, x: &[f64]) -> Vec<f64> {
        let b = self.block;
        let mut out = vec![0.0; self.node_to_dof.len() * b];
        for (d, &node) in self.dof_to_node.iter().enumerate() {
            out[node * b..node * b + b].copy_from_slice(&x[d * b..d * b + b]);
        }
        out
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        let b = self.block;
        let mut out = vec![0.0; self.len()];
        for (d, &node) in self.dof_to_node.iter().enumerate() {
            out[d * b..d * b + b].copy_from_slice(&full[node * b..node * b + b]);
        }
        out
    }
}

/// Node-connected components of the dof nodes through elements of `phase`.
/// Returns a component label per dof node and the component count.
pub fn dof_components(grid: &PeriodicGrid, dofs: &DofMap, phase: Phase) -> (Vec<usize>, usize) {
    let mut parent: Vec<usize> = (0..dofs.num_nodes()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for e in 0..grid.num_elements() {
        if grid.element_phase(e) != phase {
            continue;
        }
        let ds: Vec<usize> = grid.element_nodes(e).iter().filter_map(|&nd| dofs.dof(nd)).collect();
        for w in ds.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut label = vec![usize::MAX; dofs.num_nodes()];
    let mut count = 0;
    let mut root_label = vec![usize::MAX; dofs.num_nodes()];
    for i in 0..dofs.num_nodes() {
        let r = find(&mut parent, i);
        if root_label[r] == usize::MAX {
            root_label[r] = count;
            count += 1;
        }
        label[i] = root_label[r];
    }
    (label, count)
}
