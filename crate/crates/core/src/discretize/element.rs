//! Trilinear reference element on the unit cube with 2x2x2 Gauss quadrature.

use std::sync::OnceLock;

use super::grid::LOCAL;

pub struct Reference {
    /// `h[a][b][p][q] = ∫ ∂_p φ_a ∂_q φ_b`
    pub grad_grad: [[[[f64; 3]; 3]; 8]; 8],
    /// `∫ ∇φ_a · ∇φ_b`
    pub stiffness: [[f64; 8]; 8],
    /// `∫ φ_a φ_b`
    pub mass: [[f64; 8]; 8],
    /// `∫ ∂_p φ_a`
    pub grad: [[f64; 3]; 8],
    /// `∫ φ_a`
    pub load: [f64; 8],
}

fn shape(a: usize, xi: [f64; 3]) -> (f64, [f64; 3]) {
    let o = LOCAL[a];
    let f: Vec<(f64, f64)> = (0..3)
        .map(|k| if o[k] == 1 { (xi[k], 1.0) } else { (1.0 - xi[k], -1.0) })
        .collect();
    let v = f[0].0 * f[1].0 * f[2].0;
    let g = [
        f[0].1 * f[1].0 * f[2].0,
        f[0].0 * f[1].1 * f[2].0,
        f[0].0 * f[1].0 * f[2].1,
    ];
    (v, g)
}

fn build() -> Reference {
    let g = 0.5 / 3f64.sqrt();
    let pts = [0.5 - g, 0.5 + g];
    let w = 0.125;
    let mut r = Reference {
        grad_grad: [[[[0.0; 3]; 3]; 8]; 8],
        stiffness: [[0.0; 8]; 8],
        mass: [[0.0; 8]; 8],
        grad: [[0.0; 3]; 8],
        load: [0.0; 8],
    };
    for &x in &pts {
        for &y in &pts {
            for &z in &pts {
                let s: Vec<_> = (0..8).map(|a| shape(a, [x, y, z])).collect();
                for a in 0..8 {
                    r.load[a] += w * s[a].0;
                    for p in 0..3 {
                        r.grad[a][p] += w * s[a].1[p];
                    }
                    for b in 0..8 {
                        r.mass[a][b] += w * s[a].0 * s[b].0;
                        for p in 0..3 {
                            for q in 0..3 {
                                r.grad_grad[a][b][p][q] += w * s[a].1[p] * s[b].1[q];
                            }
                        }
                    }
                }
            }
        }
    }
    for a in 0..8 {
        for b in 0..8 {
            r.stiffness[a][b] = (0..3).map(|p| r.grad_grad[a][b][p][p]).sum();
        }
    }
    r
}

pub fn reference() -> &'static Reference {
    static REF: OnceLock<Reference> = OnceLock::new();
    REF.get_or_init(build)
}

/// Element matrix of `λ0 D(u):D(v) + η0 div u div v` for an element of size `h`,
/// row-major 24x24 with index `3a + p`.
pub fn elastic_matrix(lambda0: f64, eta0: f64, h: f64) -> Vec<f64> {
    let r = reference();
    let mut k = vec![0.0; 24 * 24];
    for a in 0..8 {
        for b in 0..8 {
            for p in 0..3 {
                for q in 0..3 {
                    let delta = if p == q { r.stiffness[a][b] } else { 0.0 };
                    let v = lambda0 * 0.5 * (delta + r.grad_grad[a][b][q][p]) + eta0 * r.grad_grad[a][b][p][q];
                    k[(3 * a + p) * 24 + 3 * b + q] = h * v;
                }
            }
        }
    }
    k
}

pub fn scalar_stiffness(h: f64) -> Vec<f64> {
    let r = reference();
    r.stiffness.iter().flatten().map(|v| h * v).collect()
}

pub fn scalar_mass(h: f64) -> Vec<f64> {
    let r = reference();
    r.mass.iter().flatten().map(|v| h * h * h * v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_integrals() {
        let r = reference();
        let total: f64 = r.mass.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-14);
        for a in 0..8 {
            assert!((r.load[a] - 0.125).abs() < 1e-15);
            for p in 0..3 {
                let sign = if LOCAL[a][p] == 1 { 1.0 } else { -1.0 };
                assert!((r.grad[a][p] - 0.25 * sign).abs() < 1e-15);
            }
            let row: f64 = r.stiffness[a].iter().sum();
            assert!(row.abs() < 1e-14);
        }
        assert!((r.stiffness[0][0] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn elastic_matrix_symmetric_with_translation_kernel() {
        let k = elastic_matrix(1.3, 0.7, 0.25);
        for i in 0..24 {
            for j in 0..24 {
                assert!((k[i * 24 + j] - k[j * 24 + i]).abs() < 1e-14);
            }
            for p in 0..3 {
                let s: f64 = (0..8).map(|b| k[i * 24 + 3 * b + p]).sum();
                assert!(s.abs() < 1e-13);
            }
        }
    }
}
