//! Small sparse/dense helpers shared by the operator builders and solvers.
//!
//! All operators are real CSR matrices. Inner products are diagonal
//! ("lumped") mass matrices stored as plain vectors, so adjoints reduce to
//! a scaled transpose.

use nalgebra::DMatrix;
use sprs::{CsMat, TriMat};

pub type Mat = CsMat<f64>;

pub fn zeros(rows: usize, cols: usize) -> Mat {
    CsMat::zero((rows, cols))
}

pub fn diag(values: &[f64]) -> Mat {
    let n = values.len();
    let mut t = TriMat::with_capacity((n, n), n);
    for (i, &v) in values.iter().enumerate() {
        t.add_triplet(i, i, v);
    }
    t.to_csr()
}

pub fn identity(n: usize) -> Mat {
    CsMat::eye(n)
}

pub fn matvec(a: &Mat, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.cols(), x.len(), "matvec shape mismatch");
    a.outer_iterator()
        .map(|row| row.iter().map(|(j, v)| v * x[j]).sum())
        .collect()
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a + b
}

pub fn scale(a: &Mat, factor: f64) -> Mat {
    a.map(|v| v * factor)
}

pub fn mul(a: &Mat, b: &Mat) -> Mat {
    a * b
}

pub fn transpose(a: &Mat) -> Mat {
    a.transpose_view().to_csr()
}

/// Adjoint of `a: dom -> cod` with respect to diagonal inner products on
/// both sides: `M_dom^{-1} a^T M_cod`.
pub fn adjoint(a: &Mat, mass_dom: &[f64], mass_cod: &[f64]) -> Mat {
    assert_eq!(a.cols(), mass_dom.len());
    assert_eq!(a.rows(), mass_cod.len());
    let mut t = TriMat::with_capacity((a.cols(), a.rows()), a.nnz());
    for (r, row) in a.outer_iterator().enumerate() {
        for (c, &v) in row.iter() {
            t.add_triplet(c, r, v * mass_cod[r] / mass_dom[c]);
        }
    }
    t.to_csr()
}

pub fn max_abs(a: &Mat) -> f64 {
    a.data().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Maximum absolute row sum; an upper bound for the spectral norm of a
/// symmetric matrix.
pub fn norm_inf(a: &Mat) -> f64 {
    a.outer_iterator()
        .map(|row| row.iter().map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn to_dense(a: &Mat) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.rows(), a.cols());
    for (r, row) in a.outer_iterator().enumerate() {
        for (c, &v) in row.iter() {
            m[(r, c)] += v;
        }
    }
    m
}

/// `M^{1/2} a M^{-1/2}`, symmetrised exactly. For `a` self-adjoint in the
/// mass inner product this is the equivalent Euclidean-symmetric matrix.
pub fn mass_symmetrize(a: &Mat, mass: &[f64]) -> Mat {
    let sq: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    let mut t = TriMat::with_capacity(a.shape(), a.nnz());
    for (r, row) in a.outer_iterator().enumerate() {
        for (c, &v) in row.iter() {
            t.add_triplet(r, c, v * sq[r] / sq[c]);
        }
    }
    let s: Mat = t.to_csr();
    let st = transpose(&s);
    scale(&(&s + &st), 0.5)
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn mass_dot(x: &[f64], y: &[f64], mass: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(mass)
        .map(|((a, b), m)| a * b * m)
        .sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Gauss–Legendre integral of `g` over `[lo, hi]` with four nodes.
pub fn gauss4(lo: f64, hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    const X: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const W: [f64; 4] = [
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ];
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    X.iter()
        .zip(W.iter())
        .map(|(x, w)| w * g(mid + half * x))
        .sum::<f64>()
        * half
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Mat {
        let mut t = TriMat::new((2, 3));
        t.add_triplet(0, 0, 1.0);
        t.add_triplet(0, 2, -2.0);
        t.add_triplet(1, 1, 3.0);
        t.to_csr()
    }

    #[test]
    fn adjoint_satisfies_weighted_identity() {
        let a = sample();
        let m_dom = [1.0, 2.0, 0.5];
        let m_cod = [3.0, 0.25];
        let b = adjoint(&a, &m_dom, &m_cod);
        let x = [0.3, -1.0, 2.0];
        let y = [1.5, -0.7];
        let lhs = mass_dot(&matvec(&a, &x), &y, &m_cod);
        let rhs = mass_dot(&x, &matvec(&b, &y), &m_dom);
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn gauss4_is_exact_for_cubics() {
        let v = gauss4(0.0, 2.0, |x| x * x * x - x);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn mass_symmetrize_of_selfadjoint_is_symmetric() {
        let a = sample();
        let m0 = [1.0, 2.0, 0.5];
        let m1 = [3.0, 0.25];
        let lap = mul(&adjoint(&a, &m0, &m1), &a);
        let s = to_dense(&mass_symmetrize(&lap, &m0));
        assert!((&s - s.transpose()).amax() == 0.0);
    }
}
