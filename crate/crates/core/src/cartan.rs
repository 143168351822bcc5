//! The Cartan complex `Ω_eq^k = ⊕_i t^i ⊗ Ω_G^{k-2i}` over a backend.
//!
//! Each total degree is a finite direct sum of blocks `(i, j)` with
//! `2i + j = k`, `0 ≤ j ≤ n`, ordered by ascending t-power. Operators are
//! assembled blockwise from the backend matrices; adjoints are always the
//! exact mass adjoints, so Laplacians are symmetric positive semi-definite
//! in the block-diagonal mass inner product.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sprs::TriMat;

use crate::backend::BackendMatrices;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub t_power: usize,
    pub form_degree: usize,
    pub dim: usize,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqDegreeSpace {
    pub k: usize,
    pub blocks: Vec<Block>,
    pub dim: usize,
    /// Block-diagonal mass, `⟨t^i⊗ω, t^j⊗η⟩ = δ_ij ⟨ω, η⟩`.
    pub mass: Vec<f64>,
}

impl EqDegreeSpace {
    pub fn block_index(&self, t_power: usize, form_degree: usize) -> Option<usize> {
        self.blocks
            .iter()
            .position(|b| b.t_power == t_power && b.form_degree == form_degree)
    }

    pub fn block(&self, t_power: usize, form_degree: usize) -> Option<&Block> {
        self.block_index(t_power, form_degree).map(|p| &self.blocks[p])
    }

    fn empty() -> Self {
        Self {
            k: 0,
            blocks: Vec::new(),
            dim: 0,
            mass: Vec::new(),
        }
    }
}

pub fn degree_space(backend: &BackendMatrices, k: usize) -> EqDegreeSpace {
    let mut blocks = Vec::new();
    let mut mass = Vec::new();
    let mut offset = 0;
    for i in 0..=k / 2 {
        let j = k - 2 * i;
        if j > backend.n {
            continue;
        }
        let dim = backend.dim(j as isize);
        blocks.push(Block {
            t_power: i,
            form_degree: j,
            dim,
            offset,
        });
        mass.extend_from_slice(&backend.mass[j]);
        offset += dim;
    }
    EqDegreeSpace {
        k,
        blocks,
        dim: offset,
        mass,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EqForm {
    pub space: EqDegreeSpace,
    pub coeffs: Vec<f64>,
}

impl EqForm {
    pub fn new(space: EqDegreeSpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim {
            return Err(Error::Validation(format!(
                "coefficient length {} does not match space dimension {}",
                coeffs.len(),
                space.dim
            )));
        }
        Ok(Self { space, coeffs })
    }

    pub fn zeros(space: EqDegreeSpace) -> Self {
        let coeffs = vec![0.0; space.dim];
        Self { space, coeffs }
    }

    pub fn block(&self, t_power: usize, form_degree: usize) -> Option<&[f64]> {
        self.space
            .block(t_power, form_degree)
            .map(|b| &self.coeffs[b.offset..b.offset + b.dim])
    }

    pub fn block_mut(&mut self, t_power: usize, form_degree: usize) -> Option<&mut [f64]> {
        let b = *self.space.block(t_power, form_degree)?;
        Some(&mut self.coeffs[b.offset..b.offset + b.dim])
    }

    pub fn norm(&self) -> f64 {
        linalg::mass_dot(&self.coeffs, &self.coeffs, &self.space.mass).sqrt()
    }

    pub fn inner(&self, other: &EqForm) -> f64 {
        linalg::mass_dot(&self.coeffs, &other.coeffs, &self.space.mass)
    }
}

#[derive(Clone, Debug)]
pub struct EqOperator {
    pub domain: EqDegreeSpace,
    pub codomain: EqDegreeSpace,
    pub matrix: Mat,
}

impl EqOperator {
    pub fn apply(&self, x: &EqForm) -> Result<EqForm> {
        if x.space.dim != self.domain.dim {
            return Err(Error::Validation("form does not belong to the domain".to_string()));
        }
        Ok(EqForm {
            space: self.codomain.clone(),
            coeffs: linalg::matvec(&self.matrix, &x.coeffs),
        })
    }

    /// Sub-matrix from domain block `(i, j)` to codomain block `(i', j')`.
    pub fn block(&self, cod: (usize, usize), dom: (usize, usize)) -> Option<Mat> {
        let c = *self.codomain.block(cod.0, cod.1)?;
        let d = *self.domain.block(dom.0, dom.1)?;
        let mut t = TriMat::new((c.dim, d.dim));
        for r in 0..c.dim {
            if let Some(row) = self.matrix.outer_view(c.offset + r) {
                for (col, &v) in row.iter() {
                    if col >= d.offset && col < d.offset + d.dim {
                        t.add_triplet(r, col - d.offset, v);
                    }
                }
            }
        }
        Some(t.to_csr())
    }

    /// Exact adjoint in the block mass inner products.
    pub fn adjoint(&self) -> EqOperator {
        EqOperator {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            matrix: linalg::adjoint(&self.matrix, &self.domain.mass, &self.codomain.mass),
        }
    }

    pub fn compose(&self, inner: &EqOperator) -> EqOperator {
        EqOperator {
            domain: inner.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: linalg::mul(&self.matrix, &inner.matrix),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }
}

/// `(codomain block, domain block, matrix)`, blocks as `(t-power, form degree)`.
type BlockPart<'a> = ((usize, usize), (usize, usize), &'a Mat);

fn assemble(
    domain: EqDegreeSpace,
    codomain: EqDegreeSpace,
    parts: &[BlockPart<'_>],
) -> Result<EqOperator> {
    let mut t = TriMat::new((codomain.dim, domain.dim));
    for &(cod, dom, m) in parts {
        let c = codomain.block(cod.0, cod.1).ok_or_else(|| Error::Assembly {
            block: format!("{dom:?}->{cod:?}"),
            detail: "codomain block absent".to_string(),
        })?;
        let d = domain.block(dom.0, dom.1).ok_or_else(|| Error::Assembly {
            block: format!("{dom:?}->{cod:?}"),
            detail: "domain block absent".to_string(),
        })?;
        if m.shape() != (c.dim, d.dim) {
            return Err(Error::Assembly {
                block: format!("t^{}Ω^{} -> t^{}Ω^{}", dom.0, dom.1, cod.0, cod.1),
                detail: format!(
                    "backend matrix has shape {:?}, expected {:?}",
                    m.shape(),
                    (c.dim, d.dim)
                ),
            });
        }
        for (r, row) in m.outer_iterator().enumerate() {
            for (col, &v) in row.iter() {
                t.add_triplet(c.offset + r, d.offset + col, v);
            }
        }
    }
    Ok(EqOperator {
        domain,
        codomain,
        matrix: t.to_csr(),
    })
}

/// `d_eq = d + t·i_v : Ω_eq^k → Ω_eq^{k+1}`.
pub fn build_deq(backend: &BackendMatrices, k: usize) -> Result<EqOperator> {
    let dom = degree_space(backend, k);
    let cod = degree_space(backend, k + 1);
    let n = backend.n;
    let mut parts = Vec::new();
    for b in &dom.blocks {
        let (i, j) = (b.t_power, b.form_degree);
        if j < n {
            parts.push(((i, j + 1), (i, j), &backend.d[j]));
        }
        if j >= 1 {
            parts.push(((i + 1, j - 1), (i, j), &backend.iv[j]));
        }
    }
    assemble(dom, cod, &parts)
}

/// `d_eq* : Ω_eq^k → Ω_eq^{k-1}`, the exact mass adjoint of `d_eq^{k-1}`.
pub fn build_deq_star(backend: &BackendMatrices, k: usize) -> Result<EqOperator> {
    if k == 0 {
        let dom = degree_space(backend, 0);
        let dim = dom.dim;
        return Ok(EqOperator {
            domain: dom,
            codomain: EqDegreeSpace::empty(),
            matrix: linalg::zeros(0, dim),
        });
    }
    check_mass(backend)?;
    Ok(build_deq(backend, k - 1)?.adjoint())
}

fn check_mass(backend: &BackendMatrices) -> Result<()> {
    if backend.mass.iter().flatten().any(|&m| !(m > 0.0)) {
        return Err(Error::Config("mass matrix is not positive".to_string()));
    }
    Ok(())
}

/// `df∧` on the Cartan complex (block diagonal in the t-power).
pub fn build_dfwedge(backend: &BackendMatrices, k: usize) -> Result<EqOperator> {
    let dom = degree_space(backend, k);
    let cod = degree_space(backend, k + 1);
    let mut parts = Vec::new();
    for b in &dom.blocks {
        let (i, j) = (b.t_power, b.form_degree);
        if j < backend.n {
            parts.push(((i, j + 1), (i, j), &backend.dfwedge[j]));
        }
    }
    assemble(dom, cod, &parts)
}

/// `d_eq,s = d_eq + s df∧ : Ω_eq^k → Ω_eq^{k+1}`.
pub fn deformed_deq(backend: &BackendMatrices, s: f64, k: usize) -> Result<EqOperator> {
    check_s(s)?;
    let d = build_deq(backend, k)?;
    if s == 0.0 {
        return Ok(d);
    }
    let w = build_dfwedge(backend, k)?;
    Ok(EqOperator {
        matrix: linalg::add(&d.matrix, &linalg::scale(&w.matrix, s)),
        ..d
    })
}

fn check_s(s: f64) -> Result<()> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::Config(format!("deformation parameter s = {s} must be ≥ 0")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct DeformedOperators {
    /// `Ω_eq^k → Ω_eq^{k+1}`
    pub d: EqOperator,
    /// `Ω_eq^{k+1} → Ω_eq^k`
    pub d_star: EqOperator,
    /// `Ω_eq^k → Ω_eq^k`
    pub laplacian: EqOperator,
}

pub fn build_deformed(backend: &BackendMatrices, s: f64, k: usize) -> Result<DeformedOperators> {
    check_mass(backend)?;
    let d = deformed_deq(backend, s, k)?;
    let d_star = d.adjoint();
    let mut lap = d_star.compose(&d);
    if k >= 1 {
        let down = deformed_deq(backend, s, k - 1)?;
        let up = down.compose(&down.adjoint());
        lap.matrix = linalg::add(&lap.matrix, &up.matrix);
    }
    Ok(DeformedOperators {
        d,
        d_star,
        laplacian: lap,
    })
}

/// `Δ_eq,s^k = d_eq,s* d_eq,s + d_eq,s d_eq,s*`.
pub fn deformed_laplacian(backend: &BackendMatrices, s: f64, k: usize) -> Result<EqOperator> {
    Ok(build_deformed(backend, s, k)?.laplacian)
}

pub fn build_delta_eq(backend: &BackendMatrices, k: usize) -> Result<EqOperator> {
    deformed_laplacian(backend, 0.0, k)
}

/// Multiplication by `|df|²`, block diagonal.
pub fn build_mult_df2(backend: &BackendMatrices, k: usize) -> Result<EqOperator> {
    let space = degree_space(backend, k);
    let parts: Vec<_> = space
        .blocks
        .iter()
        .map(|b| {
            let key = (b.t_power, b.form_degree);
            (key, key, &backend.mult_df2[b.form_degree])
        })
        .collect();
    assemble(space.clone(), space, &parts)
}

/// Equivariant Clifford Hessian: the linear-in-s term of `Δ_eq,s`.
///
/// On the diagonal blocks it is the ordinary Clifford Hessian; the off-
/// diagonal pieces `{i_v, df⌟}` and `{v*∧, df∧}` vanish in the continuum
/// but are kept so that the expansion holds exactly on the grid.
pub fn build_hessian_eq(backend: &BackendMatrices, k: usize) -> Result<EqOperator> {
    let space = degree_space(backend, k);
    let mut parts = Vec::new();
    for b in &space.blocks {
        let (i, j) = (b.t_power, b.form_degree);
        parts.push(((i, j), (i, j), &backend.cliff_hess[j]));
        if j >= 2 {
            parts.push(((i + 1, j - 2), (i, j), &backend.cross_iv[j]));
        }
        if i >= 1 && j + 2 <= backend.n {
            parts.push(((i - 1, j + 2), (i, j), &backend.cross_vstar[j]));
        }
    }
    assemble(space.clone(), space, &parts)
}

fn random_unit(rng: &mut ChaCha8Rng, mass: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = mass.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let nrm = linalg::mass_dot(&x, &x, mass).sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    x
}

/// Relative residual of `Δ_eq,s = Δ_eq + s²|df|² + s H_f`, probed on
/// `samples` random unit vectors (at least 20).
pub fn expansion_residual(backend: &BackendMatrices, s: f64, k: usize, samples: usize) -> Result<f64> {
    let lhs = deformed_laplacian(backend, s, k)?;
    let lap = build_delta_eq(backend, k)?;
    let df2 = build_mult_df2(backend, k)?;
    let hess = build_hessian_eq(backend, k)?;
    let rhs = linalg::add(
        &lap.matrix,
        &linalg::add(
            &linalg::scale(&df2.matrix, s * s),
            &linalg::scale(&hess.matrix, s),
        ),
    );
    let diff = &lhs.matrix - &rhs;
    let mass = &lhs.domain.mass;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut num, mut den) = (0.0_f64, 0.0_f64);
    for _ in 0..samples.max(20) {
        let x = random_unit(&mut rng, mass);
        let e = linalg::matvec(&diff, &x);
        let a = linalg::matvec(&lhs.matrix, &x);
        num = num.max(linalg::mass_dot(&e, &e, mass).sqrt());
        den = den.max(linalg::mass_dot(&a, &a, mass).sqrt());
    }
    Ok(if num == 0.0 { 0.0 } else { num / den })
}

/// Multiplication by `t`: `Ω_eq^k → Ω_eq^{k+2}`, identity on each block.
pub fn t_shift(backend: &BackendMatrices, k: usize) -> Result<EqOperator> {
    let dom = degree_space(backend, k);
    let cod = degree_space(backend, k + 2);
    let ids: Vec<Mat> = dom.blocks.iter().map(|b| linalg::identity(b.dim)).collect();
    let parts: Vec<_> = dom
        .blocks
        .iter()
        .zip(&ids)
        .map(|(b, id)| ((b.t_power + 1, b.form_degree), (b.t_power, b.form_degree), id))
        .collect();
    assemble(dom, cod, &parts)
}

/// Whether `t: Ω_eq^k → Ω_eq^{k+2}` is a bijection of blocks (`k ≥ n-1`).
pub fn t_shift_is_bijective(backend: &BackendMatrices, k: usize) -> bool {
    degree_space(backend, k + 2).block(0, k + 2).is_none()
}

/// The equivariant de Rham operator on `X ⊕ Y = Ω_eq^n ⊕ Ω_eq^{n+1}`.
#[derive(Clone, Debug)]
pub struct EquivariantDeRham {
    /// `X → Y`: `d_eq + t·d_eq*`
    pub forward: EqOperator,
    /// `Y → X`: exact adjoint of `forward`
    pub backward: EqOperator,
    /// Full operator, rows/cols ordered `(X, Y)`.
    pub matrix: Mat,
    pub mass: Vec<f64>,
}

pub fn build_equivariant_de_rham(backend: &BackendMatrices) -> Result<EquivariantDeRham> {
    let n = backend.n;
    let d = build_deq(backend, n)?;
    let ds = build_deq_star(backend, n)?;
    let t = t_shift(backend, n - 1)?;
    let mut forward = d.clone();
    forward.matrix = linalg::add(&d.matrix, &t.compose(&ds).matrix);
    let backward = forward.adjoint();
    let (nx, ny) = (forward.domain.dim, forward.codomain.dim);
    let mut tri = TriMat::new((nx + ny, nx + ny));
    for (r, row) in backward.matrix.outer_iterator().enumerate() {
        for (c, &v) in row.iter() {
            tri.add_triplet(r, nx + c, v);
        }
    }
    for (r, row) in forward.matrix.outer_iterator().enumerate() {
        for (c, &v) in row.iter() {
            tri.add_triplet(nx + r, c, v);
        }
    }
    let mut mass = forward.domain.mass.clone();
    mass.extend_from_slice(&forward.codomain.mass);
    Ok(EquivariantDeRham {
        forward,
        backward,
        matrix: tri.to_csr(),
        mass,
    })
}

/// Relative blockwise error of `D̄_eq² = Δ_eq` on `Ω_eq^n` and `Ω_eq^{n+1}`.
pub fn de_rham_square_residual(backend: &BackendMatrices, op: &EquivariantDeRham) -> Result<f64> {
    let n = backend.n;
    let mut worst = 0.0_f64;
    for (sq, k) in [
        (op.backward.compose(&op.forward), n),
        (op.forward.compose(&op.backward), n + 1),
    ] {
        let lap = build_delta_eq(backend, k)?;
        let diff = &sq.matrix - &lap.matrix;
        let scale = linalg::max_abs(&lap.matrix).max(f64::MIN_POSITIVE);
        worst = worst.max(linalg::max_abs(&diff) / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{build_backend, Geometry, InvariantFunction, RevolutionProfile, TrigTerm};

    fn circle(m: u32) -> BackendMatrices {
        build_backend(&Geometry::Circle { weight: m }, &InvariantFunction::Constant { value: 0.0 })
            .unwrap()
    }

    fn sphere() -> BackendMatrices {
        let f = InvariantFunction::Trig {
            terms: vec![InvariantFunction::cos(1.0, 1.0)],
        };
        build_backend(&Geometry::Revolution(RevolutionProfile::sphere(1.0, 1, 48)), &f).unwrap()
    }

    fn torus() -> BackendMatrices {
        let f = InvariantFunction::Trig {
            terms: vec![TrigTerm {
                cos: 0.0,
                sin: 1.0,
                freq: 1.0,
            }],
        };
        build_backend(&Geometry::Revolution(RevolutionProfile::torus(1.0, 3.0, 1, 48)), &f)
            .unwrap()
    }

    fn pairs(s: &EqDegreeSpace) -> Vec<(usize, usize)> {
        s.blocks.iter().map(|b| (b.t_power, b.form_degree)).collect()
    }

    #[test]
    fn block_enumeration() {
        let b = sphere();
        assert_eq!(pairs(&degree_space(&b, 0)), vec![(0, 0)]);
        assert_eq!(pairs(&degree_space(&b, 2)), vec![(0, 2), (1, 0)]);
        assert_eq!(pairs(&degree_space(&b, 3)), vec![(1, 1)]);
        assert_eq!(pairs(&degree_space(&b, 5)), vec![(2, 1)]);
        let s4 = degree_space(&b, 4);
        assert_eq!(s4.dim, b.dim(2) + b.dim(0));
    }

    #[test]
    fn circle_deq_maps_dpsi_to_t_times_m() {
        let b = circle(3);
        let d1 = to_dense_op(&build_deq(&b, 1).unwrap());
        // Ω^1 = {dψ}, Ω^2 = {t⊗1}
        assert_eq!((d1.nrows(), d1.ncols()), (1, 1));
        assert_eq!(d1[(0, 0)], 3.0);
        let d0 = to_dense_op(&build_deq(&b, 0).unwrap());
        assert_eq!(d0.amax(), 0.0);
    }

    #[test]
    fn circle_deq_star_has_vstar_block() {
        let b = circle(2);
        let ds = build_deq_star(&b, 2).unwrap();
        let blk = linalg::to_dense(&ds.block((0, 1), (1, 0)).unwrap());
        assert_eq!(blk[(0, 0)], 2.0);
    }

    #[test]
    fn circle_laplacian_degree_one_is_m_squared() {
        for m in [1, 2, 3] {
            let lap = to_dense_op(&build_delta_eq(&circle(m), 1).unwrap());
            assert_eq!(lap[(0, 0)], (m * m) as f64);
        }
        assert_eq!(to_dense_op(&build_delta_eq(&circle(2), 0).unwrap()).amax(), 0.0);
    }

    fn to_dense_op(op: &EqOperator) -> nalgebra::DMatrix<f64> {
        linalg::to_dense(&op.matrix)
    }

    #[test]
    fn deq_squares_to_zero() {
        for b in [sphere(), torus(), circle(2)] {
            for k in 0..6 {
                let a = build_deq(&b, k).unwrap();
                let c = build_deq(&b, k + 1).unwrap();
                assert_eq!(linalg::max_abs(&c.compose(&a).matrix), 0.0, "k={k}");
            }
        }
    }

    #[test]
    fn deformed_deq_squares_to_zero() {
        let b = sphere();
        for k in 0..5 {
            let a = deformed_deq(&b, 7.5, k).unwrap();
            let c = deformed_deq(&b, 7.5, k + 1).unwrap();
            let r = linalg::max_abs(&c.compose(&a).matrix);
            assert!(r < 1e-10 * b.scale().powi(2), "k={k}: {r}");
        }
    }

    #[test]
    fn deq_star_blocks_match_backend_adjoints() {
        let b = sphere();
        let ds = build_deq_star(&b, 3).unwrap();
        // (1,1) -> (1,0) is d*, (1,1) -> (0,2) is v*∧
        let dstar = linalg::adjoint(&b.d[0], &b.mass[0], &b.mass[1]);
        let got = ds.block((1, 0), (1, 1)).unwrap();
        assert_eq!(linalg::max_abs(&(&got - &dstar)), 0.0);
        let got = ds.block((0, 2), (1, 1)).unwrap();
        assert_eq!(linalg::max_abs(&(&got - &b.vstar[1])), 0.0);
        // no v* term out of the t^0 block
        let ds2 = build_deq_star(&b, 2).unwrap();
        assert!(ds2.codomain.block(0, 1).is_some());
        let blk = ds2.block((0, 1), (0, 2)).unwrap();
        let dstar1 = linalg::adjoint(&b.d[1], &b.mass[1], &b.mass[2]);
        assert_eq!(linalg::max_abs(&(&blk - &dstar1)), 0.0);
    }

    #[test]
    fn zero_deformation_is_bit_identical() {
        let b = torus();
        for k in 0..4 {
            let a = build_delta_eq(&b, k).unwrap();
            let c = deformed_laplacian(&b, 0.0, k).unwrap();
            assert_eq!(a.matrix, c.matrix);
        }
    }

    #[test]
    fn expansion_identity_holds() {
        for b in [sphere(), torus()] {
            for k in 0..5 {
                for s in [0.0, 1.0, 8.0] {
                    let r = expansion_residual(&b, s, k, 20).unwrap();
                    assert!(r <= 1e-10, "k={k} s={s}: {r}");
                }
            }
        }
    }

    #[test]
    fn constant_function_leaves_laplacian_unchanged() {
        let f = InvariantFunction::Constant { value: 2.0 };
        let b = build_backend(&Geometry::Revolution(RevolutionProfile::sphere(1.0, 1, 32)), &f)
            .unwrap();
        let a = build_delta_eq(&b, 2).unwrap();
        let c = deformed_laplacian(&b, 5.0, 2).unwrap();
        assert_eq!(linalg::max_abs(&(&a.matrix - &c.matrix)), 0.0);
        assert_eq!(expansion_residual(&b, 5.0, 2, 20).unwrap(), 0.0);
    }

    #[test]
    fn negative_s_is_rejected() {
        assert!(matches!(deformed_deq(&sphere(), -1.0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn t_shift_bijectivity() {
        let b = sphere();
        assert!(!t_shift_is_bijective(&b, 0));
        assert!(t_shift_is_bijective(&b, 1));
        assert!(t_shift_is_bijective(&b, 2));
        let t = t_shift(&b, 2).unwrap();
        assert_eq!(t.domain.dim, t.codomain.dim);
    }

    #[test]
    fn de_rham_operator_squares_to_laplacian() {
        for b in [sphere(), torus(), circle(3)] {
            let op = build_equivariant_de_rham(&b).unwrap();
            let r = de_rham_square_residual(&b, &op).unwrap();
            assert!(r <= 1e-10, "{r}");
            // self-adjoint in the mass inner product: M·D̄ is symmetric
            let md = linalg::mul(&linalg::diag(&op.mass), &op.matrix);
            let asym = linalg::max_abs(&(&md - &linalg::transpose(&md)));
            assert!(asym <= 1e-12 * linalg::max_abs(&md), "{asym}");
        }
    }
}
