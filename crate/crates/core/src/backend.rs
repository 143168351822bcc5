//! Discretised calculus of S¹-invariant forms.
//!
//! A surface of revolution carries the metric `dθ² + a(θ)² dψ²` and the
//! action `ψ ↦ ψ + mφ`, so `v = m ∂ψ`. Invariant forms have ψ-independent
//! coefficients:
//!
//! ```text
//! ω = u(θ) + g(θ) dθ + h(θ) dψ + w(θ) dθ∧dψ
//! ```
//!
//! `u` and `h` live on grid nodes, `g` and `w` on the staggered half nodes.
//! Every occurrence of ∂θ uses one difference stencil, so `d² = 0`,
//! `i_v² = 0` and `d i_v + i_v d = 0` hold exactly, not just to
//! truncation order. At a pole `h` is pinned to zero (odd extension) while
//! `u` keeps its node (even extension); clamped ends pin both.
//!
//! Two auxiliary geometries share the same contract: the circle acting on
//! itself (`Ω_G = span{1, dψ}`) and a line segment with the trivial action.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use sprs::TriMat;

/// Boundary behaviour of one end of the θ interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndKind {
    /// Orbit radius collapses to a fixed point of the action.
    Pole,
    /// The interval closes up on itself.
    Periodic,
    /// Truncated end with natural (absolute) boundary conditions.
    Free,
    /// Truncated end with all tangential components pinned (relative).
    Clamped,
}

/// Orbit radius `a(θ)` of a surface of revolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Radius {
    /// Round sphere, θ is arc length: `a = R sin(θ/R)`.
    Sphere { radius: f64 },
    /// Torus of revolution, θ is arc length on the tube: `a = R + r cos(θ/r)`.
    Torus { tube: f64, center: f64 },
    /// Flat cylinder `a ≡ ρ`.
    Cylinder { radius: f64 },
    /// Euclidean plane in polar coordinates, `a = θ`.
    Plane,
}

impl Radius {
    pub fn value(&self, theta: f64) -> f64 {
        match *self {
            Radius::Sphere { radius } => radius * (theta / radius).sin(),
            Radius::Torus { tube, center } => center + tube * (theta / tube).cos(),
            Radius::Cylinder { radius } => radius,
            Radius::Plane => theta,
        }
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        match *self {
            Radius::Sphere { radius } => (theta / radius).cos(),
            Radius::Torus { tube, .. } => -(theta / tube).sin(),
            Radius::Cylinder { .. } => 0.0,
            Radius::Plane => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevolutionProfile {
    pub theta_start: f64,
    pub theta_end: f64,
    pub start: EndKind,
    pub end: EndKind,
    pub radius: Radius,
    /// Action speed `m`, `v = m ∂ψ`.
    pub weight: u32,
    /// Number of grid cells.
    pub grid: usize,
}

impl RevolutionProfile {
    pub fn sphere(radius: f64, weight: u32, grid: usize) -> Self {
        Self {
            theta_start: 0.0,
            theta_end: std::f64::consts::PI * radius,
            start: EndKind::Pole,
            end: EndKind::Pole,
            radius: Radius::Sphere { radius },
            weight,
            grid,
        }
    }

    pub fn torus(tube: f64, center: f64, weight: u32, grid: usize) -> Self {
        Self {
            theta_start: 0.0,
            theta_end: 2.0 * std::f64::consts::PI * tube,
            start: EndKind::Periodic,
            end: EndKind::Periodic,
            radius: Radius::Torus { tube, center },
            weight,
            grid,
        }
    }

    /// Disk of radius `r_max` around a fixed point, polar coordinates.
    pub fn disk(r_max: f64, outer: EndKind, weight: u32, grid: usize) -> Self {
        Self {
            theta_start: 0.0,
            theta_end: r_max,
            start: EndKind::Pole,
            end: outer,
            radius: Radius::Plane,
            weight,
            grid,
        }
    }

    /// `S¹ × [-half_width, half_width]` with orbit radius `radius`.
    pub fn cylinder(radius: f64, half_width: f64, ends: EndKind, weight: u32, grid: usize) -> Self {
        Self {
            theta_start: -half_width,
            theta_end: half_width,
            start: ends,
            end: ends,
            radius: Radius::Cylinder { radius },
            weight,
            grid,
        }
    }

    pub fn step(&self) -> f64 {
        (self.theta_end - self.theta_start) / self.grid as f64
    }

    pub fn is_periodic(&self) -> bool {
        self.start == EndKind::Periodic
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineProfile {
    pub x_start: f64,
    pub x_end: f64,
    pub start: EndKind,
    pub end: EndKind,
    pub grid: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "snake_case")]
pub enum Geometry {
    Revolution(RevolutionProfile),
    /// The circle acting on itself with speed `weight`, metric dψ².
    Circle { weight: u32 },
    /// Segment with the trivial action (no ψ direction).
    Line(LineProfile),
}

impl Geometry {
    pub fn dimension(&self) -> usize {
        match self {
            Geometry::Revolution(_) => 2,
            Geometry::Circle { .. } | Geometry::Line(_) => 1,
        }
    }

    pub fn weight(&self) -> u32 {
        match self {
            Geometry::Revolution(p) => p.weight,
            Geometry::Circle { weight } => *weight,
            Geometry::Line(_) => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub cos: f64,
    pub sin: f64,
    pub freq: f64,
}

/// Invariant function `f(θ)`; no ψ dependence, so `v·f = 0` automatically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InvariantFunction {
    Constant { value: f64 },
    /// `Σ cos_j·cos(freq_j θ) + sin_j·sin(freq_j θ)`
    Trig { terms: Vec<TrigTerm> },
    /// `curvature · (θ - center)² / 2`
    Quadratic { center: f64, curvature: f64 },
}

impl InvariantFunction {
    pub fn cos(freq: f64, amp: f64) -> TrigTerm {
        TrigTerm { cos: amp, sin: 0.0, freq }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            InvariantFunction::Constant { value } => *value,
            InvariantFunction::Trig { terms } => terms
                .iter()
                .map(|t| t.cos * (t.freq * x).cos() + t.sin * (t.freq * x).sin())
                .sum(),
            InvariantFunction::Quadratic { center, curvature } => {
                0.5 * curvature * (x - center).powi(2)
            }
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match self {
            InvariantFunction::Constant { .. } => 0.0,
            InvariantFunction::Trig { terms } => terms
                .iter()
                .map(|t| t.freq * (-t.cos * (t.freq * x).sin() + t.sin * (t.freq * x).cos()))
                .sum(),
            InvariantFunction::Quadratic { center, curvature } => curvature * (x - center),
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match self {
            InvariantFunction::Constant { .. } => 0.0,
            InvariantFunction::Trig { terms } => terms
                .iter()
                .map(|t| {
                    -t.freq * t.freq * (t.cos * (t.freq * x).cos() + t.sin * (t.freq * x).sin())
                })
                .sum(),
            InvariantFunction::Quadratic { curvature, .. } => *curvature,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            InvariantFunction::Constant { .. } => true,
            InvariantFunction::Trig { terms } => terms.iter().all(|t| t.cos == 0.0 && t.sin == 0.0),
            InvariantFunction::Quadratic { curvature, .. } => *curvature == 0.0,
        }
    }
}

/// Which coefficient of an invariant form a degree of freedom carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Function,
    DTheta,
    DPsi,
    Area,
}

impl Component {
    /// Eigenvalues of `(Z_θ, Z_ψ)` in the orthonormal frame `{∂θ, a⁻¹∂ψ}`:
    /// `+1` iff the coframe element divides the monomial.
    pub fn z_signs(self) -> (f64, f64) {
        match self {
            Component::Function => (-1.0, -1.0),
            Component::DTheta => (1.0, -1.0),
            Component::DPsi => (-1.0, 1.0),
            Component::Area => (1.0, 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dof {
    pub component: Component,
    pub theta: f64,
}

/// All discrete operators of the invariant calculus for one model.
///
/// Index `j` runs over form degrees `0..=n`; maps leaving that range are
/// stored with a zero-sized side so that compositions stay well typed.
#[derive(Clone, Debug)]
pub struct BackendMatrices {
    pub n: usize,
    pub weight: u32,
    pub poles: Vec<f64>,
    pub function: InvariantFunction,
    pub geometry: Geometry,
    pub dofs: Vec<Vec<Dof>>,
    pub mass: Vec<Vec<f64>>,
    /// `d_j : Ω^j → Ω^{j+1}`
    pub d: Vec<Mat>,
    /// `iv_j : Ω^j → Ω^{j-1}`
    pub iv: Vec<Mat>,
    /// `vstar_j = v*∧ : Ω^j → Ω^{j+1}`, mass adjoint of `iv_{j+1}`.
    pub vstar: Vec<Mat>,
    /// `dfwedge_j = df∧ : Ω^j → Ω^{j+1}`
    pub dfwedge: Vec<Mat>,
    /// `{df∧, df⌟}` on `Ω^j`; the discrete multiplication by `|df|²`.
    pub mult_df2: Vec<Mat>,
    /// `{d, df⌟} + {d*, df∧}` on `Ω^j`; the discrete Clifford Hessian.
    pub cliff_hess: Vec<Mat>,
    /// `{i_v, df⌟} : Ω^j → Ω^{j-2}`; vanishes in the continuum limit.
    pub cross_iv: Vec<Mat>,
    /// `{v*∧, df∧} : Ω^j → Ω^{j+2}`; vanishes in the continuum limit.
    pub cross_vstar: Vec<Mat>,
}

impl BackendMatrices {
    pub fn dim(&self, j: isize) -> usize {
        if j < 0 || j as usize > self.n {
            0
        } else {
            self.dofs[j as usize].len()
        }
    }

    pub fn scale(&self) -> f64 {
        self.d
            .iter()
            .chain(self.iv.iter())
            .map(linalg::max_abs)
            .fold(1.0, f64::max)
    }

    /// Continuum Clifford Hessian `f''Z_θ + (a'/a) f' Z_ψ` at one dof.
    pub fn pointwise_clifford_hessian(&self, dof: &Dof) -> f64 {
        let f = &self.function;
        let (zt, zp) = dof.component.z_signs();
        match &self.geometry {
            Geometry::Revolution(p) => {
                let a = p.radius.value(dof.theta);
                let da = p.radius.derivative(dof.theta);
                f.d2(dof.theta) * zt + da / a * f.d1(dof.theta) * zp
            }
            Geometry::Line(_) => f.d2(dof.theta) * zt,
            Geometry::Circle { .. } => 0.0,
        }
    }
}

struct Grid {
    step: f64,
    nodes: Vec<f64>,
    halves: Vec<f64>,
    periodic: bool,
    lo: f64,
    hi: f64,
}

impl Grid {
    fn new(lo: f64, hi: f64, cells: usize, periodic: bool) -> Self {
        let step = (hi - lo) / cells as f64;
        let count = if periodic { cells } else { cells + 1 };
        let nodes = (0..count).map(|i| lo + step * i as f64).collect();
        let halves = (0..cells).map(|j| lo + step * (j as f64 + 0.5)).collect();
        Self {
            step,
            nodes,
            halves,
            periodic,
            lo,
            hi,
        }
    }

    fn right_node(&self, half: usize) -> usize {
        if self.periodic {
            (half + 1) % self.nodes.len()
        } else {
            half + 1
        }
    }

    fn dual_cell(&self, node: usize) -> (f64, f64) {
        let x = self.nodes[node];
        let (mut lo, mut hi) = (x - 0.5 * self.step, x + 0.5 * self.step);
        if !self.periodic {
            lo = lo.max(self.lo);
            hi = hi.min(self.hi);
        }
        (lo, hi)
    }

    fn end_kind(&self, node: usize, start: EndKind, end: EndKind) -> Option<EndKind> {
        if self.periodic {
            None
        } else if node == 0 {
            Some(start)
        } else if node + 1 == self.nodes.len() {
            Some(end)
        } else {
            None
        }
    }

    /// Difference (`scale_left = -1/Δ, scale_right = 1/Δ`) or averaging map from
    /// the node subset `included` onto the half nodes, with per-half factors.
    fn stencil(&self, included: &[usize], left: f64, right: f64, factor: &[f64]) -> Mat {
        let mut pos = vec![None; self.nodes.len()];
        for (p, &i) in included.iter().enumerate() {
            pos[i] = Some(p);
        }
        let mut t = TriMat::new((self.halves.len(), included.len()));
        for j in 0..self.halves.len() {
            if let Some(p) = pos[j] {
                t.add_triplet(j, p, left * factor[j]);
            }
            if let Some(p) = pos[self.right_node(j)] {
                t.add_triplet(j, p, right * factor[j]);
            }
        }
        t.to_csr()
    }
}

/// Stack row blocks / column blocks into one matrix.
fn blocks(rows: &[usize], cols: &[usize], parts: &[(usize, usize, &Mat)]) -> Mat {
    let ro: Vec<usize> = offsets(rows);
    let co: Vec<usize> = offsets(cols);
    let mut t = TriMat::new((ro[rows.len()], co[cols.len()]));
    for &(bi, bj, m) in parts {
        assert_eq!(m.shape(), (rows[bi], cols[bj]), "block shape mismatch");
        for (r, row) in m.outer_iterator().enumerate() {
            for (c, &v) in row.iter() {
                t.add_triplet(ro[bi] + r, co[bj] + c, v);
            }
        }
    }
    t.to_csr()
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    out.push(0);
    for s in sizes {
        acc += s;
        out.push(acc);
    }
    out
}

pub fn build_backend(geometry: &Geometry, f: &InvariantFunction) -> Result<BackendMatrices> {
    match geometry {
        Geometry::Revolution(p) => build_revolution(p, f),
        Geometry::Circle { weight } => build_circle(*weight, f),
        Geometry::Line(p) => build_line(p, f),
    }
}

fn check_grid(grid: usize) -> Result<()> {
    if grid < 16 {
        return Err(Error::Config(format!("grid N = {grid} is below the minimum of 16")));
    }
    Ok(())
}

fn check_ends(start: EndKind, end: EndKind) -> Result<()> {
    if (start == EndKind::Periodic) != (end == EndKind::Periodic) {
        return Err(Error::Validation(
            "periodic ends must come in pairs".to_string(),
        ));
    }
    Ok(())
}

fn build_revolution(p: &RevolutionProfile, f: &InvariantFunction) -> Result<BackendMatrices> {
    check_grid(p.grid)?;
    check_ends(p.start, p.end)?;
    if p.weight == 0 {
        return Err(Error::Config("action weight m must be positive".to_string()));
    }
    if !(p.theta_end > p.theta_start) {
        return Err(Error::Config("empty theta interval".to_string()));
    }
    let a = |x: f64| p.radius.value(x);
    let periodic = p.is_periodic();
    let grid = Grid::new(p.theta_start, p.theta_end, p.grid, periodic);

    let mut poles = Vec::new();
    for (x, kind, sign) in [(p.theta_start, p.start, 1.0), (p.theta_end, p.end, -1.0)] {
        if kind == EndKind::Pole {
            if a(x).abs() > 1e-12 || (p.radius.derivative(x) - sign).abs() > 1e-8 {
                return Err(Error::Validation(format!(
                    "pole at theta = {x} needs a = 0 and a' = {sign}"
                )));
            }
            if f.d1(x).abs() > 1e-10 {
                return Err(Error::Validation(format!(
                    "pole regularity violated: f'({x}) = {:.3e}",
                    f.d1(x)
                )));
            }
            poles.push(x);
        }
    }
    if periodic {
        let (x0, x1) = (p.theta_start, p.theta_end);
        let mismatch = (a(x0) - a(x1)).abs()
            + (p.radius.derivative(x0) - p.radius.derivative(x1)).abs()
            + (f.value(x0) - f.value(x1)).abs()
            + (f.d1(x0) - f.d1(x1)).abs();
        if mismatch > 1e-9 {
            return Err(Error::Validation(
                "periodic ends do not match (profile or function)".to_string(),
            ));
        }
    }

    let mut u_nodes = Vec::new();
    let mut h_nodes = Vec::new();
    for i in 0..grid.nodes.len() {
        let end = grid.end_kind(i, p.start, p.end);
        if end != Some(EndKind::Clamped) {
            u_nodes.push(i);
        }
        if !matches!(end, Some(EndKind::Clamped) | Some(EndKind::Pole)) {
            if a(grid.nodes[i]) <= 0.0 {
                return Err(Error::Validation(format!(
                    "orbit radius a({}) = {} is not positive",
                    grid.nodes[i],
                    a(grid.nodes[i])
                )));
            }
            h_nodes.push(i);
        }
    }
    for &x in &grid.halves {
        if a(x) <= 0.0 {
            return Err(Error::Validation(format!(
                "orbit radius a({x}) = {} is not positive",
                a(x)
            )));
        }
    }

    let dx = grid.step;
    let m = p.weight as f64;
    let nh = grid.halves.len();
    let (nu, nv) = (u_nodes.len(), h_nodes.len());

    let mass_u: Vec<f64> = u_nodes
        .iter()
        .map(|&i| {
            let (lo, hi) = grid.dual_cell(i);
            linalg::gauss4(lo, hi, a)
        })
        .collect();
    let mass_h: Vec<f64> = h_nodes
        .iter()
        .map(|&i| {
            let (lo, hi) = grid.dual_cell(i);
            linalg::gauss4(lo, hi, |x| 1.0 / a(x))
        })
        .collect();
    let mass_g: Vec<f64> = grid.halves.iter().map(|&x| dx * a(x)).collect();
    let mass_w: Vec<f64> = grid.halves.iter().map(|&x| dx / a(x)).collect();

    let ones = vec![1.0; nh];
    let fp: Vec<f64> = grid.halves.iter().map(|&x| f.d1(x)).collect();
    let diff_u = grid.stencil(&u_nodes, -1.0 / dx, 1.0 / dx, &ones);
    let diff_h = grid.stencil(&h_nodes, -1.0 / dx, 1.0 / dx, &ones);
    let avg_u = grid.stencil(&u_nodes, 0.5, 0.5, &fp);
    let avg_h = grid.stencil(&h_nodes, 0.5, 0.5, &fp);

    // h-nodes are a subset of u-nodes; i_v(h dψ) = m h
    let mut embed = TriMat::new((nu, nv));
    {
        let mut upos = vec![usize::MAX; grid.nodes.len()];
        for (q, &i) in u_nodes.iter().enumerate() {
            upos[i] = q;
        }
        for (q, &i) in h_nodes.iter().enumerate() {
            embed.add_triplet(upos[i], q, m);
        }
    }
    let iv_h: Mat = embed.to_csr();
    let iv_w = linalg::scale(&linalg::identity(nh), -m);

    let dims1 = [nh, nv];
    // d_0 : u -> (g, h)
    let d0 = blocks(&dims1, &[nu], &[(0, 0, &diff_u)]);
    // d_1 : (g, h) -> w
    let d1 = blocks(&[nh], &dims1, &[(0, 1, &diff_h)]);
    let d2 = linalg::zeros(0, nh);
    let w0 = blocks(&dims1, &[nu], &[(0, 0, &avg_u)]);
    let w1 = blocks(&[nh], &dims1, &[(0, 1, &avg_h)]);
    let w2 = linalg::zeros(0, nh);
    let iv0 = linalg::zeros(0, nu);
    let iv1 = blocks(&[nu], &dims1, &[(0, 1, &iv_h)]);
    let iv2 = blocks(&dims1, &[nh], &[(0, 0, &iv_w)]);

    let mut dofs0 = Vec::with_capacity(nu);
    for &i in &u_nodes {
        dofs0.push(Dof {
            component: Component::Function,
            theta: grid.nodes[i],
        });
    }
    let mut dofs1: Vec<Dof> = grid
        .halves
        .iter()
        .map(|&x| Dof {
            component: Component::DTheta,
            theta: x,
        })
        .collect();
    dofs1.extend(h_nodes.iter().map(|&i| Dof {
        component: Component::DPsi,
        theta: grid.nodes[i],
    }));
    let dofs2: Vec<Dof> = grid
        .halves
        .iter()
        .map(|&x| Dof {
            component: Component::Area,
            theta: x,
        })
        .collect();

    let mut mass1 = mass_g;
    mass1.extend(mass_h);

    Ok(finish(
        Raw {
            n: 2,
            weight: p.weight,
            poles,
            function: f.clone(),
            geometry: Geometry::Revolution(p.clone()),
            dofs: vec![dofs0, dofs1, dofs2],
            mass: vec![mass_u, mass1, mass_w],
            d: vec![d0, d1, d2],
            iv: vec![iv0, iv1, iv2],
            dfwedge: vec![w0, w1, w2],
        },
    ))
}

fn build_circle(weight: u32, f: &InvariantFunction) -> Result<BackendMatrices> {
    if weight == 0 {
        return Err(Error::Config("action weight m must be positive".to_string()));
    }
    if !f.is_constant() {
        return Err(Error::Config(
            "an invariant function on the circle acting on itself is constant".to_string(),
        ));
    }
    let m = weight as f64;
    let mut iv1 = TriMat::new((1, 1));
    iv1.add_triplet(0, 0, m);
    Ok(finish(Raw {
        n: 1,
        weight,
        poles: Vec::new(),
        function: f.clone(),
        geometry: Geometry::Circle { weight },
        dofs: vec![
            vec![Dof {
                component: Component::Function,
                theta: 0.0,
            }],
            vec![Dof {
                component: Component::DPsi,
                theta: 0.0,
            }],
        ],
        mass: vec![vec![1.0], vec![1.0]],
        d: vec![linalg::zeros(1, 1), linalg::zeros(0, 1)],
        iv: vec![linalg::zeros(0, 1), iv1.to_csr()],
        dfwedge: vec![linalg::zeros(1, 1), linalg::zeros(0, 1)],
    }))
}

fn build_line(p: &LineProfile, f: &InvariantFunction) -> Result<BackendMatrices> {
    check_grid(p.grid)?;
    check_ends(p.start, p.end)?;
    if matches!(p.start, EndKind::Pole) || matches!(p.end, EndKind::Pole) {
        return Err(Error::Config("a line segment has no poles".to_string()));
    }
    let periodic = p.start == EndKind::Periodic;
    let grid = Grid::new(p.x_start, p.x_end, p.grid, periodic);
    let u_nodes: Vec<usize> = (0..grid.nodes.len())
        .filter(|&i| grid.end_kind(i, p.start, p.end) != Some(EndKind::Clamped))
        .collect();
    let nh = grid.halves.len();
    let dx = grid.step;
    let mass_u: Vec<f64> = u_nodes
        .iter()
        .map(|&i| {
            let (lo, hi) = grid.dual_cell(i);
            hi - lo
        })
        .collect();
    let ones = vec![1.0; nh];
    let fp: Vec<f64> = grid.halves.iter().map(|&x| f.d1(x)).collect();
    let d0 = grid.stencil(&u_nodes, -1.0 / dx, 1.0 / dx, &ones);
    let w0 = grid.stencil(&u_nodes, 0.5, 0.5, &fp);
    let nu = u_nodes.len();
    Ok(finish(Raw {
        n: 1,
        weight: 0,
        poles: Vec::new(),
        function: f.clone(),
        geometry: Geometry::Line(p.clone()),
        dofs: vec![
            u_nodes
                .iter()
                .map(|&i| Dof {
                    component: Component::Function,
                    theta: grid.nodes[i],
                })
                .collect(),
            grid.halves
                .iter()
                .map(|&x| Dof {
                    component: Component::DTheta,
                    theta: x,
                })
                .collect(),
        ],
        mass: vec![mass_u, vec![dx; nh]],
        d: vec![d0, linalg::zeros(0, nh)],
        iv: vec![linalg::zeros(0, nu), linalg::zeros(nu, nh)],
        dfwedge: vec![w0, linalg::zeros(0, nh)],
    }))
}

struct Raw {
    n: usize,
    weight: u32,
    poles: Vec<f64>,
    function: InvariantFunction,
    geometry: Geometry,
    dofs: Vec<Vec<Dof>>,
    mass: Vec<Vec<f64>>,
    d: Vec<Mat>,
    iv: Vec<Mat>,
    dfwedge: Vec<Mat>,
}

/// Sum of products `a_1 b_1 + a_2 b_2 + …`, skipping absent factors.
fn sum_products(shape: (usize, usize), terms: &[(Option<&Mat>, Option<&Mat>)]) -> Mat {
    let mut acc = linalg::zeros(shape.0, shape.1);
    for (a, b) in terms {
        if let (Some(a), Some(b)) = (a, b) {
            let p = linalg::mul(a, b);
            assert_eq!(p.shape(), shape);
            acc = linalg::add(&acc, &p);
        }
    }
    acc
}

fn finish(raw: Raw) -> BackendMatrices {
    let n = raw.n;
    let dim = |j: isize| -> usize {
        if j < 0 || j as usize > n {
            0
        } else {
            raw.dofs[j as usize].len()
        }
    };
    // adjoints of maps j -> j+1
    let adj_up = |maps: &Vec<Mat>| -> Vec<Mat> {
        (0..=n)
            .map(|j| {
                if j < n {
                    linalg::adjoint(&maps[j], &raw.mass[j], &raw.mass[j + 1])
                } else {
                    linalg::zeros(dim(j as isize), 0)
                }
            })
            .collect()
    };
    // dstar[j] : Ω^{j+1} -> Ω^j
    let dstar = adj_up(&raw.d);
    let wstar = adj_up(&raw.dfwedge);
    // vstar[j] : Ω^j -> Ω^{j+1} = adjoint of iv[j+1]
    let vstar: Vec<Mat> = (0..=n)
        .map(|j| {
            if j < n {
                linalg::adjoint(&raw.iv[j + 1], &raw.mass[j + 1], &raw.mass[j])
            } else {
                linalg::zeros(0, dim(j as isize))
            }
        })
        .collect();

    let get = |v: &Vec<Mat>, j: isize| -> Option<Mat> {
        if j < 0 || j as usize > n {
            None
        } else {
            Some(v[j as usize].clone())
        }
    };
    // up-maps j-1 -> j exist for j >= 1; down-maps (adjoints) j -> j-1 stored at j-1
    let mut mult_df2 = Vec::new();
    let mut cliff_hess = Vec::new();
    let mut cross_iv = Vec::new();
    let mut cross_vstar = Vec::new();
    for j in 0..=n as isize {
        let sq = (dim(j), dim(j));
        let w_prev = get(&raw.dfwedge, j - 1);
        let ws_prev = get(&wstar, j - 1);
        let w_here = get(&raw.dfwedge, j);
        let ws_here = get(&wstar, j);
        let d_prev = get(&raw.d, j - 1);
        let ds_prev = get(&dstar, j - 1);
        let d_here = get(&raw.d, j);
        let ds_here = get(&dstar, j);
        mult_df2.push(sum_products(
            sq,
            &[
                (w_prev.as_ref(), ws_prev.as_ref()),
                (ws_here.as_ref(), w_here.as_ref()),
            ],
        ));
        cliff_hess.push(sum_products(
            sq,
            &[
                (d_prev.as_ref(), ws_prev.as_ref()),
                (ws_here.as_ref(), d_here.as_ref()),
                (ds_here.as_ref(), w_here.as_ref()),
                (w_prev.as_ref(), ds_prev.as_ref()),
            ],
        ));
        // Ω^j -> Ω^{j-2}: iv_{j-1} W*_{j-1} + W*_{j-2} iv_j
        let down = if j >= 2 {
            sum_products(
                (dim(j - 2), dim(j)),
                &[
                    (get(&raw.iv, j - 1).as_ref(), ws_prev.as_ref()),
                    (get(&wstar, j - 2).as_ref(), get(&raw.iv, j).as_ref()),
                ],
            )
        } else {
            linalg::zeros(0, dim(j))
        };
        cross_iv.push(down);
        // Ω^j -> Ω^{j+2}: v*_{j+1} W_j + W_{j+1} v*_j
        let up = if j + 2 <= n as isize {
            sum_products(
                (dim(j + 2), dim(j)),
                &[
                    (get(&vstar, j + 1).as_ref(), w_here.as_ref()),
                    (get(&raw.dfwedge, j + 1).as_ref(), get(&vstar, j).as_ref()),
                ],
            )
        } else {
            linalg::zeros(0, dim(j))
        };
        cross_vstar.push(up);
    }

    BackendMatrices {
        n,
        weight: raw.weight,
        poles: raw.poles,
        function: raw.function,
        geometry: raw.geometry,
        dofs: raw.dofs,
        mass: raw.mass,
        d: raw.d,
        iv: raw.iv,
        vstar,
        dfwedge: raw.dfwedge,
        mult_df2,
        cliff_hess,
        cross_iv,
        cross_vstar,
    }
}

/// Residuals of the structural identities of a backend.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BackendReport {
    pub d_squared: f64,
    pub iv_squared: f64,
    pub cartan: f64,
    pub min_mass: f64,
    pub scale: f64,
}

pub fn validate_backend(b: &BackendMatrices) -> Result<BackendReport> {
    let n = b.n;
    let scale = b.scale();
    let mut rep = BackendReport {
        scale,
        min_mass: f64::INFINITY,
        ..Default::default()
    };
    for j in 0..=n {
        if j < n {
            let dd = linalg::mul(&b.d[j + 1], &b.d[j]);
            rep.d_squared = rep.d_squared.max(linalg::max_abs(&dd));
        }
        if j >= 2 {
            let ii = linalg::mul(&b.iv[j - 1], &b.iv[j]);
            rep.iv_squared = rep.iv_squared.max(linalg::max_abs(&ii));
        }
        // (d iv + iv d) on Ω^j
        let mut lie = linalg::zeros(b.dim(j as isize), b.dim(j as isize));
        if j >= 1 {
            lie = linalg::add(&lie, &linalg::mul(&b.d[j - 1], &b.iv[j]));
        }
        if j < n {
            lie = linalg::add(&lie, &linalg::mul(&b.iv[j + 1], &b.d[j]));
        }
        rep.cartan = rep.cartan.max(linalg::max_abs(&lie));
        for &m in &b.mass[j] {
            rep.min_mass = rep.min_mass.min(m);
        }
    }
    let tol = 1e-12 * scale * scale;
    for (name, r) in [
        ("d∘d = 0", rep.d_squared),
        ("i_v∘i_v = 0", rep.iv_squared),
        ("cartan d i_v + i_v d = 0", rep.cartan),
    ] {
        if r > tol {
            return Err(Error::InvalidBackend {
                identity: name.to_string(),
                residual: r,
                tolerance: tol,
            });
        }
    }
    if !(rep.min_mass > 0.0) {
        return Err(Error::InvalidBackend {
            identity: "mass positivity".to_string(),
            residual: rep.min_mass,
            tolerance: 0.0,
        });
    }
    Ok(rep)
}
