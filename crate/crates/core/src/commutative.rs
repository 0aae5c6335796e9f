//! Finite commutative bases: weighted point sets, bundles and fibered spaces.
//!
//! Vectors in `L²(Z, μ)`, `L²(X, ν_X)` and direct integrals are stored in
//! orthonormal coordinates `f̃(z) = √μ_z f(z)`; functions passed to the
//! embeddings `j_X` are plain values on points.

use std::sync::Arc;

use num_complex::Complex;

use crate::base::{diagonal_base, CStarBase};
use crate::error::{Error, Result};
use crate::fiber::{fiber_product, BimoduleAlgebra, FiberProduct};
use crate::kernel::{self, max_abs, Tolerance};
use crate::module::CStarModule;
use crate::opspace::{ConcreteAlgebra, OperatorSpace};
use crate::report::Report;
use crate::rtp::RelativeTensorProduct;
use crate::scalar::{CMat, CVec, Real};

const FINITE_NOTE: &str = "continuity and vanishing conditions are vacuous on finite sets";

/// `Z` with a measure of full support; `𝔎 = L²(Z, μ)` and `𝔅 = 𝔅† = C(Z)`.
#[derive(Debug, Clone)]
pub struct DiscreteBase<T: Real> {
    weights: Vec<T>,
    base: Arc<CStarBase<T>>,
    base_dag: Arc<CStarBase<T>>,
}

impl<T: Real> DiscreteBase<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Degenerate("empty base space".into()));
        }
        if let Some((z, w)) = weights.iter().enumerate().find(|(_, w)| !(**w > T::zero()) || !w.is_finite()) {
            return Err(Error::Degenerate(format!("weight {:.3e} at point {z}", w.as_f64())));
        }
        let base = diagonal_base::<T>(weights.len());
        let base_dag = base.opposite();
        Ok(Self { weights, base: Arc::new(base), base_dag: Arc::new(base_dag) })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![T::one(); n])
    }

    pub fn points(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn base(&self) -> &Arc<CStarBase<T>> {
        &self.base
    }

    pub fn base_dag(&self) -> &Arc<CStarBase<T>> {
        &self.base_dag
    }

    /// Orthonormal coordinates of a function on `Z`.
    pub fn to_l2(&self, h: &[Complex<T>]) -> CVec<T> {
        CVec::from_iterator(h.len(), h.iter().zip(&self.weights).map(|(v, w)| v * w.sqrt()))
    }
}

/// A Hilbert bundle over a finite base: fiber dimensions per point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub fiber_dims: Vec<usize>,
}

impl Bundle {
    pub fn new(fiber_dims: Vec<usize>) -> Self {
        Self { fiber_dims }
    }

    pub fn total_dim(&self) -> usize {
        self.fiber_dims.iter().sum()
    }

    fn offsets(&self) -> Vec<usize> {
        self.fiber_dims
            .iter()
            .scan(0, |acc, &n| {
                let o = *acc;
                *acc += n;
                Some(o)
            })
            .collect()
    }
}

fn sections<T: Real>(bundle: &Bundle) -> OperatorSpace<T> {
    let h = bundle.total_dim();
    let zs = bundle.fiber_dims.len();
    let mut basis = Vec::with_capacity(h);
    for (z, (&n, off)) in bundle.fiber_dims.iter().zip(bundle.offsets()).enumerate() {
        for i in 0..n {
            basis.push(kernel::unit(h, zs, off + i, z));
        }
    }
    OperatorSpace::from_orthonormal(h, zs, basis)
}

fn check_bundle<T: Real>(dbase: &DiscreteBase<T>, bundle: &Bundle) -> Result<()> {
    if bundle.fiber_dims.len() != dbase.points() {
        return Err(Error::Shape(format!(
            "bundle over {} points on a base with {}",
            bundle.fiber_dims.len(),
            dbase.points()
        )));
    }
    if let Some(z) = bundle.fiber_dims.iter().position(|&n| n == 0) {
        return Err(Error::EmptyFiber(z));
    }
    Ok(())
}

/// `H = ∫⊕ H_z` with `α = m(Γ(H))`, a module over `𝔟`.
pub fn bundle_module<T: Real>(dbase: &DiscreteBase<T>, bundle: &Bundle, tol: &Tolerance<T>) -> Result<CStarModule<T>> {
    check_bundle(dbase, bundle)?;
    CStarModule::new(dbase.base.clone(), sections(bundle), tol)
}

/// The same bundle as a module over `𝔟†`.
pub fn bundle_module_dag<T: Real>(
    dbase: &DiscreteBase<T>,
    bundle: &Bundle,
    tol: &Tolerance<T>,
) -> Result<CStarModule<T>> {
    check_bundle(dbase, bundle)?;
    CStarModule::new(dbase.base_dag.clone(), sections(bundle), tol)
}

/// `H ⊗_𝔟 K → ∫⊕ H_z ⊗ K_z`.
#[derive(Debug, Clone)]
pub struct FiberwiseIso<T: Real> {
    pub rtp: RelativeTensorProduct<T>,
    pub matrix: CMat<T>,
    pub report: Report,
    h: Bundle,
    k: Bundle,
}

impl<T: Real> FiberwiseIso<T> {
    /// Offset of block `z` in `∫⊕ H_z ⊗ K_z`.
    pub fn block_offsets(&self) -> Vec<usize> {
        block_offsets(&self.h, &self.k)
    }

    /// `⊕_z S_z ⊗ T_z` for block-diagonal `S` on `H` and `T` on `K`.
    pub fn blockwise(&self, s: &CMat<T>, t: &CMat<T>) -> CMat<T> {
        let (ho, ko) = (self.h.offsets(), self.k.offsets());
        let blocks: Vec<CMat<T>> = (0..self.h.fiber_dims.len())
            .map(|z| {
                let (hn, kn) = (self.h.fiber_dims[z], self.k.fiber_dims[z]);
                let sz = s.view((ho[z], ho[z]), (hn, hn)).into_owned();
                let tz = t.view((ko[z], ko[z]), (kn, kn)).into_owned();
                kernel::kron(&sz, &tz)
            })
            .collect();
        kernel::block_diag(&blocks)
    }
}

fn block_offsets(h: &Bundle, k: &Bundle) -> Vec<usize> {
    let mut out = Vec::with_capacity(h.fiber_dims.len());
    let mut acc = 0;
    for (a, b) in h.fiber_dims.iter().zip(&k.fiber_dims) {
        out.push(acc);
        acc += a * b;
    }
    out
}

/// `m(ξ) ⊳ ζ ⊲ m(η) ↦ (ξ(z) ζ(z) ⊗ η(z))_z`.
pub fn fiberwise_rtp_iso<T: Real>(
    dbase: &DiscreteBase<T>,
    bh: &Bundle,
    bk: &Bundle,
    tol: &Tolerance<T>,
) -> Result<FiberwiseIso<T>> {
    let h = bundle_module(dbase, bh, tol)?;
    let k = bundle_module_dag(dbase, bk, tol)?;
    let rtp = RelativeTensorProduct::new(h, k, tol)?;
    let offs = block_offsets(bh, bk);
    let target: usize = bh.fiber_dims.iter().zip(&bk.fiber_dims).map(|(a, b)| a * b).sum();
    let point = |b: &Bundle| -> Vec<(usize, usize)> {
        b.fiber_dims.iter().enumerate().flat_map(|(z, &n)| (0..n).map(move |i| (z, i))).collect()
    };
    let (hp, kp) = (point(bh), point(bk));
    let mut images = kernel::zeros(target, rtp.generator_count());
    for g in 0..rtp.generator_count() {
        let (a, z, c) = rtp.gen_index(g);
        let ((za, i), (zc, j)) = (hp[a], kp[c]);
        if za == z && zc == z {
            images[(offs[z] + i * bk.fiber_dims[z] + j, g)] = Complex::new(T::one(), T::zero());
        }
    }
    let matrix = rtp.induced(&images, tol)?;
    let mut report = Report::new("fiberwise relative tensor product");
    report.count("dim", "dim H ⊗_𝔟 K = Σ_z dim H_z · dim K_z", rtp.dim(), target);
    report.residual("unitary", "the fiberwise map is unitary", unitary_residual(&matrix), tol.residual_abs);
    Ok(FiberwiseIso { rtp, matrix, report, h: bh.clone(), k: bk.clone() })
}

fn unitary_residual<T: Real>(u: &CMat<T>) -> T {
    if u.nrows() != u.ncols() {
        return T::max_value().unwrap_or_else(T::one);
    }
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - kernel::eye(n))).max(max_abs(&(u * u.adjoint() - kernel::eye(n))))
}

/// A finite space `X` with `p: X → Z` and fiber measures `φ_z` on `X_z`.
#[derive(Debug, Clone)]
pub struct FiberedSpace<T: Real> {
    projection: Vec<usize>,
    weights: Vec<T>,
}

impl<T: Real> FiberedSpace<T> {
    /// `projection[x] = p(x)`, `weights[x] = φ_{p(x)}({x})`.
    pub fn new(projection: Vec<usize>, weights: Vec<T>, base_points: usize) -> Result<Self> {
        if projection.len() != weights.len() {
            return Err(Error::Shape(format!("{} points with {} weights", projection.len(), weights.len())));
        }
        if let Some(&z) = projection.iter().find(|&&z| z >= base_points) {
            return Err(Error::Shape(format!("projection onto point {z} of a base with {base_points}")));
        }
        if let Some((x, w)) = weights.iter().enumerate().find(|(_, w)| !(**w > T::zero()) || !w.is_finite()) {
            return Err(Error::Degenerate(format!("fiber weight {:.3e} at point {x}", w.as_f64())));
        }
        if let Some(z) = (0..base_points).find(|z| !projection.contains(z)) {
            return Err(Error::EmptyFiber(z));
        }
        Ok(Self { projection, weights })
    }

    /// Counting measures on every fiber.
    pub fn counting(projection: Vec<usize>, base_points: usize) -> Result<Self> {
        let n = projection.len();
        Self::new(projection, vec![T::one(); n], base_points)
    }

    pub fn points(&self) -> usize {
        self.projection.len()
    }

    pub fn projection(&self) -> &[usize] {
        &self.projection
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `ν_X({x}) = μ_{p(x)} φ(x)`.
    pub fn nu(&self, dbase: &DiscreteBase<T>) -> Vec<T> {
        self.projection.iter().zip(&self.weights).map(|(&z, &w)| dbase.weights[z] * w).collect()
    }

    /// Orthonormal coordinates of a function on `X` in `L²(X, ν_X)`.
    pub fn to_l2(&self, dbase: &DiscreteBase<T>, f: &[Complex<T>]) -> CVec<T> {
        let nu = self.nu(dbase);
        CVec::from_iterator(f.len(), f.iter().zip(&nu).map(|(v, w)| v * w.sqrt()))
    }

    /// `j_X(f): L²(Z, μ) → L²(X, ν_X)`, `h ↦ f · (h ∘ p)`.
    pub fn j(&self, f: &[Complex<T>], base_points: usize) -> CMat<T> {
        let mut m = kernel::zeros(self.points(), base_points);
        for (x, (&z, &w)) in self.projection.iter().zip(&self.weights).enumerate() {
            m[(x, z)] = f[x] * w.sqrt();
        }
        m
    }

    /// `φ_*(u)(z) = Σ_{x ∈ X_z} φ(x) u(x)`.
    pub fn push_forward(&self, u: &[Complex<T>], base_points: usize) -> Vec<Complex<T>> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); base_points];
        for (x, (&z, &w)) in self.projection.iter().zip(&self.weights).enumerate() {
            out[z] += u[x] * w;
        }
        out
    }

    /// `(L²(X, ν_X), [j_X(C(X))])` over `𝔟`.
    pub fn module(&self, dbase: &DiscreteBase<T>, tol: &Tolerance<T>) -> Result<CStarModule<T>> {
        CStarModule::new(dbase.base.clone(), self.beta(dbase.points()), tol)
    }

    /// The same space as a module over `𝔟†`.
    pub fn module_dag(&self, dbase: &DiscreteBase<T>, tol: &Tolerance<T>) -> Result<CStarModule<T>> {
        CStarModule::new(dbase.base_dag.clone(), self.beta(dbase.points()), tol)
    }

    fn beta(&self, zs: usize) -> OperatorSpace<T> {
        let n = self.points();
        let basis = self.projection.iter().enumerate().map(|(x, &z)| kernel::unit(n, zs, x, z)).collect();
        OperatorSpace::from_orthonormal(n, zs, basis)
    }

    /// Multiplication operators `C(X)` on `L²(X, ν_X)`.
    pub fn functions(&self) -> ConcreteAlgebra<T> {
        ConcreteAlgebra::diagonal(self.points())
    }
}

/// `U: L²(X) ⊗_𝔟 L²(Y) → L²(X ×_Z Y, ν)`.
#[derive(Debug, Clone)]
pub struct FiberedUnitary<T: Real> {
    pub rtp: RelativeTensorProduct<T>,
    pub matrix: CMat<T>,
    /// Points `(x, y)` of `X ×_Z Y` in coordinate order.
    pub pairs: Vec<(usize, usize)>,
    /// `ν({(x, y)}) = μ_z φ(x) ψ(y)`.
    pub nu: Vec<T>,
    pub report: Report,
}

pub fn fibered_unitary<T: Real>(
    fx: &FiberedSpace<T>,
    fy: &FiberedSpace<T>,
    dbase: &DiscreteBase<T>,
    tol: &Tolerance<T>,
) -> Result<FiberedUnitary<T>> {
    let zs = dbase.points();
    for fs in [fx, fy] {
        if let Some(z) = (0..zs).find(|z| !fs.projection.contains(z)) {
            return Err(Error::EmptyFiber(z));
        }
        if fs.projection.iter().any(|&z| z >= zs) {
            return Err(Error::Shape("fibered space over a larger base".into()));
        }
    }
    let h = fx.module(dbase, tol)?;
    let k = fy.module_dag(dbase, tol)?;
    let rtp = RelativeTensorProduct::new(h, k, tol)?;
    let mut pairs = Vec::new();
    let mut nu = Vec::new();
    for (x, &zx) in fx.projection.iter().enumerate() {
        for (y, &zy) in fy.projection.iter().enumerate() {
            if zx == zy {
                pairs.push((x, y));
                nu.push(dbase.weights[zx] * fx.weights[x] * fy.weights[y]);
            }
        }
    }
    let index = |x: usize, y: usize| pairs.iter().position(|&p| p == (x, y));
    let mut images = kernel::zeros(pairs.len(), rtp.generator_count());
    for g in 0..rtp.generator_count() {
        let (x, z, y) = rtp.gen_index(g);
        if fx.projection[x] == z && fy.projection[y] == z {
            if let Some(i) = index(x, y) {
                images[(i, g)] = Complex::new(T::one(), T::zero());
            }
        }
    }
    let matrix = rtp.induced(&images, tol)?;
    let mut report = Report::new("fibered product unitary");
    report.count("dim", "dim L²(X) ⊗_𝔟 L²(Y) = |X ×_Z Y|", rtp.dim(), pairs.len());
    report.residual("unitary", "U is unitary", unitary_residual(&matrix), tol.residual_abs);

    let mut jx = T::zero();
    let g = |a: usize, b: usize| Complex::new(T::lit(1.0 + 0.37 * a as f64), T::lit(0.21 * b as f64 - 0.5));
    for fs in [fx, fy] {
        let n = fs.points();
        let f: Vec<Complex<T>> = (0..n).map(|x| g(x, 1)).collect();
        let u: Vec<Complex<T>> = (0..n).map(|x| g(x + 3, 2)).collect();
        let lhs = fs.j(&f, zs).adjoint() * fs.to_l2(dbase, &u);
        let fbar_g: Vec<Complex<T>> = f.iter().zip(&u).map(|(a, b)| a.conj() * b).collect();
        let rhs = dbase.to_l2(&fs.push_forward(&fbar_g, zs));
        jx = (lhs - rhs).iter().fold(jx, |m, v| m.max(nalgebra::ComplexField::modulus(*v)));
    }
    report.residual("j_adjoint", "j_X(f)* g = φ_*(f̄ g)", jx, tol.residual_abs);

    let mut inter = T::zero();
    for x in 0..fx.points() {
        let e = kernel::unit(fx.points(), fx.points(), x, x);
        let lhs = &matrix * rtp.left_op(&e, tol)? * matrix.adjoint();
        let rhs = kernel::from_real_diag(&pairs.iter().map(|&(a, _)| if a == x { T::one() } else { T::zero() }).collect::<Vec<_>>());
        inter = inter.max(max_abs(&(lhs - rhs)));
    }
    for y in 0..fy.points() {
        let e = kernel::unit(fy.points(), fy.points(), y, y);
        let lhs = &matrix * rtp.right_op(&e, tol)? * matrix.adjoint();
        let rhs = kernel::from_real_diag(&pairs.iter().map(|&(_, b)| if b == y { T::one() } else { T::zero() }).collect::<Vec<_>>());
        inter = inter.max(max_abs(&(lhs - rhs)));
    }
    report.residual("multiplication", "U (f ⊗ Id) U* = f ∘ pr_X and U (Id ⊗ g) U* = g ∘ pr_Y", inter, tol.residual_abs);
    Ok(FiberedUnitary { rtp, matrix, pairs, nu, report })
}

/// Outcome of comparing `Ad_U(C(X) ∗ C(Y))` with `C(X ×_Z Y)`.
#[derive(Debug, Clone)]
pub struct CommutativeCheck<T: Real> {
    pub unitary: FiberedUnitary<T>,
    pub fiber: FiberProduct<T>,
    pub report: Report,
}

pub fn fp_commutative_check<T: Real>(
    fx: &FiberedSpace<T>,
    fy: &FiberedSpace<T>,
    dbase: &DiscreteBase<T>,
    tol: &Tolerance<T>,
) -> Result<CommutativeCheck<T>> {
    let unitary = fibered_unitary(fx, fy, dbase, tol)?;
    let a = BimoduleAlgebra::over_right(&fx.module(dbase, tol)?, fx.functions(), tol)?;
    let b = BimoduleAlgebra::over_left(&fy.module_dag(dbase, tol)?, fy.functions(), tol)?;
    let fiber = fiber_product(&a, &b, tol)?;
    let u = &unitary.matrix;
    let moved = fiber.algebra.space().sandwich(u, &u.adjoint(), tol)?;
    let n = unitary.pairs.len();
    let functions = ConcreteAlgebra::<T>::diagonal(n);
    let mut report = Report::new("commutative fiber product");
    report.merge("unitary", unitary.report.clone());
    report
        .count("dim", "dim C(X) ∗_𝔟 C(Y) = |X ×_Z Y|", fiber.dim(), n)
        .note(FINITE_NOTE);
    report
        .residual(
            "functions",
            "Ad_U(C(X) ∗_𝔟 C(Y)) = C(X ×_Z Y)",
            moved.equality_residual(functions.space()),
            tol.residual_abs,
        )
        .note(FINITE_NOTE);
    Ok(CommutativeCheck { unitary, fiber, report })
}
