//! Operator subspaces `X ⊆ L(𝔎, H)` and concrete C*-algebras.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::kernel::{
    self, hs_norm, matrix_units, small_singular_space, solve_constraints, unvec, vec_of, Constraint,
    SpanBuilder, Tolerance,
};
use crate::scalar::{CMat, CVec, Real};

/// A subspace of `L(ℂ^dom, ℂ^cod)` held as a Hilbert–Schmidt orthonormal basis.
#[derive(Debug, Clone)]
pub struct OperatorSpace<T: Real> {
    cod: usize,
    dom: usize,
    basis: Vec<CMat<T>>,
    frame: CMat<T>,
}

impl<T: Real> OperatorSpace<T> {
    /// Closed span of `generators`, each `cod × dom`.
    pub fn span(cod: usize, dom: usize, generators: &[CMat<T>], tol: &Tolerance<T>) -> Result<Self> {
        if let Some(g) = generators.iter().find(|g| g.shape() != (cod, dom)) {
            return Err(Error::Shape(format!(
                "generator {:?} in a space of {cod}x{dom} operators",
                g.shape()
            )));
        }
        if generators.is_empty() {
            return Ok(Self::zero(cod, dom));
        }
        let cols: Vec<CVec<T>> = generators.iter().map(vec_of).collect();
        Ok(Self::from_frame(cod, dom, kernel::orthonormal_columns(&cols, tol)))
    }

    /// Wraps a family that is already orthonormal.
    pub fn from_orthonormal(cod: usize, dom: usize, basis: Vec<CMat<T>>) -> Self {
        let cols: Vec<CVec<T>> = basis.iter().map(vec_of).collect();
        let frame = if cols.is_empty() {
            kernel::zeros(cod * dom, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        Self { cod, dom, basis, frame }
    }

    fn from_frame(cod: usize, dom: usize, frame: CMat<T>) -> Self {
        let basis = (0..frame.ncols())
            .map(|j| unvec(frame.column(j).as_slice(), cod, dom))
            .collect();
        Self { cod, dom, basis, frame }
    }

    fn from_columns(cod: usize, dom: usize, cols: &[CVec<T>]) -> Self {
        if cols.is_empty() {
            return Self::zero(cod, dom);
        }
        Self::from_frame(cod, dom, DMatrix::from_columns(cols))
    }

    pub fn zero(cod: usize, dom: usize) -> Self {
        Self::from_orthonormal(cod, dom, Vec::new())
    }

    pub fn full(cod: usize, dom: usize) -> Self {
        Self::from_orthonormal(cod, dom, matrix_units(cod, dom))
    }

    /// `ℂ · Id` on `ℂ^n`.
    pub fn scalars(n: usize) -> Self {
        let s = T::one() / T::lit(n as f64).sqrt();
        Self::from_orthonormal(n, n, vec![kernel::eye::<T>(n) * Complex::new(s, T::zero())])
    }

    pub fn cod_dim(&self) -> usize {
        self.cod
    }

    pub fn dom_dim(&self) -> usize {
        self.dom
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMat<T>] {
        &self.basis
    }

    /// Basis vectors as the columns of a `(cod·dom) × dim` matrix.
    pub fn frame(&self) -> &CMat<T> {
        &self.frame
    }

    pub fn coords(&self, v: &CMat<T>) -> CVec<T> {
        self.frame.adjoint() * vec_of(v)
    }

    pub fn project(&self, v: &CMat<T>) -> CMat<T> {
        let p = &self.frame * self.coords(v);
        unvec(p.as_slice(), self.cod, self.dom)
    }

    /// Hilbert–Schmidt distance from `v` to the subspace.
    pub fn residual(&self, v: &CMat<T>) -> T {
        if v.shape() != (self.cod, self.dom) {
            return T::max_value().unwrap_or_else(T::one);
        }
        let x = vec_of(v);
        let p = &self.frame * (self.frame.adjoint() * &x);
        (x - p).norm()
    }

    /// Membership with residual at most `residual_abs · max(1, ‖v‖)`.
    pub fn contains(&self, v: &CMat<T>, tol: &Tolerance<T>) -> bool {
        self.residual(v) <= tol.residual_abs * T::one().max(hs_norm(v))
    }

    /// Largest residual of a basis element of `other` against `self`.
    pub fn containment_residual(&self, other: &Self) -> T {
        if other.cod != self.cod || other.dom != self.dom {
            return T::max_value().unwrap_or_else(T::one);
        }
        if other.dim() == 0 {
            return T::zero();
        }
        let p = &other.frame - &self.frame * (self.frame.adjoint() * &other.frame);
        (0..p.ncols()).fold(T::zero(), |a, j| a.max(p.column(j).norm()))
    }

    pub fn contains_space(&self, other: &Self, tol: &Tolerance<T>) -> bool {
        self.containment_residual(other) <= tol.residual_abs
    }

    /// Largest residual of mutual containment.
    pub fn equality_residual(&self, other: &Self) -> T {
        self.containment_residual(other).max(other.containment_residual(self))
    }

    pub fn equals(&self, other: &Self, tol: &Tolerance<T>) -> bool {
        self.equality_residual(other) <= tol.residual_abs
    }

    /// `[X Y]`.
    pub fn product(&self, other: &Self, tol: &Tolerance<T>) -> Result<Self> {
        if other.cod != self.dom {
            return Err(Error::Shape(format!(
                "product of {}x{} and {}x{} spaces",
                self.cod, self.dom, other.cod, other.dom
            )));
        }
        let mut gens = Vec::with_capacity(self.dim() * other.dim());
        for x in &self.basis {
            for y in &other.basis {
                gens.push(x * y);
            }
        }
        Self::span(self.cod, other.dom, &gens, tol)
    }

    /// `X*`.
    pub fn adjoint(&self) -> Self {
        Self::from_orthonormal(self.dom, self.cod, self.basis.iter().map(|x| x.adjoint()).collect())
    }

    /// `X + Y`.
    pub fn sum(&self, other: &Self, tol: &Tolerance<T>) -> Result<Self> {
        if other.cod != self.cod || other.dom != self.dom {
            return Err(Error::Shape("sum of spaces with different shapes".into()));
        }
        let mut b = SpanBuilder::new(tol);
        for j in 0..self.dim() {
            b.push(&self.frame.column(j).into_owned());
        }
        for j in 0..other.dim() {
            b.push(&other.frame.column(j).into_owned());
        }
        Ok(Self::from_columns(self.cod, self.dom, b.vectors()))
    }

    /// `X ∩ Y`: directions of `X` whose distance to `Y` is at most `residual_abs`.
    pub fn intersection(&self, other: &Self, tol: &Tolerance<T>) -> Result<Self> {
        if other.cod != self.cod || other.dom != self.dom {
            return Err(Error::Shape("intersection of spaces with different shapes".into()));
        }
        if self.dim() == 0 || other.dim() == 0 {
            return Ok(Self::zero(self.cod, self.dom));
        }
        let m = &self.frame - &other.frame * (other.frame.adjoint() * &self.frame);
        let v = small_singular_space(&m, tol.residual_abs);
        Ok(Self::from_frame(self.cod, self.dom, &self.frame * v))
    }

    /// Span of the images of the basis under a linear map.
    pub fn map(
        &self,
        cod: usize,
        dom: usize,
        f: impl Fn(&CMat<T>) -> CMat<T>,
        tol: &Tolerance<T>,
    ) -> Result<Self> {
        let gens: Vec<CMat<T>> = self.basis.iter().map(f).collect();
        Self::span(cod, dom, &gens, tol)
    }

    /// `{L x R : x ∈ X}`.
    pub fn sandwich(&self, l: &CMat<T>, r: &CMat<T>, tol: &Tolerance<T>) -> Result<Self> {
        self.map(l.nrows(), r.ncols(), |x| l * x * r, tol)
    }

    /// Constraint `x ↦ (I − P_X) x`, vanishing exactly on `X`.
    pub fn complement_residual(&self, x: &CMat<T>) -> CMat<T> {
        x - self.project(x)
    }

    /// Orthonormal basis of the space of rows of the images `[X ℂ^dom]`.
    pub fn range(&self, tol: &Tolerance<T>) -> CMat<T> {
        let mut cols = Vec::new();
        for x in &self.basis {
            for j in 0..self.dom {
                cols.push(x.column(j).into_owned());
            }
        }
        if cols.is_empty() {
            return kernel::zeros(self.cod, 0);
        }
        kernel::orthonormal_columns(&cols, tol)
    }

    /// Dimension of `[X ℂ^dom]`.
    pub fn range_dim(&self, tol: &Tolerance<T>) -> usize {
        self.range(tol).ncols()
    }
}

/// Constraint `T ↦ (I − P_W)(L T R)` imposing `L T R ∈ W`.
pub fn membership_constraint<'a, T: Real>(
    w: &'a OperatorSpace<T>,
    l: CMat<T>,
    r: CMat<T>,
) -> Constraint<'a, T> {
    let scale = hs_norm(&l).max(T::one()) * hs_norm(&r).max(T::one());
    Constraint::new(scale, move |t: &CMat<T>| w.complement_residual(&(&l * t * &r)))
}

/// Closure residuals of an operator space considered as an algebra.
#[derive(Debug, Clone, Copy)]
pub struct ClosureResiduals<T> {
    pub adjoint: T,
    pub product: T,
}

/// A *-subalgebra of `L(ℂ^n)`.
#[derive(Debug, Clone)]
pub struct ConcreteAlgebra<T: Real> {
    space: OperatorSpace<T>,
    nondegenerate: bool,
}

const FULL_PRODUCT_CHECK: usize = 48;

impl<T: Real> ConcreteAlgebra<T> {
    /// Verifies that `space` is a *-algebra.
    pub fn from_space(space: OperatorSpace<T>, tol: &Tolerance<T>) -> Result<Self> {
        if space.cod_dim() != space.dom_dim() {
            return Err(Error::Shape("algebra of non-square operators".into()));
        }
        let r = closure_residuals(&space);
        if r.adjoint > tol.residual_abs {
            return Err(Error::Axiom(format!("not *-closed (residual {:.3e})", r.adjoint.as_f64())));
        }
        if r.product > tol.residual_abs {
            return Err(Error::Axiom(format!(
                "not closed under products (residual {:.3e})",
                r.product.as_f64()
            )));
        }
        let nondegenerate = space.range_dim(tol) == space.cod_dim();
        Ok(Self { space, nondegenerate })
    }

    /// Unchecked wrapper for spaces known to be *-algebras by construction.
    fn trusted(space: OperatorSpace<T>, tol: &Tolerance<T>) -> Self {
        let nondegenerate = space.range_dim(tol) == space.cod_dim();
        Self { space, nondegenerate }
    }

    /// Smallest *-algebra containing `generators` (and `Id` when `unital`).
    pub fn generated(n: usize, generators: &[CMat<T>], unital: bool, tol: &Tolerance<T>) -> Result<Self> {
        if let Some(g) = generators.iter().find(|g| g.shape() != (n, n)) {
            return Err(Error::Shape(format!("generator {:?} on dimension {n}", g.shape())));
        }
        let mut letters: Vec<CMat<T>> = Vec::new();
        for g in generators {
            letters.push(g.clone());
            letters.push(g.adjoint());
        }
        let mut span = SpanBuilder::new(tol);
        if unital {
            span.push(&vec_of(&kernel::eye::<T>(n)));
        }
        for l in &letters {
            span.push(&vec_of(l));
        }
        let cap = (n * n).max(1);
        let mut rounds = 0;
        let mut fresh = 0;
        loop {
            let before = span.len();
            let current: Vec<CMat<T>> = span.vectors()[fresh..]
                .iter()
                .map(|v| unvec(v.as_slice(), n, n))
                .collect();
            fresh = before;
            for l in &letters {
                for x in &current {
                    span.push(&vec_of(&(l * x)));
                }
            }
            if span.len() == before {
                break;
            }
            rounds += 1;
            if rounds > cap {
                return Err(Error::NoFixpoint(cap));
            }
        }
        let space = OperatorSpace::from_columns(n, n, span.vectors());
        Self::from_space(space, tol)
    }

    /// `L(ℂ^n)`.
    pub fn full(n: usize) -> Self {
        Self { space: OperatorSpace::full(n, n), nondegenerate: true }
    }

    /// `ℂ · Id`.
    pub fn scalars(n: usize) -> Self {
        Self { space: OperatorSpace::scalars(n), nondegenerate: true }
    }

    /// Diagonal matrices on `ℂ^n`.
    pub fn diagonal(n: usize) -> Self {
        let basis = (0..n).map(|i| kernel::unit(n, n, i, i)).collect();
        Self { space: OperatorSpace::from_orthonormal(n, n, basis), nondegenerate: true }
    }

    pub fn zero(n: usize) -> Self {
        Self { space: OperatorSpace::zero(n, n), nondegenerate: n == 0 }
    }

    pub fn n(&self) -> usize {
        self.space.cod_dim()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn space(&self) -> &OperatorSpace<T> {
        &self.space
    }

    pub fn basis(&self) -> &[CMat<T>] {
        self.space.basis()
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.nondegenerate
    }

    pub fn contains(&self, x: &CMat<T>, tol: &Tolerance<T>) -> bool {
        self.space.contains(x, tol)
    }

    pub fn contains_identity(&self, tol: &Tolerance<T>) -> bool {
        self.contains(&kernel::eye(self.n()), tol)
    }

    /// `{T : T a = a T for all a}`.
    pub fn commutant(&self, tol: &Tolerance<T>) -> Self {
        let basis = kernel::commutant(self.basis(), self.n(), tol).expect("square basis");
        Self { space: OperatorSpace::from_orthonormal(self.n(), self.n(), basis), nondegenerate: true }
    }

    /// Idealizer `{T : T A ⊆ A, A T ⊆ A}`; equals `M(A)` for nondegenerate `A`.
    pub fn multiplier_algebra(&self, tol: &Tolerance<T>) -> Result<Self> {
        if !self.nondegenerate {
            return Err(Error::Degenerate("multiplier algebra of a degenerate algebra".into()));
        }
        let n = self.n();
        let id = kernel::eye::<T>(n);
        let mut cons = Vec::new();
        for a in self.basis() {
            cons.push(membership_constraint(&self.space, id.clone(), a.clone()));
            cons.push(membership_constraint(&self.space, a.clone(), id.clone()));
        }
        let basis = solve_constraints(matrix_units(n, n), &cons, tol);
        Self::from_space(OperatorSpace::from_orthonormal(n, n, basis), tol)
    }

    /// Intersection of two algebras on the same space.
    pub fn intersection(&self, other: &Self, tol: &Tolerance<T>) -> Result<Self> {
        Ok(Self::trusted(self.space.intersection(&other.space, tol)?, tol))
    }

    /// Image under `x ↦ U x Uᴴ` for a unitary `U`.
    pub fn conjugate(&self, u: &CMat<T>, tol: &Tolerance<T>) -> Result<Self> {
        let ua = u.adjoint();
        Ok(Self::trusted(self.space.sandwich(u, &ua, tol)?, tol))
    }

    pub fn closure_residuals(&self) -> ClosureResiduals<T> {
        closure_residuals(&self.space)
    }
}

/// Adjoint and product closure residuals of a square operator space.
///
/// Products are checked pairwise up to dimension 48; beyond that each basis
/// element is multiplied on both sides by fixed generic combinations.
pub fn closure_residuals<T: Real>(space: &OperatorSpace<T>) -> ClosureResiduals<T> {
    let adjoint = space.containment_residual(&space.adjoint());
    let basis = space.basis();
    let mut product = T::zero();
    if basis.len() <= FULL_PRODUCT_CHECK {
        for x in basis {
            for y in basis {
                product = product.max(space.residual(&(x * y)));
            }
        }
    } else {
        let probes: Vec<CMat<T>> = (0..3).map(|r| generic_combination(basis, r)).collect();
        for x in basis {
            for p in &probes {
                product = product.max(space.residual(&(x * p)));
                product = product.max(space.residual(&(p * x)));
            }
        }
    }
    ClosureResiduals { adjoint, product }
}

fn generic_combination<T: Real>(basis: &[CMat<T>], round: usize) -> CMat<T> {
    let (r, c) = basis[0].shape();
    let mut acc = kernel::zeros(r, c);
    for (k, b) in basis.iter().enumerate() {
        let t = T::lit(0.618_033_988_749_895 * ((k + 1) * (round + 2)) as f64 + 0.1 * round as f64);
        let w = Complex::new(t.cos(), t.sin()) * Complex::new(T::one() / T::lit((k + 1) as f64).sqrt(), T::zero());
        acc += b * w;
    }
    acc
}
