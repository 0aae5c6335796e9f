//! C*-modules, bimodules, induced representations and morphism spaces.

use std::sync::Arc;

use crate::base::CStarBase;
use crate::error::{Error, Result};
use crate::kernel::{self, hs_norm, matrix_units, max_abs, solve_constraints, Constraint, Tolerance};
use crate::opspace::{membership_constraint, OperatorSpace};
use crate::report::Report;
use crate::scalar::{CMat, Real};

/// `(H, α)` with `α ⊆ L(𝔎, H)` over a base `𝔟`.
#[derive(Debug, Clone)]
pub struct CStarModule<T: Real> {
    base: Arc<CStarBase<T>>,
    alpha: OperatorSpace<T>,
}

/// Verifies `[α𝔎] = H`, `[α𝔅] = α` and `[α*α] = 𝔅`.
pub fn check_module<T: Real>(base: &CStarBase<T>, alpha: &OperatorSpace<T>, tol: &Tolerance<T>) -> Report {
    let mut r = Report::new("C*-module");
    if alpha.dom_dim() != base.k_dim() {
        r.count("shape", "α ⊆ L(𝔎, H)", alpha.dom_dim(), base.k_dim());
        return r;
    }
    let h = alpha.cod_dim();
    r.count("spans", "[α𝔎] = H", alpha.range_dim(tol), h)
        .dim("dim_alpha", alpha.dim());
    let ab = alpha.product(base.b().space(), tol).expect("shapes agree");
    r.residual("right_absorbs", "[α𝔅] = α", ab.equality_residual(alpha), tol.residual_abs);
    let aa = alpha.adjoint().product(alpha, tol).expect("shapes agree");
    r.residual("inner_products", "[α*α] = 𝔅", aa.equality_residual(base.b().space()), tol.residual_abs);
    r
}

impl<T: Real> CStarModule<T> {
    pub fn new(base: Arc<CStarBase<T>>, alpha: OperatorSpace<T>, tol: &Tolerance<T>) -> Result<Self> {
        let r = check_module(&base, &alpha, tol);
        if let Some(f) = r.failures().next() {
            return Err(Error::Axiom(format!("module: {} (residual {:.3e})", f.statement, f.residual)));
        }
        Ok(Self { base, alpha })
    }

    /// Skips verification; [`CStarModule::check`] reports on the result.
    pub fn new_unchecked(base: Arc<CStarBase<T>>, alpha: OperatorSpace<T>) -> Self {
        Self { base, alpha }
    }

    /// `(𝔎, 𝔅)`.
    pub fn unit(base: Arc<CStarBase<T>>) -> Self {
        let alpha = base.b().space().clone();
        Self { base, alpha }
    }

    pub fn base(&self) -> &Arc<CStarBase<T>> {
        &self.base
    }

    pub fn alpha(&self) -> &OperatorSpace<T> {
        &self.alpha
    }

    pub fn h_dim(&self) -> usize {
        self.alpha.cod_dim()
    }

    pub fn check(&self, tol: &Tolerance<T>) -> Report {
        check_module(&self.base, &self.alpha, tol)
    }

    /// `ρ_α(x)` for `x ∈ 𝔅'`: the unique operator with `ρ_α(x) ξ ζ = ξ x ζ`.
    pub fn rho(&self, x: &CMat<T>, tol: &Tolerance<T>) -> Result<CMat<T>> {
        let k = self.base.k_dim();
        if x.shape() != (k, k) {
            return Err(Error::Shape(format!("ρ argument {:?} on 𝔎 of dimension {k}", x.shape())));
        }
        let mut comm = T::zero();
        for b in self.base.b().basis() {
            comm = comm.max(max_abs(&(x * b - b * x)));
        }
        if comm > tol.residual_abs * hs_norm(x).max(T::one()) {
            return Err(Error::NotInCommutant(comm.as_f64()));
        }
        rho_space(&self.alpha, x, tol)
    }

    /// `ρ_α` applied to a basis of `𝔅'`.
    pub fn rho_commutant_basis(&self, tol: &Tolerance<T>) -> Result<Vec<CMat<T>>> {
        self.base.b_commutant().basis().iter().map(|x| self.rho(x, tol)).collect()
    }

    /// Same module over a base known to be equal; used when bases are rebuilt.
    pub fn rebase(&self, base: Arc<CStarBase<T>>) -> Self {
        Self { base, alpha: self.alpha.clone() }
    }

    /// `ρ_α` properties: unital, *-preserving, multiplicative, injective.
    pub fn check_rho(&self, tol: &Tolerance<T>) -> Result<Report> {
        let mut r = Report::new("induced representation");
        let k = self.base.k_dim();
        let h = self.h_dim();
        let unital = max_abs(&(self.rho(&kernel::eye(k), tol)? - kernel::eye(h)));
        r.residual("unital", "ρ(1) = 1", unital, tol.residual_abs);
        let basis = self.base.b_commutant().basis();
        let images = self.rho_commutant_basis(tol)?;
        let mut mult = T::zero();
        let mut star = T::zero();
        for (i, x) in basis.iter().enumerate() {
            star = star.max(max_abs(&(self.rho(&x.adjoint(), tol)? - images[i].adjoint())));
            for (j, y) in basis.iter().enumerate() {
                let xy = self.rho(&(x * y), tol)?;
                mult = mult.max(max_abs(&(xy - &images[i] * &images[j])));
            }
        }
        r.residual("multiplicative", "ρ(xy) = ρ(x)ρ(y)", mult, tol.residual_abs);
        r.residual("star", "ρ(x*) = ρ(x)*", star, tol.residual_abs);
        let img = OperatorSpace::span(h, h, &images, tol)?;
        r.count("faithful", "ρ is injective on 𝔅'", img.dim(), basis.len());
        let mut inter = T::zero();
        for (i, x) in basis.iter().enumerate() {
            for xi in self.alpha.basis() {
                inter = inter.max(max_abs(&(&images[i] * xi - xi * x)));
            }
        }
        r.residual("defining_relation", "ρ(x)ξ = ξx for ξ ∈ α", inter, tol.residual_abs);
        Ok(r)
    }
}

/// `ρ_I(x)`: the operator with `ρ_I(x) S = S x` for every `S ∈ I`.
pub fn rho_space<T: Real>(i: &OperatorSpace<T>, x: &CMat<T>, tol: &Tolerance<T>) -> Result<CMat<T>> {
    let cons: Vec<(CMat<T>, CMat<T>)> = i.basis().iter().map(|s| (s.clone(), s * x)).collect();
    // R S = S x for all S  <=>  R [S_1 … S_n] = [S_1 x … S_n x]
    kernel::solve_intertwiner(&cons, i.cod_dim(), i.cod_dim(), tol).map_err(|e| match e {
        Error::Shape(_) => Error::Shape("ρ constraint shapes".into()),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MorphismKind {
    Semi,
    Full,
}

/// Operators `T: H → K` with `Tα ⊆ β` (and `T*β ⊆ α` for full morphisms).
#[derive(Debug, Clone)]
pub struct MorphismSpace<T: Real> {
    pub kind: MorphismKind,
    pub space: OperatorSpace<T>,
}

/// `{T : T α ⊆ β}` without base checks.
pub fn semi_morphisms<T: Real>(alpha: &OperatorSpace<T>, beta: &OperatorSpace<T>, tol: &Tolerance<T>) -> OperatorSpace<T> {
    let (h, k) = (alpha.cod_dim(), beta.cod_dim());
    let id = kernel::eye::<T>(k);
    let cons: Vec<Constraint<'_, T>> = alpha
        .basis()
        .iter()
        .map(|xi| membership_constraint(beta, id.clone(), xi.clone()))
        .collect();
    OperatorSpace::from_orthonormal(k, h, solve_constraints(matrix_units(k, h), &cons, tol))
}

/// `{T : T α ⊆ β, T* β ⊆ α}`.
pub fn full_morphisms<T: Real>(
    alpha: &OperatorSpace<T>,
    beta: &OperatorSpace<T>,
    tol: &Tolerance<T>,
) -> Result<OperatorSpace<T>> {
    let s = semi_morphisms(alpha, beta, tol);
    let back = semi_morphisms(beta, alpha, tol).adjoint();
    s.intersection(&back, tol)
}

pub fn morphism_space<T: Real>(
    h: &CStarModule<T>,
    k: &CStarModule<T>,
    kind: MorphismKind,
    tol: &Tolerance<T>,
) -> Result<MorphismSpace<T>> {
    if !Arc::ptr_eq(h.base(), k.base()) && !h.base().same_as(k.base(), tol) {
        return Err(Error::Precondition("morphisms between modules over different bases".into()));
    }
    let space = match kind {
        MorphismKind::Semi => semi_morphisms(h.alpha(), k.alpha(), tol),
        MorphismKind::Full => full_morphisms(h.alpha(), k.alpha(), tol)?,
    };
    Ok(MorphismSpace { kind, space })
}

/// Checks that `t` is a (semi-)morphism; returns the worst containment residual.
pub fn morphism_residual<T: Real>(
    t: &CMat<T>,
    alpha: &OperatorSpace<T>,
    beta: &OperatorSpace<T>,
    kind: MorphismKind,
) -> T {
    let mut r = T::zero();
    for xi in alpha.basis() {
        r = r.max(beta.residual(&(t * xi)));
    }
    if kind == MorphismKind::Full {
        let ta = t.adjoint();
        for eta in beta.basis() {
            r = r.max(alpha.residual(&(&ta * eta)));
        }
    }
    r
}

/// `(H, α, β)`: `α` a module over `𝔞†` and `β` a module over `𝔟`.
#[derive(Debug, Clone)]
pub struct CStarBimodule<T: Real> {
    a: Arc<CStarBase<T>>,
    left: CStarModule<T>,
    right: CStarModule<T>,
}

impl<T: Real> CStarBimodule<T> {
    pub fn new(
        a: Arc<CStarBase<T>>,
        alpha: OperatorSpace<T>,
        b: Arc<CStarBase<T>>,
        beta: OperatorSpace<T>,
        tol: &Tolerance<T>,
    ) -> Result<Self> {
        let m = Self::new_unchecked(a, alpha, b, beta);
        let r = m.check(tol);
        if let Some(f) = r.failures().next() {
            return Err(Error::Axiom(format!("bimodule: {} (residual {:.3e})", f.statement, f.residual)));
        }
        Ok(m)
    }

    pub fn new_unchecked(
        a: Arc<CStarBase<T>>,
        alpha: OperatorSpace<T>,
        b: Arc<CStarBase<T>>,
        beta: OperatorSpace<T>,
    ) -> Self {
        let a_dag = Arc::new(a.opposite());
        Self {
            a,
            left: CStarModule::new_unchecked(a_dag, alpha),
            right: CStarModule::new_unchecked(b, beta),
        }
    }

    /// `𝔎 = ℂ^k` with `α = 𝔅†` and `β = 𝔅`, a bimodule over `(𝔟, 𝔟)`.
    pub fn unit(base: Arc<CStarBase<T>>) -> Self {
        let alpha = base.b_dag().space().clone();
        let beta = base.b().space().clone();
        Self::new_unchecked(base.clone(), alpha, base, beta)
    }

    /// The base `𝔞`; the left leg is a module over its opposite.
    pub fn a(&self) -> &Arc<CStarBase<T>> {
        &self.a
    }

    pub fn b(&self) -> &Arc<CStarBase<T>> {
        self.right.base()
    }

    /// `H_α` as a module over `𝔞†`.
    pub fn left(&self) -> &CStarModule<T> {
        &self.left
    }

    /// `H_β` as a module over `𝔟`.
    pub fn right(&self) -> &CStarModule<T> {
        &self.right
    }

    pub fn alpha(&self) -> &OperatorSpace<T> {
        self.left.alpha()
    }

    pub fn beta(&self) -> &OperatorSpace<T> {
        self.right.alpha()
    }

    pub fn h_dim(&self) -> usize {
        self.right.h_dim()
    }

    pub fn check(&self, tol: &Tolerance<T>) -> Report {
        let mut r = Report::new("C*-bimodule");
        r.merge("alpha", self.left.check(tol));
        r.merge("beta", self.right.check(tol));
        if !r.passed {
            return r;
        }
        match (self.rho_alpha_images(tol), self.rho_beta_images(tol)) {
            (Ok(ra), Ok(rb)) => {
                let h = self.h_dim();
                let left_act = OperatorSpace::span(h, h, &ra, tol)
                    .and_then(|s| s.product(self.beta(), tol))
                    .map(|s| s.equality_residual(self.beta()));
                let right_act = OperatorSpace::span(h, h, &rb, tol)
                    .and_then(|s| s.product(self.alpha(), tol))
                    .map(|s| s.equality_residual(self.alpha()));
                r.residual("left_action", "[ρ_α(𝔄)β] = β", left_act.unwrap_or_else(|_| T::one()), tol.residual_abs);
                r.residual("right_action", "[ρ_β(𝔅†)α] = α", right_act.unwrap_or_else(|_| T::one()), tol.residual_abs);
                let mut comm = T::zero();
                for x in &ra {
                    for y in &rb {
                        comm = comm.max(max_abs(&(x * y - y * x)));
                    }
                }
                r.residual("actions_commute", "[ρ_α(𝔄), ρ_β(𝔅†)] = 0", comm, tol.residual_abs);
            }
            (Err(e), _) | (_, Err(e)) => {
                r.flag("rho", "ρ_α and ρ_β exist", false).note(e.to_string());
            }
        }
        r
    }

    /// `ρ_α` on the basis of `𝔄`.
    pub fn rho_alpha_images(&self, tol: &Tolerance<T>) -> Result<Vec<CMat<T>>> {
        self.a.b().basis().iter().map(|x| self.left.rho(x, tol)).collect()
    }

    /// `ρ_β` on the basis of `𝔅†`.
    pub fn rho_beta_images(&self, tol: &Tolerance<T>) -> Result<Vec<CMat<T>>> {
        self.b().b_dag().basis().iter().map(|y| self.right.rho(y, tol)).collect()
    }

    pub fn rho_alpha(&self, x: &CMat<T>, tol: &Tolerance<T>) -> Result<CMat<T>> {
        self.left.rho(x, tol)
    }

    pub fn rho_beta(&self, y: &CMat<T>, tol: &Tolerance<T>) -> Result<CMat<T>> {
        self.right.rho(y, tol)
    }
}

/// Bimodule (semi-)morphisms: intersection of the two leg conditions.
pub fn bimodule_morphism_space<T: Real>(
    h: &CStarBimodule<T>,
    k: &CStarBimodule<T>,
    kind: MorphismKind,
    tol: &Tolerance<T>,
) -> Result<MorphismSpace<T>> {
    let l = morphism_space(h.left(), k.left(), kind, tol)?;
    let r = morphism_space(h.right(), k.right(), kind, tol)?;
    Ok(MorphismSpace { kind, space: l.space.intersection(&r.space, tol)? })
}

/// Result of a finite direct sum with its canonical maps.
#[derive(Debug, Clone)]
pub struct DirectSum<M, T: Real> {
    pub sum: M,
    pub injections: Vec<CMat<T>>,
    pub projections: Vec<CMat<T>>,
}

/// Inclusions `ℂ^{d_j} → ℂ^{Σ d_i}`.
pub fn block_injections<T: Real>(dims: &[usize]) -> Vec<CMat<T>> {
    let total: usize = dims.iter().sum();
    let mut off = 0;
    dims.iter()
        .map(|&d| {
            let mut m = kernel::zeros(total, d);
            for i in 0..d {
                m[(off + i, i)] = num_complex::Complex::new(T::one(), T::zero());
            }
            off += d;
            m
        })
        .collect()
}

/// `⊞ α_i`: spanned by the block columns `ζ ↦ ι_i ξ_i ζ`.
pub fn boxplus<T: Real>(spaces: &[&OperatorSpace<T>], tol: &Tolerance<T>) -> Result<OperatorSpace<T>> {
    let dom = spaces.first().map_or(0, |s| s.dom_dim());
    if spaces.iter().any(|s| s.dom_dim() != dom) {
        return Err(Error::Shape("direct summands over different 𝔎".into()));
    }
    let dims: Vec<usize> = spaces.iter().map(|s| s.cod_dim()).collect();
    let inj = block_injections::<T>(&dims);
    let total: usize = dims.iter().sum();
    let gens: Vec<CMat<T>> = spaces
        .iter()
        .zip(&inj)
        .flat_map(|(s, i)| s.basis().iter().map(move |x| i * x))
        .collect();
    OperatorSpace::span(total, dom, &gens, tol)
}

pub fn direct_sum<T: Real>(modules: &[CStarModule<T>], tol: &Tolerance<T>) -> Result<DirectSum<CStarModule<T>, T>> {
    let first = modules.first().ok_or_else(|| Error::Degenerate("empty direct sum".into()))?;
    for m in modules {
        if !Arc::ptr_eq(m.base(), first.base()) && !m.base().same_as(first.base(), tol) {
            return Err(Error::Precondition("direct sum over different bases".into()));
        }
    }
    let alpha = boxplus(&modules.iter().map(|m| m.alpha()).collect::<Vec<_>>(), tol)?;
    let sum = CStarModule::new(first.base().clone(), alpha, tol)?;
    let injections = block_injections::<T>(&modules.iter().map(|m| m.h_dim()).collect::<Vec<_>>());
    let projections = injections.iter().map(|i| i.adjoint()).collect();
    Ok(DirectSum { sum, injections, projections })
}

pub fn bimodule_direct_sum<T: Real>(
    modules: &[CStarBimodule<T>],
    tol: &Tolerance<T>,
) -> Result<DirectSum<CStarBimodule<T>, T>> {
    let first = modules.first().ok_or_else(|| Error::Degenerate("empty direct sum".into()))?;
    let alpha = boxplus(&modules.iter().map(|m| m.alpha()).collect::<Vec<_>>(), tol)?;
    let beta = boxplus(&modules.iter().map(|m| m.beta()).collect::<Vec<_>>(), tol)?;
    let sum = CStarBimodule::new(first.a().clone(), alpha, first.b().clone(), beta, tol)?;
    let injections = block_injections::<T>(&modules.iter().map(|m| m.h_dim()).collect::<Vec<_>>());
    let projections = injections.iter().map(|i| i.adjoint()).collect();
    Ok(DirectSum { sum, injections, projections })
}

/// Verifies that the canonical maps of a module direct sum are morphisms and
/// form a biproduct.
pub fn check_direct_sum<T: Real>(
    parts: &[CStarModule<T>],
    ds: &DirectSum<CStarModule<T>, T>,
    tol: &Tolerance<T>,
) -> Report {
    let mut r = Report::new("direct sum");
    let mut morph = T::zero();
    let mut retract = T::zero();
    let total = ds.sum.h_dim();
    let mut sum = kernel::zeros(total, total);
    for (j, m) in parts.iter().enumerate() {
        morph = morph.max(morphism_residual(&ds.injections[j], m.alpha(), ds.sum.alpha(), MorphismKind::Full));
        morph = morph.max(morphism_residual(&ds.projections[j], ds.sum.alpha(), m.alpha(), MorphismKind::Full));
        retract = retract.max(max_abs(&(&ds.projections[j] * &ds.injections[j] - kernel::eye(m.h_dim()))));
        sum += &ds.injections[j] * &ds.projections[j];
    }
    r.residual("morphisms", "ι_j and π_j are morphisms", morph, tol.residual_abs);
    r.residual("retractions", "π_j ι_j = 1", retract, tol.residual_abs);
    r.residual("biproduct", "Σ ι_j π_j = 1", max_abs(&(sum - kernel::eye(total))), tol.residual_abs);
    r
}

/// `{T: 𝔎 → H : T x = ρ(x) T}` for a representation given on generators by
/// pairs `(x, ρ(x))`.
pub fn intertwiner_space<T: Real>(
    pairs: &[(CMat<T>, CMat<T>)],
    k_dim: usize,
    h_dim: usize,
    tol: &Tolerance<T>,
) -> Result<OperatorSpace<T>> {
    for (x, y) in pairs {
        if x.shape() != (k_dim, k_dim) || y.shape() != (h_dim, h_dim) {
            return Err(Error::Shape("intertwiner pair shapes".into()));
        }
    }
    let images = OperatorSpace::span(h_dim, h_dim, &pairs.iter().map(|p| p.1.clone()).collect::<Vec<_>>(), tol)?;
    if images.range_dim(tol) != h_dim {
        return Err(Error::Degenerate("representation is degenerate".into()));
    }
    let cons: Vec<Constraint<'_, T>> = pairs
        .iter()
        .map(|(x, y)| {
            let scale = hs_norm(x) + hs_norm(y);
            Constraint::new(scale, move |t: &CMat<T>| t * x - y * t)
        })
        .collect();
    Ok(OperatorSpace::from_orthonormal(
        h_dim,
        k_dim,
        solve_constraints(matrix_units(h_dim, k_dim), &cons, tol),
    ))
}
