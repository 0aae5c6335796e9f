//! `Ind_I(A)`, the spatial fiber product `A ∗_𝔟 B` and its functoriality.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::kernel::{
    self, gram_completion, hs_norm, matrix_units, max_abs, nullspace, op_norm, pseudo_inverse, solve_constraints,
    vec_of, Constraint, GramCompletion, Tolerance,
};
use crate::module::{direct_sum, full_morphisms, morphism_residual, rho_space, semi_morphisms, CStarBimodule, CStarModule, MorphismKind};
use crate::opspace::{closure_residuals, membership_constraint, ConcreteAlgebra, OperatorSpace};
use crate::report::Report;
use crate::rtp::{
    assoc_iso, direct_sum_compat, left_map, left_only, right_map, right_only, rtp_bimodule, unit_r,
    RelativeTensorProduct, RtpBimodule,
};
use crate::scalar::{CMat, CVec, Real};

fn rel_residual<T: Real>(space: &OperatorSpace<T>, v: &CMat<T>) -> T {
    space.residual(v) / T::one().max(hs_norm(v))
}

fn worst<T: Real>(space: &OperatorSpace<T>, items: impl IntoIterator<Item = CMat<T>>) -> T {
    items.into_iter().fold(T::zero(), |r, v| r.max(rel_residual(space, &v)))
}

/// Largest residual of `x a` against `A` over `x ∈ ops` and the basis of `A`.
fn absorption<T: Real>(ops: &[CMat<T>], space: &OperatorSpace<T>) -> T {
    worst(space, ops.iter().flat_map(|x| space.basis().iter().map(move |a| x * a)))
}

fn commutation<T: Real>(xs: &[CMat<T>], ys: &[CMat<T>]) -> T {
    let mut r = T::zero();
    for x in xs {
        for y in ys {
            r = r.max(max_abs(&(x * y - y * x)) / T::one().max(hs_norm(x) * hs_norm(y)));
        }
    }
    r
}

fn rel_diff<T: Real>(x: &CMat<T>, y: &CMat<T>) -> T {
    max_abs(&(x - y)) / T::one().max(max_abs(x))
}

/// A concrete C*-algebra `A ⊆ L(H)` on a bimodule `_αH_β` absorbing both legs.
#[derive(Debug, Clone)]
pub struct BimoduleAlgebra<T: Real> {
    bimodule: CStarBimodule<T>,
    algebra: ConcreteAlgebra<T>,
}

impl<T: Real> BimoduleAlgebra<T> {
    /// Checks `ρ_α(𝔄) A ⊆ A` and `ρ_β(𝔅†) A ⊆ A`.
    pub fn new(bimodule: CStarBimodule<T>, algebra: ConcreteAlgebra<T>, tol: &Tolerance<T>) -> Result<Self> {
        if algebra.n() != bimodule.h_dim() {
            return Err(Error::Shape(format!(
                "algebra on dimension {} over a module of dimension {}",
                algebra.n(),
                bimodule.h_dim()
            )));
        }
        let left = absorption(&bimodule.rho_alpha_images(tol)?, algebra.space());
        if left > tol.residual_abs {
            return Err(Error::NotBAlgebra(format!("ρ_α(𝔄)A ⊄ A (residual {:.3e})", left.as_f64())));
        }
        let right = absorption(&bimodule.rho_beta_images(tol)?, algebra.space());
        if right > tol.residual_abs {
            return Err(Error::NotBAlgebra(format!("ρ_β(𝔅†)A ⊄ A (residual {:.3e})", right.as_f64())));
        }
        Ok(Self { bimodule, algebra })
    }

    /// A C*-𝔟-algebra `A_H^β`.
    pub fn over_right(module: &CStarModule<T>, algebra: ConcreteAlgebra<T>, tol: &Tolerance<T>) -> Result<Self> {
        Self::new(right_only(module), algebra, tol)
    }

    /// A C*-𝔟†-algebra `B_K^γ`.
    pub fn over_left(module: &CStarModule<T>, algebra: ConcreteAlgebra<T>, tol: &Tolerance<T>) -> Result<Self> {
        Self::new(left_only(module), algebra, tol)
    }

    pub fn bimodule(&self) -> &CStarBimodule<T> {
        &self.bimodule
    }

    pub fn algebra(&self) -> &ConcreteAlgebra<T> {
        &self.algebra
    }

    pub fn n(&self) -> usize {
        self.algebra.n()
    }

    /// `A^(β) = A ∩ L(H_β)`.
    pub fn right_part(&self, tol: &Tolerance<T>) -> Result<OperatorSpace<T>> {
        let l = full_morphisms(self.bimodule.beta(), self.bimodule.beta(), tol)?;
        self.algebra.space().intersection(&l, tol)
    }

    /// `A ∩ L(H_α)`.
    pub fn left_part(&self, tol: &Tolerance<T>) -> Result<OperatorSpace<T>> {
        let l = full_morphisms(self.bimodule.alpha(), self.bimodule.alpha(), tol)?;
        self.algebra.space().intersection(&l, tol)
    }
}

/// `Ind_I(A) = {T ∈ L(K) : T I + T* I ⊆ [I A]}`.
#[derive(Debug, Clone)]
pub struct IndResult<T: Real> {
    pub algebra: ConcreteAlgebra<T>,
    pub i_space: OperatorSpace<T>,
    pub target: OperatorSpace<T>,
}

/// Computes `Ind_I(A)` for `I ⊆ L(H, K)` after verifying
/// `[IH] = K`, `[I*K] = H`, `[II*I] = I` and `I*IA ⊆ A`.
pub fn ind<T: Real>(i: &OperatorSpace<T>, a: &ConcreteAlgebra<T>, tol: &Tolerance<T>) -> Result<IndResult<T>> {
    let (k, h) = (i.cod_dim(), i.dom_dim());
    if a.n() != h {
        return Err(Error::Shape(format!("algebra on dimension {} for I ⊆ L({h}, {k})", a.n())));
    }
    if i.range_dim(tol) != k {
        return Err(Error::Precondition("[IH] = K".into()));
    }
    let i_star = i.adjoint();
    if i_star.range_dim(tol) != h {
        return Err(Error::Precondition("[I*K] = H".into()));
    }
    let iii = i.product(&i_star, tol)?.product(i, tol)?;
    if !iii.equals(i, tol) {
        return Err(Error::Precondition("[II*I] = I".into()));
    }
    let absorbed = i_star.product(i, tol)?.product(a.space(), tol)?;
    if !a.space().contains_space(&absorbed, tol) {
        return Err(Error::Precondition("I*IA ⊆ A".into()));
    }
    let target = i.product(a.space(), tol)?;
    let id = kernel::eye::<T>(k);
    let cons: Vec<Constraint<'_, T>> = i
        .basis()
        .iter()
        .map(|s| membership_constraint(&target, id.clone(), s.clone()))
        .collect();
    let semi = OperatorSpace::from_orthonormal(k, k, solve_constraints(matrix_units(k, k), &cons, tol));
    drop(cons);
    let space = semi.intersection(&semi.adjoint(), tol)?;
    let algebra = ConcreteAlgebra::from_space(space, tol)?;
    Ok(IndResult { algebra, i_space: i.clone(), target })
}

/// `[I A I*]`.
pub fn ind_span<T: Real>(i: &OperatorSpace<T>, a: &ConcreteAlgebra<T>, tol: &Tolerance<T>) -> Result<OperatorSpace<T>> {
    i.product(a.space(), tol)?.product(&i.adjoint(), tol)
}

/// `A ∗_𝔟 B` on `H ⊗_𝔟 K` together with the Ind pieces and bimodule legs.
#[derive(Debug, Clone)]
pub struct FiberProduct<T: Real> {
    pub algebra: ConcreteAlgebra<T>,
    pub legs: RtpBimodule<T>,
    pub ind_a: IndResult<T>,
    pub ind_b: IndResult<T>,
    pub report: Report,
}

impl<T: Real> FiberProduct<T> {
    pub fn rtp(&self) -> &RelativeTensorProduct<T> {
        &self.legs.rtp
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    /// The fiber product as an algebra over `(α ◁ γ, β ▷ δ)`.
    pub fn as_algebra(&self, tol: &Tolerance<T>) -> Result<BimoduleAlgebra<T>> {
        BimoduleAlgebra::new(self.legs.bimodule.clone(), self.algebra.clone(), tol)
    }
}

/// `A ∗_𝔟 B = Ind_{|γ⟩₂}(A) ∩ Ind_{|β⟩₁}(B)`.
pub fn fiber_product<T: Real>(
    a: &BimoduleAlgebra<T>,
    b: &BimoduleAlgebra<T>,
    tol: &Tolerance<T>,
) -> Result<FiberProduct<T>> {
    let legs = rtp_bimodule(a.bimodule(), b.bimodule(), tol)?;
    let rtp = &legs.rtp;
    let d = rtp.dim();
    let ket2 = OperatorSpace::span(d, a.n(), rtp.ket2_basis(), tol)?;
    let ket1 = OperatorSpace::span(d, b.n(), rtp.ket1_basis(), tol)?;
    let ind_a = ind(&ket2, a.algebra(), tol)?;
    let ind_b = ind(&ket1, b.algebra(), tol)?;
    let space = ind_a.algebra.space().intersection(ind_b.algebra.space(), tol)?;
    let algebra = ConcreteAlgebra::from_space(space, tol)?;

    let mut report = Report::new("fiber product");
    report
        .count("dim", "dim A ∗_𝔟 B", algebra.dim(), algebra.dim())
        .dim("rtp", d)
        .dim("ind_a", ind_a.algebra.dim())
        .dim("ind_b", ind_b.algebra.dim());
    let cl = closure_residuals(algebra.space());
    report.residual("adjoint", "(A ∗ B)* = A ∗ B", cl.adjoint, tol.residual_abs);
    report.residual("product", "(A ∗ B)(A ∗ B) ⊆ A ∗ B", cl.product, tol.residual_abs);
    let left = absorption(&legs.bimodule.rho_alpha_images(tol)?, algebra.space());
    report.residual("absorb_left", "ρ_{α◁γ}(𝔄)(A ∗ B) ⊆ A ∗ B", left, tol.residual_abs);
    let right = absorption(&legs.bimodule.rho_beta_images(tol)?, algebra.space());
    report.residual("absorb_right", "ρ_{β▷δ}(ℭ†)(A ∗ B) ⊆ A ∗ B", right, tol.residual_abs);
    report.info(
        "nondegenerate",
        "[(A ∗ B)(H ⊗ K)] = H ⊗ K",
        if algebra.is_nondegenerate() { "yes" } else { "no" },
    );
    report.merge("rtp", legs.report.clone());
    Ok(FiberProduct { algebra, legs, ind_a, ind_b, report })
}

/// Fiber product of bimodule algebras; fails unless both legs are absorbed.
pub fn fiber_bimodule<T: Real>(
    a: &BimoduleAlgebra<T>,
    b: &BimoduleAlgebra<T>,
    tol: &Tolerance<T>,
) -> Result<FiberProduct<T>> {
    let fp = fiber_product(a, b, tol)?;
    if let Some(f) = fp.report.failures().next() {
        return Err(Error::Axiom(format!("{} (residual {:.3e})", f.statement, f.residual)));
    }
    Ok(fp)
}

fn implied<T: Real>(report: &mut Report, name: &str, statement: &str, hypothesis: bool, residual: T, tol: T) {
    if hypothesis {
        report.residual(name, statement, residual, tol);
    } else {
        report.flag(name, statement, true).note("hypothesis not met");
    }
}

/// Checks the items of the fiber product property list on one instance.
pub fn check_fiber_properties<T: Real>(
    a: &BimoduleAlgebra<T>,
    b: &BimoduleAlgebra<T>,
    fp: &FiberProduct<T>,
    tol: &Tolerance<T>,
) -> Result<Report> {
    let rtp = fp.rtp();
    let d = rtp.dim();
    let space = fp.algebra.space();
    let eps = tol.residual_abs;
    let mut report = Report::new("fiber product properties");

    // i
    let k1 = rtp.ket1_basis();
    let k2 = rtp.ket2_basis();
    let sandwiches = |kets: &[CMat<T>], target: &OperatorSpace<T>| {
        let mut r = T::zero();
        for x in space.basis() {
            for p in kets {
                let px = p.adjoint() * x;
                for q in kets {
                    r = r.max(rel_residual(target, &(&px * q)));
                }
            }
        }
        r
    };
    report.residual("i_bra_beta", "⟨β|₁(A ∗ B)|β⟩₁ ⊆ B", sandwiches(k1, b.algebra().space()), eps);
    report.residual("i_bra_gamma", "⟨γ|₂(A ∗ B)|γ⟩₂ ⊆ A", sandwiches(k2, a.algebra().space()), eps);
    if a.algebra().is_nondegenerate() && b.algebra().is_nondegenerate() {
        let ma = BimoduleAlgebra::new(a.bimodule().clone(), a.algebra().multiplier_algebra(tol)?, tol)?;
        let mb = BimoduleAlgebra::new(b.bimodule().clone(), b.algebra().multiplier_algebra(tol)?, tol)?;
        let mfp = fiber_product(&ma, &mb, tol)?;
        let mut r = T::zero();
        for y in mfp.algebra.basis() {
            for x in space.basis() {
                r = r.max(rel_residual(space, &(y * x))).max(rel_residual(space, &(x * y)));
            }
        }
        report.residual("i_multipliers", "M(A) ∗ M(B) ⊆ M(A ∗ B)", r, eps);
    } else {
        report.flag("i_multipliers", "M(A) ∗ M(B) ⊆ M(A ∗ B)", true).note("hypothesis not met");
    }

    // ii
    let a_beta = a.right_part(tol)?;
    let b_gamma = b.left_part(tol)?;
    let lefts: Vec<CMat<T>> = a_beta.basis().iter().map(|s| rtp.left_op(s, tol)).collect::<Result<_>>()?;
    let rights: Vec<CMat<T>> = b_gamma.basis().iter().map(|t| rtp.right_op(t, tol)).collect::<Result<_>>()?;
    let products: Vec<CMat<T>> = lefts.iter().flat_map(|l| rights.iter().map(move |r| l * r)).collect();
    report
        .residual("ii_tensor", "A^(β) ⊗ B^(γ) ⊆ A ∗ B", worst(space, products.iter().cloned()), eps)
        .dim("a_beta", a_beta.dim())
        .dim("b_gamma", b_gamma.dim());

    // iii
    let beta = a.bimodule().beta();
    let gamma = b.bimodule().alpha();
    let hyp3 = a_beta.product(beta, tol)?.equals(beta, tol) && b_gamma.product(gamma, tol)?.equals(gamma, tol);
    if hyp3 {
        let p = OperatorSpace::span(d, d, &products, tol)?;
        let id = kernel::eye::<T>(d);
        let mut cons = Vec::new();
        for x in lefts.iter().chain(&rights) {
            cons.push(membership_constraint(&p, id.clone(), x.clone()));
            cons.push(membership_constraint(&p, x.clone(), id.clone()));
        }
        let ms = OperatorSpace::from_orthonormal(d, d, solve_constraints(matrix_units(d, d), &cons, tol));
        report.flag("iii_nondegenerate", "A ∗ B is nondegenerate", fp.algebra.is_nondegenerate());
        report
            .residual("iii_multipliers", "M_s(A^(β) ⊗ B^(γ)) ⊆ A ∗ B", space.containment_residual(&ms), eps)
            .dim("m_s", ms.dim());
    } else {
        report.flag("iii_nondegenerate", "A ∗ B is nondegenerate", true).note("hypothesis not met");
        report.flag("iii_multipliers", "M_s(A^(β) ⊗ B^(γ)) ⊆ A ∗ B", true).note("hypothesis not met");
    }

    // iv, v
    let rho_beta = a.bimodule().rho_beta_images(tol)?;
    let rho_gamma = b.bimodule().rho_alpha_images(tol)?;
    let beta_in_a = worst(a.algebra().space(), rho_beta.iter().cloned()) <= eps;
    let gamma_in_b = worst(b.algebra().space(), rho_gamma.iter().cloned()) <= eps;
    implied(
        &mut report,
        "iv_right",
        "ρ_β(𝔅†) ⊆ A ⇒ Id ⊗ B^(γ) ⊆ A ∗ B",
        beta_in_a,
        worst(space, rights.iter().cloned()),
        eps,
    );
    implied(
        &mut report,
        "iv_left",
        "ρ_γ(𝔅) ⊆ B ⇒ A^(β) ⊗ Id ⊆ A ∗ B",
        gamma_in_b,
        worst(space, lefts.iter().cloned()),
        eps,
    );
    let has_id = fp.algebra.contains_identity(tol);
    report
        .flag("v_identity", "Id ∈ A ∗ B ⇔ ρ_β(𝔅†) ⊆ A and ρ_γ(𝔅) ⊆ B", has_id == (beta_in_a && gamma_in_b))
        .note(format!("Id ∈ A ∗ B: {has_id}"));

    // vi
    let rho_alpha = a.bimodule().rho_alpha_images(tol)?;
    let rho_delta = b.bimodule().rho_beta_images(tol)?;
    let hyp6 = beta_in_a
        && gamma_in_b
        && worst(a.algebra().space(), rho_alpha.iter().cloned()) <= eps
        && worst(b.algebra().space(), rho_delta.iter().cloned()) <= eps;
    let legs_in = {
        let mut ims = fp.legs.bimodule.rho_alpha_images(tol)?;
        ims.extend(fp.legs.bimodule.rho_beta_images(tol)?);
        worst(space, ims)
    };
    implied(&mut report, "vi_legs", "ρ_{α◁γ}(𝔄) + ρ_{β▷δ}(ℭ†) ⊆ A ∗ B", hyp6, legs_in, eps);

    // vii
    let k = a.bimodule().b().k_dim();
    let bab = beta.adjoint().product(a.algebra().space(), tol)?.product(beta, tol)?;
    let gbg = gamma.adjoint().product(b.algebra().space(), tol)?.product(gamma, tol)?;
    let meet = bab.intersection(&gbg, tol)?;
    let meet_nd = meet.range_dim(tol) == k;
    report
        .flag(
            "vii_base",
            "A ∗ B nondegenerate ⇒ [β*Aβ] ∩ [γ*Bγ] nondegenerate",
            !fp.algebra.is_nondegenerate() || meet_nd,
        )
        .dim("meet", meet.dim());

    // viii
    if a.algebra().is_nondegenerate() && b.algebra().is_nondegenerate() {
        let ac = a.algebra().commutant(tol);
        let bc = b.algebra().commutant(tol);
        report.residual("viii_a", "A' ⊆ ρ_β(𝔅†)'", commutation(ac.basis(), &rho_beta), eps);
        report.residual("viii_b", "B' ⊆ ρ_γ(𝔅)'", commutation(bc.basis(), &rho_gamma), eps);
        let mut outer: Vec<CMat<T>> = ac.basis().iter().map(|x| rtp.left_op(x, tol)).collect::<Result<_>>()?;
        for y in bc.basis() {
            outer.push(rtp.right_op(y, tol)?);
        }
        report.residual(
            "viii_commutant",
            "A ∗ B ⊆ (A' ⊗ Id)' ∩ (Id ⊗ B')'",
            commutation(space.basis(), &outer),
            eps,
        );
    } else {
        for (n, s) in [
            ("viii_a", "A' ⊆ ρ_β(𝔅†)'"),
            ("viii_b", "B' ⊆ ρ_γ(𝔅)'"),
            ("viii_commutant", "A ∗ B ⊆ (A' ⊗ Id)' ∩ (Id ⊗ B')'"),
        ] {
            report.flag(n, s, true).note("hypothesis not met");
        }
    }
    Ok(report)
}

/// `(A' ⊗ Id)' ∩ (Id ⊗ B')'` on the relative tensor product.
pub fn commutant_side<T: Real>(
    a: &BimoduleAlgebra<T>,
    b: &BimoduleAlgebra<T>,
    rtp: &RelativeTensorProduct<T>,
    tol: &Tolerance<T>,
) -> Result<OperatorSpace<T>> {
    let mut gens: Vec<CMat<T>> =
        a.algebra().commutant(tol).basis().iter().map(|x| rtp.left_op(x, tol)).collect::<Result<_>>()?;
    for y in b.algebra().commutant(tol).basis() {
        gens.push(rtp.right_op(y, tol)?);
    }
    let d = rtp.dim();
    Ok(OperatorSpace::from_orthonormal(d, d, kernel::commutant(&gens, d, tol)?))
}

/// Compares `A ∗ B` with `(A' ⊗ Id)' ∩ (Id ⊗ B')'`.
pub fn sauvageot_crosscheck<T: Real>(
    a: &BimoduleAlgebra<T>,
    b: &BimoduleAlgebra<T>,
    fp: &FiberProduct<T>,
    tol: &Tolerance<T>,
) -> Result<Report> {
    if !a.algebra().is_nondegenerate() || !b.algebra().is_nondegenerate() {
        return Err(Error::Precondition("A and B nondegenerate".into()));
    }
    let other = commutant_side(a, b, fp.rtp(), tol)?;
    let mut report = Report::new("commutant description");
    report
        .residual(
            "equal",
            "A ∗ B = (A' ⊗ Id)' ∩ (Id ⊗ B')'",
            fp.algebra.space().equality_residual(&other),
            tol.residual_abs,
        )
        .dim("fiber", fp.dim())
        .dim("commutant", other.dim());
    Ok(report)
}

/// Which leg of a bimodule algebra a morphism is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leg {
    /// `α` over `𝔞†`.
    Left,
    /// `β` over `𝔟`.
    Right,
}

fn leg_space<T: Real>(b: &BimoduleAlgebra<T>, leg: Leg) -> &OperatorSpace<T> {
    match leg {
        Leg::Left => b.bimodule.alpha(),
        Leg::Right => b.bimodule.beta(),
    }
}

/// A *-homomorphism `π: A → C` with its intertwiner space
/// `L^π = {T ∈ L_(s)(H_β, L_λ) : T a = π(a) T}`.
#[derive(Debug, Clone)]
pub struct AlgebraMorphism<T: Real> {
    src: BimoduleAlgebra<T>,
    dst: BimoduleAlgebra<T>,
    leg: Leg,
    kind: MorphismKind,
    images: Vec<CMat<T>>,
    intertwiners: OperatorSpace<T>,
}

impl<T: Real> AlgebraMorphism<T> {
    /// `images[i] = π(basis[i])` for the basis of the source algebra.
    pub fn new(
        src: BimoduleAlgebra<T>,
        dst: BimoduleAlgebra<T>,
        images: Vec<CMat<T>>,
        leg: Leg,
        kind: MorphismKind,
        tol: &Tolerance<T>,
    ) -> Result<Self> {
        if images.len() != src.algebra.dim() {
            return Err(Error::Shape(format!("{} images for an algebra of dimension {}", images.len(), src.algebra.dim())));
        }
        let m = dst.n();
        if let Some(x) = images.iter().find(|x| x.shape() != (m, m)) {
            return Err(Error::Shape(format!("image {:?} in an algebra on dimension {m}", x.shape())));
        }
        let (base_s, base_d) = match leg {
            Leg::Left => (src.bimodule.a(), dst.bimodule.a()),
            Leg::Right => (src.bimodule.b(), dst.bimodule.b()),
        };
        if !base_s.same_as(base_d, tol) {
            return Err(Error::NotMorphism("source and target legs over different bases".into()));
        }
        let eps = tol.residual_abs;
        let into = worst(dst.algebra.space(), images.iter().cloned());
        if into > eps {
            return Err(Error::NotMorphism(format!("image outside the target algebra (residual {:.3e})", into.as_f64())));
        }
        let mut me = Self {
            src,
            dst,
            leg,
            kind,
            images,
            intertwiners: OperatorSpace::zero(m, 0),
        };
        let basis = me.src.algebra.basis();
        let mut hom = T::zero();
        for (i, x) in basis.iter().enumerate() {
            hom = hom.max(rel_diff(&me.apply(&x.adjoint()), &me.images[i].adjoint()));
            for (j, y) in basis.iter().enumerate() {
                hom = hom.max(rel_diff(&me.apply(&(x * y)), &(&me.images[i] * &me.images[j])));
            }
        }
        if hom > eps {
            return Err(Error::NotMorphism(format!("not a *-homomorphism (residual {:.3e})", hom.as_f64())));
        }
        let mu = leg_space(&me.src, leg);
        let lambda = leg_space(&me.dst, leg);
        let start = match kind {
            MorphismKind::Semi => semi_morphisms(mu, lambda, tol),
            MorphismKind::Full => full_morphisms(mu, lambda, tol)?,
        };
        let cons: Vec<Constraint<'_, T>> = basis
            .iter()
            .zip(&me.images)
            .map(|(x, px)| Constraint::new(T::one().max(hs_norm(x) + hs_norm(px)), move |t: &CMat<T>| t * x - px * t))
            .collect();
        let lpi = solve_constraints(start.basis().to_vec(), &cons, tol);
        let intertwiners = OperatorSpace::from_orthonormal(m, me.src.n(), lpi);
        let generated = intertwiners.product(mu, tol)?;
        let res = generated.equality_residual(lambda);
        if res > eps {
            return Err(Error::NotMorphism(format!("λ ≠ [L^π β] (residual {:.3e})", res.as_f64())));
        }
        drop(cons);
        me.intertwiners = intertwiners;
        Ok(me)
    }

    pub fn from_fn(
        src: BimoduleAlgebra<T>,
        dst: BimoduleAlgebra<T>,
        f: impl Fn(&CMat<T>) -> CMat<T>,
        leg: Leg,
        kind: MorphismKind,
        tol: &Tolerance<T>,
    ) -> Result<Self> {
        let images = src.algebra.basis().iter().map(f).collect();
        Self::new(src, dst, images, leg, kind, tol)
    }

    pub fn identity(a: &BimoduleAlgebra<T>, leg: Leg, tol: &Tolerance<T>) -> Result<Self> {
        Self::from_fn(a.clone(), a.clone(), |x| x.clone(), leg, MorphismKind::Full, tol)
    }

    pub fn apply(&self, x: &CMat<T>) -> CMat<T> {
        let c = self.src.algebra.space().coords(x);
        let m = self.dst.n();
        let mut out = kernel::zeros(m, m);
        for (w, img) in c.iter().zip(&self.images) {
            out += img * *w;
        }
        out
    }

    pub fn src(&self) -> &BimoduleAlgebra<T> {
        &self.src
    }

    pub fn dst(&self) -> &BimoduleAlgebra<T> {
        &self.dst
    }

    pub fn leg(&self) -> Leg {
        self.leg
    }

    pub fn kind(&self) -> MorphismKind {
        self.kind
    }

    pub fn intertwiners(&self) -> &OperatorSpace<T> {
        &self.intertwiners
    }
}

/// `ρ_I` for `I = L^π ⊗ Id` (or `Id ⊗ L^ψ`) between two relative tensor
/// products, with the contraction `j` on `[|γ⟩₂ A]` (or `[|β⟩₁ B]`).
#[derive(Debug, Clone)]
pub struct InducedHom<T: Real> {
    pub src: RelativeTensorProduct<T>,
    pub dst: RelativeTensorProduct<T>,
    pub space: OperatorSpace<T>,
    family_src: Vec<CMat<T>>,
    family_dst: Vec<CMat<T>>,
    family_pinv: CMat<T>,
}

fn family_matrix<T: Real>(family: &[CMat<T>], rows: usize) -> CMat<T> {
    if family.is_empty() {
        return kernel::zeros(rows, 0);
    }
    let cols: Vec<CVec<T>> = family.iter().map(vec_of).collect();
    DMatrix::from_columns(&cols)
}

impl<T: Real> InducedHom<T> {
    fn assemble(
        src: RelativeTensorProduct<T>,
        dst: RelativeTensorProduct<T>,
        gens: Vec<CMat<T>>,
        family_src: Vec<CMat<T>>,
        family_dst: Vec<CMat<T>>,
        tol: &Tolerance<T>,
    ) -> Result<Self> {
        let space = OperatorSpace::span(dst.dim(), src.dim(), &gens, tol)?;
        if space.range_dim(tol) != dst.dim() {
            return Err(Error::NotMorphism("[I (H ⊗ K)] does not exhaust the target".into()));
        }
        let rows = family_src.first().map_or(0, |x| x.len());
        let family_pinv = pseudo_inverse(&family_matrix(&family_src, rows), tol);
        Ok(Self { src, dst, space, family_src, family_dst, family_pinv })
    }

    /// The operator `R` with `R S = S x` for all `S ∈ I`.
    pub fn rho(&self, x: &CMat<T>, tol: &Tolerance<T>) -> Result<CMat<T>> {
        rho_space(&self.space, x, tol)
    }

    /// `|η⟩₂ a ↦ |η⟩₂ π(a)` extended linearly.
    pub fn j(&self, v: &CMat<T>, tol: &Tolerance<T>) -> Result<CMat<T>> {
        let Some(first) = self.family_src.first() else {
            return if max_abs(v) <= tol.residual_abs {
                Ok(kernel::zeros(self.dst.dim(), 0))
            } else {
                Err(Error::NotInSpace(max_abs(v).as_f64()))
            };
        };
        if v.shape() != first.shape() {
            return Err(Error::Shape(format!("argument {:?} for j", v.shape())));
        }
        let c = &self.family_pinv * vec_of(v);
        let mut back = kernel::zeros(v.nrows(), v.ncols());
        for (w, f) in c.iter().zip(&self.family_src) {
            back += f * *w;
        }
        let res = max_abs(&(back - v));
        if res > tol.residual_abs * T::one().max(max_abs(v)) {
            return Err(Error::NotInSpace(res.as_f64()));
        }
        let (r, cc) = self.family_dst[0].shape();
        let mut out = kernel::zeros(r, cc);
        for (w, f) in c.iter().zip(&self.family_dst) {
            out += f * *w;
        }
        Ok(out)
    }

    /// Well-definedness and contraction of `j` on sample combinations.
    pub fn check(&self, tol: &Tolerance<T>) -> Result<Report> {
        let mut report = Report::new("induced map");
        report.count("dst", "[I (H ⊗ K)] = L ⊗ K", self.space.range_dim(tol), self.dst.dim());
        if self.family_src.is_empty() {
            report.info("j", "j is defined", "empty family");
            return Ok(report);
        }
        let rows = self.family_src[0].len();
        let fs = family_matrix(&self.family_src, rows);
        let fd = family_matrix(&self.family_dst, self.family_dst[0].len());
        let ker = nullspace(&fs, None, tol);
        let wd = if ker.ncols() == 0 { T::zero() } else { max_abs(&(&fd * &ker)) };
        report.residual("j_well_defined", "Σ cᵢ |ηᵢ⟩₂aᵢ = 0 ⇒ Σ cᵢ |ηᵢ⟩₂π(aᵢ) = 0", wd, tol.residual_abs);
        let mut samples = self.family_src.clone();
        for k in 1..=3 {
            let mut s = kernel::zeros(self.family_src[0].nrows(), self.family_src[0].ncols());
            for (i, f) in self.family_src.iter().enumerate() {
                let th = T::lit((k * (i + 1)) as f64 * 0.7);
                s += f * Complex::new(th.cos(), th.sin());
            }
            samples.push(s);
        }
        let mut excess = T::zero();
        for v in &samples {
            let jv = self.j(v, tol)?;
            let nv = op_norm(v);
            excess = excess.max((op_norm(&jv) - nv) / T::one().max(nv));
        }
        report.residual("j_contraction", "‖j(v)‖ ≤ ‖v‖", excess.max(T::zero()), tol.residual_abs);
        Ok(report)
    }
}

/// `I = L^φ ⊗ Id: H_β ⊗ K → L_λ ⊗ K` for a morphism over the right leg.
pub fn induced_left<T: Real>(
    phi: &AlgebraMorphism<T>,
    k: &CStarModule<T>,
    tol: &Tolerance<T>,
) -> Result<InducedHom<T>> {
    if phi.leg != Leg::Right {
        return Err(Error::NotMorphism("left induction needs a morphism over the right leg".into()));
    }
    let src = RelativeTensorProduct::build(phi.src.bimodule.right().clone(), k.clone(), tol)?;
    let dst = RelativeTensorProduct::build(phi.dst.bimodule.right().clone(), k.clone(), tol)?;
    let gens: Vec<CMat<T>> = phi
        .intertwiners
        .basis()
        .iter()
        .map(|t| left_map(&src, &dst, t, tol))
        .collect::<Result<_>>()?;
    let mut fs = Vec::new();
    let mut fd = Vec::new();
    for (ks, kd) in src.ket2_basis().iter().zip(dst.ket2_basis()) {
        for (x, px) in phi.src.algebra.basis().iter().zip(&phi.images) {
            fs.push(ks * x);
            fd.push(kd * px);
        }
    }
    InducedHom::assemble(src, dst, gens, fs, fd, tol)
}

/// `J = Id ⊗ L^ψ: H ⊗ K_γ → H ⊗ M_μ` for a morphism over the left leg.
pub fn induced_right<T: Real>(
    h: &CStarModule<T>,
    psi: &AlgebraMorphism<T>,
    tol: &Tolerance<T>,
) -> Result<InducedHom<T>> {
    if psi.leg != Leg::Left {
        return Err(Error::NotMorphism("right induction needs a morphism over the left leg".into()));
    }
    let src = RelativeTensorProduct::build(h.clone(), psi.src.bimodule.left().clone(), tol)?;
    let dst = RelativeTensorProduct::build(h.clone(), psi.dst.bimodule.left().clone(), tol)?;
    let gens: Vec<CMat<T>> = psi
        .intertwiners
        .basis()
        .iter()
        .map(|t| right_map(&src, &dst, t, tol))
        .collect::<Result<_>>()?;
    let mut fs = Vec::new();
    let mut fd = Vec::new();
    for (ks, kd) in src.ket1_basis().iter().zip(dst.ket1_basis()) {
        for (x, px) in psi.src.algebra.basis().iter().zip(&psi.images) {
            fs.push(ks * x);
            fd.push(kd * px);
        }
    }
    InducedHom::assemble(src, dst, gens, fs, fd, tol)
}

/// `ρ_I(x)` for `I = L^π ⊗ Id`.
pub fn induced_hom<T: Real>(
    pi: &AlgebraMorphism<T>,
    k: &CStarModule<T>,
    x: &CMat<T>,
    tol: &Tolerance<T>,
) -> Result<CMat<T>> {
    induced_left(pi, k, tol)?.rho(x, tol)
}

/// `φ ∗ ψ: A ∗ B → C ∗ D` through both composition orders.
#[derive(Debug, Clone)]
pub struct FiberMorphism<T: Real> {
    pub i_k: InducedHom<T>,
    pub j_l: InducedHom<T>,
    pub j_h: InducedHom<T>,
    pub i_m: InducedHom<T>,
}

pub fn fiber_morphism<T: Real>(
    phi: &AlgebraMorphism<T>,
    psi: &AlgebraMorphism<T>,
    tol: &Tolerance<T>,
) -> Result<FiberMorphism<T>> {
    Ok(FiberMorphism {
        i_k: induced_left(phi, psi.src.bimodule.left(), tol)?,
        j_l: induced_right(phi.dst.bimodule.right(), psi, tol)?,
        j_h: induced_right(phi.src.bimodule.right(), psi, tol)?,
        i_m: induced_left(phi, psi.dst.bimodule.left(), tol)?,
    })
}

impl<T: Real> FiberMorphism<T> {
    /// `ρ_{I_M}(ρ_{J_H}(x))` and its distance to `ρ_{J_L}(ρ_{I_K}(x))`.
    pub fn apply(&self, x: &CMat<T>, tol: &Tolerance<T>) -> Result<(CMat<T>, T)> {
        let first = self.i_m.rho(&self.j_h.rho(x, tol)?, tol)?;
        let second = self.j_l.rho(&self.i_k.rho(x, tol)?, tol)?;
        let r = rel_diff(&first, &second);
        Ok((first, r))
    }

    /// Order agreement, landing in `C ∗ D`, multiplicativity and nondegeneracy.
    pub fn check(&self, source: &FiberProduct<T>, target: &FiberProduct<T>, tol: &Tolerance<T>) -> Result<Report> {
        let eps = tol.residual_abs;
        let basis = source.algebra.basis();
        let images: Vec<CMat<T>> = basis
            .iter()
            .map(|x| self.apply(x, tol))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .map(|(v, _)| v)
            .collect();
        let mut order = T::zero();
        for x in basis {
            order = order.max(self.apply(x, tol)?.1);
        }
        let mut report = Report::new("fiber morphism");
        report.residual("orders", "ρ_{I_M} ∘ ρ_{J_H} = ρ_{J_L} ∘ ρ_{I_K}", order, eps);
        report.residual("image", "(φ ∗ ψ)(A ∗ B) ⊆ C ∗ D", worst(target.algebra.space(), images.iter().cloned()), eps);
        let mut hom = T::zero();
        for (i, x) in basis.iter().enumerate() {
            let (xs, _) = self.apply(&x.adjoint(), tol)?;
            hom = hom.max(rel_diff(&xs, &images[i].adjoint()));
            for (j, y) in basis.iter().enumerate() {
                let (xy, _) = self.apply(&(x * y), tol)?;
                hom = hom.max(rel_diff(&xy, &(&images[i] * &images[j])));
            }
        }
        report.residual("homomorphism", "φ ∗ ψ is a *-homomorphism", hom, eps);
        let d = self.i_m.dst.dim();
        let range = OperatorSpace::span(d, d, &images, tol)?.range_dim(tol);
        report
            .info(
                "nondegenerate",
                "[(φ ∗ ψ)(A ∗ B)(L ⊗ M)] = L ⊗ M",
                if range == d { "yes" } else { "no" },
            )
            .dim("range", range)
            .dim("dim", d);
        Ok(report)
    }
}

/// A completely positive map `x ↦ Σ V* x V` from `L(H)` to `L(L)`.
#[derive(Debug, Clone)]
pub struct CpMap<T: Real> {
    kraus: Vec<CMat<T>>,
}

impl<T: Real> CpMap<T> {
    /// Each Kraus operator is `dim H × dim L`.
    pub fn from_kraus(kraus: Vec<CMat<T>>) -> Result<Self> {
        let Some(first) = kraus.first() else {
            return Err(Error::Shape("empty Kraus list".into()));
        };
        let shape = first.shape();
        if let Some(v) = kraus.iter().find(|v| v.shape() != shape) {
            return Err(Error::Shape(format!("Kraus operators {:?} and {:?}", shape, v.shape())));
        }
        if kraus.iter().any(|v| !kernel::is_finite(v)) {
            return Err(Error::NotCp(f64::NAN));
        }
        Ok(Self { kraus })
    }

    /// From the Choi matrix `Σ E_ij ⊗ φ(E_ij)`.
    pub fn from_choi(choi: &CMat<T>, dim_in: usize, dim_out: usize, tol: &Tolerance<T>) -> Result<Self> {
        let n = dim_in * dim_out;
        if choi.shape() != (n, n) {
            return Err(Error::Shape(format!("Choi matrix {:?} for {dim_in} → {dim_out}", choi.shape())));
        }
        let scale = T::one().max(max_abs(choi));
        let asym = max_abs(&(choi - choi.adjoint()));
        if asym > tol.residual_abs * scale {
            return Err(Error::NotHermitian(asym.as_f64()));
        }
        let (vals, vecs) = kernel::eigh(&kernel::hermitize(choi));
        let low = vals.last().copied().unwrap_or_else(T::zero);
        if low < -tol.residual_abs * scale {
            return Err(Error::NotCp(low.as_f64()));
        }
        let cut = tol.rank_rel * scale;
        let mut kraus = Vec::new();
        for (k, &l) in vals.iter().enumerate() {
            if l <= cut {
                continue;
            }
            let s = l.sqrt();
            kraus.push(DMatrix::from_fn(dim_in, dim_out, |i, r| vecs[(i * dim_out + r, k)].conj() * s));
        }
        if kraus.is_empty() {
            kraus.push(kernel::zeros(dim_in, dim_out));
        }
        Ok(Self { kraus })
    }

    pub fn kraus(&self) -> &[CMat<T>] {
        &self.kraus
    }

    pub fn dim_in(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn dim_out(&self) -> usize {
        self.kraus[0].ncols()
    }

    pub fn apply(&self, x: &CMat<T>) -> CMat<T> {
        let mut out = kernel::zeros(self.dim_out(), self.dim_out());
        for v in &self.kraus {
            out += v.adjoint() * x * v;
        }
        out
    }

    pub fn choi(&self) -> CMat<T> {
        let (n, l) = (self.dim_in(), self.dim_out());
        let mut j = kernel::zeros(n * l, n * l);
        for i in 0..n {
            for k in 0..n {
                let img = self.apply(&kernel::unit(n, n, i, k));
                j.view_mut((i * l, k * l), (l, l)).copy_from(&img);
            }
        }
        j
    }
}

/// `φ ∗ Id` on `L ⊲_θ γ` for a completely positive `φ` on `[A + ρ_β(𝔅†)]`.
#[derive(Debug, Clone)]
pub struct SliceCp<T: Real> {
    pub rtp: RelativeTensorProduct<T>,
    /// `L ⊲_θ γ`, generator `(w, c)` at index `w · dim γ + c`.
    pub completion: GramCompletion<T>,
    target: OperatorSpace<T>,
    phi: CpMap<T>,
}

pub fn slice_cp<T: Real>(
    phi: &CpMap<T>,
    a: &BimoduleAlgebra<T>,
    k: &CStarModule<T>,
    tol: &Tolerance<T>,
) -> Result<SliceCp<T>> {
    let h = a.bimodule().right();
    if phi.dim_in() != h.h_dim() {
        return Err(Error::Shape(format!("map on dimension {} for H of dimension {}", phi.dim_in(), h.h_dim())));
    }
    let rtp = RelativeTensorProduct::build(h.clone(), k.clone(), tol)?;
    let ket2 = OperatorSpace::span(rtp.dim(), h.h_dim(), rtp.ket2_basis(), tol)?;
    let target = ket2.product(a.algebra().space(), tol)?;
    let gamma = k.alpha().basis();
    let (nc, l) = (gamma.len(), phi.dim_out());
    let mut gram = kernel::zeros(l * nc, l * nc);
    for (c, x) in gamma.iter().enumerate() {
        for (c2, y) in gamma.iter().enumerate() {
            let t = phi.apply(&h.rho(&(x.adjoint() * y), tol)?);
            for w in 0..l {
                for w2 in 0..l {
                    gram[(w * nc + c, w2 * nc + c2)] = t[(w, w2)];
                }
            }
        }
    }
    let completion = gram_completion(&gram, tol)?;
    Ok(SliceCp { rtp, completion, target, phi: phi.clone() })
}

impl<T: Real> SliceCp<T> {
    pub fn dim(&self) -> usize {
        self.completion.out_dim
    }

    /// `(φ ∗ Id)(x)` for `x ∈ Ind_{|γ⟩₂}(A)`.
    pub fn apply(&self, x: &CMat<T>, tol: &Tolerance<T>) -> Result<CMat<T>> {
        let d = self.rtp.dim();
        if x.shape() != (d, d) {
            return Err(Error::Shape(format!("argument {:?} on a space of dimension {d}", x.shape())));
        }
        let ket2 = self.rtp.ket2_basis();
        let xa = x.adjoint();
        let outside = worst(&self.target, ket2.iter().flat_map(|s| [x * s, &xa * s]));
        if outside > tol.residual_abs {
            return Err(Error::NotInSpace(outside.as_f64()));
        }
        let (nc, l) = (ket2.len(), self.phi.dim_out());
        let mut form = kernel::zeros(l * nc, l * nc);
        for (c, p) in ket2.iter().enumerate() {
            let px = p.adjoint() * x;
            for (c2, q) in ket2.iter().enumerate() {
                let m = self.phi.apply(&(&px * q));
                for w in 0..l {
                    for w2 in 0..l {
                        form[(w * nc + c, w2 * nc + c2)] = m[(w, w2)];
                    }
                }
            }
        }
        let out = self.completion.induced_form(&form);
        let v = self.completion.vectors();
        let res = max_abs(&(v.adjoint() * &out * &v - &form));
        if res > tol.residual_abs * T::one().max(max_abs(&form)) {
            return Err(Error::Inconsistent(res.as_f64()));
        }
        Ok(out)
    }

    /// Positivity on `x*x` and on the 2×2 amplification `[xᵢ* xⱼ]`.
    pub fn positivity(&self, xs: &[CMat<T>], tol: &Tolerance<T>) -> Result<Report> {
        let mut report = Report::new("slice positivity");
        let mut low = T::zero();
        for x in xs {
            let img = self.apply(&(x.adjoint() * x), tol)?;
            low = low.min(kernel::min_eigenvalue(&kernel::hermitize(&img)) / T::one().max(op_norm(&img)));
        }
        report.residual("positive", "(φ ∗ Id)(x*x) ≥ 0", -low, tol.residual_abs);
        let n = self.dim();
        let mut low2 = T::zero();
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                let pair = [&xs[i], &xs[j]];
                let mut block = kernel::zeros(2 * n, 2 * n);
                for (p, x) in pair.iter().enumerate() {
                    for (q, y) in pair.iter().enumerate() {
                        let img = self.apply(&(x.adjoint() * *y), tol)?;
                        block.view_mut((p * n, q * n), (n, n)).copy_from(&img);
                    }
                }
                let s = T::one().max(op_norm(&block));
                low2 = low2.min(kernel::min_eigenvalue(&kernel::hermitize(&block)) / s);
            }
        }
        report.residual("two_positive", "[(φ ∗ Id)(xᵢ* xⱼ)] ≥ 0", -low2, tol.residual_abs);
        Ok(report)
    }
}

/// `φ ∗ Id` for `φ(a) = Σ Sₙ* a Tₙ` with `Sₙ, Tₙ ∈ L(L_λ, H_β)`.
#[derive(Debug, Clone)]
pub struct SliceSpatial<T: Real> {
    /// `A ∗ B` on `H ⊗ K`.
    pub source: FiberProduct<T>,
    /// `C ∗ B` on `L ⊗ K`.
    pub target: FiberProduct<T>,
    ss: Vec<CMat<T>>,
    ts: Vec<CMat<T>>,
    s_tilde: Vec<CMat<T>>,
    t_tilde: Vec<CMat<T>>,
}

pub fn slice_spatial<T: Real>(
    ss: &[CMat<T>],
    ts: &[CMat<T>],
    a: &BimoduleAlgebra<T>,
    c: &BimoduleAlgebra<T>,
    b: &BimoduleAlgebra<T>,
    tol: &Tolerance<T>,
) -> Result<SliceSpatial<T>> {
    if ss.is_empty() || ss.len() != ts.len() {
        return Err(Error::NotSpatiallyImplemented(format!("families of lengths {} and {}", ss.len(), ts.len())));
    }
    let shape = (a.n(), c.n());
    if let Some(x) = ss.iter().chain(ts).find(|x| x.shape() != shape) {
        return Err(Error::Shape(format!("operator {:?}, expected {:?}", x.shape(), shape)));
    }
    let lambda = c.bimodule().beta();
    let beta = a.bimodule().beta();
    let mor = ss
        .iter()
        .chain(ts)
        .fold(T::zero(), |r, x| r.max(morphism_residual(x, lambda, beta, MorphismKind::Full)));
    if mor > tol.residual_abs {
        return Err(Error::NotSpatiallyImplemented(format!("operator outside L(L_λ, H_β) (residual {:.3e})", mor.as_f64())));
    }
    let phi = |x: &CMat<T>| ss.iter().zip(ts).fold(kernel::zeros(c.n(), c.n()), |acc, (s, t)| acc + s.adjoint() * x * t);
    let into = worst(c.algebra().space(), a.algebra().basis().iter().map(phi));
    if into > tol.residual_abs {
        return Err(Error::NotSpatiallyImplemented(format!("φ(A) ⊄ C (residual {:.3e})", into.as_f64())));
    }
    let source = fiber_product(a, b, tol)?;
    let target = fiber_product(c, b, tol)?;
    let lift = |x: &CMat<T>| left_map(target.rtp(), source.rtp(), x, tol);
    let s_tilde = ss.iter().map(lift).collect::<Result<Vec<_>>>()?;
    let t_tilde = ts.iter().map(lift).collect::<Result<Vec<_>>>()?;
    Ok(SliceSpatial { source, target, ss: ss.to_vec(), ts: ts.to_vec(), s_tilde, t_tilde })
}

impl<T: Real> SliceSpatial<T> {
    /// `φ(a) = Σ Sₙ* a Tₙ`.
    pub fn phi(&self, x: &CMat<T>) -> CMat<T> {
        let n = self.ss[0].ncols();
        self.ss.iter().zip(&self.ts).fold(kernel::zeros(n, n), |acc, (s, t)| acc + s.adjoint() * x * t)
    }

    /// `Σ (Sₙ ⊗ Id)* x (Tₙ ⊗ Id)`.
    pub fn apply(&self, x: &CMat<T>) -> CMat<T> {
        let n = self.target.rtp().dim();
        self.s_tilde
            .iter()
            .zip(&self.t_tilde)
            .fold(kernel::zeros(n, n), |acc, (s, t)| acc + s.adjoint() * x * t)
    }

    /// Slice identity, landing in `C ∗ B` and the norm bound, on `x`.
    pub fn check(&self, x: &CMat<T>, tol: &Tolerance<T>) -> Result<Report> {
        let eps = tol.residual_abs;
        let y = self.apply(x);
        let mut report = Report::new("spatial slice");
        report.residual("domain", "x ∈ A ∗ B", rel_residual(self.source.algebra.space(), x), eps);
        let mut slice = T::zero();
        let src = self.source.rtp().ket2_basis();
        let dst = self.target.rtp().ket2_basis();
        for (p, pd) in src.iter().zip(dst) {
            for (q, qd) in src.iter().zip(dst) {
                let lhs = pd.adjoint() * &y * qd;
                let rhs = self.phi(&(p.adjoint() * x * q));
                slice = slice.max(rel_diff(&lhs, &rhs));
            }
        }
        report.residual("slice", "⟨η|₂(φ ∗ Id)(x)|η'⟩₂ = φ(⟨η|₂x|η'⟩₂)", slice, eps);
        report.residual("image", "(φ ∗ Id)(x) ∈ C ∗ B", rel_residual(self.target.algebra.space(), &y), eps);
        let ss: CMat<T> = self.ss.iter().fold(kernel::zeros(self.ss[0].ncols(), self.ss[0].ncols()), |a, s| a + s.adjoint() * s);
        let tt: CMat<T> = self.ts.iter().fold(kernel::zeros(self.ts[0].ncols(), self.ts[0].ncols()), |a, t| a + t.adjoint() * t);
        let bound = op_norm(&ss).sqrt() * op_norm(&tt).sqrt() * op_norm(x);
        let excess = (op_norm(&y) - bound) / T::one().max(bound);
        report.residual("norm", "‖(φ ∗ Id)(x)‖ ≤ ‖ΣS*S‖^½ ‖ΣT*T‖^½ ‖x‖", excess.max(T::zero()), eps);
        Ok(report)
    }
}

fn conjugate_space<T: Real>(space: &OperatorSpace<T>, u: &CMat<T>, tol: &Tolerance<T>) -> Result<OperatorSpace<T>> {
    space.sandwich(u, &u.adjoint(), tol)
}

/// Compares `Ad_r(A ∗ 𝔘)` with `Ind_β(𝔘) ∩ Ind_{ρ_β(𝔅†)}(A)` and the two
/// special cases `𝔘 = 𝔅†` and `A = 𝔅`.
pub fn unitality_check<T: Real>(a: &BimoduleAlgebra<T>, tol: &Tolerance<T>) -> Result<Report> {
    let eps = tol.residual_abs;
    let base = a.bimodule().b().clone();
    let k = base.k_dim();
    let mut report = Report::new("unitality");
    let unital = base.b_dag().contains_identity(tol) && base.b().contains_identity(tol);
    report.flag("unital", "Id ∈ 𝔅 and Id ∈ 𝔅†", unital);
    if !unital {
        return Ok(report);
    }
    let u = CStarBimodule::unit(base.clone());
    let r = unit_r(a.bimodule(), tol)?;

    let full = BimoduleAlgebra::new(u.clone(), ConcreteAlgebra::full(k), tol)?;
    let fp = fiber_product(a, &full, tol)?;
    let lhs = conjugate_space(fp.algebra.space(), &r.matrix, tol)?;
    let beta = a.bimodule().beta();
    let ind_u = ind(beta, &ConcreteAlgebra::full(k), tol)?;
    let rho = OperatorSpace::span(a.n(), a.n(), &a.bimodule().rho_beta_images(tol)?, tol)?;
    let ind_a = ind(&rho, a.algebra(), tol)?;
    let rhs = ind_u.algebra.space().intersection(ind_a.algebra.space(), tol)?;
    report
        .residual("general", "Ad_r(A ∗ L(𝔎)) = Ind_β(L(𝔎)) ∩ Ind_{ρ_β(𝔅†)}(A)", lhs.equality_residual(&rhs), eps)
        .dim("dim", lhs.dim());
    report.residual("ind_rho", "Ind_{ρ_β(𝔅†)}(A) = A", ind_a.algebra.space().equality_residual(a.algebra().space()), eps);

    match BimoduleAlgebra::new(u.clone(), base.b_dag().clone(), tol) {
        Ok(bd) => {
            let fp = fiber_product(a, &bd, tol)?;
            let lhs = conjugate_space(fp.algebra.space(), &r.matrix, tol)?;
            let a_beta = a.right_part(tol)?;
            report
                .residual("b_dag", "Ad_r(A ∗ 𝔅†) = A ∩ L(H_β)", lhs.equality_residual(&a_beta), eps)
                .dim("dim", a_beta.dim());
        }
        Err(Error::NotBAlgebra(m)) => {
            report.flag("b_dag", "Ad_r(A ∗ 𝔅†) = A ∩ L(H_β)", true).note(format!("𝔅† is not an algebra over U: {m}"));
        }
        Err(e) => return Err(e),
    }

    let pair = BimoduleAlgebra::new(u.clone(), base.b().clone(), tol)
        .and_then(|b| BimoduleAlgebra::new(u.clone(), base.b_dag().clone(), tol).map(|bd| (b, bd)));
    match pair {
        Ok((b, bd)) => {
            let ru = unit_r(&u, tol)?;
            let fp = fiber_product(&b, &bd, tol)?;
            let lhs = conjugate_space(fp.algebra.space(), &ru.matrix, tol)?;
            let m = base.b().multiplier_algebra(tol)?.intersection(&base.b_dag().multiplier_algebra(tol)?, tol)?;
            report
                .residual("base", "Ad_r(𝔅 ∗ 𝔅†) = M(𝔅) ∩ M(𝔅†)", lhs.equality_residual(m.space()), eps)
                .dim("dim", m.dim());
        }
        Err(Error::NotBAlgebra(m)) => {
            report.flag("base", "Ad_r(𝔅 ∗ 𝔅†) = M(𝔅) ∩ M(𝔅†)", true).note(format!("not algebras over U: {m}"));
        }
        Err(e) => return Err(e),
    }
    Ok(report)
}

/// Reports how `Ad_a((A ∗ B) ∗ C)` and `A ∗ (B ∗ C)` sit inside each other.
pub fn assoc_compare<T: Real>(
    a: &BimoduleAlgebra<T>,
    b: &BimoduleAlgebra<T>,
    c: &BimoduleAlgebra<T>,
    tol: &Tolerance<T>,
) -> Result<Report> {
    let assoc = assoc_iso(a.bimodule(), b.bimodule(), c.bimodule(), tol)?;
    let ab = fiber_product(a, b, tol)?.as_algebra(tol)?;
    let left = fiber_product(&ab, c, tol)?;
    let bc = fiber_product(b, c, tol)?.as_algebra(tol)?;
    let right = fiber_product(a, &bc, tol)?;
    let moved = conjugate_space(left.algebra.space(), &assoc.matrix, tol)?;
    let fwd = right.algebra.space().containment_residual(&moved);
    let back = moved.containment_residual(right.algebra.space());
    let mut report = Report::new("associativity");
    report
        .info("dims", "dimensions of both sides", format!("{} and {}", moved.dim(), right.dim()))
        .dim("left", moved.dim())
        .dim("right", right.dim());
    report.info("left_in_right", "Ad_a((A ∗ B) ∗ C) ⊆ A ∗ (B ∗ C)", format!("residual {:.3e}", fwd.as_f64()));
    report.info("right_in_left", "A ∗ (B ∗ C) ⊆ Ad_a((A ∗ B) ∗ C)", format!("residual {:.3e}", back.as_f64()));
    report.info(
        "equal",
        "Ad_a((A ∗ B) ∗ C) = A ∗ (B ∗ C)",
        if fwd.max(back) <= tol.residual_abs { "yes" } else { "no" },
    );
    Ok(report)
}

/// `⊞ᵢⱼ (Aⁱ ∗ Bʲ) ⇄ (⊞Aⁱ) ∗ (⊞Bʲ)` for finite families.
#[derive(Debug, Clone)]
pub struct AlgebraDirectSum<T: Real> {
    pub total: FiberProduct<T>,
    /// Row-major over `(i, j)`.
    pub parts: Vec<FiberProduct<T>>,
    forward: Vec<CMat<T>>,
    backward: Vec<CMat<T>>,
    pub report: Report,
}

impl<T: Real> AlgebraDirectSum<T> {
    /// `(xᵢⱼ) ↦ Σ (ιⁱ ⊗ ιʲ) xᵢⱼ (πⁱ ⊗ πʲ)`.
    pub fn forward(&self, parts: &[CMat<T>]) -> CMat<T> {
        let d = self.total.rtp().dim();
        parts
            .iter()
            .enumerate()
            .fold(kernel::zeros(d, d), |acc, (p, x)| acc + &self.forward[p] * x * &self.backward[p])
    }

    /// `y ↦ ((πⁱ ⊗ πʲ) y (ιⁱ ⊗ ιʲ))`.
    pub fn backward(&self, y: &CMat<T>) -> Vec<CMat<T>> {
        self.forward.iter().zip(&self.backward).map(|(f, b)| b * y * f).collect()
    }
}

pub fn algebra_direct_sum<T: Real>(
    left: &[BimoduleAlgebra<T>],
    right: &[BimoduleAlgebra<T>],
    tol: &Tolerance<T>,
) -> Result<AlgebraDirectSum<T>> {
    let hs: Vec<CStarModule<T>> = left.iter().map(|a| a.bimodule().right().clone()).collect();
    let ks: Vec<CStarModule<T>> = right.iter().map(|b| b.bimodule().left().clone()).collect();
    let sum_alg = |algs: &[BimoduleAlgebra<T>], mods: &[CStarModule<T>]| -> Result<(CStarModule<T>, ConcreteAlgebra<T>)> {
        let ds = direct_sum(mods, tol)?;
        let n = ds.sum.h_dim();
        let mut gens = Vec::new();
        for ((alg, i), p) in algs.iter().zip(&ds.injections).zip(&ds.projections) {
            for x in alg.algebra().basis() {
                gens.push(i * x * p);
            }
        }
        let space = OperatorSpace::span(n, n, &gens, tol)?;
        Ok((ds.sum, ConcreteAlgebra::from_space(space, tol)?))
    };
    let (hsum, asum) = sum_alg(left, &hs)?;
    let (ksum, bsum) = sum_alg(right, &ks)?;
    let total = fiber_product(
        &BimoduleAlgebra::over_right(&hsum, asum, tol)?,
        &BimoduleAlgebra::over_left(&ksum, bsum, tol)?,
        tol,
    )?;
    let compat = direct_sum_compat(&hs, &ks, tol)?;
    let mut parts = Vec::new();
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    let (mut r, mut c) = (0, 0);
    for (i, a) in left.iter().enumerate() {
        for (j, b) in right.iter().enumerate() {
            let ra = BimoduleAlgebra::over_right(a.bimodule().right(), a.algebra().clone(), tol)?;
            let rb = BimoduleAlgebra::over_left(b.bimodule().left(), b.algebra().clone(), tol)?;
            let fp = fiber_product(&ra, &rb, tol)?;
            let pd = compat.parts[i * right.len() + j].dim();
            forward.push(compat.forward.columns(c, pd).into_owned());
            backward.push(compat.backward.rows(r, pd).into_owned());
            r += pd;
            c += pd;
            parts.push(fp);
        }
    }
    let mut out = AlgebraDirectSum { total, parts, forward, backward, report: Report::new("direct sums of algebras") };
    let eps = tol.residual_abs;
    let sum_dim: usize = out.parts.iter().map(|p| p.dim()).sum();
    let mut report = Report::new("direct sums of algebras");
    report.count("dims", "Σ dim(Aⁱ ∗ Bʲ) = dim (⊞Aⁱ) ∗ (⊞Bʲ)", sum_dim, out.total.dim());
    let mut fwd = T::zero();
    let mut round = T::zero();
    for (p, part) in out.parts.iter().enumerate() {
        for x in part.algebra.basis() {
            let mut xs: Vec<CMat<T>> = out
                .parts
                .iter()
                .map(|q| kernel::zeros(q.rtp().dim(), q.rtp().dim()))
                .collect();
            xs[p] = x.clone();
            let y = out.forward(&xs);
            fwd = fwd.max(rel_residual(out.total.algebra.space(), &y));
            for (q, z) in out.backward(&y).iter().enumerate() {
                round = round.max(rel_diff(z, &xs[q]));
            }
        }
    }
    report.residual("forward", "(ιⁱ ∗ ιʲ)(Aⁱ ∗ Bʲ) ⊆ (⊞A) ∗ (⊞B)", fwd, eps);
    report.residual("backward_forward", "(π ∗ π)(ι ∗ ι) = Id", round, eps);
    let mut bwd = T::zero();
    let mut round2 = T::zero();
    for y in out.total.algebra.basis() {
        let zs = out.backward(y);
        for (z, part) in zs.iter().zip(&out.parts) {
            bwd = bwd.max(rel_residual(part.algebra.space(), z));
        }
        round2 = round2.max(rel_diff(&out.forward(&zs), y));
    }
    report.residual("backward", "(πⁱ ∗ πʲ)((⊞A) ∗ (⊞B)) ⊆ Aⁱ ∗ Bʲ", bwd, eps);
    report.residual("forward_backward", "Σ (ι ∗ ι)(π ∗ π) = Id", round2, eps);
    report.merge("compat", compat.report);
    out.report = report;
    Ok(out)
}
