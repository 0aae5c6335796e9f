//! Relative tensor products `H ⊗_𝔟 K = β ⊳ 𝔎 ⊲ γ` and their structure maps.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::base::CStarBase;
use crate::error::{Error, Result};
use crate::kernel::{self, gram_completion, max_abs, pseudo_inverse, vec_of, GramCompletion, Tolerance};
use crate::module::{direct_sum, CStarBimodule, CStarModule};
use crate::opspace::OperatorSpace;
use crate::report::Report;
use crate::scalar::{CMat, CVec, Real};

/// `H_β ⊗_𝔟 K_γ` with coordinates for the generators `ξ_a ⊗ e_z ⊗ η_c`.
#[derive(Debug, Clone)]
pub struct RelativeTensorProduct<T: Real> {
    h: CStarModule<T>,
    k: CStarModule<T>,
    completion: GramCompletion<T>,
    ket1: Vec<CMat<T>>,
    ket2: Vec<CMat<T>>,
    rho_beta_dag: Vec<CMat<T>>,
    rho_gamma_b: Vec<CMat<T>>,
}

impl<T: Real> RelativeTensorProduct<T> {
    /// `h` is a module over `𝔟`, `k` a module over `𝔟†`.
    pub fn new(h: CStarModule<T>, k: CStarModule<T>, tol: &Tolerance<T>) -> Result<Self> {
        for (name, m) in [("H", &h), ("K", &k)] {
            if let Some(f) = m.check(tol).failures().next() {
                return Err(Error::Axiom(format!("{name}: {} (residual {:.3e})", f.statement, f.residual)));
            }
        }
        Self::build(h, k, tol)
    }

    pub(crate) fn build(h: CStarModule<T>, k: CStarModule<T>, tol: &Tolerance<T>) -> Result<Self> {
        if !k.base().same_as(&h.base().opposite(), tol) {
            return Err(Error::Precondition("K must be a module over the opposite base of H".into()));
        }
        let kz = h.base().k_dim();
        let beta = h.alpha().basis();
        let gamma = k.alpha().basis();
        let (nb, nc) = (beta.len(), gamma.len());
        let n = nb * kz * nc;

        let p: Vec<Vec<CMat<T>>> = beta.iter().map(|x| beta.iter().map(|y| x.adjoint() * y).collect()).collect();
        let q: Vec<Vec<CMat<T>>> = gamma.iter().map(|x| gamma.iter().map(|y| x.adjoint() * y).collect()).collect();
        let mut gram = kernel::zeros::<T>(n, n);
        for a in 0..nb {
            for a2 in 0..nb {
                for c in 0..nc {
                    for c2 in 0..nc {
                        let m = &p[a][a2] * &q[c][c2];
                        for z in 0..kz {
                            for z2 in 0..kz {
                                gram[((a * kz + z) * nc + c, (a2 * kz + z2) * nc + c2)] = m[(z, z2)];
                            }
                        }
                    }
                }
            }
        }
        let completion = gram_completion(&kernel::hermitize(&gram), tol)?;
        let vectors = completion.vectors();
        let d = completion.out_dim;

        let ek = DMatrix::from_fn(k.h_dim(), kz * nc, |r, col| gamma[col % nc][(r, col / nc)]);
        let eh = DMatrix::from_fn(h.h_dim(), nb * kz, |r, col| beta[col / kz][(r, col % kz)]);
        let pk = pseudo_inverse(&ek, tol);
        let ph = pseudo_inverse(&eh, tol);
        let mut worst = T::zero();
        let mut ket1 = Vec::with_capacity(nb);
        for a in 0..nb {
            let images = vectors.columns(a * kz * nc, kz * nc).into_owned();
            let m = &images * &pk;
            worst = worst.max(max_abs(&(&m * &ek - &images)));
            ket1.push(m);
        }
        let mut ket2 = Vec::with_capacity(nc);
        for c in 0..nc {
            let images = DMatrix::from_fn(d, nb * kz, |r, col| vectors[(r, col * nc + c)]);
            let m = &images * &ph;
            worst = worst.max(max_abs(&(&m * &eh - &images)));
            ket2.push(m);
        }
        if worst > tol.residual_abs * T::one().max(max_abs(&vectors)) {
            return Err(Error::Inconsistent(worst.as_f64()));
        }
        let rho_beta_dag = h.base().b_dag().basis().iter().map(|y| h.rho(y, tol)).collect::<Result<_>>()?;
        let rho_gamma_b = k.base().b_dag().basis().iter().map(|y| k.rho(y, tol)).collect::<Result<_>>()?;
        Ok(Self { h, k, completion, ket1, ket2, rho_beta_dag, rho_gamma_b })
    }

    pub fn dim(&self) -> usize {
        self.completion.out_dim
    }

    /// The base `𝔟` of the left factor.
    pub fn base(&self) -> &Arc<CStarBase<T>> {
        self.h.base()
    }

    pub fn h(&self) -> &CStarModule<T> {
        &self.h
    }

    pub fn k(&self) -> &CStarModule<T> {
        &self.k
    }

    pub fn completion(&self) -> &GramCompletion<T> {
        &self.completion
    }

    pub fn generator_count(&self) -> usize {
        self.completion.input_count
    }

    /// `(β index, 𝔎 index, γ index)` of generator `g`.
    pub fn gen_index(&self, g: usize) -> (usize, usize, usize) {
        let nc = self.k.alpha().dim();
        let kz = self.base().k_dim();
        (g / (kz * nc), (g / nc) % kz, g % nc)
    }

    pub fn index(&self, a: usize, z: usize, c: usize) -> usize {
        (a * self.base().k_dim() + z) * self.k.alpha().dim() + c
    }

    /// Coordinates of `ξ_a ⊗ e_z ⊗ η_c`.
    pub fn vector(&self, g: usize) -> CVec<T> {
        self.completion.vector(g)
    }

    pub fn vectors(&self) -> CMat<T> {
        self.completion.vectors()
    }

    /// `|ξ_a⟩₁` for the basis of `β`.
    pub fn ket1_basis(&self) -> &[CMat<T>] {
        &self.ket1
    }

    /// `|η_c⟩₂` for the basis of `γ`.
    pub fn ket2_basis(&self) -> &[CMat<T>] {
        &self.ket2
    }

    /// `|ξ⟩₁: K → H ⊗_𝔟 K`, `ω ↦ ξ ⊗ ω`.
    pub fn ketbra1(&self, xi: &CMat<T>, tol: &Tolerance<T>) -> Result<CMat<T>> {
        expand(self.h.alpha(), &self.ket1, xi, self.dim(), self.k.h_dim(), tol)
    }

    /// `|η⟩₂: H → H ⊗_𝔟 K`, `ω ↦ ω ⊗ η`.
    pub fn ketbra2(&self, eta: &CMat<T>, tol: &Tolerance<T>) -> Result<CMat<T>> {
        expand(self.k.alpha(), &self.ket2, eta, self.dim(), self.h.h_dim(), tol)
    }

    /// Operator on the completion sending each generator to the matching column.
    pub fn induced(&self, images: &CMat<T>, tol: &Tolerance<T>) -> Result<CMat<T>> {
        let (m, res) = self.completion.induced_map(images);
        if res > tol.residual_abs * T::one().max(max_abs(images)) {
            return Err(Error::Inconsistent(res.as_f64()));
        }
        Ok(m)
    }

    /// `S ⊲ Id` for `S ∈ ρ_β(𝔅†)'`.
    pub fn left_op(&self, s: &CMat<T>, tol: &Tolerance<T>) -> Result<CMat<T>> {
        left_map(self, self, s, tol)
    }

    /// `Id ⊳ T` for `T ∈ ρ_γ(𝔅)'`.
    pub fn right_op(&self, t: &CMat<T>, tol: &Tolerance<T>) -> Result<CMat<T>> {
        right_map(self, self, t, tol)
    }

    /// `S ⊗_𝔟 T` on this space.
    pub fn op_tensor(&self, s: &CMat<T>, t: &CMat<T>, case: OpCase, tol: &Tolerance<T>) -> Result<CMat<T>> {
        op_tensor_between(self, self, s, t, case, tol)
    }
}

fn expand<T: Real>(
    space: &OperatorSpace<T>,
    kets: &[CMat<T>],
    x: &CMat<T>,
    rows: usize,
    cols: usize,
    tol: &Tolerance<T>,
) -> Result<CMat<T>> {
    if x.shape() != (space.cod_dim(), space.dom_dim()) {
        return Err(Error::Shape(format!("ket-bra argument {:?}", x.shape())));
    }
    if !space.contains(x, tol) {
        return Err(Error::NotInSpace(space.residual(x).as_f64()));
    }
    let coords = space.coords(x);
    let mut m = kernel::zeros(rows, cols);
    for (k, w) in kets.iter().zip(coords.iter()) {
        m += k * *w;
    }
    Ok(m)
}

/// `ρ(y)` on `m` for each `y` in `ys`, reusing `cached` when `ys` is `own`.
fn rho_on<T: Real>(
    m: &CStarModule<T>,
    ys: &[CMat<T>],
    own: &[CMat<T>],
    cached: &[CMat<T>],
    tol: &Tolerance<T>,
) -> Result<Vec<CMat<T>>> {
    let same = ys.len() == own.len() && ys.iter().zip(own).all(|(a, b)| max_abs(&(a - b)) <= tol.residual_abs);
    if same {
        return Ok(cached.to_vec());
    }
    ys.iter().map(|y| m.rho(y, tol)).collect()
}

/// `S ⊲ Id: H₁ ⊗ K → H₂ ⊗ K` for `S` intertwining `ρ_{β₁}` and `ρ_{β₂}` on `𝔅†`.
pub fn left_map<T: Real>(
    src: &RelativeTensorProduct<T>,
    dst: &RelativeTensorProduct<T>,
    s: &CMat<T>,
    tol: &Tolerance<T>,
) -> Result<CMat<T>> {
    if s.shape() != (dst.h.h_dim(), src.h.h_dim()) {
        return Err(Error::Shape(format!("S {:?} between H spaces", s.shape())));
    }
    let ys = src.base().b_dag().basis();
    let r2 = rho_on(&dst.h, ys, dst.base().b_dag().basis(), &dst.rho_beta_dag, tol)?;
    let mut comm = T::zero();
    for (r1, r2) in src.rho_beta_dag.iter().zip(&r2) {
        comm = comm.max(max_abs(&(s * r1 - r2 * s)));
    }
    if comm > tol.residual_abs * T::one().max(max_abs(s)) {
        return Err(Error::NotInCommutant(comm.as_f64()));
    }
    let gamma = src.k.alpha().basis();
    let kets: Vec<CMat<T>> = gamma.iter().map(|e| dst.ketbra2(e, tol)).collect::<Result<_>>()?;
    let beta = src.h.alpha().basis();
    let kz = src.base().k_dim();
    let mut images = kernel::zeros(dst.dim(), src.generator_count());
    for (a, xi) in beta.iter().enumerate() {
        let sx = s * xi;
        for (c, ket) in kets.iter().enumerate() {
            let m = ket * &sx;
            for z in 0..kz {
                images.set_column(src.index(a, z, c), &m.column(z));
            }
        }
    }
    src.induced(&images, tol)
}

/// `Id ⊳ T: H ⊗ K₁ → H ⊗ K₂` for `T` intertwining `ρ_{γ₁}` and `ρ_{γ₂}` on `𝔅`.
pub fn right_map<T: Real>(
    src: &RelativeTensorProduct<T>,
    dst: &RelativeTensorProduct<T>,
    t: &CMat<T>,
    tol: &Tolerance<T>,
) -> Result<CMat<T>> {
    if t.shape() != (dst.k.h_dim(), src.k.h_dim()) {
        return Err(Error::Shape(format!("T {:?} between K spaces", t.shape())));
    }
    let ys = src.k.base().b_dag().basis();
    let r2 = rho_on(&dst.k, ys, dst.k.base().b_dag().basis(), &dst.rho_gamma_b, tol)?;
    let mut comm = T::zero();
    for (r1, r2) in src.rho_gamma_b.iter().zip(&r2) {
        comm = comm.max(max_abs(&(t * r1 - r2 * t)));
    }
    if comm > tol.residual_abs * T::one().max(max_abs(t)) {
        return Err(Error::NotInCommutant(comm.as_f64()));
    }
    let beta = src.h.alpha().basis();
    let kets: Vec<CMat<T>> = beta.iter().map(|x| dst.ketbra1(x, tol)).collect::<Result<_>>()?;
    let gamma = src.k.alpha().basis();
    let kz = src.base().k_dim();
    let mut images = kernel::zeros(dst.dim(), src.generator_count());
    for (c, eta) in gamma.iter().enumerate() {
        let te = t * eta;
        for (a, ket) in kets.iter().enumerate() {
            let m = ket * &te;
            for z in 0..kz {
                images.set_column(src.index(a, z, c), &m.column(z));
            }
        }
    }
    src.induced(&images, tol)
}

/// Which sufficient condition makes `S ⊲ Id` and `Id ⊳ T` commute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpCase {
    /// `S β₁ ⊆ β₂`.
    SemiLeft,
    /// `T γ₁ ⊆ γ₂`.
    SemiRight,
    /// `(𝔅†)' = 𝔅''`.
    Commuting,
}

impl fmt::Display for OpCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpCase::SemiLeft => "semi_left",
            OpCase::SemiRight => "semi_right",
            OpCase::Commuting => "commuting",
        })
    }
}

impl FromStr for OpCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semi_left" => Ok(OpCase::SemiLeft),
            "semi_right" => Ok(OpCase::SemiRight),
            "commuting" => Ok(OpCase::Commuting),
            other => Err(Error::Precondition(format!("unknown case '{other}'"))),
        }
    }
}

fn check_case<T: Real>(
    src: &RelativeTensorProduct<T>,
    dst: &RelativeTensorProduct<T>,
    s: &CMat<T>,
    t: &CMat<T>,
    case: OpCase,
    tol: &Tolerance<T>,
) -> Result<()> {
    match case {
        OpCase::SemiLeft => {
            let r = src.h.alpha().basis().iter().fold(T::zero(), |m, x| m.max(dst.h.alpha().residual(&(s * x))));
            if r > tol.residual_abs {
                return Err(Error::CaseViolated(format!("semi_left: S β ⊄ β (residual {:.3e})", r.as_f64())));
            }
        }
        OpCase::SemiRight => {
            let r = src.k.alpha().basis().iter().fold(T::zero(), |m, x| m.max(dst.k.alpha().residual(&(t * x))));
            if r > tol.residual_abs {
                return Err(Error::CaseViolated(format!("semi_right: T γ ⊄ γ (residual {:.3e})", r.as_f64())));
            }
        }
        OpCase::Commuting => {
            let base = src.base();
            let lhs = base.b_dag_commutant().dim();
            let rhs = base.b_commutant().commutant(tol).dim();
            if lhs != rhs {
                return Err(Error::CaseViolated(format!("commuting: dim (𝔅†)' = {lhs} but dim 𝔅'' = {rhs}")));
            }
        }
    }
    Ok(())
}

fn case_error(e: Error) -> Error {
    match e {
        Error::NotInCommutant(r) => Error::CaseViolated(format!("operator outside the required commutant ({r:.3e})")),
        other => other,
    }
}

/// `S ⊗_𝔟 T: H₁ ⊗ K₁ → H₂ ⊗ K₂`, computed as `(S ⊲ Id)(Id ⊳ T)` and checked
/// against `(Id ⊳ T)(S ⊲ Id)`.
pub fn op_tensor_between<T: Real>(
    src: &RelativeTensorProduct<T>,
    dst: &RelativeTensorProduct<T>,
    s: &CMat<T>,
    t: &CMat<T>,
    case: OpCase,
    tol: &Tolerance<T>,
) -> Result<CMat<T>> {
    check_case(src, dst, s, t, case, tol)?;
    let same = std::ptr::eq(src, dst);
    let (mid_a, mid_b);
    let (ma, mb) = if same {
        (src, src)
    } else {
        mid_a = RelativeTensorProduct::build(src.h.clone(), dst.k.clone(), tol)?;
        mid_b = RelativeTensorProduct::build(dst.h.clone(), src.k.clone(), tol)?;
        (&mid_a, &mid_b)
    };
    let first = left_map(ma, dst, s, tol).map_err(case_error)? * right_map(src, ma, t, tol).map_err(case_error)?;
    let second = right_map(mb, dst, t, tol).map_err(case_error)? * left_map(src, mb, s, tol).map_err(case_error)?;
    let nc = max_abs(&(&first - &second));
    if nc > tol.residual_abs * T::one().max(max_abs(&first)) {
        return Err(Error::NonCommuting(nc.as_f64()));
    }
    Ok(first)
}

/// A relative tensor product of bimodules with its legs.
#[derive(Debug, Clone)]
pub struct RtpBimodule<T: Real> {
    pub rtp: RelativeTensorProduct<T>,
    /// `(α ◁ γ, β ▷ δ)` over `(𝔞†, 𝔠)`.
    pub bimodule: CStarBimodule<T>,
    pub report: Report,
}

/// `_αH_β ⊗_𝔟 _γK_δ` as a bimodule over `(𝔞†, 𝔠)`.
pub fn rtp_bimodule<T: Real>(
    h: &CStarBimodule<T>,
    k: &CStarBimodule<T>,
    tol: &Tolerance<T>,
) -> Result<RtpBimodule<T>> {
    for (name, m) in [("H", h), ("K", k)] {
        if let Some(f) = m.check(tol).failures().next() {
            return Err(Error::Axiom(format!("{name}: {} (residual {:.3e})", f.statement, f.residual)));
        }
    }
    let rtp = RelativeTensorProduct::build(h.right().clone(), k.left().clone(), tol)?;
    let d = rtp.dim();
    let ag: Vec<CMat<T>> = rtp
        .ket2
        .iter()
        .flat_map(|ket| h.alpha().basis().iter().map(move |x| ket * x))
        .collect();
    let bd: Vec<CMat<T>> = rtp
        .ket1
        .iter()
        .flat_map(|ket| k.beta().basis().iter().map(move |y| ket * y))
        .collect();
    let alpha = OperatorSpace::span(d, h.a().k_dim(), &ag, tol)?;
    let beta = OperatorSpace::span(d, k.b().k_dim(), &bd, tol)?;
    let bimodule = CStarBimodule::new(h.a().clone(), alpha, k.b().clone(), beta, tol)?;

    let mut report = Report::new("relative tensor product of bimodules");
    report.count("dim", "dim H ⊗_𝔟 K", d, d).dim("h", h.h_dim()).dim("k", k.h_dim());
    let mut left = T::zero();
    for x in bimodule.left().base().b_commutant().basis() {
        let lhs = bimodule.rho_alpha(x, tol)?;
        let rhs = rtp.left_op(&h.rho_alpha(x, tol)?, tol)?;
        left = left.max(max_abs(&(lhs - rhs)));
    }
    report.residual("rho_left", "ρ_{α◁γ}(x) = ρ_α(x) ⊲ Id on (𝔄†)'", left, tol.residual_abs);
    let mut right = T::zero();
    for y in k.b().b_commutant().basis() {
        let lhs = bimodule.rho_beta(y, tol)?;
        let rhs = rtp.right_op(&k.rho_beta(y, tol)?, tol)?;
        right = right.max(max_abs(&(lhs - rhs)));
    }
    report.residual("rho_right", "ρ_{β▷δ}(y) = Id ⊳ ρ_δ(y) on ℭ'", right, tol.residual_abs);
    report.merge("bimodule", bimodule.check(tol));
    Ok(RtpBimodule { rtp, bimodule, report })
}

/// A structure isomorphism out of a relative tensor product.
#[derive(Debug, Clone)]
pub struct StructureIso<T: Real> {
    pub source: RtpBimodule<T>,
    pub matrix: CMat<T>,
    pub report: Report,
}

fn unitary_residual<T: Real>(u: &CMat<T>) -> T {
    if u.nrows() != u.ncols() {
        return T::max_value().unwrap_or_else(T::one);
    }
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - kernel::eye(n))).max(max_abs(&(u * u.adjoint() - kernel::eye(n))))
}

fn image_residual<T: Real>(u: &CMat<T>, from: &OperatorSpace<T>, to: &OperatorSpace<T>, tol: &Tolerance<T>) -> Result<T> {
    let id = kernel::eye(from.dom_dim());
    Ok(from.sandwich(u, &id, tol)?.equality_residual(to))
}

/// `r: H ⊗_𝔟 U → H`, `ξ ⊗ ζ ⊲ b† ↦ ξ b† ζ`.
pub fn unit_r<T: Real>(h: &CStarBimodule<T>, tol: &Tolerance<T>) -> Result<StructureIso<T>> {
    let u = CStarBimodule::unit(h.b().clone());
    let source = rtp_bimodule(h, &u, tol)?;
    let rtp = &source.rtp;
    let beta = h.beta().basis();
    let bdag = u.alpha().basis();
    let kz = rtp.base().k_dim();
    let mut images = kernel::zeros(h.h_dim(), rtp.generator_count());
    for (a, xi) in beta.iter().enumerate() {
        for (c, b) in bdag.iter().enumerate() {
            let m = xi * b;
            for z in 0..kz {
                images.set_column(rtp.index(a, z, c), &m.column(z));
            }
        }
    }
    let matrix = rtp.induced(&images, tol)?;
    let mut report = Report::new("right unit");
    report.residual("unitary", "r is unitary", unitary_residual(&matrix), tol.residual_abs);
    report.residual(
        "alpha",
        "r (α ◁ 𝔅†) = α",
        image_residual(&matrix, source.bimodule.alpha(), h.alpha(), tol)?,
        tol.residual_abs,
    );
    report.residual(
        "beta",
        "r (β ▷ 𝔅) = β",
        image_residual(&matrix, source.bimodule.beta(), h.beta(), tol)?,
        tol.residual_abs,
    );
    Ok(StructureIso { source, matrix, report })
}

/// `l: U ⊗_𝔟 K → K`, `b ⊗ ζ ⊲ η ↦ η b ζ`.
pub fn unit_l<T: Real>(k: &CStarBimodule<T>, tol: &Tolerance<T>) -> Result<StructureIso<T>> {
    let u = CStarBimodule::unit(k.a().clone());
    let source = rtp_bimodule(&u, k, tol)?;
    let rtp = &source.rtp;
    let bs = u.beta().basis();
    let gamma = k.alpha().basis();
    let kz = rtp.base().k_dim();
    let mut images = kernel::zeros(k.h_dim(), rtp.generator_count());
    for (a, b) in bs.iter().enumerate() {
        for (c, eta) in gamma.iter().enumerate() {
            let m = eta * b;
            for z in 0..kz {
                images.set_column(rtp.index(a, z, c), &m.column(z));
            }
        }
    }
    let matrix = rtp.induced(&images, tol)?;
    let mut report = Report::new("left unit");
    report.residual("unitary", "l is unitary", unitary_residual(&matrix), tol.residual_abs);
    report.residual(
        "alpha",
        "l (𝔅† ◁ γ) = γ",
        image_residual(&matrix, source.bimodule.alpha(), k.alpha(), tol)?,
        tol.residual_abs,
    );
    report.residual(
        "beta",
        "l (𝔅 ▷ δ) = δ",
        image_residual(&matrix, source.bimodule.beta(), k.beta(), tol)?,
        tol.residual_abs,
    );
    Ok(StructureIso { source, matrix, report })
}

/// The associator `(H ⊗ K) ⊗ L → H ⊗ (K ⊗ L)` with all intermediate products.
#[derive(Debug, Clone)]
pub struct Associator<T: Real> {
    pub hk: RtpBimodule<T>,
    pub kl: RtpBimodule<T>,
    pub left: RtpBimodule<T>,
    pub right: RtpBimodule<T>,
    pub matrix: CMat<T>,
    pub report: Report,
}

pub fn assoc_iso<T: Real>(
    h: &CStarBimodule<T>,
    k: &CStarBimodule<T>,
    l: &CStarBimodule<T>,
    tol: &Tolerance<T>,
) -> Result<Associator<T>> {
    let hk = rtp_bimodule(h, k, tol)?;
    let kl = rtp_bimodule(k, l, tol)?;
    let left = rtp_bimodule(&hk.bimodule, l, tol)?;
    let right = rtp_bimodule(h, &kl.bimodule, tol)?;

    // β ▷ δ is spanned by |ξ_a⟩₁ δ_j; expand its basis in that family.
    let lz = l.a().k_dim();
    let delta = k.beta().basis();
    let family: Vec<CVec<T>> = hk
        .rtp
        .ket1
        .iter()
        .flat_map(|ket| delta.iter().map(move |y| vec_of(&(ket * y))))
        .collect();
    let fmat = if family.is_empty() {
        kernel::zeros(hk.rtp.dim() * lz, 0)
    } else {
        DMatrix::from_columns(&family)
    };
    let finv = pseudo_inverse(&fmat, tol);
    let nd = delta.len();
    let eps = l.alpha().basis();
    let g: Vec<Vec<Vec<CMat<T>>>> = right
        .rtp
        .ket1
        .iter()
        .map(|k1| {
            delta
                .iter()
                .map(|y| kl.rtp.ket2.iter().map(|k2| k1 * k2 * y).collect())
                .collect()
        })
        .collect();
    let lrtp = &left.rtp;
    let mut images = kernel::zeros(right.rtp.dim(), lrtp.generator_count());
    for (p, bp) in hk.bimodule.beta().basis().iter().enumerate() {
        let coeff = &finv * vec_of(bp);
        for e in 0..eps.len() {
            let mut m = kernel::zeros(right.rtp.dim(), lz);
            for (a, ga) in g.iter().enumerate() {
                for (j, gaj) in ga.iter().enumerate() {
                    let w = coeff[a * nd + j];
                    if w != Complex::new(T::zero(), T::zero()) {
                        m += &gaj[e] * w;
                    }
                }
            }
            for w in 0..lz {
                images.set_column(lrtp.index(p, w, e), &m.column(w));
            }
        }
    }
    let matrix = lrtp.induced(&images, tol)?;
    let mut report = Report::new("associator");
    report
        .residual("unitary", "a is unitary", unitary_residual(&matrix), tol.residual_abs)
        .dim("left", lrtp.dim())
        .dim("right", right.rtp.dim());
    report.residual(
        "alpha",
        "a ((α ◁ γ) ◁ ε) = α ◁ (γ ◁ ε)",
        image_residual(&matrix, left.bimodule.alpha(), right.bimodule.alpha(), tol)?,
        tol.residual_abs,
    );
    report.residual(
        "beta",
        "a ((β ▷ δ) ▷ φ) = β ▷ (δ ▷ φ)",
        image_residual(&matrix, left.bimodule.beta(), right.bimodule.beta(), tol)?,
        tol.residual_abs,
    );
    Ok(Associator { hk, kl, left, right, matrix, report })
}

/// Checks `(r ⊗ Id) = (Id ⊗ l) ∘ a` on `(H ⊗ U) ⊗ K`.
pub fn triangle_check<T: Real>(h: &CStarBimodule<T>, k: &CStarBimodule<T>, tol: &Tolerance<T>) -> Result<Report> {
    let u = CStarBimodule::unit(h.b().clone());
    let assoc = assoc_iso(h, &u, k, tol)?;
    let r = unit_r(h, tol)?;
    let l = unit_l(k, tol)?;
    let target = RelativeTensorProduct::build(h.right().clone(), k.left().clone(), tol)?;
    let r_id = op_tensor_between(&assoc.left.rtp, &target, &r.matrix, &kernel::eye(k.h_dim()), OpCase::SemiLeft, tol)?;
    let id_l = op_tensor_between(&assoc.right.rtp, &target, &kernel::eye(h.h_dim()), &l.matrix, OpCase::SemiRight, tol)?;
    let mut report = Report::new("triangle");
    report.merge("assoc", assoc.report);
    report.merge("r", r.report);
    report.merge("l", l.report);
    report
        .residual("triangle", "r ⊗ Id = (Id ⊗ l) ∘ a", max_abs(&(r_id - id_l * &assoc.matrix)), tol.residual_abs)
        .dim("dim", target.dim());
    Ok(report)
}

/// `Σ: H ⊗_𝔟 K → K ⊗_{𝔟†} H`, `ξ ⊗ ζ ⊗ η ↦ η ⊗ ζ ⊗ ξ`.
pub fn flip_sigma<T: Real>(
    rtp: &RelativeTensorProduct<T>,
    tol: &Tolerance<T>,
) -> Result<(RelativeTensorProduct<T>, CMat<T>)> {
    let other = RelativeTensorProduct::build(rtp.k.clone(), rtp.h.clone(), tol)?;
    let mut images = kernel::zeros(other.dim(), rtp.generator_count());
    for g in 0..rtp.generator_count() {
        let (a, z, c) = rtp.gen_index(g);
        images.set_column(g, &other.vector(other.index(c, z, a)));
    }
    let m = rtp.induced(&images, tol)?;
    Ok((other, m))
}

/// Mutually inverse maps `⊞ᵢⱼ (Hⁱ ⊗ Kʲ) ⇄ (⊞ Hⁱ) ⊗ (⊞ Kʲ)`.
#[derive(Debug, Clone)]
pub struct DirectSumCompat<T: Real> {
    pub total: RelativeTensorProduct<T>,
    /// Row-major over `(i, j)`.
    pub parts: Vec<RelativeTensorProduct<T>>,
    pub forward: CMat<T>,
    pub backward: CMat<T>,
    pub report: Report,
}

pub fn direct_sum_compat<T: Real>(
    hs: &[CStarModule<T>],
    ks: &[CStarModule<T>],
    tol: &Tolerance<T>,
) -> Result<DirectSumCompat<T>> {
    let dh = direct_sum(hs, tol)?;
    let dk = direct_sum(ks, tol)?;
    let total = RelativeTensorProduct::new(dh.sum.clone(), dk.sum.clone(), tol)?;
    let mut parts = Vec::new();
    let mut fwd = Vec::new();
    let mut bwd = Vec::new();
    for (i, h) in hs.iter().enumerate() {
        for (j, k) in ks.iter().enumerate() {
            let part = RelativeTensorProduct::build(h.clone(), k.clone(), tol)?;
            fwd.push(op_tensor_between(&part, &total, &dh.injections[i], &dk.injections[j], OpCase::SemiLeft, tol)?);
            bwd.push(op_tensor_between(&total, &part, &dh.projections[i], &dk.projections[j], OpCase::SemiLeft, tol)?);
            parts.push(part);
        }
    }
    let sum_dim: usize = parts.iter().map(|p| p.dim()).sum();
    let mut forward = kernel::zeros(total.dim(), sum_dim);
    let mut backward = kernel::zeros(sum_dim, total.dim());
    let mut off = 0;
    for ((p, f), b) in parts.iter().zip(&fwd).zip(&bwd) {
        forward.view_mut((0, off), (total.dim(), p.dim())).copy_from(f);
        backward.view_mut((off, 0), (p.dim(), total.dim())).copy_from(b);
        off += p.dim();
    }
    let mut report = Report::new("direct sums");
    report.count("dims", "dim ⊞(Hⁱ ⊗ Kʲ) = dim (⊞Hⁱ) ⊗ (⊞Kʲ)", sum_dim, total.dim());
    if sum_dim == total.dim() {
        report.residual(
            "forward_backward",
            "Σ (ιⁱ ⊗ ιʲ)(πⁱ ⊗ πʲ) = Id",
            max_abs(&(&forward * &backward - kernel::eye(total.dim()))),
            tol.residual_abs,
        );
        report.residual(
            "backward_forward",
            "(πⁱ ⊗ πʲ)(ιᵏ ⊗ ιˡ) = δ Id",
            max_abs(&(&backward * &forward - kernel::eye(sum_dim))),
            tol.residual_abs,
        );
    }
    Ok(DirectSumCompat { total, parts, forward, backward, report })
}

/// `H_β` with trivial left structure `L(ℂ, H)`, as a bimodule over `(ℂ, 𝔟)`.
pub fn right_only<T: Real>(m: &CStarModule<T>) -> CStarBimodule<T> {
    let h = m.h_dim();
    CStarBimodule::new_unchecked(
        Arc::new(CStarBase::trivial()),
        OperatorSpace::full(h, 1),
        m.base().clone(),
        m.alpha().clone(),
    )
}

/// `K_γ` with trivial right structure, as a bimodule over `(𝔟†, ℂ)`.
pub fn left_only<T: Real>(m: &CStarModule<T>) -> CStarBimodule<T> {
    let h = m.h_dim();
    CStarBimodule::new_unchecked(
        Arc::new(m.base().opposite()),
        m.alpha().clone(),
        Arc::new(CStarBase::trivial()),
        OperatorSpace::full(h, 1),
    )
}
