//! C*-bases and the constructions producing them.

use std::sync::Arc;

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::kernel::{self, max_abs, Tolerance};
use crate::module::CStarBimodule;
use crate::opspace::{ConcreteAlgebra, OperatorSpace};
use crate::report::Report;
use crate::scalar::{CMat, CVec, Real};

/// A Hilbert space `𝔎 = ℂ^k` with commuting nondegenerate algebras `𝔅` and `𝔅†`.
#[derive(Debug, Clone)]
pub struct CStarBase<T: Real> {
    k_dim: usize,
    b: ConcreteAlgebra<T>,
    b_dag: ConcreteAlgebra<T>,
    b_comm: ConcreteAlgebra<T>,
    b_dag_comm: ConcreteAlgebra<T>,
}

impl<T: Real> CStarBase<T> {
    /// Validates commutation and nondegeneracy.
    pub fn new(b: ConcreteAlgebra<T>, b_dag: ConcreteAlgebra<T>, tol: &Tolerance<T>) -> Result<Self> {
        let base = Self::build(b, b_dag, tol)?;
        let r = base.check(tol);
        if let Some(f) = r.failures().next() {
            return Err(Error::Axiom(format!("base: {} (residual {:.3e})", f.statement, f.residual)));
        }
        Ok(base)
    }

    fn build(b: ConcreteAlgebra<T>, b_dag: ConcreteAlgebra<T>, tol: &Tolerance<T>) -> Result<Self> {
        if b.n() != b_dag.n() {
            return Err(Error::Shape(format!("base algebras on {} and {}", b.n(), b_dag.n())));
        }
        let b_comm = b.commutant(tol);
        let b_dag_comm = b_dag.commutant(tol);
        Ok(Self { k_dim: b.n(), b, b_dag, b_comm, b_dag_comm })
    }

    /// Base generated by the given families (unital closure).
    pub fn generated(k: usize, b_gens: &[CMat<T>], b_dag_gens: &[CMat<T>], tol: &Tolerance<T>) -> Result<Self> {
        let b = ConcreteAlgebra::generated(k, b_gens, true, tol)?;
        let bd = ConcreteAlgebra::generated(k, b_dag_gens, true, tol)?;
        Self::new(b, bd, tol)
    }

    /// `(ℂ, ℂ, ℂ)`.
    pub fn trivial() -> Self {
        let one = ConcreteAlgebra::full(1);
        Self {
            k_dim: 1,
            b: one.clone(),
            b_dag: one.clone(),
            b_comm: one.clone(),
            b_dag_comm: one,
        }
    }

    /// Swaps `𝔅` and `𝔅†`.
    pub fn opposite(&self) -> Self {
        Self {
            k_dim: self.k_dim,
            b: self.b_dag.clone(),
            b_dag: self.b.clone(),
            b_comm: self.b_dag_comm.clone(),
            b_dag_comm: self.b_comm.clone(),
        }
    }

    pub fn k_dim(&self) -> usize {
        self.k_dim
    }

    pub fn b(&self) -> &ConcreteAlgebra<T> {
        &self.b
    }

    pub fn b_dag(&self) -> &ConcreteAlgebra<T> {
        &self.b_dag
    }

    /// `𝔅'`, computed once.
    pub fn b_commutant(&self) -> &ConcreteAlgebra<T> {
        &self.b_comm
    }

    /// `(𝔅†)'`, computed once.
    pub fn b_dag_commutant(&self) -> &ConcreteAlgebra<T> {
        &self.b_dag_comm
    }

    /// Same algebras on the same space.
    pub fn same_as(&self, other: &Self, tol: &Tolerance<T>) -> bool {
        self.k_dim == other.k_dim
            && self.b.space().equals(other.b.space(), tol)
            && self.b_dag.space().equals(other.b_dag.space(), tol)
    }

    pub fn check(&self, tol: &Tolerance<T>) -> Report {
        let mut r = Report::new("C*-base");
        let mut comm = T::zero();
        for x in self.b.basis() {
            for y in self.b_dag.basis() {
                comm = comm.max(max_abs(&(x * y - y * x)));
            }
        }
        r.residual("commute", "[𝔅, 𝔅†] = 0", comm, tol.residual_abs);
        r.flag("b_nondegenerate", "[𝔅𝔎] = 𝔎", self.b.is_nondegenerate())
            .dim("dim_b", self.b.dim());
        r.flag("b_dag_nondegenerate", "[𝔅†𝔎] = 𝔎", self.b_dag.is_nondegenerate())
            .dim("dim_b_dag", self.b_dag.dim());
        let cl = self.b.closure_residuals().adjoint.max(self.b.closure_residuals().product);
        let cld = self.b_dag.closure_residuals().adjoint.max(self.b_dag.closure_residuals().product);
        r.residual("algebras", "𝔅 and 𝔅† are *-algebras", cl.max(cld), tol.residual_abs);
        r
    }

    /// Verifies that a unitary `v: 𝔎 → 𝔎_other` implements an equivalence.
    pub fn verify_equivalence(&self, other: &Self, v: &CMat<T>, tol: &Tolerance<T>) -> Result<Report> {
        if v.shape() != (other.k_dim, self.k_dim) {
            return Err(Error::Shape(format!("equivalence unitary {:?}", v.shape())));
        }
        let mut r = Report::new("base equivalence");
        let unit = max_abs(&(v.adjoint() * v - kernel::eye(self.k_dim)))
            .max(max_abs(&(v * v.adjoint() - kernel::eye(other.k_dim))));
        r.residual("unitary", "V*V = 1 = VV*", unit, tol.residual_abs);
        let vb = self.b.space().sandwich(v, &v.adjoint(), tol)?;
        let vbd = self.b_dag.space().sandwich(v, &v.adjoint(), tol)?;
        r.residual("b", "Ad_V(𝔄) = 𝔅", vb.equality_residual(other.b.space()), tol.residual_abs);
        r.residual("b_dag", "Ad_V(𝔄†) = 𝔅†", vbd.equality_residual(other.b_dag.space()), tol.residual_abs);
        Ok(r)
    }
}

/// GNS representation of a faithful state on a finite-dimensional algebra.
#[derive(Debug, Clone)]
pub struct GnsData<T: Real> {
    algebra: ConcreteAlgebra<T>,
    density: CMat<T>,
    /// `Λ(a_i) = sqrt_gram · e_i` for the algebra basis `a_i`.
    sqrt_gram: CMat<T>,
    sqrt_gram_inv: CMat<T>,
    pi: Vec<CMat<T>>,
    j: CMat<T>,
    pi_op: Vec<CMat<T>>,
}

impl<T: Real> GnsData<T> {
    /// GNS construction for the functional `a ↦ trace(ρ a)` restricted to `algebra`.
    ///
    /// Errors with `NonFaithful` when the restricted functional is not faithful.
    pub fn new(algebra: &ConcreteAlgebra<T>, rho: &CMat<T>, tol: &Tolerance<T>) -> Result<Self> {
        let n = algebra.dim();
        if rho.shape() != (algebra.n(), algebra.n()) {
            return Err(Error::Shape(format!("density {:?} on dimension {}", rho.shape(), algebra.n())));
        }
        if n == 0 {
            return Err(Error::NonFaithful("zero algebra".into()));
        }
        let basis = algebra.basis();
        let state = |a: &CMat<T>| (rho * a).trace();
        // δ ∈ A with trace(δ a) = trace(ρ a) on A
        let mut density = kernel::zeros(algebra.n(), algebra.n());
        for a in basis {
            density += a * state(a).conj();
        }
        let gram = DMatrix::from_fn(n, n, |i, j| state(&(basis[i].adjoint() * &basis[j])));
        let herm = max_abs(&(&gram - gram.adjoint()));
        if herm > tol.residual_abs {
            return Err(Error::NonFaithful(format!("functional is not hermitian ({:.3e})", herm.as_f64())));
        }
        let (vals, _) = kernel::eigh(&gram);
        let lmax = vals[0];
        let lmin = vals[n - 1];
        if lmin <= tol.rank_rel * lmax.max(T::zero()) || lmax <= T::zero() {
            return Err(Error::NonFaithful(format!("gram eigenvalue {:.3e}", lmin.as_f64())));
        }
        let sqrt_gram = kernel::hermitian_fn(&gram, |x| x.max(T::zero()).sqrt());
        let sqrt_gram_inv = kernel::hermitian_fn(&gram, |x| T::one() / x.sqrt());
        let coords = |a: &CMat<T>| algebra.space().coords(a);
        let pi: Vec<CMat<T>> = basis
            .iter()
            .map(|a| {
                let c = DMatrix::from_columns(&basis.iter().map(|b| coords(&(a * b))).collect::<Vec<_>>());
                &sqrt_gram * c * &sqrt_gram_inv
            })
            .collect();
        // S Λ(a) = Λ(a*), S v = M conj(v)
        let cstar = DMatrix::from_columns(&basis.iter().map(|b| coords(&b.adjoint())).collect::<Vec<_>>());
        let m = &sqrt_gram * cstar * sqrt_gram_inv.map(|z| z.conj());
        let delta = m.transpose() * m.map(|z| z.conj());
        let delta_inv_sqrt = kernel::hermitian_fn(&delta, |x| T::one() / x.sqrt());
        let j = &m * delta_inv_sqrt.map(|z| z.conj());
        let jc = j.map(|z| z.conj());
        let pi_op = pi.iter().map(|p| &j * p.transpose() * &jc).collect();
        Ok(Self {
            algebra: algebra.clone(),
            density,
            sqrt_gram,
            sqrt_gram_inv,
            pi,
            j,
            pi_op,
        })
    }

    pub fn algebra(&self) -> &ConcreteAlgebra<T> {
        &self.algebra
    }

    pub fn algebra_dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn gns_dim(&self) -> usize {
        self.sqrt_gram.nrows()
    }

    /// Density `δ ∈ A` of the state.
    pub fn density(&self) -> &CMat<T> {
        &self.density
    }

    pub fn state(&self, a: &CMat<T>) -> Complex<T> {
        (&self.density * a).trace()
    }

    /// Columns are `Λ(a_i)` for the algebra basis.
    pub fn lambda_matrix(&self) -> &CMat<T> {
        &self.sqrt_gram
    }

    pub fn lambda(&self, a: &CMat<T>) -> CVec<T> {
        &self.sqrt_gram * self.algebra.space().coords(a)
    }

    /// Inverse of `Λ`, returning an element of the algebra.
    pub fn lambda_inv(&self, v: &CVec<T>) -> CMat<T> {
        let c = &self.sqrt_gram_inv * v;
        combine(self.algebra.basis(), c.as_slice())
    }

    pub fn pi(&self, a: &CMat<T>) -> CMat<T> {
        combine(&self.pi, self.algebra.space().coords(a).as_slice())
    }

    /// `J π(a)* J`.
    pub fn pi_op(&self, a: &CMat<T>) -> CMat<T> {
        combine(&self.pi_op, self.algebra.space().coords(a).as_slice())
    }

    pub fn pi_basis(&self) -> &[CMat<T>] {
        &self.pi
    }

    pub fn pi_op_basis(&self) -> &[CMat<T>] {
        &self.pi_op
    }

    /// Matrix of the modular conjugation: `J v = j · conj(v)`.
    pub fn j_matrix(&self) -> &CMat<T> {
        &self.j
    }

    pub fn apply_j(&self, v: &CVec<T>) -> CVec<T> {
        &self.j * v.map(|z| z.conj())
    }

    /// `J X J` for a linear operator `X`.
    pub fn conj_by_j(&self, x: &CMat<T>) -> CMat<T> {
        &self.j * x.map(|z| z.conj()) * self.j.map(|z| z.conj())
    }

    pub fn pi_algebra(&self, tol: &Tolerance<T>) -> Result<ConcreteAlgebra<T>> {
        let d = self.gns_dim();
        ConcreteAlgebra::from_space(OperatorSpace::span(d, d, &self.pi, tol)?, tol)
    }

    pub fn pi_op_algebra(&self, tol: &Tolerance<T>) -> Result<ConcreteAlgebra<T>> {
        let d = self.gns_dim();
        ConcreteAlgebra::from_space(OperatorSpace::span(d, d, &self.pi_op, tol)?, tol)
    }

    /// Verifies the GNS and modular identities.
    pub fn check(&self, tol: &Tolerance<T>) -> Report {
        let mut r = Report::new("GNS data");
        let basis = self.algebra.basis();
        let n = basis.len();
        let d = self.gns_dim();
        let mut inner = T::zero();
        let mut hom = T::zero();
        let mut star = T::zero();
        for i in 0..n {
            for k in 0..n {
                let li = self.lambda(&basis[i]);
                let lk = self.lambda(&basis[k]);
                let want = self.state(&(basis[i].adjoint() * &basis[k]));
                inner = inner.max((li.dotc(&lk) - want).modulus());
                let prod = self.pi(&(&basis[i] * &basis[k]));
                hom = hom.max(max_abs(&(prod - &self.pi[i] * &self.pi[k])));
            }
            star = star.max(max_abs(&(self.pi(&basis[i].adjoint()) - self.pi[i].adjoint())));
        }
        r.residual("inner_product", "⟨Λ(a), Λ(b)⟩ = μ(a*b)", inner, tol.residual_abs);
        r.residual("homomorphism", "π(ab) = π(a)π(b), π(a*) = π(a)*", hom.max(star), tol.residual_abs);
        let jc = self.j.map(|z| z.conj());
        r.residual("j_involution", "J² = 1", max_abs(&(&self.j * &jc - kernel::eye(d))), tol.residual_abs);
        r.residual(
            "j_antiunitary",
            "⟨Jv, Jw⟩ = ⟨w, v⟩",
            max_abs(&(self.j.adjoint() * &self.j - kernel::eye(d))),
            tol.residual_abs,
        );
        // J Δ^{1/2} Λ(a) = Λ(a*): the polar decomposition of S
        let cm = DMatrix::from_columns(&basis.iter().map(|b| self.lambda(&b.adjoint())).collect::<Vec<_>>());
        let m = cm * self.sqrt_gram_inv.map(|z| z.conj());
        let delta = m.transpose() * m.map(|z| z.conj());
        let half = kernel::hermitian_fn(&delta, |x| x.max(T::zero()).sqrt());
        let mut polar = T::zero();
        let mut comm = T::zero();
        for (i, a) in basis.iter().enumerate() {
            let s = self.lambda(&a.adjoint());
            polar = polar.max((self.apply_j(&(&half * self.lambda(a))) - s).norm());
            for p in &self.pi {
                comm = comm.max(max_abs(&(p * &self.pi_op[i] - &self.pi_op[i] * p)));
            }
        }
        r.residual("polar", "J Δ^{1/2} Λ(a) = Λ(a*)", polar, tol.residual_abs);
        r.residual("op_commutes", "π^op(A) ⊆ π(A)'", comm, tol.residual_abs);
        let mut opdef = T::zero();
        for (i, a) in basis.iter().enumerate() {
            let lhs = self.conj_by_j(&self.pi(a).adjoint());
            opdef = opdef.max(max_abs(&(lhs - &self.pi_op[i])));
        }
        r.residual("op_definition", "J π(a)* J = π^op(a)", opdef, tol.residual_abs);
        r
    }
}

fn combine<T: Real>(mats: &[CMat<T>], c: &[Complex<T>]) -> CMat<T> {
    let (r, k) = mats[0].shape();
    let mut acc = kernel::zeros(r, k);
    for (m, w) in mats.iter().zip(c) {
        if *w != Complex::zero() {
            acc += m * *w;
        }
    }
    acc
}

/// Block-diagonal algebra `⊕ M_{n_i}` on `ℂ^{Σ n_i}`.
pub fn block_algebra<T: Real>(blocks: &[usize]) -> ConcreteAlgebra<T> {
    let n: usize = blocks.iter().sum();
    let mut basis = Vec::new();
    let mut off = 0;
    for &b in blocks {
        for j in 0..b {
            for i in 0..b {
                basis.push(kernel::unit(n, n, off + i, off + j));
            }
        }
        off += b;
    }
    ConcreteAlgebra::from_space(OperatorSpace::from_orthonormal(n, n, basis), &Tolerance::default())
        .expect("matrix units span a *-algebra")
}

/// GNS base of `A = ⊕ M_{n_i}` for the state with density `diag(weights)`.
///
/// `weights` has one entry per basis vector of `ℂ^{Σ n_i}` and is normalised
/// to total mass one.
pub fn gns_base<T: Real>(
    blocks: &[usize],
    weights: &[T],
    tol: &Tolerance<T>,
) -> Result<(CStarBase<T>, GnsData<T>)> {
    let n: usize = blocks.iter().sum();
    if weights.len() != n {
        return Err(Error::Shape(format!("{} weights for dimension {n}", weights.len())));
    }
    if n == 0 {
        return Err(Error::Degenerate("empty block list".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > T::zero()) || !w.is_finite()) {
        return Err(Error::NonFaithful(format!("weight {:.3e}", w.as_f64())));
    }
    let total = weights.iter().fold(T::zero(), |a, &w| a + w);
    let rho = kernel::from_real_diag(&weights.iter().map(|&w| w / total).collect::<Vec<_>>());
    let a = block_algebra::<T>(blocks);
    let gns = GnsData::new(&a, &rho, tol)?;
    let base = CStarBase::new(gns.pi_algebra(tol)?, gns.pi_op_algebra(tol)?, tol)?;
    Ok((base, gns))
}

/// Discrete base: `ℂ^n` with the diagonal algebra on both sides.
pub fn diagonal_base<T: Real>(n: usize) -> CStarBase<T> {
    let d = ConcreteAlgebra::diagonal(n);
    CStarBase::new(d.clone(), d, &Tolerance::default()).expect("diagonal algebras commute")
}

/// Bimodule obtained from a conditional expectation `φ: A → B`.
#[derive(Debug, Clone)]
pub struct ExpectationBimodule<T: Real> {
    /// GNS base of `(B, μ)`.
    pub base: Arc<CStarBase<T>>,
    pub gns_mu: GnsData<T>,
    pub gns_nu: GnsData<T>,
    /// Isometry `H_μ → H_ν` extending `B ⊆ A`.
    pub zeta: CMat<T>,
    pub bimodule: CStarBimodule<T>,
    pub pi_nu: ConcreteAlgebra<T>,
    pub pi_nu_op: ConcreteAlgebra<T>,
    pub report: Report,
}

/// Builds `H_ν` for `ν = μ ∘ φ` with legs `α = [π_ν^op(A) ζ]`, `β = [π_ν(A) ζ]`.
///
/// `phi` is the superoperator matrix of `φ` on column-major vectorisation and
/// `mu_density` defines `μ(b) = trace(mu_density · b)` on `B`.
pub fn conditional_expectation_bimodule<T: Real>(
    a: &ConcreteAlgebra<T>,
    b_gens: &[CMat<T>],
    phi: &CMat<T>,
    mu_density: &CMat<T>,
    tol: &Tolerance<T>,
) -> Result<ExpectationBimodule<T>> {
    let m = a.n();
    let not_ce = |s: String| Error::NotConditionalExpectation(s);
    if phi.shape() != (m * m, m * m) {
        return Err(Error::Shape(format!("φ matrix {:?} for operators on ℂ^{m}", phi.shape())));
    }
    if !a.contains_identity(tol) {
        return Err(not_ce("A is not unital".into()));
    }
    let b = ConcreteAlgebra::generated(m, b_gens, true, tol)?;
    let inside = a.space().containment_residual(b.space());
    if inside > tol.residual_abs {
        return Err(not_ce(format!("B ⊄ A (residual {:.3e})", inside.as_f64())));
    }
    let ph = |x: &CMat<T>| kernel::apply_superoperator(phi, x);
    let abasis = a.basis();
    let bbasis = b.basis();
    let mut range = T::zero();
    for x in abasis {
        range = range.max(b.space().residual(&ph(x)));
    }
    if range > tol.residual_abs {
        return Err(not_ce(format!("φ(A) ⊄ B (residual {:.3e})", range.as_f64())));
    }
    let mut proj = T::zero();
    for x in bbasis {
        proj = proj.max(max_abs(&(ph(x) - x)));
    }
    if proj > tol.residual_abs {
        return Err(not_ce(format!("φ is not the identity on B ({:.3e})", proj.as_f64())));
    }
    let mut bimod = T::zero();
    for x in abasis {
        for l in bbasis {
            for r in bbasis {
                bimod = bimod.max(max_abs(&(ph(&(l * x * r)) - l * ph(x) * r)));
            }
        }
    }
    if bimod > tol.residual_abs {
        return Err(not_ce(format!("φ is not B-bimodular ({:.3e})", bimod.as_f64())));
    }
    let n = abasis.len();
    let mut blocks = kernel::zeros(n * m, n * m);
    for i in 0..n {
        for j in 0..n {
            let v = ph(&(abasis[i].adjoint() * &abasis[j]));
            blocks.view_mut((i * m, j * m), (m, m)).copy_from(&v);
        }
    }
    let low = kernel::min_eigenvalue(&blocks);
    if low < -tol.residual_abs {
        return Err(not_ce(format!("[φ(a_i* a_j)] has eigenvalue {:.3e}", low.as_f64())));
    }

    let gns_mu = GnsData::new(&b, mu_density, tol)?;
    let dmu = gns_mu.density().clone();
    let nu = |x: &CMat<T>| (&dmu * ph(x)).trace();
    let mut rho_nu = kernel::zeros(m, m);
    for x in abasis {
        rho_nu += x * nu(x).conj();
    }
    let gns_nu = GnsData::new(a, &rho_nu, tol)?;
    let dnu = gns_nu.density().clone();
    let inv = |d: &CMat<T>| d.clone().try_inverse().ok_or_else(|| Error::NonFaithful("singular density".into()));
    let (dnu_inv, dmu_inv) = (inv(&dnu)?, inv(&dmu)?);
    let mut modular = T::zero();
    for x in abasis {
        let lhs = ph(&(&dnu * x * &dnu_inv));
        let rhs = &dmu * ph(x) * &dmu_inv;
        modular = modular.max(max_abs(&(lhs - rhs)));
    }
    if modular > tol.residual_abs {
        return Err(Error::NotCompatible(modular.as_f64()));
    }

    let images: Vec<CVec<T>> = bbasis.iter().map(|x| gns_nu.lambda(x)).collect();
    let wmu_inv = gns_mu
        .lambda_matrix()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NonFaithful("GNS map of μ".into()))?;
    let zeta = DMatrix::from_columns(&images) * wmu_inv;
    let base = Arc::new(CStarBase::new(gns_mu.pi_algebra(tol)?, gns_mu.pi_op_algebra(tol)?, tol)?);
    let h = gns_nu.gns_dim();
    let k = gns_mu.gns_dim();
    let beta_gens: Vec<CMat<T>> = gns_nu.pi_basis().iter().map(|p| p * &zeta).collect();
    let alpha_gens: Vec<CMat<T>> = gns_nu.pi_op_basis().iter().map(|p| p * &zeta).collect();
    let alpha = OperatorSpace::span(h, k, &alpha_gens, tol)?;
    let beta = OperatorSpace::span(h, k, &beta_gens, tol)?;
    let bimodule = CStarBimodule::new(base.clone(), alpha, base.clone(), beta, tol)?;
    let pi_nu = gns_nu.pi_algebra(tol)?;
    let pi_nu_op = gns_nu.pi_op_algebra(tol)?;

    let mut report = Report::new("conditional expectation bimodule");
    report.residual("expectation_range", "φ(A) ⊆ B", range, tol.residual_abs);
    report.residual("expectation_projection", "φ|_B = id", proj, tol.residual_abs);
    report.residual("expectation_bimodular", "φ(b a b') = b φ(a) b'", bimod, tol.residual_abs);
    report.residual("expectation_positive", "[φ(a_i* a_j)] ≥ 0", (-low).max(T::zero()), tol.residual_abs);
    report.residual("modular", "φ(δ_ν a δ_ν⁻¹) = δ_μ φ(a) δ_μ⁻¹", modular, tol.residual_abs);
    report.residual("zeta_isometry", "ζ*ζ = 1", max_abs(&(zeta.adjoint() * &zeta - kernel::eye(k))), tol.residual_abs);
    let jz = gns_nu.j_matrix() * zeta.map(|z| z.conj()) - &zeta * gns_mu.j_matrix();
    report.residual("zeta_modular", "ζ J_μ = J_ν ζ", max_abs(&jz), tol.residual_abs);
    let mut compress = T::zero();
    for x in abasis {
        compress = compress.max(max_abs(&(zeta.adjoint() * gns_nu.pi(x) * &zeta - gns_mu.pi(&ph(x)))));
    }
    report.residual("compression", "ζ* π_ν(a) ζ = π_μ(φ(a))", compress, tol.residual_abs);
    let mut rho_a = T::zero();
    let mut rho_b = T::zero();
    for x in bbasis {
        rho_a = rho_a.max(max_abs(&(bimodule.rho_alpha(&gns_mu.pi(x), tol)? - gns_nu.pi(x))));
        rho_b = rho_b.max(max_abs(&(bimodule.rho_beta(&gns_mu.pi_op(x), tol)? - gns_nu.pi_op(x))));
    }
    report.residual("rho_alpha", "ρ_α ∘ π_μ = π_ν on B", rho_a, tol.residual_abs);
    report.residual("rho_beta", "ρ_β ∘ π_μ^op = π_ν^op on B", rho_b, tol.residual_abs);
    let mut semi_b = T::zero();
    let mut semi_a = T::zero();
    for p in gns_nu.pi_basis() {
        for xi in bimodule.beta().basis() {
            semi_b = semi_b.max(bimodule.beta().residual(&(p * xi)));
        }
    }
    for p in gns_nu.pi_op_basis() {
        for xi in bimodule.alpha().basis() {
            semi_a = semi_a.max(bimodule.alpha().residual(&(p * xi)));
        }
    }
    report.residual("pi_nu_on_beta", "π_ν(A)β ⊆ β", semi_b, tol.residual_abs);
    report.residual("pi_nu_op_on_alpha", "π_ν^op(A)α ⊆ α", semi_a, tol.residual_abs);
    report.merge("bimodule", bimodule.check(tol));
    Ok(ExpectationBimodule { base, gns_mu, gns_nu, zeta, bimodule, pi_nu, pi_nu_op, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{superoperator, unit};
    use crate::testutil::*;

    fn diag_compression(n: usize) -> M {
        let pairs: Vec<(M, M)> = (0..n).map(|i| (unit(n, n, i, i), unit(n, n, i, i))).collect();
        superoperator(&pairs)
    }

    #[test]
    fn trivial_base() {
        let t = CStarBase::<f64>::trivial();
        assert_eq!(t.k_dim(), 1);
        assert_eq!(t.b().dim(), 1);
        assert_eq!(t.b_dag().dim(), 1);
        assert!(t.check(&tol()).passed);
        assert!(t.opposite().same_as(&t, &tol()));
    }

    #[test]
    fn opposite_is_involutive() {
        let (b, _) = gns_base::<f64>(&[2], &[0.3, 0.7], &tol()).unwrap();
        let oo = b.opposite().opposite();
        assert!(oo.same_as(&b, &tol()));
        assert_eq!(b.opposite().k_dim(), b.k_dim());
        assert!(b.opposite().b().space().equals(b.b_dag().space(), &tol()));
    }

    #[test]
    fn gns_of_c2_is_diagonal() {
        let (b, g) = gns_base::<f64>(&[1, 1], &[0.5, 0.5], &tol()).unwrap();
        assert_eq!(b.k_dim(), 2);
        // Λ(e_i) = √w_i e_i, so π(e_i) = E_ii.
        let d2 = ConcreteAlgebra::<f64>::diagonal(2);
        assert!(b.b().space().equals(d2.space(), &tol()));
        assert!(b.b_dag().space().equals(d2.space(), &tol()));
        let e0 = unit(2, 2, 0, 0);
        let want = CVec::from_vec(vec![Complex::new(0.5f64.sqrt(), 0.0), Complex::new(0.0, 0.0)]);
        assert!((g.lambda(&e0) - want).norm() < 1e-12);
    }

    #[test]
    fn gns_of_m2_trace() {
        let (b, g) = gns_base::<f64>(&[2], &[1.0, 1.0], &tol()).unwrap();
        assert_eq!(b.k_dim(), 4);
        assert_eq!(b.b().dim(), 4);
        assert_eq!(b.b_dag().dim(), 4);
        assert!(b.b_dag().space().equals(b.b().commutant(&tol()).space(), &tol()));
        let r = g.check(&Tolerance::new(1e-12, 1e-10).unwrap());
        assert!(r.passed, "{}", r.render());
        // For the trace J Λ(x) = Λ(x*), so π^op(a) is right multiplication by a.
        let basis = g.algebra().basis().to_vec();
        let right: Vec<M> = basis
            .iter()
            .map(|a| {
                let cols: Vec<CVec<f64>> = basis.iter().map(|x| g.lambda(&(x * a))).collect();
                DMatrix::from_columns(&cols) * g.lambda_matrix().clone().try_inverse().unwrap()
            })
            .collect();
        let rs = OperatorSpace::span(4, 4, &right, &tol()).unwrap();
        assert!(b.opposite().b().space().equals(&rs, &tol()));
    }

    #[test]
    fn modular_conjugation_non_tracial() {
        // J Λ(x) = Λ(δ^{1/2} x* δ^{-1/2}) for the state trace(δ ·).
        let w = [0.3, 0.7];
        let (_, g) = gns_base::<f64>(&[2], &w, &tol()).unwrap();
        let d = kernel::from_real_diag(&[w[0].sqrt(), w[1].sqrt()]);
        let di = kernel::from_real_diag(&[1.0 / w[0].sqrt(), 1.0 / w[1].sqrt()]);
        let mut r = rng(5);
        for _ in 0..5 {
            let x = random(&mut r, 2, 2);
            let want = g.lambda(&(&d * x.adjoint() * &di));
            assert!((g.apply_j(&g.lambda(&x)) - want).norm() < 1e-10);
        }
        assert!(g.check(&tol()).passed);
    }

    #[test]
    fn gns_of_c_is_trivial() {
        let (b, _) = gns_base::<f64>(&[1], &[1.0], &tol()).unwrap();
        assert!(b.same_as(&CStarBase::trivial(), &tol()));
    }

    #[test]
    fn gns_standard_form_dimensions() {
        for (blocks, w) in [(vec![1, 1], vec![0.5, 0.5]), (vec![2], vec![0.5, 0.5]), (vec![1, 2], vec![0.2, 0.3, 0.5])] {
            let (b, _) = gns_base::<f64>(&blocks, &w, &tol()).unwrap();
            let comm = b.b().commutant(&tol());
            assert!(comm.space().contains_space(b.b_dag().space(), &tol()));
            assert_eq!(comm.dim(), b.b_dag().dim());
            assert!(b.check(&tol()).passed);
        }
    }

    #[test]
    fn zero_weight_is_not_faithful() {
        assert!(matches!(gns_base::<f64>(&[1, 1], &[1.0, 0.0], &tol()), Err(Error::NonFaithful(_))));
    }

    #[test]
    fn equivalence_verification() {
        let (b, _) = gns_base::<f64>(&[1, 1], &[0.5, 0.5], &tol()).unwrap();
        let swap = kernel::real_matrix::<f64>(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(b.verify_equivalence(&b, &swap, &tol()).unwrap().passed);
        let h = kernel::real_matrix::<f64>(2, 2, &[1.0, 1.0, 1.0, -1.0]) * Complex::new(0.5f64.sqrt(), 0.0);
        assert!(!b.verify_equivalence(&b, &h, &tol()).unwrap().passed);
    }

    #[test]
    fn expectation_onto_scalars() {
        let a = ConcreteAlgebra::<f64>::diagonal(2);
        let half = Complex::new(0.5, 0.0);
        let phi = superoperator(&[(unit(2, 2, 0, 0), unit(2, 2, 0, 0)), (unit(2, 2, 1, 0), unit(2, 2, 0, 1)),
            (unit(2, 2, 0, 1), unit(2, 2, 1, 0)), (unit(2, 2, 1, 1), unit(2, 2, 1, 1))]) * half;
        let mu = kernel::eye::<f64>(2) * half;
        let e = conditional_expectation_bimodule(&a, &[], &phi, &mu, &tol()).unwrap();
        assert!(e.report.passed, "{}", e.report.render());
        assert_eq!(e.gns_nu.gns_dim(), 2);
        assert_eq!(e.base.k_dim(), 1);
        assert_eq!(e.bimodule.beta().dim(), 2);
        assert!(e.bimodule.beta().equals(&OperatorSpace::full(2, 1), &tol()));
    }

    #[test]
    fn identity_expectation_gives_unit_bimodule() {
        let a = ConcreteAlgebra::<f64>::diagonal(2);
        let phi = kernel::eye::<f64>(4);
        let mu = kernel::from_real_diag(&[0.4, 0.6]);
        let e = conditional_expectation_bimodule(&a, &[unit(2, 2, 0, 0)], &phi, &mu, &tol()).unwrap();
        assert!(e.report.passed);
        // ζ is unitary here and identifies the legs with 𝔅 and 𝔅†.
        let zi = e.zeta.adjoint();
        let id = kernel::eye::<f64>(2);
        assert!(max_abs(&(&zi * &e.zeta - &id)) < 1e-10 && max_abs(&(&e.zeta * &zi - &id)) < 1e-10);
        let beta = e.bimodule.beta().sandwich(&zi, &kernel::eye(2), &tol()).unwrap();
        let alpha = e.bimodule.alpha().sandwich(&zi, &kernel::eye(2), &tol()).unwrap();
        assert!(beta.equals(e.base.b().space(), &tol()));
        assert!(alpha.equals(e.base.b_dag().space(), &tol()));
    }

    #[test]
    fn diagonal_compression_of_m2() {
        for w in [[0.5, 0.5], [0.3, 0.7]] {
            let a = ConcreteAlgebra::<f64>::full(2);
            let mu = kernel::from_real_diag(&w);
            let e = conditional_expectation_bimodule(&a, &[unit(2, 2, 0, 0)], &diag_compression(2), &mu, &tol())
                .unwrap();
            assert!(e.report.passed, "{}", e.report.render());
            assert_eq!(e.gns_nu.gns_dim(), 4);
            assert_eq!(e.base.k_dim(), 2);
        }
    }

    #[test]
    fn invalid_expectations_rejected() {
        let a = ConcreteAlgebra::<f64>::full(2);
        let mu = kernel::from_real_diag(&[0.5, 0.5]);
        let twice = diag_compression(2) * Complex::new(2.0, 0.0);
        assert!(matches!(
            conditional_expectation_bimodule(&a, &[unit(2, 2, 0, 0)], &twice, &mu, &tol()),
            Err(Error::NotConditionalExpectation(_))
        ));
        // φ(a) = (2 a₁₁ − a₂₂) 1 on D₂ is a unital projection onto ℂ but not positive.
        let d = ConcreteAlgebra::<f64>::diagonal(2);
        let phi = superoperator(&[
            (unit(2, 2, 0, 0), unit(2, 2, 0, 0) * Complex::new(2.0, 0.0)),
            (unit(2, 2, 1, 0), unit(2, 2, 0, 1) * Complex::new(2.0, 0.0)),
            (unit(2, 2, 0, 1), unit(2, 2, 1, 0) * Complex::new(-1.0, 0.0)),
            (unit(2, 2, 1, 1), unit(2, 2, 1, 1) * Complex::new(-1.0, 0.0)),
        ]);
        let r = conditional_expectation_bimodule(&d, &[], &phi, &mu, &tol());
        assert!(matches!(r, Err(Error::NotConditionalExpectation(_))), "{r:?}");
        let nonunital = ConcreteAlgebra::generated(2, &[unit(2, 2, 0, 0)], false, &tol()).unwrap();
        assert!(conditional_expectation_bimodule(&nonunital, &[], &kernel::eye(4), &mu, &tol()).is_err());
    }
}
