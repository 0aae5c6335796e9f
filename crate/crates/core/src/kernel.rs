//! Dense complex linear algebra shared by every construction.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{cr, CMat, CVec, Real};

const SVD_MAX_ITER: usize = 0;

/// Cutoffs used for rank decisions and membership tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T> {
    pub rank_rel: T,
    pub residual_abs: T,
}

impl<T: Real> Default for Tolerance<T> {
    fn default() -> Self {
        Self {
            rank_rel: T::lit(1e-9),
            residual_abs: T::lit(1e-8),
        }
    }
}

impl<T: Real> Tolerance<T> {
    pub fn new(rank_rel: T, residual_abs: T) -> Result<Self> {
        let ok = |x: T| x > T::zero() && x < T::one();
        if !ok(rank_rel) {
            return Err(Error::Tolerance(format!("rank_rel = {rank_rel:e} not in (0, 1)")));
        }
        if !ok(residual_abs) {
            return Err(Error::Tolerance(format!(
                "residual_abs = {residual_abs:e} not in (0, 1)"
            )));
        }
        Ok(Self { rank_rel, residual_abs })
    }
}

pub fn zeros<T: Real>(rows: usize, cols: usize) -> CMat<T> {
    DMatrix::zeros(rows, cols)
}

pub fn eye<T: Real>(n: usize) -> CMat<T> {
    DMatrix::identity(n, n)
}

/// Matrix unit `E_ij` of the given shape.
pub fn unit<T: Real>(rows: usize, cols: usize, i: usize, j: usize) -> CMat<T> {
    let mut m = zeros(rows, cols);
    m[(i, j)] = Complex::one();
    m
}

pub fn from_real_diag<T: Real>(d: &[T]) -> CMat<T> {
    let mut m = zeros(d.len(), d.len());
    for (i, &x) in d.iter().enumerate() {
        m[(i, i)] = cr(x);
    }
    m
}

/// Builds a matrix from row-major real entries.
pub fn real_matrix<T: Real>(rows: usize, cols: usize, entries: &[f64]) -> CMat<T> {
    assert_eq!(entries.len(), rows * cols);
    DMatrix::from_fn(rows, cols, |i, j| cr(T::lit(entries[i * cols + j])))
}

/// Hilbert–Schmidt inner product `trace(xᴴ y)`.
pub fn hs_inner<T: Real>(x: &CMat<T>, y: &CMat<T>) -> Complex<T> {
    x.iter()
        .zip(y.iter())
        .fold(Complex::zero(), |acc, (a, b)| acc + a.conj() * b)
}

pub fn hs_norm<T: Real>(x: &CMat<T>) -> T {
    x.iter()
        .fold(T::zero(), |acc, a| acc + a.norm_sqr())
        .sqrt()
}

pub fn max_abs<T: Real>(x: &CMat<T>) -> T {
    x.iter().fold(T::zero(), |acc, a| acc.max(a.modulus()))
}

/// Largest singular value.
pub fn op_norm<T: Real>(x: &CMat<T>) -> T {
    if x.is_empty() {
        return T::zero();
    }
    let svd = SVD::new(x.clone(), false, false);
    svd.singular_values.iter().fold(T::zero(), |a, &s| a.max(s))
}

/// Column-major vectorisation.
pub fn vec_of<T: Real>(x: &CMat<T>) -> CVec<T> {
    DVector::from_column_slice(x.as_slice())
}

pub fn unvec<T: Real>(v: &[Complex<T>], rows: usize, cols: usize) -> CMat<T> {
    DMatrix::from_column_slice(rows, cols, v)
}

pub fn kron<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    a.kronecker(b)
}

/// Block-diagonal sum of square or rectangular blocks.
pub fn block_diag<T: Real>(blocks: &[CMat<T>]) -> CMat<T> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut m = zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        m.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    m
}

pub fn is_finite<T: Real>(x: &CMat<T>) -> bool {
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermitize<T: Real>(x: &CMat<T>) -> CMat<T> {
    (x + x.adjoint()) * cr(T::lit(0.5))
}

/// Eigendecomposition of a hermitian matrix, eigenvalues in descending order.
pub fn eigh<T: Real>(h: &CMat<T>) -> (Vec<T>, CMat<T>) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitize(h));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn min_eigenvalue<T: Real>(h: &CMat<T>) -> T {
    eigh(h).0.last().copied().unwrap_or_else(T::zero)
}

/// Applies a real function to the spectrum of a hermitian matrix.
pub fn hermitian_fn<T: Real>(h: &CMat<T>, f: impl Fn(T) -> T) -> CMat<T> {
    let (vals, vecs) = eigh(h);
    let d: Vec<T> = vals.into_iter().map(f).collect();
    &vecs * from_real_diag(&d) * vecs.adjoint()
}

/// Orthonormal basis (Hilbert–Schmidt geometry) of the span of `vectors`.
///
/// Modified Gram–Schmidt in input order with one re-orthogonalisation pass.
/// A vector is dropped when its residual is at most `rank_rel` times the
/// largest input norm.
pub fn orthonormal_basis<T: Real>(vectors: &[CMat<T>], tol: &Tolerance<T>) -> Result<Vec<CMat<T>>> {
    let Some(first) = vectors.first() else {
        return Ok(Vec::new());
    };
    let shape = first.shape();
    if let Some(bad) = vectors.iter().find(|v| v.shape() != shape) {
        return Err(Error::Shape(format!(
            "orthonormal_basis: {:?} vs {:?}",
            shape,
            bad.shape()
        )));
    }
    let cols: Vec<CVec<T>> = vectors.iter().map(vec_of).collect();
    let q = orthonormal_columns(&cols, tol);
    Ok((0..q.ncols())
        .map(|j| unvec(q.column(j).as_slice(), shape.0, shape.1))
        .collect())
}

/// Orthonormal columns spanning the given vectors, same rule as [`orthonormal_basis`].
pub fn orthonormal_columns<T: Real>(vectors: &[CVec<T>], tol: &Tolerance<T>) -> CMat<T> {
    let len = vectors.first().map_or(0, |v| v.len());
    let scale = vectors.iter().fold(T::zero(), |a, v| a.max(v.norm()));
    let cutoff = tol.rank_rel * scale;
    let mut kept: Vec<CVec<T>> = Vec::new();
    for v in vectors {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &kept {
                let p = q.dotc(&r);
                r.axpy(-p, q, Complex::one());
            }
        }
        let n = r.norm();
        if n > cutoff && n > T::zero() {
            kept.push(r.unscale(n));
        }
    }
    if kept.is_empty() {
        return zeros(len, 0);
    }
    DMatrix::from_columns(&kept)
}

/// Incrementally grown orthonormal family, using the same drop rule as
/// [`orthonormal_columns`] against the largest norm seen so far.
#[derive(Debug, Clone)]
pub struct SpanBuilder<T: Real> {
    kept: Vec<CVec<T>>,
    scale: T,
    tol: Tolerance<T>,
}

impl<T: Real> SpanBuilder<T> {
    pub fn new(tol: &Tolerance<T>) -> Self {
        Self { kept: Vec::new(), scale: T::zero(), tol: *tol }
    }

    /// Adds a vector; returns whether it enlarged the span.
    pub fn push(&mut self, v: &CVec<T>) -> bool {
        self.scale = self.scale.max(v.norm());
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &self.kept {
                let p = q.dotc(&r);
                r.axpy(-p, q, Complex::one());
            }
        }
        let n = r.norm();
        if n > self.tol.rank_rel * self.scale && n > T::zero() {
            self.kept.push(r.unscale(n));
            true
        } else {
            false
        }
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn vectors(&self) -> &[CVec<T>] {
        &self.kept
    }
}

/// Orthonormal basis of the nullspace of `m`, as columns.
///
/// Singular values at most `rank_rel · scale` count as zero, where `scale`
/// defaults to the largest singular value.
pub fn nullspace<T: Real>(m: &CMat<T>, scale: Option<T>, tol: &Tolerance<T>) -> CMat<T> {
    let n = m.ncols();
    if n == 0 {
        return zeros(0, 0);
    }
    let padded;
    let a = if m.nrows() < n {
        let mut p = zeros(n, n);
        p.view_mut((0, 0), m.shape()).copy_from(m);
        padded = p;
        &padded
    } else {
        m
    };
    let svd = SVD::try_new(a.clone(), false, true, T::default_epsilon(), SVD_MAX_ITER)
        .expect("SVD converges");
    let v_t = svd.v_t.expect("v requested");
    let smax = svd.singular_values.iter().fold(T::zero(), |x, &s| x.max(s));
    let cutoff = match scale {
        Some(s) => tol.rank_rel * s,
        None => tol.rank_rel * smax,
    };
    kernel_columns(&svd.singular_values, &v_t, cutoff)
}

/// Orthonormal basis of the right singular vectors of `m` whose singular
/// values are at most `cutoff`.
pub fn small_singular_space<T: Real>(m: &CMat<T>, cutoff: T) -> CMat<T> {
    let n = m.ncols();
    if n == 0 {
        return zeros(0, 0);
    }
    let mut a = zeros(m.nrows().max(n), n);
    a.view_mut((0, 0), m.shape()).copy_from(m);
    let svd = SVD::try_new(a, false, true, T::default_epsilon(), SVD_MAX_ITER)
        .expect("SVD converges");
    kernel_columns(&svd.singular_values, &svd.v_t.expect("v requested"), cutoff)
}

fn kernel_columns<T: Real>(sv: &DVector<T>, v_t: &CMat<T>, cutoff: T) -> CMat<T> {
    let n = v_t.ncols();
    let cols: Vec<CVec<T>> = (0..sv.len())
        .filter(|&i| sv[i] <= cutoff)
        .map(|i| v_t.row(i).adjoint())
        .collect();
    if cols.is_empty() {
        zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// A homogeneous linear constraint on operators: `map(T) = 0`.
///
/// `scale` bounds the operator norm of `map` (with respect to the
/// Hilbert–Schmidt norm on both sides); singular values below
/// `rank_rel · scale` are treated as zero.
pub struct Constraint<'a, T> {
    pub scale: T,
    pub map: Box<dyn Fn(&CMat<T>) -> CMat<T> + 'a>,
}

impl<'a, T: Real> Constraint<'a, T> {
    pub fn new(scale: T, map: impl Fn(&CMat<T>) -> CMat<T> + 'a) -> Self {
        Self { scale, map: Box::new(map) }
    }
}

/// Orthonormal basis of `{T ∈ start : map_k(T) = 0 for all k}`.
///
/// `start` must be an orthonormal family; constraints are imposed one after
/// another, each restricting the current solution space.
pub fn solve_constraints<T: Real>(
    start: Vec<CMat<T>>,
    constraints: &[Constraint<'_, T>],
    tol: &Tolerance<T>,
) -> Vec<CMat<T>> {
    let mut basis = start;
    for con in constraints {
        if basis.is_empty() {
            break;
        }
        let images: Vec<CVec<T>> = basis.iter().map(|b| vec_of(&(con.map)(b))).collect();
        if images[0].is_empty() {
            continue;
        }
        let m = DMatrix::from_columns(&images);
        let ker = nullspace(&m, Some(con.scale), tol);
        if ker.ncols() == basis.len() {
            continue;
        }
        basis = combine(&basis, &ker);
    }
    basis
}

/// Forms `Σ_i coeffs[(i, j)] · basis[i]` for every column `j`.
pub fn combine<T: Real>(basis: &[CMat<T>], coeffs: &CMat<T>) -> Vec<CMat<T>> {
    let (r, c) = basis[0].shape();
    (0..coeffs.ncols())
        .map(|j| {
            let mut acc = zeros(r, c);
            for (i, b) in basis.iter().enumerate() {
                let w = coeffs[(i, j)];
                if w != Complex::zero() {
                    acc += b * w;
                }
            }
            acc
        })
        .collect()
}

/// Matrix units of the given shape, column-major order.
pub fn matrix_units<T: Real>(rows: usize, cols: usize) -> Vec<CMat<T>> {
    let mut out = Vec::with_capacity(rows * cols);
    for j in 0..cols {
        for i in 0..rows {
            out.push(unit(rows, cols, i, j));
        }
    }
    out
}

/// Orthonormal basis of `{T : T a = a T for every generator a}`.
pub fn commutant<T: Real>(generators: &[CMat<T>], n: usize, tol: &Tolerance<T>) -> Result<Vec<CMat<T>>> {
    if let Some(g) = generators.iter().find(|g| g.shape() != (n, n)) {
        return Err(Error::Shape(format!("commutant: {:?} on dimension {n}", g.shape())));
    }
    let cons: Vec<Constraint<'_, T>> = generators
        .iter()
        .map(|a| Constraint::new(T::lit(2.0) * hs_norm(a), move |t: &CMat<T>| t * a - a * t))
        .collect();
    Ok(solve_constraints(matrix_units(n, n), &cons, tol))
}

/// Separated completion of a positive semidefinite Gram matrix.
#[derive(Debug, Clone)]
pub struct GramCompletion<T: Real> {
    pub input_count: usize,
    pub out_dim: usize,
    /// Row `g` holds the coordinates (conjugated) of generator `g`:
    /// `coords · coordsᴴ = gram`.
    pub coords: CMat<T>,
    /// Kept eigenvectors, one per column.
    pub vecs: CMat<T>,
    /// Square roots of the kept eigenvalues.
    pub sqrt_vals: Vec<T>,
}

impl<T: Real> GramCompletion<T> {
    /// Coordinate vector of generator `g` in the completed space.
    pub fn vector(&self, g: usize) -> CVec<T> {
        self.coords.row(g).adjoint()
    }

    /// All generator vectors as columns (`out_dim × input_count`).
    pub fn vectors(&self) -> CMat<T> {
        self.coords.adjoint()
    }

    /// `V Λ^{-1/2}`: maps generator-image data to an operator on the completion.
    pub fn pinv_factor(&self) -> CMat<T> {
        let inv: Vec<T> = self.sqrt_vals.iter().map(|&s| T::one() / s).collect();
        &self.vecs * from_real_diag(&inv)
    }

    /// Matrix of the linear map sending generator `g` to column `g` of
    /// `images`, together with the consistency residual on the Gram kernel.
    pub fn induced_map(&self, images: &CMat<T>) -> (CMat<T>, T) {
        let m = images * self.pinv_factor();
        let back = &m * self.vectors();
        (m, max_abs(&(back - images)))
    }

    /// Operator on the completion whose matrix elements between generator
    /// vectors are given by `form` (`⟨v_g, X v_h⟩ = form[(g, h)]`).
    pub fn induced_form(&self, form: &CMat<T>) -> CMat<T> {
        let p = self.pinv_factor();
        p.adjoint() * form * p
    }
}

pub fn gram_completion<T: Real>(gram: &CMat<T>, tol: &Tolerance<T>) -> Result<GramCompletion<T>> {
    if gram.nrows() != gram.ncols() {
        return Err(Error::Shape(format!("gram matrix {:?}", gram.shape())));
    }
    if !is_finite(gram) {
        return Err(Error::Degenerate("non-finite gram entry".into()));
    }
    let n = gram.nrows();
    let asym = max_abs(&(gram - gram.adjoint()));
    let scale = T::one().max(max_abs(gram));
    if asym > tol.residual_abs * scale {
        return Err(Error::NotHermitian(asym.as_f64()));
    }
    let (vals, vecs) = eigh(gram);
    let lmax = vals.first().copied().unwrap_or_else(T::zero).max(T::zero());
    if let Some(&low) = vals.last() {
        if low < -tol.residual_abs * scale {
            return Err(Error::NotPsd(low.as_f64()));
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > tol.rank_rel * lmax).collect();
    let d = keep.len();
    let kept = DMatrix::from_fn(n, d, |r, c| vecs[(r, keep[c])]);
    let sqrt_vals: Vec<T> = keep.iter().map(|&i| vals[i].sqrt()).collect();
    let coords = &kept * from_real_diag(&sqrt_vals);
    Ok(GramCompletion {
        input_count: n,
        out_dim: d,
        coords,
        vecs: kept,
        sqrt_vals,
    })
}

/// Solves `T · L_i = R_i` for all `i`, with `T` of shape `rows × cols`.
pub fn solve_intertwiner<T: Real>(
    constraints: &[(CMat<T>, CMat<T>)],
    rows: usize,
    cols: usize,
    tol: &Tolerance<T>,
) -> Result<CMat<T>> {
    for (l, r) in constraints {
        if l.nrows() != cols || r.nrows() != rows || l.ncols() != r.ncols() {
            return Err(Error::Shape(format!(
                "solve_intertwiner: L {:?}, R {:?} for T {rows}x{cols}",
                l.shape(),
                r.shape()
            )));
        }
    }
    let total: usize = constraints.iter().map(|(l, _)| l.ncols()).sum();
    let mut lall = zeros(cols, total);
    let mut rall = zeros(rows, total);
    let mut at = 0;
    for (l, r) in constraints {
        lall.view_mut((0, at), l.shape()).copy_from(l);
        rall.view_mut((0, at), r.shape()).copy_from(r);
        at += l.ncols();
    }
    if cols == 0 || rows == 0 {
        return Ok(zeros(rows, cols));
    }
    // T L = R  <=>  Lᴴ Tᴴ = Rᴴ
    let svd = SVD::try_new(lall.adjoint(), true, true, T::default_epsilon(), SVD_MAX_ITER)
        .expect("SVD converges");
    let smax = svd.singular_values.iter().fold(T::zero(), |x, &s| x.max(s));
    let cutoff = tol.rank_rel * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank < cols {
        return Err(Error::Underdetermined(rows * (cols - rank)));
    }
    let th = svd
        .solve(&rall.adjoint(), cutoff)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    let t = th.adjoint();
    let res = max_abs(&(&t * &lall - &rall));
    if res > tol.residual_abs * T::one().max(max_abs(&rall)) {
        return Err(Error::Inconsistent(res.as_f64()));
    }
    Ok(t)
}

/// Moore–Penrose inverse with singular values below `rank_rel · σ_max` dropped.
pub fn pseudo_inverse<T: Real>(m: &CMat<T>, tol: &Tolerance<T>) -> CMat<T> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return zeros(m.ncols(), m.nrows());
    }
    let svd = SVD::try_new(m.clone(), true, true, T::default_epsilon(), SVD_MAX_ITER).expect("SVD converges");
    let smax = svd.singular_values.iter().fold(T::zero(), |x, &s| x.max(s));
    let cutoff = tol.rank_rel * smax;
    svd.pseudo_inverse(cutoff).expect("u and v computed")
}

/// Superoperator matrix of `x ↦ Σ_k a_k x b_k` on column-major vectorisation.
pub fn superoperator<T: Real>(pairs: &[(CMat<T>, CMat<T>)]) -> CMat<T> {
    let mut it = pairs.iter();
    let Some((a, b)) = it.next() else {
        return zeros(0, 0);
    };
    let mut m = kron(&b.transpose(), a);
    for (a, b) in it {
        m += kron(&b.transpose(), a);
    }
    m
}

/// Applies a superoperator matrix to an operator.
pub fn apply_superoperator<T: Real>(s: &CMat<T>, x: &CMat<T>) -> CMat<T> {
    let y = s * vec_of(x);
    let n = (y.len() as f64).sqrt().round() as usize;
    unvec(y.as_slice(), n, n)
}
