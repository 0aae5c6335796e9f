//! Acceptance criteria: one PASS/FAIL line each, nonzero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use cstar_fiber::base::{block_algebra, diagonal_base, gns_base, CStarBase};
use cstar_fiber::commutative::{fiberwise_rtp_iso, Bundle, DiscreteBase, FiberedSpace};
use cstar_fiber::fiber::{
    algebra_direct_sum, check_fiber_properties, fiber_morphism, fiber_product, ind, ind_span, sauvageot_crosscheck,
    slice_cp, slice_spatial, unitality_check, AlgebraMorphism, BimoduleAlgebra, CpMap, Leg,
};
use cstar_fiber::kernel;
use cstar_fiber::module::{full_morphisms, CStarBimodule, CStarModule, MorphismKind};
use cstar_fiber::opspace::{ConcreteAlgebra, OperatorSpace};
use cstar_fiber::rtp::{assoc_iso, direct_sum_compat, left_only, right_only, triangle_check, RelativeTensorProduct};
use cstar_fiber::{Mat, Tol, C};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn tol() -> Tol {
    Tol::default()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random(g: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    DMatrix::from_fn(r, c, |_, _| C::new(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)))
}

fn random_unitary(g: &mut ChaCha8Rng, n: usize) -> Mat {
    random(g, n, n).qr().q()
}

fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

fn unitarity(u: &Mat) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let id = Mat::identity(u.nrows(), u.ncols());
    max_abs(&(u.adjoint() * u - &id)).max(max_abs(&(u * u.adjoint() - id)))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn triv() -> Arc<CStarBase<f64>> {
    Arc::new(CStarBase::trivial())
}

fn triv_module(n: usize) -> CStarModule<f64> {
    CStarModule::new(triv(), OperatorSpace::full(n, 1), &tol()).unwrap()
}

fn right(n: usize, a: ConcreteAlgebra<f64>) -> BimoduleAlgebra<f64> {
    BimoduleAlgebra::over_right(&triv_module(n), a, &tol()).unwrap()
}

fn left(n: usize, a: ConcreteAlgebra<f64>) -> BimoduleAlgebra<f64> {
    BimoduleAlgebra::over_left(&triv_module(n), a, &tol()).unwrap()
}

fn rotated(blocks: &[usize], seed: u64) -> ConcreteAlgebra<f64> {
    let n: usize = blocks.iter().sum();
    block_algebra::<f64>(blocks).conjugate(&random_unitary(&mut rng(seed), n), &tol()).unwrap()
}

fn fiberwise(m: &CStarModule<f64>) -> ConcreteAlgebra<f64> {
    ConcreteAlgebra::from_space(full_morphisms(m.alpha(), m.alpha(), &tol()).unwrap(), &tol()).unwrap()
}

struct Pair {
    name: String,
    a: BimoduleAlgebra<f64>,
    b: BimoduleAlgebra<f64>,
}

fn bundle_pair(hd: &[usize], kd: &[usize]) -> (CStarModule<f64>, CStarModule<f64>) {
    let d = DiscreteBase::<f64>::uniform(hd.len()).unwrap();
    let h = cstar_fiber::commutative::bundle_module(&d, &Bundle::new(hd.to_vec()), &tol()).unwrap();
    let k = cstar_fiber::commutative::bundle_module_dag(&d, &Bundle::new(kd.to_vec()), &tol()).unwrap();
    (h, k)
}

fn gns_unit(blocks: &[usize], weights: &[f64]) -> (Arc<CStarBase<f64>>, CStarBimodule<f64>) {
    let (b, _) = gns_base::<f64>(blocks, weights, &tol()).unwrap();
    let b = Arc::new(b);
    let u = CStarBimodule::unit(b.clone());
    (b, u)
}

/// Nondegenerate pairs over trivial, discrete and GNS bases.
fn corpus() -> Vec<Pair> {
    let mut out = Vec::new();
    let mut push = |name: &str, a, b| out.push(Pair { name: name.into(), a, b });
    push("trivial M2*M2", right(2, ConcreteAlgebra::full(2)), left(2, ConcreteAlgebra::full(2)));
    push("trivial D2*D3", right(2, ConcreteAlgebra::diagonal(2)), left(3, ConcreteAlgebra::diagonal(3)));
    push("trivial rotated(1,2)*M2", right(3, rotated(&[1, 2], 4)), left(2, ConcreteAlgebra::full(2)));
    let (h, k) = bundle_pair(&[2, 1], &[1, 2]);
    push(
        "bundle fiberwise",
        BimoduleAlgebra::over_right(&h, fiberwise(&h), &tol()).unwrap(),
        BimoduleAlgebra::over_left(&k, fiberwise(&k), &tol()).unwrap(),
    );
    push(
        "bundle full",
        BimoduleAlgebra::over_right(&h, ConcreteAlgebra::full(3), &tol()).unwrap(),
        BimoduleAlgebra::over_left(&k, ConcreteAlgebra::full(3), &tol()).unwrap(),
    );
    for (label, blocks, weights) in [
        ("C2 (1/2,1/2)", vec![1, 1], vec![0.5, 0.5]),
        ("C3 (0.2,0.3,0.5)", vec![1, 1, 1], vec![0.2, 0.3, 0.5]),
        ("M2 trace", vec![2], vec![0.5, 0.5]),
        ("M2 (0.2,0.8)", vec![2], vec![0.2, 0.8]),
    ] {
        let (b, u) = gns_unit(&blocks, &weights);
        push(
            &format!("gns {label} b_dag*b"),
            BimoduleAlgebra::over_right(u.right(), b.b_dag().clone(), &tol()).unwrap(),
            BimoduleAlgebra::over_left(u.left(), b.b().clone(), &tol()).unwrap(),
        );
        push(
            &format!("gns {label} full*full"),
            BimoduleAlgebra::over_right(u.right(), ConcreteAlgebra::full(b.k_dim()), &tol()).unwrap(),
            BimoduleAlgebra::over_left(u.left(), ConcreteAlgebra::full(b.k_dim()), &tol()).unwrap(),
        );
    }
    let (_, u) = gns_unit(&[1, 1], &[0.3, 0.7]);
    let b = BimoduleAlgebra::new(u.clone(), u.b().b().clone(), &tol()).unwrap();
    push("gns C2 (0.3,0.7) unit", b.clone(), b);
    out
}

fn c1_trivial_base() -> Outcome {
    let mut g = rng(1);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let (n, m) = (g.gen_range(1..=4), g.gen_range(1..=4));
        let span = |g: &mut ChaCha8Rng, n: usize| {
            let cols: Vec<Mat> = (0..n).map(|_| random(g, n, 1)).collect();
            OperatorSpace::span(n, 1, &cols, &tol()).unwrap()
        };
        let h = CStarModule::new(triv(), span(&mut g, n), &tol()).map_err(err)?;
        let k = CStarModule::new(triv(), span(&mut g, m), &tol()).map_err(err)?;
        let rtp = RelativeTensorProduct::new(h.clone(), k.clone(), &tol()).map_err(err)?;
        ensure(rtp.dim() == n * m, || format!("pair {i}: dim {} for {n}x{m}", rtp.dim()))?;
        let mut images = Mat::zeros(n * m, rtp.generator_count());
        for gi in 0..rtp.generator_count() {
            let (a, _, c) = rtp.gen_index(gi);
            images.set_column(gi, &h.alpha().basis()[a].kronecker(&k.alpha().basis()[c]).column(0));
        }
        let u = rtp.induced(&images, &tol()).map_err(err)?;
        worst = worst.max(unitarity(&u));
    }
    ensure(worst <= 1e-8, || format!("unitarity residual {worst:.2e}"))?;
    Ok(format!("20 pairs, worst unitarity residual {worst:.1e}"))
}

fn c2_discrete_bundles() -> Outcome {
    let mut g = rng(2);
    let mut worst = 0.0f64;
    let mut cases = vec![(vec![1.0, 1.0], vec![1, 2], vec![2, 1]), (vec![3.0, 3.0], vec![1, 2], vec![2, 1])];
    for _ in 0..30 {
        let z = g.gen_range(1..=4);
        let w = (0..z).map(|_| g.gen_range(0.1..5.0)).collect();
        let hd = (0..z).map(|_| g.gen_range(1..=3)).collect();
        let kd = (0..z).map(|_| g.gen_range(1..=3)).collect();
        cases.push((w, hd, kd));
    }
    for (w, hd, kd) in &cases {
        let d = DiscreteBase::new(w.clone()).map_err(err)?;
        let iso = fiberwise_rtp_iso(&d, &Bundle::new(hd.clone()), &Bundle::new(kd.clone()), &tol()).map_err(err)?;
        let want: usize = hd.iter().zip(kd).map(|(a, b)| a * b).sum();
        ensure(iso.rtp.dim() == want, || format!("{hd:?}/{kd:?}: dim {} expected {want}", iso.rtp.dim()))?;
        worst = worst.max(unitarity(&iso.matrix));
    }
    ensure(worst <= 1e-8, || format!("unitarity residual {worst:.2e}"))?;
    Ok(format!("{} bundles, worst unitarity residual {worst:.1e}", cases.len()))
}

fn c3_sauvageot() -> Outcome {
    let pairs = corpus();
    let mut worst = 0.0f64;
    for p in &pairs {
        let fp = fiber_product(&p.a, &p.b, &tol()).map_err(err)?;
        let r = sauvageot_crosscheck(&p.a, &p.b, &fp, &tol()).map_err(err)?;
        let res = r.get("equal").unwrap().residual;
        ensure(res <= 1e-8, || format!("{}: residual {res:.2e}", p.name))?;
        worst = worst.max(res);
    }
    let x = FiberedSpace::new(vec![0, 0, 1], vec![0.5, 1.5, 2.0], 2).unwrap();
    let y = FiberedSpace::new(vec![0, 1, 1], vec![1.0, 0.25, 4.0], 2).unwrap();
    let d = DiscreteBase::new(vec![1.0, 3.0]).unwrap();
    let a = BimoduleAlgebra::over_right(&x.module(&d, &tol()).unwrap(), x.functions(), &tol()).unwrap();
    let b = BimoduleAlgebra::over_left(&y.module_dag(&d, &tol()).unwrap(), y.functions(), &tol()).unwrap();
    let fp = fiber_product(&a, &b, &tol()).map_err(err)?;
    let res = sauvageot_crosscheck(&a, &b, &fp, &tol()).map_err(err)?.get("equal").unwrap().residual;
    ensure(res <= 1e-8, || format!("functions: residual {res:.2e}"))?;
    worst = worst.max(res);
    Ok(format!("{} instances, worst residual {worst:.1e}", pairs.len() + 1))
}

fn c4_ind_span() -> Outcome {
    let mut cases: Vec<(String, OperatorSpace<f64>, ConcreteAlgebra<f64>)> = Vec::new();
    let (h, k) = bundle_pair(&[2, 1], &[1, 2]);
    let rtp = RelativeTensorProduct::new(h.clone(), k.clone(), &tol()).unwrap();
    let ket2 = OperatorSpace::span(rtp.dim(), 3, rtp.ket2_basis(), &tol()).unwrap();
    let ket1 = OperatorSpace::span(rtp.dim(), 3, rtp.ket1_basis(), &tol()).unwrap();
    let e0 = kernel::unit::<f64>(3, 3, 0, 0);
    let degenerate = ConcreteAlgebra::generated(3, &[e0], false, &tol()).unwrap();
    for (label, a) in [
        ("fiberwise", fiberwise(&h)),
        ("full", ConcreteAlgebra::full(3)),
        ("diagonal", ConcreteAlgebra::diagonal(3)),
        ("degenerate", degenerate.clone()),
    ] {
        cases.push((format!("ket2 {label}"), ket2.clone(), a));
    }
    cases.push(("ket1 fiberwise".into(), ket1.clone(), fiberwise(&k)));
    cases.push(("ket1 full".into(), ket1, ConcreteAlgebra::full(3)));
    for seed in 0..3 {
        let u = random_unitary(&mut rng(100 + seed), 3);
        let i = OperatorSpace::span(3, 3, &[u], &tol()).unwrap();
        cases.push((format!("unitary {seed}"), i, rotated(&[1, 2], seed)));
    }
    cases.push(("scalars".into(), OperatorSpace::scalars(3), block_algebra(&[1, 2])));
    let (b, u) = gns_unit(&[2], &[0.3, 0.7]);
    let r = RelativeTensorProduct::new(u.right().clone(), u.left().clone(), &tol()).unwrap();
    let i = OperatorSpace::span(r.dim(), 4, r.ket2_basis(), &tol()).unwrap();
    cases.push(("gns M2 b_dag".into(), i.clone(), b.b_dag().clone()));
    cases.push(("gns M2 full".into(), i, ConcreteAlgebra::full(4)));
    let mut worst = 0.0f64;
    for (label, i, a) in &cases {
        let r = ind(i, a, &tol()).map_err(|e| format!("{label}: {e}"))?;
        let s = ind_span(i, a, &tol()).map_err(err)?;
        let res = r.algebra.space().equality_residual(&s);
        ensure(res <= 1e-8, || format!("{label}: residual {res:.2e}"))?;
        worst = worst.max(res);
    }
    Ok(format!("{} instances, worst residual {worst:.1e}", cases.len()))
}

const PROPERTY_ITEMS: [&str; 11] = [
    "i_bra_beta",
    "i_bra_gamma",
    "i_multipliers",
    "ii_tensor",
    "iv_right",
    "iv_left",
    "v_identity",
    "vii_base",
    "viii_a",
    "viii_b",
    "viii_commutant",
];

fn c5_fiber_properties() -> Outcome {
    let mut checked = 0;
    for p in corpus() {
        let fp = fiber_product(&p.a, &p.b, &tol()).map_err(err)?;
        let r = check_fiber_properties(&p.a, &p.b, &fp, &tol()).map_err(err)?;
        for item in PROPERTY_ITEMS {
            let c = r.get(item).ok_or_else(|| format!("{}: no item {item}", p.name))?;
            ensure(c.passed, || format!("{}: {item} residual {:.2e}", p.name, c.residual))?;
            checked += 1;
        }
    }
    // Id ∈ A ∗ B exactly when both ρ-images lie in the algebras
    let (h, k) = bundle_pair(&[2, 1], &[1, 2]);
    let e = kernel::unit::<f64>(3, 3, 0, 0) + kernel::unit(3, 3, 1, 1);
    let small = ConcreteAlgebra::generated(3, &[e], false, &tol()).unwrap();
    let a = BimoduleAlgebra::over_right(&h, small, &tol()).map_err(err)?;
    let b = BimoduleAlgebra::over_left(&k, fiberwise(&k), &tol()).map_err(err)?;
    let rho_in_a = a
        .bimodule()
        .rho_beta_images(&tol())
        .map_err(err)?
        .iter()
        .all(|x| a.algebra().space().residual(x) <= 1e-8);
    ensure(!rho_in_a, || "negative instance has ρ_β(𝔅†) ⊆ A".into())?;
    let fp = fiber_product(&a, &b, &tol()).map_err(err)?;
    ensure(!fp.algebra.contains_identity(&tol()), || "Id ∈ A ∗ B on the negative instance".into())?;
    let r = check_fiber_properties(&a, &b, &fp, &tol()).map_err(err)?;
    ensure(r.get("v_identity").is_some_and(|c| c.passed), || "v_identity fails on the negative instance".into())?;
    let a = BimoduleAlgebra::over_right(&h, fiberwise(&h), &tol()).map_err(err)?;
    let fp = fiber_product(&a, &b, &tol()).map_err(err)?;
    ensure(fp.algebra.contains_identity(&tol()), || "Id ∉ A ∗ B on the positive instance".into())?;
    Ok(format!("{checked} item checks on the corpus, item v negative and positive instances"))
}

fn c6_unitality() -> Outcome {
    let mut cases: Vec<(String, BimoduleAlgebra<f64>, Option<usize>)> = Vec::new();
    for k in [1, 2, 3] {
        let base = Arc::new(diagonal_base::<f64>(k));
        let u = CStarBimodule::unit(base.clone());
        cases.push((format!("discrete {k} full"), BimoduleAlgebra::new(u.clone(), ConcreteAlgebra::full(k), &tol()).unwrap(), Some(k)));
        cases.push((format!("discrete {k} diagonal"), BimoduleAlgebra::new(u, base.b().clone(), &tol()).unwrap(), Some(k)));
    }
    for (label, w) in [("C2", vec![0.4, 0.6]), ("C3", vec![0.2, 0.3, 0.5])] {
        let blocks = vec![1; w.len()];
        let (b, u) = gns_unit(&blocks, &w);
        let n = b.k_dim();
        cases.push((format!("gns {label} full"), BimoduleAlgebra::over_right(u.right(), ConcreteAlgebra::full(n), &tol()).unwrap(), Some(n)));
        cases.push((format!("gns {label} b"), BimoduleAlgebra::over_right(u.right(), b.b().clone(), &tol()).unwrap(), Some(n)));
    }
    cases.push(("trivial M3".into(), right(3, ConcreteAlgebra::full(3)), Some(9)));
    let mut worst = 0.0f64;
    for (label, a, dim_b_dag) in &cases {
        let r = unitality_check(a, &tol()).map_err(err)?;
        for name in ["general", "b_dag", "base"] {
            let c = r.get(name).ok_or_else(|| format!("{label}: no {name}"))?;
            ensure(c.note.is_none() && c.residual <= 1e-8, || {
                format!("{label}: {name} residual {:.2e} {:?}", c.residual, c.note)
            })?;
            worst = worst.max(c.residual);
        }
        if let Some(d) = dim_b_dag {
            let got = r.get("b_dag").unwrap().dims["dim"];
            ensure(got == *d, || format!("{label}: dim A ∩ L(H_β) = {got}, expected {d}"))?;
        }
    }
    Ok(format!("{} instances, worst residual {worst:.1e}", cases.len()))
}

fn c7_coherence() -> Outcome {
    let d = DiscreteBase::<f64>::uniform(2).unwrap();
    let h = right_only(&cstar_fiber::commutative::bundle_module(&d, &Bundle::new(vec![1, 2]), &tol()).unwrap());
    let k = CStarBimodule::unit(d.base().clone());
    let l = left_only(&cstar_fiber::commutative::bundle_module_dag(&d, &Bundle::new(vec![2, 1]), &tol()).unwrap());
    let (_, u) = gns_unit(&[2], &[0.3, 0.7]);
    let t = triv();
    let m = |n: usize| CStarBimodule::new(t.clone(), OperatorSpace::full(n, 1), t.clone(), OperatorSpace::full(n, 1), &tol()).unwrap();
    let chains = [("discrete", h, k, l), ("gns M2", u.clone(), u.clone(), u), ("trivial", m(2), m(2), m(3))];
    let mut worst = 0.0f64;
    for (label, h, k, l) in &chains {
        let a = assoc_iso(h, k, l, &tol()).map_err(err)?;
        for name in ["unitary", "alpha", "beta"] {
            let res = a.report.get(name).unwrap().residual;
            ensure(res <= 1e-8, || format!("{label}: {name} residual {res:.2e}"))?;
            worst = worst.max(res);
        }
        let tri = triangle_check(h, l, &tol()).map_err(err)?;
        ensure(tri.passed && tri.max_residual() <= 1e-8, || format!("{label}: triangle {}", tri.render()))?;
        worst = worst.max(tri.max_residual());
    }
    Ok(format!("{} chains, worst residual {worst:.1e}", chains.len()))
}

fn c8_gns_bases() -> Outcome {
    let mut worst = 0.0f64;
    for (label, blocks, w) in [("C2", vec![1, 1], vec![0.5, 0.5]), ("M2", vec![2], vec![0.5, 0.5])] {
        let (b, gns) = gns_base::<f64>(&blocks, &w, &tol()).map_err(err)?;
        let r = b.check(&tol());
        ensure(r.passed, || format!("{label}: {}", r.render()))?;
        let comm = b.b().commutant(&tol());
        ensure(comm.dim() == b.b_dag().dim(), || format!("{label}: dim 𝔅† {} vs commutant {}", b.b_dag().dim(), comm.dim()))?;
        let eq = comm.space().equality_residual(b.b_dag().space());
        ensure(eq <= 1e-8, || format!("{label}: 𝔅† vs 𝔅' residual {eq:.2e}"))?;
        let j = gns.j_matrix();
        let jc = j.map(|z| z.conj());
        let id = Mat::identity(j.nrows(), j.ncols());
        let mut res = max_abs(&(j * &jc - &id)).max(max_abs(&(j.adjoint() * j - &id)));
        for (x, xop) in gns.pi_basis().iter().zip(gns.pi_op_basis()) {
            res = res.max(max_abs(&(j * x.adjoint().map(|z| z.conj()) * j.adjoint() - xop)));
        }
        let r = gns.check(&tol());
        for name in ["j_involution", "j_antiunitary", "polar", "op_definition"] {
            res = res.max(r.get(name).unwrap().residual);
        }
        ensure(res <= 1e-10, || format!("{label}: J residual {res:.2e}"))?;
        worst = worst.max(res);
    }
    Ok(format!("C2 and M2, worst J residual {worst:.1e}"))
}

fn conj(a: &BimoduleAlgebra<f64>, u: &Mat, leg: Leg) -> AlgebraMorphism<f64> {
    AlgebraMorphism::from_fn(a.clone(), a.clone(), |x| u * x * u.adjoint(), leg, MorphismKind::Full, &tol()).unwrap()
}

fn doubling(leg: Leg) -> AlgebraMorphism<f64> {
    let e = |i, j| kernel::unit::<f64>(3, 3, i, j);
    let target = ConcreteAlgebra::from_space(OperatorSpace::span(3, 3, &[e(0, 0) + e(1, 1), e(2, 2)], &tol()).unwrap(), &tol()).unwrap();
    let (a, c) = match leg {
        Leg::Right => (right(2, ConcreteAlgebra::diagonal(2)), right(3, target)),
        Leg::Left => (left(2, ConcreteAlgebra::diagonal(2)), left(3, target)),
    };
    let f = |x: &Mat| {
        let mut y = Mat::zeros(3, 3);
        y[(0, 0)] = x[(0, 0)];
        y[(1, 1)] = x[(0, 0)];
        y[(2, 2)] = x[(1, 1)];
        y
    };
    AlgebraMorphism::from_fn(a, c, f, leg, MorphismKind::Full, &tol()).unwrap()
}

fn c9_functoriality() -> Outcome {
    let mut g = rng(9);
    let (u, v) = (random_unitary(&mut g, 2), random_unitary(&mut g, 2));
    let m2r = right(2, ConcreteAlgebra::full(2));
    let m2l = left(2, ConcreteAlgebra::full(2));
    let d2l = left(2, ConcreteAlgebra::diagonal(2));
    let (h, k) = bundle_pair(&[2, 1], &[1, 2]);
    let fa = BimoduleAlgebra::over_right(&h, fiberwise(&h), &tol()).unwrap();
    let fb = BimoduleAlgebra::over_left(&k, fiberwise(&k), &tol()).unwrap();
    let id = |a: &BimoduleAlgebra<f64>, leg| AlgebraMorphism::identity(a, leg, &tol()).unwrap();
    let cases = [
        ("identities", id(&m2r, Leg::Right), id(&m2l, Leg::Left)),
        ("unitary conjugations", conj(&m2r, &u, Leg::Right), conj(&m2l, &v, Leg::Left)),
        ("doubling and identity", doubling(Leg::Right), id(&d2l, Leg::Left)),
        ("identity and doubling", id(&m2r, Leg::Right), doubling(Leg::Left)),
        ("bundle identities", id(&fa, Leg::Right), id(&fb, Leg::Left)),
    ];
    let mut worst = 0.0f64;
    for (label, phi, psi) in &cases {
        let fm = fiber_morphism(phi, psi, &tol()).map_err(|e| format!("{label}: {e}"))?;
        let src = fiber_product(phi.src(), psi.src(), &tol()).map_err(err)?;
        let dst = fiber_product(phi.dst(), psi.dst(), &tol()).map_err(err)?;
        for x in src.algebra.basis() {
            let (y, order) = fm.apply(x, &tol()).map_err(err)?;
            let image = dst.algebra.space().residual(&y) / 1f64.max(max_abs(&y));
            ensure(order <= 1e-8 && image <= 1e-8, || format!("{label}: order {order:.2e} image {image:.2e}"))?;
            worst = worst.max(order).max(image);
        }
        let r = fm.check(&src, &dst, &tol()).map_err(err)?;
        ensure(r.passed, || format!("{label}: {}", r.render()))?;
    }
    Ok(format!("{} morphism pairs, worst residual {worst:.1e}", cases.len()))
}

fn min_eig(m: &Mat) -> f64 {
    let h = (m + m.adjoint()) * C::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.iter().fold(f64::INFINITY, |a, &x| a.min(x))
}

fn c10_slices() -> Outcome {
    let (h, k) = bundle_pair(&[2, 1], &[1, 2]);
    let a = BimoduleAlgebra::over_right(&h, ConcreteAlgebra::full(3), &tol()).unwrap();
    let mut g = rng(10);
    let phi = CpMap::from_kraus(vec![random(&mut g, 3, 2), random(&mut g, 3, 2)]).map_err(err)?;
    let s = slice_cp(&phi, &a, &k, &tol()).map_err(err)?;
    let ket2 = OperatorSpace::span(s.rtp.dim(), 3, s.rtp.ket2_basis(), &tol()).unwrap();
    let domain = ind(&ket2, a.algebra(), &tol()).map_err(err)?.algebra;
    let mut lowest = f64::INFINITY;
    for _ in 0..20 {
        let c = random(&mut g, domain.dim(), 1);
        let y = domain.basis().iter().enumerate().fold(Mat::zeros(s.rtp.dim(), s.rtp.dim()), |acc, (i, b)| acc + b * c[(i, 0)]);
        let x = y.adjoint() * &y;
        let x = &x / C::new(x.norm(), 0.0);
        let img = s.apply(&x, &tol()).map_err(err)?;
        lowest = lowest.min(min_eig(&img));
    }
    ensure(lowest >= -1e-8, || format!("min eigenvalue {lowest:.2e}"))?;

    let fa = BimoduleAlgebra::over_right(&h, fiberwise(&h), &tol()).unwrap();
    let fb = BimoduleAlgebra::over_left(&k, fiberwise(&k), &tol()).unwrap();
    let base = h.base().clone();
    let c = BimoduleAlgebra::over_right(&CStarModule::unit(base.clone()), ConcreteAlgebra::full(base.k_dim()), &tol()).unwrap();
    let family = h.alpha().basis().to_vec();
    let id3 = Mat::identity(3, 3);
    let mut worst = 0.0f64;
    for (ss, ts, target) in [(vec![id3.clone()], vec![id3], &fa), (family.clone(), family, &c)] {
        let sp = slice_spatial(&ss, &ts, &fa, target, &fb, &tol()).map_err(err)?;
        for _ in 0..10 {
            let cs = random(&mut g, sp.source.dim(), 1);
            let x = sp.source.algebra.basis().iter().enumerate().fold(Mat::zeros(sp.source.rtp().dim(), sp.source.rtp().dim()), |acc, (i, b)| acc + b * cs[(i, 0)]);
            let r = sp.check(&x, &tol()).map_err(err)?;
            let res = r.get("slice").unwrap().residual;
            ensure(res <= 1e-8 && r.passed, || r.render())?;
            worst = worst.max(res);
        }
    }
    Ok(format!("min eigenvalue {lowest:.1e} on 20 positives, slice identity residual {worst:.1e}"))
}

fn c11_direct_sums() -> Outcome {
    let d = DiscreteBase::<f64>::uniform(2).unwrap();
    let bm = |dims: &[usize]| cstar_fiber::commutative::bundle_module(&d, &Bundle::new(dims.to_vec()), &tol()).unwrap();
    let bk = |dims: &[usize]| cstar_fiber::commutative::bundle_module_dag(&d, &Bundle::new(dims.to_vec()), &tol()).unwrap();
    let mut worst = 0.0f64;
    let module_cases = [
        (vec![triv_module(1), triv_module(2)], vec![triv_module(2), triv_module(1)]),
        (vec![bm(&[1, 1]), bm(&[2, 1])], vec![bk(&[1, 2])]),
        (vec![bm(&[1, 2])], vec![bk(&[1, 1]), bk(&[2, 1])]),
    ];
    for (hs, ks) in &module_cases {
        let c = direct_sum_compat(hs, ks, &tol()).map_err(err)?;
        let n = c.total.dim();
        let m = c.forward.ncols();
        ensure(n == m, || format!("dims {n} vs {m}"))?;
        let res = max_abs(&(&c.forward * &c.backward - Mat::identity(n, n)))
            .max(max_abs(&(&c.backward * &c.forward - Mat::identity(m, m))));
        ensure(res <= 1e-10, || format!("module direct sum residual {res:.2e}"))?;
        worst = worst.max(res);
    }
    let as_ = [right(2, ConcreteAlgebra::diagonal(2)), right(1, ConcreteAlgebra::diagonal(1))];
    let bs = [left(2, ConcreteAlgebra::diagonal(2)), left(2, ConcreteAlgebra::full(2))];
    let ds = algebra_direct_sum(&as_, &bs, &tol()).map_err(err)?;
    let mut g = rng(11);
    for _ in 0..5 {
        let parts: Vec<Mat> = ds
            .parts
            .iter()
            .map(|p| {
                let c = random(&mut g, p.dim(), 1);
                p.algebra.basis().iter().enumerate().fold(Mat::zeros(p.rtp().dim(), p.rtp().dim()), |acc, (i, b)| acc + b * c[(i, 0)])
            })
            .collect();
        let y = ds.forward(&parts);
        let back = ds.backward(&y);
        for (p, q) in parts.iter().zip(&back) {
            worst = worst.max(max_abs(&(p - q)));
        }
        let again = ds.forward(&back);
        worst = worst.max(max_abs(&(again - &y)));
    }
    ensure(worst <= 1e-10, || format!("algebra direct sum residual {worst:.2e}"))?;
    ensure(ds.report.passed, || ds.report.render())?;
    Ok(format!("{} module and 1 algebra direct sums, worst residual {worst:.1e}", module_cases.len()))
}

fn c12_bicommutant() -> Outcome {
    let mut algebras: Vec<(String, ConcreteAlgebra<f64>)> = Vec::new();
    for n in 1..=4 {
        algebras.push((format!("M{n}"), ConcreteAlgebra::full(n)));
        algebras.push((format!("D{n}"), ConcreteAlgebra::diagonal(n)));
        algebras.push((format!("C{n}"), ConcreteAlgebra::scalars(n)));
    }
    for (i, blocks) in [vec![1, 2], vec![2, 2], vec![1, 1, 2], vec![3, 1]].iter().enumerate() {
        algebras.push((format!("blocks {blocks:?}"), block_algebra(blocks)));
        algebras.push((format!("rotated {blocks:?}"), rotated(blocks, 20 + i as u64)));
    }
    for (label, blocks, w) in [("C2", vec![1, 1], vec![0.5, 0.5]), ("C3", vec![1, 1, 1], vec![0.2, 0.3, 0.5]), ("M2", vec![2], vec![0.3, 0.7])] {
        let (b, _) = gns_base::<f64>(&blocks, &w, &tol()).unwrap();
        algebras.push((format!("gns {label} b"), b.b().clone()));
        algebras.push((format!("gns {label} b_dag"), b.b_dag().clone()));
    }
    for p in corpus() {
        let fp = fiber_product(&p.a, &p.b, &tol()).unwrap();
        if fp.rtp().dim() <= 16 {
            algebras.push((format!("fiber {}", p.name), fp.algebra));
        }
    }
    let mut worst = 0.0f64;
    let mut count = 0;
    for (label, a) in &algebras {
        if a.n() > 16 || !a.contains_identity(&tol()) {
            continue;
        }
        let cc = a.commutant(&tol()).commutant(&tol());
        let res = cc.space().equality_residual(a.space());
        ensure(res <= 1e-8, || format!("{label}: residual {res:.2e}"))?;
        worst = worst.max(res);
        count += 1;
    }
    ensure(count >= 20, || format!("only {count} unital algebras"))?;
    Ok(format!("{count} unital algebras, worst residual {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("trivial-base collapse", c1_trivial_base),
        ("discrete-bundle isomorphism", c2_discrete_bundles),
        ("commutant description of fiber products", c3_sauvageot),
        ("induced algebra equals span", c4_ind_span),
        ("fiber product properties", c5_fiber_properties),
        ("unitality", c6_unitality),
        ("associator and triangle", c7_coherence),
        ("GNS bases", c8_gns_bases),
        ("functoriality", c9_functoriality),
        ("slice maps", c10_slices),
        ("finite direct sums", c11_direct_sums),
        ("bicommutant", c12_bicommutant),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
