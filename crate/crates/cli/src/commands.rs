//! One function per subcommand; each returns an [`Output`].

use std::collections::BTreeMap;

use cstar_fiber::commutative::{fiberwise_rtp_iso, fibered_unitary, fp_commutative_check};
use cstar_fiber::fiber::{check_fiber_properties, fiber_product, ind, ind_span, sauvageot_crosscheck, unitality_check};
use cstar_fiber::kernel::{self, max_abs};
use cstar_fiber::opspace::{ConcreteAlgebra, OperatorSpace};
use cstar_fiber::report::Report;
use cstar_fiber::rtp::{left_only, right_only, rtp_bimodule};
use cstar_fiber::{Mat, Tol};

use crate::instance::{AlgebraSpec, BaseSpec, Instance, ModuleSpec, Provenance};
use crate::CliError;

#[derive(Debug, Default)]
pub struct Output {
    pub reports: Vec<Report>,
    pub dims: BTreeMap<String, usize>,
    pub bases: BTreeMap<String, Vec<Mat>>,
}

impl Output {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    fn extend(&mut self, prefix: &str, other: Output) {
        self.reports.extend(other.reports);
        for (k, v) in other.dims {
            self.dims.insert(format!("{prefix}.{k}"), v);
        }
        for (k, v) in other.bases {
            self.bases.insert(format!("{prefix}.{k}"), v);
        }
    }

    /// Records a verification error as a failing report; input errors propagate.
    fn absorb(&mut self, title: &str, result: Result<Output, CliError>) -> Result<(), CliError> {
        match result {
            Ok(o) => self.extend(&title.replace(' ', "/"), o),
            Err(CliError::Verify(msg)) => {
                let mut r = Report::new(title);
                r.flag("construct", "the objects of this check can be built", false).note(msg);
                self.reports.push(r);
            }
            Err(e) => return Err(e),
        }
        Ok(())
    }
}

fn verify(at: &str) -> impl Fn(cstar_fiber::Error) -> CliError + '_ {
    move |e| CliError::Verify(format!("{at}: {e}"))
}

fn titled(mut r: Report, title: String) -> Report {
    r.title = title;
    r
}

pub fn check(inst: &Instance, tol: &Tol) -> Result<Output, CliError> {
    let mut out = Output::default();
    for (name, spec) in &inst.bases {
        let base = inst.base(name, tol)?;
        out.dims.insert(format!("base.{name}"), base.k_dim());
        out.reports.push(titled(base.check(tol), format!("base {name}")));
        if let BaseSpec::Gns(s) = spec {
            let (_, gns) = inst.gns(s, &format!("bases.{name}"), tol)?;
            out.reports.push(titled(gns.check(tol), format!("gns data of base {name}")));
        }
    }
    for name in inst.modules.keys() {
        let (m, _) = inst.module(name, tol)?;
        out.dims.insert(format!("module.{name}"), m.h_dim());
        out.reports.push(titled(m.check(tol), format!("module {name}")));
    }
    for name in inst.algebras.keys() {
        let a = inst.algebra(name, tol)?;
        out.dims.insert(format!("algebra.{name}"), a.dim());
        out.reports.push(algebra_report(name, &a, tol));
    }
    for name in inst.b_algebras.keys() {
        let mut r = Report::new(format!("algebra over a base {name}"));
        match inst.b_algebra(name, tol) {
            Ok(_) => {
                r.flag("absorbs", "the base actions on the leg preserve the algebra", true);
            }
            Err(CliError::Verify(msg)) => {
                r.flag("absorbs", "the base actions on the leg preserve the algebra", false).note(msg);
            }
            Err(e) => return Err(e),
        }
        out.reports.push(r);
    }
    for name in inst.states.keys() {
        let (base, gns) = inst.state(name, tol)?;
        out.reports.push(titled(base.check(tol), format!("gns base of state {name}")));
        out.reports.push(titled(gns.check(tol), format!("gns data of state {name}")));
    }
    Ok(out)
}

fn algebra_report(name: &str, a: &ConcreteAlgebra<f64>, tol: &Tol) -> Report {
    let mut r = Report::new(format!("algebra {name}"));
    let c = a.closure_residuals();
    r.residual("adjoint", "A* ⊆ A", c.adjoint, tol.residual_abs).dim("dim", a.dim());
    r.residual("product", "A A ⊆ A", c.product, tol.residual_abs);
    if a.contains_identity(tol) {
        let bicommutant = a.commutant(tol).commutant(tol);
        r.residual("bicommutant", "A'' = A", bicommutant.space().equality_residual(a.space()), tol.residual_abs);
    } else {
        r.info("bicommutant", "A'' = A", "skipped: A is not unital");
    }
    r
}

pub fn rtp(inst: &Instance, h: &str, k: &str, tol: &Tol, dump: bool) -> Result<Output, CliError> {
    let (mh, ph) = inst.module(h, tol)?;
    let (mk, pk) = inst.module(k, tol)?;
    let at = format!("rtp {h} {k}");
    let hk = rtp_bimodule(&right_only(&mh), &left_only(&mk), tol).map_err(verify(&at))?;
    let mut out = Output::default();
    let rtp = &hk.rtp;
    out.dims.insert("h".into(), mh.h_dim());
    out.dims.insert("k".into(), mk.h_dim());
    out.dims.insert("rtp".into(), rtp.dim());
    out.dims.insert("generators".into(), rtp.generator_count());
    out.reports.push(titled(hk.report.clone(), format!("relative tensor product {h} ⊗ {k}")));
    match (&ph, &pk) {
        (Provenance::Bundle { discrete: d1, bundle: b1 }, Provenance::Bundle { discrete: d2, bundle: b2 }) if d1 == d2 => {
            let d = inst.discrete_base(d1, &at)?;
            let iso = fiberwise_rtp_iso(&d, b1, b2, tol).map_err(verify(&at))?;
            out.reports.push(titled(iso.report, format!("fiberwise decomposition of {h} ⊗ {k}")));
        }
        (Provenance::Fibered { discrete: d1, space: x }, Provenance::Fibered { discrete: d2, space: y }) if d1 == d2 => {
            let d = inst.discrete_base(d1, &at)?;
            let u = fibered_unitary(x, y, &d, tol).map_err(verify(&at))?;
            out.reports.push(titled(u.report, format!("fibered product unitary for {h} ⊗ {k}")));
        }
        _ => {}
    }
    if dump {
        out.bases.insert("ket1".into(), rtp.ket1_basis().to_vec());
        out.bases.insert("ket2".into(), rtp.ket2_basis().to_vec());
        out.bases.insert("generators".into(), vec![rtp.vectors()]);
    }
    Ok(out)
}

pub fn fiber(inst: &Instance, a: &str, b: &str, tol: &Tol, dump: bool) -> Result<Output, CliError> {
    let at = format!("fiber {a} {b}");
    let (_, pa, _, _, alg_a) = inst.b_algebra_parts(a, tol)?;
    let (_, pb, _, _, alg_b) = inst.b_algebra_parts(b, tol)?;
    let aa = inst.b_algebra(a, tol)?;
    let bb = inst.b_algebra(b, tol)?;
    let fp = fiber_product(&aa, &bb, tol).map_err(verify(&at))?;
    let mut out = Output::default();
    out.dims.insert("fiber".into(), fp.dim());
    out.dims.insert("rtp".into(), fp.rtp().dim());
    out.reports.push(titled(fp.report.clone(), format!("fiber product {a} ∗ {b}")));
    if aa.algebra().is_nondegenerate() && bb.algebra().is_nondegenerate() {
        let s = sauvageot_crosscheck(&aa, &bb, &fp, tol).map_err(verify(&at))?;
        out.reports.push(titled(s, format!("commutant description of {a} ∗ {b}")));
    } else {
        let mut r = Report::new(format!("commutant description of {a} ∗ {b}"));
        r.info("equal", "A ∗ B = (A' ⊗ Id)' ∩ (Id ⊗ B')'", "skipped: degenerate algebra");
        out.reports.push(r);
    }
    let props = check_fiber_properties(&aa, &bb, &fp, tol).map_err(verify(&at))?;
    out.reports.push(titled(props, format!("properties of {a} ∗ {b}")));
    for (name, x) in [(a, &aa), (b, &bb)] {
        let u = unitality_check(x, tol).map_err(verify(&at))?;
        out.reports.push(titled(u, format!("unitality of {name}")));
    }
    if let (
        Provenance::Fibered { discrete: d1, space: x },
        Provenance::Fibered { discrete: d2, space: y },
        Some(AlgebraSpec::Functions(fa)),
        Some(AlgebraSpec::Functions(fb)),
    ) = (&pa, &pb, inst.algebras.get(&alg_a), inst.algebras.get(&alg_b))
    {
        let from_a = matches!(inst.modules.get(&inst.b_algebras[a].module), Some(ModuleSpec::Fibered { fibered, .. }) if fibered == fa);
        let from_b = matches!(inst.modules.get(&inst.b_algebras[b].module), Some(ModuleSpec::Fibered { fibered, .. }) if fibered == fb);
        if d1 == d2 && from_a && from_b {
            let d = inst.discrete_base(d1, &at)?;
            let c = fp_commutative_check(x, y, &d, tol).map_err(verify(&at))?;
            out.dims.insert("fibered_points".into(), c.unitary.pairs.len());
            out.reports.push(titled(c.report, format!("function algebra picture of {a} ∗ {b}")));
        }
    }
    if dump {
        out.bases.insert("fiber".into(), fp.algebra.basis().to_vec());
    }
    Ok(out)
}

pub fn ind_cmd(inst: &Instance, i: &str, a: &str, tol: &Tol, dump: bool) -> Result<Output, CliError> {
    let at = format!("ind {i} {a}");
    let space = inst.space(i, tol)?;
    let alg = inst.algebra(a, tol)?;
    if alg.n() != space.dom_dim() {
        return Err(CliError::Input(format!(
            "{at}: algebra '{a}' acts on dimension {}, space '{i}' has domain dimension {}",
            alg.n(),
            space.dom_dim()
        )));
    }
    let res = ind(&space, &alg, tol).map_err(verify(&at))?;
    let spanned = ind_span(&space, &alg, tol).map_err(verify(&at))?;
    let mut r = Report::new(format!("induced algebra Ind_{i}({a})"));
    r.residual("span", "Ind_I(A) = [I A I*]", res.algebra.space().equality_residual(&spanned), tol.residual_abs)
        .dim("ind", res.algebra.dim())
        .dim("span", spanned.dim());
    r.info(
        "nondegenerate",
        "Ind_I(A) is nondegenerate",
        if res.algebra.is_nondegenerate() { "yes" } else { "no" },
    );
    let mut out = Output::default();
    out.dims.insert("ind".into(), res.algebra.dim());
    out.dims.insert("space".into(), space.dim());
    out.reports.push(r);
    if dump {
        out.bases.insert("ind".into(), res.algebra.basis().to_vec());
    }
    Ok(out)
}

pub fn commutant(inst: &Instance, set: &str, tol: &Tol) -> Result<Output, CliError> {
    let (n, gens) = inst.set(set)?;
    let basis = kernel::commutant(&gens, n, tol).map_err(verify(set))?;
    let mut r = Report::new(format!("commutant of {set}"));
    let worst = basis
        .iter()
        .flat_map(|c| gens.iter().map(move |g| max_abs(&(c * g - g * c))))
        .fold(0.0, f64::max);
    r.residual("commutes", "every basis element commutes with the set", worst, tol.residual_abs)
        .dim("dim", basis.len());
    let span = OperatorSpace::span(n, n, &gens, tol).map_err(verify(set))?;
    if span.equality_residual(&span.adjoint()) <= tol.residual_abs {
        let generated = ConcreteAlgebra::generated(n, &gens, true, tol).map_err(verify(set))?;
        let c = ConcreteAlgebra::from_space(OperatorSpace::from_orthonormal(n, n, basis.clone()), tol)
            .map_err(verify(set))?;
        let cc = c.commutant(tol);
        r.residual(
            "bicommutant",
            "S'' is the unital *-algebra generated by S",
            cc.space().equality_residual(generated.space()),
            tol.residual_abs,
        );
    } else {
        r.info("bicommutant", "S'' is the unital *-algebra generated by S", "skipped: S is not *-closed");
    }
    let mut out = Output::default();
    out.dims.insert("commutant".into(), basis.len());
    out.reports.push(r);
    out.bases.insert("commutant".into(), basis);
    Ok(out)
}

pub fn gns(inst: &Instance, state: &str, tol: &Tol) -> Result<Output, CliError> {
    let (base, data) = inst.state(state, tol)?;
    let mut out = Output::default();
    out.dims.insert("algebra".into(), data.algebra_dim());
    out.dims.insert("gns".into(), data.gns_dim());
    out.dims.insert("b".into(), base.b().dim());
    out.dims.insert("b_dag".into(), base.b_dag().dim());
    out.reports.push(titled(base.check(tol), format!("gns base of {state}")));
    out.reports.push(titled(data.check(tol), format!("gns data of {state}")));
    out.bases.insert("b".into(), base.b().basis().to_vec());
    out.bases.insert("b_dag".into(), base.b_dag().basis().to_vec());
    out.bases.insert("j".into(), vec![data.j_matrix().clone()]);
    Ok(out)
}

pub fn suite(inst: &Instance, tol: &Tol, dump: bool) -> Result<Output, CliError> {
    let mut out = check(inst, tol)?;
    let s = &inst.suite;
    for [h, k] in &s.rtp {
        out.absorb(&format!("rtp {h} {k}"), rtp(inst, h, k, tol, dump))?;
    }
    for [a, b] in &s.fiber {
        out.absorb(&format!("fiber {a} {b}"), fiber(inst, a, b, tol, dump))?;
    }
    for [i, a] in &s.ind {
        out.absorb(&format!("ind {i} {a}"), ind_cmd(inst, i, a, tol, dump))?;
    }
    for set in &s.commutant {
        out.absorb(&format!("commutant {set}"), commutant(inst, set, tol))?;
    }
    for state in &s.gns {
        out.absorb(&format!("gns {state}"), gns(inst, state, tol))?;
    }
    if !dump {
        out.bases.clear();
    }
    Ok(out)
}
