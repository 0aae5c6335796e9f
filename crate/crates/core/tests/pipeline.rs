use std::sync::Arc;

use cstar_fiber::base::{diagonal_base, gns_base, CStarBase};
use cstar_fiber::commutative::{bundle_module, bundle_module_dag, fp_commutative_check, Bundle, DiscreteBase, FiberedSpace};
use cstar_fiber::fiber::{fiber_product, sauvageot_crosscheck, BimoduleAlgebra};
use cstar_fiber::module::CStarModule;
use cstar_fiber::opspace::{ConcreteAlgebra, OperatorSpace};
use cstar_fiber::rtp::RelativeTensorProduct;
use cstar_fiber::Tol;
use proptest::prelude::*;

fn tol() -> Tol {
    Tol::default()
}

#[test]
fn trivial_base_fiber_product_is_tensor_product() {
    let t = Arc::new(CStarBase::trivial());
    let h = CStarModule::new(t.clone(), OperatorSpace::full(2, 1), &tol()).unwrap();
    let k = CStarModule::new(t, OperatorSpace::full(3, 1), &tol()).unwrap();
    let a = BimoduleAlgebra::over_right(&h, ConcreteAlgebra::diagonal(2), &tol()).unwrap();
    let b = BimoduleAlgebra::over_left(&k, ConcreteAlgebra::full(3), &tol()).unwrap();
    let fp = fiber_product(&a, &b, &tol()).unwrap();
    assert_eq!(fp.rtp().dim(), 6);
    assert_eq!(fp.dim(), 2 * 9);
    assert!(sauvageot_crosscheck(&a, &b, &fp, &tol()).unwrap().passed);
}

#[test]
fn diagonal_base_checks_and_unit_module() {
    let b = diagonal_base::<f64>(3);
    assert!(b.check(&tol()).passed);
    let u = CStarModule::unit(Arc::new(b));
    assert!(u.check(&tol()).passed);
}

#[test]
fn gns_base_of_a_full_rank_state() {
    let (b, gns) = gns_base::<f64>(&[1, 2], &[0.2, 0.3, 0.5], &tol()).unwrap();
    assert_eq!(b.k_dim(), 5);
    assert_eq!(b.b().dim(), 5);
    assert_eq!(b.b_dag().dim(), 5);
    assert!(b.check(&tol()).passed);
    assert!(gns.check(&tol()).passed);
}

#[test]
fn fibered_function_algebras_match_the_fibered_set() {
    let d = DiscreteBase::new(vec![0.5, 2.0]).unwrap();
    let x = FiberedSpace::new(vec![0, 1, 1], vec![1.0, 2.0, 0.5], 2).unwrap();
    let y = FiberedSpace::counting(vec![0, 0, 1], 2).unwrap();
    let c = fp_commutative_check(&x, &y, &d, &tol()).unwrap();
    assert!(c.report.passed, "{}", c.report.render());
    assert_eq!(c.unitary.pairs.len(), 2 + 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bundle_rtp_dimension_is_fiberwise(dims in proptest::collection::vec((1usize..=3, 1usize..=3), 1..=3)) {
        let d = DiscreteBase::<f64>::uniform(dims.len()).unwrap();
        let (hd, kd): (Vec<_>, Vec<_>) = dims.iter().copied().unzip();
        let h = bundle_module(&d, &Bundle::new(hd), &tol()).unwrap();
        let k = bundle_module_dag(&d, &Bundle::new(kd), &tol()).unwrap();
        let rtp = RelativeTensorProduct::new(h, k, &tol()).unwrap();
        prop_assert_eq!(rtp.dim(), dims.iter().map(|(a, b)| a * b).sum::<usize>());
    }
}
