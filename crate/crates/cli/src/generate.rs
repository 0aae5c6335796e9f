//! Random instances for corpus building.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::instance::{
    AlgebraSpec, BAlgebraSpec, BaseSpec, BundleSpec, DiscreteSpec, FiberedSpec, Instance, LegSpec, MatrixSpec,
    ModuleSpec, Side, SuiteSpec, VERSION,
};

fn round(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn random_columns(rng: &mut ChaCha8Rng, n: usize) -> Vec<MatrixSpec> {
    loop {
        let data: Vec<[f64; 2]> =
            (0..n * n).map(|_| [round(rng.gen_range(-1.0..1.0)), round(rng.gen_range(-1.0..1.0))]).collect();
        let m = cstar_fiber::Mat::from_row_iterator(n, n, data.iter().map(|[re, im]| cstar_fiber::C::new(*re, *im)));
        let s = m.clone().svd(false, false).singular_values;
        if s.min() > 1e-2 * s.max().max(1.0) {
            return (0..n)
                .map(|c| MatrixSpec { rows: n, cols: 1, data: (0..n).map(|r| data[r * n + c]).collect() })
                .collect();
        }
    }
}

/// A trivial-base module pair, a random bundle pair and a random fibered pair.
pub fn generate(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrices = BTreeMap::new();
    let mut modules = BTreeMap::new();
    let mut bases = BTreeMap::new();
    bases.insert("unit".to_string(), BaseSpec::Trivial);
    for name in ["H", "K"] {
        let n = rng.gen_range(1..=4);
        let cols = random_columns(&mut rng, n);
        let mut alpha = Vec::new();
        for (i, c) in cols.into_iter().enumerate() {
            let key = format!("{name}{i}");
            matrices.insert(key.clone(), c);
            alpha.push(key);
        }
        modules.insert(name.to_string(), ModuleSpec::Span { base: "unit".into(), alpha });
    }

    let zs = rng.gen_range(1..=4);
    let weights: Vec<f64> = (0..zs).map(|_| round(rng.gen_range(0.2..3.0))).collect();
    let mut discrete = BTreeMap::new();
    discrete.insert("Z".to_string(), DiscreteSpec { weights });
    let mut bundles = BTreeMap::new();
    for (name, side) in [("E", Side::Base), ("F", Side::Opposite)] {
        let fiber_dims = (0..zs).map(|_| rng.gen_range(1..=3)).collect();
        bundles.insert(name.to_string(), BundleSpec { discrete: "Z".into(), fiber_dims });
        modules.insert(format!("{name}_mod"), ModuleSpec::Bundle { bundle: name.into(), side });
    }

    let mut fibered = BTreeMap::new();
    let mut algebras = BTreeMap::new();
    let mut b_algebras = BTreeMap::new();
    for (name, side, leg) in [("X", Side::Base, LegSpec::Right), ("Y", Side::Opposite, LegSpec::Left)] {
        let mut projection: Vec<usize> = (0..zs).collect();
        for _ in 0..rng.gen_range(0..=zs) {
            projection.push(rng.gen_range(0..zs));
        }
        projection.sort_unstable();
        let weights = projection.iter().map(|_| round(rng.gen_range(0.2..3.0))).collect();
        fibered.insert(name.to_string(), FiberedSpec { discrete: "Z".into(), projection, weights: Some(weights) });
        modules.insert(format!("L2{name}"), ModuleSpec::Fibered { fibered: name.into(), side });
        algebras.insert(format!("C{name}"), AlgebraSpec::Functions(name.into()));
        b_algebras.insert(
            format!("C{name}_alg"),
            BAlgebraSpec { module: format!("L2{name}"), leg, algebra: format!("C{name}") },
        );
    }

    Instance {
        version: VERSION.into(),
        tolerance: None,
        matrices,
        discrete,
        bundles,
        fibered,
        bases,
        modules,
        algebras,
        b_algebras,
        spaces: BTreeMap::new(),
        sets: BTreeMap::new(),
        states: BTreeMap::new(),
        suite: SuiteSpec {
            rtp: vec![["H".into(), "K".into()], ["E_mod".into(), "F_mod".into()], ["L2X".into(), "L2Y".into()]],
            fiber: vec![["CX_alg".into(), "CY_alg".into()]],
            ..SuiteSpec::default()
        },
    }
}
