//! Instance files: named matrices and the objects built from them.

use std::collections::BTreeMap;
use std::sync::Arc;

use cstar_fiber::base::{diagonal_base, gns_base, CStarBase, GnsData};
use cstar_fiber::commutative::{Bundle, DiscreteBase, FiberedSpace};
use cstar_fiber::fiber::BimoduleAlgebra;
use cstar_fiber::module::CStarModule;
use cstar_fiber::opspace::{ConcreteAlgebra, OperatorSpace};
use cstar_fiber::{Mat, Tol, C};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const VERSION: &str = "cstar-fiber/1";

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<ToleranceSpec>,
    #[serde(default)]
    pub matrices: BTreeMap<String, MatrixSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub discrete: BTreeMap<String, DiscreteSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bundles: BTreeMap<String, BundleSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fibered: BTreeMap<String, FiberedSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bases: BTreeMap<String, BaseSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub modules: BTreeMap<String, ModuleSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub algebras: BTreeMap<String, AlgebraSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub b_algebras: BTreeMap<String, BAlgebraSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub spaces: BTreeMap<String, SpaceSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sets: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub states: BTreeMap<String, StateSpec>,
    #[serde(default, skip_serializing_if = "SuiteSpec::is_empty")]
    pub suite: SuiteSpec,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub rank: Option<f64>,
    pub residual: Option<f64>,
}

/// Row-major `[re, im]` entries.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixSpec {
    pub fn from_matrix(m: &Mat) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push([m[(r, c)].re, m[(r, c)].im]);
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteSpec {
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSpec {
    pub discrete: String,
    pub fiber_dims: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FiberedSpec {
    pub discrete: String,
    pub projection: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseSpec {
    Trivial,
    Diagonal(usize),
    Gns(StateSpec),
    Generated { k: usize, b: Vec<String>, b_dag: Vec<String> },
    Opposite(String),
    Discrete(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Base,
    Opposite,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModuleSpec {
    Span { base: String, alpha: Vec<String> },
    Bundle { bundle: String, side: Side },
    Fibered { fibered: String, side: Side },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgebraSpec {
    Generated { n: usize, generators: Vec<String>, unital: bool },
    Full(usize),
    Diagonal(usize),
    Scalars(usize),
    Zero(usize),
    Functions(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LegSpec {
    Right,
    Left,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BAlgebraSpec {
    pub module: String,
    pub leg: LegSpec,
    pub algebra: String,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub rows: usize,
    pub cols: usize,
    pub generators: Vec<String>,
}

/// A faithful state on `⊕ M_{n_i}` with diagonal density.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub blocks: Vec<usize>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rtp: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fiber: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ind: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub commutant: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gns: Vec<String>,
}

impl SuiteSpec {
    pub fn is_empty(&self) -> bool {
        self.rtp.is_empty() && self.fiber.is_empty() && self.ind.is_empty() && self.commutant.is_empty() && self.gns.is_empty()
    }
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn lookup<'a, V>(map: &'a BTreeMap<String, V>, section: &str, name: &str) -> Result<&'a V, CliError> {
    map.get(name).ok_or_else(|| input(format!("{section}: unknown name '{name}'")))
}

/// Where a module came from, for commands that use the finer structure.
#[derive(Debug, Clone)]
pub enum Provenance {
    Span,
    Bundle { discrete: String, bundle: Bundle },
    Fibered { discrete: String, space: FiberedSpace<f64> },
}

impl Instance {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let inst: Instance = serde_json::from_str(text).map_err(|e| input(format!("parse error: {e}")))?;
        if inst.version != VERSION {
            return Err(input(format!("version: expected '{VERSION}', found '{}'", inst.version)));
        }
        for (name, m) in &inst.matrices {
            if m.data.len() != m.rows * m.cols {
                return Err(input(format!(
                    "matrices.{name}: {} entries for a {}x{} matrix",
                    m.data.len(),
                    m.rows,
                    m.cols
                )));
            }
            if m.data.iter().flatten().any(|x| !x.is_finite()) {
                return Err(input(format!("matrices.{name}: non-finite entry")));
            }
        }
        Ok(inst)
    }

    pub fn matrix(&self, name: &str, at: &str) -> Result<Mat, CliError> {
        let m = lookup(&self.matrices, &format!("{at} -> matrices"), name)?;
        Ok(Mat::from_row_iterator(m.rows, m.cols, m.data.iter().map(|[re, im]| C::new(*re, *im))))
    }

    fn matrices_of(&self, names: &[String], at: &str, shape: Option<(usize, usize)>) -> Result<Vec<Mat>, CliError> {
        names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let m = self.matrix(n, &format!("{at}[{i}]"))?;
                match shape {
                    Some(s) if m.shape() != s => Err(input(format!(
                        "{at}[{i}]: matrix '{n}' is {}x{}, expected {}x{}",
                        m.nrows(),
                        m.ncols(),
                        s.0,
                        s.1
                    ))),
                    _ => Ok(m),
                }
            })
            .collect()
    }

    pub fn discrete_base(&self, name: &str, at: &str) -> Result<DiscreteBase<f64>, CliError> {
        let d = lookup(&self.discrete, &format!("{at} -> discrete"), name)?;
        DiscreteBase::new(d.weights.clone()).map_err(|e| input(format!("discrete.{name}: {e}")))
    }

    pub fn bundle(&self, name: &str, at: &str) -> Result<(String, Bundle), CliError> {
        let b = lookup(&self.bundles, &format!("{at} -> bundles"), name)?;
        let d = self.discrete_base(&b.discrete, &format!("bundles.{name}"))?;
        if b.fiber_dims.len() != d.points() {
            return Err(input(format!(
                "bundles.{name}: {} fiber dimensions over {} points",
                b.fiber_dims.len(),
                d.points()
            )));
        }
        Ok((b.discrete.clone(), Bundle::new(b.fiber_dims.clone())))
    }

    pub fn fibered(&self, name: &str, at: &str) -> Result<(String, FiberedSpace<f64>), CliError> {
        let f = lookup(&self.fibered, &format!("{at} -> fibered"), name)?;
        let d = self.discrete_base(&f.discrete, &format!("fibered.{name}"))?;
        let weights = f.weights.clone().unwrap_or_else(|| vec![1.0; f.projection.len()]);
        let space = FiberedSpace::new(f.projection.clone(), weights, d.points())
            .map_err(|e| input(format!("fibered.{name}: {e}")))?;
        Ok((f.discrete.clone(), space))
    }

    pub fn base(&self, name: &str, tol: &Tol) -> Result<Arc<CStarBase<f64>>, CliError> {
        self.base_at(name, "bases", tol, 0)
    }

    fn base_at(&self, name: &str, at: &str, tol: &Tol, depth: usize) -> Result<Arc<CStarBase<f64>>, CliError> {
        if depth > self.bases.len() {
            return Err(input(format!("bases.{name}: cyclic 'opposite' references")));
        }
        let spec = lookup(&self.bases, at, name)?;
        let here = format!("bases.{name}");
        let located = |e: cstar_fiber::Error| input(format!("{here}: {e}"));
        let base = match spec {
            BaseSpec::Trivial => CStarBase::trivial(),
            BaseSpec::Diagonal(n) if *n == 0 => return Err(input(format!("{here}: dimension 0"))),
            BaseSpec::Diagonal(n) => diagonal_base(*n),
            BaseSpec::Gns(s) => self.gns(s, &here, tol)?.0,
            BaseSpec::Generated { k, b, b_dag } => {
                let bs = self.matrices_of(b, &format!("{here}.b"), Some((*k, *k)))?;
                let ds = self.matrices_of(b_dag, &format!("{here}.b_dag"), Some((*k, *k)))?;
                CStarBase::generated(*k, &bs, &ds, tol).map_err(located)?
            }
            BaseSpec::Opposite(of) => self.base_at(of, &here, tol, depth + 1)?.opposite(),
            BaseSpec::Discrete(d) => {
                return Ok(self.discrete_base(d, &here)?.base().clone());
            }
        };
        Ok(Arc::new(base))
    }

    pub fn gns(&self, s: &StateSpec, at: &str, tol: &Tol) -> Result<(CStarBase<f64>, GnsData<f64>), CliError> {
        gns_base(&s.blocks, &s.weights, tol).map_err(|e| input(format!("{at}: {e}")))
    }

    pub fn state(&self, name: &str, tol: &Tol) -> Result<(CStarBase<f64>, GnsData<f64>), CliError> {
        let s = lookup(&self.states, "states", name)?;
        self.gns(s, &format!("states.{name}"), tol)
    }

    /// Modules are built without axiom checks; commands verify them.
    pub fn module(&self, name: &str, tol: &Tol) -> Result<(CStarModule<f64>, Provenance), CliError> {
        let spec = lookup(&self.modules, "modules", name)?;
        let here = format!("modules.{name}");
        match spec {
            ModuleSpec::Span { base, alpha } => {
                let b = self.base_at(base, &here, tol, 0)?;
                let gens = self.matrices_of(alpha, &format!("{here}.alpha"), None)?;
                let (h, k) = gens.first().map(|g| g.shape()).unwrap_or((0, b.k_dim()));
                if let Some(i) = gens.iter().position(|g| g.shape() != (h, b.k_dim())) {
                    return Err(input(format!(
                        "{here}.alpha[{i}]: expected {h}x{} operators from the base space",
                        b.k_dim()
                    )));
                }
                if gens.is_empty() || h == 0 || k == 0 {
                    return Err(input(format!("{here}.alpha: empty generator list")));
                }
                let alpha = OperatorSpace::span(h, k, &gens, tol).map_err(|e| input(format!("{here}: {e}")))?;
                Ok((CStarModule::new_unchecked(b, alpha), Provenance::Span))
            }
            ModuleSpec::Bundle { bundle, side } => {
                let (dname, bdl) = self.bundle(bundle, &here)?;
                let d = self.discrete_base(&dname, &here)?;
                let m = match side {
                    Side::Base => cstar_fiber::commutative::bundle_module(&d, &bdl, tol),
                    Side::Opposite => cstar_fiber::commutative::bundle_module_dag(&d, &bdl, tol),
                }
                .map_err(|e| input(format!("{here}: {e}")))?;
                Ok((m, Provenance::Bundle { discrete: dname, bundle: bdl }))
            }
            ModuleSpec::Fibered { fibered, side } => {
                let (dname, fs) = self.fibered(fibered, &here)?;
                let d = self.discrete_base(&dname, &here)?;
                let m = match side {
                    Side::Base => fs.module(&d, tol),
                    Side::Opposite => fs.module_dag(&d, tol),
                }
                .map_err(|e| input(format!("{here}: {e}")))?;
                Ok((m, Provenance::Fibered { discrete: dname, space: fs }))
            }
        }
    }

    pub fn algebra(&self, name: &str, tol: &Tol) -> Result<ConcreteAlgebra<f64>, CliError> {
        let spec = lookup(&self.algebras, "algebras", name)?;
        let here = format!("algebras.{name}");
        let nonzero = |n: usize| if n == 0 { Err(input(format!("{here}: dimension 0"))) } else { Ok(n) };
        Ok(match spec {
            AlgebraSpec::Generated { n, generators, unital } => {
                let n = nonzero(*n)?;
                let gens = self.matrices_of(generators, &format!("{here}.generators"), Some((n, n)))?;
                ConcreteAlgebra::generated(n, &gens, *unital, tol).map_err(|e| input(format!("{here}: {e}")))?
            }
            AlgebraSpec::Full(n) => ConcreteAlgebra::full(nonzero(*n)?),
            AlgebraSpec::Diagonal(n) => ConcreteAlgebra::diagonal(nonzero(*n)?),
            AlgebraSpec::Scalars(n) => ConcreteAlgebra::scalars(nonzero(*n)?),
            AlgebraSpec::Zero(n) => ConcreteAlgebra::zero(nonzero(*n)?),
            AlgebraSpec::Functions(f) => self.fibered(f, &here)?.1.functions(),
        })
    }

    /// The pieces of a named algebra over a module leg, before the axiom check.
    pub fn b_algebra_parts(
        &self,
        name: &str,
        tol: &Tol,
    ) -> Result<(CStarModule<f64>, Provenance, LegSpec, ConcreteAlgebra<f64>, String), CliError> {
        let spec = lookup(&self.b_algebras, "b_algebras", name)?;
        let (m, prov) = self.module(&spec.module, tol)?;
        let a = self.algebra(&spec.algebra, tol)?;
        if a.n() != m.h_dim() {
            return Err(input(format!(
                "b_algebras.{name}: algebra '{}' acts on dimension {}, module '{}' on {}",
                spec.algebra,
                a.n(),
                spec.module,
                m.h_dim()
            )));
        }
        Ok((m, prov, spec.leg, a, spec.algebra.clone()))
    }

    pub fn b_algebra(&self, name: &str, tol: &Tol) -> Result<BimoduleAlgebra<f64>, CliError> {
        let (m, _, leg, a, _) = self.b_algebra_parts(name, tol)?;
        let built = match leg {
            LegSpec::Right => BimoduleAlgebra::over_right(&m, a, tol),
            LegSpec::Left => BimoduleAlgebra::over_left(&m, a, tol),
        };
        built.map_err(|e| CliError::Verify(format!("b_algebras.{name}: {e}")))
    }

    pub fn space(&self, name: &str, tol: &Tol) -> Result<OperatorSpace<f64>, CliError> {
        let s = lookup(&self.spaces, "spaces", name)?;
        let here = format!("spaces.{name}");
        let gens = self.matrices_of(&s.generators, &format!("{here}.generators"), Some((s.rows, s.cols)))?;
        OperatorSpace::span(s.rows, s.cols, &gens, tol).map_err(|e| input(format!("{here}: {e}")))
    }

    pub fn set(&self, name: &str) -> Result<(usize, Vec<Mat>), CliError> {
        let names = lookup(&self.sets, "sets", name)?;
        let here = format!("sets.{name}");
        let first = names.first().ok_or_else(|| input(format!("{here}: empty set")))?;
        let m = self.matrix(first, &format!("{here}[0]"))?;
        if m.nrows() != m.ncols() {
            return Err(input(format!("{here}[0]: matrix '{first}' is not square")));
        }
        let n = m.nrows();
        Ok((n, self.matrices_of(names, &here, Some((n, n)))?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(body: &str) -> Result<Instance, CliError> {
        Instance::parse(&format!("{{\"version\": \"{VERSION}\", {body}}}"))
    }

    #[test]
    fn matrices_are_row_major() {
        let i = inst(r#""matrices": {"m": {"rows": 1, "cols": 2, "data": [[1, 0], [0, 2]]}}"#).unwrap();
        let m = i.matrix("m", "here").unwrap();
        assert_eq!(m[(0, 1)], C::new(0.0, 2.0));
    }

    #[test]
    fn errors_are_located() {
        let i = inst(r#""matrices": {}, "algebras": {"A": {"generated": {"n": 2, "generators": ["x"], "unital": true}}}"#)
            .unwrap();
        let e = i.algebra("A", &Tol::default()).unwrap_err();
        assert_eq!(e.to_string(), "algebras.A.generators[0] -> matrices: unknown name 'x'");
        let e = inst(r#""matrices": {"m": {"rows": 2, "cols": 2, "data": [[1, 0]]}}"#).unwrap_err();
        assert!(e.to_string().starts_with("matrices.m: 1 entries"));
        assert!(Instance::parse(r#"{"version": "other"}"#).is_err());
        assert!(inst(r#""extra": 1"#).is_err());
    }

    #[test]
    fn opposite_cycles_are_rejected() {
        let i = inst(r#""bases": {"a": {"opposite": "b"}, "b": {"opposite": "a"}}"#).unwrap();
        assert!(i.base("a", &Tol::default()).is_err());
    }
}
