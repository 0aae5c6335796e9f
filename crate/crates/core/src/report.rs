//! Verification records with residuals.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::scalar::Real;

/// One verified statement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub statement: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub dims: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// An ordered list of checks; passes iff every check passes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), passed: true, checks: Vec::new() }
    }

    pub fn push(&mut self, check: Check) -> &mut Check {
        self.passed &= check.passed;
        self.checks.push(check);
        self.checks.last_mut().expect("just pushed")
    }

    /// Records a residual, passing iff it is at most `tolerance`.
    pub fn residual<T: Real>(&mut self, name: &str, statement: &str, residual: T, tolerance: T) -> &mut Check {
        let r = residual.as_f64();
        let t = tolerance.as_f64();
        self.push(Check {
            name: name.into(),
            statement: statement.into(),
            passed: r <= t,
            residual: r,
            tolerance: t,
            dims: BTreeMap::new(),
            note: None,
        })
    }

    /// Records an exact integer comparison; the residual is `|got − want|`.
    pub fn count(&mut self, name: &str, statement: &str, got: usize, want: usize) -> &mut Check {
        let r = got.abs_diff(want) as f64;
        self.push(Check {
            name: name.into(),
            statement: statement.into(),
            passed: r == 0.0,
            residual: r,
            tolerance: 0.0,
            dims: BTreeMap::new(),
            note: None,
        })
        .with_dims(&[("got", got), ("expected", want)])
    }

    /// Records a yes/no fact; the residual is 0 or 1.
    pub fn flag(&mut self, name: &str, statement: &str, ok: bool) -> &mut Check {
        self.push(Check {
            name: name.into(),
            statement: statement.into(),
            passed: ok,
            residual: if ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
            dims: BTreeMap::new(),
            note: None,
        })
    }

    /// Records an informational line that never fails.
    pub fn info(&mut self, name: &str, statement: &str, note: impl Into<String>) -> &mut Check {
        self.push(Check {
            name: name.into(),
            statement: statement.into(),
            passed: true,
            residual: 0.0,
            tolerance: 0.0,
            dims: BTreeMap::new(),
            note: Some(note.into()),
        })
    }

    /// Appends the checks of `other`, prefixing their names.
    pub fn merge(&mut self, prefix: &str, other: Report) {
        for mut c in other.checks {
            c.name = format!("{prefix}.{}", c.name);
            self.push(c);
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().fold(0.0, |a, c| a.max(c.residual))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "== {} [{}]", self.title, status(self.passed));
        for c in &self.checks {
            let _ = write!(
                s,
                "{:4} {:<44} residual={:.3e} tol={:.3e}",
                status(c.passed),
                c.name,
                c.residual,
                c.tolerance
            );
            for (k, v) in &c.dims {
                let _ = write!(s, " {k}={v}");
            }
            let _ = write!(s, "  | {}", c.statement);
            if let Some(n) = &c.note {
                let _ = write!(s, " ({n})");
            }
            s.push('\n');
        }
        s
    }
}

impl Check {
    fn with_dims(&mut self, dims: &[(&str, usize)]) -> &mut Self {
        for (k, v) in dims {
            self.dims.insert((*k).to_string(), *v);
        }
        self
    }

    pub fn dim(&mut self, key: &str, value: usize) -> &mut Self {
        self.dims.insert(key.to_string(), value);
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.note = Some(note.into());
        self
    }
}

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_iff_all_residuals_within_tolerance() {
        let mut r = Report::new("t");
        r.residual("a", "x = y", 1e-12, 1e-8);
        assert!(r.passed);
        r.count("b", "dims", 3, 3);
        assert!(r.passed);
        r.residual("c", "x = z", 1e-3, 1e-8);
        assert!(!r.passed);
        assert_eq!(r.failures().count(), 1);
        assert!(r.render().contains("FAIL c"));
    }

    #[test]
    fn merge_prefixes_names() {
        let mut inner = Report::new("inner");
        inner.flag("ok", "holds", true);
        let mut outer = Report::new("outer");
        outer.merge("sub", inner);
        assert_eq!(outer.checks[0].name, "sub.ok");
    }
}
