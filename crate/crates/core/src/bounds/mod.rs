//! Comparison quantities for the spectral gap and the audit that checks the
//! inequalities between them.

mod audit;
mod cheeger;
mod mixing;
mod paths;

pub use audit::{inequality_audit, inequality_audit_with, AuditConfig, DEFAULT_EPS};
pub use cheeger::{cheeger_exact, cheeger_search, CheegerResult, ENUMERATION_LIMIT};
pub use mixing::{mixing_time, worst_case_tv, MixingTime};
pub use paths::{path_bound, random_ensemble, PathBound, PathEnsemble};

use std::fmt::Write as _;

use serde::Serialize;

use crate::tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        }
    }
}

/// One audited inequality `lhs (<= | >=) rhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    /// `rhs - lhs` for `<=`, `lhs - rhs` for `>=`.
    pub margin: f64,
    pub applicable: bool,
    pub pass: bool,
    pub detail: String,
}

/// Pass/fail record of a set of inequalities evaluated on one chain.
/// Gated checks that did not apply stay in the list with
/// `applicable = false`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BoundAudit {
    pub checks: Vec<Check>,
}

impl BoundAudit {
    fn push(&mut self, name: &str, lhs: f64, rhs: f64, relation: Relation, detail: String) {
        let margin = match relation {
            Relation::AtMost => rhs - lhs,
            Relation::AtLeast => lhs - rhs,
        };
        self.checks.push(Check {
            name: name.to_string(),
            lhs,
            rhs,
            relation,
            margin,
            applicable: true,
            pass: margin >= -tol::AUDIT_MARGIN,
            detail,
        });
    }

    pub fn push_at_most(&mut self, name: &str, lhs: f64, rhs: f64, detail: String) {
        self.push(name, lhs, rhs, Relation::AtMost, detail);
    }

    pub fn push_at_least(&mut self, name: &str, lhs: f64, rhs: f64, detail: String) {
        self.push(name, lhs, rhs, Relation::AtLeast, detail);
    }

    pub fn push_skipped(&mut self, name: &str, reason: String) {
        self.checks.push(Check {
            name: name.to_string(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            relation: Relation::AtMost,
            margin: f64::NAN,
            applicable: false,
            pass: false,
            detail: reason,
        });
    }

    pub fn extend(&mut self, other: BoundAudit) {
        self.checks.extend(other.checks);
    }

    /// True when every applicable check passes.
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| !c.applicable || c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.applicable && !c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>14}  {:2}  {:>14}  {:>12}  {:6}  detail",
            "check", "lhs", "", "rhs", "margin", "status"
        );
        for c in &self.checks {
            let status = match (c.applicable, c.pass) {
                (false, _) => "skip",
                (true, true) => "pass",
                (true, false) => "FAIL",
            };
            if c.applicable {
                let _ = writeln!(
                    out,
                    "{:<width$}  {:>14.6e}  {:2}  {:>14.6e}  {:>12.3e}  {:6}  {}",
                    c.name,
                    c.lhs,
                    c.relation.symbol(),
                    c.rhs,
                    c.margin,
                    status,
                    c.detail
                );
            } else {
                let _ = writeln!(
                    out,
                    "{:<width$}  {:>14}  {:2}  {:>14}  {:>12}  {:6}  {}",
                    c.name, "-", "", "-", "-", status, c.detail
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_and_pass() {
        let mut a = BoundAudit::default();
        a.push_at_most("le", 1.0, 2.0, String::new());
        a.push_at_least("ge", 1.0, 1.0 + 5e-10, String::new());
        a.push_skipped("gated", "not lazy".into());
        assert_eq!(a.check("le").unwrap().margin, 1.0);
        assert!(a.check("ge").unwrap().pass);
        assert!(a.all_pass());
        a.push_at_least("bad", 0.0, 1.0, String::new());
        assert!(!a.all_pass());
        assert_eq!(a.failures().count(), 1);
        let table = a.to_table();
        assert!(table.contains("FAIL") && table.contains("skip"));
    }

    #[test]
    fn skipped_checks_serialize_with_null_values() {
        let mut a = BoundAudit::default();
        a.push_skipped("gated", "n/a".into());
        let v = serde_json::to_value(&a).unwrap();
        assert!(v["checks"][0]["lhs"].is_null());
        assert_eq!(v["checks"][0]["applicable"], false);
    }
}
