//! Assurance-case tooling: goal structures, the evidence ledger and
//! compliance reporting against airworthiness criteria 14.3.3 and 15.2.3.

mod gsn;
mod ledger;
mod report;

pub use gsn::{
    parse_argument, serialize_argument, validate_argument, Argument, ArgumentNode, Finding,
    NodeKind, Severity,
};
pub use ledger::{
    build_ledger_template, check_ledger, check_ledger_against, ledger_to_json, load_ledger,
    parse_ledger, type_counts, EvidenceItem, EvidenceStatus, EvidenceType, COUNT_DISCREPANCY_NOTE,
};
pub use report::{
    evidence_report, render_report, ClaimGroup, ComplianceReport, ComplianceSchema, Criterion,
    CriterionMapping, CriterionStatus, GroupStatus, MissingItem, SupportStatus, TypeCount,
    STRENGTH_NOTE,
};

use std::path::Path;

use crate::error::{Error, Result};

/// Source of the shipped functional-safety argument.
pub const TEMPLATE_GSN: &str = include_str!("../../templates/functional_safety.gsn");

pub fn template_argument() -> Argument {
    parse_argument(TEMPLATE_GSN).expect("shipped template parses")
}

pub fn load_argument(path: &Path) -> Result<Argument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_argument(&text)
}
