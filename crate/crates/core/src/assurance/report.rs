use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::gsn::{Argument, NodeKind};
use super::ledger::{check_ledger_against, EvidenceItem, EvidenceStatus, EvidenceType};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: String,
    pub title: String,
}

/// Top-level goals grouped by the property set they establish.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimGroup {
    pub name: String,
    pub description: String,
    pub goals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionMapping {
    pub criterion: String,
    pub goals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceSchema {
    pub criteria: Vec<Criterion>,
    pub claim_groups: Vec<ClaimGroup>,
    pub criterion_map: Vec<CriterionMapping>,
}

impl Default for ComplianceSchema {
    fn default() -> Self {
        let s = |v: &str| v.to_string();
        ComplianceSchema {
            criteria: vec![
                Criterion {
                    id: s("14.3.3"),
                    title: s("Evaluation of software for elimination of hazardous events"),
                },
                Criterion {
                    id: s("15.2.3"),
                    title: s("Integration Methodology"),
                },
            ],
            claim_groups: vec![
                ClaimGroup {
                    name: s("C_v'"),
                    description: s("controller properties"),
                    goals: vec![s("G_FILTER"), s("G_FAULT")],
                },
                ClaimGroup {
                    name: s("R_v"),
                    description: s("RTA properties"),
                    goals: vec![s("G_OUTPUT")],
                },
                ClaimGroup {
                    name: s("V_v'"),
                    description: s("vehicle properties"),
                    goals: vec![s("G_DIRECT")],
                },
            ],
            criterion_map: vec![
                CriterionMapping {
                    criterion: s("14.3.3"),
                    goals: vec![s("G_FILTER"), s("G_OUTPUT")],
                },
                CriterionMapping {
                    criterion: s("15.2.3"),
                    goals: vec![s("G_FS")],
                },
            ],
        }
    }
}

impl ComplianceSchema {
    pub fn goals_for(&self, criterion: &str) -> &[String] {
        self.criterion_map
            .iter()
            .find(|m| m.criterion == criterion)
            .map_or(&[], |m| m.goals.as_slice())
    }

    /// Every criterion maps to at least one goal and every referenced goal exists.
    pub fn check(&self, arg: &Argument) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let known: HashSet<&str> = self.criteria.iter().map(|c| c.id.as_str()).collect();
        for m in &self.criterion_map {
            if !known.contains(m.criterion.as_str()) {
                return bad(format!(
                    "criterion map names unknown criterion {}",
                    m.criterion
                ));
            }
        }
        for c in &self.criteria {
            if self.goals_for(&c.id).is_empty() {
                return bad(format!("criterion {} maps to no goal", c.id));
            }
        }
        let goals = self
            .criterion_map
            .iter()
            .flat_map(|m| &m.goals)
            .chain(self.claim_groups.iter().flat_map(|g| &g.goals));
        for g in goals {
            match arg.node(g) {
                Some(n) if n.kind == NodeKind::Goal => {}
                _ => return bad(format!("schema goal {g} is not a goal of the argument")),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportStatus {
    Unsupported,
    PartiallySupported,
    Supported,
}

impl SupportStatus {
    pub fn label(self) -> &'static str {
        match self {
            SupportStatus::Unsupported => "UNSUPPORTED",
            SupportStatus::PartiallySupported => "PARTIALLY SUPPORTED",
            SupportStatus::Supported => "SUPPORTED (to argument strength)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionStatus {
    pub id: String,
    pub title: String,
    pub goals: Vec<String>,
    pub status: SupportStatus,
    pub satisfied_items: usize,
    pub total_items: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStatus {
    pub name: String,
    pub description: String,
    pub goals: Vec<String>,
    pub status: SupportStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeCount {
    pub etype: EvidenceType,
    pub provided: usize,
    pub waived: usize,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingItem {
    pub id: String,
    pub etype: EvidenceType,
    pub solution_id: String,
    /// `G_FS > ... > Sn_X`, or the bare solution id when it is unreachable.
    pub claim_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub root: String,
    pub criteria: Vec<CriterionStatus>,
    pub claim_groups: Vec<GroupStatus>,
    pub type_counts: Vec<TypeCount>,
    pub total_items: usize,
    pub missing: Vec<MissingItem>,
    pub note: String,
}

pub const STRENGTH_NOTE: &str = "Support is bounded by the strength of the argument: a supported criterion means \
every ledger item beneath its goals is provided or waived. Whether that evidence is satisfactory is a human review \
outside this tool.";

/// Support of the evidence beneath `goals`. A solution without ledger items
/// blocks full support.
fn support(
    arg: &Argument,
    ledger: &[EvidenceItem],
    goals: &[String],
) -> (SupportStatus, usize, usize) {
    let mut solutions: Vec<String> = Vec::new();
    for g in goals {
        for d in arg.descendants(g) {
            if arg.node(&d).is_some_and(|n| n.kind == NodeKind::Solution) && !solutions.contains(&d)
            {
                solutions.push(d);
            }
        }
    }
    let items: Vec<&EvidenceItem> = ledger
        .iter()
        .filter(|i| solutions.contains(&i.solution_id))
        .collect();
    let satisfied = items.iter().filter(|i| i.status.is_satisfied()).count();
    let bare = solutions
        .iter()
        .any(|s| !items.iter().any(|i| &i.solution_id == s));
    let status = if satisfied == 0 {
        SupportStatus::Unsupported
    } else if satisfied == items.len() && !bare {
        SupportStatus::Supported
    } else {
        SupportStatus::PartiallySupported
    };
    (status, satisfied, items.len())
}

pub fn evidence_report(
    arg: &Argument,
    schema: &ComplianceSchema,
    ledger: &[EvidenceItem],
) -> Result<ComplianceReport> {
    check_ledger_against(ledger, arg)?;
    schema.check(arg)?;

    let criteria = schema
        .criteria
        .iter()
        .map(|c| {
            let goals = schema.goals_for(&c.id).to_vec();
            let (status, satisfied_items, total_items) = support(arg, ledger, &goals);
            CriterionStatus {
                id: c.id.clone(),
                title: c.title.clone(),
                goals,
                status,
                satisfied_items,
                total_items,
            }
        })
        .collect();
    let claim_groups = schema
        .claim_groups
        .iter()
        .map(|g| GroupStatus {
            name: g.name.clone(),
            description: g.description.clone(),
            goals: g.goals.clone(),
            status: support(arg, ledger, &g.goals).0,
        })
        .collect();
    let type_counts = EvidenceType::ALL
        .iter()
        .map(|&t| {
            let of = |s: EvidenceStatus| {
                ledger
                    .iter()
                    .filter(|i| i.etype == t && i.status == s)
                    .count()
            };
            TypeCount {
                etype: t,
                provided: of(EvidenceStatus::Provided),
                waived: of(EvidenceStatus::Waived),
                missing: of(EvidenceStatus::Missing),
            }
        })
        .collect();
    let missing = ledger
        .iter()
        .filter(|i| i.status == EvidenceStatus::Missing)
        .map(|i| MissingItem {
            id: i.id.clone(),
            etype: i.etype,
            solution_id: i.solution_id.clone(),
            claim_path: arg
                .path_to(&i.solution_id)
                .map_or_else(|| i.solution_id.clone(), |p| p.join(" > ")),
        })
        .collect();
    Ok(ComplianceReport {
        root: arg.root.clone(),
        criteria,
        claim_groups,
        type_counts,
        total_items: ledger.len(),
        missing,
        note: STRENGTH_NOTE.to_string(),
    })
}

/// Markdown rendering; the same report always renders to the same bytes.
pub fn render_report(report: &ComplianceReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Compliance report\n");
    let _ = writeln!(s, "Root claim: {}\n", report.root);
    let _ = writeln!(s, "> {}\n", report.note);

    let _ = writeln!(s, "## Criteria\n");
    for c in &report.criteria {
        let _ = writeln!(s, "{}: {}\n", c.id, c.status.label());
        let _ = writeln!(
            s,
            "- {}; goals {}; {}/{} items provided or waived\n",
            c.title,
            c.goals.join(", "),
            c.satisfied_items,
            c.total_items
        );
    }

    let _ = writeln!(s, "## Claim groups\n");
    let _ = writeln!(s, "| Group | Properties | Goals | Status |");
    let _ = writeln!(s, "|---|---|---|---|");
    for g in &report.claim_groups {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} |",
            g.name,
            g.description,
            g.goals.join(", "),
            g.status.label()
        );
    }

    let _ = writeln!(s, "\n## Evidence by type\n");
    let _ = writeln!(s, "| Type | Provided | Waived | Missing | Total |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for t in &report.type_counts {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} |",
            t.etype.as_str(),
            t.provided,
            t.waived,
            t.missing,
            t.provided + t.waived + t.missing
        );
    }
    let (p, w, m) = report.type_counts.iter().fold((0, 0, 0), |(p, w, m), t| {
        (p + t.provided, w + t.waived, m + t.missing)
    });
    let _ = writeln!(s, "| total | {p} | {w} | {m} | {} |", report.total_items);

    let _ = writeln!(s, "\n## Missing evidence ({})\n", report.missing.len());
    for m in &report.missing {
        let _ = writeln!(s, "- {} [{}]: {}", m.id, m.etype.as_str(), m.claim_path);
    }
    s
}
