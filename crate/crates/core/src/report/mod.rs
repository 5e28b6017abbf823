//! Verdict mapping, the uncertainty band, and section-wise reports.

mod markdown;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::canonical::{self, FloatStyle};
use crate::clash::ClashRecord;
use crate::contestation::ContestAction;
use crate::model::{ClaimKind, Provenance};
use crate::pipeline::{SectionResult, VerificationResult};
use crate::providers::EscalationOutcome;

pub use markdown::render_markdown;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// Arguments listed per side in a section finding.
pub const TOP_ARGUMENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Refuted,
    Uncertain,
    Supported,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Supported => "Supported",
            Verdict::Refuted => "Refuted",
            Verdict::Uncertain => "Uncertain",
        })
    }
}

/// Closed score interval treated as inconclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBand {
    pub low: f64,
    pub high: f64,
}

impl Default for UncertaintyBand {
    fn default() -> Self {
        Self { low: 0.45, high: 0.55 }
    }
}

impl UncertaintyBand {
    pub fn check(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.low) || !(0.0..=1.0).contains(&self.high) || self.low >= self.high {
            return Err(format!("uncertainty band must satisfy 0 <= low < high <= 1, got [{}, {}]", self.low, self.high));
        }
        Ok(())
    }

    pub fn contains(&self, sigma: f64) -> bool {
        sigma >= self.low && sigma <= self.high
    }
}

/// Above the band → Supported, below → Refuted, inside (endpoints
/// included) → Uncertain.
pub fn verdict_of(sigma: f64, band: &UncertaintyBand) -> (Verdict, bool) {
    if sigma > band.high {
        (Verdict::Supported, false)
    } else if sigma < band.low {
        (Verdict::Refuted, false)
    } else {
        (Verdict::Uncertain, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverallStatus {
    Verified,
    Debunked,
    Mixed,
    Inconclusive,
}

impl fmt::Display for OverallStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OverallStatus::Verified => "Verified",
            OverallStatus::Debunked => "Debunked",
            OverallStatus::Mixed => "Mixed",
            OverallStatus::Inconclusive => "Inconclusive",
        })
    }
}

/// An argument cited in a finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitedArgument {
    pub argument_id: String,
    pub sigma: f64,
    pub tau: f64,
    pub text: String,
    pub evidence_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionFinding {
    pub claim_kind: ClaimKind,
    pub statement: String,
    pub sigma: f64,
    pub verdict: Verdict,
    pub uncertain: bool,
    /// Verdict after any verifier override.
    pub final_verdict: Verdict,
    pub top_support: Vec<CitedArgument>,
    pub top_attack: Vec<CitedArgument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escalation: Option<EscalationOutcome>,
    #[serde(default)]
    pub clash_records: Vec<ClashRecord>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub case_id: String,
    pub overall_status: OverallStatus,
    pub uncertainty_band: UncertaintyBand,
    pub sections: Vec<SectionFinding>,
    pub provenance_index: BTreeMap<String, Provenance>,
    #[serde(default)]
    pub contest_log: Vec<ContestAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<DateTime<Utc>>,
}

/// Policy mapping six section verdicts to one case status; first match wins:
/// every non-Why section Supported → Verified; Authenticity Refuted or at
/// least two Refuted → Debunked; at least three Uncertain → Inconclusive;
/// otherwise Mixed.
pub fn overall_status(sections: &[SectionFinding]) -> OverallStatus {
    let verdict = |k: ClaimKind| sections.iter().find(|s| s.claim_kind == k).map(|s| s.final_verdict);
    let count = |v: Verdict| sections.iter().filter(|s| s.final_verdict == v).count();
    let non_why_supported = ClaimKind::ALL.into_iter().filter(|k| *k != ClaimKind::Why).all(|k| verdict(k) == Some(Verdict::Supported));
    if non_why_supported {
        OverallStatus::Verified
    } else if verdict(ClaimKind::Authenticity) == Some(Verdict::Refuted) || count(Verdict::Refuted) >= 2 {
        OverallStatus::Debunked
    } else if count(Verdict::Uncertain) >= 3 {
        OverallStatus::Inconclusive
    } else {
        OverallStatus::Mixed
    }
}

fn uncertainty_note(band: &UncertaintyBand) -> String {
    format!(
        "Uncertain: the claim score lies in the uncertainty band [{:.2}, {:.2}], so this section is inconclusive. Escalate to a stronger verifier or defer to human review.",
        band.low, band.high
    )
}

fn finding(kind: ClaimKind, section: &SectionResult, band: &UncertaintyBand) -> SectionFinding {
    match section {
        SectionResult::Resolved(r) => {
            let claim_id = r.claim.claim_id.as_str();
            let cite = |ids: Vec<&str>| {
                let mut cited: Vec<CitedArgument> = ids
                    .into_iter()
                    .filter_map(|id| r.graph.card(id))
                    .map(|c| CitedArgument {
                        argument_id: c.argument_id.clone(),
                        sigma: r.assignment.get(&c.argument_id).unwrap_or(c.base_strength),
                        tau: c.base_strength,
                        text: c.text.clone(),
                        evidence_id: c.provenance.evidence_id.clone(),
                    })
                    .collect();
                cited.sort_by(|a, b| b.sigma.total_cmp(&a.sigma).then_with(|| a.argument_id.cmp(&b.argument_id)));
                cited.truncate(TOP_ARGUMENTS);
                cited
            };
            let mut notes = r.notes.clone();
            if r.uncertain {
                notes.push(uncertainty_note(band));
            }
            SectionFinding {
                claim_kind: kind,
                statement: r.claim.statement.clone(),
                sigma: r.sigma,
                verdict: r.verdict,
                uncertain: r.uncertain,
                final_verdict: r.effective_verdict(),
                top_support: cite(r.graph.supporters_of(claim_id).collect()),
                top_attack: cite(r.graph.attackers_of(claim_id).collect()),
                escalation: r.escalation.clone(),
                clash_records: r.clash_records.clone(),
                notes,
            }
        }
        SectionResult::Failed(e) => {
            let sigma = e.claim.base_strength;
            let (verdict, uncertain) = verdict_of(sigma, band);
            let mut notes = vec![format!("Section could not be resolved at the {:?} stage: {}", e.stage, e.message)];
            if uncertain {
                notes.push(uncertainty_note(band));
            }
            SectionFinding {
                claim_kind: kind,
                statement: e.claim.statement.clone(),
                sigma,
                verdict,
                uncertain,
                final_verdict: verdict,
                top_support: vec![],
                top_attack: vec![],
                escalation: None,
                clash_records: vec![],
                notes,
            }
        }
    }
}

/// Assembles the report for a (possibly contested) result.
pub fn build_report(result: &VerificationResult, contest_log: &[ContestAction], generated_at: Option<DateTime<Utc>>) -> VerificationReport {
    let band = result.config.uncertainty_band;
    let sections: Vec<SectionFinding> =
        ClaimKind::ALL.into_iter().filter_map(|k| result.sections.get(&k).map(|s| finding(k, s, &band))).collect();
    VerificationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        case_id: result.case_id.clone(),
        overall_status: overall_status(&sections),
        uncertainty_band: band,
        sections,
        provenance_index: result.evidence_index.clone(),
        contest_log: contest_log.to_vec(),
        generated_at,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format `{other}` (expected json or markdown)")),
        }
    }
}

pub fn render(report: &VerificationReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => canonical::to_string(report, FloatStyle::Fixed6).expect("report serializes").into_bytes(),
        ReportFormat::Markdown => render_markdown(report).into_bytes(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn section(kind: ClaimKind, v: Verdict) -> SectionFinding {
        SectionFinding {
            claim_kind: kind,
            statement: String::new(),
            sigma: 0.5,
            verdict: v,
            uncertain: v == Verdict::Uncertain,
            final_verdict: v,
            top_support: vec![],
            top_attack: vec![],
            escalation: None,
            clash_records: vec![],
            notes: vec![],
        }
    }

    fn six(verdicts: [Verdict; 6]) -> Vec<SectionFinding> {
        ClaimKind::ALL.into_iter().zip(verdicts).map(|(k, v)| section(k, v)).collect()
    }

    #[test]
    fn verdict_examples() {
        let band = UncertaintyBand::default();
        assert_eq!(verdict_of(0.18, &band), (Verdict::Refuted, false));
        assert_eq!(verdict_of(0.50, &band), (Verdict::Uncertain, true));
        assert_eq!(verdict_of(0.55, &band), (Verdict::Uncertain, true));
        assert_eq!(verdict_of(0.45, &band), (Verdict::Uncertain, true));
        assert_eq!(verdict_of(0.5500001, &band), (Verdict::Supported, false));
    }

    #[test]
    fn overall_examples() {
        use Verdict::*;
        assert_eq!(overall_status(&six([Supported; 6])), OverallStatus::Verified);
        assert_eq!(overall_status(&six([Supported, Supported, Supported, Supported, Uncertain, Supported])), OverallStatus::Verified);
        assert_eq!(overall_status(&six([Supported, Supported, Supported, Supported, Supported, Refuted])), OverallStatus::Debunked);
        assert_eq!(overall_status(&six([Refuted, Refuted, Supported, Supported, Supported, Uncertain])), OverallStatus::Debunked);
        assert_eq!(overall_status(&six([Uncertain, Uncertain, Uncertain, Supported, Supported, Supported])), OverallStatus::Inconclusive);
        assert_eq!(overall_status(&six([Uncertain, Refuted, Supported, Supported, Supported, Supported])), OverallStatus::Mixed);
    }

    #[test]
    fn band_check() {
        assert!(UncertaintyBand { low: 0.6, high: 0.4 }.check().is_err());
        assert!(UncertaintyBand::default().check().is_ok());
        assert!("md".parse::<ReportFormat>().is_ok());
        assert!("pdf".parse::<ReportFormat>().is_err());
    }
}
