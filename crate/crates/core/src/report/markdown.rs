use std::fmt::Write as _;

use super::{CitedArgument, SectionFinding, Verdict, VerificationReport};
use crate::contestation::{ActionKind, ActionPayload};
use crate::providers::{EscalationDecision, Winner};

fn badge(v: Verdict) -> &'static str {
    match v {
        Verdict::Supported => "`SUPPORTED`",
        Verdict::Refuted => "`REFUTED`",
        Verdict::Uncertain => "`UNCERTAIN`",
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn source_link(report: &VerificationReport, evidence_id: &str) -> Option<String> {
    let p = report.provenance_index.get(evidence_id)?;
    match (&p.source_name, &p.source_url) {
        (name, Some(url)) => Some(format!("[{}]({url})", one_line(name.as_deref().unwrap_or(url)))),
        (Some(name), None) => Some(one_line(name)),
        (None, None) => None,
    }
}

fn arguments(out: &mut String, report: &VerificationReport, title: &str, args: &[CitedArgument]) {
    let _ = writeln!(out, "**{title}**\n");
    if args.is_empty() {
        out.push_str("- none\n\n");
        return;
    }
    for a in args {
        let _ = writeln!(
            out,
            "- `{}` σ={:.6} τ={:.6}: {} (evidence `{}`{})",
            a.argument_id,
            a.sigma,
            a.tau,
            one_line(&a.text),
            a.evidence_id,
            source_link(report, &a.evidence_id).map(|l| format!(", {l}")).unwrap_or_default()
        );
    }
    out.push('\n');
}

fn section(out: &mut String, report: &VerificationReport, s: &SectionFinding) {
    let _ = writeln!(out, "## {} {}\n", s.claim_kind.title(), badge(s.final_verdict));
    let _ = writeln!(out, "> {}\n", one_line(&s.statement));
    let _ = writeln!(out, "- Claim score σ: {:.6}", s.sigma);
    let _ = writeln!(out, "- Score verdict: {}", s.verdict);
    if s.final_verdict != s.verdict {
        let _ = writeln!(out, "- Final verdict (verifier override): {}", s.final_verdict);
    }
    let _ = writeln!(out, "- Uncertain: {}\n", if s.uncertain { "yes" } else { "no" });

    arguments(out, report, "Supporting arguments", &s.top_support);
    arguments(out, report, "Attacking arguments", &s.top_attack);

    if !s.clash_records.is_empty() {
        out.push_str("**Clash resolution**\n\n");
        for c in &s.clash_records {
            let winner = match c.winner {
                Winner::Support => format!("`{}` wins", c.support_id),
                Winner::Attack => format!("`{}` wins", c.attack_id),
                Winner::Tie => "tie".to_owned(),
            };
            let _ = writeln!(out, "- `{}` vs `{}`: {winner} (judge {}; {})", c.support_id, c.attack_id, c.judge_id, one_line(&c.rationale));
        }
        out.push('\n');
    }
    if let Some(e) = &s.escalation {
        out.push_str("**Escalation**\n\n");
        let decision = match e.decision {
            EscalationDecision::Override { verdict } => format!("verifier judged {verdict}"),
            EscalationDecision::DeferToHuman => "deferred to human review".to_owned(),
        };
        let _ = writeln!(out, "- {decision} (provider {})", e.provider_id);
        if !e.rationale.is_empty() {
            let _ = writeln!(out, "- Rationale: {}", one_line(&e.rationale));
        }
        if let Some(err) = &e.error {
            let _ = writeln!(out, "- Error: {}", one_line(err));
        }
        out.push('\n');
    }
    if !s.notes.is_empty() {
        out.push_str("**Notes**\n\n");
        for n in &s.notes {
            let _ = writeln!(out, "- {}", one_line(n));
        }
        out.push('\n');
    }
}

/// Fixed Markdown layout: header, one section per claim kind, provenance
/// table, contestation log.
pub fn render_markdown(report: &VerificationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Verification report: {}\n", one_line(&report.case_id));
    let _ = writeln!(out, "- Overall status: **{}**", report.overall_status);
    let _ = writeln!(out, "- Uncertainty band: [{:.6}, {:.6}]", report.uncertainty_band.low, report.uncertainty_band.high);
    let _ = writeln!(out, "- Report schema: v{}", report.schema_version);
    if let Some(at) = report.generated_at {
        let _ = writeln!(out, "- Generated at: {}", at.to_rfc3339());
    }
    out.push('\n');
    out.push_str("| Section | Verdict | σ |\n|---|---|---|\n");
    for s in &report.sections {
        let _ = writeln!(out, "| {} | {} | {:.6} |", s.claim_kind.title(), s.final_verdict, s.sigma);
    }
    out.push('\n');

    for s in &report.sections {
        section(&mut out, report, s);
    }

    out.push_str("## Provenance\n\n");
    if report.provenance_index.is_empty() {
        out.push_str("No evidence items.\n\n");
    } else {
        out.push_str("| Evidence | Source | Locator | Retrieved |\n|---|---|---|---|\n");
        for (id, p) in &report.provenance_index {
            let _ = writeln!(
                out,
                "| `{id}` | {} | {} | {} |",
                source_link(report, id).unwrap_or_else(|| "-".to_owned()),
                p.locator.as_deref().map(one_line).unwrap_or_default(),
                p.retrieved_at.map(|t| t.to_rfc3339()).unwrap_or_default()
            );
        }
        out.push('\n');
    }

    out.push_str("## Contestation log\n\n");
    if report.contest_log.is_empty() {
        out.push_str("No contest actions.\n");
    } else {
        for (i, a) in report.contest_log.iter().enumerate() {
            let what = match (&a.kind, &a.payload) {
                (ActionKind::Add, ActionPayload::Add { card, .. }) => format!("Add `{}`", card.argument_id),
                (kind, _) => format!("{kind:?} `{}`", a.target.as_deref().unwrap_or("?")),
            };
            let _ = writeln!(out, "{}. {} by {} at {} on {}: {what}", i + 1, a.action_id, a.actor, a.at.to_rfc3339(), a.claim_kind);
        }
    }
    out
}
