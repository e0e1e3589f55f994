use serde::Serialize;
use tracing::warn;

use super::checks::{run_checks, Check, ValidationReport};
use super::references::{ReferenceContext, SwiftUnit};
use crate::backend::{extract_code, translate, BackendConfig, TranslationBackend};
use crate::error::Result;
use crate::prompt::{PromptEnvelope, PromptInputs, PromptLevel, TemplateSet};

pub const DEFAULT_MAX_ROUNDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RefinementState {
    pub round: usize,
    /// Candidate code and its report for rounds `0..=round`.
    pub history: Vec<(String, ValidationReport)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineOutcome {
    pub unit: SwiftUnit,
    pub state: RefinementState,
    pub repair_calls: usize,
    /// The backend failed mid-loop; `unit` is the best candidate seen.
    pub degraded: bool,
}

impl RefineOutcome {
    pub fn final_report(&self) -> &ValidationReport {
        let best = self.state.history.iter().find(|(code, _)| *code == self.unit.code);
        &best.unwrap_or_else(|| self.state.history.last().unwrap()).1
    }
}

pub struct Refiner<'a> {
    pub backend: &'a dyn TranslationBackend,
    pub backend_config: &'a BackendConfig,
    pub templates: &'a TemplateSet,
    pub checks: &'a [Box<dyn Check>],
    pub context: &'a ReferenceContext<'a>,
    pub max_rounds: usize,
}

/// Issues as diagnostic lines, errors first.
pub fn format_issues(report: &ValidationReport) -> String {
    let mut issues: Vec<_> = report.issues().collect();
    issues.sort_by_key(|i| (!i.is_error(), i.line, i.column, i.rule.clone()));
    issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("\n")
}

pub fn repair_prompt(templates: &TemplateSet, unit: &SwiftUnit, report: &ValidationReport) -> Result<PromptEnvelope> {
    let inputs = PromptInputs::new(unit.file.clone())
        .slot("file_name", unit.file.clone(), unit.file.clone())
        .slot("code", unit.code.clone(), unit.file.clone())
        .slot("issues", format_issues(report), format!("validation round {}", report.round));
    templates.render(PromptLevel::Repair, &inputs)
}

impl Refiner<'_> {
    /// Checks, then re-prompts with the issues until no errors remain or
    /// `max_rounds` repairs have been made.
    pub fn refine(&self, unit: SwiftUnit) -> Result<RefineOutcome> {
        let mut candidate = unit;
        let mut report = run_checks(&candidate, self.checks, self.context, 0)?;
        let mut history = vec![(candidate.code.clone(), report.clone())];
        let mut repair_calls = 0;
        let mut degraded = false;
        while report.error_count() > 0 && history.len() <= self.max_rounds {
            let round = history.len();
            let envelope = repair_prompt(self.templates, &candidate, &report)?;
            repair_calls += 1;
            let code = translate(self.backend, &envelope, self.backend_config).and_then(|raw| extract_code(&raw));
            let code = match code {
                Ok(extraction) => extraction.code,
                Err(e) => {
                    warn!(file = %candidate.file, round, error = %e, "repair failed; keeping best candidate");
                    degraded = true;
                    break;
                }
            };
            candidate = SwiftUnit::new(candidate.file.clone(), code);
            report = run_checks(&candidate, self.checks, self.context, round)?;
            history.push((candidate.code.clone(), report.clone()));
        }
        if degraded {
            let (code, _) = history
                .iter()
                .rev()
                .min_by_key(|(_, r)| r.error_count())
                .expect("history starts non-empty");
            candidate = SwiftUnit::new(candidate.file.clone(), code.clone());
        }
        Ok(RefineOutcome {
            unit: candidate,
            state: RefinementState {
                round: history.len() - 1,
                history,
            },
            repair_calls,
            degraded,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendError, MockBackend, RepairMode, RewriteRule, RuleTable};
    use crate::validation::{check_registry, Allowlist, CheckSettings, ResidueRules};
    use std::collections::{BTreeMap, BTreeSet};

    const PLANTED: &str = "class A {\n    let init = 1\n    var init = 2\n}\n";

    fn mock(mode: RepairMode) -> MockBackend {
        MockBackend::new(RuleTable {
            repair: vec![RewriteRule {
                pattern: r"(let|var) init\b".into(),
                replacement: "${1} initial".into(),
            }],
            repair_mode: mode,
            ..RuleTable::default()
        })
    }

    fn run(backend: &dyn TranslationBackend, code: &str, max_rounds: usize) -> RefineOutcome {
        let checks = vec![check_registry().create("stub-syntax", &CheckSettings::default()).unwrap()];
        let (defined, symbols, allow, residue) = (BTreeSet::new(), BTreeMap::new(), Allowlist::builtin(), ResidueRules::builtin());
        let ctx = ReferenceContext {
            defined: &defined,
            source_symbols: &symbols,
            allowlist: &allow,
            residue: &residue,
        };
        let templates = TemplateSet::default();
        let cfg = BackendConfig::default();
        Refiner {
            backend,
            backend_config: &cfg,
            templates: &templates,
            checks: &checks,
            context: &ctx,
            max_rounds,
        }
        .refine(SwiftUnit::new("A.swift", code))
        .unwrap()
    }

    #[test]
    fn clean_unit_needs_no_calls() {
        let b = mock(RepairMode::One);
        let out = run(&b, "class A {}\n", 3);
        assert_eq!((out.state.round, out.repair_calls, b.total_calls()), (0, 0, 0));
        assert_eq!(out.state.history.len(), 1);
    }

    #[test]
    fn fix_all_stops_after_one_round() {
        let out = run(&mock(RepairMode::All), PLANTED, 3);
        assert_eq!(out.state.round, 1);
        assert_eq!(out.final_report().error_count(), 0);
    }

    #[test]
    fn one_fix_per_round_needs_two_rounds_and_is_monotone() {
        let out = run(&mock(RepairMode::One), PLANTED, 3);
        assert_eq!(out.state.round, 2);
        assert_eq!(out.repair_calls, 2);
        let counts: Vec<_> = out.state.history.iter().map(|(_, r)| r.error_count()).collect();
        assert_eq!(counts, [2, 1, 0]);
        assert!(out.unit.code.contains("let initial = 1"));
    }

    #[test]
    fn never_fixing_mock_is_bounded() {
        let b = mock(RepairMode::None);
        let out = run(&b, PLANTED, 3);
        assert_eq!(out.repair_calls, 3);
        assert_eq!(b.calls(PromptLevel::Repair), 3);
        assert_eq!(out.state.round, 3);
        assert_eq!(out.state.history.len(), 4);
        assert_eq!(out.final_report().error_count(), 2);
        let zero = run(&mock(RepairMode::None), PLANTED, 0);
        assert_eq!((zero.repair_calls, zero.state.round), (0, 0));
    }

    struct FailSecond(MockBackend, std::sync::atomic::AtomicUsize);

    impl TranslationBackend for FailSecond {
        fn name(&self) -> &str {
            "fail-second"
        }

        fn complete(&self, e: &PromptEnvelope, c: &BackendConfig) -> std::result::Result<String, BackendError> {
            if self.1.fetch_add(1, std::sync::atomic::Ordering::SeqCst) == 1 {
                return Err(BackendError::fatal("down"));
            }
            self.0.complete(e, c)
        }
    }

    #[test]
    fn backend_failure_returns_best_candidate_degraded() {
        let b = FailSecond(mock(RepairMode::One), Default::default());
        let out = run(&b, PLANTED, 3);
        assert!(out.degraded);
        assert_eq!(out.state.round, 1);
        assert_eq!(out.final_report().error_count(), 1);
        assert!(out.unit.code.contains("let initial"));
    }
}
