//! Machine-readable run summaries: a small JSON report describing the
//! outcome, the edits made, and solver/verifier statistics.
//!
//! The format is deliberately rigid so downstream tooling can rely on it;
//! [`validate_summary_json`] checks a candidate document against every rule
//! the writer guarantees.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constraints::Strategy;
use crate::minikernel::BarrierLevel;
use crate::repair::{CannotRepairReason, ChangeAction, RepairOutcome, RepairRun};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ChangeEntry {
    pub action: String,
    pub level: String,
    pub file: String,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StatsEntry {
    pub iterations: u32,
    pub verifier_calls: u32,
    pub solver_calls: u32,
    /// Weight of the adopted solution; null unless the kernel was repaired
    /// (or already safe).
    pub total_weight: Option<u64>,
    pub strategy: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SummaryFile {
    pub input_path: String,
    /// One of "repaired", "already_safe", "cannot_repair", "timeout".
    pub outcome: String,
    /// Present exactly when outcome is "cannot_repair": one of
    /// "unsat_constraints", "empty_witness", "non_repairable".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub changes: Vec<ChangeEntry>,
    pub stats: StatsEntry,
    pub tool_version: String,
}

fn strategy_name(strategy: Strategy) -> &'static str {
    match strategy {
        Strategy::Mhs => "mhs",
        Strategy::MaxSat => "maxsat",
    }
}

impl SummaryFile {
    pub fn from_run(input_path: &str, run: &RepairRun) -> SummaryFile {
        let (outcome, reason) = match &run.outcome {
            RepairOutcome::Repaired { changes, .. } if changes.is_empty() => ("already_safe", None),
            RepairOutcome::Repaired { .. } => ("repaired", None),
            RepairOutcome::CannotRepair(reason) => (
                "cannot_repair",
                Some(match reason {
                    CannotRepairReason::UnsatConstraints => "unsat_constraints",
                    CannotRepairReason::EmptyWitness => "empty_witness",
                    CannotRepairReason::NonRepairable(_) => "non_repairable",
                }),
            ),
            RepairOutcome::Timeout => ("timeout", None),
        };
        let changes = match &run.outcome {
            RepairOutcome::Repaired { changes, .. } => changes
                .iter()
                .map(|c| ChangeEntry {
                    action: match c.action {
                        ChangeAction::AddBarrier => "add_barrier".to_string(),
                        ChangeAction::RemoveBarrier => "remove_barrier".to_string(),
                    },
                    level: match c.level {
                        BarrierLevel::Block => "block".to_string(),
                        BarrierLevel::Grid => "grid".to_string(),
                    },
                    file: run.instrumented.kernel.file.clone(),
                    line: c.loc.line,
                    col: c.loc.col,
                })
                .collect(),
            _ => Vec::new(),
        };
        SummaryFile {
            input_path: input_path.to_string(),
            outcome: outcome.to_string(),
            reason: reason.map(str::to_string),
            changes,
            stats: StatsEntry {
                iterations: run.stats.iterations,
                verifier_calls: run.stats.verifier_calls,
                solver_calls: run.stats.solver_calls,
                total_weight: run.stats.total_weight,
                strategy: strategy_name(run.stats.strategy).to_string(),
            },
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Renders the summary exactly as [`write_summary`] writes it.
    pub fn render(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("summary serializes");
        text.push('\n');
        text
    }
}

/// Writes `summary` to `path` as pretty-printed JSON with a trailing newline.
pub fn write_summary(path: &Path, summary: &SummaryFile) -> io::Result<()> {
    std::fs::write(path, summary.render())
}

const OUTCOMES: [&str; 4] = ["repaired", "already_safe", "cannot_repair", "timeout"];
const REASONS: [&str; 3] = ["unsat_constraints", "empty_witness", "non_repairable"];
const ACTIONS: [&str; 2] = ["add_barrier", "remove_barrier"];
const LEVELS: [&str; 2] = ["block", "grid"];
const STRATEGIES: [&str; 2] = ["mhs", "maxsat"];

fn expect_object<'v>(
    value: &'v serde_json::Value,
    what: &str,
) -> Result<&'v serde_json::Map<String, serde_json::Value>, String> {
    value
        .as_object()
        .ok_or_else(|| format!("{what} must be an object"))
}

fn expect_string<'v>(
    map: &'v serde_json::Map<String, serde_json::Value>,
    key: &str,
    what: &str,
) -> Result<&'v str, String> {
    map.get(key)
        .ok_or_else(|| format!("{what} is missing key \"{key}\""))?
        .as_str()
        .ok_or_else(|| format!("{what} key \"{key}\" must be a string"))
}

fn expect_uint(
    map: &serde_json::Map<String, serde_json::Value>,
    key: &str,
    what: &str,
) -> Result<u64, String> {
    map.get(key)
        .ok_or_else(|| format!("{what} is missing key \"{key}\""))?
        .as_u64()
        .ok_or_else(|| format!("{what} key \"{key}\" must be an unsigned integer"))
}

fn check_keys(
    map: &serde_json::Map<String, serde_json::Value>,
    allowed: &[&str],
    what: &str,
) -> Result<(), String> {
    for key in map.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(format!("{what} has unexpected key \"{key}\""));
        }
    }
    Ok(())
}

/// Checks that `text` is a well-formed summary document: valid JSON, the
/// exact expected key sets, legal enum values, the reason/outcome coupling,
/// the changes/outcome coupling, and a trailing newline.
pub fn validate_summary_json(text: &str) -> Result<(), String> {
    if !text.ends_with('\n') {
        return Err("summary must end with a trailing newline".to_string());
    }
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| format!("summary is not valid JSON: {e}"))?;
    let root = expect_object(&value, "summary")?;
    check_keys(
        root,
        &[
            "inputPath",
            "outcome",
            "reason",
            "changes",
            "stats",
            "toolVersion",
        ],
        "summary",
    )?;

    let input_path = expect_string(root, "inputPath", "summary")?;
    if input_path.is_empty() {
        return Err("\"inputPath\" must not be empty".to_string());
    }

    let outcome = expect_string(root, "outcome", "summary")?;
    if !OUTCOMES.contains(&outcome) {
        return Err(format!("\"outcome\" has illegal value \"{outcome}\""));
    }

    match root.get("reason") {
        Some(reason) => {
            if outcome != "cannot_repair" {
                return Err(format!(
                    "\"reason\" is only allowed when outcome is \"cannot_repair\" (found outcome \"{outcome}\")"
                ));
            }
            let reason = reason
                .as_str()
                .ok_or_else(|| "\"reason\" must be a string".to_string())?;
            if !REASONS.contains(&reason) {
                return Err(format!("\"reason\" has illegal value \"{reason}\""));
            }
        }
        None => {
            if outcome == "cannot_repair" {
                return Err("outcome \"cannot_repair\" requires a \"reason\"".to_string());
            }
        }
    }

    let changes = root
        .get("changes")
        .ok_or_else(|| "summary is missing key \"changes\"".to_string())?
        .as_array()
        .ok_or_else(|| "\"changes\" must be an array".to_string())?;
    match outcome {
        "repaired" => {
            if changes.is_empty() {
                return Err(
                    "outcome \"repaired\" requires a non-empty \"changes\" list".to_string()
                );
            }
        }
        _ => {
            if !changes.is_empty() {
                return Err(format!(
                    "outcome \"{outcome}\" requires an empty \"changes\" list"
                ));
            }
        }
    }
    for (i, change) in changes.iter().enumerate() {
        let what = format!("changes[{i}]");
        let change = expect_object(change, &what)?;
        check_keys(change, &["action", "level", "file", "line", "col"], &what)?;
        let action = expect_string(change, "action", &what)?;
        if !ACTIONS.contains(&action) {
            return Err(format!("{what} \"action\" has illegal value \"{action}\""));
        }
        let level = expect_string(change, "level", &what)?;
        if !LEVELS.contains(&level) {
            return Err(format!("{what} \"level\" has illegal value \"{level}\""));
        }
        expect_string(change, "file", &what)?;
        if expect_uint(change, "line", &what)? == 0 {
            return Err(format!("{what} \"line\" must be positive"));
        }
        if expect_uint(change, "col", &what)? == 0 {
            return Err(format!("{what} \"col\" must be positive"));
        }
    }

    let stats = expect_object(
        root.get("stats")
            .ok_or_else(|| "summary is missing key \"stats\"".to_string())?,
        "stats",
    )?;
    check_keys(
        stats,
        &[
            "iterations",
            "verifierCalls",
            "solverCalls",
            "totalWeight",
            "strategy",
        ],
        "stats",
    )?;
    expect_uint(stats, "iterations", "stats")?;
    expect_uint(stats, "verifierCalls", "stats")?;
    expect_uint(stats, "solverCalls", "stats")?;
    let total_weight = stats
        .get("totalWeight")
        .ok_or_else(|| "stats is missing key \"totalWeight\"".to_string())?;
    let weight_present = match total_weight {
        serde_json::Value::Null => false,
        serde_json::Value::Number(n) if n.as_u64().is_some() => true,
        _ => return Err("\"totalWeight\" must be null or an unsigned integer".to_string()),
    };
    let repaired_like = outcome == "repaired" || outcome == "already_safe";
    if weight_present != repaired_like {
        return Err(format!(
            "\"totalWeight\" must be {} when outcome is \"{outcome}\"",
            if repaired_like { "a number" } else { "null" }
        ));
    }
    let strategy = expect_string(stats, "strategy", "stats")?;
    if !STRATEGIES.contains(&strategy) {
        return Err(format!("\"strategy\" has illegal value \"{strategy}\""));
    }

    let tool_version = expect_string(root, "toolVersion", "summary")?;
    if tool_version.is_empty() {
        return Err("\"toolVersion\" must not be empty".to_string());
    }

    Ok(())
}
