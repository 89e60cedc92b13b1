//! `audit`: check an event log for forbidden communication.

use std::fs;
use std::path::PathBuf;

use serde_json::Value;
use singlet_core::protocol::{audit_locality, EventLog, MessageKind};
use singlet_core::ModelKind;

use crate::{CmdResult, Failure};

#[derive(clap::Args, Debug)]
#[command(about = "Audit an event log for locality violations (exit 3 on violation)")]
pub struct Args {
    /// Newline-delimited event log written by `simulate --log-events`.
    #[arg(long)]
    log: PathBuf,
    /// Model that produced the log; read from a neighbouring manifest.json when omitted.
    #[arg(long)]
    model: Option<ModelKind>,
}

/// Model named by the manifest beside the log, if there is one.
fn model_from_manifest(log: &std::path::Path) -> Option<ModelKind> {
    let manifest = log.parent()?.join("manifest.json");
    let value: Value = serde_json::from_str(&fs::read_to_string(manifest).ok()?).ok()?;
    serde_json::from_value(value.get("config")?.get("model")?.clone()).ok()
}

pub fn run(args: Args) -> CmdResult {
    let text = fs::read_to_string(&args.log).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", args.log.display())))?;
    let log = EventLog::from_ndjson(&text).map_err(|e| Failure::Usage(format!("malformed log {}: {e}", args.log.display())))?;
    // without a stated model, a log with no balls can only come from the QM reference
    let kind = args.model.or_else(|| model_from_manifest(&args.log)).unwrap_or_else(|| {
        if log.messages.iter().any(|m| m.kind == MessageKind::Ball) {
            ModelKind::A
        } else {
            ModelKind::QM
        }
    });
    let report = audit_locality(&log, kind);
    print!("{report}");
    if report.passed {
        Ok(())
    } else {
        let rules: Vec<String> = report.violations.iter().map(|v| format!("({})", v.rule.number())).collect();
        Err(Failure::Audit(format!("{} violations of rules {}", report.violations.len(), rules.join(", "))))
    }
}
