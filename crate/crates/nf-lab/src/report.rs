//! Verdict table over the criterion summaries found in an output directory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::LabError;
use crate::experiments::CriterionSummary;
use crate::io::{Envelope, read_json};

pub const CRITERIA: u8 = 10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: u8,
    pub title: Option<String>,
    /// None when the criterion has not been run.
    pub passed: Option<bool>,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub failed_checks: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerdictTable {
    pub verdicts: Vec<Verdict>,
    pub all_passed: bool,
}

impl VerdictTable {
    pub fn render(&self) -> String {
        let mut out = String::from("criterion  title                         verdict  hash              seed\n");
        for v in &self.verdicts {
            let verdict = match v.passed {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "----",
            };
            out.push_str(&format!(
                "{:>9}  {:<28}  {:<7}  {:<16}  {}\n",
                v.criterion,
                v.title.as_deref().unwrap_or("(not run)"),
                verdict,
                v.config_hash.as_deref().unwrap_or("-"),
                v.seed.map_or("-".to_string(), |s| s.to_string())
            ));
            for c in &v.failed_checks {
                out.push_str(&format!("{:>11}failed: {c}\n", ""));
            }
        }
        out.push_str(if self.all_passed { "all criteria passed\n" } else { "not all criteria passed\n" });
        out
    }
}

/// Reads `criterion_NN.json` for every criterion. Unreadable or foreign
/// documents are errors; absent ones count as not run.
pub fn collect(dir: &Path) -> Result<VerdictTable, LabError> {
    let mut verdicts = Vec::new();
    for k in 1..=CRITERIA {
        let path = dir.join(format!("criterion_{k:02}.json"));
        if !path.exists() {
            verdicts.push(Verdict {
                criterion: k,
                title: None,
                passed: None,
                config_hash: None,
                seed: None,
                failed_checks: Vec::new(),
            });
            continue;
        }
        let env: Envelope<CriterionSummary> = read_json(&path)?;
        let s = env.data;
        verdicts.push(Verdict {
            criterion: k,
            title: Some(s.title.clone()),
            passed: Some(s.passed),
            config_hash: Some(env.config_hash),
            seed: Some(env.seed),
            failed_checks: s
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{} = {:e} (need {} {:e})", c.name, c.value, c.relation, c.threshold))
                .collect(),
        });
    }
    let all_passed = verdicts.iter().all(|v| v.passed == Some(true));
    Ok(VerdictTable { verdicts, all_passed })
}
