//! Scenario runner for weighted ergodic-average experiments on tracial
//! matrix algebras.

pub mod assemble;
pub mod error;
pub mod report;
pub mod run;
pub mod scenario;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub use error::CliError;
use scenario::Scenario;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n_max: Option<u64>,
    pub threads: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rows_csv: Vec<u8>,
    pub summary_json: Vec<u8>,
    /// `(experiment id, weight id, verdict)`.
    pub verdicts: Vec<(String, String, String)>,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn all_decayed(&self) -> bool {
        self.verdicts.iter().all(|(_, _, v)| v == "decayed")
    }
}

fn apply_overrides(s: &mut Scenario, opts: &RunOptions) {
    if let Some(seed) = opts.seed {
        s.seed = Some(seed);
    }
    if let Some(n) = opts.n_max {
        s.n_max = n;
        if let scenario::CheckpointPolicy::Explicit(cps) = &mut s.checkpoints {
            cps.retain(|&c| c <= n);
        }
    }
}

/// Parses, runs and writes `rows.csv` and `summary.json`.
pub fn run_scenario(path: &Path, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let (mut s, _) = Scenario::load(path)?;
    apply_overrides(&mut s, opts);
    let resolved = serde_json::to_vec(&s).map_err(|e| CliError::Validation(e.to_string()))?;
    let setup = assemble::assemble(&s)?;
    let outputs = run::run_all(&s.experiments, &setup, opts.threads.max(1))?;
    let rows_csv = report::csv_bytes(&outputs)?;
    let summary_json = report::summary_json(&s.name, &resolved, s.n_max, &setup, &outputs)?;
    let out_dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("ncwwlab-out").join(&s.name));
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join("rows.csv"), &rows_csv)?;
    std::fs::write(out_dir.join("summary.json"), &summary_json)?;
    let verdicts = outputs
        .iter()
        .flat_map(|o| o.verdicts.iter().map(move |v| (o.id.clone(), v.weight_id.clone(), v.verdict.clone())))
        .collect();
    Ok(RunOutcome { rows_csv, summary_json, verdicts, out_dir })
}

/// Human-readable plan for a scenario.
pub fn describe(path: &Path) -> Result<String, CliError> {
    let (s, _) = Scenario::load(path)?;
    let setup = assemble::assemble(&s)?;
    let alg = &setup.algebra;
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", s.name);
    let blocks: Vec<String> = alg.blocks().iter().map(|b| format!("({}, {})", b.dim, b.weight)).collect();
    let _ = writeln!(out, "algebra: blocks [{}], tau(1) = {}, HS dimension {}", blocks.join(", "), alg.total_trace(), alg.hs_dim());
    let proof = setup.operator.proof().labels();
    let _ = writeln!(
        out,
        "operator: {} [{}]",
        setup.operator.structure().tag(),
        if proof.is_empty() { "no proof tags".to_string() } else { proof.join(", ") }
    );
    let _ = writeln!(out, "initial element: ||x||_2 = {:.6e}", setup.x.norm2());
    let _ = writeln!(out, "weights:");
    for (id, w) in &setup.weights {
        let _ = writeln!(out, "  {id}: {}", w.class());
    }
    let _ = writeln!(
        out,
        "checkpoints: {} (n_max {}), trace budget {}",
        setup.checkpoints.len(),
        setup.checkpoints.last().copied().unwrap_or(0),
        setup.budget
    );
    let _ = writeln!(out, "experiments:");
    let mut total = 0u64;
    for e in &s.experiments {
        let (n, note) = run::estimated_applications(&e.kind, &setup, setup.weights.len());
        total = total.saturating_add(n);
        let _ = writeln!(out, "  {} ({}): ~{n} T-applications, {note}", e.id, e.kind.label());
    }
    let _ = writeln!(out, "estimated total T-applications: {total}");
    Ok(out)
}
