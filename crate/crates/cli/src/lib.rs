//! Front-end plumbing for the `bdris` binary: config loading, result files
//! and plot data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use bdris::experiment::{ConfigIssue, Experiment, ExperimentConfig, ResultTable};
use log::{info, warn};
use sha2::{Digest, Sha256};

pub mod app;

/// A config file as read from disk, plus any command-line overrides.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Source text, used to point validation messages at lines.
    pub source: Option<(PathBuf, String)>,
    /// Dotted keys set from the command line.
    pub overridden: Vec<String>,
}

pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| anyhow!("{origin}: {e}"))
}

pub fn load_config(path: Option<&Path>) -> Result<LoadedConfig> {
    match path {
        None => Ok(LoadedConfig { config: ExperimentConfig::default(), source: None, overridden: vec![] }),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            let config = parse_config(&text, &p.display().to_string())?;
            Ok(LoadedConfig { config, source: Some((p.to_path_buf(), text)), overridden: vec![] })
        }
    }
}

fn override_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `key=value` assignments. Values are read as TOML values, and
/// anything that does not parse as one is taken as a bare string.
pub fn apply_overrides(loaded: &mut LoadedConfig, overrides: &[String]) -> Result<()> {
    if overrides.is_empty() {
        return Ok(());
    }
    let mut table = toml::Table::try_from(&loaded.config).context("cannot serialise config")?;
    for o in overrides {
        let (key, raw) = o.split_once('=').ok_or_else(|| anyhow!("override '{o}' is not of the form key=value"))?;
        let key = key.trim();
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            bail!("override '{o}' has an empty key segment");
        }
        let mut node = &mut table;
        for p in &parts[..parts.len() - 1] {
            let next = node.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            node = next.as_table_mut().ok_or_else(|| anyhow!("override '{o}': '{p}' is not a section"))?;
        }
        node.insert(parts[parts.len() - 1].to_string(), override_value(raw.trim()));
        loaded.overridden.push(key.to_string());
    }
    loaded.config = table.try_into().map_err(|e| anyhow!("override: {e}"))?;
    Ok(())
}

/// 1-based line of `key` (a dotted path) in TOML source, falling back to
/// the closest enclosing section that is present.
pub fn locate_key(text: &str, key: &str) -> Option<usize> {
    let mut section = String::new();
    let mut best: Option<(usize, usize)> = None;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        let path = if let Some(h) = t.strip_prefix('[') {
            section = h.trim_start_matches('[').split(']').next().unwrap_or("").trim().to_string();
            section.clone()
        } else if let Some((k, _)) = t.split_once('=') {
            if t.starts_with('#') {
                continue;
            }
            let k = k.trim().trim_matches('"');
            if section.is_empty() { k.to_string() } else { format!("{section}.{k}") }
        } else {
            continue;
        };
        let depth = if path == key {
            usize::MAX
        } else if key.starts_with(&format!("{path}.")) {
            path.len()
        } else {
            continue;
        };
        if best.is_none_or(|(d, _)| depth > d) {
            best = Some((depth, i + 1));
        }
    }
    best.map(|(_, l)| l)
}

/// One line per issue, anchored at the file line when the key is there.
pub fn describe_issues(loaded: &LoadedConfig, issues: &[ConfigIssue]) -> Vec<String> {
    issues
        .iter()
        .map(|issue| {
            let from_override = loaded.overridden.iter().any(|k| issue.key == *k || issue.key.starts_with(&format!("{k}.")));
            match &loaded.source {
                _ if from_override => format!("override: {issue}"),
                Some((path, text)) => match locate_key(text, &issue.key) {
                    Some(line) => format!("{}:{line}: {issue}", path.display()),
                    None => format!("{}: {issue} (default value)", path.display()),
                },
                None => format!("defaults: {issue}"),
            }
        })
        .collect()
}

/// Fails with every issue listed when the config is not usable.
pub fn ensure_valid(loaded: &LoadedConfig) -> Result<()> {
    let issues = loaded.config.validate();
    if issues.is_empty() {
        return Ok(());
    }
    bail!("invalid configuration:\n  {}", describe_issues(loaded, &issues).join("\n  "))
}

/// SHA-256 of the canonical TOML form of the resolved config.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let text = toml::to_string(config).expect("config serialises");
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn float(x: f64) -> String {
    format!("{x:.12e}")
}

pub const CSV_COLUMNS: [&str; 6] = ["series", "architecture", "metric", "mean", "stderr", "trials"];

/// CSV text of one table: `#` header lines, then one row per slot.
pub fn render_csv(table: &ResultTable, experiment: Experiment, config: &ExperimentConfig) -> Result<String> {
    let mut head = String::new();
    writeln!(head, "# experiment: {experiment}")?;
    writeln!(head, "# table: {}", table.name)?;
    writeln!(head, "# seed: {}", config.simulation.seed)?;
    writeln!(head, "# trials: {}", config.simulation.trials)?;
    writeln!(head, "# config-sha256: {}", config_hash(config))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut cols = vec![table.x_label.as_str()];
    cols.extend(CSV_COLUMNS);
    w.write_record(&cols)?;
    for r in &table.result.rows {
        let e = &r.estimate;
        w.write_record([
            format!("{}", r.slot.x),
            r.slot.series.clone(),
            r.slot.architecture.to_string(),
            r.slot.metric.clone(),
            float(e.mean),
            float(e.stderr),
            e.trials.to_string(),
        ])?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?;
    Ok(head + &body)
}

/// Runs an experiment and writes one CSV per table into `out`.
pub fn run_experiment(experiment: Experiment, config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let tables = config.run(experiment)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut written = Vec::new();
    for t in &tables {
        let path = out.join(format!("{}.csv", t.name));
        fs::write(&path, render_csv(t, experiment, config)?).with_context(|| format!("cannot write {}", path.display()))?;
        info!("wrote {}", path.display());
        let plots = if config.output.plotdata { emit_plotdata(&path, out)? } else { vec![] };
        written.push(path);
        written.extend(plots);
    }
    Ok(written)
}

/// A data row read back from a results file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub x: f64,
    pub series: String,
    pub architecture: String,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

pub fn read_results(text: &str) -> Result<Vec<ResultRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 7 {
            bail!("row {}: expected 7 columns, found {}", i + 1, rec.len());
        }
        let num = |j: usize| rec[j].parse::<f64>().map_err(|e| anyhow!("row {}: column {}: {e}", i + 1, j + 1));
        rows.push(ResultRow {
            x: num(0)?,
            series: rec[1].to_string(),
            architecture: rec[2].to_string(),
            metric: rec[3].to_string(),
            mean: num(4)?,
            stderr: num(5)?,
            trials: rec[6].parse().map_err(|e| anyhow!("row {}: trials: {e}", i + 1))?,
        });
    }
    Ok(rows)
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for ch in s.chars() {
        match ch {
            'a'..='z' | 'A'..='Z' | '0'..='9' | '.' | '-' => out.push(ch),
            _ if !out.ends_with('_') && !out.is_empty() => out.push('_'),
            _ => {}
        }
    }
    out.trim_end_matches('_').to_string()
}

/// Writes one `x mean stderr` file per (series, architecture, metric) curve
/// of `results` into `out`. An empty results file yields no files.
pub fn emit_plotdata(results: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(results).with_context(|| format!("cannot read {}", results.display()))?;
    let rows = read_results(&text)?;
    if rows.is_empty() {
        warn!("{} has no data rows; no plot files written", results.display());
        return Ok(vec![]);
    }
    let stem = results.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let mut curves: Vec<((String, String, String), String)> = Vec::new();
    for r in &rows {
        let key = (r.series.clone(), r.architecture.clone(), r.metric.clone());
        let line = format!("{} {} {}\n", r.x, float(r.mean), float(r.stderr));
        match curves.iter_mut().find(|(k, _)| *k == key) {
            Some((_, body)) => body.push_str(&line),
            None => curves.push((key, line)),
        }
    }
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for ((series, arch, metric), body) in curves {
        let path = out.join(format!("{stem}__{}__{}__{}.dat", slug(&series), slug(&arch), slug(&metric)));
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
