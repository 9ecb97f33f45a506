use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Collects the tables and summary values of one run, writing each table as
/// soon as it is produced so a later failure still leaves earlier results.
#[derive(Debug)]
pub struct Output {
    dir: PathBuf,
    tables: Vec<String>,
    summary: Vec<(String, String)>,
}

impl Output {
    fn new(dir: PathBuf) -> Self {
        Self {
            dir,
            tables: Vec::new(),
            summary: Vec::new(),
        }
    }

    /// Writes `<dir>/<name>.csv`.
    pub fn table(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let file = format!("{name}.csv");
        let path = self.dir.join(&file);
        fs::write(&path, contents).map_err(|source| CliError::Write { path, source })?;
        self.tables.push(file);
        Ok(())
    }

    pub fn summary(&mut self, key: &str, value: impl Display) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn real(&mut self, key: &str, value: f64) {
        self.summary(key, ncham_core::io::fmt_f64(value));
    }
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub tables: Vec<String>,
    pub summary: Vec<(String, String)>,
}

/// Removes outputs of an earlier run in `dir`, leaving other files alone.
fn clear_previous(dir: &Path) -> Result<(), CliError> {
    let entries = fs::read_dir(dir).map_err(|source| CliError::Read {
        path: dir.to_path_buf(),
        source,
    })?;
    for entry in entries.flatten() {
        let path = entry.path();
        let ours = path.extension().is_some_and(|e| e == "csv") || path.file_name().is_some_and(|n| n == "manifest.txt");
        if ours && path.is_file() {
            fs::remove_file(&path).map_err(|source| CliError::Write { path, source })?;
        }
    }
    Ok(())
}

fn manifest(config: &ExperimentConfig, out: &Output, failure: Option<&CliError>) -> String {
    let mut lines = vec![
        "# ncham run record".to_string(),
        format!("library_version={}", ncham_core::VERSION),
        format!("runner_version={}", env!("CARGO_PKG_VERSION")),
    ];
    lines.extend(config.echo().into_iter().map(|(k, v)| format!("config.{k}={v}")));
    lines.push(format!("relations={}", config.experiment.relations().join(",")));
    lines.push(format!("tables={}", out.tables.join(",")));
    lines.extend(out.summary.iter().map(|(k, v)| format!("summary.{k}={v}")));
    match failure {
        None => {
            lines.push("status=ok".into());
            lines.push("partial=false".into());
        }
        Some(e) => {
            lines.push("status=numeric_error".into());
            lines.push("partial=true".into());
            lines.push(format!("error={}", e.to_string().replace('\n', " ")));
        }
    }
    lines.join("\n") + "\n"
}

/// Runs the configured experiment and writes its run record.
///
/// On a numeric failure the tables written so far are kept and the record
/// is marked `partial=true` before the error is returned.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let dir = config.output_dir.join(config.experiment.name());
    fs::create_dir_all(&dir).map_err(|source| CliError::Write {
        path: dir.clone(),
        source,
    })?;
    clear_previous(&dir)?;
    let mut out = Output::new(dir.clone());
    let result = config.experiment.run(config, &mut out);
    let record = manifest(config, &out, result.as_ref().err());
    let path = dir.join("manifest.txt");
    fs::write(&path, record).map_err(|source| CliError::Write { path, source })?;
    result.map(|()| RunOutcome {
        dir,
        tables: out.tables,
        summary: out.summary,
    })
}
