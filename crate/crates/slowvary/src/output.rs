//! In-memory run outputs and their serialization. A run builds every file
//! first and only then touches the disk.

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{RunError, RunResult};

/// Floats in CSV files carry 17 significant digits.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> RunResult<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)
            .map_err(|e| RunError::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| RunError::Io(e.to_string()))?;
        }
        w.into_inner().map_err(|e| RunError::Io(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Content {
    Csv(CsvTable),
    Json(Value),
    Text(String),
}

/// One output file, named relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: PathBuf,
    pub content: Content,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<Artifact>,
}

impl Artifacts {
    pub fn csv(&mut self, name: impl Into<PathBuf>, table: CsvTable) {
        self.push(name, Content::Csv(table));
    }

    pub fn json(&mut self, name: impl Into<PathBuf>, value: Value) {
        self.push(name, Content::Json(value));
    }

    pub fn text(&mut self, name: impl Into<PathBuf>, text: String) {
        self.push(name, Content::Text(text));
    }

    fn push(&mut self, name: impl Into<PathBuf>, content: Content) {
        self.files.push(Artifact {
            name: name.into(),
            content,
        });
    }

    pub fn get(&self, name: &str) -> Option<&Content> {
        self.files
            .iter()
            .find(|a| a.name == Path::new(name))
            .map(|a| &a.content)
    }

    /// Writes every file under `dir`, creating directories as needed.
    pub fn write(&self, dir: &Path) -> RunResult<()> {
        for a in &self.files {
            let path = dir.join(&a.name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| RunError::write(parent, e))?;
            }
            let bytes = match &a.content {
                Content::Csv(t) => t.to_bytes()?,
                Content::Json(v) => {
                    let mut s = serde_json::to_string_pretty(v)
                        .map_err(|e| RunError::write(&path, e))?;
                    s.push('\n');
                    s.into_bytes()
                }
                Content::Text(s) => s.clone().into_bytes(),
            };
            std::fs::write(&path, bytes).map_err(|e| RunError::write(&path, e))?;
        }
        Ok(())
    }
}

/// Concatenates the CSV files present in every run, with a leading `seed`
/// column, in the order given.
pub fn merge_by_seed(runs: &[(u64, Artifacts)]) -> Artifacts {
    let mut merged = Artifacts::default();
    let Some((_, first)) = runs.first() else {
        return merged;
    };
    for a in &first.files {
        let Content::Csv(t) = &a.content else { continue };
        let mut header = vec!["seed".to_string()];
        header.extend(t.header.iter().cloned());
        let mut out = CsvTable {
            header,
            rows: Vec::new(),
        };
        let mut complete = true;
        for (seed, run) in runs {
            match run.files.iter().find(|b| b.name == a.name) {
                Some(Artifact {
                    content: Content::Csv(other),
                    ..
                }) if other.header == t.header => {
                    for r in &other.rows {
                        let mut row = vec![seed.to_string()];
                        row.extend(r.iter().cloned());
                        out.rows.push(row);
                    }
                }
                _ => complete = false,
            }
        }
        if complete {
            merged.csv(&a.name, out);
        }
    }
    merged
}
