//! Report files: tables in CSV or JSON, JSON documents, Graphviz text.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use xclust_core::crosschain::CoClusterGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    Int(u64),
    Float(f64),
    Empty,
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Str(s)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

impl Cell {
    fn to_field(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Cell::Str(s) => s.as_str().into(),
            Cell::Int(v) => (*v).into(),
            Cell::Float(v) => (*v).into(),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

enum Sink {
    Csv(csv::Writer<File>),
    Json { out: BufWriter<File>, rows: usize },
}

/// Streams rows to disk so large tables never sit in memory.
pub struct TableWriter {
    path: PathBuf,
    columns: Vec<String>,
    sink: Sink,
}

impl TableWriter {
    pub fn row<I, C>(&mut self, cells: I) -> Result<()>
    where
        I: IntoIterator<Item = C>,
        C: Into<Cell>,
    {
        let cells: Vec<Cell> = cells.into_iter().map(Into::into).collect();
        debug_assert_eq!(cells.len(), self.columns.len());
        match &mut self.sink {
            Sink::Csv(w) => w.write_record(cells.iter().map(Cell::to_field))?,
            Sink::Json { out, rows } => {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .cloned()
                    .zip(cells.iter().map(Cell::to_json))
                    .collect();
                out.write_all(if *rows == 0 { b"[\n  " } else { b",\n  " })?;
                serde_json::to_writer(&mut *out, &obj)?;
                *rows += 1;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        match self.sink {
            Sink::Csv(mut w) => w.flush()?,
            Sink::Json { mut out, rows } => {
                out.write_all(if rows == 0 { b"[]\n" } else { b"\n]\n" })?;
                out.flush()?;
            }
        }
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// The output directory of one command. Remembers every file it hands out.
pub struct Outputs {
    dir: PathBuf,
    format: Format,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path, format: Format) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn format(&self) -> Format {
        self.format
    }

    /// File names relative to the output directory, in creation order.
    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn claim(&mut self, name: String) -> PathBuf {
        let rel = PathBuf::from(name);
        if !self.written.contains(&rel) {
            self.written.push(rel.clone());
        }
        self.dir.join(rel)
    }

    pub fn table(&mut self, stem: &str, columns: &[&str]) -> Result<TableWriter> {
        let path = self.claim(format!("{stem}.{}", self.format.extension()));
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let sink = match self.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(file);
                w.write_record(columns)?;
                Sink::Csv(w)
            }
            Format::Json => Sink::Json {
                out: BufWriter::new(file),
                rows: 0,
            },
        };
        Ok(TableWriter {
            path,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            sink,
        })
    }

    /// A JSON document, regardless of the table format.
    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.claim(name.to_string());
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(path)
    }

    pub fn text(&mut self, name: &str, content: &str) -> Result<PathBuf> {
        let path = self.claim(name.to_string());
        std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Registers a file written by other means (chain files).
    pub fn adopt(&mut self, path: &Path) {
        if let Ok(rel) = path.strip_prefix(&self.dir) {
            let rel = rel.to_path_buf();
            if !self.written.contains(&rel) {
                self.written.push(rel);
            }
        }
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering of a co-cluster graph. Vertices are `chain:rep`;
/// edges carry the number of shared addresses.
pub fn to_dot(g: &CoClusterGraph) -> String {
    let mut s = String::from("graph cocluster {\n  node [shape=ellipse];\n");
    for v in g.vertices() {
        s.push_str(&format!(
            "  \"{}:{}\" [label=\"{}\\n{} ({})\"];\n",
            dot_escape(v.chain.as_str()),
            dot_escape(v.cluster.as_str()),
            dot_escape(v.chain.as_str()),
            dot_escape(v.cluster.as_str()),
            v.size
        ));
    }
    for e in g.edges() {
        let (a, b) = (g.vertex(e.a), g.vertex(e.b));
        s.push_str(&format!(
            "  \"{}:{}\" -- \"{}:{}\" [label=\"{}\"];\n",
            dot_escape(a.chain.as_str()),
            dot_escape(a.cluster.as_str()),
            dot_escape(b.chain.as_str()),
            dot_escape(b.cluster.as_str()),
            e.shared.len()
        ));
    }
    s.push_str("}\n");
    s
}
