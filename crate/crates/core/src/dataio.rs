//! Readers and writers for the tab-separated annotation files, the text
//! embedding format and JSON reports.
//!
//! Embedding files live at `<dir>/<lemma>/<period>.emb` (optionally gzipped as
//! `.emb.gz`). The first line is a header
//! `#dim=<d>\tcount=<n>\tlayer=<spec>\tmodel=<name>`, followed by one
//! `usage_id\t<d space-separated floats>` line per usage.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::EvalResult;
use crate::model::{ChangeScore, Clustering, EmbeddingSet, Judgment, UsageInstance, DUREL_MAX, DUREL_MIN};

/// Maps alternative column names found in some benchmark releases onto the
/// canonical names used by the loaders.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnAliases {
    aliases: BTreeMap<String, String>,
}

impl ColumnAliases {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, alias: &str, canonical: &str) -> Self {
        self.aliases.insert(alias.to_string(), canonical.to_string());
        self
    }

    pub fn canonical<'a>(&'a self, name: &'a str) -> &'a str {
        self.aliases.get(name).map_or(name, String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.aliases.is_empty()
    }
}

impl fmt::Display for ColumnAliases {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.aliases.iter().map(|(a, c)| format!("{a}={c}")).join(","))
    }
}

impl FromStr for ColumnAliases {
    type Err = Error;

    /// Comma-separated `alias=canonical` pairs.
    fn from_str(s: &str) -> Result<Self> {
        let mut out = ColumnAliases::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (alias, canonical) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("column alias `{part}` is not `alias=canonical`")))?;
            out = out.with(alias.trim(), canonical.trim());
        }
        Ok(out)
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// A header-indexed tab-separated table.
struct Table {
    path: PathBuf,
    columns: HashMap<String, usize>,
    rows: Vec<(usize, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, aliases: &ColumnAliases) -> Result<Table> {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .quoting(false)
            .from_reader(open(path)?);
        let headers = reader
            .headers()
            .map_err(|e| Error::format(path, e.to_string()))?
            .clone();
        let columns = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (aliases.canonical(h.trim()).to_string(), i))
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::parse(path, line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.iter().all(|f| f.trim().is_empty()) {
                continue;
            }
            rows.push((line, record));
        }
        Ok(Table {
            path: path.to_path_buf(),
            columns,
            rows,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| Error::format(&self.path, format!("missing column `{name}`")))
    }
}

fn parse_span(text: &str) -> Option<(usize, usize)> {
    let (a, b) = text.trim().split_once(':')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

pub fn load_uses(path: impl AsRef<Path>) -> Result<Vec<UsageInstance>> {
    load_uses_with(path, &ColumnAliases::new())
}

/// Reads a uses table with columns `lemma`, `identifier`, `context`,
/// `indexes_target_token` (`start:end` character offsets) and `grouping`.
pub fn load_uses_with(path: impl AsRef<Path>, aliases: &ColumnAliases) -> Result<Vec<UsageInstance>> {
    let path = path.as_ref();
    let table = Table::read(path, aliases)?;
    let lemma = table.column("lemma")?;
    let id = table.column("identifier")?;
    let context = table.column("context")?;
    let span = table.column("indexes_target_token")?;
    let period = table.column("grouping")?;
    table
        .rows
        .iter()
        .map(|(line, row)| {
            let field = |i: usize| row.get(i).unwrap_or("");
            let (start, end) = parse_span(field(span))
                .ok_or_else(|| Error::parse(path, *line, format!("offsets `{}` are not `start:end`", field(span))))?;
            let usage = UsageInstance {
                usage_id: field(id).to_string(),
                lemma: field(lemma).to_string(),
                context: field(context).to_string(),
                target_span: (start, end),
                period_id: field(period).to_string(),
            };
            if usage.usage_id.is_empty() {
                return Err(Error::parse(path, *line, "empty identifier"));
            }
            if !usage.span_is_valid() {
                return Err(Error::parse(
                    path,
                    *line,
                    format!(
                        "offsets {start}:{end} outside a context of {} characters",
                        usage.context.chars().count()
                    ),
                ));
            }
            Ok(usage)
        })
        .collect()
}

pub fn write_uses(path: impl AsRef<Path>, usages: &[UsageInstance]) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let mut body = String::from("lemma\tidentifier\tcontext\tindexes_target_token\tgrouping\n");
    for u in usages {
        if u.context.contains(['\t', '\n']) {
            return Err(Error::format(
                path,
                format!("context of `{}` contains a tab or newline", u.usage_id),
            ));
        }
        body.push_str(&format!(
            "{}\t{}\t{}\t{}:{}\t{}\n",
            u.lemma, u.usage_id, u.context, u.target_span.0, u.target_span.1, u.period_id
        ));
    }
    out.write_all(body.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Judgments plus the number of "cannot decide" rows that were dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedJudgments {
    pub judgments: Vec<Judgment>,
    pub skipped_zero: usize,
}

pub fn load_judgments(path: impl AsRef<Path>) -> Result<LoadedJudgments> {
    load_judgments_with(path, &ColumnAliases::new())
}

/// Reads columns `identifier1`, `identifier2`, `annotator`, `judgment`. A
/// judgment of 0 marks an undecidable pair and is skipped.
pub fn load_judgments_with(path: impl AsRef<Path>, aliases: &ColumnAliases) -> Result<LoadedJudgments> {
    let path = path.as_ref();
    let table = Table::read(path, aliases)?;
    let first = table.column("identifier1")?;
    let second = table.column("identifier2")?;
    let annotator = table.column("annotator")?;
    let value = table.column("judgment")?;
    let mut out = LoadedJudgments::default();
    for (line, row) in &table.rows {
        let field = |i: usize| row.get(i).unwrap_or("").trim();
        let v: f64 = field(value)
            .parse()
            .map_err(|_| Error::parse(path, *line, format!("judgment `{}` is not a number", field(value))))?;
        if v == 0.0 {
            out.skipped_zero += 1;
            continue;
        }
        if !(DUREL_MIN..=DUREL_MAX).contains(&v) {
            return Err(Error::parse(
                path,
                *line,
                format!("judgment {v} outside [{DUREL_MIN}, {DUREL_MAX}]"),
            ));
        }
        out.judgments
            .push(Judgment::new(field(first), field(second), field(annotator), v));
    }
    Ok(out)
}

pub fn write_judgments(path: impl AsRef<Path>, judgments: &[Judgment]) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let mut body = String::from("identifier1\tidentifier2\tannotator\tjudgment\n");
    for j in judgments {
        body.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            j.usage_id_1, j.usage_id_2, j.annotator, j.value
        ));
    }
    out.write_all(body.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// One parsed embedding file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub set: EmbeddingSet,
    pub model: String,
}

fn strip_embedding_suffix(name: &str) -> Option<&str> {
    name.strip_suffix(".emb.gz").or_else(|| name.strip_suffix(".emb"))
}

/// Parses one embedding file; the lemma is its directory name and the
/// period its file stem.
pub fn load_embedding_file(path: impl AsRef<Path>) -> Result<EmbeddingFile> {
    let path = path.as_ref();
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    let period = strip_embedding_suffix(name)
        .ok_or_else(|| Error::format(path, "embedding files must end in .emb or .emb.gz"))?;
    let lemma = path
        .parent()
        .and_then(|p| p.file_name())
        .and_then(|n| n.to_str())
        .unwrap_or("");
    let file = open(path)?;
    let reader: Box<dyn Read> = if name.ends_with(".gz") {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    parse_embeddings(path, BufReader::new(reader), lemma, period)
}

fn parse_embeddings(path: &Path, reader: impl BufRead, lemma: &str, period: &str) -> Result<EmbeddingFile> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::format(path, "empty file")),
    };
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(path, 1, "header must start with `#`"))?;
    let fields: HashMap<&str, &str> = header
        .split('\t')
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.trim(), v.trim()))
        .collect();
    let number = |key: &str| -> Result<usize> {
        let raw = fields
            .get(key)
            .ok_or_else(|| Error::parse(path, 1, format!("header lacks `{key}`")))?;
        raw.parse()
            .map_err(|_| Error::parse(path, 1, format!("header `{key}={raw}` is not a count")))
    };
    let dim = number("dim")?;
    let count = number("count")?;
    let layer = fields.get("layer").copied().unwrap_or("").to_string();
    let model = fields.get("model").copied().unwrap_or("").to_string();

    let mut ids = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    let mut seen = HashSet::with_capacity(count);
    for (index, line) in lines {
        let line_no = index + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, values) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, line_no, "expected `usage_id<TAB>values`"))?;
        let row = values
            .split_whitespace()
            .map(|tok| match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::parse(path, line_no, format!("`{tok}` is not a finite number"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != dim {
            return Err(Error::parse(
                path,
                line_no,
                format!("{} values in a file declaring dim={dim}", row.len()),
            ));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::parse(path, line_no, format!("duplicate usage id `{id}`")));
        }
        ids.push(id.to_string());
        vectors.push(row);
    }
    if vectors.len() != count {
        return Err(Error::format(
            path,
            format!("header declares count={count} but {} rows follow", vectors.len()),
        ));
    }
    let set =
        EmbeddingSet::new(lemma, period, dim, layer, ids, vectors).map_err(|e| Error::format(path, e.to_string()))?;
    Ok(EmbeddingFile { set, model })
}

/// Embedding sets keyed by `(lemma, period)`.
pub type EmbeddingStore = BTreeMap<(String, String), EmbeddingSet>;

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Loads every `<dir>/<lemma>/<period>.emb[.gz]` file.
pub fn load_embeddings(dir: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let dir = dir.as_ref();
    let mut store = EmbeddingStore::new();
    for lemma_dir in sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()) {
        for file in sorted_entries(&lemma_dir)? {
            let name = file.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if !file.is_file() || strip_embedding_suffix(name).is_none() {
                continue;
            }
            let set = load_embedding_file(&file)?.set;
            let key = (set.lemma.clone(), set.period_id.clone());
            if store.insert(key, set).is_some() {
                return Err(Error::format(&file, "period stored both compressed and uncompressed"));
            }
        }
    }
    Ok(store)
}

/// Writes one set; a path ending in `.gz` is gzip-compressed. Values use the
/// shortest representation that parses back to the same float.
pub fn write_embedding_file(path: impl AsRef<Path>, set: &EmbeddingSet, model: &str) -> Result<()> {
    let path = path.as_ref();
    let mut body = format!(
        "#dim={}\tcount={}\tlayer={}\tmodel={}\n",
        set.dim,
        set.len(),
        set.layer_spec,
        model
    );
    for (id, row) in set.rows() {
        body.push_str(id);
        body.push('\t');
        let values: Vec<String> = row.iter().map(f64::to_string).collect();
        body.push_str(&values.join(" "));
        body.push('\n');
    }
    let out = create(path)?;
    let result = if path.extension().is_some_and(|e| e == "gz") {
        let mut gz = GzEncoder::new(out, Compression::default());
        gz.write_all(body.as_bytes())
            .and_then(|_| gz.finish())
            .and_then(|mut w| w.flush())
    } else {
        let mut out = out;
        out.write_all(body.as_bytes()).and_then(|_| out.flush())
    };
    result.map_err(|e| Error::io(path, e))
}

/// Writes each set to `<dir>/<lemma>/<period>.emb`.
pub fn write_embeddings<'a>(
    dir: impl AsRef<Path>,
    sets: impl IntoIterator<Item = &'a EmbeddingSet>,
    model: &str,
) -> Result<()> {
    let dir = dir.as_ref();
    for set in sets {
        let path = dir.join(&set.lemma).join(format!("{}.emb", set.period_id));
        write_embedding_file(path, set, model)?;
    }
    Ok(())
}

/// Graded change score of one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldScore {
    pub lemma: String,
    pub graded: f64,
    /// Present when the file names the compared periods in extra columns.
    pub period_pair: Option<(String, String)>,
}

/// Reads header-less `lemma<TAB>score[<TAB>period1<TAB>period2]` rows.
pub fn load_gold(path: impl AsRef<Path>) -> Result<Vec<GoldScore>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 2 && fields.len() != 4 {
            return Err(Error::parse(path, line_no, "expected `lemma<TAB>score`"));
        }
        let graded = match fields[1].parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("score `{}` is not a finite number", fields[1]),
                ))
            }
        };
        if !seen.insert(fields[0].to_string()) {
            return Err(Error::parse(path, line_no, format!("duplicate lemma `{}`", fields[0])));
        }
        out.push(GoldScore {
            lemma: fields[0].to_string(),
            graded,
            period_pair: (fields.len() == 4).then(|| (fields[2].to_string(), fields[3].to_string())),
        });
    }
    Ok(out)
}

pub fn write_gold(path: impl AsRef<Path>, gold: &[GoldScore]) -> Result<()> {
    let path = path.as_ref();
    let mut body = String::new();
    for g in gold {
        body.push_str(&format!("{}\t{}", g.lemma, g.graded));
        if let Some((a, b)) = &g.period_pair {
            body.push_str(&format!("\t{a}\t{b}"));
        }
        body.push('\n');
    }
    let mut out = create(path)?;
    out.write_all(body.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads a sense clustering with columns `identifier` and `cluster`. Cluster
/// names are arbitrary strings, numbered by first appearance.
pub fn load_clusters(path: impl AsRef<Path>) -> Result<Clustering> {
    let path = path.as_ref();
    let table = Table::read(path, &ColumnAliases::new())?;
    let id = table.column("identifier")?;
    let cluster = table.column("cluster")?;
    let mut names: HashMap<String, usize> = HashMap::new();
    let mut items = Vec::with_capacity(table.rows.len());
    let mut labels = Vec::with_capacity(table.rows.len());
    for (_, row) in &table.rows {
        let name = row.get(cluster).unwrap_or("").trim().to_string();
        let next = names.len();
        labels.push(*names.entry(name).or_insert(next));
        items.push(row.get(id).unwrap_or("").trim().to_string());
    }
    Clustering::new(items, labels).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_clusters(path: impl AsRef<Path>, clustering: &Clustering) -> Result<()> {
    let path = path.as_ref();
    let mut body = String::from("identifier\tcluster\n");
    for (item, label) in clustering.items().iter().zip(clustering.labels()) {
        body.push_str(&format!("{item}\t{label}\n"));
    }
    let mut out = create(path)?;
    out.write_all(body.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Everything a run produced, serialized as one JSON document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    /// Effective configuration with defaults resolved.
    pub config: BTreeMap<String, serde_json::Value>,
    pub scores: Vec<ChangeScore>,
    pub evaluations: Vec<EvalResult>,
    pub warnings: Vec<String>,
    /// Command-specific sections such as per-target clusterings or layer sweeps.
    #[serde(default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            command: command.to_string(),
            ..Report::default()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut value = serde_json::to_value(self).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        if let serde_json::Value::Object(map) = &mut value {
            map.insert("target_count".into(), self.scores.len().into());
        }
        let mut text =
            serde_json::to_string_pretty(&sort_keys(value)).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }
}

fn sort_keys(value: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let sorted: BTreeMap<String, Value> = map.into_iter().map(|(k, v)| (k, sort_keys(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Writes the report as pretty-printed JSON with sorted keys.
pub fn write_report(report: &Report, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = report.to_json()?;
    let mut out = create(path)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_report(path: impl AsRef<Path>) -> Result<Report> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Method;
    use proptest::prelude::*;
    use tempfile::TempDir;

    fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
        let path = dir.path().join(name);
        if let Some(p) = path.parent() {
            fs::create_dir_all(p).unwrap();
        }
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn uses_examples() {
        let dir = TempDir::new().unwrap();
        let p = write(
            &dir,
            "uses.csv",
            "lemma\tidentifier\tcontext\tindexes_target_token\tgrouping\textra\nplane\tp1\tthe plane flew\t4:9\tC2\tx\n",
        );
        let uses = load_uses(&p).unwrap();
        assert_eq!(uses.len(), 1);
        assert_eq!(uses[0].lemma, "plane");
        assert_eq!(uses[0].target_span, (4, 9));
        assert_eq!(uses[0].period_id, "C2");
        assert_eq!(uses[0].target_text().unwrap(), "plane");

        let p = write(
            &dir,
            "nogroup.csv",
            "lemma\tidentifier\tcontext\tindexes_target_token\nplane\tp1\tthe plane\t4:9\n",
        );
        let err = load_uses(&p).unwrap_err().to_string();
        assert!(err.contains("grouping"), "{err}");

        let p = write(
            &dir,
            "bad.csv",
            "lemma\tidentifier\tcontext\tindexes_target_token\tgrouping\nplane\tp1\tthe plane flew\t9:4\tC2\n",
        );
        assert!(matches!(load_uses(&p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn uses_accept_quotes_and_aliases() {
        let dir = TempDir::new().unwrap();
        let p = write(
            &dir,
            "uses.csv",
            "lemma\tidentifier\tcontext\tindexes_target_token\tperiod\nw\tu\t\"quoted\" w\t9:10\t1\n",
        );
        assert!(load_uses(&p).is_err());
        let aliases: ColumnAliases = "period=grouping".parse().unwrap();
        let uses = load_uses_with(&p, &aliases).unwrap();
        assert_eq!(uses[0].context, "\"quoted\" w");
        assert_eq!(uses[0].target_text().unwrap(), "w");
        assert_eq!(aliases.to_string().parse::<ColumnAliases>().unwrap(), aliases);
    }

    #[test]
    fn judgment_examples() {
        let dir = TempDir::new().unwrap();
        let p = write(
            &dir,
            "j.csv",
            "identifier1\tidentifier2\tannotator\tjudgment\tcomment\nu1\tu2\tann3\t4\t\nu1\tu2\tann3\t0\tx\n",
        );
        let loaded = load_judgments(&p).unwrap();
        assert_eq!(loaded.judgments, vec![Judgment::new("u1", "u2", "ann3", 4.0)]);
        assert_eq!(loaded.skipped_zero, 1);

        let p = write(
            &dir,
            "k.csv",
            "identifier1\tidentifier2\tannotator\tjudgment\nu1\tu2\tann3\t7\n",
        );
        assert!(matches!(load_judgments(&p), Err(Error::Parse { .. })));
    }

    fn set(lemma: &str, period: &str, rows: Vec<Vec<f64>>) -> EmbeddingSet {
        let ids = (0..rows.len()).map(|i| format!("{lemma}-{period}-{i}")).collect();
        EmbeddingSet::new(lemma, period, rows[0].len(), "12", ids, rows).unwrap()
    }

    #[test]
    fn embedding_examples() {
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "w/C1.emb", "#dim=2\tcount=1\tlayer=12\tmodel=m\nu1\t1.0 0.0\n");
        let f = load_embedding_file(&p).unwrap();
        assert_eq!((f.set.len(), f.set.dim), (1, 2));
        assert_eq!(f.set.lemma, "w");
        assert_eq!(f.set.period_id, "C1");
        assert_eq!(f.model, "m");

        let p = write(&dir, "w/C2.emb", "#dim=2\tcount=2\tlayer=12\tmodel=m\nu1\t1.0 0.0\n");
        assert!(load_embedding_file(&p).unwrap_err().to_string().contains("count"));
        let p = write(&dir, "x/C1.emb", "#dim=2\tcount=1\tlayer=12\tmodel=m\nu1\t1 2 3\n");
        assert!(matches!(load_embedding_file(&p), Err(Error::Parse { line: 2, .. })));
        let p = write(&dir, "x/C2.emb", "#dim=2\tcount=1\tlayer=12\tmodel=m\nu1\tNaN 2\n");
        assert!(matches!(load_embedding_file(&p), Err(Error::Parse { .. })));
        let p = write(&dir, "x/C3.emb", "#dim=1\tcount=2\tlayer=12\tmodel=m\nu1\t1\nu1\t2\n");
        assert!(load_embedding_file(&p).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn embedding_directory_round_trip_with_gzip() {
        let dir = TempDir::new().unwrap();
        let a = set("plane", "C1", vec![vec![0.1, -2.5e-7], vec![3.0, 1e300]]);
        let b = set("plane", "C2", vec![vec![1.0 / 3.0, 2.0]]);
        write_embeddings(dir.path(), [&a], "m").unwrap();
        write_embedding_file(dir.path().join("plane/C2.emb.gz"), &b, "m").unwrap();
        let store = load_embeddings(dir.path()).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store[&("plane".to_string(), "C1".to_string())], a);
        assert_eq!(store[&("plane".to_string(), "C2".to_string())], b);
    }

    #[test]
    fn gold_examples() {
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "g.txt", "plane\t0.88\n");
        let g = load_gold(&p).unwrap();
        assert_eq!(g[0].lemma, "plane");
        assert_eq!(g[0].graded, 0.88);
        let p = write(&dir, "d.txt", "plane\t0.88\nplane\t0.1\n");
        assert!(load_gold(&p).unwrap_err().to_string().contains("duplicate"));
        let p = write(&dir, "n.txt", "plane\tNaN\n");
        assert!(matches!(load_gold(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn clusters_round_trip() {
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "c.csv", "identifier\tcluster\na\t-1\nb\t7\nc\t-1\n");
        let c = load_clusters(&p).unwrap();
        assert_eq!(c.labels(), &[0, 1, 0]);
        let q = dir.path().join("c2.csv");
        write_clusters(&q, &c).unwrap();
        assert_eq!(load_clusters(&q).unwrap(), c);
    }

    #[test]
    fn report_examples() {
        let dir = TempDir::new().unwrap();
        let mut r = Report::new("gcd");
        r.config.insert("method".into(), "apd".into());
        let p = dir.path().join("r.json");
        write_report(&r, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"target_count\": 0"));

        for lemma in ["b", "a"] {
            r.scores.push(
                ChangeScore::new(lemma, Method::Apd, 0.5, ("C1".into(), "C2".into()))
                    .with_detail("z", 1.0)
                    .with_detail("a", 2.0),
            );
        }
        write_report(&r, &p).unwrap();
        let first = fs::read_to_string(&p).unwrap();
        assert_eq!(first.matches("\"APD\"").count(), 2);
        write_report(&r, &p).unwrap();
        assert_eq!(first, fs::read_to_string(&p).unwrap());
        assert!(first.find("\"command\"").unwrap() < first.find("\"config\"").unwrap());
        assert!(first.find("\"a\": 2").unwrap() < first.find("\"z\": 1").unwrap());
        let back = load_report(&p).unwrap();
        assert_eq!(back.scores, r.scores);
    }

    fn id() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9_]{0,6}"
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn embeddings_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..8)) {
            let dir = TempDir::new().unwrap();
            let s = set("w", "C1", rows);
            let p = dir.path().join("w/C1.emb");
            write_embedding_file(&p, &s, "model").unwrap();
            let back = load_embedding_file(&p).unwrap();
            prop_assert_eq!(&back.set, &s);
            write_embedding_file(&p, &back.set, "model").unwrap();
            prop_assert_eq!(load_embedding_file(&p).unwrap().set, s);
        }

        #[test]
        fn judgments_round_trip(rows in prop::collection::vec((id(), id(), id(), 1.0f64..=4.0), 0..10)) {
            let dir = TempDir::new().unwrap();
            let js: Vec<Judgment> = rows.into_iter().map(|(a, b, c, v)| Judgment::new(a, b, c, v)).collect();
            let p = dir.path().join("j.csv");
            write_judgments(&p, &js).unwrap();
            prop_assert_eq!(load_judgments(&p).unwrap().judgments, js);
        }

        #[test]
        fn uses_round_trip(rows in prop::collection::vec((id(), "[ a-zé\"']{1,20}", id()), 1..8)) {
            let dir = TempDir::new().unwrap();
            let usages: Vec<UsageInstance> = rows
                .into_iter()
                .enumerate()
                .map(|(i, (lemma, context, period))| {
                    let len = context.chars().count();
                    UsageInstance { usage_id: format!("u{i}"), lemma, context, target_span: (0, len), period_id: period }
                })
                .collect();
            let p = dir.path().join("uses.csv");
            write_uses(&p, &usages).unwrap();
            prop_assert_eq!(load_uses(&p).unwrap(), usages);
        }

        #[test]
        fn gold_round_trip(scores in prop::collection::btree_map(id(), -10.0f64..10.0, 0..8)) {
            let dir = TempDir::new().unwrap();
            let gold: Vec<GoldScore> = scores.into_iter().map(|(lemma, graded)| GoldScore { lemma, graded, period_pair: None }).collect();
            let p = dir.path().join("g.txt");
            write_gold(&p, &gold).unwrap();
            prop_assert_eq!(load_gold(&p).unwrap(), gold);
        }
    }
}
