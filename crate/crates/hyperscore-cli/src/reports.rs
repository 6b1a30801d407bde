//! Output writers and readers. Every file starts with a header block
//! echoing the config hash and seed: a `#` comment line for CSV/JSONL, a
//! `meta` object for JSON documents. No timestamps anywhere, so identical
//! runs produce byte-identical files.

use std::path::Path;

use hyperscore_core::feature::DatasetManifest;
use hyperscore_core::stats::{CorrelationRow, SampleLabel, ScoreCell};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Meta {
    pub tool: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Meta {
    pub fn new(command: &str, config_hash: u64, seed: u64) -> Self {
        Self {
            tool: "hyperscore".into(),
            command: command.into(),
            config_hash: format!("{config_hash:016x}"),
            seed,
        }
    }

    pub fn comment_line(&self) -> String {
        format!(
            "# {} {} config_hash={} seed={}",
            self.tool, self.command, self.config_hash, self.seed
        )
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// JSON document with an embedded meta object.
pub fn write_json<T: serde::Serialize>(
    path: &Path,
    meta: &Meta,
    key: &str,
    data: &T,
) -> Result<()> {
    let doc = serde_json::json!({ "meta": meta, key: data });
    let mut text = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::Data(format!("encode {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

/// Read a JSON document written by [`write_json`], extracting `key`.
pub fn read_json_data<T: serde::de::DeserializeOwned>(path: &Path, key: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let data = doc
        .get(key)
        .ok_or_else(|| CliError::Data(format!("{}: missing '{key}' object", path.display())))?;
    serde_json::from_value(data.clone())
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_manifest(path: &Path, meta: &Meta, manifest: &DatasetManifest) -> Result<()> {
    write_json(path, meta, "manifest", manifest)
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let manifest: DatasetManifest = read_json_data(path, "manifest")?;
    manifest.validate().map_err(CliError::from)?;
    Ok(manifest)
}

/// Labels CSV: `sample_id,<dim>...,retained_subjects`.
pub fn write_labels(
    path: &Path,
    meta: &Meta,
    labels: &[SampleLabel],
    dimension_names: &[String],
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&meta.comment_line());
    out.push('\n');
    out.push_str("sample_id,");
    out.push_str(&dimension_names.join(","));
    out.push_str(",retained_subjects\n");
    for label in labels {
        out.push_str(&label.sample_id);
        for v in &label.mos {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{}\n", label.retained_subject_count));
    }
    write_text(path, &out)
}

pub fn read_labels(path: &Path, dimension_names: &[String]) -> Result<Vec<SampleLabel>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("sample_id,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dimension_names.len() + 2 {
            return Err(CliError::Data(format!(
                "{}:{}: expected {} fields, got {}",
                path.display(),
                lineno + 1,
                dimension_names.len() + 2,
                fields.len()
            )));
        }
        let mos: Vec<f64> = fields[1..=dimension_names.len()]
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    CliError::Data(format!(
                        "{}:{}: '{f}' is not a number",
                        path.display(),
                        lineno + 1
                    ))
                })
            })
            .collect::<Result<_>>()?;
        let retained: usize = fields[dimension_names.len() + 1].parse().map_err(|_| {
            CliError::Data(format!(
                "{}:{}: bad retained count",
                path.display(),
                lineno + 1
            ))
        })?;
        labels.push(SampleLabel {
            sample_id: fields[0].to_string(),
            mos,
            retained_subject_count: retained,
        });
    }
    if labels.is_empty() {
        return Err(CliError::Data(format!("{}: no label rows", path.display())));
    }
    Ok(labels)
}

/// Scores CSV: `sample_id,<dim>_raw...,<dim>_clamped...`.
pub fn write_scores(
    path: &Path,
    meta: &Meta,
    rows: &[(String, Vec<f32>)],
    dimension_names: &[String],
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&meta.comment_line());
    out.push('\n');
    out.push_str("sample_id");
    for d in dimension_names {
        out.push_str(&format!(",{d}_raw"));
    }
    for d in dimension_names {
        out.push_str(&format!(",{d}_clamped"));
    }
    out.push('\n');
    for (id, scores) in rows {
        out.push_str(id);
        for v in scores {
            out.push_str(&format!(",{v}"));
        }
        for v in scores {
            out.push_str(&format!(",{}", v.clamp(0.0, 10.0)));
        }
        out.push('\n');
    }
    write_text(path, &out)
}

/// Read the raw-score columns of a scores CSV.
pub fn read_scores(path: &Path, dim_count: usize) -> Result<Vec<(String, Vec<f64>)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("sample_id") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 1 + dim_count {
            return Err(CliError::Data(format!(
                "{}:{}: expected at least {} fields",
                path.display(),
                lineno + 1,
                1 + dim_count
            )));
        }
        let values: Vec<f64> = fields[1..=dim_count]
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    CliError::Data(format!(
                        "{}:{}: '{f}' is not a number",
                        path.display(),
                        lineno + 1
                    ))
                })
            })
            .collect::<Result<_>>()?;
        rows.push((fields[0].to_string(), values));
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no score rows", path.display())));
    }
    Ok(rows)
}

/// Correlation rows as CSV: `name,group,dimension,plcc,srcc,krcc,n`.
pub fn correlation_csv(meta: &Meta, rows: &[CorrelationRow]) -> String {
    let mut out = String::new();
    out.push_str(&meta.comment_line());
    out.push('\n');
    out.push_str("name,group,dimension,plcc,srcc,krcc,n\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.name,
            r.group.as_deref().unwrap_or(""),
            r.dimension,
            opt(r.plcc),
            opt(r.srcc),
            opt(r.krcc),
            r.sample_count
        ));
    }
    out
}

/// Score-table rows as CSV: `dimension,method,category,mean,rank,n`.
pub fn score_table_csv(meta: &Meta, rows: &[(String, ScoreCell)]) -> String {
    let mut out = String::new();
    out.push_str(&meta.comment_line());
    out.push('\n');
    out.push_str("dimension,method,category,mean,rank,n\n");
    for (dim, c) in rows {
        out.push_str(&format!(
            "{dim},{},{},{},{},{}\n",
            c.method_id, c.category, c.mean, c.rank, c.sample_count
        ));
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Line-delimited training log: a meta record followed by one record per
/// (fold, epoch).
pub fn training_log(
    meta: &Meta,
    records: &[(usize, hyperscore_core::train::EpochRecord<f32>)],
) -> Result<String> {
    let mut out = String::new();
    out.push_str(
        &serde_json::to_string(&serde_json::json!({ "meta": meta }))
            .map_err(|e| CliError::Data(e.to_string()))?,
    );
    out.push('\n');
    for (fold, record) in records {
        let mut value = serde_json::to_value(record).map_err(|e| CliError::Data(e.to_string()))?;
        value
            .as_object_mut()
            .expect("record is an object")
            .insert("fold".into(), serde_json::json!(fold));
        out.push_str(&serde_json::to_string(&value).map_err(|e| CliError::Data(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}
