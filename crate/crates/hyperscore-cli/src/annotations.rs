//! Annotation ingestion: CSV rows `subject_id,sample_id,dimension,score`
//! into a complete subjects x samples x dimensions matrix.

use std::collections::BTreeMap;
use std::path::Path;

use hyperscore_core::stats::{AnnotationMatrix, TrappingInfo};

use crate::error::{CliError, Result};

/// Parse the CSV. Dimension column order follows `dimension_names`; every
/// (subject, sample, dimension) cell must appear exactly once. Lines
/// starting with `#` and the header row are skipped.
pub fn parse_annotations(
    text: &str,
    dimension_names: &[String],
    trapping: Option<TrappingInfo>,
) -> Result<AnnotationMatrix> {
    let dim_index: BTreeMap<&str, usize> = dimension_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();

    let mut subjects: Vec<String> = Vec::new();
    let mut samples: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(usize, usize, usize), u8> = BTreeMap::new();
    let mut data_rows = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(CliError::Data(format!(
                "line {}: expected 4 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        if fields[0] == "subject_id" {
            continue; // header
        }
        let dim = *dim_index.get(fields[2]).ok_or_else(|| {
            CliError::Data(format!(
                "line {}: unknown dimension '{}'",
                lineno + 1,
                fields[2]
            ))
        })?;
        let score: u8 = fields[3].parse().map_err(|_| {
            CliError::Data(format!(
                "line {}: score '{}' is not an integer",
                lineno + 1,
                fields[3]
            ))
        })?;
        if score > 10 {
            return Err(CliError::Data(format!(
                "line {}: score {score} outside the 0..10 scale",
                lineno + 1
            )));
        }
        let s = index_of(&mut subjects, fields[0]);
        let n = index_of(&mut samples, fields[1]);
        if cells.insert((s, n, dim), score).is_some() {
            return Err(CliError::Data(format!(
                "line {}: duplicate cell ({}, {}, {})",
                lineno + 1,
                fields[0],
                fields[1],
                fields[2]
            )));
        }
        data_rows += 1;
    }
    if data_rows == 0 {
        return Err(CliError::Data("annotations file holds no data rows".into()));
    }

    let k = dimension_names.len();
    let want = subjects.len() * samples.len() * k;
    if data_rows != want {
        // report one concrete missing cell
        for (s, subject) in subjects.iter().enumerate() {
            for (n, sample) in samples.iter().enumerate() {
                for (d, dim) in dimension_names.iter().enumerate() {
                    if !cells.contains_key(&(s, n, d)) {
                        return Err(CliError::Data(format!(
                            "incomplete matrix: missing ({subject}, {sample}, {dim})"
                        )));
                    }
                }
            }
        }
    }

    let mut scores = vec![0u8; want];
    for ((s, n, d), v) in cells {
        scores[(s * samples.len() + n) * k + d] = v;
    }
    let matrix = AnnotationMatrix {
        subject_ids: subjects,
        sample_ids: samples,
        dimension_names: dimension_names.to_vec(),
        scores,
        trapping,
    };
    matrix.validate().map_err(CliError::from)?;
    Ok(matrix)
}

fn index_of(items: &mut Vec<String>, id: &str) -> usize {
    match items.iter().position(|s| s == id) {
        Some(i) => i,
        None => {
            items.push(id.to_string());
            items.len() - 1
        }
    }
}

pub fn read_annotations(
    path: &Path,
    dimension_names: &[String],
    trapping: Option<TrappingInfo>,
) -> Result<AnnotationMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_annotations(&text, dimension_names, trapping)
}
