//! Report tables: per-method x per-category score means with row ranks,
//! and per-dimension correlation tables (optionally grouped by category or
//! method).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::feature::DatasetManifest;
use crate::stats::{krcc, logistic_map, plcc, srcc, SampleLabel};

/// One cell of the method x category mean table. `rank` orders categories
/// within the method's row, rank 1 = highest mean; ties share the minimum
/// rank.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ScoreCell {
    pub method_id: String,
    pub category: String,
    pub mean: f64,
    pub rank: usize,
    pub sample_count: usize,
}

/// Mean score of dimension `dim` per (method, category), with ranks within
/// each method row. Rows come out sorted by method then category.
pub fn method_category_table(
    labels: &[SampleLabel],
    manifest: &DatasetManifest,
    dim: usize,
) -> Result<Vec<ScoreCell>> {
    manifest.validate()?;
    if dim >= manifest.dimension_names.len() {
        return Err(Error::Argument(format!(
            "dimension index {dim} out of range"
        )));
    }
    let label_by_id: BTreeMap<&str, &SampleLabel> =
        labels.iter().map(|l| (l.sample_id.as_str(), l)).collect();

    // (method, category) -> (sum, count)
    let mut cells: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    let mut categories: BTreeSet<String> = BTreeSet::new();
    for entry in &manifest.samples {
        let Some(label) = label_by_id.get(entry.sample_id.as_str()) else {
            continue; // unlabeled samples (e.g. trapping stimuli) are skipped
        };
        let category = manifest
            .prompt_categories
            .get(&entry.prompt_id)
            .ok_or_else(|| Error::Data(format!("unknown category for {}", entry.prompt_id)))?;
        if label.mos.len() <= dim {
            return Err(Error::Data(format!(
                "label {} has {} dimensions",
                label.sample_id,
                label.mos.len()
            )));
        }
        categories.insert(category.clone());
        let cell = cells
            .entry((entry.method_id.clone(), category.clone()))
            .or_insert((0.0, 0));
        cell.0 += label.mos[dim];
        cell.1 += 1;
    }
    if cells.is_empty() {
        return Err(Error::Data("no labeled samples to tabulate".into()));
    }

    let methods: BTreeSet<String> = cells.keys().map(|(m, _)| m.clone()).collect();
    let mut rows = Vec::new();
    for method in &methods {
        let mut row: Vec<ScoreCell> = categories
            .iter()
            .filter_map(|cat| {
                cells
                    .get(&(method.clone(), cat.clone()))
                    .map(|(sum, n)| ScoreCell {
                        method_id: method.clone(),
                        category: cat.clone(),
                        mean: sum / *n as f64,
                        rank: 0,
                        sample_count: *n,
                    })
            })
            .collect();
        // min-rank for ties, descending by mean
        for i in 0..row.len() {
            let better = row.iter().filter(|c| c.mean > row[i].mean).count();
            row[i].rank = better + 1;
        }
        rows.extend(row);
    }
    Ok(rows)
}

/// Per-dimension correlation row. `group` is `None` for the overall table
/// and carries the category or method for grouped tables. Undefined
/// coefficients (degenerate variance) are `None`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct CorrelationRow {
    pub name: String,
    pub group: Option<String>,
    pub dimension: String,
    pub plcc: Option<f64>,
    pub srcc: Option<f64>,
    pub krcc: Option<f64>,
    pub sample_count: usize,
}

/// Correlations between one metric's predictions (`N x K` or `N x 1`,
/// broadcast over dimensions) and labels (`N x K`). Set `logistic` to map
/// predictions through the five-parameter fit before PLCC.
pub fn correlation_table(
    name: &str,
    preds: &[Vec<f64>],
    labels: &[Vec<f64>],
    dimension_names: &[String],
    logistic: bool,
) -> Result<Vec<CorrelationRow>> {
    if preds.len() != labels.len() || preds.is_empty() {
        return Err(Error::Dimension {
            context: "correlation table rows",
            expected: labels.len(),
            got: preds.len(),
        });
    }
    let k = dimension_names.len();
    let mut rows = Vec::with_capacity(k);
    for dim in 0..k {
        let x: Vec<f64> = preds
            .iter()
            .map(|p| if p.len() == 1 { p[0] } else { p[dim] })
            .collect();
        let y: Vec<f64> = labels.iter().map(|l| l[dim]).collect();
        rows.push(correlation_row(
            name,
            None,
            &dimension_names[dim],
            &x,
            &y,
            logistic,
        ));
    }
    Ok(rows)
}

fn correlation_row(
    name: &str,
    group: Option<String>,
    dimension: &str,
    x: &[f64],
    y: &[f64],
    logistic: bool,
) -> CorrelationRow {
    let plcc_input: Vec<f64> = if logistic {
        logistic_map(x, y)
            .map(|f| f.mapped)
            .unwrap_or_else(|_| x.to_vec())
    } else {
        x.to_vec()
    };
    CorrelationRow {
        name: String::from(name),
        group,
        dimension: String::from(dimension),
        plcc: plcc(&plcc_input, y).ok(),
        srcc: srcc(x, y).ok(),
        krcc: krcc(x, y).ok(),
        sample_count: x.len(),
    }
}

/// Grouped correlation table: one block of per-dimension rows per group
/// (category or generative method), as in the per-category and per-method
/// report tables. `groups` maps sample index to group name.
pub fn grouped_correlation_table(
    name: &str,
    preds: &[Vec<f64>],
    labels: &[Vec<f64>],
    dimension_names: &[String],
    groups: &[String],
    logistic: bool,
) -> Result<Vec<CorrelationRow>> {
    if groups.len() != preds.len() || preds.len() != labels.len() {
        return Err(Error::Dimension {
            context: "grouped correlation rows",
            expected: preds.len(),
            got: groups.len(),
        });
    }
    let names: BTreeSet<&String> = groups.iter().collect();
    let mut rows = Vec::new();
    for group in names {
        let idx: Vec<usize> = (0..groups.len()).filter(|&i| &groups[i] == group).collect();
        for dim in 0..dimension_names.len() {
            let x: Vec<f64> = idx
                .iter()
                .map(|&i| {
                    if preds[i].len() == 1 {
                        preds[i][0]
                    } else {
                        preds[i][dim]
                    }
                })
                .collect();
            let y: Vec<f64> = idx.iter().map(|&i| labels[i][dim]).collect();
            rows.push(correlation_row(
                name,
                Some(group.clone()),
                &dimension_names[dim],
                &x,
                &y,
                logistic,
            ));
        }
    }
    Ok(rows)
}
