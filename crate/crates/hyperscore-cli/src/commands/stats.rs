//! `stats`: correlation reports (overall, per-category, per-method) and
//! the per-method x per-category MOS table, from a predictions file or the
//! zero-shot cosine baseline.

use std::collections::BTreeMap;
use std::path::Path;

use hyperscore_core::stats::{
    baseline_cosine_score, correlation_table, grouped_correlation_table, method_category_table,
    CorrelationRow,
};

use crate::config::RunConfig;
use crate::container;
use crate::error::{CliError, Result};
use crate::reports::{
    correlation_csv, read_labels, read_manifest, read_scores, score_table_csv, write_json,
    write_text, Meta,
};

pub fn run(config: &RunConfig, config_hash: u64) -> Result<()> {
    let manifest = read_manifest(Path::new(&config.paths.manifest))?;
    let labels = read_labels(Path::new(&config.paths.labels), &manifest.dimension_names)?;
    let label_by_id: BTreeMap<&str, &hyperscore_core::stats::SampleLabel> =
        labels.iter().map(|l| (l.sample_id.as_str(), l)).collect();

    // Predictions: either a scores file or the cosine baseline over the
    // feature containers (one column, broadcast over dimensions).
    let source = config.stats.source.as_str();
    let pred_by_id: BTreeMap<String, Vec<f64>> = match source {
        "file" => read_scores(Path::new(&config.paths.predictions), manifest.dim_count())?
            .into_iter()
            .collect(),
        "baseline" => {
            let mut preds = BTreeMap::new();
            for entry in &manifest.samples {
                if !label_by_id.contains_key(entry.sample_id.as_str()) {
                    continue;
                }
                let path = Path::new(&config.paths.feature_dir).join(&entry.feature_path);
                let bundle = container::read_bundle(&path, Some(&entry.sample_id))?;
                let score = baseline_cosine_score(&bundle).map_err(CliError::from)?;
                preds.insert(entry.sample_id.clone(), vec![score]);
            }
            preds
        }
        other => {
            return Err(CliError::Config(format!(
                "stats.source must be 'file' or 'baseline', got '{other}'"
            )))
        }
    };

    // Align on samples that have a label, a prediction, and manifest
    // metadata, in manifest order.
    let mut preds = Vec::new();
    let mut mos = Vec::new();
    let mut categories = Vec::new();
    let mut methods = Vec::new();
    for entry in &manifest.samples {
        let (Some(label), Some(pred)) = (
            label_by_id.get(entry.sample_id.as_str()),
            pred_by_id.get(&entry.sample_id),
        ) else {
            continue;
        };
        preds.push(pred.clone());
        mos.push(label.mos.clone());
        categories.push(manifest.prompt_categories[&entry.prompt_id].clone());
        methods.push(entry.method_id.clone());
    }
    if preds.is_empty() {
        return Err(CliError::Data(
            "no samples have both a label and a prediction".into(),
        ));
    }

    let logistic = config.stats.logistic;
    let mut rows: Vec<CorrelationRow> =
        correlation_table(source, &preds, &mos, &manifest.dimension_names, logistic)
            .map_err(CliError::from)?;
    rows.extend(
        grouped_correlation_table(
            source,
            &preds,
            &mos,
            &manifest.dimension_names,
            &categories,
            logistic,
        )
        .map_err(CliError::from)?,
    );
    rows.extend(
        grouped_correlation_table(
            source,
            &preds,
            &mos,
            &manifest.dimension_names,
            &methods,
            logistic,
        )
        .map_err(CliError::from)?,
    );

    let meta = Meta::new("stats", config_hash, config.seed);
    let corr_csv_path = Path::new(&config.paths.out_dir).join("correlations.csv");
    write_text(&corr_csv_path, &correlation_csv(&meta, &rows))?;
    write_json(
        &Path::new(&config.paths.out_dir).join("correlations.json"),
        &meta,
        "correlations",
        &rows,
    )?;

    let mut table_rows = Vec::new();
    for (dim, name) in manifest.dimension_names.iter().enumerate() {
        let cells = method_category_table(&labels, &manifest, dim).map_err(CliError::from)?;
        table_rows.extend(cells.into_iter().map(|c| (name.clone(), c)));
    }
    let table_csv_path = Path::new(&config.paths.out_dir).join("score_table.csv");
    write_text(&table_csv_path, &score_table_csv(&meta, &table_rows))?;
    write_json(
        &Path::new(&config.paths.out_dir).join("score_table.json"),
        &meta,
        "score_table",
        &table_rows
            .iter()
            .map(|(dim, c)| serde_json::json!({ "dimension": dim, "cell": c }))
            .collect::<Vec<_>>(),
    )?;

    println!(
        "stats: {} samples, source {source}; correlations {} table {}",
        preds.len(),
        corr_csv_path.display(),
        table_csv_path.display()
    );
    for row in rows.iter().filter(|r| r.group.is_none()) {
        println!(
            "stats: {}: PLCC {} SRCC {} KRCC {}",
            row.dimension,
            fmt(row.plcc),
            fmt(row.srcc),
            fmt(row.krcc)
        );
    }
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}
