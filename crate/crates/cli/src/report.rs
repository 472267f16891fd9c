//! Ranking report over a strategy-comparison results CSV.
//!
//! Groups rows by (feature, classifier), ranks strategies by mean pAUC
//! within each condition (rank 1 best; ties share the smallest rank), and
//! prints per-strategy average ranks across conditions.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
pub struct ResultRow {
    pub feature: String,
    pub classifier: String,
    pub strategy_index: u8,
    pub strategy: String,
    pub mean_pauc: f64,
    pub config_hash: String,
}

pub struct Report {
    /// (condition label, ranked (rank, strategy_index, strategy, mean_pauc)).
    pub conditions: Vec<(String, Vec<(usize, u8, String, f64)>)>,
    /// (strategy_index, strategy, average rank) sorted by average rank.
    pub average_ranks: Vec<(u8, String, f64)>,
}

pub fn read_rows(path: &Path) -> anyhow::Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening results {}", path.display()))?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        let row: ResultRow = row.context("format: malformed results row")?;
        rows.push(row);
    }
    Ok(rows)
}

/// Ranks within one condition: sorted by descending pAUC; equal values
/// share the smallest rank of their tie group.
pub fn rank_descending(values: &[(u8, String, f64)]) -> Vec<(usize, u8, String, f64)> {
    let mut sorted: Vec<(u8, String, f64)> = values.to_vec();
    sorted.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    let mut out = Vec::with_capacity(sorted.len());
    let mut rank = 1;
    for (i, (index, name, pauc)) in sorted.iter().enumerate() {
        if i > 0 && sorted[i - 1].2 != *pauc {
            rank = i + 1;
        }
        out.push((rank, *index, name.clone(), *pauc));
    }
    out
}

pub fn build_report(rows: &[ResultRow]) -> anyhow::Result<Report> {
    if rows.is_empty() {
        bail!("format: results file holds no data rows");
    }
    let first_hash = &rows[0].config_hash;
    if rows.iter().any(|r| &r.config_hash != first_hash) {
        bail!("refusing mixed inputs: results rows carry different config hashes");
    }

    let mut by_condition: BTreeMap<String, Vec<(u8, String, f64)>> = BTreeMap::new();
    for row in rows {
        by_condition
            .entry(format!("{}+{}", row.feature, row.classifier))
            .or_default()
            .push((row.strategy_index, row.strategy.clone(), row.mean_pauc));
    }

    let mut conditions = Vec::new();
    let mut rank_sums: BTreeMap<(u8, String), (f64, usize)> = BTreeMap::new();
    for (label, values) in by_condition {
        let ranked = rank_descending(&values);
        for (rank, index, name, _) in &ranked {
            let entry = rank_sums.entry((*index, name.clone())).or_insert((0.0, 0));
            entry.0 += *rank as f64;
            entry.1 += 1;
        }
        conditions.push((label, ranked));
    }

    let mut average_ranks: Vec<(u8, String, f64)> = rank_sums
        .into_iter()
        .map(|((index, name), (sum, n))| (index, name, sum / n as f64))
        .collect();
    average_ranks.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));

    Ok(Report {
        conditions,
        average_ranks,
    })
}

pub fn print_report(report: &Report) {
    for (label, ranked) in &report.conditions {
        println!("condition {label}:");
        for (rank, index, name, pauc) in ranked {
            println!("  rank {rank:2}  s{index:02} {name:24} mean pAUC {pauc:.4}");
        }
    }
    println!("average rank across conditions:");
    for (index, name, avg) in &report.average_ranks {
        println!("  {avg:5.2}  s{index:02} {name}");
    }
}
