//! Embedding export and cluster-quality metrics.

use serde::Serialize;

use super::model::FeatureEmbeddingModel;
use crate::{Error, Result};

/// One exported embedding row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingRow {
    pub feature_index: usize,
    pub group_label: u8,
    pub coords: Vec<f64>,
}

/// Copies the embedding table out with its group labels, one row per
/// feature index.
pub fn export_embeddings(
    model: &FeatureEmbeddingModel,
    group_labels: &[u8],
) -> Result<Vec<EmbeddingRow>> {
    if group_labels.len() != model.feature_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} group labels for {} features",
            group_labels.len(),
            model.feature_count()
        )));
    }
    Ok(model
        .embedding_table()
        .iter()
        .enumerate()
        .map(|(i, row)| EmbeddingRow {
            feature_index: i,
            group_label: group_labels[i],
            coords: row.clone(),
        })
        .collect())
}

/// CSV text for exported rows: `feature_index,group_label,e1,...,e{d}`.
pub fn embeddings_to_csv(rows: &[EmbeddingRow]) -> String {
    let d = rows.first().map_or(0, |r| r.coords.len());
    let mut out = String::from("feature_index,group_label");
    for j in 1..=d {
        out.push_str(&format!(",e{j}"));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{},{}", row.feature_index, row.group_label));
        for c in &row.coords {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
    }
    out
}

/// Cluster quality of an embedding table under its group labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterMetrics {
    /// Mean Euclidean distance over same-group pairs.
    pub mean_within_group_dist: f64,
    /// Mean Euclidean distance over different-group pairs.
    pub mean_between_group_dist: f64,
    /// Mean silhouette over all points, in [-1, 1]; 0/0 cases count as 0.
    pub silhouette: f64,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Computes within/between distances and the standard per-point silhouette,
/// averaged over all points. Needs at least two distinct labels.
pub fn embedding_cluster_metrics(
    table: &[Vec<f64>],
    labels: &[u8],
) -> Result<ClusterMetrics> {
    if table.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} rows vs {} labels",
            table.len(),
            labels.len()
        )));
    }
    let mut distinct: Vec<u8> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Contract(
            "cluster metrics need at least two groups".into(),
        ));
    }

    let n = table.len();
    let mut within_sum = 0.0;
    let mut within_cnt = 0usize;
    let mut between_sum = 0.0;
    let mut between_cnt = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(&table[i], &table[j]);
            if labels[i] == labels[j] {
                within_sum += d;
                within_cnt += 1;
            } else {
                between_sum += d;
                between_cnt += 1;
            }
        }
    }

    let mut silhouette_sum = 0.0;
    for i in 0..n {
        let own = labels[i];
        let own_size = labels.iter().filter(|&&l| l == own).count();
        if own_size < 2 {
            // Singleton cluster: silhouette contribution 0 by convention.
            continue;
        }
        let a = table
            .iter()
            .zip(labels)
            .enumerate()
            .filter(|(j, (_, &l))| *j != i && l == own)
            .map(|(_, (row, _))| euclidean(&table[i], row))
            .sum::<f64>()
            / (own_size - 1) as f64;
        let b = distinct
            .iter()
            .filter(|&&l| l != own)
            .map(|&l| {
                let members: Vec<&Vec<f64>> = table
                    .iter()
                    .zip(labels)
                    .filter(|(_, &m)| m == l)
                    .map(|(row, _)| row)
                    .collect();
                members.iter().map(|row| euclidean(&table[i], row)).sum::<f64>()
                    / members.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            silhouette_sum += (b - a) / denom;
        }
    }

    Ok(ClusterMetrics {
        mean_within_group_dist: if within_cnt > 0 { within_sum / within_cnt as f64 } else { 0.0 },
        mean_between_group_dist: between_sum / between_cnt as f64,
        silhouette: silhouette_sum / n as f64,
    })
}
