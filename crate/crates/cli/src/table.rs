//! The fixed-`p` comparison table: one row per (scheme, N).

use anyhow::Result;
use codedmm::analysis::build_comparison_table;
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    #[serde(rename = "N")]
    pub workers: usize,
    pub scheme: String,
    pub p: usize,
    pub k: Option<usize>,
    pub gamma: Option<f64>,
    pub mu_master: Option<f64>,
    pub mu_worker: Option<f64>,
    pub rho: Option<f64>,
    pub feasible: bool,
    /// `false` cells print as N/A.
    pub applicable: bool,
}

pub fn table_rows(config: &ExperimentConfig) -> Result<Vec<TableRow>> {
    config.validate()?;
    let entries = build_comparison_table(
        &config.workers,
        config.partitions,
        config.k_dim,
        config.l_dim,
        config.phi,
        config.lambda_support[0],
    )?;
    Ok(entries
        .into_iter()
        .map(|e| TableRow {
            workers: e.workers,
            scheme: e.choice.scheme.name().to_string(),
            p: e.choice.partitions,
            k: e.row.map(|r| r.recovery_threshold),
            gamma: e.row.map(|r| r.computing_load),
            mu_master: e.row.map(|r| r.storage_master),
            mu_worker: e.row.map(|r| r.storage_worker),
            rho: e.row.map(|r| r.success_probability),
            feasible: e.feasible,
            applicable: e.applicable,
        })
        .collect())
}
