//! CSV and markdown emission. Metric values are stored internally in [0,1]
//! and scaled by 100 in every table so they read like the published
//! benchmark numbers.

use mlnc_core::backbones::{ModelConfig, NormKind};
use mlnc_core::metrics::MetricsReport;
use mlnc_core::trainer::{AblationTable, EfficiencyReport, RunResult};

pub const SCALE: f64 = 100.0;

/// Full-precision decimal so CSV cells survive a parse round-trip.
pub fn csv_num(v: f64) -> String {
    format!("{v:.9}")
}

fn display_num(v: f64) -> String {
    format!("{:.2}", v * SCALE)
}

pub fn norm_name(norm: NormKind) -> &'static str {
    match norm {
        NormKind::None => "none",
        NormKind::Batch => "batch",
        NormKind::Layer => "layer",
    }
}

/// Per-seed rows plus aggregate rows, seven metrics scaled by 100.
pub fn results_csv(result: &RunResult) -> String {
    let mut out = String::from("row,seed,");
    out.push_str(&MetricsReport::METRIC_NAMES.join(","));
    out.push_str(",best_val,selected_epoch,epochs_run\n");
    for s in &result.per_seed {
        out.push_str(&format!("seed,{},", s.seed));
        let cells: Vec<String> =
            s.test_metrics.values().iter().map(|&v| csv_num(v * SCALE)).collect();
        out.push_str(&cells.join(","));
        out.push_str(&format!(
            ",{},{},{}\n",
            csv_num(s.best_val_value * SCALE),
            s.selected_epoch,
            s.epochs_run
        ));
    }
    let mean: Vec<String> =
        result.aggregate.mean.values().iter().map(|&v| csv_num(v * SCALE)).collect();
    out.push_str(&format!("mean,,{},,,\n", mean.join(",")));
    if let Some(std) = &result.aggregate.std {
        let std: Vec<String> = std.iter().map(|&v| csv_num(v * SCALE)).collect();
        out.push_str(&format!("std,,{},,,\n", std.join(",")));
    }
    out
}

fn mean_std_cell(mean: f64, std: Option<f64>) -> String {
    match std {
        Some(s) => format!("{} ± {}", display_num(mean), display_num(s)),
        None => display_num(mean),
    }
}

/// One-row markdown table in the benchmark column order.
pub fn results_markdown(label: &str, result: &RunResult) -> String {
    let mut out = String::from(
        "| Model | Ranking ↓ | Hamming ↓ | Macro-AUC ↑ | Micro-AUC ↑ | Macro-AP ↑ | Micro-AP ↑ | LRAP ↑ |\n\
         |---|---|---|---|---|---|---|---|\n",
    );
    let means = result.aggregate.mean.values();
    let stds = result.aggregate.std.as_deref();
    let cells: Vec<String> = means
        .iter()
        .enumerate()
        .map(|(i, &m)| mean_std_cell(m, stds.map(|s| s[i])))
        .collect();
    out.push_str(&format!("| {} | {} |\n", label, cells.join(" | ")));
    out
}

const ABLATION_METRICS: [(&str, usize); 3] = [("Macro-AUC", 2), ("Macro-AP", 4), ("LRAP", 6)];

pub fn ablation_markdown(backbone: &str, table: &AblationTable) -> String {
    let mut out = format!(
        "| Variant ({backbone}) | Macro-AUC ↑ | Macro-AP ↑ | LRAP ↑ |\n|---|---|---|---|\n"
    );
    for (name, result) in &table.rows {
        let means = result.aggregate.mean.values();
        let stds = result.aggregate.std.as_deref();
        let cells: Vec<String> = ABLATION_METRICS
            .iter()
            .map(|&(_, i)| mean_std_cell(means[i], stds.map(|s| s[i])))
            .collect();
        out.push_str(&format!("| {} | {} |\n", name, cells.join(" | ")));
    }
    out
}

pub fn ablation_csv(table: &AblationTable) -> String {
    let mut out = String::from("variant,macro_auc_mean,macro_auc_std,macro_ap_mean,macro_ap_std,lrap_mean,lrap_std\n");
    for (name, result) in &table.rows {
        let means = result.aggregate.mean.values();
        let stds = result.aggregate.std.as_deref();
        let mut cells = vec![name.clone()];
        for &(_, i) in &ABLATION_METRICS {
            cells.push(csv_num(means[i] * SCALE));
            cells.push(stds.map(|s| csv_num(s[i] * SCALE)).unwrap_or_default());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn bench_markdown(reports: &[EfficiencyReport]) -> String {
    let mut out = String::from(
        "| Backbone | Train ms/epoch | Inference ms | Peak RSS (MiB) |\n|---|---|---|---|\n",
    );
    for r in reports {
        let rss = r
            .peak_rss_bytes
            .map(|b| format!("{:.1}", b as f64 / (1024.0 * 1024.0)))
            .unwrap_or_else(|| "n/a".to_string());
        out.push_str(&format!(
            "| {} | {:.3} | {:.3} | {} |\n",
            r.backbone, r.train_ms_per_epoch, r.inference_ms, rss
        ));
    }
    out
}

/// One grid point's outcome for the leaderboard.
pub struct GridRow {
    pub index: usize,
    pub model: ModelConfig,
    pub learning_rate: f64,
    /// Validation value of the selection metric; None for failed points.
    pub val_value: Option<f64>,
    pub error: Option<String>,
}

pub fn leaderboard_csv(metric: &str, rows: &[GridRow]) -> String {
    let mut out = format!(
        "point,learning_rate,hidden,dropout_rate,depth,norm,residual,status,val_{metric}\n"
    );
    for r in rows {
        let (status, value) = match (&r.val_value, &r.error) {
            (Some(v), _) => ("ok".to_string(), csv_num(v * SCALE)),
            (None, Some(e)) => (format!("failed: {}", e.replace(',', ";")), String::new()),
            (None, None) => ("failed".to_string(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.index,
            csv_num(r.learning_rate),
            r.model.hidden,
            csv_num(r.model.dropout_rate),
            r.model.depth,
            norm_name(r.model.norm),
            r.model.residual,
            status,
            value
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use mlnc_core::trainer::{aggregate, SeedResult};

    fn report(base: f64) -> MetricsReport {
        MetricsReport {
            ranking_loss: base,
            hamming_loss: base / 2.0,
            macro_auc: 1.0 - base,
            micro_auc: 1.0 - base / 2.0,
            macro_ap: 0.5 + base,
            micro_ap: 0.5 + base / 2.0,
            lrap: 0.25 + base,
            skipped_labels: Vec::new(),
            skipped_ranking_samples: 0,
            skipped_lrap_samples: 0,
        }
    }

    fn run_result(n: usize) -> RunResult {
        let per_seed = (0..n)
            .map(|i| SeedResult {
                seed: i as u64,
                test_metrics: report(0.1 + 0.01 * i as f64),
                best_val_value: 0.6,
                selected_epoch: 3,
                final_train_loss_mean: 0.4,
                epochs_run: 10,
                timing: None,
            })
            .collect();
        aggregate(per_seed)
    }

    #[test]
    fn csv_cells_parse_back_within_tolerance() {
        let result = run_result(3);
        let csv = results_csv(&result);
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("row,seed,ranking_loss"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        let want = result.per_seed[0].test_metrics.values();
        for (cell, w) in first[2..9].iter().zip(want) {
            let parsed: f64 = cell.parse().unwrap();
            assert!((parsed - w * SCALE).abs() < 1e-9);
        }
        assert!(csv.lines().any(|l| l.starts_with("mean,")));
        assert!(csv.lines().any(|l| l.starts_with("std,")));
    }

    #[test]
    fn single_seed_csv_has_no_std_row() {
        let csv = results_csv(&run_result(1));
        assert!(!csv.contains("\nstd"));
    }

    #[test]
    fn markdown_uses_scaled_mean_pm_std() {
        let result = run_result(2);
        let md = results_markdown("gcn", &result);
        assert!(md.contains("Macro-AUC"));
        let mean = result.aggregate.mean.ranking_loss * SCALE;
        assert!(md.contains(&format!("{mean:.2} ±")));
    }

    #[test]
    fn ablation_tables_agree() {
        let table = AblationTable {
            rows: mlnc_core::trainer::ABLATION_VARIANTS
                .iter()
                .map(|v| (v.to_string(), run_result(2)))
                .collect(),
        };
        let md = ablation_markdown("gcn", &table);
        let csv = ablation_csv(&table);
        assert_eq!(md.lines().count(), 2 + 5);
        assert_eq!(csv.lines().count(), 1 + 5);
        for v in mlnc_core::trainer::ABLATION_VARIANTS {
            assert!(md.contains(v));
            assert!(csv.contains(v));
        }
        // same underlying number in both renderings
        let macro_auc = table.rows[0].1.aggregate.mean.macro_auc * SCALE;
        assert!(md.contains(&format!("{macro_auc:.2}")));
        let cell: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert!((cell - macro_auc).abs() < 1e-9);
    }

    #[test]
    fn leaderboard_keeps_failures_visible() {
        let model: ModelConfig = serde_json::from_str(
            r#"{"backbone":"gcn","depth":2,"hidden":8,"dropout_rate":0.0,
                "norm":"none","residual":false,"seed":0}"#,
        )
        .unwrap();
        let rows = vec![
            GridRow { index: 0, model: model.clone(), learning_rate: 0.01, val_value: Some(0.7), error: None },
            GridRow { index: 1, model, learning_rate: 0.05, val_value: None, error: Some("diverged, badly".into()) },
        ];
        let csv = leaderboard_csv("micro_ap", &rows);
        assert!(csv.starts_with("point,learning_rate"));
        assert!(csv.contains("failed: diverged; badly"));
        assert_eq!(csv.lines().count(), 3);
    }
}
