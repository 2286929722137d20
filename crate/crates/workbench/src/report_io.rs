//! Metrics reports as JSON and as flat CSV rows
//! `task,group,metric,epoch,split,value`.

use mfh_core::engine::{MetricKind, MetricsReport};

use crate::error::{Error, Result};

pub fn report_to_json(report: &MetricsReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("reports always serialize");
    text.push('\n');
    text
}

pub fn report_from_json(text: &str) -> Result<MetricsReport> {
    serde_json::from_str(text).map_err(Error::json("metrics report"))
}

pub fn metric_name(kind: MetricKind) -> &'static str {
    match kind {
        MetricKind::Auc => "auc",
        MetricKind::Mse => "mse",
    }
}

/// One row per task cell, evaluation and split. Undefined values (a split
/// without samples of one class, say) are left empty.
pub fn report_to_csv(report: &MetricsReport) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>, rec: &[&str]| w.write_record(rec).expect("writing to memory");
    write(&mut w, &["task", "group", "metric", "epoch", "split", "value"]);
    for t in &report.tasks {
        for (k, epoch) in report.epochs.iter().enumerate() {
            let epoch = epoch.to_string();
            for (split, series) in [("train", &t.train), ("test", &t.test)] {
                let value = series[k].map(|v| v.to_string()).unwrap_or_default();
                write(&mut w, &[&t.name, &t.group, metric_name(t.metric), &epoch, split, &value]);
            }
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8")
}
