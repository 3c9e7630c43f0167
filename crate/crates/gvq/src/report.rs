//! Aligned text and CSV renderings of benchmark reports.

use std::fmt::Write;

use crate::bench::{BenchReport, SubsetStats, Sweep};

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

fn pair(s: &SubsetStats) -> [String; 2] {
    [cell(s.accuracy), cell(s.speedup)]
}

/// One row per method; accuracy and speedup for all features, then for the
/// matched subset.
pub fn render_table(report: &BenchReport) -> String {
    let header = ["Method", "Params", "Acc (all)", "Speedup (all)", "Acc (matched)", "Speedup (matched)", "Shared"];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for m in &report.methods {
        let [a, s] = pair(&m.all);
        let [ma, ms] = pair(&m.matched);
        rows.push(vec![m.method.to_uppercase(), m.params.describe(), a, s, ma, ms, cell(m.shared_word_fraction)]);
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "vocabulary {} x {}, graph k {}, {} frames, {} features ({} matched), hints: {:?}",
        report.vocabulary_size,
        report.dim,
        report.graph_k,
        report.frames,
        report.features,
        report.matched_features,
        report.hint_source
    );
    out.push_str(&align(&rows));
    out
}

pub fn render_sweep(sweep: &Sweep) -> String {
    let mut rows = vec![vec![
        "Method".to_string(),
        "Params".to_string(),
        "Accuracy".to_string(),
        "Speedup".to_string(),
        "Pareto".to_string(),
    ]];
    for p in &sweep.points {
        rows.push(vec![
            p.method.to_uppercase(),
            p.params.describe(),
            format!("{:.4}", p.accuracy),
            format!("{:.4}", p.speedup),
            if p.pareto { "*".into() } else { String::new() },
        ]);
    }
    align(&rows)
}

pub fn render_csv(report: &BenchReport) -> String {
    let mut out = String::from("method,params,subset,queries,accuracy,speedup,mean_evals,shared_word_fraction\n");
    for m in &report.methods {
        for (name, s) in [("all", &m.all), ("matched", &m.matched)] {
            let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
            let _ = writeln!(
                out,
                "{},\"{}\",{},{},{},{},{},{}",
                m.method,
                m.params.describe(),
                name,
                s.queries,
                opt(s.accuracy),
                opt(s.speedup),
                opt(s.mean_evals),
                opt(m.shared_word_fraction)
            );
        }
    }
    out
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row.iter().enumerate().map(|(c, s)| format!("{s:<w$}", w = widths[c])).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_line_up() {
        let rows = vec![
            vec!["a".to_string(), "bbb".to_string()],
            vec!["cccc".to_string(), "d".to_string()],
        ];
        assert_eq!(align(&rows), "a     bbb\n----  ---\ncccc  d\n");
    }
}
