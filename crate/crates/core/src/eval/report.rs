use std::fmt::Write as _;

use crate::data::SampleKind;
use crate::error::{Error, Result};
use crate::eval::{accuracy, far, frr, Evaluation};

pub const CSV_HEADER: &str = "model,accuracy,far,frr,far_simple,far_skilled,far_opposite";

const PAPER_SUFFIX: &str = " (paper-reported)";

/// One table line. Percentages; `None` where a value is not available.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub model: String,
    pub accuracy: Option<f64>,
    pub far: Option<f64>,
    pub frr: Option<f64>,
    pub far_simple: Option<f64>,
    pub far_skilled: Option<f64>,
    pub far_opposite: Option<f64>,
}

impl MetricsRow {
    pub fn from_evaluation(model: &str, eval: &Evaluation) -> Result<Self> {
        Ok(Self {
            model: model.to_string(),
            accuracy: Some(accuracy(&eval.counts)?),
            far: Some(far(&eval.counts)?),
            frr: Some(frr(&eval.counts)?),
            far_simple: eval.far_of(SampleKind::Simple),
            far_skilled: eval.far_of(SampleKind::Skilled),
            far_opposite: eval.far_of(SampleKind::Opposite),
        })
    }

    pub fn is_paper_reported(&self) -> bool {
        self.model.ends_with(PAPER_SUFFIX)
    }

    fn values(&self) -> [Option<f64>; 6] {
        [
            self.accuracy,
            self.far,
            self.frr,
            self.far_simple,
            self.far_skilled,
            self.far_opposite,
        ]
    }
}

/// Published figures for the CNN, the FCN and an SVM baseline.
pub fn paper_reference_rows() -> Vec<MetricsRow> {
    let row = |name: &str, acc: Option<f64>, far: f64, frr: f64| MetricsRow {
        model: format!("{name}{PAPER_SUFFIX}"),
        accuracy: acc,
        far: Some(far),
        frr: Some(frr),
        far_simple: None,
        far_skilled: None,
        far_opposite: None,
    };
    vec![
        row("CNN", Some(65.06), 37.83, 29.69),
        row("FCN", Some(76.71), 27.47, 15.72),
        row("SVM", None, 21.29, 39.27),
    ]
}

/// Rounds half away from zero after fixing the value at 6 decimals, so the
/// display agrees with the CSV digits.
pub fn round_half_up(value: f64, decimals: usize) -> String {
    let fixed = format!("{:.6}", value.abs());
    let micro: u64 = fixed.replace('.', "").parse().expect("formatted digits");
    let unit = 10u64.pow(6 - decimals.min(6) as u32);
    let rounded = (micro + unit / 2) / unit;
    let scale = 10u64.pow(decimals.min(6) as u32);
    let sign = if value < 0.0 && rounded != 0 { "-" } else { "" };
    if decimals == 0 {
        format!("{sign}{rounded}")
    } else {
        format!("{sign}{}.{:0width$}", rounded / scale, rounded % scale, width = decimals.min(6))
    }
}

/// Plain-text table, values to 2 decimals, `-` where unavailable.
pub fn render_text(rows: &[MetricsRow]) -> String {
    let headers = ["model", "accuracy", "FAR", "FRR", "FAR simple", "FAR skilled", "FAR opposite"];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            std::iter::once(r.model.clone())
                .chain(r.values().iter().map(|v| v.map_or("-".to_string(), |v| round_half_up(v, 2))))
                .collect()
        })
        .collect();
    let widths: Vec<usize> = (0..headers.len())
        .map(|i| cells.iter().map(|c| c[i].len()).chain([headers[i].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let mut line = |fields: &[String]| {
        let mut text = format!("{:<w$}", fields[0], w = widths[0]);
        for (f, w) in fields[1..].iter().zip(&widths[1..]) {
            let _ = write!(text, "  {f:>w$}");
        }
        out.push_str(text.trim_end());
        out.push('\n');
    };
    line(&headers.map(String::from));
    for c in &cells {
        line(c);
    }
    out
}

/// Comma-separated rows under [`CSV_HEADER`], values to 6 decimals, empty where unavailable.
pub fn render_csv(rows: &[MetricsRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADER.split(',')).expect("in-memory write");
    for r in rows {
        let mut record = vec![r.model.clone()];
        record.extend(r.values().iter().map(|v| v.map_or(String::new(), |v| format!("{v:.6}"))));
        writer.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("UTF-8 input")
}

/// Parses [`render_csv`] output. Lines starting with `#` are ignored.
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let bad = |reason: String| Error::Config(format!("metrics table: {reason}"));
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(bad(format!("expected header `{CSV_HEADER}`")));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let mut values = [None; 6];
        for (slot, field) in values.iter_mut().zip(record.iter().skip(1)) {
            if !field.is_empty() {
                *slot = Some(field.parse::<f64>().map_err(|e| bad(format!("`{field}`: {e}")))?);
            }
        }
        let [accuracy, far, frr, far_simple, far_skilled, far_opposite] = values;
        rows.push(MetricsRow {
            model: record[0].to_string(),
            accuracy,
            far,
            frr,
            far_simple,
            far_skilled,
            far_opposite,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(name: &str, v: f64) -> MetricsRow {
        MetricsRow {
            model: name.into(),
            accuracy: Some(v),
            far: Some(100.0 - v),
            frr: Some(v / 2.0),
            far_simple: Some(1.5),
            far_skilled: None,
            far_opposite: Some(0.0),
        }
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(round_half_up(27.465, 2), "27.47");
        assert_eq!(round_half_up(27.464999, 2), "27.46");
        assert_eq!(round_half_up(0.005, 2), "0.01");
        assert_eq!(round_half_up(100.0, 2), "100.00");
        assert_eq!(round_half_up(2.5, 0), "3");
        assert_eq!(round_half_up(100.0 / 3.0, 2), "33.33");
    }

    #[test]
    fn one_row_text_table() {
        let text = render_text(&[row("FCN", 76.705)]);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("model"));
        assert!(lines[1].contains("76.71"));
        assert!(lines[1].contains("23.30"));
        assert!(lines[1].contains(" -"));
    }

    #[test]
    fn reference_rows_are_flagged() {
        let mut rows = vec![row("FCN", 80.0)];
        rows.extend(paper_reference_rows());
        let text = render_text(&rows);
        assert!(text.contains("FCN (paper-reported)"));
        assert!(text.contains("76.71") && text.contains("27.47") && text.contains("15.72"));
        assert!(text.contains("65.06") && text.contains("37.83") && text.contains("29.69"));
        assert!(text.contains("21.29") && text.contains("39.27"));
        assert!(!rows[0].is_paper_reported());
        assert!(rows[1..].iter().all(MetricsRow::is_paper_reported));
    }

    #[test]
    fn csv_round_trip() {
        let mut rows = vec![row("CNN", 65.0625), row("FCN, small", 12.5)];
        rows.extend(paper_reference_rows());
        let text = render_csv(&rows);
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(parse_csv(&text).unwrap(), rows);
        let commented = format!("# seed = 1\n{text}");
        assert_eq!(parse_csv(&commented).unwrap(), rows);
        assert!(parse_csv("a,b\n1,2\n").is_err());
    }
}
