//! Standalone SVG line charts of the harness CSVs.

use std::fmt::Write;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
}

/// The CSV shapes the harness writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Scores,
    Times,
    Sweep,
    Summary,
}

impl Schema {
    fn of(header: &[&str]) -> Option<Self> {
        let join = header.join(",");
        [Schema::Scores, Schema::Times, Schema::Sweep, Schema::Summary]
            .into_iter()
            .find(|s| s.header() == join)
    }

    fn header(self) -> &'static str {
        use dualsys::harness::*;
        match self {
            Schema::Scores => SCORES_HEADER,
            Schema::Times => TIMES_HEADER,
            Schema::Sweep => SWEEP_HEADER,
            Schema::Summary => SUMMARY_HEADER,
        }
    }

    /// The summary column a baseline line reads for this chart.
    fn baseline_column(self, y: &str) -> &str {
        match self {
            Schema::Scores => "avg_score",
            Schema::Times => "avg_time",
            _ => y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: Schema,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self, PlotError> {
        let mismatch = |m: &str| PlotError::SchemaMismatch(m.to_string());
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
        let mut records = rdr.records();
        let header = match records.next() {
            Some(Ok(h)) => h,
            Some(Err(e)) => return Err(mismatch(&e.to_string())),
            None => return Err(mismatch("empty CSV")),
        };
        let columns: Vec<String> = header.iter().map(str::to_string).collect();
        let schema = Schema::of(&header.iter().collect::<Vec<_>>())
            .ok_or_else(|| mismatch(&format!("unrecognised header {:?}", columns.join(","))))?;
        let rows = records
            .map(|r| {
                r.map(|r| r.iter().map(str::to_string).collect())
                    .map_err(|e| mismatch(&e.to_string()))
            })
            .collect::<Result<Vec<Vec<String>>, _>>()?;
        if rows.is_empty() {
            return Err(mismatch("no data rows"));
        }
        Ok(Table { schema, columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, PlotError> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| PlotError::SchemaMismatch(format!("no column {name:?}")))?;
        self.rows
            .iter()
            .map(|r| {
                r[i].parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| PlotError::SchemaMismatch(format!("{name} value {:?} is not a number", r[i])))
            })
            .collect()
    }
}

/// Draws one series, plus a dashed horizontal line per baseline summary.
/// `y` picks the sweep column and is ignored for sorted curves.
pub fn render(table: &Table, y: &str, baselines: &[Table]) -> Result<String, PlotError> {
    let (x_name, y_name) = match table.schema {
        Schema::Scores => ("rank", "score"),
        Schema::Times => ("rank", "time"),
        Schema::Sweep => ("param", y),
        Schema::Summary => {
            return Err(PlotError::SchemaMismatch(
                "a summary has no curve to draw; pass it as a baseline".into(),
            ))
        }
    };
    if y_name == "param" {
        return Err(PlotError::SchemaMismatch("y column cannot be the parameter".into()));
    }
    let xs = table.column(x_name)?;
    let ys = table.column(y_name)?;

    let mut refs = Vec::new();
    for b in baselines {
        if b.schema != Schema::Summary {
            return Err(PlotError::SchemaMismatch("baselines must be summary CSVs".into()));
        }
        let values = b.column(table.schema.baseline_column(y_name))?;
        for (row, v) in b.rows.iter().zip(values) {
            refs.push((row[0].clone(), v));
        }
    }

    let (w, h, m) = (640.0, 400.0, 60.0);
    let span = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = span(&mut xs.iter().copied());
    let (y0, y1) = span(&mut ys.iter().copied().chain(refs.iter().map(|r| r.1)));
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
        b = h - m,
        r = w - m
    );
    let _ = writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{b}" stroke="black"/>"#, b = h - m);
    for (v, x) in [(x0, m), (x1, w - m)] {
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, h - m + 16.0, fmt(v));
    }
    for (v, y) in [(y0, h - m), (y1, m)] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, m - 6.0, y + 4.0, fmt(v));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_name}</text>"#, w / 2.0, h - 16.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{y_name}</text>"#,
        h / 2.0,
        h / 2.0
    );

    let colours = ["#c0392b", "#2471a3", "#7d3c98", "#1e8449"];
    for (i, (label, v)) in refs.iter().enumerate() {
        let y = py(*v);
        let c = colours[i % colours.len()];
        let _ = writeln!(
            s,
            r#"<line x1="{m}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="{c}" stroke-dasharray="4 4"/>"#,
            w - m
        );
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" fill="{c}">{}</text>"#, w - m + 4.0, y + 4.0, escape(label));
    }

    let points: Vec<String> = xs.iter().zip(&ys).map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="black" stroke-width="1.5" points="{}"/>"#,
        points.join(" ")
    );
    s.push_str("</svg>\n");
    Ok(s)
}

fn fmt(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
