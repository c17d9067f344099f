//! Per-sequence BD-rate tables grouped by test class.

use std::fmt::Write as _;

use serde::Serialize;

/// BD-rate of one sequence, in percent, per plane.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BdRow {
    pub class: String,
    pub sequence: String,
    pub y: f64,
    pub u: f64,
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BdTable {
    pub rows: Vec<BdRow>,
    /// Per-class means, in first-appearance order, with sequence `"Average"`.
    pub class_averages: Vec<BdRow>,
    /// Mean over all rows, with class `"Overall"` and sequence `"All"`.
    pub overall: BdRow,
}

fn mean_row(class: &str, sequence: &str, rows: &[&BdRow]) -> BdRow {
    let n = rows.len() as f64;
    BdRow {
        class: class.to_owned(),
        sequence: sequence.to_owned(),
        y: rows.iter().map(|r| r.y).sum::<f64>() / n,
        u: rows.iter().map(|r| r.u).sum::<f64>() / n,
        v: rows.iter().map(|r| r.v).sum::<f64>() / n,
    }
}

impl BdTable {
    /// `None` when `rows` is empty.
    pub fn new(rows: Vec<BdRow>) -> Option<BdTable> {
        if rows.is_empty() {
            return None;
        }
        let mut classes: Vec<&str> = Vec::new();
        for r in &rows {
            if !classes.contains(&r.class.as_str()) {
                classes.push(&r.class);
            }
        }
        let class_averages = classes
            .iter()
            .map(|c| {
                let members: Vec<&BdRow> = rows.iter().filter(|r| r.class == *c).collect();
                mean_row(c, "Average", &members)
            })
            .collect();
        let overall = mean_row("Overall", "All", &rows.iter().collect::<Vec<_>>());
        Some(BdTable {
            rows,
            class_averages,
            overall,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,sequence,y,u,v\n");
        for r in self
            .rows
            .iter()
            .chain(&self.class_averages)
            .chain([&self.overall])
        {
            let _ = writeln!(
                out,
                "{},{},{:.4},{:.4},{:.4}",
                r.class, r.sequence, r.y, r.u, r.v
            );
        }
        out
    }
}

/// Fixed-width text table: each class's sequences followed by its average,
/// then the overall mean. Values are percentages with one decimal.
pub fn render_bd_table(table: &BdTable) -> String {
    let name_w = table
        .rows
        .iter()
        .map(|r| r.sequence.len())
        .chain([8])
        .max()
        .unwrap_or(8);
    let class_w = table
        .rows
        .iter()
        .map(|r| r.class.len())
        .chain([7])
        .max()
        .unwrap_or(7);
    let mut out = String::new();
    let line = |out: &mut String, c: &str, s: &str, y: &str, u: &str, v: &str| {
        let _ = writeln!(out, "{c:<class_w$}  {s:<name_w$}  {y:>7}  {u:>7}  {v:>7}");
    };
    line(&mut out, "Class", "Sequence", "Y", "U", "V");
    let pct = |v: f64| format!("{v:.1}%");
    for avg in &table.class_averages {
        for r in table.rows.iter().filter(|r| r.class == avg.class) {
            line(
                &mut out,
                &r.class,
                &r.sequence,
                &pct(r.y),
                &pct(r.u),
                &pct(r.v),
            );
        }
        line(
            &mut out,
            &avg.class,
            &avg.sequence,
            &pct(avg.y),
            &pct(avg.u),
            &pct(avg.v),
        );
    }
    let o = &table.overall;
    line(
        &mut out,
        &o.class,
        &o.sequence,
        &pct(o.y),
        &pct(o.u),
        &pct(o.v),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(class: &str, seq: &str, y: f64) -> BdRow {
        BdRow {
            class: class.into(),
            sequence: seq.into(),
            y,
            u: y / 2.0,
            v: y / 4.0,
        }
    }

    #[test]
    fn averages_and_layout() {
        let t = BdTable::new(vec![
            row("A", "Traffic", -4.0),
            row("B", "Kimono", -6.0),
            row("A", "People", -2.0),
        ])
        .unwrap();
        assert_eq!(t.class_averages[0].y, -3.0);
        assert_eq!(t.class_averages[1].y, -6.0);
        assert_eq!(t.overall.y, -4.0);
        let text = render_bd_table(&t);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[0].starts_with("Class"));
        assert!(lines[3].contains("Average") && lines[3].contains("-3.0%"));
        assert!(lines[6].starts_with("Overall") && lines[6].contains("-4.0%"));
        assert_eq!(t.to_csv().lines().count(), 7);
        assert!(BdTable::new(vec![]).is_none());
    }
}
