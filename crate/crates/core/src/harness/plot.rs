use crate::error::{Error, Result};
use crate::stats::quantile;

pub const PLOT_HEADER: &str = "group,x,y_median,y_q25,y_q75";

/// Aggregates a per-trial CSV into `group,x,y_median,y_q25,y_q75`.
///
/// Rows sharing `(group, x)` are collapsed to the median and quartiles of
/// `y`; rows with an empty or non-numeric `y` are skipped. Without
/// `group_by` every row is in group `all`. Groups keep first-seen order and
/// x values are sorted numerically within a group.
pub fn emit_plot_data(csv_text: &str, x: &str, y: &str, group_by: Option<&str>) -> Result<String> {
    let mut out = String::from(PLOT_HEADER);
    out.push('\n');
    if csv_text.trim().is_empty() {
        return Ok(out);
    }
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let xi = col(x)?;
    let yi = col(y)?;
    let gi = group_by.map(col).transpose()?;

    // (group, [(x label, x numeric, ys)])
    let mut groups: Vec<(String, Vec<(String, f64, Vec<f64>)>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let Some(yv) = rec.get(yi).and_then(|s| s.trim().parse::<f64>().ok()) else {
            continue;
        };
        if !yv.is_finite() {
            continue;
        }
        let g = gi.and_then(|i| rec.get(i)).unwrap_or("all").to_string();
        let xl = rec.get(xi).unwrap_or("").to_string();
        let gidx = match groups.iter().position(|(k, _)| *k == g) {
            Some(i) => i,
            None => {
                groups.push((g, Vec::new()));
                groups.len() - 1
            }
        };
        let xs = &mut groups[gidx].1;
        match xs.iter_mut().find(|(l, _, _)| *l == xl) {
            Some(e) => e.2.push(yv),
            None => {
                let xn = xl.trim().parse::<f64>().unwrap_or(f64::NAN);
                xs.push((xl, xn, vec![yv]));
            }
        }
    }
    for (g, mut xs) in groups {
        xs.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        for (xl, _, ys) in xs {
            let q = |p| quantile(&ys, p).map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{}\n", csv_field(&g), csv_field(&xl), q(0.5), q(0.25), q(0.75)));
        }
    }
    Ok(out)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_gives_header_only() {
        assert_eq!(emit_plot_data("", "x", "y", None).unwrap(), format!("{PLOT_HEADER}\n"));
        assert_eq!(emit_plot_data("x,y\n", "x", "y", None).unwrap(), format!("{PLOT_HEADER}\n"));
    }

    #[test]
    fn missing_column() {
        assert!(matches!(emit_plot_data("a,b\n1,2\n", "x", "b", None), Err(Error::MissingColumn(c)) if c == "x"));
        assert!(matches!(emit_plot_data("a,b\n1,2\n", "a", "b", Some("g")), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn duplicates_are_aggregated_by_median() {
        let csv = "g,x,y\na,10,1\na,2,5\na,10,3\na,10,2\nb,2,\nb,2,7\n";
        let out = emit_plot_data(csv, "x", "y", Some("g")).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[1], "a,2,5,5,5");
        assert_eq!(lines[2], "a,10,2,1.5,2.5");
        assert_eq!(lines[3], "b,2,7,7,7");
        assert_eq!(lines.len(), 4);
    }
}
