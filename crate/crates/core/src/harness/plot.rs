//! Turns result CSVs into gnuplot inline data blocks.
//!
//! A CSV whose first column is non-numeric (e.g. `mode,env_steps,...`) is
//! split into one block per distinct label; otherwise it becomes one block.

use std::path::Path;

use crate::{Error, Result};

fn block_name(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

pub fn gnuplot_blocks(name: &str, csv: &str) -> Result<String> {
    let mut lines = csv.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::InvalidArgument(format!("{name}: empty csv")))?;
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').map(str::trim).collect()).collect();
    let labelled = rows.iter().any(|r| r.first().is_some_and(|c| c.parse::<f64>().is_err()));
    let mut out = String::new();
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if labelled {
        let mut order: Vec<&str> = Vec::new();
        for r in &rows {
            if !order.contains(&r[0]) {
                order.push(r[0]);
            }
        }
        for label in order {
            out.push_str(&format!("# {}\n${}_{} << EOD\n", cols[1..].join(" "), block_name(name), block_name(label)));
            for r in rows.iter().filter(|r| r[0] == label) {
                out.push_str(&r[1..].join(" "));
                out.push('\n');
            }
            out.push_str("EOD\n\n");
        }
    } else {
        out.push_str(&format!("# {}\n${} << EOD\n", cols.join(" "), block_name(name)));
        for r in &rows {
            out.push_str(&r.join(" "));
            out.push('\n');
        }
        out.push_str("EOD\n");
    }
    Ok(out)
}

/// Reads a CSV file and names its block(s) after the file stem.
pub fn plot_file(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    gnuplot_blocks(stem, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_by_label() {
        let csv = "mode,env_steps,mean,sem,n\nlatent,0,0.1,nan,1\nblackbox,0,0.2,0.1,2\nlatent,10,0.3,nan,1\n";
        let out = gnuplot_blocks("curves", csv).unwrap();
        assert!(out.contains("$curves_latent << EOD\n0 0.1 nan 1\n10 0.3 nan 1\nEOD"));
        assert!(out.contains("$curves_blackbox << EOD\n0 0.2 0.1 2\nEOD"));
    }

    #[test]
    fn numeric_csv_is_one_block() {
        let out = gnuplot_blocks("m-1", "step,mean,sem,n\n0,1,0.5,3\n").unwrap();
        assert_eq!(out, "# step mean sem n\n$m_1 << EOD\n0 1 0.5 3\nEOD\n");
    }
}
