use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use qeb_core::io::to_json_string;
use qeb_core::{FitParams, WalkerReport};
use serde::Serialize;

/// Writes `value` as JSON to `out`, or to stdout.
pub fn emit_json<T: Serialize + ?Sized>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = to_json_string(value)?;
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Raw recorded values as `walker,sample,value` rows.
pub fn write_samples(path: &Path, walkers: &[WalkerReport]) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "walker,sample,value")?;
    for w in walkers {
        for (i, v) in w.values.iter().enumerate() {
            writeln!(out, "{},{},{}", w.walker_index, i, v)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Gnuplot script drawing the histogram with error bars and, if present, the
/// fitted model curve.
pub fn gnuplot_script(csv_name: &str, label: &str, fit: Option<&FitParams>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator \",\"");
    let _ = writeln!(s, "set xlabel {}", quote(label));
    let _ = writeln!(s, "set ylabel \"density\"");
    let mut plot = format!(
        "plot {} skip 1 using 1:2:3 with yerrorbars title \"histogram\"",
        quote(csv_name)
    );
    if let Some(fit) = fit {
        let m = &fit.model;
        let _ = writeln!(s, "a2 = {}; a1 = {}; m = {}; c = {}", m.a2, m.a1, m.m, m.c);
        let _ = writeln!(s, "h = {}; s = {}", fit.vars.h, fit.vars.s);
        let _ = writeln!(s, "xv(f) = s*(f - h)");
        let _ = writeln!(
            s,
            "model(f) = xv(f) > 0 ? exp(-a2*xv(f)**2 - a1*xv(f) + m*log(xv(f)) + c) : 1/0"
        );
        let _ = writeln!(s, "set samples 1000");
        plot.push_str(", model(x) with lines title \"fit\"");
    }
    let _ = writeln!(s, "{plot}");
    s
}
