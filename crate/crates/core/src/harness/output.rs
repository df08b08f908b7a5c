use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::json;

use super::{AggregateReport, CurveRow, HarnessError, RunReport};
use crate::evolve::traces_to_jsonl;
use crate::render::{render_multiview, write_png};

pub const REPORT_FILE: &str = "report.json";
pub const PER_SAMPLE_FILE: &str = "per_sample.jsonl";
pub const CURVES_FILE: &str = "curves.csv";
pub const POPULATION_CURVES_FILE: &str = "curves_population.csv";
pub const CURVE_HEADER: &str = "generation,t_corr_mean,t_corr_std,t_err_mean,t_err_std";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn curves_csv(rows: &[CurveRow]) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.generation,
            r.t_corr_mean,
            r.t_corr_std,
            opt(r.t_err_mean),
            opt(r.t_err_std)
        );
    }
    out
}

fn trace_path(run: usize, id: &str) -> String {
    format!("traces/run{run}/{id}.jsonl")
}

pub fn per_sample_jsonl(runs: &[RunReport]) -> String {
    let mut out = String::new();
    for (r, run) in runs.iter().enumerate() {
        for s in &run.samples {
            let mut v = serde_json::to_value(s).expect("sample result serializes");
            v["run"] = json!(r);
            v["trace"] = json!(trace_path(r, &s.id));
            out.push_str(&v.to_string());
            out.push('\n');
        }
    }
    out
}

/// Writes the report files into `out`. `gallery` gives the image size for
/// optional multiview pictures of each final elite.
pub fn write_outputs(
    out: &Path,
    runs: &[RunReport],
    agg: &AggregateReport,
    gallery: Option<usize>,
) -> Result<(), HarnessError> {
    let io = |p: &Path, e: std::io::Error| HarnessError::Io(format!("{}: {e}", p.display()));
    let write = |name: &str, text: String| {
        let p = out.join(name);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        }
        fs::write(&p, text).map_err(|e| io(&p, e))
    };
    write(REPORT_FILE, serde_json::to_string_pretty(agg).expect("report serializes") + "\n")?;
    write(PER_SAMPLE_FILE, per_sample_jsonl(runs))?;
    write(CURVES_FILE, curves_csv(&agg.curves.elite))?;
    write(POPULATION_CURVES_FILE, curves_csv(&agg.curves.population))?;
    for (r, run) in runs.iter().enumerate() {
        for s in &run.samples {
            write(&trace_path(r, &s.id), traces_to_jsonl(&s.traces))?;
            let (Some(size), Some(mesh)) = (gallery, &s.elite_mesh) else { continue };
            let p = out.join(format!("gallery/run{r}/{}.png", s.id));
            let img = render_multiview(mesh, size).map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))?;
            fs::create_dir_all(p.parent().expect("has parent")).map_err(|e| io(&p, e))?;
            write_png(&img, &p).map_err(|e| io(&p, e))?;
        }
    }
    Ok(())
}
