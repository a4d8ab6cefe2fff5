//! CSV and SVG writers for report extracts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ocpose_core::report::{EvaluationReport, PrCurveSet, SweepResult};
use ocpose_core::{Error, Result};

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

pub fn write_report_files(dir: &Path, report: &EvaluationReport) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();

    let report_path = dir.join("report.json");
    write_file(&report_path, &report.to_json_pretty())?;
    written.push(report_path);

    let mut csv = String::from("image_id,ocpose,pi_one,pi_one_cost,fp,fn\n");
    for img in &report.per_image {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            img.image_id, img.ocpose, img.pi_one, img.pi_one_cost, img.fp, img.fn_count
        );
    }
    let path = dir.join("per_image.csv");
    write_file(&path, &csv)?;
    written.push(path);

    let mut csv = String::from("oks_threshold,ap\n");
    for point in &report.aggregate.ap_per_threshold {
        let _ = writeln!(csv, "{},{}", point.oks_threshold, point.ap);
    }
    let path = dir.join("ap_per_threshold.csv");
    write_file(&path, &csv)?;
    written.push(path);

    Ok(written)
}

pub fn write_sweep_csv(dir: &Path, sweep: &SweepResult) -> Result<PathBuf> {
    let mut csv = String::from("threshold,ocpose,map,kept_detections\n");
    for point in &sweep.grid {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            point.threshold, point.ocpose, point.map, point.kept_detections
        );
    }
    let path = dir.join("sweep.csv");
    write_file(&path, &csv)?;
    Ok(path)
}

pub fn write_compare_csv(
    dir: &Path,
    result: &ocpose_core::report::CompareResult,
) -> Result<PathBuf> {
    let mut csv = String::from("name,map,ocpose_pooled,ocpose_per_image_mean,detections,fp\n");
    for row in &result.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            row.name,
            row.map,
            row.ocpose_pooled,
            row.ocpose_per_image_mean,
            row.detections,
            row.total_fp
        );
    }
    let path = dir.join("compare.csv");
    write_file(&path, &csv)?;
    Ok(path)
}

/// One CSV per (confidence threshold, OKS threshold) pair, a summary CSV,
/// and an SVG overlaying the curves at the first OKS threshold.
pub fn write_pr_curves(dir: &Path, sets: &[PrCurveSet]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for set in sets {
        for curve in &set.curves {
            let mut csv = String::from("recall,precision\n");
            for &(recall, precision) in &curve.samples {
                let _ = writeln!(csv, "{recall},{precision}");
            }
            let path = dir.join(format!(
                "pr_conf{:.2}_oks{:.2}.csv",
                set.confidence_threshold, curve.oks_threshold
            ));
            write_file(&path, &csv)?;
            written.push(path);
        }
    }

    let mut summary = String::from("confidence_threshold,map,fp_count_first_oks,kept_detections\n");
    for set in sets {
        let fp = set.curves.first().map_or(0, |c| c.fp_count);
        let _ = writeln!(
            summary,
            "{},{},{},{}",
            set.confidence_threshold, set.map, fp, set.kept_detections
        );
    }
    let path = dir.join("pr_summary.csv");
    write_file(&path, &summary)?;
    written.push(path);

    let svg_path = dir.join("pr_curves.svg");
    write_file(&svg_path, &pr_overlay_svg(sets))?;
    written.push(svg_path);
    Ok(written)
}

const SVG_COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
];

/// Overlay plot of the PR curves at the first OKS threshold, one polyline
/// per confidence threshold.
fn pr_overlay_svg(sets: &[PrCurveSet]) -> String {
    let (width, height) = (640.0, 480.0);
    let (left, right, top, bottom) = (60.0, 20.0, 20.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let x = |recall: f64| left + recall * plot_w;
    let y = |precision: f64| top + (1.0 - precision) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    // axes and grid
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#dddddd"/>"##,
            x(v),
            y(0.0),
            x(v),
            y(1.0)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#dddddd"/>"##,
            x(0.0),
            y(v),
            x(1.0),
            y(v)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{v:.1}</text>"#,
            x(v),
            height - bottom + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">{v:.1}</text>"#,
            left - 8.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">recall</text>"#,
        x(0.5),
        height - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" font-size="14" text-anchor="middle" transform="rotate(-90 14 {:.1})">precision</text>"#,
        y(0.5),
        y(0.5)
    );

    for (i, set) in sets.iter().enumerate() {
        let color = SVG_COLORS[i % SVG_COLORS.len()];
        if let Some(curve) = set.curves.first() {
            let mut points = String::new();
            let _ = write!(points, "{:.2},{:.2}", x(0.0), y(1.0));
            for &(recall, precision) in &curve.samples {
                let _ = write!(points, " {:.2},{:.2}", x(recall), y(precision));
            }
            let _ = writeln!(
                svg,
                r#"<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
            );
        }
        let ly = top + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            left + 10.0,
            left + 34.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12">Tc={:.2} (mAP {:.3}, {} dets)</text>"#,
            left + 40.0,
            ly + 4.0,
            set.confidence_threshold,
            set.map,
            set.kept_detections
        );
    }
    svg.push_str("</svg>\n");
    svg
}
