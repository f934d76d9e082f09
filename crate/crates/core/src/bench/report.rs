use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const REPORT_COLUMNS: [&str; 7] = ["method", "params", "psnr_db", "psnr_gain_db", "ssim", "ssim_gain", "ms_per_image"];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub params: String,
    pub psnr_db: f64,
    pub psnr_gain_db: f64,
    pub ssim: f64,
    pub ssim_gain: f64,
    /// `None` for untimed runs, written as `-`.
    pub ms_per_image: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl ReportFormat {
    /// Markdown for `.md` paths, CSV otherwise.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("md") | Some("markdown") => ReportFormat::Markdown,
            _ => ReportFormat::Csv,
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(Error::Config(format!("unknown report format '{s}' (csv|markdown)"))),
        }
    }
}

fn timing(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

impl BenchmarkReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(REPORT_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.params.clone(),
                r.psnr_db.to_string(),
                r.psnr_gain_db.to_string(),
                r.ssim.to_string(),
                r.ssim_gain.to_string(),
                timing(r.ms_per_image),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let headers: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if headers != REPORT_COLUMNS {
            return Err(Error::Config(format!("report columns {headers:?} differ from {REPORT_COLUMNS:?}")));
        }
        let num = |s: &str, col: &str| s.parse::<f64>().map_err(|_| Error::Config(format!("{col}: '{s}' is not a number")));
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            rows.push(ReportRow {
                method: rec[0].to_string(),
                params: rec[1].to_string(),
                psnr_db: num(&rec[2], "psnr_db")?,
                psnr_gain_db: num(&rec[3], "psnr_gain_db")?,
                ssim: num(&rec[4], "ssim")?,
                ssim_gain: num(&rec[5], "ssim_gain")?,
                ms_per_image: if &rec[6] == "-" { None } else { Some(num(&rec[6], "ms_per_image")?) },
            });
        }
        Ok(Self { rows })
    }

    /// Methods as rows, PSNR/SSIM and their gains as columns.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        writeln!(s, "| {} |", REPORT_COLUMNS.join(" | ")).unwrap();
        writeln!(s, "|{}", "---|".repeat(REPORT_COLUMNS.len())).unwrap();
        for r in &self.rows {
            let params = if r.params.is_empty() { "-".to_string() } else { format!("`{}`", r.params) };
            let ms = r.ms_per_image.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"));
            writeln!(s, "| {} | {} | {:.2} | {:+.2} | {:.4} | {:+.4} | {} |", r.method, params, r.psnr_db, r.psnr_gain_db, r.ssim, r.ssim_gain, ms).unwrap();
        }
        s
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        if self.rows.is_empty() {
            return Err(Error::Config("report has no rows".into()));
        }
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Markdown => Ok(self.to_markdown()),
        }
    }
}

pub fn emit_report(report: &BenchmarkReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = report.render(format)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BenchmarkReport {
        BenchmarkReport {
            rows: vec![
                ReportRow { method: "laser_input".into(), params: String::new(), psnr_db: 15.123456789, psnr_gain_db: 0.0, ssim: 0.41, ssim_gain: 0.0, ms_per_image: None },
                ReportRow { method: "nlm".into(), params: "patch_radius=4,window_radius=5".into(), psnr_db: 21.0 / 3.0, psnr_gain_db: 0.1 + 0.2, ssim: 0.5, ssim_gain: -1e-17, ms_per_image: Some(12.5) },
            ],
        }
    }

    #[test]
    fn golden_columns_and_single_row() {
        let one = BenchmarkReport { rows: sample().rows[..1].to_vec() };
        let csv = one.to_csv().unwrap();
        assert_eq!(csv, "method,params,psnr_db,psnr_gain_db,ssim,ssim_gain,ms_per_image\nlaser_input,,15.123456789,0,0.41,0,-\n");
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let csv = sample().to_csv().unwrap();
        let back = BenchmarkReport::from_csv(&csv).unwrap();
        assert_eq!(back, sample());
        assert_eq!(back.to_csv().unwrap(), csv);
        assert!(csv.contains("\"patch_radius=4,window_radius=5\""));
    }

    #[test]
    fn markdown_layout() {
        let md = sample().to_markdown();
        assert!(md.starts_with("| method | params | psnr_db |"));
        assert!(md.contains("| nlm | `patch_radius=4,window_radius=5` | 7.00 | +0.30 |"));
        assert!(BenchmarkReport::default().render(ReportFormat::Csv).is_err());
        assert_eq!(ReportFormat::for_path(Path::new("r.md")), ReportFormat::Markdown);
    }
}
