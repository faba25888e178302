//! Tabular and graphical output: decimal formatting, the difference table in
//! CSV or markdown, the simulation CSV, and an SVG chart of empirical versus
//! exact probabilities.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use dashu_base::UnsignedAbs;
use dashu_float::DBig;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::probability::{FalsificationEstimate, Real};
use crate::simulation::{SimulationReport, Z_THRESHOLD};

/// Significant digits for every printed real.
pub const SIGNIFICANT_DIGITS: usize = 17;

pub const TABLE_HEADER: [&str; 5] = ["b", "m", "exact", "approx", "abs_diff"];
pub const SIMULATION_HEADER: [&str; 9] = [
    "bits",
    "path_len",
    "total_trials",
    "matches",
    "empirical_p",
    "exact_p",
    "std_error",
    "z_score",
    "seed",
];

/// Formats `x` with [`SIGNIFICANT_DIGITS`] significant digits, dropping
/// trailing zeros. Magnitudes below `1e-5` or from `1e17` up use exponent
/// notation (`4.71585051471136e-6`). Output is locale independent.
pub fn format_real(x: &Real) -> String {
    if *x == Real::ZERO {
        return "0".to_string();
    }
    // Widen first so low-precision inputs expand to all their decimal digits.
    let wide = x.clone().with_precision(x.precision().max(128)).value();
    let d: DBig = wide.to_decimal().value().with_precision(SIGNIFICANT_DIGITS).value();
    let (significand, exponent) = d.into_repr().into_parts();
    let negative = significand < dashu_int::IBig::ZERO;
    let mut digits = significand.unsigned_abs().to_string();
    let mut exponent = exponent;
    while digits.len() > 1 && digits.ends_with('0') {
        digits.pop();
        exponent += 1;
    }
    // Decimal exponent of the leading digit.
    let lead = exponent + digits.len() as isize - 1;
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if !(-5..17).contains(&lead) {
        out.push_str(&digits[..1]);
        if digits.len() > 1 {
            out.push('.');
            out.push_str(&digits[1..]);
        }
        write!(out, "e{lead}").expect("write to string");
    } else if lead < 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat('0').take((-lead - 1) as usize));
        out.push_str(&digits);
    } else {
        let int_len = lead as usize + 1;
        if digits.len() <= int_len {
            out.push_str(&digits);
            out.extend(std::iter::repeat('0').take(int_len - digits.len()));
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    out
}

/// [`format_real`] for machine floats.
pub fn format_f64(x: f64) -> String {
    match Real::try_from(x) {
        Ok(r) => format_real(&r),
        Err(_) => x.to_string(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub bits: u32,
    pub path_len: u64,
    pub exact: Real,
    pub approx: Real,
    pub abs_diff: Real,
    pub empirical: Option<f64>,
    pub z_score: Option<f64>,
}

/// Rows sorted by `(bits, path_len)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportTable {
    rows: Vec<ReportRow>,
}

impl ReportTable {
    pub fn from_estimates(estimates: &[FalsificationEstimate]) -> Self {
        let mut rows: Vec<_> = estimates
            .iter()
            .map(|e| ReportRow {
                bits: e.params.bits(),
                path_len: e.params.path_len(),
                exact: e.exact.value.clone(),
                approx: e.approx.value.clone(),
                abs_diff: e.abs_diff.clone(),
                empirical: None,
                z_score: None,
            })
            .collect();
        rows.sort_by_key(|r| (r.bits, r.path_len));
        Self { rows }
    }

    /// Fills the empirical columns from matching simulation cells.
    pub fn attach_simulation(&mut self, report: &SimulationReport) {
        for row in &mut self.rows {
            if let Some(cell) = report
                .cells
                .iter()
                .find(|c| c.config.bits == row.bits && c.config.path_len == row.path_len)
            {
                row.empirical = Some(cell.empirical_p);
                row.z_score = Some(cell.z_score);
            }
        }
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    fn has_empirical(&self) -> bool {
        self.rows.iter().any(|r| r.empirical.is_some())
    }

    fn header(&self) -> Vec<&'static str> {
        let mut h = TABLE_HEADER.to_vec();
        if self.has_empirical() {
            h.extend(["empirical", "z_score"]);
        }
        h
    }

    fn cells(&self, row: &ReportRow) -> Vec<String> {
        let mut v = vec![
            row.bits.to_string(),
            row.path_len.to_string(),
            format_real(&row.exact),
            format_real(&row.approx),
            format_real(&row.abs_diff),
        ];
        if self.has_empirical() {
            v.push(row.empirical.map(format_f64).unwrap_or_default());
            v.push(row.z_score.map(format_f64).unwrap_or_default());
        }
        v
    }

    pub fn write<W: Write>(&self, format: TableFormat, out: W) -> Result<()> {
        match format {
            TableFormat::Csv => self.write_csv(out),
            TableFormat::Markdown => self.write_markdown(out),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header()).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(self.cells(row)).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_markdown<W: Write>(&self, mut out: W) -> Result<()> {
        let header = self.header();
        writeln!(out, "| {} |", header.join(" | "))?;
        writeln!(out, "|{}", "---:|".repeat(header.len()))?;
        for row in &self.rows {
            writeln!(out, "| {} |", self.cells(row).join(" | "))?;
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Writes one simulation row per cell under [`SIMULATION_HEADER`].
pub fn write_simulation_csv<W: Write>(report: &SimulationReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SIMULATION_HEADER).map_err(csv_err)?;
    for c in &report.cells {
        w.write_record([
            c.config.bits.to_string(),
            c.config.path_len.to_string(),
            c.total_trials.to_string(),
            c.matches.to_string(),
            format_f64(c.empirical_p),
            format_real(&c.exact.value),
            format_f64(c.std_error),
            format_f64(c.z_score),
            c.config.master_seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One parsed row of a simulation CSV.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct SimulationRow {
    pub bits: u32,
    pub path_len: u64,
    pub total_trials: u64,
    pub matches: u64,
    pub empirical_p: f64,
    pub exact_p: f64,
    pub std_error: f64,
    pub z_score: f64,
    pub seed: u64,
}

pub fn read_simulation_csv<R: Read>(input: R) -> Result<Vec<SimulationRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r
        .headers()
        .map_err(|e| Error::Parse(format!("unreadable simulation CSV: {e}")))?;
    if headers.iter().ne(SIMULATION_HEADER) {
        return Err(Error::Parse(format!(
            "unexpected simulation CSV header {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<SimulationRow>, _>>()
        .map_err(|e| Error::Parse(format!("malformed simulation CSV: {e}")))?;
    if rows.is_empty() {
        return Err(Error::Parse("simulation CSV has no rows".into()));
    }
    for row in &rows {
        if row.bits == 0 || row.total_trials == 0 || row.matches > row.total_trials {
            return Err(Error::Parse(format!("inconsistent simulation row {row:?}")));
        }
    }
    Ok(rows)
}

/// Exact falsification probability for a real-valued path length, in `f64`.
/// Only used to trace smooth curves on the chart.
fn curve_value(bits: u32, path_len: f64) -> f64 {
    let p = (-(bits as f64)).exp2();
    -((path_len + 1.0) * (-p).ln_1p()).exp_m1()
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const CURVE_POINTS: usize = 64;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

/// Log-scaled axis mapping decades onto a pixel span.
struct LogAxis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl LogAxis {
    fn new(min: f64, max: f64, px_lo: f64, px_hi: f64) -> Self {
        let mut lo = min.log10().floor();
        let mut hi = max.log10().ceil();
        if hi <= lo {
            lo -= 1.0;
            hi += 1.0;
        }
        Self { lo, hi, px_lo, px_hi }
    }

    fn map(&self, v: f64) -> f64 {
        let t = (v.log10().clamp(self.lo, self.hi) - self.lo) / (self.hi - self.lo);
        self.px_lo + t * (self.px_hi - self.px_lo)
    }

    fn decades(&self) -> impl Iterator<Item = i32> {
        (self.lo as i32)..=(self.hi as i32)
    }
}

/// Path length as placed on the log x-axis; `m = 0` sits at 0.5.
fn x_value(m: f64) -> f64 {
    m.max(0.5)
}

/// Renders a self-contained SVG: one series per `b` with the exact curve as
/// a line, empirical points as markers, and a ±5σ bar at each marker.
pub fn render_figure(rows: &[SimulationRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Usage("nothing to plot".into()));
    }
    let mut series: BTreeMap<u32, Vec<&SimulationRow>> = BTreeMap::new();
    for r in rows {
        series.entry(r.bits).or_default().push(r);
    }
    for s in series.values_mut() {
        s.sort_by_key(|r| r.path_len);
    }

    let span = |s: &[&SimulationRow]| {
        let lo = s.first().expect("non-empty").path_len as f64;
        let hi = s.last().expect("non-empty").path_len as f64;
        if lo == hi {
            (x_value(lo) / 1.5, x_value(hi) * 1.5)
        } else {
            (x_value(lo), x_value(hi))
        }
    };

    let (mut x_min, mut x_max) = (f64::INFINITY, 0.0f64);
    let (mut y_min, mut y_max) = (f64::INFINITY, 0.0f64);
    for (&b, s) in &series {
        let (lo, hi) = span(s);
        x_min = x_min.min(lo);
        x_max = x_max.max(hi);
        for v in [curve_value(b, lo.max(0.0)), curve_value(b, hi)] {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
        for r in s {
            if r.empirical_p > 0.0 {
                y_min = y_min.min(r.empirical_p);
                y_max = y_max.max(r.empirical_p);
            }
        }
    }
    y_max = y_max.min(1.0);

    let x_axis = LogAxis::new(x_min, x_max, LEFT, WIDTH - RIGHT);
    let y_axis = LogAxis::new(y_min, y_max, HEIGHT - BOTTOM, TOP);

    let mut svg = String::new();
    let w = &mut svg;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .expect("write to string");
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        w,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">Falsification probability: empirical vs exact</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0
    )
    .unwrap();

    // Axes and decade grid.
    writeln!(w, r##"<g class="axes" stroke="#999" stroke-width="0.5">"##).unwrap();
    for k in x_axis.decades() {
        let x = x_axis.map(10f64.powi(k));
        writeln!(w, r#"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{}"/>"#, HEIGHT - BOTTOM).unwrap();
    }
    for k in y_axis.decades() {
        let y = y_axis.map(10f64.powi(k));
        writeln!(w, r#"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}"/>"#, WIDTH - RIGHT).unwrap();
    }
    writeln!(w, "</g>").unwrap();
    writeln!(w, r#"<g class="ticks" fill="black">"#).unwrap();
    for k in x_axis.decades() {
        let x = x_axis.map(10f64.powi(k));
        writeln!(w, r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{k}</text>"#, HEIGHT - BOTTOM + 18.0).unwrap();
    }
    for k in y_axis.decades() {
        let y = y_axis.map(10f64.powi(k));
        writeln!(w, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{k}</text>"#, LEFT - 6.0, y + 4.0).unwrap();
    }
    writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="middle">path length m</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 15.0
    )
    .unwrap();
    writeln!(
        w,
        r#"<text transform="translate(20 {}) rotate(-90)" text-anchor="middle">probability</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0
    )
    .unwrap();
    writeln!(w, "</g>").unwrap();

    for (i, (&b, s)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        writeln!(w, r#"<g class="series" data-bits="{b}">"#).unwrap();

        let (lo, hi) = span(s);
        let path: Vec<String> = (0..CURVE_POINTS)
            .map(|k| {
                let t = k as f64 / (CURVE_POINTS - 1) as f64;
                let m = 10f64.powf(lo.log10() + t * (hi.log10() - lo.log10()));
                let x = x_axis.map(m);
                let y = y_axis.map(curve_value(b, m));
                format!("{}{x:.2},{y:.2}", if k == 0 { "M" } else { "L" })
            })
            .collect();
        writeln!(
            w,
            r#"<path class="theory" d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        )
        .unwrap();

        for r in s {
            let x = x_axis.map(x_value(r.path_len as f64));
            let band_lo = (r.exact_p - Z_THRESHOLD * r.std_error).max(10f64.powf(y_axis.lo));
            let band_hi = (r.exact_p + Z_THRESHOLD * r.std_error).min(1.0);
            writeln!(
                w,
                r#"<line class="band" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}" stroke-opacity="0.4" stroke-width="6"/>"#,
                y_axis.map(band_lo),
                y_axis.map(band_hi)
            )
            .unwrap();
            let y = if r.empirical_p > 0.0 {
                y_axis.map(r.empirical_p)
            } else {
                y_axis.px_lo
            };
            writeln!(
                w,
                r#"<circle class="empirical" cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}" data-m="{}" data-p="{}"/>"#,
                r.path_len,
                format_f64(r.empirical_p)
            )
            .unwrap();
        }

        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        writeln!(
            w,
            r#"<line class="legend-swatch" x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        )
        .unwrap();
        writeln!(w, r#"<text class="legend" x="{}" y="{}">b={b}</text>"#, lx + 26.0, ly + 4.0).unwrap();
        writeln!(w, "</g>").unwrap();
    }
    writeln!(w, "</svg>").unwrap();
    Ok(svg)
}
