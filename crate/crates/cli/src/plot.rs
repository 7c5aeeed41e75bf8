//! Static per-subcarrier amplitude plots: mean over packets with a ±1 std
//! band, one curve per input.

use std::fmt::Write;

use csishield::csi::{data_subcarrier_indices, AmplitudeMatrix, DATA_SUBCARRIERS};

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Series {
    /// Column means and population standard deviations.
    pub fn from_amplitudes(label: &str, amp: &AmplitudeMatrix) -> Self {
        let v = amp.values();
        let mean: Vec<f64> = v.columns().into_iter().map(|c| c.mean().unwrap_or(0.0)).collect();
        let std = v.columns().into_iter().map(|c| c.std(0.0)).collect();
        Series { label: label.to_string(), mean, std }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }
}

/// Subcarrier numbers for the x axis: positions in the 64-slot layout when
/// the width is the 52 data subcarriers, column indices otherwise.
fn x_labels(width: usize) -> Vec<usize> {
    if width == DATA_SUBCARRIERS {
        data_subcarrier_indices().to_vec()
    } else {
        (0..width).collect()
    }
}

/// One row per subcarrier.
pub fn to_csv(series: &[Series]) -> String {
    let mut out = String::from("subcarrier");
    for s in series {
        let _ = write!(out, ",{0}_mean,{0}_std", s.label);
    }
    out.push('\n');
    let width = series.first().map_or(0, Series::len);
    for (i, x) in x_labels(width).into_iter().enumerate() {
        let _ = write!(out, "{x}");
        for s in series {
            let _ = write!(out, ",{:?},{:?}", s.mean[i], s.std[i]);
        }
        out.push('\n');
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn to_svg(series: &[Series], width: u32, height: u32, title: &str) -> String {
    let (w, h) = (width as f64, height as f64);
    let (left, right, top, bottom) = (60.0, 20.0, 40.0, 50.0);
    let n = series.first().map_or(0, Series::len);
    let xs = x_labels(n);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for (m, d) in s.mean.iter().zip(&s.std) {
            lo = lo.min(m - d);
            hi = hi.max(m + d);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let x_max = xs.last().copied().unwrap_or(1).max(1) as f64;
    let px = |x: usize| left + (w - left - right) * x as f64 / x_max;
    let py = |y: f64| top + (h - top - bottom) * (hi - y) / (hi - lo);

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (left, w - right, top, h - bottom);
    let _ = writeln!(out, r#"<g stroke="black" stroke-width="1">"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<g font-family="sans-serif" font-size="11">"#);
    for tick in (0..=x_max as usize).step_by(8) {
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{tick}</text>"#, px(tick), y1 + 16.0);
    }
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.3}</text>"#, x0 - 6.0, py(v) + 4.0);
    }
    let _ =
        writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Subcarrier</text>"#, (x0 + x1) / 2.0, h - 12.0);
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">Amplitude</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    let _ = writeln!(out, "</g>");

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let upper = xs.iter().enumerate().map(|(i, &x)| format!("{:.2},{:.2}", px(x), py(s.mean[i] + s.std[i])));
        let lower = xs.iter().enumerate().rev().map(|(i, &x)| format!("{:.2},{:.2}", px(x), py(s.mean[i] - s.std[i])));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ =
            writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.join(" "));
        let line: Vec<String> =
            xs.iter().enumerate().map(|(i, &x)| format!("{:.2},{:.2}", px(x), py(s.mean[i]))).collect();
        let _ =
            writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
        let ly = top + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/>"#,
            x1 - 120.0,
            x1 - 100.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12">{}</text>"#,
            x1 - 95.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn amp() -> AmplitudeMatrix {
        AmplitudeMatrix::new(Array2::from_shape_fn((4, 52), |(t, k)| (k as f64 / 52.0) + 0.01 * t as f64))
    }

    #[test]
    fn mean_and_std() {
        let a = AmplitudeMatrix::new(ndarray::array![[1.0, 0.0], [3.0, 0.0]]);
        let s = Series::from_amplitudes("x", &a);
        assert_eq!(s.mean, vec![2.0, 0.0]);
        assert_eq!(s.std, vec![1.0, 0.0]);
    }

    #[test]
    fn csv_has_52_rows() {
        let csv = to_csv(&[Series::from_amplitudes("clean", &amp())]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "subcarrier,clean_mean,clean_std");
        assert_eq!(lines.len(), 53);
        assert!(lines[1].starts_with("4,"));
        assert!(lines[52].starts_with("60,"));
    }

    #[test]
    fn svg_is_well_formed() {
        let s = Series::from_amplitudes("a<b", &amp());
        let svg = to_svg(&[s.clone(), s], 900, 500, "t");
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn constant_input_still_plots() {
        let flat = AmplitudeMatrix::new(Array2::from_elem((3, 52), 0.5));
        let svg = to_svg(&[Series::from_amplitudes("f", &flat)], 300, 200, "");
        assert!(!svg.contains("NaN"));
    }
}
