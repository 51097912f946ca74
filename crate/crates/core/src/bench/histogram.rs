//! Histograms of raw scores.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: Vec<Bin>,
}

/// Counts raw scores in equal-width bins over a symmetric range
/// `[-R, R]` with `R ≥ 1` covering every score. The width is `1/q` for an
/// integer `q`, so 0 and ±1 fall exactly on bin edges; the bin count is
/// close to `bins`. Bins are half-open except the last.
pub fn score_histogram(scores: &[f64], bins: usize) -> Result<Histogram> {
    if scores.is_empty() {
        return Err(Error::Empty("scores"));
    }
    if bins < 2 {
        return Err(Error::invalid("a histogram needs at least two bins"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    let reach = scores.iter().fold(1.0f64, |r, s| r.max(s.abs()));
    let q = ((bins as f64 / (2.0 * reach)).round() as i64).max(1);
    let half = (reach * q as f64).ceil() as i64;
    let mut counts = vec![0usize; (2 * half) as usize];
    for &s in scores {
        let k = ((s * q as f64).floor() as i64 + half).clamp(0, 2 * half - 1);
        counts[k as usize] += 1;
    }
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| Bin {
            bin_left: (k as i64 - half) as f64 / q as f64,
            bin_right: (k as i64 - half + 1) as f64 / q as f64,
            count,
        })
        .collect();
    Ok(Histogram { bins })
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Fraction of scores in bins lying inside `[-r, r]`.
    pub fn mass_within(&self, r: f64) -> f64 {
        let inside: usize = self
            .bins
            .iter()
            .filter(|b| b.bin_left >= -r && b.bin_right <= r)
            .map(|b| b.count)
            .sum();
        inside as f64 / self.total() as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for b in &self.bins {
            w.serialize(b).map_err(|e| Error::invalid(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| Error::io("<histogram>", e))
    }

    /// Bar chart with dashed markers at scores ±1.
    pub fn to_svg(&self) -> String {
        let (width, height, pad) = (640.0, 320.0, 30.0);
        let lo = self.bins.first().map_or(-1.0, |b| b.bin_left);
        let hi = self.bins.last().map_or(1.0, |b| b.bin_right);
        let peak = self.bins.iter().map(|b| b.count).max().unwrap_or(0).max(1) as f64;
        let x = |v: f64| pad + (v - lo) / (hi - lo) * (width - 2.0 * pad);
        let y = |c: f64| height - pad - c / peak * (height - 2.0 * pad);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\">\n"
        );
        for b in &self.bins {
            let (x0, x1) = (x(b.bin_left), x(b.bin_right));
            let top = y(b.count as f64);
            svg += &format!(
                "<rect x=\"{x0:.2}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#888\"/>\n",
                (x1 - x0).max(0.5),
                height - pad - top
            );
        }
        for m in [-1.0, 1.0] {
            let xm = x(m);
            svg += &format!(
                "<line x1=\"{xm:.2}\" y1=\"{pad}\" x2=\"{xm:.2}\" y2=\"{:.2}\" stroke=\"blue\" stroke-dasharray=\"6,4\"/>\n",
                height - pad
            );
        }
        svg += &format!(
            "<line x1=\"{pad}\" y1=\"{0:.2}\" x2=\"{1:.2}\" y2=\"{0:.2}\" stroke=\"black\"/>\n",
            height - pad,
            width - pad
        );
        svg += &format!(
            "<text x=\"{pad}\" y=\"{:.2}\" font-size=\"11\">{lo}</text>\n<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{hi}</text>\n",
            height - 8.0,
            width - pad - 20.0,
            height - 8.0
        );
        svg + "</svg>\n"
    }
}
