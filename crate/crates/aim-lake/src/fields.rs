//! Coefficient fields b (topography), ν (viscosity) and η (friction).

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{spectral_gradient, Fft2, Grid};
use crate::scalar::{lit, Real};
use num_complex::Complex;
use std::path::Path;
use std::sync::Arc;

/// A gridded scalar table, spectrally interpolated onto other grids.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub m: usize,
    pub side_length: f64,
    /// Row-major values, row = y index.
    pub values: Vec<f64>,
}

impl Table {
    /// Reads the CSV layout `# grid M L` followed by M rows of M values.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text).map_err(|message| Error::Format { path: path.display().to_string(), message })
    }

    pub fn parse_csv(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or("empty table")?;
        let parts: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "grid" {
            return Err(format!("expected header `# grid M L`, found `{header}`"));
        }
        let m: usize = parts[1].parse().map_err(|_| "bad M in header")?;
        let side_length: f64 = parts[2].parse().map_err(|_| "bad L in header")?;
        let mut values = Vec::with_capacity(m * m);
        for (row, line) in lines.enumerate() {
            let before = values.len();
            for cell in line.split(',') {
                values.push(cell.trim().parse::<f64>().map_err(|_| format!("bad value `{cell}` in row {row}"))?);
            }
            if values.len() - before != m {
                return Err(format!("row {row} has {} values, expected {m}", values.len() - before));
            }
        }
        if values.len() != m * m {
            return Err(format!("expected {m} rows, found {}", values.len() / m.max(1)));
        }
        Ok(Table { m, side_length, values })
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# grid {} {}\n", self.m, self.side_length);
        for row in self.values.chunks(self.m) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    fn spectrum(&self) -> Vec<Complex<f64>> {
        Fft2::<f64>::new(self.m).forward(&self.values)
    }

    /// Resamples onto an `m`-point grid by zero-padding or truncating the spectrum.
    pub fn resample(&self, m: usize) -> Vec<f64> {
        if m == self.m {
            return self.values.clone();
        }
        let src = self.spectrum();
        let sg = Grid { side_length: self.side_length, points_per_side: self.m, mode_cutoff: 1 };
        let dg = Grid { side_length: self.side_length, points_per_side: m, mode_cutoff: 1 };
        let mut dst = vec![Complex::new(0.0, 0.0); m * m];
        let scale = (m * m) as f64 / (self.m * self.m) as f64;
        let lim = (self.m.min(m) / 2) as i64;
        for iy in 0..self.m {
            for ix in 0..self.m {
                let (k1, k2) = (sg.freq(ix), sg.freq(iy));
                if k1.abs() < lim && k2.abs() < lim && (k1 != 0 || ix == 0) && (k2 != 0 || iy == 0) {
                    dst[dg.spec_index(k1, k2)] = src[iy * self.m + ix] * scale;
                }
            }
        }
        Fft2::<f64>::new(m).inverse_real(dst)
    }

    /// Trigonometric interpolant and its gradient at an arbitrary point.
    pub fn eval_grad(&self, x: f64, y: f64) -> [f64; 3] {
        let spec = self.spectrum();
        let g = Grid { side_length: self.side_length, points_per_side: self.m, mode_cutoff: 1 };
        let k0 = g.k0();
        let norm = 1.0 / (self.m * self.m) as f64;
        let mut out = [0.0; 3];
        for iy in 0..self.m {
            for ix in 0..self.m {
                let (k1, k2) = (g.freq(ix) as f64 * k0, g.freq(iy) as f64 * k0);
                if (g.freq(ix) == 0 && ix != 0) || (g.freq(iy) == 0 && iy != 0) {
                    continue;
                }
                let c = spec[iy * self.m + ix] * norm;
                let e = Complex::from_polar(1.0, k1 * x + k2 * y);
                let v = c * e;
                out[0] += v.re;
                out[1] += (v * Complex::new(0.0, k1)).re;
                out[2] += (v * Complex::new(0.0, k2)).re;
            }
        }
        out
    }
}

/// Where a coefficient field comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSource {
    Expr(Expr),
    Table(Table),
}

impl FieldSource {
    pub fn constant(c: f64) -> Self {
        FieldSource::Expr(Expr::constant(c))
    }

    pub fn expr(s: &str) -> Result<Self> {
        Ok(FieldSource::Expr(Expr::parse(s)?))
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        match self {
            FieldSource::Expr(e) => (0..grid.len())
                .map(|i| {
                    let (x, y) = grid.point(i);
                    e.eval(x, y, grid.side_length)
                })
                .collect(),
            FieldSource::Table(t) => t.resample(grid.m()),
        }
    }

    /// Value and gradient at a point, exact for expressions.
    pub fn eval_grad(&self, x: f64, y: f64, side: f64) -> [f64; 3] {
        match self {
            FieldSource::Expr(e) => e.eval_grad(x, y, side),
            FieldSource::Table(t) => t.eval_grad(x, y),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            FieldSource::Expr(e) => e.source().to_string(),
            FieldSource::Table(t) => format!("table {}x{}", t.m, t.m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub b: FieldSource,
    pub nu: FieldSource,
    pub eta: FieldSource,
}

impl FieldSpec {
    pub fn constant(b: f64, nu: f64, eta: f64) -> Self {
        FieldSpec { b: FieldSource::constant(b), nu: FieldSource::constant(nu), eta: FieldSource::constant(eta) }
    }
}

/// Sampled coefficient fields with their extrema.
#[derive(Debug, Clone)]
pub struct CoefficientFields<T: Real> {
    pub grid: Grid,
    pub spec: FieldSpec,
    pub b: Vec<T>,
    pub nu: Vec<T>,
    pub eta: Vec<T>,
    /// Spectral gradient of b.
    pub b_grad: [Vec<T>; 2],
    pub b_i: T,
    pub b_s: T,
    pub b_bar: T,
    pub nu_i: T,
    pub nu_s: T,
    pub eta_bar: T,
    pub fft: Arc<Fft2<T>>,
}

pub fn sample_fields<T: Real>(grid: &Grid, spec: &FieldSpec) -> Result<CoefficientFields<T>> {
    grid.validate()?;
    let conv = |v: Vec<f64>| -> Vec<T> { v.into_iter().map(lit).collect() };
    let b64 = spec.b.sample(grid);
    let nu64 = spec.nu.sample(grid);
    let eta64 = spec.eta.sample(grid);
    let minf = |v: &[f64]| v.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let maxf = |v: &[f64]| v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    for (name, v) in [("b", &b64), ("nu", &nu64), ("eta", &eta64)] {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::config(format!("fields.{name}"), "field is not finite on the grid"));
        }
    }
    if minf(&b64) <= 0.0 {
        return Err(Error::NonPositiveDepth { min: minf(&b64) });
    }
    if minf(&nu64) <= 0.0 {
        return Err(Error::NonPositiveViscosity { min: minf(&nu64) });
    }
    if minf(&eta64) < 0.0 {
        return Err(Error::NegativeFriction { min: minf(&eta64) });
    }
    let fft = Arc::new(Fft2::new(grid.m()));
    let b: Vec<T> = conv(b64.clone());
    let b_grad = spectral_gradient(grid, &fft, &b);
    let (b_i, b_s) = (minf(&b64), maxf(&b64));
    Ok(CoefficientFields {
        grid: *grid,
        spec: spec.clone(),
        b,
        nu: conv(nu64.clone()),
        eta: conv(eta64.clone()),
        b_grad,
        b_i: lit(b_i),
        b_s: lit(b_s),
        b_bar: lit(b_i / b_s),
        nu_i: lit(minf(&nu64)),
        nu_s: lit(maxf(&nu64)),
        eta_bar: lit(maxf(&eta64)),
        fft,
    })
}

impl<T: Real> CoefficientFields<T> {
    /// Whether η vanishes identically on the grid.
    pub fn frictionless(&self) -> bool {
        self.eta_bar == T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_fields() {
        let g = Grid::new(2.0 * std::f64::consts::PI, 16, 2).unwrap();
        let f = sample_fields::<f64>(&g, &FieldSpec::constant(1.0, 1.0, 0.0)).unwrap();
        assert_eq!((f.b_i, f.b_s, f.b_bar, f.nu_i, f.eta_bar), (1.0, 1.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn positivity_errors() {
        let g = Grid::new(2.0 * std::f64::consts::PI, 16, 2).unwrap();
        let mut s = FieldSpec::constant(1.0, 1.0, 0.0);
        s.b = FieldSource::expr("sin(x)").unwrap();
        assert!(matches!(sample_fields::<f64>(&g, &s), Err(Error::NonPositiveDepth { .. })));
        let mut s = FieldSpec::constant(1.0, 0.0, 0.0);
        s.b = FieldSource::constant(1.0);
        assert!(matches!(sample_fields::<f64>(&g, &s), Err(Error::NonPositiveViscosity { .. })));
    }

    #[test]
    fn table_round_trip_and_interpolation() {
        let g = Grid::new(3.0, 16, 2).unwrap();
        let src = FieldSource::expr("2 + sin(2*pi*x/L) * cos(4*pi*y/L)").unwrap();
        let t = Table { m: 16, side_length: 3.0, values: src.sample(&g) };
        let t2 = Table::parse_csv(&t.to_csv()).unwrap();
        assert_eq!(t2.m, 16);
        let fine = Grid::new(3.0, 32, 2).unwrap();
        let exact = src.sample(&fine);
        let interp = FieldSource::Table(t2.clone()).sample(&fine);
        for (a, b) in exact.iter().zip(&interp) {
            assert!((a - b).abs() < 1e-12);
        }
        let p = t2.eval_grad(0.4, 1.1);
        let q = src.eval_grad(0.4, 1.1, 3.0);
        for i in 0..3 {
            assert!((p[i] - q[i]).abs() < 1e-11, "{i}: {} vs {}", p[i], q[i]);
        }
    }

    #[test]
    fn bad_table_is_rejected() {
        assert!(Table::parse_csv("# grid 2 1\n1,2\n3\n").is_err());
        assert!(Table::parse_csv("grid\n").is_err());
    }
}
