use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Largest amplitude magnitude tolerated at the first and last grid point.
pub const EDGE_AMPLITUDE_LIMIT: f64 = 1e-8;

/// Uniform periodic grid `x_j = x_min + j dx`, `dx = (x_max - x_min) / points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::Domain(format!("grid bounds [{x_min}, {x_max}] are empty")));
        }
        if points < 2 || !points.is_power_of_two() {
            return Err(Error::Domain(format!("grid size {points} is not a power of two")));
        }
        Ok(Self { x_min, x_max, points })
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|j| self.x(j))
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points;
        let dk = 2.0 * std::f64::consts::PI / self.length();
        (0..n)
            .map(|j| {
                let j = j as i64;
                let signed = if j < (n / 2) as i64 { j } else { j - n as i64 };
                signed as f64 * dk
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub grid: Grid,
    pub amplitudes: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: Grid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.points {
            return Err(Error::GridMismatch(format!(
                "{} amplitudes for a {}-point grid",
                amplitudes.len(),
                grid.points
            )));
        }
        Ok(Self { grid, amplitudes })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = grid.positions().map(f).collect();
        Self { grid, amplitudes }
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm();
        if !(norm > 0.0) {
            return Err(Error::ZeroState("cannot normalize a zero wavefunction".into()));
        }
        self.scale(Complex64::new(1.0 / norm, 0.0));
        Ok(self)
    }

    pub fn scale(&mut self, factor: Complex64) {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn mean_x(&self) -> f64 {
        self.expect_position(|x| x)
    }

    pub fn mean_x2(&self) -> f64 {
        self.expect_position(|x| x * x)
    }

    pub fn width(&self) -> f64 {
        let m = self.mean_x();
        (self.mean_x2() - m * m).max(0.0).sqrt()
    }

    /// `<f(x)>` normalized by the current norm.
    pub fn expect_position(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, a) in self.grid.positions().zip(&self.amplitudes) {
            let w = a.norm_sqr();
            num += w * f(x);
            den += w;
        }
        num / den
    }

    /// `<p>` from the discrete Fourier spectrum (hbar = 1).
    pub fn mean_p(&self) -> f64 {
        let spectrum = self.spectrum();
        let k = self.grid.wavenumbers();
        let mut num = 0.0;
        let mut den = 0.0;
        for (kj, a) in k.iter().zip(&spectrum) {
            let w = a.norm_sqr();
            num += w * kj;
            den += w;
        }
        num / den
    }

    fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.amplitudes.clone();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        buf
    }

    pub fn edge_amplitude(&self) -> f64 {
        let first = self.amplitudes.first().map_or(0.0, |a| a.norm());
        let last = self.amplitudes.last().map_or(0.0, |a| a.norm());
        first.max(last)
    }

    pub fn check_edges(&self) -> Result<()> {
        let edge = self.edge_amplitude();
        if edge >= EDGE_AMPLITUDE_LIMIT {
            return Err(Error::Domain(format!(
                "wavefunction amplitude {edge:.3e} at the domain edge"
            )));
        }
        Ok(())
    }

    pub fn same_grid(&self, other: &WaveFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }
}

/// Normalized Gaussian with position spread `width` and mean momentum
/// `momentum`. The interval `center +- 6 width` must lie inside the grid.
pub fn gaussian_packet(grid: Grid, center: f64, momentum: f64, width: f64) -> Result<WaveFunction> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::Domain(format!("packet width must be positive, got {width}")));
    }
    if center - 6.0 * width < grid.x_min || center + 6.0 * width > grid.x_max {
        return Err(Error::Domain(format!(
            "packet at {center} with width {width} reaches the domain edge of [{}, {}]",
            grid.x_min, grid.x_max
        )));
    }
    let wf = WaveFunction::from_fn(grid, |x| {
        let d = x - center;
        Complex64::from_polar((-d * d / (4.0 * width * width)).exp(), momentum * x)
    });
    wf.normalized()
}

/// `<a|b>` on the shared grid.
pub fn overlap(a: &WaveFunction, b: &WaveFunction) -> Result<Complex64> {
    a.same_grid(b)?;
    Ok(raw_overlap(a, b))
}

pub(crate) fn raw_overlap(a: &WaveFunction, b: &WaveFunction) -> Complex64 {
    a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>()
        * a.grid.dx()
}

/// `int min(|a|^2, |b|^2) dx`, the spatial-overlap measure for localized
/// packets. Lies in `[0, 1]` for normalized inputs.
pub fn support_overlap(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    a.same_grid(b)?;
    Ok(density_overlap(&a.density(), &b.density(), a.grid.dx()))
}

pub(crate) fn density_overlap(a: &[f64], b: &[f64], dx: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.min(*y)).sum::<f64>() * dx
}
