//! Unitary evolution with `hbar = m = 1`.
//!
//! Free motion is propagated exactly in momentum space. The harmonic
//! oscillator uses symmetric (Strang) splitting: half potential kick,
//! full kinetic drift, half potential kick.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::wavefunction::{overlap, WaveFunction};
use crate::error::{Error, Result};

/// Step size used where an operation picks its own step count.
pub const DEFAULT_TIME_STEP: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hamiltonian {
    Free,
    /// `V(x) = omega^2 x^2 / 2`
    Harmonic { omega: f64 },
}

impl Hamiltonian {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Hamiltonian::Free => Ok(()),
            Hamiltonian::Harmonic { omega } if omega.is_finite() && omega > 0.0 => Ok(()),
            Hamiltonian::Harmonic { omega } => {
                Err(Error::Domain(format!("oscillator frequency must be positive, got {omega}")))
            }
        }
    }

    pub fn potential(&self, x: f64) -> f64 {
        match *self {
            Hamiltonian::Free => 0.0,
            Hamiltonian::Harmonic { omega } => 0.5 * omega * omega * x * x,
        }
    }

    /// `F(x) = -dV/dx`
    pub fn force(&self, x: f64) -> f64 {
        match *self {
            Hamiltonian::Free => 0.0,
            Hamiltonian::Harmonic { omega } => -omega * omega * x,
        }
    }
}

struct Propagator {
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
    wavenumbers: Vec<f64>,
}

impl Propagator {
    fn new(wf: &WaveFunction) -> Self {
        let mut planner = FftPlanner::new();
        let n = wf.grid.points;
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            wavenumbers: wf.grid.wavenumbers(),
        }
    }

    fn drift(&self, amplitudes: &mut [Complex64], dt: f64) {
        self.forward.process(amplitudes);
        let scale = 1.0 / amplitudes.len() as f64;
        for (a, k) in amplitudes.iter_mut().zip(&self.wavenumbers) {
            *a *= Complex64::from_polar(scale, -0.5 * k * k * dt);
        }
        self.inverse.process(amplitudes);
    }
}

/// Evolves `wf` under `h` for time `t` using `steps` steps.
pub fn evolve(wf: &WaveFunction, h: Hamiltonian, t: f64, steps: usize) -> Result<WaveFunction> {
    h.validate()?;
    if steps == 0 {
        return Err(Error::Domain("evolution needs at least one step".into()));
    }
    if !t.is_finite() {
        return Err(Error::Domain(format!("evolution time {t} is not finite")));
    }
    wf.check_edges()?;
    let mut out = wf.clone();
    if t == 0.0 {
        return Ok(out);
    }
    let prop = Propagator::new(wf);
    match h {
        Hamiltonian::Free => prop.drift(&mut out.amplitudes, t),
        Hamiltonian::Harmonic { .. } => {
            let dt = t / steps as f64;
            let half_kick: Vec<Complex64> = wf
                .grid
                .positions()
                .map(|x| Complex64::from_polar(1.0, -0.5 * h.potential(x) * dt))
                .collect();
            for _ in 0..steps {
                for (a, k) in out.amplitudes.iter_mut().zip(&half_kick) {
                    *a *= k;
                }
                prop.drift(&mut out.amplitudes, dt);
                for (a, k) in out.amplitudes.iter_mut().zip(&half_kick) {
                    *a *= k;
                }
                out.check_edges()?;
            }
        }
    }
    out.check_edges()?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EhrenfestSample {
    pub t: f64,
    pub x_mean: f64,
    pub p_mean: f64,
    pub force_mean: f64,
    /// `|m d^2<x>/dt^2 - <F>|` by central difference; `None` at the ends.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EhrenfestTrace {
    pub samples: Vec<EhrenfestSample>,
    pub max_residual: f64,
    /// Largest `| ||psi(t)||^2 - ||psi(0)||^2 |` over the samples.
    pub norm_drift: f64,
}

/// Records `<x>`, `<p>` and `<F>` at `samples` equally spaced times in
/// `[0, t_max]`. Harmonic runs take `steps_per_sample` split-operator steps
/// between samples; free runs are exact.
pub fn ehrenfest_trace(
    h: Hamiltonian,
    wf0: &WaveFunction,
    t_max: f64,
    samples: usize,
    steps_per_sample: usize,
) -> Result<EhrenfestTrace> {
    if samples < 5 {
        return Err(Error::Domain(format!("need at least 5 samples, got {samples}")));
    }
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::Domain(format!("t_max must be positive, got {t_max}")));
    }
    let spacing = t_max / (samples - 1) as f64;
    let norm0 = wf0.norm_sq();
    let mut states = Vec::with_capacity(samples);
    let mut current = wf0.clone();
    for i in 0..samples {
        let t = i as f64 * spacing;
        let wf = match h {
            Hamiltonian::Free => evolve(wf0, h, t, 1)?,
            Hamiltonian::Harmonic { .. } => {
                if i > 0 {
                    current = evolve(&current, h, spacing, steps_per_sample.max(1))?;
                }
                current.clone()
            }
        };
        states.push((t, wf));
    }

    let mut out: Vec<EhrenfestSample> = states
        .iter()
        .map(|(t, wf)| EhrenfestSample {
            t: *t,
            x_mean: wf.mean_x(),
            p_mean: wf.mean_p(),
            force_mean: wf.expect_position(|x| h.force(x)),
            residual: None,
        })
        .collect();
    let mut max_residual: f64 = 0.0;
    for i in 1..samples - 1 {
        let accel =
            (out[i + 1].x_mean - 2.0 * out[i].x_mean + out[i - 1].x_mean) / (spacing * spacing);
        let r = (accel - out[i].force_mean).abs();
        out[i].residual = Some(r);
        max_residual = max_residual.max(r);
    }
    let norm_drift = states
        .iter()
        .map(|(_, wf)| (wf.norm_sq() - norm0).abs())
        .fold(0.0, f64::max);
    Ok(EhrenfestTrace {
        samples: out,
        max_residual,
        norm_drift,
    })
}

/// Largest interior Ehrenfest residual over `samples` times in `[0, t_max]`.
pub fn ehrenfest_residual(
    h: Hamiltonian,
    wf0: &WaveFunction,
    t_max: f64,
    samples: usize,
) -> Result<f64> {
    let spacing = t_max / (samples.max(2) - 1) as f64;
    let steps = (spacing / DEFAULT_TIME_STEP).ceil().max(1.0) as usize;
    Ok(ehrenfest_trace(h, wf0, t_max, samples, steps)?.max_residual)
}

/// `|<a(t)|b(t)> - <a|b>|` after evolving both states for `t`.
pub fn unitarity_orthogonality_check(
    a: &WaveFunction,
    b: &WaveFunction,
    h: Hamiltonian,
    t: f64,
) -> Result<f64> {
    let before = overlap(a, b)?;
    let steps = (t.abs() / DEFAULT_TIME_STEP).ceil().max(1.0) as usize;
    let a_t = evolve(a, h, t, steps)?;
    let b_t = evolve(b, h, t, steps)?;
    Ok((overlap(&a_t, &b_t)? - before).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::wavefunction::{gaussian_packet, Grid};
    use std::f64::consts::PI;

    /// Closed-form free Gaussian: spread by `1 + i t / (2 sigma^2)`, boosted
    /// by `p0`.
    fn free_gaussian(x: f64, t: f64, x0: f64, p0: f64, sigma: f64) -> Complex64 {
        let tau = Complex64::new(1.0, t / (2.0 * sigma * sigma));
        let norm = (2.0 * PI * sigma * sigma).powf(-0.25);
        let d = x - x0 - p0 * t;
        let gauss = (-(d * d) / (4.0 * sigma * sigma) / tau).exp();
        let phase = Complex64::from_polar(1.0, p0 * x - 0.5 * p0 * p0 * t);
        norm / tau.sqrt() * gauss * phase
    }

    #[test]
    fn free_width_at_t2() {
        let g = Grid::new(-20.0, 20.0, 1024).unwrap();
        let wf = gaussian_packet(g, 0.0, 0.0, 1.0).unwrap();
        let out = evolve(&wf, Hamiltonian::Free, 2.0, 1).unwrap();
        assert!((out.width() - 2f64.sqrt()).abs() < 1e-6);
        assert!((out.norm_sq() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn free_drift_of_center() {
        let g = Grid::new(-20.0, 20.0, 1024).unwrap();
        let wf = gaussian_packet(g, -3.0, 1.0, 1.0).unwrap();
        let out = evolve(&wf, Hamiltonian::Free, 3.0, 1).unwrap();
        assert!((out.mean_x() - 0.0).abs() < 1e-8);
    }

    #[test]
    fn zero_time_is_identity() {
        let g = Grid::new(-20.0, 20.0, 1024).unwrap();
        let wf = gaussian_packet(g, 1.0, 0.5, 1.0).unwrap();
        assert_eq!(evolve(&wf, Hamiltonian::Free, 0.0, 1).unwrap(), wf);
        assert!(evolve(&wf, Hamiltonian::Free, 1.0, 0).is_err());
    }

    #[test]
    fn free_evolution_matches_closed_form() {
        let g = Grid::new(-40.0, 40.0, 2048).unwrap();
        let (x0, p0, sigma) = (-2.0, 1.5, 1.0);
        let wf = gaussian_packet(g, x0, p0, sigma).unwrap();
        for &t in &[0.5, 1.0, 2.5, 5.0] {
            let out = evolve(&wf, Hamiltonian::Free, t, 1).unwrap();
            let err = g
                .positions()
                .zip(&out.amplitudes)
                .map(|(x, a)| (a - free_gaussian(x, t, x0, p0, sigma)).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "t = {t}: {err}");
        }
    }

    #[test]
    fn packet_running_into_edge_is_an_error() {
        let g = Grid::new(-20.0, 20.0, 1024).unwrap();
        let wf = gaussian_packet(g, 10.0, 5.0, 1.0).unwrap();
        assert!(matches!(evolve(&wf, Hamiltonian::Free, 3.0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn split_operator_is_second_order() {
        let g = Grid::new(-20.0, 20.0, 1024).unwrap();
        let h = Hamiltonian::Harmonic { omega: 1.0 };
        let wf = gaussian_packet(g, 2.0, 0.0, 0.5).unwrap();
        let reference = evolve(&wf, h, 1.0, 4096).unwrap();
        let err = |steps| {
            let out = evolve(&wf, h, 1.0, steps).unwrap();
            out.amplitudes
                .iter()
                .zip(&reference.amplitudes)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        let mut prev = err(16);
        for steps in [32, 64, 128] {
            let e = err(steps);
            assert!(prev / e >= 3.5, "steps {steps}: {prev} -> {e}");
            prev = e;
        }
    }

    #[test]
    fn harmonic_centered_packet_stays_centered() {
        let g = Grid::new(-20.0, 20.0, 1024).unwrap();
        let wf = gaussian_packet(g, 0.0, 0.0, 0.8).unwrap();
        let trace = ehrenfest_trace(Hamiltonian::Harmonic { omega: 1.0 }, &wf, 3.0, 31, 10).unwrap();
        assert!(trace.samples.iter().all(|s| s.x_mean.abs() < 1e-12));
    }

    #[test]
    fn free_residual_vanishes() {
        let g = Grid::new(-30.0, 30.0, 1024).unwrap();
        let wf = gaussian_packet(g, -5.0, 2.0, 1.0).unwrap();
        let r = ehrenfest_residual(Hamiltonian::Free, &wf, 5.0, 21).unwrap();
        assert!(r <= 1e-6, "{r}");
        assert!(ehrenfest_residual(Hamiltonian::Free, &wf, 5.0, 4).is_err());
    }

    #[test]
    fn harmonic_revival_restores_overlap() {
        let g = Grid::new(-20.0, 20.0, 1024).unwrap();
        let h = Hamiltonian::Harmonic { omega: 1.0 };
        let a = gaussian_packet(g, -1.0, 0.0, 0.7).unwrap();
        let b = gaussian_packet(g, 1.0, 0.5, 0.9).unwrap();
        let dev = unitarity_orthogonality_check(&a, &b, h, 2.0 * PI).unwrap();
        assert!(dev < 1e-6, "{dev}");
        assert!(unitarity_orthogonality_check(&a, &a, h, 2.0 * PI).unwrap() < 1e-10);
    }
}
