//! Detection of a localized-particle decomposition of a many-body state.
//!
//! The single-slot reduced density operator is diagonalized. Natural orbitals
//! whose occupations `N * lambda` round to the same integer form a group; a
//! unitary rotation inside each group is optimized to make the rotated
//! orbitals spatially disjoint (minimum total pairwise support overlap).
//! The candidate is accepted only if the packets are pairwise disjoint and
//! their (anti)symmetrized product reproduces the input state.
//!
//! Pair rotations are `a' = cos t a + e^{i f} sin t b`,
//! `b' = -e^{-i f} sin t a + cos t b`: a coarse scan over `(t, f)` followed by
//! pattern-search refinement. Groups larger than two are first rotated onto
//! the eigenvectors of the position operator projected onto the group, then
//! polished by sweeps of such pair rotations.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::many_body::{inner, reduced_density, symmetrize, ManyBodyState, Symmetry};
use super::wavefunction::{density_overlap, WaveFunction};

pub const DEFAULT_EPSILON_SUPPORT: f64 = 1e-6;
pub const DEFAULT_EPSILON_RECONSTRUCT: f64 = 1e-6;

/// Occupations further than this from an integer rule out a decomposition.
const OCCUPATION_SLACK: f64 = 0.25;
/// Natural orbitals below this weight are treated as unoccupied.
const NEGLIGIBLE_OCCUPATION: f64 = 1e-9;
const SCAN_POINTS: usize = 24;
const REFINE_FLOOR: f64 = 1e-10;
const MAX_SWEEPS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorOptions {
    pub epsilon_support: f64,
    pub epsilon_reconstruct: f64,
    /// Seed for a random unitary applied to each group before optimization.
    pub start_seed: Option<u64>,
}

impl Default for DetectorOptions {
    fn default() -> Self {
        Self {
            epsilon_support: DEFAULT_EPSILON_SUPPORT,
            epsilon_reconstruct: DEFAULT_EPSILON_RECONSTRUCT,
            start_seed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// One packet per particle, sorted by mean position, each with its
    /// largest amplitude made real and positive.
    pub packets: Vec<WaveFunction>,
    /// Some packet is occupied more than once (bosons only).
    pub degenerate_occupation: bool,
    pub max_support_overlap: f64,
    /// `min_phase || state - e^{i phase} symmetrize(packets) ||`
    pub reconstruction_error: f64,
}

pub fn detect_particle_decomposition(
    state: &ManyBodyState,
    epsilon_support: f64,
    epsilon_reconstruct: f64,
) -> Option<Decomposition> {
    detect_with(
        state,
        &DetectorOptions {
            epsilon_support,
            epsilon_reconstruct,
            start_seed: None,
        },
    )
}

pub fn detect_with(state: &ManyBodyState, options: &DetectorOptions) -> Option<Decomposition> {
    let n = state.n_particles();
    let symmetry = state.symmetry();
    if n < 2 || symmetry == Symmetry::None {
        return None;
    }
    let rho = reduced_density(state, 0).ok()?;
    let natural = rho.natural_orbitals();

    // (orbital, multiplicity) for every occupied natural orbital
    let mut occupied: Vec<(WaveFunction, usize)> = Vec::new();
    for (lambda, orbital) in natural.occupations.iter().zip(natural.orbitals) {
        if *lambda < NEGLIGIBLE_OCCUPATION {
            continue;
        }
        let occ = n as f64 * lambda;
        let k = occ.round();
        if (occ - k).abs() > OCCUPATION_SLACK {
            return None;
        }
        if k >= 1.0 {
            occupied.push((orbital, k as usize));
        }
    }
    if occupied.iter().map(|(_, k)| k).sum::<usize>() != n {
        return None;
    }
    if symmetry == Symmetry::Fermi && occupied.iter().any(|(_, k)| *k > 1) {
        return None;
    }

    let mut rng = options.start_seed.map(ChaCha8Rng::seed_from_u64);
    let mut orbitals: Vec<WaveFunction> = occupied.iter().map(|(o, _)| o.clone()).collect();
    let multiplicity: Vec<usize> = occupied.iter().map(|(_, k)| *k).collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &k) in multiplicity.iter().enumerate() {
        match groups.iter_mut().find(|g| multiplicity[g[0]] == k) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    for group in &groups {
        if group.len() < 2 {
            continue;
        }
        if let Some(rng) = rng.as_mut() {
            scramble(&mut orbitals, group, rng);
        }
        localize(&mut orbitals, group);
    }

    let mut max_support_overlap: f64 = 0.0;
    let dx = orbitals[0].grid.dx();
    let densities: Vec<Vec<f64>> = orbitals.iter().map(WaveFunction::density).collect();
    for i in 0..orbitals.len() {
        for j in i + 1..orbitals.len() {
            max_support_overlap = max_support_overlap.max(density_overlap(&densities[i], &densities[j], dx));
        }
    }
    if max_support_overlap > options.epsilon_support {
        return None;
    }

    let mut packets: Vec<WaveFunction> = Vec::with_capacity(n);
    for (orbital, k) in orbitals.into_iter().zip(&multiplicity) {
        let orbital = fix_phase(orbital);
        for _ in 0..*k {
            packets.push(orbital.clone());
        }
    }
    packets.sort_by(|a, b| a.mean_x().total_cmp(&b.mean_x()));

    let rebuilt = symmetrize(&packets, symmetry).ok()?;
    let fidelity = inner(state, &rebuilt).ok()?.norm();
    let reconstruction_error = (2.0 - 2.0 * fidelity).max(0.0).sqrt();
    if reconstruction_error > options.epsilon_reconstruct {
        return None;
    }
    Some(Decomposition {
        packets,
        degenerate_occupation: multiplicity.iter().any(|&k| k > 1),
        max_support_overlap,
        reconstruction_error,
    })
}

fn fix_phase(mut wf: WaveFunction) -> WaveFunction {
    let peak = wf
        .amplitudes
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    if peak.norm() > 0.0 {
        wf.scale(peak.conj() / peak.norm());
    }
    wf
}

fn rotate_pair(a: &WaveFunction, b: &WaveFunction, theta: f64, phi: f64) -> (WaveFunction, WaveFunction) {
    let (s, c) = theta.sin_cos();
    let e = Complex64::from_polar(1.0, phi);
    let mut a2 = a.clone();
    let mut b2 = b.clone();
    for ((x, y), (u, v)) in a2
        .amplitudes
        .iter_mut()
        .zip(b2.amplitudes.iter_mut())
        .zip(a.amplitudes.iter().zip(&b.amplitudes))
    {
        *x = c * u + e * s * v;
        *y = -e.conj() * s * u + c * v;
    }
    (a2, b2)
}

fn scramble(orbitals: &mut [WaveFunction], group: &[usize], rng: &mut ChaCha8Rng) {
    for _ in 0..2 {
        for (x, &p) in group.iter().enumerate() {
            for &q in &group[x + 1..] {
                let theta = rng.gen::<f64>() * PI;
                let phi = rng.gen::<f64>() * 2.0 * PI;
                let (a, b) = rotate_pair(&orbitals[p], &orbitals[q], theta, phi);
                orbitals[p] = a;
                orbitals[q] = b;
            }
        }
    }
}

/// Sum of support overlaps of `a` and `b` with each other and with every
/// orbital outside the pair.
fn pair_cost(a: &[f64], b: &[f64], others: &[Vec<f64>], dx: f64) -> f64 {
    let mut cost = density_overlap(a, b, dx);
    for o in others {
        cost += density_overlap(a, o, dx) + density_overlap(b, o, dx);
    }
    cost
}

/// Rotates the group onto eigenvectors of `P x P`, `P` the group projector.
fn diagonalize_position(orbitals: &mut [WaveFunction], group: &[usize]) {
    let d = group.len();
    let grid = orbitals[group[0]].grid;
    let xs: Vec<f64> = grid.positions().collect();
    let x = DMatrix::from_fn(d, d, |i, j| {
        let (a, b) = (&orbitals[group[i]].amplitudes, &orbitals[group[j]].amplitudes);
        a.iter()
            .zip(b)
            .zip(&xs)
            .map(|((u, v), x)| u.conj() * v * *x)
            .sum::<Complex64>()
            * grid.dx()
    });
    let x = (&x + x.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(x);
    let rotated: Vec<WaveFunction> = (0..d)
        .map(|k| {
            let mut amplitudes = vec![Complex64::new(0.0, 0.0); grid.points];
            for (i, &g) in group.iter().enumerate() {
                let c = eig.eigenvectors[(i, k)];
                for (out, a) in amplitudes.iter_mut().zip(&orbitals[g].amplitudes) {
                    *out += c * a;
                }
            }
            WaveFunction { grid, amplitudes }
        })
        .collect();
    for (&g, wf) in group.iter().zip(rotated) {
        orbitals[g] = wf;
    }
}

fn localize(orbitals: &mut [WaveFunction], group: &[usize]) {
    if group.len() > 2 {
        diagonalize_position(orbitals, group);
    }
    let dx = orbitals[0].grid.dx();
    let mut previous = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        let mut total = 0.0;
        for (x, &p) in group.iter().enumerate() {
            for &q in &group[x + 1..] {
                let others: Vec<Vec<f64>> = (0..orbitals.len())
                    .filter(|&r| r != p && r != q)
                    .map(|r| orbitals[r].density())
                    .collect();
                let (a, b) = (&orbitals[p], &orbitals[q]);
                let cost = |theta: f64, phi: f64| {
                    let (a2, b2) = rotate_pair(a, b, theta, phi);
                    pair_cost(&a2.density(), &b2.density(), &others, dx)
                };
                let (theta, phi, best) = minimize_pair(&cost);
                let (a2, b2) = rotate_pair(a, b, theta, phi);
                orbitals[p] = a2;
                orbitals[q] = b2;
                total += best;
            }
        }
        if group.len() == 2 || (previous - total).abs() <= 1e-14 * previous.max(1e-300) {
            break;
        }
        previous = total;
    }
}

fn minimize_pair(cost: &impl Fn(f64, f64) -> f64) -> (f64, f64, f64) {
    let mut best = (0.0, 0.0, cost(0.0, 0.0));
    for i in 0..SCAN_POINTS {
        let theta = (i as f64 + 0.5) * 0.5 * PI / SCAN_POINTS as f64;
        for j in 0..SCAN_POINTS {
            let phi = j as f64 * 2.0 * PI / SCAN_POINTS as f64;
            let c = cost(theta, phi);
            if c < best.2 {
                best = (theta, phi, c);
            }
        }
    }
    let mut step = PI / SCAN_POINTS as f64;
    while step > REFINE_FLOOR {
        let mut improved = false;
        for (dt, dp) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let (t, p) = (best.0 + dt, best.1 + dp);
            let c = cost(t, p);
            if c < best.2 {
                best = (t, p, c);
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}
