//! Many-particle states kept as symbolic sums of product terms over a shared
//! list of one-particle orbitals. Inner products and partial traces reduce to
//! algebra on the orbital Gram matrix `G[p][q] = <phi_p|phi_q>`, so no
//! N-index tensor is ever formed.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::wavefunction::{raw_overlap, WaveFunction};
use crate::error::{Error, Result};

/// Tolerance for permutation classification and zero-state detection.
pub const STATE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    Bose,
    Fermi,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coefficient: Complex64,
    /// Orbital index for each particle slot.
    pub factors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyState {
    orbitals: Vec<WaveFunction>,
    terms: Vec<Term>,
    n_particles: usize,
    symmetry: Symmetry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationClass {
    Invariant,
    SignFlip,
    Neither,
}

/// All permutations of `0..n` with their signs, in lexicographic order.
pub fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<(Vec<usize>, f64)>) {
        let n = used.len();
        if prefix.len() == n {
            let mut inversions = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if prefix[i] > prefix[j] {
                        inversions += 1;
                    }
                }
            }
            let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
            out.push((prefix.clone(), sign));
            return;
        }
        for k in 0..n {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

pub fn permanent(m: &DMatrix<Complex64>) -> Complex64 {
    let n = m.nrows();
    permutations(n)
        .iter()
        .map(|(p, _)| p.iter().enumerate().map(|(i, &j)| m[(i, j)]).product::<Complex64>())
        .sum()
}

pub fn gram_matrix(a: &[WaveFunction], b: &[WaveFunction]) -> DMatrix<Complex64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| raw_overlap(&a[i], &b[j]))
}

fn check_grids(orbitals: &[WaveFunction]) -> Result<()> {
    if let Some(first) = orbitals.first() {
        for o in &orbitals[1..] {
            first.same_grid(o)?;
        }
    }
    Ok(())
}

impl ManyBodyState {
    /// General constructor; every term must have one factor per particle.
    pub fn new(
        orbitals: Vec<WaveFunction>,
        terms: Vec<Term>,
        n_particles: usize,
        symmetry: Symmetry,
    ) -> Result<Self> {
        check_grids(&orbitals)?;
        for t in &terms {
            if t.factors.len() != n_particles || t.factors.iter().any(|&f| f >= orbitals.len()) {
                return Err(Error::Domain(format!(
                    "term {:?} does not match {n_particles} particles over {} orbitals",
                    t.factors,
                    orbitals.len()
                )));
            }
        }
        Ok(Self {
            orbitals,
            terms,
            n_particles,
            symmetry,
        })
    }

    /// Unsymmetrized product `|phi_1>|phi_2>...`.
    pub fn product(orbitals: Vec<WaveFunction>) -> Result<Self> {
        let n = orbitals.len();
        let terms = vec![Term {
            coefficient: Complex64::new(1.0, 0.0),
            factors: (0..n).collect(),
        }];
        let mut state = Self::new(orbitals, terms, n, Symmetry::None)?;
        state.normalize()?;
        Ok(state)
    }

    pub fn orbitals(&self) -> &[WaveFunction] {
        &self.orbitals
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn gram(&self) -> DMatrix<Complex64> {
        gram_matrix(&self.orbitals, &self.orbitals)
    }

    pub fn norm_sq(&self) -> f64 {
        inner(self, self).map(|z| z.re).unwrap_or(0.0)
    }

    fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sq();
        if !(n > STATE_TOLERANCE * STATE_TOLERANCE) {
            return Err(Error::ZeroState("state has zero norm".into()));
        }
        let s = 1.0 / n.sqrt();
        for t in &mut self.terms {
            t.coefficient *= s;
        }
        Ok(())
    }

    /// Same state with particle slots `i` and `j` exchanged in every term.
    pub fn transposed(&self, i: usize, j: usize) -> Result<Self> {
        if i >= self.n_particles || j >= self.n_particles {
            return Err(Error::Domain(format!(
                "transposition ({i}, {j}) out of range for {} particles",
                self.n_particles
            )));
        }
        let mut out = self.clone();
        for t in &mut out.terms {
            t.factors.swap(i, j);
        }
        Ok(out)
    }
}

/// `<a|b>` by expanding both term lists against the cross Gram matrix.
pub fn inner(a: &ManyBodyState, b: &ManyBodyState) -> Result<Complex64> {
    if a.n_particles != b.n_particles {
        return Err(Error::Domain(format!(
            "inner product of {}- and {}-particle states",
            a.n_particles, b.n_particles
        )));
    }
    if let (Some(x), Some(y)) = (a.orbitals.first(), b.orbitals.first()) {
        x.same_grid(y)?;
    }
    let g = gram_matrix(&a.orbitals, &b.orbitals);
    let mut acc = Complex64::new(0.0, 0.0);
    for ta in &a.terms {
        for tb in &b.terms {
            let prod: Complex64 = ta
                .factors
                .iter()
                .zip(&tb.factors)
                .map(|(&p, &q)| g[(p, q)])
                .product();
            acc += ta.coefficient.conj() * tb.coefficient * prod;
        }
    }
    Ok(acc)
}

/// Normalized (anti)symmetrized product of the given packets.
///
/// The prefactor comes from the Gram matrix: `1/sqrt(N! perm G)` for bosons
/// and `1/sqrt(N! det G)` for fermions. For orthonormal packets both reduce
/// to `1/sqrt(N!)`.
pub fn symmetrize(packets: &[WaveFunction], symmetry: Symmetry) -> Result<ManyBodyState> {
    let n = packets.len();
    if n < 2 {
        return Err(Error::Domain(format!("symmetrization needs N >= 2, got {n}")));
    }
    if symmetry == Symmetry::None {
        return Err(Error::Domain("symmetrize needs Bose or Fermi symmetry".into()));
    }
    check_grids(packets)?;
    let g = gram_matrix(packets, packets);
    let weight = match symmetry {
        Symmetry::Bose => permanent(&g).re,
        _ => g.clone().determinant().re,
    };
    if !(weight > STATE_TOLERANCE * STATE_TOLERANCE) {
        return Err(Error::ZeroState(format!(
            "{symmetry:?} symmetrization of these packets vanishes (Gram weight {weight:.3e})"
        )));
    }
    let n_fact: f64 = (1..=n).map(|k| k as f64).product();
    let c = 1.0 / (n_fact * weight).sqrt();
    let terms = permutations(n)
        .into_iter()
        .map(|(perm, sign)| {
            let s = if symmetry == Symmetry::Fermi { sign } else { 1.0 };
            Term {
                coefficient: Complex64::new(s * c, 0.0),
                factors: perm,
            }
        })
        .collect();
    ManyBodyState::new(packets.to_vec(), terms, n, symmetry)
}

/// Compares the state with its transposed copy: equal, opposite, or neither.
pub fn permutation_check(
    state: &ManyBodyState,
    transposition: (usize, usize),
) -> Result<PermutationClass> {
    let (i, j) = transposition;
    let swapped = state.transposed(i, j)?;
    let nn = inner(state, state)?.re;
    let ss = inner(&swapped, &swapped)?.re;
    let ns = inner(state, &swapped)?.re;
    let minus = (nn + ss - 2.0 * ns).max(0.0).sqrt();
    let plus = (nn + ss + 2.0 * ns).max(0.0).sqrt();
    let scale = nn.sqrt().max(f64::MIN_POSITIVE);
    Ok(if minus <= STATE_TOLERANCE * scale {
        PermutationClass::Invariant
    } else if plus <= STATE_TOLERANCE * scale {
        PermutationClass::SignFlip
    } else {
        PermutationClass::Neither
    })
}

/// One-particle operator `rho = sum_kl M_kl |phi_k><phi_l|` over a possibly
/// non-orthogonal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    pub basis: Vec<WaveFunction>,
    pub matrix: DMatrix<Complex64>,
}

/// Orthonormal frame for the span of a basis, from `G = V D V^dagger`.
struct Frame {
    /// Columns `V_j sqrt(d_j)` for the retained eigenvectors; maps the
    /// coefficient matrix into the orthonormal frame by `T^dagger M T`.
    to_frame: DMatrix<Complex64>,
    /// Columns `V_j / sqrt(d_j)`: frame vectors as combinations of the basis.
    functions: DMatrix<Complex64>,
}

fn frame(gram: &DMatrix<Complex64>) -> Frame {
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&j| eig.eigenvalues[j] > 1e-12 * max.max(1e-300))
        .collect();
    let n = gram.nrows();
    let mut to_frame = DMatrix::zeros(n, keep.len());
    let mut functions = DMatrix::zeros(n, keep.len());
    for (c, &j) in keep.iter().enumerate() {
        let d = eig.eigenvalues[j];
        for r in 0..n {
            to_frame[(r, c)] = eig.eigenvectors[(r, j)] * d.sqrt();
            functions[(r, c)] = eig.eigenvectors[(r, j)] / d.sqrt();
        }
    }
    Frame { to_frame, functions }
}

fn combine(basis: &[WaveFunction], coefficients: impl Iterator<Item = Complex64>) -> WaveFunction {
    let grid = basis[0].grid;
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); grid.points];
    for (phi, c) in basis.iter().zip(coefficients) {
        if c != Complex64::new(0.0, 0.0) {
            for (a, p) in amplitudes.iter_mut().zip(&phi.amplitudes) {
                *a += c * p;
            }
        }
    }
    WaveFunction { grid, amplitudes }
}

/// Eigen-decomposition of a density operator: eigenvalues (descending) and
/// the corresponding orthonormal grid functions.
#[derive(Debug, Clone)]
pub struct NaturalOrbitals {
    pub occupations: Vec<f64>,
    pub orbitals: Vec<WaveFunction>,
}

impl DensityOperator {
    pub fn gram(&self) -> DMatrix<Complex64> {
        gram_matrix(&self.basis, &self.basis)
    }

    /// `Tr(M G)`
    pub fn trace(&self) -> Complex64 {
        (&self.matrix * self.gram()).trace()
    }

    /// Matrix of the operator in an orthonormal frame of its basis span.
    pub fn orthonormal_matrix(&self) -> DMatrix<Complex64> {
        let f = frame(&self.gram());
        f.to_frame.adjoint() * &self.matrix * &f.to_frame
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let m = self.orthonormal_matrix();
        (&m - m.adjoint()).iter().all(|z| z.norm() <= tol)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.orthonormal_matrix();
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn natural_orbitals(&self) -> NaturalOrbitals {
        let f = frame(&self.gram());
        let m = f.to_frame.adjoint() * &self.matrix * &f.to_frame;
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut occupations = Vec::new();
        let mut orbitals = Vec::new();
        for j in order {
            // basis coefficients of this eigenvector
            let coeffs = &f.functions * eig.eigenvectors.column(j);
            occupations.push(eig.eigenvalues[j]);
            orbitals.push(combine(&self.basis, coeffs.iter().copied()));
        }
        NaturalOrbitals {
            occupations,
            orbitals,
        }
    }

    /// Operator (spectral) norm of `self - other`.
    pub fn distance(&self, other: &DensityOperator) -> Result<f64> {
        let mut basis = self.basis.clone();
        basis.extend(other.basis.iter().cloned());
        check_grids(&basis)?;
        let (n, m) = (self.basis.len(), other.basis.len());
        let mut matrix = DMatrix::zeros(n + m, n + m);
        matrix.view_mut((0, 0), (n, n)).copy_from(&self.matrix);
        matrix
            .view_mut((n, n), (m, m))
            .copy_from(&(-other.matrix.clone()));
        let diff = DensityOperator { basis, matrix };
        Ok(diff
            .eigenvalues()
            .into_iter()
            .map(f64::abs)
            .fold(0.0, f64::max))
    }

    /// `<x|rho|x'>` on the grid.
    pub fn kernel(&self, x: usize, x_prime: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..self.basis.len() {
            for l in 0..self.basis.len() {
                acc += self.matrix[(k, l)]
                    * self.basis[k].amplitudes[x]
                    * self.basis[l].amplitudes[x_prime].conj();
            }
        }
        acc
    }
}

/// Partial trace over every slot except `slot`.
pub fn reduced_density(state: &ManyBodyState, slot: usize) -> Result<DensityOperator> {
    if slot >= state.n_particles {
        return Err(Error::Domain(format!(
            "slot {slot} out of range for {} particles",
            state.n_particles
        )));
    }
    let g = state.gram();
    let n_orb = state.orbitals.len();
    let mut matrix = DMatrix::zeros(n_orb, n_orb);
    for ta in &state.terms {
        for tb in &state.terms {
            let mut w = ta.coefficient * tb.coefficient.conj();
            for i in 0..state.n_particles {
                if i != slot {
                    w *= g[(tb.factors[i], ta.factors[i])];
                }
            }
            matrix[(ta.factors[slot], tb.factors[slot])] += w;
        }
    }
    Ok(DensityOperator {
        basis: state.orbitals.clone(),
        matrix,
    })
}
