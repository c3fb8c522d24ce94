//! Microstate bookkeeping for `S = k ln W` with `k = 1`.
//!
//! Every count is carried as a natural logarithm; `(2N)!` overflows a `u64`
//! at `N = 11`. The per-particle state count `X` is an abstract number
//! proportional to the accessible volume. No phase-space cell size is
//! modelled, so absolute entropies are only meaningful through differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How `ln n!` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorialMethod {
    /// `sum_{i=1..n} ln i`
    Exact,
    /// `n ln n - n`
    StirlingSimple,
    /// `n ln n - n + ln(2 pi n) / 2`
    StirlingCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exactness {
    Exact,
    Stirling,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyValue {
    /// Entropy in units of k.
    pub value: f64,
    pub exactness: Exactness,
}

/// `(X, N, corrected)`: `W = X^N`, or `X^N / N!` when corrected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountingModel {
    pub per_particle_states: f64,
    pub n_particles: u64,
    pub corrected: bool,
}

impl CountingModel {
    pub fn new(per_particle_states: f64, n_particles: u64, corrected: bool) -> Result<Self> {
        if !per_particle_states.is_finite() || per_particle_states < 1.0 {
            return Err(Error::Domain(format!(
                "per-particle state count must be finite and >= 1, got {per_particle_states}"
            )));
        }
        Ok(Self {
            per_particle_states,
            n_particles,
            corrected,
        })
    }
}

/// Occupancy statistics for `n` particles over `m` one-particle modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistics {
    MaxwellBoltzmann,
    /// Maxwell-Boltzmann with the `1/n!` correction.
    MaxwellBoltzmannCorrected,
    BoseEinstein,
    FermiDirac,
}

pub fn log_factorial(n: u64, method: FactorialMethod) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let x = n as f64;
    match method {
        FactorialMethod::Exact => compensated_sum((2..=n).map(|i| (i as f64).ln())),
        FactorialMethod::StirlingSimple => x * x.ln() - x,
        FactorialMethod::StirlingCorrected => {
            x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        }
    }
}

/// Neumaier summation; keeps `ln n!` within a few ulp for large `n`.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// `ln C(n, k)` as a sum of `min(k, n-k)` small logarithms, which keeps the
/// result accurate when it is the small difference of two huge factorials.
pub fn log_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::Domain(format!("binomial C({n}, {k}) with k > n")));
    }
    let k = k.min(n - k);
    let base = (n - k) as f64;
    Ok((1..=k).map(|i| ((base + i as f64) / i as f64).ln()).sum())
}

fn exactness_of(method: FactorialMethod) -> Exactness {
    match method {
        FactorialMethod::Exact => Exactness::Exact,
        _ => Exactness::Stirling,
    }
}

/// `ln(X^N)` or `ln(X^N / N!)` depending on `model.corrected`.
pub fn entropy(model: &CountingModel, method: FactorialMethod) -> EntropyValue {
    let n = model.n_particles;
    let mut value = n as f64 * model.per_particle_states.ln();
    let mut exactness = Exactness::Exact;
    if model.corrected {
        value -= log_factorial(n, method);
        exactness = exactness_of(method);
    }
    EntropyValue { value, exactness }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeDoubling {
    pub s_before: f64,
    pub s_after: f64,
    pub delta: f64,
}

/// Entropy change when the per-particle state count doubles (`X -> 2X`),
/// optionally together with the particle number (`N -> 2N`).
pub fn volume_doubling_delta(
    before: &CountingModel,
    double_n: bool,
    method: FactorialMethod,
) -> Result<VolumeDoubling> {
    if before.n_particles == 0 {
        return Err(Error::Domain("volume doubling needs at least one particle".into()));
    }
    let after = CountingModel {
        per_particle_states: 2.0 * before.per_particle_states,
        n_particles: if double_n {
            2 * before.n_particles
        } else {
            before.n_particles
        },
        corrected: before.corrected,
    };
    let s_before = entropy(before, method).value;
    let s_after = entropy(&after, method).value;
    Ok(VolumeDoubling {
        s_before,
        s_after,
        delta: s_after - s_before,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationFactor {
    /// `ln M`, `M = (2N)! / (N! N!)`.
    pub ln_m: f64,
    /// `M` itself when it fits in a `u128`.
    pub m: Option<u128>,
    /// `k ln M`.
    pub delta_s: f64,
}

/// Number of left/right exchanges discarded by dividing by `(2N)!` instead
/// of `N! N!`.
pub fn mixing_permutation_factor(n_per_side: u64) -> Result<PermutationFactor> {
    if n_per_side == 0 {
        return Err(Error::Domain("permutation factor needs N >= 1".into()));
    }
    let ln_m = log_factorial(2 * n_per_side, FactorialMethod::Exact)
        - 2.0 * log_factorial(n_per_side, FactorialMethod::Exact);
    Ok(PermutationFactor {
        ln_m,
        m: exact_binomial(2 * n_per_side, n_per_side),
        delta_s: ln_m,
    })
}

/// Ideal-gas mixing entropy `2 N ln 2` for `N` particles on each side.
pub fn mixing_entropy_theory(n_per_side: u64) -> f64 {
    2.0 * n_per_side as f64 * std::f64::consts::LN_2
}

fn exact_binomial(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        // acc * (n - k + i) is divisible by i at every step
        acc = acc.checked_mul(n as u128 - k as u128 + i)? / i;
    }
    Some(acc)
}

/// Log of the number of ways to place `n` particles into `m` modes.
pub fn count_occupancies(m: u64, n: u64, statistics: Statistics) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("need at least one mode".into()));
    }
    let ln_m = (m as f64).ln();
    match statistics {
        Statistics::MaxwellBoltzmann => Ok(n as f64 * ln_m),
        Statistics::MaxwellBoltzmannCorrected => {
            Ok(n as f64 * ln_m - log_factorial(n, FactorialMethod::Exact))
        }
        Statistics::BoseEinstein => log_binomial(m + n - 1, n),
        Statistics::FermiDirac => {
            if n > m {
                return Err(Error::Domain(format!(
                    "Fermi-Dirac occupation of {n} particles in {m} modes violates exclusion"
                )));
            }
            log_binomial(m, n)
        }
    }
}

/// `count(statistics) / count(MaxwellBoltzmannCorrected)`. Tends to one in
/// the dilute limit `m / n -> infinity`.
pub fn statistics_reduction_ratio(m: u64, n: u64, statistics: Statistics) -> Result<f64> {
    match statistics {
        Statistics::BoseEinstein | Statistics::FermiDirac => {}
        other => {
            return Err(Error::Domain(format!(
                "reduction ratio is defined for quantum statistics, got {other:?}"
            )))
        }
    }
    let quantum = count_occupancies(m, n, statistics)?;
    let classical = count_occupancies(m, n, Statistics::MaxwellBoltzmannCorrected)?;
    Ok((quantum - classical).exp())
}
