//! Acceptance criteria 1-10. Runs as a plain binary so every verdict line
//! is printed under `cargo test`; exits non-zero if any criterion fails.

use std::f64::consts::LN_2;
use std::time::{Duration, Instant};

use gibbs_core::counting::*;
use gibbs_core::gas::*;
use gibbs_core::quantum::*;
use num_complex::Complex64;
use rayon::prelude::*;

const N_PER_SIDE: usize = 1000;
const TEMPERATURE: f64 = 1.0;
const MEMBRANE_SPEED: f64 = 0.01;
const SEEDS: u64 = 10;
const SEEDS_REQUIRED: usize = 9;
const ENTROPY_TOLERANCE: f64 = 0.05;
const SELECTOR_AGREEMENT: f64 = 0.03;
const CYCLE_TOLERANCE: f64 = 0.05;
const RESTORED_FRACTION: f64 = 0.99;
const RUNTIME_LIMIT: Duration = Duration::from_secs(120);

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail }
    }
}

fn theory() -> f64 {
    mixing_entropy_theory(N_PER_SIDE as u64)
}

fn interval(state: &SimState) -> f64 {
    DEFAULT_THERMOSTAT_INTERVAL * state.crossing_time()
}

fn mix(seed: u64, mode: MixingMode) -> (ProcessLedger, SimState) {
    let right = match mode {
        MixingMode::DifferentGasesBySpecies => Species::B,
        _ => Species::A,
    };
    let mut state = init_gas(N_PER_SIDE, N_PER_SIDE, Species::A, right, TEMPERATURE, seed)
        .expect("initial gas");
    let dt = interval(&state);
    let speed = MEMBRANE_SPEED * state.thermal_speed();
    let ledger = state
        .run_reversible_mixing(mode, speed, dt)
        .expect("reversible mixing");
    (ledger, state)
}

fn relative(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs()
}

fn per_seed<T: Send>(f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..SEEDS).into_par_iter().map(f).collect()
}

fn criterion_1() -> Verdict {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let (first, _) = single.install(|| mix(0, MixingMode::DifferentGasesBySpecies));
    let runtime = start.elapsed();
    let mut values = vec![first.delta_s];
    values.extend(per_seed(|s| mix(s, MixingMode::DifferentGasesBySpecies).0.delta_s).into_iter().skip(1));
    let ok = values.iter().filter(|v| relative(**v, theory()) <= ENTROPY_TOLERANCE).count();
    let worst = values.iter().map(|v| relative(*v, theory())).fold(0.0, f64::max);
    Verdict::new(
        ok >= SEEDS_REQUIRED && runtime <= RUNTIME_LIMIT,
        format!(
            "different gases: {ok}/{SEEDS} seeds within 5% of {:.2} (worst {:.2}%), single-core run {:.2?}",
            theory(),
            100.0 * worst,
            runtime
        ),
    )
}

fn criterion_2() -> Verdict {
    let pairs = per_seed(|s| {
        (
            mix(s, MixingMode::SameGasByOrigin).0.delta_s,
            mix(s, MixingMode::DifferentGasesBySpecies).0.delta_s,
        )
    });
    let ok = pairs
        .iter()
        .filter(|(origin, species)| {
            relative(*origin, theory()) <= ENTROPY_TOLERANCE
                && (origin - species).abs() <= SELECTOR_AGREEMENT * origin.abs().min(species.abs())
        })
        .count();
    let mean = pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64;
    let gap = pairs
        .iter()
        .map(|(o, s)| (o - s).abs() / o.abs().min(s.abs()))
        .fold(0.0, f64::max);
    Verdict::new(
        ok >= SEEDS_REQUIRED,
        format!(
            "same gas, origin membranes: {ok}/{SEEDS} seeds within 5% and within 3% of the species run (mean {mean:.2}, largest gap {:.3}%)",
            100.0 * gap
        ),
    )
}

fn criterion_3() -> Verdict {
    let values = per_seed(|s| mix(s, MixingMode::SameGasBySpecies).0.delta_s);
    let ok = values
        .iter()
        .filter(|v| v.abs() <= ENTROPY_TOLERANCE * theory())
        .count();
    let worst = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Verdict::new(
        ok >= SEEDS_REQUIRED,
        format!("same gas, species membranes: {ok}/{SEEDS} seeds with |dS| <= 5% of 2N ln 2 (largest |dS| {worst:.3e})"),
    )
}

fn criterion_4() -> Verdict {
    let runs = per_seed(|s| {
        let (forward, mut state) = mix(s, MixingMode::SameGasByOrigin);
        let dt = interval(&state);
        let speed = MEMBRANE_SPEED * state.thermal_speed();
        let back = state.run_unmixing(speed, dt).expect("unmixing");
        let center = 0.5 * state.geometry.width;
        let restored = state.count_left_of(center, Some(Origin::Left)) as f64 / N_PER_SIDE as f64;
        (forward.delta_s, back.delta_s, restored)
    });
    let ok = runs
        .iter()
        .filter(|(f, b, r)| (f + b).abs() <= CYCLE_TOLERANCE * f.abs() && *r >= RESTORED_FRACTION)
        .count();
    let worst = runs.iter().map(|(f, b, _)| (f + b).abs() / f.abs()).fold(0.0, f64::max);
    let least = runs.iter().map(|r| r.2).fold(1.0, f64::min);
    Verdict::new(
        ok >= SEEDS_REQUIRED,
        format!(
            "mix-then-unmix: {ok}/{SEEDS} seeds with net <= 5% (worst {:.2}%) and >= 99% restored (least {:.2}%)",
            100.0 * worst,
            100.0 * least
        ),
    )
}

fn criterion_5() -> Verdict {
    let n = 1000u64;
    let model = CountingModel::new(1000.0, n, true).unwrap();
    let fixed = volume_doubling_delta(&model, false, FactorialMethod::Exact).unwrap();
    let fixed_err = relative(fixed.delta, n as f64 * LN_2);
    let doubled = volume_doubling_delta(&model, true, FactorialMethod::StirlingSimple).unwrap();
    let square_err = relative(doubled.s_after, 2.0 * doubled.s_before);
    let factor = mixing_permutation_factor(n).unwrap();
    let ratio = factor.ln_m / mixing_entropy_theory(n);
    Verdict::new(
        fixed_err <= 1e-10 && square_err <= 1e-10 && (0.992..=1.0).contains(&ratio),
        format!(
            "counting: fixed-N doubling err {fixed_err:.1e}, W -> W^2 err {square_err:.1e}, ln M / 2N ln 2 = {ratio:.6}"
        ),
    )
}

fn enumerate(m: u64, n: u64) -> [u64; 3] {
    let total = m.pow(n as u32);
    let mut multisets = std::collections::BTreeSet::new();
    let mut sets = std::collections::BTreeSet::new();
    for code in 0..total {
        let mut c = code;
        let mut digits: Vec<u64> = (0..n)
            .map(|_| {
                let d = c % m;
                c /= m;
                d
            })
            .collect();
        digits.sort_unstable();
        if digits.windows(2).all(|w| w[0] != w[1]) {
            sets.insert(digits.clone());
        }
        multisets.insert(digits);
    }
    [total, multisets.len() as u64, sets.len() as u64]
}

fn criterion_6() -> Verdict {
    let mut mismatches = Vec::new();
    for m in 1..=6u64 {
        for n in 1..=4u64 {
            let [mb, be, fd] = enumerate(m, n);
            let check = |stat, want: u64, mismatches: &mut Vec<String>| {
                let got = count_occupancies(m, n, stat).unwrap().exp();
                if (got - want as f64).abs() > 1e-9 * want as f64 {
                    mismatches.push(format!("{stat:?}({m},{n})"));
                }
            };
            check(Statistics::MaxwellBoltzmann, mb, &mut mismatches);
            check(Statistics::BoseEinstein, be, &mut mismatches);
            if n <= m {
                check(Statistics::FermiDirac, fd, &mut mismatches);
            }
            let corrected = count_occupancies(m, n, Statistics::MaxwellBoltzmannCorrected)
                .unwrap()
                .exp();
            let factorial: f64 = (1..=n).map(|i| i as f64).product();
            if (corrected * factorial - mb as f64).abs() > 1e-9 * mb as f64 {
                mismatches.push(format!("MaxwellBoltzmannCorrected({m},{n})"));
            }
        }
    }
    let m = 1_000_000u64;
    let be = statistics_reduction_ratio(m, 2, Statistics::BoseEinstein).unwrap();
    let fd = statistics_reduction_ratio(m, 2, Statistics::FermiDirac).unwrap();
    let be_oracle = 1.0 + 1.0 / m as f64;
    let fd_oracle = 1.0 - 1.0 / m as f64;
    let be_err = relative(be, be_oracle);
    let fd_err = relative(fd, fd_oracle);
    Verdict::new(
        mismatches.is_empty() && be_err <= 1e-9 && fd_err <= 1e-9,
        format!(
            "occupancy statistics: {} enumeration mismatches; BE ratio {be:.9} (err {be_err:.1e}), FD ratio {fd:.9} (err {fd_err:.1e})",
            mismatches.len()
        ),
    )
}

fn criterion_7() -> Verdict {
    let grid = Grid::new(-40.0, 40.0, 2048).unwrap();
    let free0 = gaussian_packet(grid, -5.0, 1.5, 1.0).unwrap();
    let free = ehrenfest_trace(Hamiltonian::Free, &free0, 4.0, 41, 1).unwrap();

    let grid_h = Grid::new(-20.0, 20.0, 1024).unwrap();
    let harmonic0 = gaussian_packet(grid_h, 2.0, 0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
    let samples = 129;
    let two_pi = 2.0 * std::f64::consts::PI;
    let spacing = two_pi / (samples - 1) as f64;
    let steps = (spacing / DEFAULT_TIME_STEP).ceil() as usize;
    let h = Hamiltonian::Harmonic { omega: 1.0 };
    let harmonic = ehrenfest_trace(h, &harmonic0, two_pi, samples, steps).unwrap();
    let orbit_err = harmonic
        .samples
        .iter()
        .map(|s| (s.x_mean - 2.0 * s.t.cos()).abs())
        .fold(0.0, f64::max);

    let width0 = gaussian_packet(grid, 0.0, 0.0, 1.0).unwrap();
    let width_t = evolve(&width0, Hamiltonian::Free, 2.0, 1).unwrap().width();
    let width_err = (width_t - 2f64.sqrt()).abs();

    let drift = free.norm_drift.max(harmonic.norm_drift);
    Verdict::new(
        free.max_residual <= 1e-6 && orbit_err <= 1e-4 && drift <= 1e-10 && width_err <= 1e-6,
        format!(
            "Ehrenfest: free residual {:.1e}, harmonic |<x> - 2 cos t| {orbit_err:.1e}, norm drift {drift:.1e}, width(2) - sqrt 2 = {width_err:.1e}",
            free.max_residual
        ),
    )
}

/// `<a|b>` from the full two-particle tensors on the grid.
fn brute_force_inner(a: &ManyBodyState, b: &ManyBodyState) -> Complex64 {
    let tensor = |s: &ManyBodyState| {
        let g = s.orbitals()[0].grid.points;
        let mut psi = vec![Complex64::new(0.0, 0.0); g * g];
        for term in s.terms() {
            let (f1, f2) = (&s.orbitals()[term.factors[0]], &s.orbitals()[term.factors[1]]);
            for i in 0..g {
                for j in 0..g {
                    psi[i * g + j] += term.coefficient * f1.amplitudes[i] * f2.amplitudes[j];
                }
            }
        }
        psi
    };
    let dx = a.orbitals()[0].grid.dx();
    tensor(a)
        .iter()
        .zip(tensor(b))
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>()
        * dx
        * dx
}

fn criterion_8() -> Verdict {
    let grid = Grid::new(-30.0, 30.0, 1024).unwrap();
    let mut index_gap: f64 = 0.0;
    for sym in [Symmetry::Bose, Symmetry::Fermi] {
        for packets in [
            vec![(-1.0, 0.4, 1.0), (1.5, -0.2, 1.4)],
            vec![(-6.0, 0.0, 1.0), (0.0, 0.7, 1.2), (5.0, -0.3, 0.9)],
        ] {
            let wfs: Vec<WaveFunction> = packets
                .iter()
                .map(|&(c, p, w)| gaussian_packet(grid, c, p, w).unwrap())
                .collect();
            let state = symmetrize(&wfs, sym).unwrap();
            let r0 = reduced_density(&state, 0).unwrap();
            for slot in 1..wfs.len() {
                let r = reduced_density(&state, slot).unwrap();
                index_gap = index_gap.max(r0.distance(&r).unwrap());
            }
        }
    }

    let left = gaussian_packet(grid, -10.0, 0.0, 1.0).unwrap();
    let right = gaussian_packet(grid, 10.0, 0.0, 1.0).unwrap();
    let state = symmetrize(&[left, right], Symmetry::Bose).unwrap();
    let mut eig = reduced_density(&state, 0).unwrap().eigenvalues();
    eig.sort_by(|a, b| b.total_cmp(a));
    let eig_err = (eig[0] - 0.5).abs().max((eig[1] - 0.5).abs());

    let small = Grid::new(-8.0, 8.0, 64).unwrap();
    let mut inner_err: f64 = 0.0;
    for sym in [Symmetry::Bose, Symmetry::Fermi] {
        let a = symmetrize(
            &[
                gaussian_packet(small, -1.0, 0.3, 0.9).unwrap(),
                gaussian_packet(small, 1.2, -0.5, 1.1).unwrap(),
            ],
            sym,
        )
        .unwrap();
        let b = symmetrize(
            &[
                gaussian_packet(small, -0.4, 0.1, 1.0).unwrap(),
                gaussian_packet(small, 0.8, 0.6, 1.2).unwrap(),
            ],
            sym,
        )
        .unwrap();
        let gram = inner(&a, &b).unwrap();
        inner_err = inner_err.max((gram - brute_force_inner(&a, &b)).norm());
        inner_err = inner_err.max((a.norm_sq() - brute_force_inner(&a, &a).re).abs());
    }
    Verdict::new(
        index_gap <= 1e-8 && eig_err <= 1e-8 && inner_err <= 1e-8,
        format!(
            "symmetrization and partial trace: slot gap {index_gap:.1e}, eigenvalues {{1/2, 1/2}} err {eig_err:.1e}, Gram vs tensor err {inner_err:.1e}"
        ),
    )
}

fn criterion_9() -> Verdict {
    let grid = Grid::new(-30.0, 30.0, 1024).unwrap();
    let sigma = 1.0;
    let pair = |separation: f64| {
        vec![
            gaussian_packet(grid, -0.5 * separation, 0.0, sigma).unwrap(),
            gaussian_packet(grid, 0.5 * separation, 0.0, sigma).unwrap(),
        ]
    };
    let input = pair(12.0 * sigma);
    let state = symmetrize(&input, Symmetry::Bose).unwrap();
    let base = detect_particle_decomposition(&state, 1e-6, 1e-6);
    let fidelity = base.as_ref().map_or(0.0, |d| {
        d.packets
            .iter()
            .zip(&input)
            .map(|(o, i)| overlap(o, i).unwrap().norm())
            .fold(1.0, f64::min)
    });
    let near = symmetrize(&pair(sigma), Symmetry::Bose).unwrap();
    let rejects_overlap = detect_particle_decomposition(&near, 1e-6, 1e-6).is_none();

    let mut agreeing = 0;
    if let Some(base) = &base {
        for seed in 0..10 {
            let options = DetectorOptions {
                start_seed: Some(1000 + seed),
                ..DetectorOptions::default()
            };
            let same = detect_with(&state, &options).is_some_and(|d| {
                d.packets.len() == base.packets.len()
                    && base.packets.iter().all(|p| {
                        d.packets
                            .iter()
                            .any(|q| overlap(p, q).unwrap().norm() >= 1.0 - 1e-6)
                    })
            });
            agreeing += usize::from(same);
        }
    }
    Verdict::new(
        fidelity >= 1.0 - 1e-6 && rejects_overlap && agreeing == 10,
        format!(
            "decomposition: 12-sigma fidelity {fidelity:.9}, 1-sigma rejected {rejects_overlap}, {agreeing}/10 perturbed starts agree"
        ),
    )
}

fn criterion_10() -> Verdict {
    let grid = Grid::new(-40.0, 40.0, 2048).unwrap();
    let a = gaussian_packet(grid, -10.0, 2.0, 1.0).unwrap();
    let b0 = gaussian_packet(grid, 10.0, -2.0, 1.0).unwrap();
    // exact orthogonalization against the left packet
    let proj = overlap(&a, &b0).unwrap();
    let b = WaveFunction::new(
        grid,
        b0.amplitudes
            .iter()
            .zip(&a.amplitudes)
            .map(|(y, x)| y - proj * x)
            .collect(),
    )
    .and_then(WaveFunction::normalized)
    .unwrap();
    let initial = overlap(&a, &b).unwrap().norm();

    let mut t = 0.0;
    let mut support = 0.0;
    let mut worst: f64 = initial;
    while support < 0.5 && t < 10.0 {
        t += 0.1;
        let at = evolve(&a, Hamiltonian::Free, t, 1).unwrap();
        let bt = evolve(&b, Hamiltonian::Free, t, 1).unwrap();
        support = support_overlap(&at, &bt).unwrap();
        worst = worst.max(overlap(&at, &bt).unwrap().norm());
    }
    Verdict::new(
        support >= 0.5 && worst <= 1e-8,
        format!(
            "orthogonality: support overlap {support:.3} reached at t = {t:.1}, max |<a|b>| {worst:.1e}"
        ),
    )
}

fn main() {
    let criteria: [(usize, fn() -> Verdict); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failures = 0;
    for (id, run) in criteria {
        let verdict = run();
        let tag = if verdict.passed { "PASS" } else { "FAIL" };
        println!("criterion {id:>2}: {tag} - {}", verdict.detail);
        failures += usize::from(!verdict.passed);
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 10 acceptance criteria passed");
}
