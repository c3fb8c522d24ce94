use gibbs_core::counting::*;
use gibbs_core::gas::*;
use gibbs_core::quantum::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn occupancy_counts_are_ordered(m in 2u64..400, n in 1u64..8) {
        prop_assume!(n <= m);
        let fd = count_occupancies(m, n, Statistics::FermiDirac).unwrap();
        let mbc = count_occupancies(m, n, Statistics::MaxwellBoltzmannCorrected).unwrap();
        let be = count_occupancies(m, n, Statistics::BoseEinstein).unwrap();
        let mb = count_occupancies(m, n, Statistics::MaxwellBoltzmann).unwrap();
        prop_assert!(fd <= mbc + 1e-12);
        prop_assert!(mbc <= be + 1e-12);
        prop_assert!(be <= mb + 1e-12);
    }

    #[test]
    fn reduction_ratios_approach_one_from_either_side(m in 10u64..100_000, n in 2u64..6) {
        let be = statistics_reduction_ratio(m, n, Statistics::BoseEinstein).unwrap();
        let fd = statistics_reduction_ratio(m, n, Statistics::FermiDirac).unwrap();
        prop_assert!(be >= 1.0 && fd <= 1.0);
        let be2 = statistics_reduction_ratio(10 * m, n, Statistics::BoseEinstein).unwrap();
        let fd2 = statistics_reduction_ratio(10 * m, n, Statistics::FermiDirac).unwrap();
        prop_assert!(be2 <= be && fd2 >= fd);
    }

    #[test]
    fn binomial_is_symmetric_and_matches_factorials(n in 0u64..3000, k in 0u64..3000) {
        prop_assume!(k <= n);
        let a = log_binomial(n, k).unwrap();
        let b = log_binomial(n, n - k).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        let via = log_factorial(n, FactorialMethod::Exact)
            - log_factorial(k, FactorialMethod::Exact)
            - log_factorial(n - k, FactorialMethod::Exact);
        prop_assert!((a - via).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn fixed_n_doubling_is_n_ln2(x in 1.0f64..1e6, n in 1u64..5000, corrected: bool) {
        let model = CountingModel::new(x, n, corrected).unwrap();
        let d = volume_doubling_delta(&model, false, FactorialMethod::Exact).unwrap();
        let expected = n as f64 * std::f64::consts::LN_2;
        prop_assert!((d.delta - expected).abs() <= 1e-9 * expected.max(d.s_after.abs()));
    }
}

#[derive(Debug, Clone)]
enum Step {
    Advance(f64),
    Thermostat,
    Isotropize,
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        (0.0f64..2.0).prop_map(Step::Advance),
        Just(Step::Thermostat),
        Just(Step::Isotropize),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn particles_and_tags_survive_every_operation(
        n_left in 1usize..40,
        n_right in 1usize..40,
        seed in any::<u64>(),
        steps in prop::collection::vec(step(), 1..12),
    ) {
        let mut s = init_gas(n_left, n_right, Species::A, Species::B, 1.0, seed).unwrap();
        s.remove_partition().unwrap();
        let tags: Vec<(Origin, Species)> =
            s.particles.iter().map(|p| (p.origin(), p.species)).collect();
        s.install_membrane(Membrane {
            x: 0.5,
            speed: 0.005,
            selectivity: Selectivity::ByOrigin(Origin::Right),
        }).unwrap();
        for st in steps {
            match st {
                Step::Advance(t) => { s.advance(t).unwrap(); }
                Step::Thermostat => { s.thermostat().unwrap(); }
                Step::Isotropize => s.isotropize(),
            }
            prop_assert_eq!(s.n_particles(), n_left + n_right);
            let now: Vec<(Origin, Species)> =
                s.particles.iter().map(|p| (p.origin(), p.species)).collect();
            prop_assert_eq!(&now, &tags);
            let m = s.membranes[0].x;
            for p in &s.particles {
                prop_assert!((0.0..=1.0).contains(&p.position[0]));
                prop_assert!((0.0..=1.0).contains(&p.position[1]));
                if p.origin() == Origin::Left {
                    prop_assert!(p.position[0] <= m);
                }
            }
        }
    }

    #[test]
    fn isotropize_keeps_energy_and_directions(seed in any::<u64>()) {
        let mut s = init_gas(50, 50, Species::A, Species::A, 1.3, seed).unwrap();
        let before = s.particles.clone();
        let ke = s.kinetic_energy();
        s.isotropize();
        prop_assert!((s.kinetic_energy() - ke).abs() <= 1e-12 * ke);
        for (a, b) in before.iter().zip(&s.particles) {
            prop_assert_eq!(a.position, b.position);
            prop_assert!(a.velocity[0].signum() == b.velocity[0].signum());
            prop_assert!(a.velocity[1].signum() == b.velocity[1].signum());
        }
    }
}

fn grid() -> Grid {
    Grid::new(-40.0, 40.0, 1024).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn symmetrized_states_are_normalized_and_index_symmetric(
        c0 in -25.0f64..-5.0,
        gap in 0.5f64..15.0,
        p0 in -1.0f64..1.0,
        p1 in -1.0f64..1.0,
        fermi: bool,
    ) {
        let a = gaussian_packet(grid(), c0, p0, 1.0).unwrap();
        let b = gaussian_packet(grid(), c0 + gap, p1, 1.3).unwrap();
        let sym = if fermi { Symmetry::Fermi } else { Symmetry::Bose };
        let state = symmetrize(&[a, b], sym).unwrap();
        prop_assert!((state.norm_sq() - 1.0).abs() <= 1e-10);
        let r0 = reduced_density(&state, 0).unwrap();
        let r1 = reduced_density(&state, 1).unwrap();
        prop_assert!(r0.distance(&r1).unwrap() <= 1e-8);
        prop_assert!((r0.trace().re - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn detection_is_a_fixed_point(
        c0 in -20.0f64..-12.0,
        gap in 14.0f64..20.0,
        p0 in -1.0f64..1.0,
        p1 in -1.0f64..1.0,
        fermi: bool,
    ) {
        let a = gaussian_packet(grid(), c0, p0, 1.0).unwrap();
        let b = gaussian_packet(grid(), c0 + gap, p1, 1.0).unwrap();
        let sym = if fermi { Symmetry::Fermi } else { Symmetry::Bose };
        let state = symmetrize(&[a, b], sym).unwrap();
        let first = detect_particle_decomposition(&state, 1e-6, 1e-6).expect("separated packets");
        let again = symmetrize(&first.packets, sym).unwrap();
        let second = detect_particle_decomposition(&again, 1e-6, 1e-6).expect("fixed point");
        for (x, y) in first.packets.iter().zip(&second.packets) {
            prop_assert!(overlap(x, y).unwrap().norm() >= 1.0 - 1e-8);
        }
    }
}
