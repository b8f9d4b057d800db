use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xlris::ao::{solve_no_jamming_baseline, solve_p1, AoSettings};
use xlris::geometry::{realize_channels, ArrayConfig, ChannelModel, ChannelSet, FadingParams, SceneGeometry};
use xlris::qcqp::{solve, AffineConstraint, Constraint, QcqpProblem, SolverSettings, SolverStatus};
use xlris::ris::{PhaseAlphabet, ProjectionMode};
use xlris::secrecy::{cascade, check_constraints, NoiseAndLimits};
use xlris::{CMat, CVec, C64};

fn channels(seed: u64) -> ChannelSet {
    let array = ArrayConfig::half_wavelength(2, 4, 2, 10e9).unwrap();
    realize_channels(
        &array,
        &SceneGeometry::default(),
        &FadingParams::default(),
        ChannelModel::NearField,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
    .unwrap()
}

#[test]
fn jamming_solution_is_feasible_and_never_regresses() {
    let limits = NoiseAndLimits::default();
    for seed in 0..4 {
        let ch = channels(seed);
        let sol = solve_p1(&ch, &limits, &AoSettings::default()).unwrap();
        let c = cascade(&ch, &sol.ris).unwrap();
        let rep = check_constraints(&c, &sol.precoders, &sol.ris, &limits, 1e-6);
        assert!(rep.all_satisfied(), "seed {seed}: {rep:?}");
        let rates = sol.trace.rates();
        assert!(rates.windows(2).all(|w| w[1] >= w[0] - 1e-6), "seed {seed}: {rates:?}");
        assert!((sol.rates.secrecy - rates.last().unwrap()).abs() < 1e-9);
    }
}

#[test]
fn no_jamming_baseline_keeps_jamming_stream_off() {
    let limits = NoiseAndLimits::default();
    let ch = channels(11);
    let sol = solve_no_jamming_baseline(&ch, &limits, &AoSettings::default()).unwrap();
    assert!(sol.precoders.w_jam.norm() < 1e-12);
    assert!(sol.precoders.total_power() <= limits.p_max * (1.0 + 1e-6));
}

#[test]
fn discrete_solution_lies_on_the_alphabet() {
    let limits = NoiseAndLimits::default();
    let alphabet = PhaseAlphabet::new(2).unwrap();
    let settings = AoSettings {
        mode: ProjectionMode::Discrete(2),
        ..Default::default()
    };
    let sol = solve_p1(&channels(5), &limits, &settings).unwrap();
    for z in sol.ris.v.iter() {
        let k = alphabet.nearest(*z);
        assert!((z - C64::from_polar(1.0, alphabet.level(k))).norm() < 1e-12);
    }
}

fn random_hermitian_psd(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    a.adjoint() * &a
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> CVec {
    CVec::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn qcqp_optimum_beats_feasible_samples(seed in 0u64..10_000, n in 1usize..5, radius in 0.5f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = QcqpProblem::new(random_hermitian_psd(n, &mut rng), random_vec(n, &mut rng) * C64::from(4.0), 0.0);
        p.push(Constraint::Ball { radius_sq: radius * radius });
        // a half-space that keeps the origin strictly inside
        p.push(Constraint::Affine(AffineConstraint { a: random_vec(n, &mut rng), b: -0.1 }));
        let rep = solve(&p, None, &SolverSettings::default()).unwrap();
        prop_assert_eq!(rep.status, SolverStatus::Optimal);
        prop_assert!(p.max_violation(&rep.solution) < 1e-6);
        let f = p.objective(&rep.solution);
        let scale = 1.0 + f.abs();
        for _ in 0..200 {
            let y = random_vec(n, &mut rng);
            let y = &y * C64::from(radius * rng.random_range(0.0..1.0) / y.norm().max(1e-12));
            if p.max_violation(&y) == 0.0 {
                prop_assert!(f <= p.objective(&y) + 1e-6 * scale, "{} > {}", f, p.objective(&y));
            }
        }
    }

    #[test]
    fn channel_draws_are_reproducible(seed in 0u64..1_000) {
        let a = channels(seed);
        let b = channels(seed);
        prop_assert_eq!(a.g, b.g);
        prop_assert_eq!(a.h, b.h);
        prop_assert_eq!(a.f, b.f);
    }
}
