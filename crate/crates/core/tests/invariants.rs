use ahflow_core::flow::{
    fit_expansion, kappa_evolve, kappa_rk4, FlowGrid, KappaMethod, KappaState, KappaSystem,
};
use ahflow_core::geometry::{
    build_perturbed, expansion_coefficient_check, gauss_codazzi_check, RadialChart,
};
use ahflow_core::mass::{
    ch_mass_series, einstein_radial_leading, mass_aspect, normalize_gauge, wang_mass,
    BoundaryData, SigmaField,
};
use ahflow_core::scalar::{rat, Rational, Scalar};
use ahflow_core::series::LaurentSeries;
use ahflow_core::tensor::{random_kappa, random_symmetric_kappa, KappaTensor, SymTensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Series = LaurentSeries<Rational>;

const ORDER: i32 = 12;

fn small_rational() -> impl Strategy<Value = Rational> {
    (-9i64..=9, 1i64..=9).prop_map(|(p, q)| rat(p, q))
}

fn series() -> impl Strategy<Value = Series> {
    prop::collection::vec(small_rational(), ORDER as usize)
        .prop_map(|c| Series::new(0, c, ORDER))
}

fn unit_series() -> impl Strategy<Value = Series> {
    (series(), (1i64..=9, 1i64..=9)).prop_map(|(s, (p, q))| {
        s.add(&Series::constant(rat(p, q), ORDER).sub(&Series::constant(
            s.coeff(0).unwrap(),
            ORDER,
        )))
    })
}

/// `x (1 + c_1 x + ...)`.
fn near_identity() -> impl Strategy<Value = Series> {
    prop::collection::vec(small_rational(), 6).prop_map(|mut c| {
        c.insert(0, rat(1, 1));
        Series::new(1, c, ORDER)
    })
}

/// Known coefficients of two series agree up to the lower truncation order.
fn assert_agree(a: &Series, b: &Series) {
    let order = a.order().min(b.order());
    let low = a.low().min(b.low());
    for e in low..order {
        assert_eq!(a.coeff(e).unwrap(), b.coeff(e).unwrap(), "x^{e}");
    }
}

fn torus(n: usize) -> RadialChart {
    RadialChart::unit_torus(n).unwrap()
}

fn kappa_for(n: usize, k: u8, seed: u64) -> KappaTensor<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if k == 1 {
        random_symmetric_kappa(n, &mut rng)
    } else {
        random_kappa(n, &mut rng)
    }
}

fn chart_for(n: usize, k: u8) -> RadialChart {
    if k == 1 {
        RadialChart::sphere(n).unwrap()
    } else {
        torus(n)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn product_is_associative(a in series(), b in series(), c in series()) {
        assert_agree(&a.mul(&b).mul(&c), &a.mul(&b.mul(&c)));
    }

    #[test]
    fn reciprocal_inverts(a in unit_series()) {
        let one = a.mul(&a.reciprocal().unwrap());
        assert_agree(&one, &Series::one(ORDER));
        prop_assert_eq!(one.order(), ORDER);
    }

    #[test]
    fn derivative_obeys_leibniz(a in series(), b in series()) {
        let lhs = a.mul(&b).derivative();
        let rhs = a.derivative().mul(&b).add(&a.mul(&b.derivative()));
        assert_agree(&lhs, &rhs);
    }

    #[test]
    fn substitution_by_the_inverse_undoes_substitution(a in series(), s in near_identity()) {
        let inv = s.compositional_inverse().unwrap();
        assert_agree(&s.substitute(&inv).unwrap(), &Series::monomial(rat(1, 1), 1, ORDER));
        let back = a.substitute(&s).unwrap().substitute(&inv).unwrap();
        prop_assert!(back.order() <= a.order());
        assert_agree(&back, &a);
    }

    #[test]
    fn truncation_order_never_grows(a in series(), b in series(), s in near_identity()) {
        prop_assert!(a.mul(&b).order() <= a.order().min(b.order()));
        prop_assert!(a.add(&b).order() <= a.order().min(b.order()));
        prop_assert!(a.derivative().order() <= a.order() - 1);
        prop_assert!(a.substitute(&s).unwrap().order() <= a.order());
        let short = a.truncate(5);
        prop_assert!(short.mul(&b).order() <= 5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn expansion_identities_are_exact(n in 3usize..=5, k in 0u8..=1, seed in any::<u64>(), m_pick in 0usize..100) {
        let m = 1 + m_pick % n;
        let r = expansion_coefficient_check(&chart_for(n, k), m, &kappa_for(n, k, seed)).unwrap();
        prop_assert!(r.all_zero(), "{:?}", r.entries.iter().find(|e| e.residual != rat(0, 1)));
    }

    #[test]
    fn hypersurface_relations_hold_below_the_stated_order(n in 3usize..=5, seed in any::<u64>(), m_pick in 0usize..100) {
        let m = 1 + m_pick % n;
        let r = gauss_codazzi_check(&torus(n), &kappa_for(n, 0, seed), m, 2 * m as i32 + 1).unwrap();
        prop_assert!(r.vanish_below(2 * m as i32 - 2));
    }

    #[test]
    fn gauge_normalization_preserves_the_mass(n in 3usize..=5, seed in any::<u64>()) {
        let bd = BoundaryData::constant(torus(n), kappa_for(n, 0, seed)).unwrap();
        let before = wang_mass(&bd).unwrap().exact.unwrap();
        let after = wang_mass(&normalize_gauge(&bd).unwrap()).unwrap().exact.unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn radial_einstein_coefficient_is_a_multiple_of_the_mass_aspect(n in 3usize..=5, k in 0u8..=1, seed in any::<u64>()) {
        let bd = BoundaryData::constant(chart_for(n, k), kappa_for(n, k, seed)).unwrap();
        let SigmaField::Constant(sigma) = mass_aspect(&bd).unwrap() else { unreachable!() };
        let lead = einstein_radial_leading(&bd).unwrap();
        prop_assert_eq!(lead, rat(-(n as i64 - 2), 2) * sigma);
    }

    #[test]
    fn flux_mass_matches_the_boundary_mass(n in 3usize..=4, k in 0u8..=1, seed in any::<u64>()) {
        let chart = chart_for(n, k);
        let kappa = kappa_for(n, k, seed);
        let g = build_perturbed(&chart, &kappa, n as i32).unwrap();
        let ch = ch_mass_series(&g, &[100.0, 200.0, 400.0, 800.0]).unwrap();
        let w = wang_mass(&BoundaryData::constant(chart, kappa).unwrap()).unwrap().value;
        prop_assert!((ch.extrapolated - w).abs() <= 1e-6 * w.abs().max(1.0), "{} vs {}", ch.extrapolated, w);
    }

    #[test]
    fn rk4_matches_the_matrix_exponential(n in 3usize..=5, seed in any::<u64>(), m_pick in 0usize..100) {
        let m = 1 + m_pick % n;
        let s0 = KappaState::new(m, kappa_for(n, 0, seed).to_float()).unwrap();
        let rk = kappa_evolve(&s0, 1.0, KappaMethod::Rk4 { steps: 1000 }, 1.0).unwrap();
        let ex = kappa_evolve(&s0, 1.0, KappaMethod::Exponential, 1.0).unwrap();
        let scale = ex.kappa.max_abs().max(1e-300);
        prop_assert!(rk.kappa.add(&ex.kappa.scale(&-1.0)).max_abs() <= 1e-8 * scale);
        if m == n {
            let want = (-((n - 2) as f64)).exp() * s0.sigma();
            prop_assert!((ex.sigma() - want).abs() <= 1e-10 * s0.sigma().abs().max(1.0));
        }
    }

    #[test]
    fn zero_data_below_the_mass_order_stays_exactly_zero(n in 3usize..=6, m_pick in 0usize..100, steps in 1usize..6) {
        let m = 1 + m_pick % (n - 1);
        let s0 = KappaState::new(m, SymTensor::<Rational>::zeros(n)).unwrap();
        let end = kappa_rk4(&s0, rat(3, 2), steps, rat(1, 1)).unwrap();
        prop_assert!(end.kappa.is_zero());
    }

    #[test]
    fn mass_fit_round_trips(n in 3usize..=5, c in prop::array::uniform3(small_rational())) {
        let grid = FlowGrid::new(401, 0.8, 1.0, false).unwrap();
        let h = grid.boundary_spacing();
        let mut diag = vec![c[1].clone()];
        diag.extend(std::iter::repeat(c[2].clone()).take(n - 2));
        let kappa = SymTensor::from_blocks(c[0].clone(), &diag);
        let g = build_perturbed(&torus(n), &kappa, n as i32 + 2).unwrap();
        let dev: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                let s = g.get(i, i);
                grid.x
                    .iter()
                    .map(|&x| {
                        s.terms()
                            .filter(|(e, _)| *e > -2)
                            .map(|(e, v)| v.as_f64() * x.powi(e + 2))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let fit = fit_expansion(n, &grid.x, [&dev[0], &dev[1], &dev[2]], 2.0 * h, 20.0 * h).unwrap();
        for i in 0..3 {
            let want = c[i].as_f64();
            prop_assert!((fit.kappa[i] - want).abs() <= 1e-8 * want.abs().max(1e-4), "{} vs {}", fit.kappa[i], want);
        }
    }
}

#[test]
fn mass_aspect_decays_at_rate_n_minus_two_exactly() {
    for n in 3..=6 {
        let sys = KappaSystem::new(n, n).unwrap();
        assert!(sys.sigma_eigen_residual().iter().all(|r| *r == rat(0, 1)), "n = {n}");
    }
}
