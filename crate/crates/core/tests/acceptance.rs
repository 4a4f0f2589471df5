//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails if any criterion outside `KNOWN_UNMET` fails, or if a known gap
//! unexpectedly closes.

use std::io::Write;
use std::time::Instant;

use ahflow_core::flow::{
    deturck_decay_slope, deturck_expansion_check, flow_run, kappa_evolve, kappa_rk4,
    parabolic_scaling_run, residual_samples, scalar_evolution_residual, Background, FlowConfig,
    FlowRun, FlowState, KappaMethod, KappaState, KappaSystem, RunOptions,
};
use ahflow_core::geometry::{build_geon_on, expansion_coefficient_check, RadialChart};
use ahflow_core::mass::{ch_mass_grid, geon_boundary_data, wang_mass};
use ahflow_core::scalar::{rat, PiRational, Rational};
use ahflow_core::tensor::{random_kappa, SymTensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Criteria whose failure is understood and recorded; see the README.
const KNOWN_UNMET: &[u32] = &[8];

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn zero() -> Rational {
    rat(0, 1)
}

fn seeded_kappas(n: usize, count: usize, seed: u64) -> Vec<SymTensor<Rational>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_kappa(n, &mut rng)).collect()
}

fn exact_identity_suite() -> Outcome {
    let start = Instant::now();
    let jobs: Vec<(usize, usize, usize)> = (3..=6)
        .flat_map(|n| (1..=n).flat_map(move |m| (0..20).map(move |j| (n, m, j))))
        .collect();
    let failures: usize = jobs
        .par_iter()
        .map(|&(n, m, j)| {
            let chart = RadialChart::unit_torus(n).unwrap();
            let kappa = seeded_kappas(n, 20, 100 + n as u64).swap_remove(j);
            let r = expansion_coefficient_check(&chart, m, &kappa).unwrap();
            usize::from(!r.all_zero())
        })
        .sum();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        id: 1,
        pass: failures == 0 && secs < 120.0,
        detail: format!("{} cases, {failures} with a nonzero residual, {secs:.1} s", jobs.len()),
    }
}

fn coefficient_system() -> Outcome {
    let mut eigen_ok = true;
    let mut worst_rel = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for n in 3..=6 {
        eigen_ok &= KappaSystem::new(n, n)
            .unwrap()
            .sigma_eigen_residual()
            .iter()
            .all(|r| *r == zero());
        for kappa in seeded_kappas(n, 20, 200 + n as u64) {
            let s0 = KappaState::new(n, kappa.to_float()).unwrap();
            let rk = kappa_evolve(&s0, 1.0, KappaMethod::Rk4 { steps: 1000 }, 1.0).unwrap();
            let ex = kappa_evolve(&s0, 1.0, KappaMethod::Exponential, 1.0).unwrap();
            let rel = rk.kappa.add(&ex.kappa.scale(&-1.0)).max_abs() / ex.kappa.max_abs();
            worst_rel = worst_rel.max(rel);
            if s0.sigma().abs() > 1e-12 {
                let ratio = rk.sigma() / s0.sigma();
                let want = (-((n - 2) as f64)).exp();
                worst_ratio = worst_ratio.max((ratio - want).abs() / want);
            }
        }
    }
    Outcome {
        id: 2,
        pass: eigen_ok && worst_rel <= 1e-8 && worst_ratio <= 1e-8,
        detail: format!(
            "exact decay identity {eigen_ok}, rk4 vs exponential {worst_rel:.2e}, sigma(1)/sigma(0) vs exp(-(n-2)) {worst_ratio:.2e}"
        ),
    }
}

fn geon_mass() -> Outcome {
    let pi = |c: Rational| PiRational::new(c, 1);
    let cases: [(usize, Vec<PiRational>, Vec<f64>); 3] = [
        (3, vec![pi(rat(2, 1))], vec![8.0, 12.0, 16.0, 24.0, 32.0]),
        (
            4,
            vec![PiRational::rational(rat(3, 1)), pi(rat(2, 1))],
            vec![5.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0],
        ),
        (
            5,
            vec![
                PiRational::rational(rat(1, 1)),
                PiRational::rational(rat(5, 2)),
                pi(rat(2, 1)),
            ],
            vec![10.0, 12.0, 14.0, 16.0, 20.0, 24.0],
        ),
    ];
    let mut exact_ok = true;
    let mut worst = 0.0f64;
    for (n, periods, radii) in cases {
        let chart = RadialChart::torus(n, periods.clone()).unwrap();
        let closed = periods
            .iter()
            .fold(PiRational::new(rat(-4, n as i64), 1), |acc, a| acc.mul(a));
        let wm = wang_mass(&geon_boundary_data(&chart).unwrap()).unwrap();
        exact_ok &= wm.exact.as_ref() == Some(&closed);
        let sample: Vec<f64> = (0..250).map(|i| 100f64.powf(i as f64 / 249.0)).collect();
        let g = build_geon_on(&chart, sample).unwrap();
        let ch = ch_mass_grid(&g, &radii).unwrap();
        worst = worst.max(((ch.extrapolated - wm.value) / wm.value).abs());
    }
    Outcome {
        id: 3,
        pass: exact_ok && worst <= 1e-6,
        detail: format!("exact closed form {exact_ok}, flux mass relative error {worst:.2e}"),
    }
}

fn gauge_checks() -> Outcome {
    let (mut nonzero, mut combos, mut bad_combos) = (0, 0, 0);
    for n in 3..=5 {
        let chart = RadialChart::unit_torus(n).unwrap();
        let ws = seeded_kappas(n, 5, 300 + n as u64);
        let ks = seeded_kappas(n, 5, 400 + n as u64);
        for m in 1..=n {
            for (w, k) in ws.iter().zip(&ks) {
                let r = deturck_expansion_check(&chart, m, w, k).unwrap();
                nonzero += r.entries.iter().filter(|e| e.residual != zero()).count();
                if let Some(c) = &r.mass_combination {
                    combos += 1;
                    bad_combos += usize::from(*c != zero());
                }
            }
        }
    }
    let mut worst_slope = 0.0f64;
    let mut slopes = Vec::new();
    for n in 3..=5 {
        let chart = RadialChart::unit_torus(n).unwrap();
        let cfg = FlowConfig {
            points: 401,
            stretch: 0.8,
            ell: 1.0,
        };
        let mut fs = FlowState::new(&chart, Background::Hyperbolic { x_max: 1.0 }, cfg).unwrap();
        let w = [0.7, -1.3, 0.4];
        for i in 1..fs.grid().len() - 1 {
            let xn = fs.grid().x[i].powi(n as i32) / n as f64;
            fs.p[i] = w[0] * xn;
            fs.q[0][i] = w[1] * xn;
            fs.q[1][i] = w[2] * xn;
        }
        let h = fs.grid().boundary_spacing();
        let slope = deturck_decay_slope(&fs, 2.0 * h, 20.0 * h).unwrap();
        worst_slope = worst_slope.max((slope - (n + 1) as f64).abs());
        slopes.push(format!("{slope:.3}"));
    }
    Outcome {
        id: 4,
        pass: nonzero == 0 && combos > 0 && bad_combos == 0 && worst_slope <= 0.1,
        detail: format!(
            "{nonzero} nonzero coefficient residuals, {bad_combos}/{combos} nonzero mass combinations, gauge slopes {}",
            slopes.join(" ")
        ),
    }
}

fn geon_flow(points: usize) -> FlowRun {
    let chart = RadialChart::unit_torus(3).unwrap();
    let cfg = FlowConfig {
        points,
        stretch: 0.8,
        ell: 1.0,
    };
    let fs = FlowState::new(&chart, Background::Geon, cfg).unwrap();
    let opts = RunOptions {
        t_end: 0.5,
        samples: 10,
        courant: 0.2,
        keep_states: false,
    };
    flow_run(&fs, opts).unwrap()
}

fn mass_decay(base: &FlowRun, fine: &FlowRun) -> Outcome {
    let e0 = (base.log_mass_slope().unwrap() + 1.0).abs();
    let e1 = (fine.log_mass_slope().unwrap() + 1.0).abs();
    Outcome {
        id: 5,
        pass: e0 <= 0.05 && e1 <= 0.6 * e0,
        detail: format!(
            "slope error {e0:.4} at 401 points, {e1:.4} at 801 points, ratio {:.3}",
            e1 / e0
        ),
    }
}

fn residual_at(points: usize) -> (f64, f64) {
    let chart = RadialChart::unit_torus(3).unwrap();
    let cfg = FlowConfig {
        points,
        stretch: 0.8,
        ell: 1.0,
    };
    let fs = FlowState::new(&chart, Background::Geon, cfg).unwrap();
    let spacing = 10.0 * fs.stable_dt(0.2);
    let states = residual_samples(&fs, 0.1, spacing, 0.2).unwrap();
    let r = scalar_evolution_residual(&states).unwrap();
    let length = *fs.grid().x.last().unwrap();
    let min_e = r[0].scalar.iter().copied().fold(f64::INFINITY, f64::min);
    (r[0].max_abs_in(0.05 * length, 0.95 * length), min_e)
}

fn scalar_law(runs: &[&FlowRun]) -> Outcome {
    let (r0, m0) = residual_at(201);
    let (r1, m1) = residual_at(401);
    let ratio = r0 / r1;
    let min_run = runs
        .iter()
        .flat_map(|r| r.samples.iter().map(|s| s.min_scalar_e))
        .fold(f64::INFINITY, f64::min);
    let min_e = min_run.min(m0).min(m1);
    Outcome {
        id: 6,
        pass: (ratio - 4.0).abs() <= 0.5 && min_e >= -1e-6,
        detail: format!("residual ratio {ratio:.3}, min(R + n(n-1)) {min_e:.2e}"),
    }
}

fn parabolic_scaling() -> Outcome {
    let chart = RadialChart::unit_torus(3).unwrap();
    let t = parabolic_scaling_run(&chart, &[1.0, 2.0, 4.0, 8.0], 0.25, None).unwrap();
    Outcome {
        id: 7,
        pass: (t.closed_form_exponent - 2.0).abs() <= 0.1
            && (t.ode_exponent - 2.0).abs() <= 0.1
            && t.ode_max_rel_diff <= 1e-6,
        detail: format!(
            "closed-form exponent {:.4}, direct exponent {:.4}, direct vs rescaled {:.2e}",
            t.closed_form_exponent, t.ode_exponent, t.ode_max_rel_diff
        ),
    }
}

fn lower_orders_stay_zero(run: &FlowRun) -> Outcome {
    let mut exact = true;
    for n in 3..=6 {
        for m in 1..n {
            let s0 = KappaState::new(m, SymTensor::<Rational>::zeros(n)).unwrap();
            let end = kappa_rk4(&s0, rat(1, 1), 8, rat(1, 1)).unwrap();
            exact &= end.kappa.is_zero();
        }
    }
    let floor = run.samples[0].sub_order;
    let peak = run.samples.iter().map(|s| s.sub_order).fold(0.0, f64::max);
    Outcome {
        id: 8,
        pass: exact && peak <= 10.0 * floor,
        detail: format!(
            "exact zero propagation {exact}, sub-order fit content peak {peak:.2e} vs 10x initial floor {:.2e}",
            10.0 * floor
        ),
    }
}

#[test]
fn acceptance_criteria() {
    let (base, fine) = std::thread::scope(|s| {
        let fine = s.spawn(|| geon_flow(801));
        let base = s.spawn(|| geon_flow(401));
        (base.join().unwrap(), fine.join().unwrap())
    });
    let outcomes = [
        exact_identity_suite(),
        coefficient_system(),
        geon_mass(),
        gauge_checks(),
        mass_decay(&base, &fine),
        scalar_law(&[&base, &fine]),
        parabolic_scaling(),
        lower_orders_stay_zero(&base),
    ];
    // Written to the stderr handle directly so the lines appear even when the
    // harness captures test output.
    let mut err = std::io::stderr().lock();
    for o in &outcomes {
        writeln!(
            err,
            "criterion {}: {} ({})",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        )
        .unwrap();
    }
    let unexpected: Vec<u32> = outcomes
        .iter()
        .filter(|o| o.pass == KNOWN_UNMET.contains(&o.id))
        .map(|o| o.id)
        .collect();
    assert!(
        unexpected.is_empty(),
        "criteria {unexpected:?} changed status relative to the recorded outcome"
    );
}
