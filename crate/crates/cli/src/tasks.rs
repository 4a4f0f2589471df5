//! One function per scenario task. Each returns checks, summary values and
//! tables; nothing here touches the file system.

use std::collections::BTreeMap;

use ahflow_core::flow::{
    deturck_decay_slope, deturck_expansion_check, flow_run, kappa_evolve, kappa_rk4,
    parabolic_scaling_run, residual_samples, scalar_evolution_residual, Background, FlowConfig,
    FlowState, KappaMethod, KappaState, PdeScaling, RunOptions, FLOW_CSV_HEADER,
};
use ahflow_core::geometry::{build_geon_on, build_perturbed, expansion_coefficient_check};
use ahflow_core::mass::{ch_mass_grid, ch_mass_series, geon_boundary_data, wang_mass, BoundaryData};
use ahflow_core::scalar::{PiRational, Rational, Scalar};
use ahflow_core::tensor::{KappaTensor, SymTensor};
use rayon::prelude::*;
use serde::Serialize;

use crate::report::{num, opt_num, Check, TaskOutput};
use crate::scenario::{KappaSpec, Scenario, Task};
use crate::CliError;

pub fn run_task(s: &Scenario) -> Result<TaskOutput, CliError> {
    match s.task {
        Task::VerifyExpansions => verify_expansions(s),
        Task::VerifyDeturck => verify_deturck(s),
        Task::KappaOde => kappa_ode(s),
        Task::GeonMass => geon_mass(s),
        Task::ChMass => ch_mass(s),
        Task::FlowPde => flow_pde(s),
        Task::ScalingStudy => scaling_study(s),
        Task::ConvergenceStudy => convergence_study(s),
    }
}

fn pair_labels(n: usize) -> Vec<String> {
    SymTensor::<Rational>::index_pairs(n)
        .iter()
        .map(|(i, j)| format!("kappa_{i}{j}"))
        .collect()
}

#[derive(Serialize)]
struct IdentityEntry {
    m: usize,
    identity: String,
    exponent: i32,
    residual: String,
}

fn verify_expansions(s: &Scenario) -> Result<TaskOutput, CliError> {
    let chart = s.chart()?;
    let [lo, hi] = s.m_range();
    let spec = s
        .parameters
        .kappa
        .clone()
        .unwrap_or(KappaSpec::Random { count: 20 });
    let kappas = s.kappa_samples(&spec, 0)?;
    let jobs: Vec<(usize, usize)> = (lo..=hi)
        .flat_map(|m| (0..kappas.len()).map(move |j| (m, j)))
        .collect();
    let reports = jobs
        .par_iter()
        .map(|&(m, j)| expansion_coefficient_check(&chart, m, &kappas[j]).map(|r| (j, r)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = TaskOutput::default();
    let mut worst: BTreeMap<(usize, String), (i32, Rational)> = BTreeMap::new();
    let mut rows = Vec::new();
    let mut nonzero = 0;
    for (j, r) in &reports {
        for e in &r.entries {
            let slot = worst
                .entry((r.m, e.label.clone()))
                .or_insert_with(|| (e.exponent, e.residual.clone()));
            if slot.1 == Rational::from_integer(0.into()) {
                slot.1 = e.residual.clone();
            }
            if e.residual != Rational::from_integer(0.into()) {
                nonzero += 1;
            }
            rows.push(format!(
                "{},{},{},{},{},{},{}",
                r.m, j, e.label, e.exponent, e.engine, e.formula, e.residual
            ));
        }
    }
    out.table(
        "identities",
        "m,sample,identity,exponent,engine,closed_form,residual",
        rows,
    );
    let entries: Vec<IdentityEntry> = worst
        .into_iter()
        .map(|((m, identity), (exponent, residual))| IdentityEntry {
            m,
            identity,
            exponent,
            residual: residual.to_string(),
        })
        .collect();
    out.checks.push(Check::new(
        "einstein expansion coefficients equal their closed forms",
        nonzero == 0,
        format!(
            "{} coefficients over {} tensors, {nonzero} nonzero residuals",
            reports.iter().map(|(_, r)| r.entries.len()).sum::<usize>(),
            kappas.len()
        ),
    ));
    out.put("n", s.n());
    out.put("k", s.k());
    out.put("samples", kappas.len());
    out.put("entries", entries);
    Ok(out)
}

fn verify_deturck(s: &Scenario) -> Result<TaskOutput, CliError> {
    let chart = s.chart()?;
    let n = s.n();
    let [lo, hi] = s.m_range();
    let p = &s.parameters;
    let kappas = s.kappa_samples(p.kappa.as_ref().unwrap_or(&KappaSpec::Random { count: 5 }), 0)?;
    let ws = s.kappa_samples(p.w.as_ref().unwrap_or(&KappaSpec::Random { count: 5 }), 1)?;
    let jobs: Vec<(usize, usize)> = (lo..=hi)
        .flat_map(|m| (0..ws.len()).map(move |j| (m, j)))
        .collect();
    let reports = jobs
        .par_iter()
        .map(|&(m, j)| {
            deturck_expansion_check(&chart, m, &ws[j], &kappas[j % kappas.len()]).map(|r| (j, r))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let zero = Rational::from_integer(0.into());
    let mut out = TaskOutput::default();
    let mut rows = Vec::new();
    let (mut nonzero, mut combos, mut bad_combos, mut bad_valuations) = (0, 0, 0, 0);
    for (j, r) in &reports {
        for e in &r.entries {
            nonzero += usize::from(e.residual != zero);
            rows.push(format!(
                "{},{},{},{},{},{},{}",
                r.m, j, e.label, e.exponent, e.engine, e.formula, e.residual
            ));
        }
        if let Some(c) = &r.mass_combination {
            combos += 1;
            bad_combos += usize::from(c != &zero);
        }
        if r.m == n {
            let low = r
                .field_valuations
                .iter()
                .flatten()
                .any(|&v| v < n as i32 + 1);
            bad_valuations += usize::from(low);
        }
    }
    out.table(
        "identities",
        "m,sample,identity,exponent,engine,closed_form,residual",
        rows,
    );
    out.checks.push(Check::new(
        "gauge field and Lie derivative coefficients equal their closed forms",
        nonzero == 0,
        format!("{nonzero} nonzero residuals"),
    ));
    if hi == n {
        out.checks.push(Check::new(
            "mass combination of the Lie derivative vanishes at x^(n-2)",
            combos > 0 && bad_combos == 0,
            format!("{combos} cases, {bad_combos} nonzero"),
        ));
        out.checks.push(Check::new(
            "gauge field of order-n data starts at x^(n+1) or later",
            bad_valuations == 0,
            format!("{bad_valuations} cases with a lower power"),
        ));
    }
    if s.k() == 0 {
        let w = &ws[0];
        let diag = [w.get(0, 0), w.get(1, 1), w.get(2, 2)].map(|v| v.as_f64());
        let points = p.grid.map_or(401, |g| g.points);
        let slope = gauge_decay_slope(s, diag, points)?;
        out.put("gauge_decay_slope", slope);
        out.checks.push(Check::within(
            "gauge field log-log slope on a grid",
            slope,
            n as f64 + 1.0,
            s.tolerance(0.1),
        ));
    }
    out.put("n", n);
    out.put("k", s.k());
    out.put("samples", ws.len());
    Ok(out)
}

/// Log-log slope of the radial gauge field for `x^n diag(w) / n` data on a
/// hyperbolic background.
pub fn gauge_decay_slope(s: &Scenario, w: [f64; 3], points: usize) -> Result<f64, CliError> {
    let n = s.n();
    let cfg = FlowConfig {
        points,
        stretch: s.parameters.grid.and_then(|g| g.stretch).unwrap_or(0.8),
        ell: 1.0,
    };
    let mut fs = FlowState::new(&s.chart()?, Background::Hyperbolic { x_max: 1.0 }, cfg)?;
    let w = if w.iter().all(|v| *v == 0.0) { [1.0, -1.0, 0.5] } else { w };
    for i in 1..fs.grid().len() - 1 {
        let xn = fs.grid().x[i].powi(n as i32) / n as f64;
        fs.p[i] = w[0] * xn;
        fs.q[0][i] = w[1] * xn;
        fs.q[1][i] = w[2] * xn;
    }
    let h = fs.grid().boundary_spacing();
    Ok(deturck_decay_slope(&fs, 2.0 * h, 20.0 * h)?)
}

fn kappa_ode(s: &Scenario) -> Result<TaskOutput, CliError> {
    let n = s.n();
    let p = &s.parameters;
    let m = p.m.unwrap_or(n);
    let kappas = s.kappa_samples(p.kappa.as_ref().unwrap_or(&KappaSpec::Random { count: 1 }), 0)?;
    let t_end = p.t_end.unwrap_or(1.0);
    let samples = p.samples.unwrap_or(10);
    let dt = p.dt.unwrap_or(1e-3);
    let steps = ((t_end / dt).round() as usize).max(1);
    let tol = s.tolerance(1e-8);
    let mut out = TaskOutput::default();
    let mut rows = Vec::new();
    let mut worst_rel = 0.0f64;
    let mut sigma_ratios = Vec::new();
    let mut exact_zero = true;
    for (j, k) in kappas.iter().enumerate() {
        let s0 = KappaState::new(m, k.to_float())?;
        let mut state = s0.clone();
        for i in 0..=samples.min(100_000) {
            if samples == 0 {
                break;
            }
            if i > 0 {
                let t = t_end * i as f64 / samples as f64;
                let sub = ((steps as f64 / samples as f64).round() as usize).max(1);
                state = kappa_rk4(&state, t, sub, 1.0)?;
            }
            let mut row = format!("{},{}", num(state.t), j);
            for v in state.kappa.to_vec() {
                row.push(',');
                row.push_str(&num(v));
            }
            row.push(',');
            row.push_str(&num(state.sigma()));
            rows.push(row);
        }
        let rk = kappa_evolve(&s0, t_end, KappaMethod::Rk4 { steps }, 1.0)?;
        let ex = kappa_evolve(&s0, t_end, KappaMethod::Exponential, 1.0)?;
        let diff = rk.kappa.add(&ex.kappa.scale(&-1.0)).max_abs();
        let scale = ex.kappa.max_abs();
        worst_rel = worst_rel.max(if scale > 0.0 { diff / scale } else { diff });
        if m == n && s0.sigma() != 0.0 {
            sigma_ratios.push(ex.sigma() / s0.sigma());
        }
        if k.is_zero() {
            let exact = KappaState::new(m, k.clone())?;
            let t = Rational::from_float(t_end)
                .ok_or_else(|| CliError::Schema(format!("t_end = {t_end} is not finite")))?;
            let end = kappa_rk4(&exact, t, 4, Rational::from_integer(1.into()))?;
            exact_zero &= end.kappa.is_zero();
        }
    }
    let mut header = String::from("t,sample");
    for l in pair_labels(n) {
        header.push(',');
        header.push_str(&l);
    }
    header.push_str(",sigma");
    out.table("kappa", &header, rows);
    out.checks.push(Check::at_most(
        "runge-kutta agrees with the matrix exponential",
        worst_rel,
        tol,
    ));
    if m == n && !sigma_ratios.is_empty() {
        let target = (-((n - 2) as f64) * t_end).exp();
        let err = sigma_ratios
            .iter()
            .map(|r| (r - target).abs())
            .fold(0.0, f64::max);
        out.put("sigma_ratio", sigma_ratios[0]);
        out.put("sigma_ratio_predicted", target);
        out.checks.push(Check::at_most(
            "sigma(T)/sigma(0) equals exp(-(n-2)T)",
            err,
            tol,
        ));
    }
    if kappas.iter().any(|k| k.is_zero()) {
        out.checks.push(Check::new(
            "zero data stays exactly zero in rational arithmetic",
            exact_zero,
            format!("m = {m}"),
        ));
    }
    out.put("n", n);
    out.put("m", m);
    out.put("t_end", t_end);
    out.put("rk4_steps", steps);
    out.put("max_rel_diff", worst_rel);
    Ok(out)
}

fn torus_periods(chart: &ahflow_core::geometry::RadialChart) -> Vec<PiRational> {
    match chart.moduli() {
        ahflow_core::geometry::BoundaryModuli::Torus { periods } => periods[1..].to_vec(),
        ahflow_core::geometry::BoundaryModuli::Sphere => Vec::new(),
    }
}

fn default_geon_radii(n: usize) -> Vec<f64> {
    match n {
        3 => vec![8.0, 12.0, 16.0, 24.0, 32.0],
        4 => vec![5.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0],
        5 => vec![10.0, 12.0, 14.0, 16.0, 20.0, 24.0],
        _ => vec![6.0, 8.0, 10.0, 12.0, 16.0, 20.0],
    }
}

fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}

/// Flux mass of the sampled geon; `(exact, extrapolated, error)`.
pub fn geon_flux_mass(s: &Scenario, sample_points: usize) -> Result<(f64, f64, f64), CliError> {
    let chart = s.chart()?;
    let radii = s
        .parameters
        .radii
        .clone()
        .unwrap_or_else(|| default_geon_radii(s.n()));
    let g = build_geon_on(&chart, geometric(1.0, 100.0, sample_points))?;
    let ch = ch_mass_grid(&g, &radii)?;
    let exact = wang_mass(&geon_boundary_data(&chart)?)?.value;
    Ok((exact, ch.extrapolated, ch.error))
}

fn geon_mass(s: &Scenario) -> Result<TaskOutput, CliError> {
    let chart = s.chart()?;
    let n = s.n();
    let wm = wang_mass(&geon_boundary_data(&chart)?)?;
    let product = torus_periods(&chart)
        .iter()
        .fold(PiRational::new(Rational::new((-4).into(), (n as i64).into()), 1), |acc, a| {
            acc.mul(a)
        });
    let radii = s
        .parameters
        .radii
        .clone()
        .unwrap_or_else(|| default_geon_radii(n));
    let default_points = if n == 6 { 1000 } else { 250 };
    let points = s.parameters.grid.map_or(default_points, |g| g.points);
    let g = build_geon_on(&chart, geometric(1.0, 100.0, points))?;
    let ch = ch_mass_grid(&g, &radii)?;
    let rel = (ch.extrapolated - wm.value).abs() / wm.value.abs();
    let mut out = TaskOutput::default();
    out.checks.push(Check::new(
        "boundary mass equals -(4 pi / n) times the torus periods",
        wm.exact.as_ref() == Some(&product),
        format!(
            "engine {}, closed form {product}",
            wm.exact.as_ref().map_or("inexact".to_string(), |e| e.to_string())
        ),
    ));
    out.checks.push(Check::at_most(
        "extrapolated flux mass matches the boundary mass (relative)",
        rel,
        s.tolerance(1e-6),
    ));
    out.table(
        "flux",
        "radius,mass,rounding_bound",
        ch.samples
            .iter()
            .map(|c| format!("{},{},{}", num(c.radius), num(c.mass), num(c.rounding))),
    );
    out.put("n", n);
    out.put("wang_mass", wm.value);
    out.put("wang_mass_exact", wm.exact.as_ref().map(|e| e.to_string()));
    out.put("ch_extrapolated", ch.extrapolated);
    out.put("ch_error", ch.error);
    out.put("ch_relative_difference", rel);
    out.put("radii", radii);
    out.put("sample_points", points);
    Ok(out)
}

fn ch_mass(s: &Scenario) -> Result<TaskOutput, CliError> {
    let chart = s.chart()?;
    let n = s.n();
    let kappas = s.kappa_samples(
        s.parameters.kappa.as_ref().unwrap_or(&KappaSpec::Random { count: 3 }),
        0,
    )?;
    let radii = s
        .parameters
        .radii
        .clone()
        .unwrap_or_else(|| vec![100.0, 200.0, 400.0, 800.0]);
    let tol = s.tolerance(1e-6);
    let results = kappas
        .par_iter()
        .map(|k: &KappaTensor<Rational>| -> Result<(f64, f64, f64), CliError> {
            let g = build_perturbed(&chart, k, n as i32)?;
            let ch = ch_mass_series(&g, &radii)?;
            let w = wang_mass(&BoundaryData::constant(chart.clone(), k.clone())?)?.value;
            Ok((w, ch.extrapolated, ch.error))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = TaskOutput::default();
    let worst = results
        .iter()
        .map(|(w, c, _)| (c - w).abs() / w.abs().max(1.0))
        .fold(0.0, f64::max);
    out.checks.push(Check::at_most(
        "flux mass matches the boundary mass",
        worst,
        tol,
    ));
    out.table(
        "masses",
        "sample,wang_mass,ch_extrapolated,ch_error",
        results
            .iter()
            .enumerate()
            .map(|(j, (w, c, e))| format!("{j},{},{},{}", num(*w), num(*c), num(*e))),
    );
    out.put("n", n);
    out.put("k", s.k());
    out.put("radii", radii);
    out.put("max_relative_difference", worst);
    Ok(out)
}

pub fn flow_config(s: &Scenario, default_points: usize) -> FlowConfig {
    let g = s.parameters.grid;
    FlowConfig {
        points: g.map_or(default_points, |g| g.points),
        stretch: g.and_then(|g| g.stretch).unwrap_or(0.8),
        ell: s.parameters.ell.unwrap_or(1.0),
    }
}

/// Summary of one flow run, shared with the refinement driver.
pub struct FlowOutcome {
    pub slope: Option<f64>,
    pub min_scalar: f64,
    pub max_abs_mass: f64,
    pub final_rel_error: Option<f64>,
    pub run: ahflow_core::flow::FlowRun,
}

pub fn run_flow(s: &Scenario, config: FlowConfig) -> Result<FlowOutcome, CliError> {
    let p = &s.parameters;
    let fs = FlowState::new(&s.chart()?, s.background(), config)?;
    let opts = RunOptions {
        t_end: p.t_end.unwrap_or(0.5),
        samples: p.samples.unwrap_or(10),
        courant: p.courant.unwrap_or(0.2),
        keep_states: false,
    };
    let run = flow_run(&fs, opts)?;
    let hyperbolic = matches!(s.background(), Background::Hyperbolic { .. });
    let last = run.samples.last().expect("at least one sample");
    Ok(FlowOutcome {
        slope: if hyperbolic {
            None
        } else {
            Some(run.log_mass_slope()?)
        },
        min_scalar: run
            .samples
            .iter()
            .map(|r| r.min_scalar_e)
            .fold(f64::INFINITY, f64::min),
        max_abs_mass: run
            .samples
            .iter()
            .map(|r| r.mass_fitted.abs())
            .fold(0.0, f64::max),
        final_rel_error: (!hyperbolic)
            .then(|| ((last.mass_fitted - last.mass_predicted) / last.mass_predicted).abs()),
        run,
    })
}

#[derive(Serialize)]
struct CurvePoint {
    t: f64,
    mass_fitted: f64,
    mass_predicted: f64,
}

fn flow_pde(s: &Scenario) -> Result<TaskOutput, CliError> {
    let n = s.n();
    let o = run_flow(s, flow_config(s, 401))?;
    let mut out = TaskOutput::default();
    out.tables.push(("flow".into(), o.run.to_csv()));
    match o.slope {
        Some(slope) => {
            let target = -((n - 2) as f64);
            out.checks.push(Check::within(
                "log-mass slope equals -(n-2) (relative tolerance)",
                slope,
                target,
                s.tolerance(0.05) * target.abs(),
            ));
            out.put("log_mass_slope", slope);
        }
        None => out.checks.push(Check::at_most(
            "hyperbolic data keeps zero mass",
            o.max_abs_mass,
            1e-12,
        )),
    }
    out.checks.push(Check::new(
        "scalar curvature stays at or above -n(n-1)",
        o.min_scalar >= -1e-6,
        format!("min(R + n(n-1)) = {:.6e}, bound -1e-6", o.min_scalar),
    ));
    out.put("n", n);
    out.put("m0", o.run.m0);
    out.put("steps", o.run.steps);
    out.put("min_scalar_excess", o.min_scalar);
    out.put("final_relative_mass_error", o.final_rel_error);
    out.put(
        "curve",
        o.run
            .samples
            .iter()
            .map(|r| CurvePoint {
                t: r.t,
                mass_fitted: r.mass_fitted,
                mass_predicted: r.mass_predicted,
            })
            .collect::<Vec<_>>(),
    );
    out.put("csv_columns", FLOW_CSV_HEADER);
    Ok(out)
}

fn scaling_study(s: &Scenario) -> Result<TaskOutput, CliError> {
    let p = &s.parameters;
    let ells = p.ells.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0]);
    let t = p.time.unwrap_or(0.25);
    let pde = p.pde.unwrap_or(false).then(|| PdeScaling {
        config: flow_config(s, 201),
        courant: p.courant.unwrap_or(0.2),
    });
    let table = parabolic_scaling_run(&s.chart()?, &ells, t, pde)?;
    let tol = s.tolerance(0.1);
    let mut out = TaskOutput::default();
    out.checks.push(Check::within(
        "closed-form mass deficit falls as ell^-2",
        table.closed_form_exponent,
        2.0,
        tol,
    ));
    out.checks.push(Check::within(
        "coefficient-system mass deficit falls as ell^-2",
        table.ode_exponent,
        2.0,
        tol,
    ));
    out.checks.push(Check::at_most(
        "direct coefficient system agrees with the closed form",
        table.ode_max_rel_diff,
        1e-6,
    ));
    if let Some(e) = table.pde_exponent {
        out.checks.push(Check::within(
            "radial-flow mass deficit falls as ell^-2",
            e,
            2.0,
            tol,
        ));
        let worst = table
            .rows
            .iter()
            .filter_map(|r| Some(((r.pde_direct? - r.pde_rescaled?) / r.pde_rescaled?).abs()))
            .fold(0.0, f64::max);
        out.checks.push(Check::at_most(
            "direct radial flow agrees with the time-rescaled flow",
            worst,
            1e-6,
        ));
    }
    out.table(
        "scaling",
        "ell,closed_form,ode_direct,ode_rescaled,pde_direct,pde_rescaled",
        table.rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{}",
                num(r.ell),
                num(r.closed_form),
                num(r.ode_direct),
                num(r.ode_rescaled),
                opt_num(r.pde_direct),
                opt_num(r.pde_rescaled)
            )
        }),
    );
    out.put("table", &table);
    Ok(out)
}

/// Max residual of the scalar curvature law and min `R + n(n-1)` at one
/// resolution.
pub fn residual_at(s: &Scenario, points: usize) -> Result<(f64, f64), CliError> {
    let mut cfg = flow_config(s, points);
    cfg.points = points;
    let fs = FlowState::new(&s.chart()?, s.background(), cfg)?;
    let courant = s.parameters.courant.unwrap_or(0.2);
    let t_mid = s.parameters.time.unwrap_or(0.1);
    let spacing = 10.0 * fs.stable_dt(courant);
    let states = residual_samples(&fs, t_mid, spacing, courant)?;
    let r = scalar_evolution_residual(&states)?;
    let length = *fs.grid().x.last().expect("nonempty grid");
    let min_e = r[0].scalar.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((r[0].max_abs_in(0.05 * length, 0.95 * length), min_e))
}

/// `log2` of successive ratios, or `None` when both values sit at roundoff.
pub fn observed_orders(values: &[f64], floor: f64) -> Vec<Option<f64>> {
    values
        .windows(2)
        .map(|w| (w[0] > floor || w[1] > floor).then(|| (w[0] / w[1]).log2()))
        .collect()
}

pub fn order_cell(o: Option<f64>) -> String {
    o.map_or_else(|| "saturated".to_string(), |v| format!("{v:.4}"))
}

pub fn refined_points(base: usize, level: usize) -> usize {
    (base - 1) * (1 << level) + 1
}

fn convergence_study(s: &Scenario) -> Result<TaskOutput, CliError> {
    let levels = s.parameters.levels.unwrap_or(3);
    let base = s.parameters.grid.map_or(101, |g| g.points);
    let pts: Vec<usize> = (0..levels).map(|l| refined_points(base, l)).collect();
    let res = pts
        .iter()
        .map(|&p| residual_at(s, p))
        .collect::<Result<Vec<_>, _>>()?;
    let errs: Vec<f64> = res.iter().map(|r| r.0).collect();
    let orders = observed_orders(&errs, 1e-13);
    let mut out = TaskOutput::default();
    let tol = s.tolerance(0.5);
    match orders.last().copied().flatten() {
        Some(order) => out.checks.push(Check::within(
            "residual ratio per halving of the spacing",
            2f64.powf(order),
            4.0,
            tol,
        )),
        None => out.checks.push(Check::new(
            "residual ratio per halving of the spacing",
            true,
            "residual at roundoff on every level",
        )),
    }
    let min_e = res.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    out.checks.push(Check::new(
        "scalar curvature stays at or above -n(n-1)",
        min_e >= -1e-6,
        format!("min(R + n(n-1)) = {min_e:.6e}, bound -1e-6"),
    ));
    out.table(
        "orders",
        "level,points,residual,observed_order",
        pts.iter().enumerate().map(|(l, p)| {
            let o = if l == 0 { String::new() } else { order_cell(orders[l - 1]) };
            format!("{l},{p},{},{o}", num(errs[l]))
        }),
    );
    out.put("points", pts);
    out.put("residuals", errs);
    out.put(
        "observed_orders",
        orders.iter().map(|o| order_cell(*o)).collect::<Vec<_>>(),
    );
    out.put("min_scalar_excess", min_e);
    Ok(out)
}
