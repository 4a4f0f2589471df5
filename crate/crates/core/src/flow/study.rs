//! Diagnostics computed from sequences of flow states, and the comparison of
//! flows with different asymptotic curvature radii.

use serde::Serialize;

use super::kappa::{kappa_evolve, KappaMethod, KappaState};
use super::pde::{advance, linear_fit, mass_fit, FlowConfig, FlowState};
use crate::error::{Error, Result};
use crate::geometry::{derivatives_at, fornberg_weights, RadialChart};
use crate::mass::{geon_boundary_data, wang_mass, BoundaryData};

/// `dE/dt - [Delta E + 2 E_ij E^ij - 2(n-1) E + X(E)]` at one time sample,
/// with `E = R + n(n-1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualField {
    pub t: f64,
    pub x: Vec<f64>,
    pub scalar: Vec<f64>,
    pub residual: Vec<f64>,
}

impl ResidualField {
    /// Largest `|residual|` over `x in [lo, hi]`.
    pub fn max_abs_in(&self, lo: f64, hi: f64) -> f64 {
        self.x
            .iter()
            .zip(&self.residual)
            .filter(|(&x, _)| x >= lo && x <= hi)
            .fold(0.0f64, |m, (_, r)| m.max(r.abs()))
    }
}

/// Spatial terms of the scalar evolution law at one state.
struct ScalarTerms {
    x: Vec<f64>,
    e: Vec<f64>,
    rhs: Vec<f64>,
}

fn scalar_terms(fs: &FlowState) -> ScalarTerms {
    let n = fs.n();
    let (nm1, mth) = ((n - 1) as f64, (n - 2) as f64);
    let f = fs.fields();
    let inv_ell2 = 1.0 / (fs.ell * fs.ell);
    let logs: Vec<[f64; 3]> = (1..=f.x.len()).map(|i| fs.log_components(i)).collect();
    let comp = |c: usize| -> Vec<f64> { logs.iter().map(|l| l[c]).collect() };
    let (u, vx, vt) = (comp(0), comp(1), comp(2));
    let mut rhs = Vec::with_capacity(f.x.len());
    for i in 0..f.x.len() {
        let x = f.x[i];
        let (e1, e2) = derivatives_at(&f.x, &f.scalar, i);
        let (u1, _) = derivatives_at(&f.x, &u, i);
        let (vx1, _) = derivatives_at(&f.x, &vx, i);
        let (vt1, _) = derivatives_at(&f.x, &vt, i);
        let lap = x * x * (-u[i]).exp() * (e2 + (0.5 * (vx1 + mth * vt1 - u1) - mth / x) * e1);
        let [a, b, c] = f.einstein[i];
        let square = a * a + b * b + mth * c * c;
        let e = f.scalar[i];
        rhs.push((lap + 2.0 * square - 2.0 * nm1 * e) * inv_ell2 + f.deturck[i] * e1);
    }
    ScalarTerms {
        x: f.x,
        e: f.scalar,
        rhs,
    }
}

/// Residual of the scalar curvature evolution law at every interior sample of
/// `states`, using three-point time differences and second-order spatial
/// differences of the solver's curvature.
pub fn scalar_evolution_residual(states: &[FlowState]) -> Result<Vec<ResidualField>> {
    if states.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "the residual needs at least 3 time samples, got {}",
            states.len()
        )));
    }
    let len = states[0].grid().len();
    if states.iter().any(|s| s.grid().len() != len) {
        return Err(Error::InvalidParameter(
            "time samples come from different grids".into(),
        ));
    }
    if states.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::InvalidParameter(
            "time samples must be strictly increasing".into(),
        ));
    }
    let terms: Vec<ScalarTerms> = states.iter().map(scalar_terms).collect();
    Ok((1..states.len() - 1)
        .map(|k| {
            let times = [states[k - 1].t, states[k].t, states[k + 1].t];
            let w = fornberg_weights(times[1], &times, 1);
            let mid = &terms[k];
            let residual = (0..mid.x.len())
                .map(|i| {
                    let dt = w[1][0] * terms[k - 1].e[i]
                        + w[1][1] * mid.e[i]
                        + w[1][2] * terms[k + 1].e[i];
                    dt - mid.rhs[i]
                })
                .collect();
            ResidualField {
                t: times[1],
                x: mid.x.clone(),
                scalar: mid.e.clone(),
                residual,
            }
        })
        .collect())
}

/// Three states centered on `fs.t + t_mid` and spaced by `spacing`.
pub fn residual_samples(
    fs: &FlowState,
    t_mid: f64,
    spacing: f64,
    courant: f64,
) -> Result<Vec<FlowState>> {
    if !(spacing > 0.0 && spacing < t_mid) {
        return Err(Error::InvalidParameter(format!(
            "sample spacing {spacing} must lie in (0, {t_mid})"
        )));
    }
    let a = advance(fs, t_mid - spacing, courant)?;
    let b = advance(&a, spacing, courant)?;
    let c = advance(&b, spacing, courant)?;
    Ok(vec![a, b, c])
}

/// Which integration paths a scaling study runs on the radial flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PdeScaling {
    pub config: FlowConfig,
    pub courant: f64,
}

/// Masses at a fixed time for one curvature radius.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub ell: f64,
    /// `m0 e^(-(n-2) t / ell^2)`.
    pub closed_form: f64,
    /// Boundary coefficient system integrated with the `1/ell^2` rate.
    pub ode_direct: f64,
    /// Unit-radius boundary system integrated to `t / ell^2`.
    pub ode_rescaled: f64,
    pub pde_direct: Option<f64>,
    pub pde_rescaled: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingTable {
    pub n: usize,
    pub t: f64,
    pub m0: f64,
    pub rows: Vec<ScalingRow>,
    /// `-d ln |m - m0| / d ln ell` fitted over all rows, per path.
    pub closed_form_exponent: f64,
    pub ode_exponent: f64,
    pub pde_exponent: Option<f64>,
    /// Largest relative difference between the direct boundary system and the
    /// closed form.
    pub ode_max_rel_diff: f64,
}

/// `m0 e^(-(n-2) t / ell^2)`.
pub fn predicted_mass(m0: f64, n: usize, t: f64, ell: f64) -> f64 {
    m0 * (-((n as f64) - 2.0) * t / (ell * ell)).exp()
}

fn deficit_exponent(m0: f64, pts: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = pts
        .iter()
        .map(|&(ell, m)| (ell.ln(), (m - m0).abs().ln()))
        .collect();
    -linear_fit(&logs).0
}

/// Geon masses at time `t` for each curvature radius in `ells`. The PDE
/// paths run only when `pde` is given.
pub fn parabolic_scaling_run(
    chart: &RadialChart,
    ells: &[f64],
    t: f64,
    pde: Option<PdeScaling>,
) -> Result<ScalingTable> {
    if ells.len() < 2 {
        return Err(Error::InsufficientData(
            "a scaling study needs at least two radii".into(),
        ));
    }
    if let Some(&bad) = ells.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidParameter(format!("ell = {bad} must be positive")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time {t} must be positive")));
    }
    let n = chart.n();
    let bd = geon_boundary_data(chart)?;
    let m0 = wang_mass(&bd)?.value;
    let kappa0 = bd
        .constant_kappa()
        .ok_or_else(|| Error::InvalidParameter("geon data must be constant".into()))?
        .to_float();
    let s0 = KappaState::new(n, kappa0)?;
    let ode_mass = |state: &KappaState<f64>| -> Result<f64> {
        Ok(wang_mass(&BoundaryData::constant(chart.clone(), state.kappa.clone())?)?.value)
    };
    let mut rows = Vec::with_capacity(ells.len());
    for &ell in ells {
        let direct = kappa_evolve(&s0, t, KappaMethod::Rk4 { steps: 2000 }, ell)?;
        let rescaled = kappa_evolve(&s0, t / (ell * ell), KappaMethod::Exponential, 1.0)?;
        let (pde_direct, pde_rescaled) = match pde {
            Some(p) => {
                let mut cfg = p.config;
                cfg.ell = ell;
                let a = advance(&FlowState::geon(chart, cfg)?, t, p.courant)?;
                cfg.ell = 1.0;
                let b = advance(&FlowState::geon(chart, cfg)?, t / (ell * ell), p.courant)?;
                (Some(mass_fit(&a)?.mass()), Some(mass_fit(&b)?.mass()))
            }
            None => (None, None),
        };
        rows.push(ScalingRow {
            ell,
            closed_form: predicted_mass(m0, n, t, ell),
            ode_direct: ode_mass(&direct)?,
            ode_rescaled: ode_mass(&rescaled)?,
            pde_direct,
            pde_rescaled,
        });
    }
    let col = |f: &dyn Fn(&ScalingRow) -> f64| -> Vec<(f64, f64)> {
        rows.iter().map(|r| (r.ell, f(r))).collect()
    };
    // The PDE deficit is measured from its own fitted initial mass.
    let pde_exponent = match pde {
        Some(p) => {
            let m_fit0 = mass_fit(&FlowState::geon(chart, p.config)?)?.mass();
            Some(deficit_exponent(m_fit0, &col(&|r| r.pde_direct.unwrap_or(f64::NAN))))
        }
        None => None,
    };
    Ok(ScalingTable {
        n,
        t,
        m0,
        closed_form_exponent: deficit_exponent(m0, &col(&|r| r.closed_form)),
        ode_exponent: deficit_exponent(m0, &col(&|r| r.ode_direct)),
        pde_exponent,
        ode_max_rel_diff: rows
            .iter()
            .map(|r| ((r.ode_direct - r.closed_form) / r.closed_form).abs())
            .fold(0.0, f64::max),
        rows,
    })
}
