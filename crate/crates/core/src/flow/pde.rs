//! Radial normalized Ricci-DeTurck flow of diagonal cohomogeneity-one metrics
//! `x^-2 (e^u dx^2 + e^(v_xi) dxi^2 + e^(v_theta) sum dtheta^2)` on a flat torus
//! boundary, with the initial metric as the fixed DeTurck reference.
//!
//! The unknowns are the deviations `p = u - u_h` and `q_a = v_a - v_ha` from
//! the reference. Reference derivatives are analytic, so the logarithmic
//! singularity of `v_xi` at a bolt never meets a difference stencil.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{fornberg_weights, GeonProfile, GridMetric, RadialChart};
use crate::tensor::SymTensor;

/// The initial (and reference) metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Background {
    /// The Horowitz-Myers geon on `[0, x_bolt]`, smooth through the bolt.
    Geon,
    /// The hyperbolic model on `[0, x_max]`, pinned at `x_max`.
    Hyperbolic { x_max: f64 },
    /// `g~_aa = 1 + kappa_a x^n (1 - (x/x_max)^2)^3 / n` on `[0, x_max]`,
    /// pinned at `x_max`.
    Perturbed {
        x_max: f64,
        kappa_xi: f64,
        kappa_theta: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowConfig {
    /// Total number of grid points, including `x = 0`.
    pub points: usize,
    /// Grid stretching `a` in `x = L (s - a sin(pi s) / pi)`; `0 <= a < 1`.
    /// Positive values cluster points near `x = 0`.
    pub stretch: f64,
    /// Asymptotic curvature radius.
    pub ell: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            points: 401,
            stretch: 0.8,
            ell: 1.0,
        }
    }
}

/// `(value, first, second)` derivatives in `x`.
type Jet = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq)]
struct RefPoint {
    u: Jet,
    v: [Jet; 2],
}

#[derive(Clone, Debug)]
struct Stencil {
    nodes: Vec<usize>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

/// Stretched grid in the computational variable `s`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowGrid {
    pub s: Vec<f64>,
    pub x: Vec<f64>,
    pub xs: Vec<f64>,
    pub xss: Vec<f64>,
    pub ds: f64,
    /// True when the last point is a bolt.
    pub bolt: bool,
}

impl FlowGrid {
    /// Stretched grid on `[0, length]`; `bolt` marks the last vertex as the bolt.
    pub fn new(points: usize, stretch: f64, length: f64, bolt: bool) -> Result<Self> {
        if points < 12 {
            return Err(Error::InvalidParameter(format!(
                "flow grids need at least 12 points, got {points}"
            )));
        }
        if !(0.0..1.0).contains(&stretch) {
            return Err(Error::InvalidParameter(format!(
                "stretch {stretch} outside [0, 1)"
            )));
        }
        let last = (points - 1) as f64;
        let ds = 1.0 / last;
        let s: Vec<f64> = (0..points).map(|i| i as f64 * ds).collect();
        let map = |s: f64| {
            let (sn, cs) = (PI * s).sin_cos();
            [
                length * (s - stretch * sn / PI),
                length * (1.0 - stretch * cs),
                length * stretch * PI * sn,
            ]
        };
        let m: Vec<[f64; 3]> = s.iter().map(|&v| map(v)).collect();
        Ok(Self {
            x: m.iter().map(|v| v[0]).collect(),
            xs: m.iter().map(|v| v[1]).collect(),
            xss: m.iter().map(|v| v[2]).collect(),
            s,
            ds,
            bolt,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Spacing next to the conformal boundary.
    pub fn boundary_spacing(&self) -> f64 {
        self.x[1] - self.x[0]
    }
}

#[derive(Debug)]
struct FlowSetup {
    n: usize,
    chart: RadialChart,
    background: Background,
    grid: FlowGrid,
    reference: Vec<RefPoint>,
    /// Indices that evolve; the rest are pinned.
    active: std::ops::RangeInclusive<usize>,
    stencils: Vec<Stencil>,
    consts: Vec<PointConst>,
    /// Weights giving the bolt value of an even function of the distance to
    /// the bolt from the three nearest interior values.
    bolt_weights: Option<[f64; 3]>,
}

impl FlowSetup {
    fn mult(&self) -> [f64; 2] {
        [1.0, (self.n - 2) as f64]
    }

    /// Sets bolt values: parity extrapolation for `p` and `q_theta`, and the
    /// regularity condition `q_xi = p` (the xi-circle closes with the
    /// reference cone angle).
    fn apply_bolt(&self, p: &mut [f64], q: &mut [Vec<f64>; 2]) {
        if let Some(w) = self.bolt_weights {
            let l = p.len() - 1;
            let ex = |f: &[f64]| w[0] * f[l - 1] + w[1] * f[l - 2] + w[2] * f[l - 3];
            p[l] = ex(p);
            q[1][l] = ex(&q[1]);
            q[0][l] = p[l];
        }
    }

    fn fill_derivatives(&self, p: &[f64], q: &[Vec<f64>; 2], work: &mut Work) {
        let g = &self.grid;
        for (c, f) in [p, &q[0][..], &q[1][..]].into_iter().enumerate() {
            work.ext.clear();
            work.ext.extend_from_slice(f);
            if g.bolt {
                let l = f.len();
                work.ext.push(f[l - 2]);
                work.ext.push(f[l - 3]);
            }
            for (k, (st, i)) in self.stencils.iter().zip(self.active.clone()).enumerate() {
                let mut fs = 0.0;
                let mut fss = 0.0;
                for (j, &node) in st.nodes.iter().enumerate() {
                    fs += st.d1[j] * work.ext[node];
                    fss += st.d2[j] * work.ext[node];
                }
                let fx = fs / g.xs[i];
                work.d1[c][k] = fx;
                work.d2[c][k] = (fss - g.xss[i] * fx) / (g.xs[i] * g.xs[i]);
            }
        }
    }

    /// Curvature, DeTurck field and unscaled rates at active point `k`
    /// (grid index `i`).
    #[inline]
    fn kernel(&self, k: usize, p: &[f64], q: &[Vec<f64>; 2], i: usize, w: &Work) -> PointOut {
        let c = &self.consts[k];
        let mult = self.mult();
        let (nm1, nm2) = ((self.n - 1) as f64, (self.n - 2) as f64);
        let (p0, p1, p2) = (p[i], w.d1[0][k], w.d2[0][k]);
        let qv = [q[0][i], q[1][i]];
        let q1 = [w.d1[1][k], w.d1[2][k]];
        let q2 = [w.d2[1][k], w.d2[2][k]];
        let u1 = c.uh[1] + p1;
        let v1 = [c.vh[0][1] + q1[0], c.vh[1][1] + q1[1]];
        let v2 = [c.vh[0][2] + q2[0], c.vh[1][2] + q2[1]];
        let s1 = mult[0] * v1[0] + mult[1] * v1[1];
        let half_inv_x = 0.5 * c.inv_x;
        let mut s = 0.0;
        let mut t = [0.0; 2];
        for a in 0..2 {
            let d = v1[a] - u1;
            s += mult[a] * (0.5 * v2[a] + 0.25 * v1[a] * d - d * half_inv_x);
            t[a] = 0.5 * v2[a] + 0.25 * v1[a] * (s1 - u1) - (nm2 * v1[a] + s1 - u1) * half_inv_x;
        }
        let em = (-p0).exp_m1();
        let ep = 1.0 + em;
        let eu = c.euh * ep;
        let em_u = if c.uh[0] == 0.0 { em } else { (-(c.uh[0] + p0)).exp_m1() };
        let base = -nm1 * em_u;
        let x2eu = c.x2 * eu;
        let e = [base - x2eu * s, base - x2eu * t[0], base - x2eu * t[1]];

        let mut g = 0.5 * ep * p1;
        let mut gd = 0.5 * ep * (p2 - p1 * p1);
        for a in 0..2 {
            // e^-q - e^-p without cancellation.
            let diff = ep * (p0 - qv[a]).exp_m1();
            let eq = ep + diff;
            g += mult[a] * (diff * c.w[a] - 0.5 * ep * q1[a]);
            gd += mult[a]
                * ((-q1[a] * eq + p1 * ep) * c.w[a] + diff * c.wd[a]
                    - 0.5 * ep * (q2[a] - p1 * q1[a]));
        }
        let f = c.euh * g;
        let fd = c.euh * (gd - c.uh[1] * g);
        let xf = c.x2 * f;
        let xfd = 2.0 * c.x * f + c.x2 * fd;
        let two_inv_x = 2.0 * c.inv_x;
        PointOut {
            e,
            xf,
            xfd,
            rates: [
                -2.0 * e[0] + xf * (u1 - two_inv_x) + 2.0 * xfd,
                -2.0 * e[1] + xf * (v1[0] - two_inv_x),
                -2.0 * e[2] + xf * (v1[1] - two_inv_x),
            ],
        }
    }
}

struct PointOut {
    e: [f64; 3],
    xf: f64,
    xfd: f64,
    rates: [f64; 3],
}

/// Reference data at an active point.
#[derive(Debug)]
struct PointConst {
    x: f64,
    inv_x: f64,
    x2: f64,
    euh: f64,
    uh: Jet,
    vh: [Jet; 2],
    w: [f64; 2],
    wd: [f64; 2],
}

fn bolt_extrapolation(grid: &FlowGrid) -> Option<[f64; 3]> {
    if !grid.bolt {
        return None;
    }
    let l = grid.len() - 1;
    let r: [f64; 3] = [1, 2, 3].map(|j| (grid.x[l] - grid.x[l - j]).powi(2));
    Some(std::array::from_fn(|j| {
        (0..3)
            .filter(|&k| k != j)
            .map(|k| -r[k] / (r[j] - r[k]))
            .product()
    }))
}

fn build_stencils(grid: &FlowGrid, active: &std::ops::RangeInclusive<usize>) -> Vec<Stencil> {
    let len = grid.len();
    let mut es = grid.s.clone();
    if grid.bolt {
        es.push(2.0 - grid.s[len - 2]);
        es.push(2.0 - grid.s[len - 3]);
    }
    let elen = es.len();
    active
        .clone()
        .map(|i| {
            let nodes: Vec<usize> = if i >= 2 && i + 2 < elen {
                (i - 2..=i + 2).collect()
            } else if i < 2 {
                (0..6).collect()
            } else {
                (elen - 6..elen).collect()
            };
            let ns: Vec<f64> = nodes.iter().map(|&j| es[j]).collect();
            let w = fornberg_weights(grid.s[i], &ns, 2);
            Stencil {
                nodes,
                d1: w[1].clone(),
                d2: w[2].clone(),
            }
        })
        .collect()
}

fn perturbed_jet(n: usize, kappa: f64, x_max: f64, x: f64) -> Jet {
    let nf = n as f64;
    let y = x / x_max;
    let b = (1.0 - y * y).powi(3);
    let b1 = -6.0 * y * (1.0 - y * y).powi(2) / x_max;
    let b2 = (-6.0 * (1.0 - y * y).powi(2) + 24.0 * y * y * (1.0 - y * y)) / (x_max * x_max);
    let c = kappa / nf;
    let xn = x.powi(n as i32);
    let xn1 = nf * x.powi(n as i32 - 1);
    let xn2 = nf * (nf - 1.0) * x.powi(n as i32 - 2);
    let f = c * xn * b;
    let f1 = c * (xn1 * b + xn * b1);
    let f2 = c * (xn2 * b + 2.0 * xn1 * b1 + xn * b2);
    [f.ln_1p(), f1 / (1.0 + f), f2 / (1.0 + f) - (f1 / (1.0 + f)).powi(2)]
}

/// Snapshot of the flow at time `t`.
#[derive(Clone, Debug)]
pub struct FlowState {
    setup: Arc<FlowSetup>,
    pub p: Vec<f64>,
    pub q: [Vec<f64>; 2],
    pub t: f64,
    pub ell: f64,
}

/// Pointwise curvature and gauge quantities on the active points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowFields {
    pub x: Vec<f64>,
    /// Mixed components `E^x_x`, `E^xi_xi`, `E^theta_theta` of `Ric + (n-1) g`.
    pub einstein: Vec<[f64; 3]>,
    /// `E = R + n(n-1)`.
    pub scalar: Vec<f64>,
    /// Radial DeTurck component `X^x` and its `x`-derivative.
    pub deturck: Vec<f64>,
    pub deturck_dx: Vec<f64>,
    /// Time derivatives of `p, q_xi, q_theta` (scaled by `1/ell^2`).
    pub rates: Vec<[f64; 3]>,
}

impl FlowFields {
    pub fn max_abs_einstein(&self) -> f64 {
        self.einstein
            .iter()
            .flat_map(|e| e.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_scalar(&self) -> f64 {
        self.scalar.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

impl FlowState {
    /// Geon initial data on a torus chart; the chart's periods set the mass.
    pub fn geon(chart: &RadialChart, config: FlowConfig) -> Result<Self> {
        Self::new(chart, Background::Geon, config)
    }

    pub fn new(chart: &RadialChart, background: Background, config: FlowConfig) -> Result<Self> {
        if chart.k() != 0 {
            return Err(Error::InvalidParameter(
                "the radial flow is implemented for torus boundaries".into(),
            ));
        }
        if !(config.ell > 0.0 && config.ell.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ell = {} must be positive",
                config.ell
            )));
        }
        let n = chart.n();
        let (length, bolt) = match background {
            Background::Geon => (GeonProfile::new(n)?.x_bolt(), true),
            Background::Hyperbolic { x_max } | Background::Perturbed { x_max, .. } => {
                if !(x_max > 0.0 && x_max.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "x_max = {x_max} must be positive"
                    )));
                }
                (x_max, false)
            }
        };
        let grid = FlowGrid::new(config.points, config.stretch, length, bolt)?;
        let reference: Vec<RefPoint> = grid
            .x
            .iter()
            .map(|&x| match background {
                Background::Geon => {
                    let [xi, th] = GeonProfile { n }.log_components(x);
                    RefPoint {
                        u: [0.0; 3],
                        v: [xi, th],
                    }
                }
                Background::Hyperbolic { .. } => RefPoint {
                    u: [0.0; 3],
                    v: [[0.0; 3]; 2],
                },
                Background::Perturbed {
                    x_max,
                    kappa_xi,
                    kappa_theta,
                } => RefPoint {
                    u: [0.0; 3],
                    v: [
                        perturbed_jet(n, kappa_xi, x_max, x),
                        perturbed_jet(n, kappa_theta, x_max, x),
                    ],
                },
            })
            .collect();
        let bolt_index = if bolt { grid.len() - 1 } else { grid.len() };
        if let Some(i) = (0..bolt_index).find(|&i| {
            let r = &reference[i];
            r.v.iter().flatten().chain(&r.u).any(|v| !v.is_finite())
        }) {
            return Err(Error::InvalidParameter(format!(
                "initial metric is degenerate at x = {}",
                grid.x[i]
            )));
        }
        let last = grid.len() - 1;
        let active = 1..=last - 1;
        let bolt_weights = bolt_extrapolation(&grid);
        let stencils = build_stencils(&grid, &active);
        let consts = active
            .clone()
            .map(|i| {
                let x = grid.x[i];
                let r = &reference[i];
                PointConst {
                    x,
                    inv_x: 1.0 / x,
                    x2: x * x,
                    euh: (-r.u[0]).exp(),
                    uh: r.u,
                    vh: r.v,
                    w: [0.5 * r.v[0][1] - 1.0 / x, 0.5 * r.v[1][1] - 1.0 / x],
                    wd: [
                        0.5 * r.v[0][2] + 1.0 / (x * x),
                        0.5 * r.v[1][2] + 1.0 / (x * x),
                    ],
                }
            })
            .collect();
        let len = grid.len();
        Ok(Self {
            setup: Arc::new(FlowSetup {
                n,
                chart: chart.clone(),
                background,
                grid,
                reference,
                active,
                stencils,
                consts,
                bolt_weights,
            }),
            p: vec![0.0; len],
            q: [vec![0.0; len], vec![0.0; len]],
            t: 0.0,
            ell: config.ell,
        })
    }

    pub fn n(&self) -> usize {
        self.setup.n
    }

    pub fn chart(&self) -> &RadialChart {
        &self.setup.chart
    }

    pub fn background(&self) -> Background {
        self.setup.background
    }

    pub fn grid(&self) -> &FlowGrid {
        &self.setup.grid
    }

    /// `ln` of the compactified components `(g~_xx, g~_xixi, g~_thetatheta)` at
    /// grid point `i`.
    pub fn log_components(&self, i: usize) -> [f64; 3] {
        let r = &self.setup.reference[i];
        [r.u[0] + self.p[i], r.v[0][0] + self.q[0][i], r.v[1][0] + self.q[1][i]]
    }

    /// Reference (initial) logarithms at grid point `i`.
    pub fn reference_log_components(&self, i: usize) -> [f64; 3] {
        let r = &self.setup.reference[i];
        [r.u[0], r.v[0][0], r.v[1][0]]
    }

    /// Physical components on all points except `x = 0`, in the defining
    /// function coordinate.
    pub fn to_grid_metric(&self) -> Result<GridMetric> {
        let g = self.grid();
        let idx: Vec<usize> = (1..g.len()).collect();
        let comps: Vec<[f64; 3]> = idx
            .iter()
            .map(|&i| {
                let l = self.log_components(i);
                let x2 = g.x[i] * g.x[i];
                l.map(|v| v.exp() / x2)
            })
            .collect();
        GridMetric::new(
            self.chart().clone(),
            idx.iter().map(|&i| g.x[i]).collect(),
            comps.iter().map(|c| c[0]).collect(),
            comps.iter().map(|c| c[1]).collect(),
            comps.iter().map(|c| c[2]).collect(),
        )
    }

    /// Curvature, DeTurck field and evolution rates on the active points.
    pub fn fields(&self) -> FlowFields {
        let st = &self.setup;
        let mut work = Work::new(st);
        st.fill_derivatives(&self.p, &self.q, &mut work);
        let count = st.stencils.len();
        let mut out = FlowFields {
            x: Vec::with_capacity(count),
            einstein: Vec::with_capacity(count),
            scalar: Vec::with_capacity(count),
            deturck: Vec::with_capacity(count),
            deturck_dx: Vec::with_capacity(count),
            rates: Vec::with_capacity(count),
        };
        let mult = st.mult();
        let inv_ell2 = 1.0 / (self.ell * self.ell);
        for (k, i) in st.active.clone().enumerate() {
            let o = st.kernel(k, &self.p, &self.q, i, &work);
            out.x.push(st.consts[k].x);
            out.einstein.push(o.e);
            out.scalar.push(o.e[0] + mult[0] * o.e[1] + mult[1] * o.e[2]);
            out.deturck.push(o.xf * inv_ell2);
            out.deturck_dx.push(o.xfd * inv_ell2);
            out.rates.push(o.rates.map(|r| r * inv_ell2));
        }
        out
    }

    /// Largest step for which the explicit scheme is stable:
    /// `courant * min (dx^2 / D)` with `D = x^2 e^-u / ell^2` the diffusivity.
    pub fn stable_dt(&self, courant: f64) -> f64 {
        let g = self.grid();
        let mut m = f64::INFINITY;
        for i in self.setup.active.clone() {
            let dx = g.xs[i] * g.ds;
            let d = g.x[i] * g.x[i] * (-self.log_components(i)[0]).exp() / (self.ell * self.ell);
            m = m.min(dx * dx / d);
        }
        courant * m
    }

    fn check_finite(&self) -> Result<()> {
        for (name, f) in [("p", &self.p), ("q_xi", &self.q[0]), ("q_theta", &self.q[1])] {
            if let Some(i) = f.iter().position(|v| !v.is_finite() || v.abs() > 50.0) {
                return Err(Error::Instability {
                    time: self.t,
                    detail: format!(
                        "{name} = {} at x = {} (grid index {i})",
                        f[i],
                        self.grid().x[i]
                    ),
                });
            }
        }
        Ok(())
    }
}

/// One classical Runge-Kutta step of the method of lines.
pub fn rdtf_step(fs: &FlowState, dt: f64) -> Result<FlowState> {
    let mut out = fs.clone();
    Integrator::new(fs).step(&mut out, dt)?;
    Ok(out)
}

/// Advances by `duration` in equal steps no larger than the stable step.
pub fn advance(fs: &FlowState, duration: f64, courant: f64) -> Result<FlowState> {
    let mut s = fs.clone();
    Integrator::new(fs).advance(&mut s, duration, courant)?;
    Ok(s)
}

/// Scratch space for derivatives on the active points.
struct Work {
    ext: Vec<f64>,
    d1: [Vec<f64>; 3],
    d2: [Vec<f64>; 3],
}

impl Work {
    fn new(st: &FlowSetup) -> Self {
        let c = st.stencils.len();
        Self {
            ext: Vec::with_capacity(st.grid.len() + 2),
            d1: [vec![0.0; c], vec![0.0; c], vec![0.0; c]],
            d2: [vec![0.0; c], vec![0.0; c], vec![0.0; c]],
        }
    }
}

/// Reusable buffers for classical Runge-Kutta steps.
struct Integrator {
    work: Work,
    k: [Vec<[f64; 3]>; 4],
    stage_p: Vec<f64>,
    stage_q: [Vec<f64>; 2],
}

impl Integrator {
    fn new(fs: &FlowState) -> Self {
        let c = fs.setup.stencils.len();
        Self {
            work: Work::new(&fs.setup),
            k: std::array::from_fn(|_| vec![[0.0; 3]; c]),
            stage_p: fs.p.clone(),
            stage_q: fs.q.clone(),
        }
    }

    fn stage(&mut self, st: &FlowSetup, idx: usize, inv_ell2: f64) {
        st.fill_derivatives(&self.stage_p, &self.stage_q, &mut self.work);
        for (k, i) in st.active.clone().enumerate() {
            let o = st.kernel(k, &self.stage_p, &self.stage_q, i, &self.work);
            self.k[idx][k] = o.rates.map(|r| r * inv_ell2);
        }
    }

    fn set_stage(&mut self, fs: &FlowState, from: usize, scale: f64) {
        for (k, i) in fs.setup.active.clone().enumerate() {
            let r = self.k[from][k];
            self.stage_p[i] = fs.p[i] + scale * r[0];
            self.stage_q[0][i] = fs.q[0][i] + scale * r[1];
            self.stage_q[1][i] = fs.q[1][i] + scale * r[2];
        }
        fs.setup.apply_bolt(&mut self.stage_p, &mut self.stage_q);
    }

    fn step(&mut self, fs: &mut FlowState, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
        }
        let st = fs.setup.clone();
        let inv_ell2 = 1.0 / (fs.ell * fs.ell);
        self.stage_p.copy_from_slice(&fs.p);
        self.stage_q[0].copy_from_slice(&fs.q[0]);
        self.stage_q[1].copy_from_slice(&fs.q[1]);
        self.stage(&st, 0, inv_ell2);
        self.set_stage(fs, 0, 0.5 * dt);
        self.stage(&st, 1, inv_ell2);
        self.set_stage(fs, 1, 0.5 * dt);
        self.stage(&st, 2, inv_ell2);
        self.set_stage(fs, 2, dt);
        self.stage(&st, 3, inv_ell2);
        for (k, i) in st.active.clone().enumerate() {
            let c = |c: usize| {
                (self.k[0][k][c] + 2.0 * self.k[1][k][c] + 2.0 * self.k[2][k][c] + self.k[3][k][c])
                    * dt
                    / 6.0
            };
            fs.p[i] += c(0);
            fs.q[0][i] += c(1);
            fs.q[1][i] += c(2);
        }
        st.apply_bolt(&mut fs.p, &mut fs.q);
        fs.t += dt;
        fs.check_finite()
    }

    fn advance(&mut self, fs: &mut FlowState, duration: f64, courant: f64) -> Result<usize> {
        if duration == 0.0 {
            return Ok(0);
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "duration {duration} must be positive"
            )));
        }
        if !(courant > 0.0 && courant <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "courant factor {courant} outside (0, 1]"
            )));
        }
        let steps = (duration / fs.stable_dt(courant)).ceil().max(1.0) as usize;
        let dt = duration / steps as f64;
        let t_end = fs.t + duration;
        for _ in 0..steps {
            self.step(fs, dt)?;
        }
        fs.t = t_end;
        Ok(steps)
    }
}

/// Components of `g~ - 1` near `x = 0` fitted by `sum_{j=1}^{n+1} c_j x^j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionFit {
    /// `(kappa_11, kappa_xixi, kappa_thetatheta) = n c_n`.
    pub kappa: [f64; 3],
    /// Coefficients `c_1..c_(n+1)` per component.
    pub coefficients: [Vec<f64>; 3],
    /// Largest `|sum_{j<n} c_j x^j|` over the window, over all components.
    pub sub_order: f64,
    /// Singular-value ratio of the scaled design matrix.
    pub condition: f64,
    pub residual_rms: f64,
    pub window: (f64, f64),
    pub window_points: usize,
}

/// Least-squares fit of `g~ - 1` values (three components) at `x` over the
/// window `[lo, hi]`.
pub fn fit_expansion(
    n: usize,
    x: &[f64],
    deviations: [&[f64]; 3],
    lo: f64,
    hi: f64,
) -> Result<ExpansionFit> {
    let idx: Vec<usize> = (0..x.len()).filter(|&i| x[i] >= lo && x[i] <= hi).collect();
    let cols = n + 1;
    if idx.len() < cols + 2 {
        return Err(Error::IllConditionedFit(format!(
            "{} points in the window [{lo}, {hi}] for {cols} coefficients",
            idx.len()
        )));
    }
    let scale = idx.iter().map(|&i| x[i]).fold(0.0f64, f64::max);
    let a = nalgebra::DMatrix::from_fn(idx.len(), cols, |r, c| {
        (x[idx[r]] / scale).powi(c as i32 + 1)
    });
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = smax / smin;
    if !(condition < 1e10) {
        return Err(Error::IllConditionedFit(format!(
            "design matrix condition number {condition:.3e} over [{lo}, {hi}]"
        )));
    }
    let mut coefficients: [Vec<f64>; 3] = Default::default();
    let mut ss = 0.0;
    let mut sub_order = 0.0f64;
    for (comp, dev) in deviations.iter().enumerate() {
        let b = nalgebra::DVector::from_iterator(idx.len(), idx.iter().map(|&i| dev[i]));
        let sol = svd
            .solve(&b, 1e-14)
            .map_err(|e| Error::IllConditionedFit(e.to_string()))?;
        ss += (&a * &sol - &b).norm_squared();
        coefficients[comp] = (0..cols)
            .map(|c| sol[c] / scale.powi(c as i32 + 1))
            .collect();
        for &i in &idx {
            let low: f64 = (0..n - 1)
                .map(|c| coefficients[comp][c] * x[i].powi(c as i32 + 1))
                .sum();
            sub_order = sub_order.max(low.abs());
        }
    }
    let nf = n as f64;
    Ok(ExpansionFit {
        kappa: [0, 1, 2].map(|c| nf * coefficients[c][n - 1]),
        coefficients,
        sub_order,
        condition,
        residual_rms: (ss / (3 * idx.len()) as f64).sqrt(),
        window: (lo, hi),
        window_points: idx.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassFit {
    pub t: f64,
    pub fit: ExpansionFit,
    pub report: crate::mass::MassReport,
    /// Fitted boundary data, kept for callers that need the tensor.
    #[serde(skip)]
    pub boundary: Option<crate::mass::BoundaryData<f64>>,
}

impl MassFit {
    pub fn mass(&self) -> f64 {
        self.report
            .wang_mass
            .as_ref()
            .map(|w| w.value)
            .unwrap_or(f64::NAN)
    }
}

/// Mass from a near-boundary fit over `x in [2 h_b, 20 h_b]`, `h_b` the
/// spacing next to the boundary.
pub fn mass_fit(fs: &FlowState) -> Result<MassFit> {
    let g = fs.grid();
    let h = g.boundary_spacing();
    let mut dev: [Vec<f64>; 3] = Default::default();
    for i in 0..g.len() {
        let l = fs.log_components(i);
        for c in 0..3 {
            dev[c].push(l[c].exp_m1());
        }
    }
    let fit = fit_expansion(fs.n(), &g.x, [&dev[0], &dev[1], &dev[2]], 2.0 * h, 20.0 * h)?;
    let n = fs.n();
    let mut diag = vec![fit.kappa[1]];
    diag.extend(std::iter::repeat(fit.kappa[2]).take(n - 2));
    let kappa = SymTensor::from_blocks(fit.kappa[0], &diag);
    let bd = crate::mass::BoundaryData::constant(fs.chart().clone(), kappa)?;
    let report = crate::mass::MassReport::from_parts(Some(&bd), None)?;
    Ok(MassFit {
        t: fs.t,
        fit,
        report,
        boundary: Some(bd),
    })
}

/// Radial DeTurck component `X^x` on the active points.
pub fn deturck_field(fs: &FlowState) -> (Vec<f64>, Vec<f64>) {
    let f = fs.fields();
    (f.x, f.deturck)
}

/// Log-log slope of `|X^x|` against `x` over `[lo, hi]`.
pub fn deturck_decay_slope(fs: &FlowState, lo: f64, hi: f64) -> Result<f64> {
    let (x, v) = deturck_field(fs);
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(&v)
        .filter(|(&x, &v)| x >= lo && x <= hi && v != 0.0)
        .map(|(&x, &v)| (x.ln(), v.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} nonzero field samples in [{lo}, {hi}]",
            pts.len()
        )));
    }
    Ok(linear_fit(&pts).0)
}

/// Least-squares `(slope, intercept)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunOptions {
    pub t_end: f64,
    /// Number of equal output intervals.
    pub samples: usize,
    pub courant: f64,
    pub keep_states: bool,
}

/// One output row of a flow run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowSample {
    pub t: f64,
    pub mass_fitted: f64,
    pub mass_predicted: f64,
    pub max_abs_e: f64,
    pub min_scalar_e: f64,
    pub fit_condition: f64,
    pub sub_order: f64,
    pub kappa: [f64; 3],
}

pub const FLOW_CSV_HEADER: &str =
    "t,mass_fitted,mass_predicted,max_abs_E,min_R_plus_n_n_minus_1,fit_condition_number";

impl FlowSample {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.9},{:.12e},{:.12e},{:.6e},{:.6e},{:.6e}",
            self.t,
            self.mass_fitted,
            self.mass_predicted,
            self.max_abs_e,
            self.min_scalar_e,
            self.fit_condition
        )
    }
}

#[derive(Clone, Debug)]
pub struct FlowRun {
    pub samples: Vec<FlowSample>,
    pub fits: Vec<MassFit>,
    pub states: Vec<FlowState>,
    pub final_state: FlowState,
    pub steps: usize,
    /// Initial mass used for the predicted curve.
    pub m0: f64,
}

impl FlowRun {
    /// Rows in the documented column order, header first.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(FLOW_CSV_HEADER);
        s.push('\n');
        for r in &self.samples {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    /// Least-squares slope of `ln |m(t)|`.
    pub fn log_mass_slope(&self) -> Result<f64> {
        let pts: Vec<(f64, f64)> = self
            .samples
            .iter()
            .map(|s| (s.t, s.mass_fitted.abs().ln()))
            .collect();
        if pts.len() < 2 || pts.iter().any(|p| !p.1.is_finite()) {
            return Err(Error::InsufficientData(
                "log-mass slope needs two or more nonzero masses".into(),
            ));
        }
        Ok(linear_fit(&pts).0)
    }
}

/// Evolves to `t_end`, fitting the mass at `samples + 1` equally spaced
/// times. The predicted curve is `m0 e^(-(n-2) t / ell^2)` with `m0` the exact
/// mass for the geon and the fitted initial mass otherwise.
pub fn flow_run(fs0: &FlowState, opts: RunOptions) -> Result<FlowRun> {
    if opts.samples == 0 || !(opts.t_end > 0.0) {
        return Err(Error::InvalidParameter(
            "flow runs need a positive end time and at least one interval".into(),
        ));
    }
    if !(opts.courant > 0.0 && opts.courant <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "courant factor {} outside (0, 1]",
            opts.courant
        )));
    }
    let fit0 = mass_fit(fs0)?;
    let m0 = match fs0.background() {
        Background::Geon => crate::mass::wang_mass(&crate::mass::geon_boundary_data(fs0.chart())?)?.value,
        _ => fit0.mass(),
    };
    let interval = opts.t_end / opts.samples as f64;
    let mut state = fs0.clone();
    let mut samples = Vec::new();
    let mut fits = Vec::new();
    let mut states = Vec::new();
    let mut steps = 0;
    let mut integrator = Integrator::new(fs0);
    for k in 0..=opts.samples {
        if k > 0 {
            steps += integrator.advance(&mut state, interval, opts.courant)?;
            state.t = fs0.t + k as f64 * interval;
        }
        let fit = if k == 0 { fit0.clone() } else { mass_fit(&state)? };
        let f = state.fields();
        samples.push(FlowSample {
            t: state.t,
            mass_fitted: fit.mass(),
            mass_predicted: super::study::predicted_mass(m0, fs0.n(), state.t, state.ell),
            max_abs_e: f.max_abs_einstein(),
            min_scalar_e: f.min_scalar(),
            fit_condition: fit.fit.condition,
            sub_order: fit.fit.sub_order,
            kappa: fit.fit.kappa,
        });
        fits.push(fit);
        if opts.keep_states {
            states.push(state.clone());
        }
    }
    Ok(FlowRun {
        samples,
        fits,
        states,
        final_state: state,
        steps,
        m0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::kappa::kappa_rhs;
    use crate::flow::KappaState;
    use crate::geometry::build_perturbed;
    use crate::scalar::Scalar;
    use crate::tensor::random_small_rational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn torus(n: usize) -> RadialChart {
        RadialChart::unit_torus(n).unwrap()
    }

    fn config(points: usize) -> FlowConfig {
        FlowConfig {
            points,
            ..Default::default()
        }
    }

    #[test]
    fn hyperbolic_model_is_a_fixed_point() {
        for n in 3..=5 {
            let fs = FlowState::new(&torus(n), Background::Hyperbolic { x_max: 1.0 }, config(101))
                .unwrap();
            let next = rdtf_step(&fs, fs.stable_dt(0.2)).unwrap();
            let change = next
                .p
                .iter()
                .chain(&next.q[0])
                .chain(&next.q[1])
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(change < 1e-10, "n={n} change={change}");
        }
    }

    #[test]
    fn geon_starts_with_constant_scalar_curvature_and_no_gauge_field() {
        for n in 3..=5 {
            let fs = FlowState::geon(&torus(n), config(201)).unwrap();
            let f = fs.fields();
            let worst = f.scalar.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(worst < 1e-8, "n={n} |E| = {worst}");
            assert!(f.deturck.iter().all(|&v| v == 0.0));
            // The geon is not Einstein: E_ij itself is of order one.
            assert!(f.max_abs_einstein() > 0.1);
        }
    }

    #[test]
    fn fit_recovers_series_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grid = FlowGrid::new(401, 0.8, 1.0, false).unwrap();
        let h = grid.boundary_spacing();
        for n in 3..=5 {
            for _ in 0..5 {
                let k = [0; 3].map(|_| random_small_rational(&mut rng));
                let mut diag = vec![k[1].clone()];
                diag.extend(std::iter::repeat(k[2].clone()).take(n - 2));
                let kappa = SymTensor::from_blocks(k[0].clone(), &diag);
                let g = build_perturbed(&torus(n), &kappa, n as i32 + 2).unwrap();
                let dev: Vec<Vec<f64>> = [0, 1, 2]
                    .iter()
                    .map(|&c| {
                        let s = g.get(c, c);
                        grid.x
                            .iter()
                            .map(|&x| {
                                s.terms()
                                    .filter(|(e, _)| *e > -2)
                                    .map(|(e, c)| c.as_f64() * x.powi(e + 2))
                                    .sum()
                            })
                            .collect()
                    })
                    .collect();
                let fit =
                    fit_expansion(n, &grid.x, [&dev[0], &dev[1], &dev[2]], 2.0 * h, 20.0 * h)
                        .unwrap();
                for c in 0..3 {
                    let want = k[c].as_f64();
                    let err = (fit.kappa[c] - want).abs();
                    assert!(err <= 1e-8 * want.abs().max(1e-300) || (want == 0.0 && err < 1e-12));
                }
                assert!(fit.sub_order < 1e-14, "{}", fit.sub_order);
            }
        }
    }

    #[test]
    fn hyperbolic_fit_is_zero() {
        let fs =
            FlowState::new(&torus(4), Background::Hyperbolic { x_max: 1.0 }, config(201)).unwrap();
        let fit = mass_fit(&fs).unwrap();
        assert_eq!(fit.fit.kappa, [0.0; 3]);
        assert_eq!(fit.mass(), 0.0);
    }

    #[test]
    fn geon_fit_has_unit_negative_trace() {
        for n in 3..=5 {
            let fs = FlowState::geon(&torus(n), config(401)).unwrap();
            let k = mass_fit(&fs).unwrap().fit.kappa;
            let trace = k[1] + (n - 2) as f64 * k[2];
            assert!((trace + 1.0).abs() < 1e-4, "n={n} trace={trace}");
            assert!(k[0].abs() < 1e-6);
            assert!((k[1] + (n - 1) as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn gauge_field_of_order_n_data_decays_one_order_faster() {
        for n in 3..=5 {
            let mut fs =
                FlowState::new(&torus(n), Background::Hyperbolic { x_max: 1.0 }, config(401))
                    .unwrap();
            let w = [0.7, -1.3, 0.4];
            let nf = n as f64;
            for i in 1..fs.grid().len() - 1 {
                let xn = fs.grid().x[i].powi(n as i32) / nf;
                fs.p[i] = w[0] * xn;
                fs.q[0][i] = w[1] * xn;
                fs.q[1][i] = w[2] * xn;
            }
            let h = fs.grid().boundary_spacing();
            let slope = deturck_decay_slope(&fs, 2.0 * h, 20.0 * h).unwrap();
            assert!((slope - (nf + 1.0)).abs() < 0.1, "n={n} slope={slope}");
        }
    }

    #[test]
    fn near_boundary_curvature_matches_the_coefficient_system() {
        // At t = 0 the rates are -2 E^i_i, and near x = 0 they must approach
        // x^n (A kappa) / n for the geon's kappa.
        for n in 3..=5 {
            let fs = FlowState::geon(&torus(n), config(401)).unwrap();
            let k = mass_fit(&fs).unwrap().fit.kappa;
            let mut diag = vec![k[1]];
            diag.extend(std::iter::repeat(k[2]).take(n - 2));
            let kappa = SymTensor::from_blocks(k[0], &diag);
            let d = kappa_rhs(&KappaState::new(n, kappa).unwrap()).unwrap();
            let expected = [*d.radial(), *d.get(1, 1), *d.get(2, 2)];
            let f = fs.fields();
            let i = 10;
            let xn = f.x[i].powi(n as i32) / n as f64;
            for c in 0..3 {
                let got = f.rates[i][c] / xn;
                assert_eq!(got.signum(), expected[c].signum(), "n={n} c={c}");
                assert!((got - expected[c]).abs() < 1e-3 * expected[c].abs().max(1.0));
            }
        }
    }

    #[test]
    fn two_steps_advance_time_and_start_the_mass_decay() {
        let fs = FlowState::geon(&torus(3), config(101)).unwrap();
        let dt = fs.stable_dt(0.2);
        let s2 = rdtf_step(&rdtf_step(&fs, dt).unwrap(), dt).unwrap();
        assert!((s2.t - 2.0 * dt).abs() < 1e-18);
        let (m0, m2) = (mass_fit(&fs).unwrap().mass(), mass_fit(&s2).unwrap().mass());
        // The mass decays at unit rate for n = 3.
        assert!((m2 / m0 - (-2.0 * dt).exp()).abs() < 1e-6, "{m0} {m2}");
        assert!(s2.fields().min_scalar() > -1e-9);
    }

    #[test]
    fn oversized_step_is_reported_as_instability() {
        let fs = FlowState::geon(&torus(3), config(101)).unwrap();
        let mut s = fs.clone();
        let mut err = None;
        for _ in 0..50 {
            match rdtf_step(&s, 200.0 * fs.stable_dt(1.0)) {
                Ok(next) => s = next,
                Err(e) => {
                    err = Some(e);
                    break;
                }
            }
        }
        assert!(matches!(err, Some(Error::Instability { .. })), "{err:?}");
    }

    #[test]
    fn perturbed_background_mass_decays_at_the_predicted_rate() {
        let bg = Background::Perturbed {
            x_max: 1.0,
            kappa_xi: -1.5,
            kappa_theta: 0.5,
        };
        // Interior curvature reaches the fit window by diffusion, so coarse
        // grids (wider windows) see a slower apparent decay.
        let fs = FlowState::new(&torus(3), bg, config(401)).unwrap();
        let opts = RunOptions {
            t_end: 0.2,
            samples: 4,
            courant: 0.2,
            keep_states: false,
        };
        let run = flow_run(&fs, opts).unwrap();
        let slope = run.log_mass_slope().unwrap();
        assert!((slope + 1.0).abs() < 0.05, "slope {slope}");
        assert!((run.m0 - run.fits[0].mass()).abs() < 1e-14);
    }

    #[test]
    fn csv_has_the_documented_columns() {
        let fs = FlowState::geon(&torus(3), config(101)).unwrap();
        let opts = RunOptions {
            t_end: 1e-4,
            samples: 1,
            courant: 0.2,
            keep_states: false,
        };
        let mut run = flow_run(&fs, opts).unwrap();
        let csv = run.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], FLOW_CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));
        run.samples.clear();
        assert_eq!(run.to_csv(), format!("{FLOW_CSV_HEADER}\n"));
    }

    #[test]
    fn bad_inputs() {
        let chart = torus(3);
        assert!(FlowState::geon(&chart, config(5)).is_err());
        let bad = FlowConfig {
            ell: 0.0,
            ..config(101)
        };
        assert!(FlowState::geon(&chart, bad).is_err());
        let sphere = RadialChart::sphere(3).unwrap();
        assert!(FlowState::geon(&sphere, config(101)).is_err());
        let too_large = Background::Perturbed {
            x_max: 4.0,
            kappa_xi: -1.5,
            kappa_theta: 0.5,
        };
        assert!(FlowState::new(&chart, too_large, config(101)).is_err());
        let fs = FlowState::geon(&chart, config(101)).unwrap();
        assert!(rdtf_step(&fs, -1.0).is_err());
        let opts = RunOptions {
            t_end: 0.1,
            samples: 0,
            courant: 0.2,
            keep_states: false,
        };
        assert!(flow_run(&fs, opts).is_err());
    }
}
