//! Finite-difference curvature of diagonal cohomogeneity-one metrics
//! `A(s) ds^2 + B(s) dxi^2 + C(s) sum dtheta_i^2` over a flat torus.

use rayon::prelude::*;

use super::chart::{CoordinateKind, RadialChart};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GridMetric {
    chart: RadialChart,
    coords: Vec<f64>,
    g_ss: Vec<f64>,
    g_xi: Vec<f64>,
    g_theta: Vec<f64>,
}

impl GridMetric {
    /// Physical components sampled at strictly increasing coordinates.
    pub fn new(
        chart: RadialChart,
        coords: Vec<f64>,
        g_ss: Vec<f64>,
        g_xi: Vec<f64>,
        g_theta: Vec<f64>,
    ) -> Result<Self> {
        if chart.k() != 0 {
            return Err(Error::InvalidParameter(
                "grid metrics are implemented for torus boundaries".into(),
            ));
        }
        let len = coords.len();
        if g_ss.len() != len || g_xi.len() != len || g_theta.len() != len {
            return Err(Error::InvalidParameter(
                "component arrays must match the grid length".into(),
            ));
        }
        if coords.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "grid points must be strictly increasing".into(),
            ));
        }
        let m = Self {
            chart,
            coords,
            g_ss,
            g_xi,
            g_theta,
        };
        if len > 2 {
            for i in 1..len - 1 {
                m.check_point(i)?;
            }
        }
        Ok(m)
    }

    fn check_point(&self, i: usize) -> Result<()> {
        for (name, v) in [
            ("g_ss", self.g_ss[i]),
            ("g_xixi", self.g_xi[i]),
            ("g_thetatheta", self.g_theta[i]),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositiveComponent {
                    component: name,
                    index: i,
                    value: v,
                });
            }
        }
        Ok(())
    }

    pub fn chart(&self) -> &RadialChart {
        &self.chart
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn g_ss(&self) -> &[f64] {
        &self.g_ss
    }

    pub fn g_xi(&self) -> &[f64] {
        &self.g_xi
    }

    pub fn g_theta(&self) -> &[f64] {
        &self.g_theta
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Samples `A, B, C` as functions of the coordinate.
    pub fn from_fn(
        chart: RadialChart,
        coords: Vec<f64>,
        f: impl Fn(f64) -> [f64; 3],
    ) -> Result<Self> {
        let vals: Vec<[f64; 3]> = coords.iter().map(|&s| f(s)).collect();
        Self::new(
            chart,
            coords,
            vals.iter().map(|v| v[0]).collect(),
            vals.iter().map(|v| v[1]).collect(),
            vals.iter().map(|v| v[2]).collect(),
        )
    }

    /// Hyperbolic model `dr^2/r^2 + r^2 (dxi^2 + sum dtheta^2)` on an `r` grid.
    pub fn hyperbolic(chart: RadialChart, radii: Vec<f64>) -> Result<Self> {
        Self::from_fn(
            chart.with_coordinate(CoordinateKind::Radius),
            radii,
            |r| [1.0 / (r * r), r * r, r * r],
        )
    }
}

/// Curvature in the orthonormal frame `(d_s/sqrt(A), d_xi/sqrt(B), d_theta/sqrt(C))`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCurvature {
    /// Coordinates of the points where curvature was evaluated.
    pub coords: Vec<f64>,
    /// Index into the metric grid of each evaluated point.
    pub indices: Vec<usize>,
    pub ricci_radial: Vec<f64>,
    pub ricci_xi: Vec<f64>,
    pub ricci_theta: Vec<f64>,
    pub scalar: Vec<f64>,
    /// `E = Ric + (n-1)` on the three frame directions.
    pub einstein: Vec<[f64; 3]>,
}

impl GridCurvature {
    pub fn max_abs_einstein(&self) -> f64 {
        self.einstein
            .iter()
            .flat_map(|e| e.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Finite-difference weights for derivatives `0..=max_deriv` at `z` from
/// arbitrary nodes, by Fornberg's recursion. Returns `w[d][j]`.
pub fn fornberg_weights(z: f64, nodes: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_deriv + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// First and second derivatives of `f` at point `i`: three centered nodes in
/// the interior, five one-sided nodes at the ends so the ends do not limit
/// the second-order accuracy.
pub fn derivatives_at(coords: &[f64], f: &[f64], i: usize) -> (f64, f64) {
    let len = coords.len();
    let range = if i == 0 {
        0..5
    } else if i == len - 1 {
        len - 5..len
    } else {
        i - 1..i + 2
    };
    let nodes = &coords[range.clone()];
    let w = fornberg_weights(coords[i], nodes, 2);
    let vals = &f[range];
    let d1 = w[1].iter().zip(vals).map(|(a, b)| a * b).sum();
    let d2 = w[2].iter().zip(vals).map(|(a, b)| a * b).sum();
    (d1, d2)
}

/// Second-order finite-difference curvature of a diagonal grid metric.
///
/// Endpoints where a component degenerates (a bolt, or a conformal boundary
/// where the physical metric blows up) are skipped; degenerate interior
/// points are an error.
pub fn curvature_grid(g: &GridMetric) -> Result<GridCurvature> {
    let len = g.len();
    if len < 5 {
        return Err(Error::InsufficientData(format!(
            "curvature needs at least 5 grid points, got {len}"
        )));
    }
    let ok = |i: usize| g.check_point(i).is_ok();
    let first = if ok(0) { 0 } else { 1 };
    let last = if ok(len - 1) { len - 1 } else { len - 2 };
    for i in first..=last {
        g.check_point(i)?;
    }
    let s = &g.coords[first..=last];
    if s.len() < 5 {
        return Err(Error::InsufficientData(
            "fewer than 5 nondegenerate grid points".into(),
        ));
    }
    let log_half = |v: &[f64]| -> Vec<f64> { v[first..=last].iter().map(|x| 0.5 * x.ln()).collect() };
    let alpha = log_half(&g.g_ss);
    let beta_xi = log_half(&g.g_xi);
    let beta_th = log_half(&g.g_theta);
    let n = g.chart.n();
    let m_th = (n - 2) as f64;
    let nm1 = (n - 1) as f64;

    let rows: Vec<[f64; 4]> = (0..s.len())
        .into_par_iter()
        .map(|i| {
            let (a1, _) = derivatives_at(s, &alpha, i);
            let (bx1, bx2) = derivatives_at(s, &beta_xi, i);
            let (bt1, bt2) = derivatives_at(s, &beta_th, i);
            let inv_a = (-2.0 * alpha[i]).exp();
            let trace = bx1 + m_th * bt1;
            let ric_r = -inv_a * ((bx2 - a1 * bx1 + bx1 * bx1) + m_th * (bt2 - a1 * bt1 + bt1 * bt1));
            let ric_x = -inv_a * (bx2 - a1 * bx1 + bx1 * trace);
            let ric_t = -inv_a * (bt2 - a1 * bt1 + bt1 * trace);
            [ric_r, ric_x, ric_t, ric_r + ric_x + m_th * ric_t]
        })
        .collect();
    Ok(GridCurvature {
        coords: s.to_vec(),
        indices: (first..=last).collect(),
        ricci_radial: rows.iter().map(|r| r[0]).collect(),
        ricci_xi: rows.iter().map(|r| r[1]).collect(),
        ricci_theta: rows.iter().map(|r| r[2]).collect(),
        scalar: rows.iter().map(|r| r[3]).collect(),
        einstein: rows.iter().map(|r| [r[0] + nm1, r[1] + nm1, r[2] + nm1]).collect(),
    })
}
