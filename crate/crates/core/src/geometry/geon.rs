//! The Horowitz-Myers geon
//! `dr^2 / (r^2 f) + r^2 (f dxi^2 + sum dtheta_i^2)`, `f = 1 - r^-n`,
//! on grids, as a boundary series, and in closed form in the special
//! defining function.
//!
//! With `x` defined by `dx/x = -dr/(r sqrt f)` and `x r -> 1`, one finds
//! `r = (1 + z)^(2/n) / x` with `z = x^n / 4`, so the compactified metric is
//! `dx^2 + (1+z)^(4/n-2) (1-z)^2 dxi^2 + (1+z)^(4/n) sum dtheta^2` and the
//! bolt sits at `z = 1`, i.e. `x = 2^(2/n)`.

use num_traits::One;

use super::chart::{CoordinateKind, RadialChart};
use super::grid::GridMetric;
use super::series_metric::{ConformalWeight, SeriesMatrix, SeriesMetric, EXACT_ORDER};
use crate::error::{Error, Result};
use crate::scalar::{rat, Rational};
use crate::series::{ExactSeries, LaurentSeries};

/// Uniform radius grid on `[r_min, r_max]`; `r_min = 1` puts a point on the bolt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeonGridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

impl GeonGridSpec {
    pub fn radii(&self) -> Vec<f64> {
        let h = (self.r_max - self.r_min) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.r_min + h * i as f64).collect()
    }
}

/// Samples the geon on a radius grid. The chart fixes `n` and the periods.
pub fn build_geon(chart: &RadialChart, spec: GeonGridSpec) -> Result<GridMetric> {
    if chart.k() != 0 {
        return Err(Error::InvalidParameter("the geon has a torus boundary".into()));
    }
    if spec.points < 2 || !(spec.r_min >= 1.0) || !(spec.r_max > spec.r_min) {
        return Err(Error::InvalidParameter(format!(
            "geon grid needs 1 <= r_min < r_max and at least 2 points, got {spec:?}"
        )));
    }
    build_geon_on(chart, spec.radii())
}

/// Samples the geon at arbitrary strictly increasing radii `>= 1`.
pub fn build_geon_on(chart: &RadialChart, radii: Vec<f64>) -> Result<GridMetric> {
    if chart.k() != 0 {
        return Err(Error::InvalidParameter("the geon has a torus boundary".into()));
    }
    if radii.first().map_or(true, |&r| !(r >= 1.0)) {
        return Err(Error::InvalidParameter("geon radii must start at r >= 1".into()));
    }
    let n = chart.n() as i32;
    GridMetric::from_fn(
        chart.clone().with_coordinate(CoordinateKind::Radius),
        radii,
        |r| {
            let f = 1.0 - r.powi(-n);
            [1.0 / (r * r * f), r * r * f, r * r]
        },
    )
}

/// Closed-form compactified geon in the special defining function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeonProfile {
    pub n: usize,
}

impl GeonProfile {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("geon needs n >= 3, got {n}")));
        }
        Ok(Self { n })
    }

    /// Defining-function value of the bolt, `2^(2/n)`.
    pub fn x_bolt(&self) -> f64 {
        2f64.powf(2.0 / self.n as f64)
    }

    fn z(&self, x: f64) -> f64 {
        0.25 * x.powi(self.n as i32)
    }

    pub fn radius(&self, x: f64) -> f64 {
        (1.0 + self.z(x)).powf(2.0 / self.n as f64) / x
    }

    /// `ghat_xixi(x)`.
    pub fn g_xi(&self, x: f64) -> f64 {
        let z = self.z(x);
        let p = 4.0 / self.n as f64;
        (1.0 + z).powf(p - 2.0) * (1.0 - z) * (1.0 - z)
    }

    /// `ghat_thetatheta(x)`.
    pub fn g_theta(&self, x: f64) -> f64 {
        (1.0 + self.z(x)).powf(4.0 / self.n as f64)
    }

    /// `(ln g, d/dx ln g, d^2/dx^2 ln g)` for the xi and theta components.
    /// The xi logarithm diverges at the bolt.
    pub fn log_components(&self, x: f64) -> [[f64; 3]; 2] {
        let n = self.n as f64;
        let z = self.z(x);
        let z1 = 0.25 * n * x.powi(self.n as i32 - 1);
        let z2 = 0.25 * n * (n - 1.0) * x.powi(self.n as i32 - 2);
        let lp = [
            z.ln_1p(),
            z1 / (1.0 + z),
            (z2 * (1.0 + z) - z1 * z1) / ((1.0 + z) * (1.0 + z)),
        ];
        let lm = [
            if z < 1.0 { (-z).ln_1p() } else { (z - 1.0).ln() },
            -z1 / (1.0 - z),
            -(z2 * (1.0 - z) + z1 * z1) / ((1.0 - z) * (1.0 - z)),
        ];
        let p = 4.0 / n;
        let xi = [0, 1, 2].map(|d| (p - 2.0) * lp[d] + 2.0 * lm[d]);
        let th = [0, 1, 2].map(|d| p * lp[d]);
        [xi, th]
    }
}

/// `r(x)` for the geon, from the defining-function equation
/// `dx/x = -dr/(r sqrt(1 - r^-n))` with `x r -> 1`, known through `x^order`.
pub fn geon_radius_series(n: usize, order: i32) -> Result<ExactSeries> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("geon needs n >= 3, got {n}")));
    }
    // With u = 1/r: ln x = ln u + F(u), F(u) = int_0^u ((1 - s^n)^(-1/2) - 1) ds / s.
    let big = order + 2;
    let one_minus = LaurentSeries::from_terms(&[(0, rat(1, 1)), (n as i32, rat(-1, 1))], big);
    let integrand = one_minus
        .pow_ratio(&rat(-1, 2))?
        .sub(&LaurentSeries::one(EXACT_ORDER))
        .shift(-1);
    let f = integrand.integrate()?;
    let x_of_u = f.exp()?.shift(1);
    let u_of_x = x_of_u.compositional_inverse()?;
    u_of_x.reciprocal()
}

/// Compactified geon metric near the conformal boundary, through `x^order`.
pub fn build_geon_series(chart: &RadialChart, order: i32) -> Result<SeriesMetric<Rational>> {
    if chart.k() != 0 {
        return Err(Error::InvalidParameter("the geon has a torus boundary".into()));
    }
    let n = chart.n();
    let r = geon_radius_series(n, order + 1)?;
    let xr = r.shift(1);
    let g_theta = xr.mul(&xr).truncate(order);
    let u = r.reciprocal()?;
    let f = LaurentSeries::one(EXACT_ORDER).sub(&u.powi(n as i32)?);
    let g_xi = g_theta.mul(&f).truncate(order);
    let comps = SeriesMatrix::symmetric_from_fn(n, |i, j| match (i, j) {
        (0, 0) => LaurentSeries::one(EXACT_ORDER),
        (1, 1) => g_xi.clone(),
        (a, b) if a == b => g_theta.clone(),
        _ => LaurentSeries::zero(EXACT_ORDER),
    });
    SeriesMetric::new(chart.clone(), comps, ConformalWeight::Compactified)
}

/// `(1 + x^n / 4)^p` as an exact series.
fn one_plus_z_pow(n: usize, p: &Rational, order: i32) -> Result<ExactSeries> {
    LaurentSeries::from_terms(&[(0, Rational::one()), (n as i32, rat(1, 4))], order).pow_ratio(p)
}

/// The closed form of the compactified theta component as a series, an
/// independent check on [`build_geon_series`].
pub fn geon_theta_closed_form(n: usize, order: i32) -> Result<ExactSeries> {
    one_plus_z_pow(n, &rat(4, n as i64), order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::grid::curvature_grid;
    use crate::scalar::PiRational;

    #[test]
    fn radius_series_leading_terms() {
        for n in 3..=6 {
            let r = geon_radius_series(n, n as i32 + 2).unwrap();
            assert_eq!(r.coeff(-1).unwrap(), rat(1, 1));
            for e in 0..n as i32 - 1 {
                assert_eq!(r.coeff(e).unwrap(), rat(0, 1), "n={n} e={e}");
            }
            assert_eq!(r.coeff(n as i32 - 1).unwrap(), rat(1, 2 * n as i64));
        }
    }

    #[test]
    fn radius_series_solves_the_defining_equation() {
        for n in 3..=5 {
            let order = 2 * n as i32 + 2;
            let r = geon_radius_series(n, order).unwrap();
            let u = r.reciprocal().unwrap();
            let f = LaurentSeries::one(EXACT_ORDER).sub(&u.powi(n as i32).unwrap());
            let sqrt_f = f.pow_ratio(&rat(1, 2)).unwrap();
            // 1/x + r'/(r sqrt f) must vanish.
            let lhs = LaurentSeries::monomial(rat(1, 1), -1, EXACT_ORDER)
                .add(&r.derivative().div(&r.mul(&sqrt_f)).unwrap());
            assert!(lhs.is_known_zero(), "n={n}: {lhs}");
            assert!(lhs.order() >= n as i32);
        }
    }

    #[test]
    fn series_matches_closed_form() {
        for n in 3..=5 {
            let order = 3 * n as i32;
            let chart = RadialChart::unit_torus(n).unwrap();
            let g = build_geon_series(&chart, order).unwrap();
            let th = geon_theta_closed_form(n, order).unwrap();
            assert!(g.get(2, 2).sub(&th).is_known_zero());
            let xi = one_plus_z_pow(n, &(rat(4, n as i64) - rat(2, 1)), order)
                .unwrap()
                .mul(
                    &LaurentSeries::from_terms(&[(0, rat(1, 1)), (n as i32, rat(-1, 4))], order)
                        .powi(2)
                        .unwrap(),
                );
            assert!(g.get(1, 1).sub(&xi).is_known_zero());
            assert_eq!(g.get(1, 1).coeff(n as i32).unwrap(), rat(1 - n as i64, n as i64));
            assert_eq!(g.get(2, 2).coeff(n as i32).unwrap(), rat(1, n as i64));
        }
    }

    #[test]
    fn closed_form_profile_is_consistent() {
        for n in 3..=5 {
            let p = GeonProfile::new(n).unwrap();
            let xb = p.x_bolt();
            assert!(p.g_xi(xb).abs() < 1e-14);
            assert!((p.radius(xb) - 1.0).abs() < 1e-14);
            for &x in &[0.1, 0.5, 0.9 * xb] {
                let r = p.radius(x);
                let f = 1.0 - r.powi(-(n as i32));
                assert!((p.g_xi(x) - x * x * r * r * f).abs() < 1e-12);
                assert!((p.g_theta(x) - x * x * r * r).abs() < 1e-12);
                let [xi, th] = p.log_components(x);
                let h = 1e-5;
                let d = |g: &dyn Fn(f64) -> f64| (g(x + h) - g(x - h)) / (2.0 * h);
                assert!((xi[1] - d(&|y| p.g_xi(y).ln())).abs() < 1e-6);
                assert!((th[1] - d(&|y| p.g_theta(y).ln())).abs() < 1e-6);
                let dd = (p.g_theta(x + h).ln() - 2.0 * th[0] + p.g_theta(x - h).ln()) / (h * h);
                assert!((th[2] - dd).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn bolt_and_theta_components_on_grid() {
        let chart = RadialChart::torus(3, vec![PiRational::new(rat(2, 1), 1)]).unwrap();
        let g = build_geon(&chart, GeonGridSpec { r_min: 1.0, r_max: 4.0, points: 31 }).unwrap();
        assert_eq!(g.g_xi()[0], 0.0);
        for (r, c) in g.coords().iter().zip(g.g_theta()) {
            assert_eq!(*c, r * r);
        }
    }

    fn geon_scalar_error(n: usize, points: usize) -> f64 {
        let chart = RadialChart::unit_torus(n).unwrap();
        let spec = GeonGridSpec { r_min: 1.0, r_max: 4.0, points };
        let curv = curvature_grid(&build_geon(&chart, spec).unwrap()).unwrap();
        let target = -((n * (n - 1)) as f64);
        curv.coords
            .iter()
            .zip(&curv.scalar)
            .filter(|(r, _)| **r >= 1.5 && **r <= 3.5)
            .map(|(_, s)| (s - target).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn geon_scalar_curvature_converges() {
        for n in [3, 4] {
            let (e1, e2) = (geon_scalar_error(n, 121), geon_scalar_error(n, 241));
            assert!(e1 < 5e-2, "n={n} {e1}");
            let ratio = e1 / e2;
            assert!((ratio - 4.0).abs() < 0.5, "n={n} ratio {ratio}");
        }
    }
}
