//! Exact curvature of boundary-coordinate-independent metrics given as
//! truncated series in the defining function `x`.
//!
//! Component index 0 is `x`; indices `1..n` are boundary directions in which
//! `g_(k)` is the identity. All boundary derivatives vanish, so curvature is
//! univariate series calculus. For a round boundary the fiber Ricci term
//! `(n-2) g_(k)` is inserted by hand, which is exact for warped products
//! `a(x) dx^2 + b(x) g_(k)`; the engine therefore refuses non-symmetric
//! metrics on a sphere chart.

use num_traits::{One, Zero};

use super::chart::RadialChart;
use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};
use crate::series::LaurentSeries;
use crate::tensor::KappaTensor;

/// Truncation order used for quantities that are exact polynomials.
///
/// Series store every coefficient up to their order, so this is a finite
/// bound chosen well above any order the identity checks need.
pub const EXACT_ORDER: i32 = 48;

fn exact_zero<S: Scalar>() -> LaurentSeries<S> {
    LaurentSeries::zero(EXACT_ORDER)
}

fn exact_const<S: Scalar>(c: S) -> LaurentSeries<S> {
    LaurentSeries::constant(c, EXACT_ORDER)
}

/// Sum of series; an empty sum is an exact zero.
fn sum<S: Scalar>(terms: impl IntoIterator<Item = LaurentSeries<S>>) -> LaurentSeries<S> {
    terms
        .into_iter()
        .reduce(|a, b| a.add(&b))
        .unwrap_or_else(exact_zero)
}

/// Dense `n x n` matrix of series.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesMatrix<S: Scalar> {
    n: usize,
    data: Vec<LaurentSeries<S>>,
}

impl<S: Scalar> SeriesMatrix<S> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> LaurentSeries<S>) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// Symmetric matrix; `f` is only called for `i <= j`.
    pub fn symmetric_from_fn(
        n: usize,
        mut f: impl FnMut(usize, usize) -> LaurentSeries<S>,
    ) -> Self {
        let mut m = Self::from_fn(n, |_, _| exact_zero());
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[j * n + i] = v.clone();
                m.data[i * n + j] = v;
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| {
            if i == j {
                exact_const(S::one())
            } else {
                exact_zero()
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &LaurentSeries<S> {
        &self.data[i * self.n + j]
    }

    pub fn map(&self, f: impl Fn(&LaurentSeries<S>) -> LaurentSeries<S>) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Entrywise difference.
    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(i, j).sub(other.get(i, j)))
    }

    /// Smallest truncation order over all entries.
    pub fn order(&self) -> i32 {
        self.data.iter().map(|s| s.order()).min().unwrap_or(EXACT_ORDER)
    }

    /// Inverse by Gauss-Jordan elimination along the diagonal.
    ///
    /// Fails when a leading principal minor is not invertible as a series.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut a: Vec<Vec<LaurentSeries<S>>> = (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j).clone()).collect())
            .collect();
        let mut inv: Vec<Vec<LaurentSeries<S>>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            exact_const(S::one())
                        } else {
                            exact_zero()
                        }
                    })
                    .collect()
            })
            .collect();
        for c in 0..n {
            let pivot = a[c][c].normalized();
            if pivot.valuation().is_none() {
                return Err(Error::DegenerateMetric(format!(
                    "pivot {c} has no known nonzero coefficient"
                )));
            }
            let p_inv = pivot.reciprocal()?;
            for j in 0..n {
                a[c][j] = a[c][j].mul(&p_inv);
                inv[c][j] = inv[c][j].mul(&p_inv);
            }
            for r in 0..n {
                if r == c || a[r][c].is_known_zero() {
                    continue;
                }
                let f = a[r][c].clone();
                for j in 0..n {
                    a[r][j] = a[r][j].sub(&f.mul(&a[c][j]));
                    inv[r][j] = inv[r][j].sub(&f.mul(&inv[c][j]));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| inv[i][j].clone()))
    }
}

/// Whether a series metric carries the `1/rho^2` factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConformalWeight {
    /// The asymptotically hyperbolic metric `g`.
    Physical,
    /// The compactified metric `rho^2 g`.
    Compactified,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesMetric<S: Scalar> {
    chart: RadialChart,
    components: SeriesMatrix<S>,
    weight: ConformalWeight,
}

impl<S: Scalar> SeriesMetric<S> {
    pub fn new(
        chart: RadialChart,
        components: SeriesMatrix<S>,
        weight: ConformalWeight,
    ) -> Result<Self> {
        if components.dim() != chart.n() {
            return Err(Error::InvalidParameter(format!(
                "metric has {} components per row, chart dimension is {}",
                components.dim(),
                chart.n()
            )));
        }
        if !components.is_symmetric() {
            return Err(Error::InvalidParameter("metric is not symmetric".into()));
        }
        Ok(Self {
            chart,
            components,
            weight,
        })
    }

    pub fn chart(&self) -> &RadialChart {
        &self.chart
    }

    pub fn n(&self) -> usize {
        self.chart.n()
    }

    pub fn weight(&self) -> ConformalWeight {
        self.weight
    }

    pub fn components(&self) -> &SeriesMatrix<S> {
        &self.components
    }

    pub fn get(&self, i: usize, j: usize) -> &LaurentSeries<S> {
        self.components.get(i, j)
    }

    /// `g = rho^-2 g~` from a compactified metric; the identity on physical ones.
    pub fn physical(&self) -> Result<Self> {
        match self.weight {
            ConformalWeight::Physical => Ok(self.clone()),
            ConformalWeight::Compactified => {
                let w = rho_inv_sq_series::<S>(self.chart.k(), self.components.order())?;
                Ok(Self {
                    chart: self.chart.clone(),
                    components: self.components.map(|c| w.mul(c)),
                    weight: ConformalWeight::Physical,
                })
            }
        }
    }

    /// Components keep the form `a(x) dx^2 + b(x) g_(k)`.
    pub fn is_warped_product(&self) -> bool {
        let n = self.n();
        (1..n).all(|a| self.get(0, a).is_known_zero())
            && (1..n).all(|a| {
                (1..n).all(|b| {
                    if a == b {
                        self.get(a, a) == self.get(1, 1)
                    } else {
                        self.get(a, b).is_known_zero()
                    }
                })
            })
    }
}

/// The defining function `rho_(k)`: `x` for a flat boundary, `sinh x` for a round one.
pub fn rho_series<S: Scalar>(k: u8, order: i32) -> LaurentSeries<S> {
    match k {
        0 => LaurentSeries::monomial(S::one(), 1, EXACT_ORDER),
        _ => LaurentSeries::sinh(order),
    }
}

/// `rho_(k)^-2` known through `x^(order - 2)`.
pub fn rho_inv_sq_series<S: Scalar>(k: u8, order: i32) -> Result<LaurentSeries<S>> {
    match k {
        0 => Ok(LaurentSeries::monomial(S::one(), -2, EXACT_ORDER)),
        _ => {
            let s = LaurentSeries::<S>::sinh(order + 1);
            s.mul(&s).reciprocal()
        }
    }
}

/// Christoffel symbols, Ricci tensor, scalar curvature and Einstein quantity
/// `E_ij = R_ij + (n-1) g_ij` of a series metric.
#[derive(Clone, Debug)]
pub struct SeriesCurvature<S: Scalar> {
    n: usize,
    pub inverse: SeriesMatrix<S>,
    christoffel: Vec<LaurentSeries<S>>,
    pub ricci: SeriesMatrix<S>,
    pub scalar: LaurentSeries<S>,
    pub einstein: SeriesMatrix<S>,
}

impl<S: Scalar> SeriesCurvature<S> {
    /// `Gamma^k_ij`.
    pub fn christoffel(&self, k: usize, i: usize, j: usize) -> &LaurentSeries<S> {
        &self.christoffel[(k * self.n + i) * self.n + j]
    }

    /// `R^i_jkl`, with `R(X, Y) Z = [nabla_X, nabla_Y] Z - nabla_[X,Y] Z` and
    /// `R^i_jkl X^k Y^l Z^j` its components. The fiber curvature of a round
    /// boundary is not included.
    pub fn riemann(&self, i: usize, j: usize, k: usize, l: usize) -> LaurentSeries<S> {
        let n = self.n;
        let mut terms = Vec::new();
        if k == 0 {
            terms.push(self.christoffel(i, l, j).derivative());
        }
        if l == 0 {
            terms.push(self.christoffel(i, k, j).derivative().neg());
        }
        for m in 0..n {
            let a = self.christoffel(i, k, m);
            let b = self.christoffel(m, l, j);
            if !a.is_known_zero() && !b.is_known_zero() {
                terms.push(a.mul(b));
            }
            let c = self.christoffel(i, l, m);
            let d = self.christoffel(m, k, j);
            if !c.is_known_zero() && !d.is_known_zero() {
                terms.push(c.mul(d).neg());
            }
        }
        sum(terms)
    }
}

/// Direct Christoffel/Ricci assembly from the metric series.
pub fn curvature_series<S: Scalar>(g: &SeriesMetric<S>) -> Result<SeriesCurvature<S>> {
    let n = g.n();
    if g.chart.k() == 1 && !g.is_warped_product() {
        return Err(Error::InvalidParameter(
            "round-boundary curvature is limited to rotationally symmetric metrics".into(),
        ));
    }
    let inverse = g.components.inverse()?;
    let dg = g.components.map(|c| c.derivative());

    // Lowered symbols Gamma_lij = (d_i g_lj + d_j g_li - d_l g_ij) / 2; only
    // d_0 survives.
    let half = S::from_ratio(1, 2);
    let lowered = |l: usize, i: usize, j: usize| -> LaurentSeries<S> {
        let mut terms = Vec::new();
        if i == 0 {
            terms.push(dg.get(l, j).clone());
        }
        if j == 0 {
            terms.push(dg.get(l, i).clone());
        }
        if l == 0 {
            terms.push(dg.get(i, j).neg());
        }
        sum(terms).scale(&half)
    };
    let mut low = vec![exact_zero::<S>(); n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in i..n {
                let v = lowered(l, i, j);
                low[(l * n + j) * n + i] = v.clone();
                low[(l * n + i) * n + j] = v;
            }
        }
    }
    let mut christoffel = vec![exact_zero::<S>(); n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let v = sum((0..n).filter_map(|l| {
                    let a = inverse.get(k, l);
                    let b = &low[(l * n + i) * n + j];
                    (!a.is_known_zero() && !b.is_known_zero()).then(|| a.mul(b))
                }));
                christoffel[(k * n + j) * n + i] = v.clone();
                christoffel[(k * n + i) * n + j] = v;
            }
        }
    }
    let mut curv = SeriesCurvature {
        n,
        inverse,
        christoffel,
        ricci: SeriesMatrix::identity(n),
        scalar: exact_zero(),
        einstein: SeriesMatrix::identity(n),
    };

    // R_ij = d_k G^k_ij - d_j G^k_ik + G^k_kl G^l_ij - G^k_jl G^l_ik.
    let fiber = S::from_int(g.chart.boundary_ricci_factor());
    let ricci = SeriesMatrix::symmetric_from_fn(n, |i, j| {
        let mut terms = vec![curv.christoffel(0, i, j).derivative()];
        if j == 0 {
            terms.push(
                sum((0..n).map(|k| curv.christoffel(k, i, k).clone()))
                    .derivative()
                    .neg(),
            );
        }
        for k in 0..n {
            for l in 0..n {
                let a = curv.christoffel(k, k, l);
                let b = curv.christoffel(l, i, j);
                if !a.is_known_zero() && !b.is_known_zero() {
                    terms.push(a.mul(b));
                }
                let c = curv.christoffel(k, j, l);
                let d = curv.christoffel(l, i, k);
                if !c.is_known_zero() && !d.is_known_zero() {
                    terms.push(c.mul(d).neg());
                }
            }
        }
        if i == j && i > 0 && !fiber.is_zero() {
            terms.push(exact_const(fiber.clone()));
        }
        sum(terms)
    });
    let scalar = sum((0..n).flat_map(|i| {
        let inv = &curv.inverse;
        let ricci = &ricci;
        (0..n).filter_map(move |j| {
            let a = inv.get(i, j);
            (!a.is_known_zero()).then(|| a.mul(ricci.get(i, j)))
        })
    }));
    let nm1 = S::from_int(n as i64 - 1);
    curv.einstein = SeriesMatrix::symmetric_from_fn(n, |i, j| {
        ricci.get(i, j).add(&g.get(i, j).scale(&nm1))
    });
    curv.ricci = ricci;
    curv.scalar = scalar;
    Ok(curv)
}

/// Ricci tensor of `g = rho^-2 g~` assembled from the curvature of `g~` and
/// the Hessian, Laplacian and gradient norm of `rho` with respect to `g~`.
pub fn conformal_ricci<S: Scalar>(
    g_tilde: &SeriesMetric<S>,
    rho: &LaurentSeries<S>,
) -> Result<SeriesMatrix<S>> {
    if g_tilde.weight != ConformalWeight::Compactified {
        return Err(Error::InvalidParameter(
            "conformal_ricci expects a compactified metric".into(),
        ));
    }
    let rho_n = rho.normalized();
    if rho_n.valuation() != Some(1) || !rho_n.coeff(1)?.is_one() {
        return Err(Error::InvalidParameter(
            "rho must vanish simply at x = 0 with unit slope".into(),
        ));
    }
    let order = g_tilde.components.order();
    if rho.order() - 1 < order {
        return Err(Error::InvalidParameter(format!(
            "inconsistent truncation orders: rho known through x^{}, metric through x^{order}",
            rho.order()
        )));
    }
    let n = g_tilde.n();
    let curv = curvature_series(g_tilde)?;
    let d1 = rho.derivative();
    let d2 = d1.derivative();
    let hess = SeriesMatrix::symmetric_from_fn(n, |i, j| {
        let mut h = curv.christoffel(0, i, j).mul(&d1).neg();
        if i == 0 && j == 0 {
            h = h.add(&d2);
        }
        h
    });
    let lap = sum((0..n).flat_map(|i| {
        let inv = &curv.inverse;
        let hess = &hess;
        (0..n).filter_map(move |j| {
            let a = inv.get(i, j);
            (!a.is_known_zero()).then(|| a.mul(hess.get(i, j)))
        })
    }));
    let grad_sq = curv.inverse.get(0, 0).mul(&d1).mul(&d1);
    let rho_inv = rho.reciprocal()?;
    let nm1 = S::from_int(n as i64 - 1);
    let nm2 = S::from_int(n as i64 - 2);
    let grad_term = grad_sq.mul(&rho_inv).mul(&rho_inv).scale(&nm1);
    Ok(SeriesMatrix::symmetric_from_fn(n, |i, j| {
        let gt = g_tilde.get(i, j);
        let bracket = hess.get(i, j).scale(&nm2).add(&gt.mul(&lap));
        curv.ricci
            .get(i, j)
            .add(&rho_inv.mul(&bracket))
            .sub(&gt.mul(&grad_term))
    }))
}

fn check_kappa<S: Scalar>(chart: &RadialChart, kappa: &KappaTensor<S>) -> Result<()> {
    if kappa.dim() != chart.n() {
        return Err(Error::InvalidParameter(format!(
            "kappa is {0}x{0} but the chart has dimension {1}",
            kappa.dim(),
            chart.n()
        )));
    }
    if chart.k() == 1 && !kappa.is_rotationally_symmetric() {
        return Err(Error::InvalidParameter(
            "round-boundary data must satisfy kappa_AB = phi g_AB and kappa_1A = 0".into(),
        ));
    }
    Ok(())
}

/// Compactified metric `dx^2 + g_(k) + x^m kappa / m` with an exactly zero
/// tail, truncated at `x^order`.
pub fn build_expansion_metric<S: Scalar>(
    chart: &RadialChart,
    kappa: &KappaTensor<S>,
    m: usize,
    order: i32,
) -> Result<SeriesMetric<S>> {
    check_kappa(chart, kappa)?;
    if order > EXACT_ORDER - 8 {
        return Err(Error::InvalidParameter(format!(
            "truncation order {order} exceeds the supported maximum {}",
            EXACT_ORDER - 8
        )));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("expansion order m must be positive".into()));
    }
    let inv_m = S::from_ratio(1, m as i64);
    let comps = SeriesMatrix::symmetric_from_fn(chart.n(), |i, j| {
        let mut terms = vec![(m as i32, kappa.get(i, j).mul_ref(&inv_m))];
        if i == j {
            terms.push((0, S::one()));
        }
        LaurentSeries::from_terms(&terms, order)
    });
    SeriesMetric::new(chart.clone(), comps, ConformalWeight::Compactified)
}

/// The physical metric `rho_(k)^-2 [dx^2 + g_(k) + x^n kappa / n]` truncated at
/// `x^order` inside the bracket.
pub fn build_perturbed<S: Scalar>(
    chart: &RadialChart,
    kappa: &KappaTensor<S>,
    order: i32,
) -> Result<SeriesMetric<S>> {
    let n = chart.n();
    if order < n as i32 {
        return Err(Error::InvalidParameter(format!(
            "truncation order {order} is below the expansion order {n}"
        )));
    }
    build_expansion_metric(chart, kappa, n, order)?.physical()
}

/// One coefficient identity: the engine value against the closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityResidual<S> {
    pub label: String,
    pub exponent: i32,
    pub engine: S,
    pub formula: S,
    pub residual: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionReport<S> {
    pub n: usize,
    pub m: usize,
    pub k: u8,
    pub entries: Vec<IdentityResidual<S>>,
}

impl<S: Scalar> ExpansionReport<S> {
    pub fn all_zero(&self) -> bool {
        self.entries.iter().all(|e| e.residual.is_zero())
    }
}

/// Closed-form `x^(m-2)` coefficients of the Einstein quantity for the
/// expansion metric with `g_(k)` the identity.
fn einstein_closed_form(n: usize, m: usize, kappa: &KappaTensor<Rational>, i: usize, j: usize) -> Rational {
    let q = |a: i64, b: i64| Rational::new(a.into(), b.into());
    let (n_, m_) = (n as i64, m as i64);
    let tr = kappa.boundary_trace();
    let k11 = kappa.radial().clone();
    match (i, j) {
        (0, 0) => q(-(m_ - 2), 2) * (q(n_ - 1, m_) * &k11 + &tr),
        (0, _) => Rational::zero(),
        (a, b) => {
            let mut v = q(n_ - m_ - 1, 2) * kappa.get(a, b);
            if a == b {
                v += q(1, 2) * ((q(2 * n_ - 2, m_) - Rational::one()) * &k11 + &tr);
            }
            v
        }
    }
}

fn component_label(i: usize, j: usize) -> String {
    let name = |c: usize| if c == 0 { "1".to_string() } else { format!("y{c}") };
    format!("E[{},{}]", name(i), name(j))
}

/// Compares the `x^(m-2)` coefficient of every independent component of
/// `E_ij` with its closed form, in exact arithmetic.
pub fn expansion_coefficient_check(
    chart: &RadialChart,
    m: usize,
    kappa: &KappaTensor<Rational>,
) -> Result<ExpansionReport<Rational>> {
    let n = chart.n();
    if m < 1 || m > n {
        return Err(Error::InvalidParameter(format!(
            "expansion order m = {m} outside 1..={n}"
        )));
    }
    // The tail is exactly zero, so truncating right after the perturbation
    // keeps every coefficient through x^(m-2) of the curvature.
    let g = build_expansion_metric(chart, kappa, m, m as i32)?.physical()?;
    let curv = curvature_series(&g)?;
    let e = m as i32 - 2;
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i..n {
            let engine = curv.einstein.get(i, j).coeff(e)?;
            let formula = einstein_closed_form(n, m, kappa, i, j);
            entries.push(IdentityResidual {
                label: component_label(i, j),
                exponent: e,
                residual: &engine - &formula,
                engine,
                formula,
            });
        }
    }
    Ok(ExpansionReport {
        n,
        m,
        k: chart.k(),
        entries,
    })
}

/// Residual series of the Riccati, Gauss and Codazzi relations for the
/// compactified expansion metric.
#[derive(Clone, Debug)]
pub struct GaussCodazziReport<S: Scalar> {
    pub m: usize,
    /// `d_x K_AB - K_AC K^C_B + R~^1_A1B`.
    pub riccati: Vec<((usize, usize), LaurentSeries<S>)>,
    /// `R~_11 - (R~ - R^ + K^2 - K_AB K^AB) / 2`.
    pub gauss_radial: LaurentSeries<S>,
    /// `R~_1A`; the Codazzi right side vanishes for homogeneous data.
    pub codazzi: Vec<(usize, LaurentSeries<S>)>,
    /// `R~_AB - (R^_AB + R~^1_A1B + K_AC K^C_B - K_AB K)`.
    pub gauss_tangential: Vec<((usize, usize), LaurentSeries<S>)>,
    /// The radial relation with the factor `1/2` omitted, kept to document
    /// which normalization the engine confirms.
    pub gauss_radial_unhalved: LaurentSeries<S>,
}

/// Lowest exponent at which a residual is known to be nonzero, or `None` if
/// every known coefficient vanishes.
pub fn first_nonzero<S: Scalar>(s: &LaurentSeries<S>) -> Option<i32> {
    s.valuation()
}

impl<S: Scalar> GaussCodazziReport<S> {
    /// True when every residual vanishes below `x^bound`.
    pub fn vanish_below(&self, bound: i32) -> bool {
        let ok = |s: &LaurentSeries<S>| s.valuation().map_or(true, |v| v >= bound);
        self.riccati.iter().all(|(_, s)| ok(s))
            && ok(&self.gauss_radial)
            && self.codazzi.iter().all(|(_, s)| ok(s))
            && self.gauss_tangential.iter().all(|(_, s)| ok(s))
    }
}

/// Evaluates the hypersurface relations on `g~ = dx^2 + g_(k) + x^m kappa / m`
/// with the engine's Ricci and Riemann components.
pub fn gauss_codazzi_check<S: Scalar>(
    chart: &RadialChart,
    kappa: &KappaTensor<S>,
    m: usize,
    order: i32,
) -> Result<GaussCodazziReport<S>> {
    let n = chart.n();
    let gt = build_expansion_metric(chart, kappa, m, order)?;
    let curv = curvature_series(&gt)?;
    let nb = n - 1;
    // Induced metric, its inverse and K_AB = d_x g^_AB / 2.
    let ghat = SeriesMatrix::from_fn(nb, |a, b| gt.get(a + 1, b + 1).clone());
    let ghat_inv = ghat.inverse()?;
    let half = S::from_ratio(1, 2);
    let kk = ghat.map(|c| c.derivative().scale(&half));
    let k_mixed = SeriesMatrix::from_fn(nb, |c, b| {
        sum((0..nb).map(|d| ghat_inv.get(c, d).mul(kk.get(d, b))))
    });
    let k_trace = sum((0..nb).map(|a| k_mixed.get(a, a).clone()));
    let k_sq = sum((0..nb).flat_map(|a| {
        let k_mixed = &k_mixed;
        (0..nb).map(move |b| k_mixed.get(a, b).mul(k_mixed.get(b, a)))
    }));
    let kkk = |a: usize, b: usize| sum((0..nb).map(|c| kk.get(a, c).mul(k_mixed.get(c, b))));
    // Intrinsic curvature of g^: zero on the torus, scale invariant on the
    // sphere where g^ is a multiple of g_(k).
    let fiber = S::from_int(chart.boundary_ricci_factor());
    let rhat = |a: usize, b: usize| {
        if a == b {
            exact_const(fiber.clone())
        } else {
            exact_zero()
        }
    };
    let rhat_scalar = sum((0..nb).map(|a| ghat_inv.get(a, a).scale(&fiber)));

    let mut riccati = Vec::new();
    let mut gauss_tangential = Vec::new();
    for a in 0..nb {
        for b in a..nb {
            let r1a1b = curv.riemann(0, a + 1, 0, b + 1);
            riccati.push((
                (a + 1, b + 1),
                kk.get(a, b).derivative().sub(&kkk(a, b)).add(&r1a1b),
            ));
            let rhs = sum([
                rhat(a, b),
                r1a1b,
                kkk(a, b),
                kk.get(a, b).mul(&k_trace).neg(),
            ]);
            gauss_tangential.push(((a + 1, b + 1), curv.ricci.get(a + 1, b + 1).sub(&rhs)));
        }
    }
    let radial_rhs = curv
        .scalar
        .sub(&rhat_scalar)
        .add(&k_trace.mul(&k_trace))
        .sub(&k_sq);
    let gauss_radial = curv.ricci.get(0, 0).sub(&radial_rhs.scale(&half));
    let gauss_radial_unhalved = curv.ricci.get(0, 0).sub(&radial_rhs);
    let codazzi = (1..n).map(|a| (a, curv.ricci.get(0, a).clone())).collect();
    Ok(GaussCodazziReport {
        m,
        riccati,
        gauss_radial,
        codazzi,
        gauss_tangential,
        gauss_radial_unhalved,
    })
}
