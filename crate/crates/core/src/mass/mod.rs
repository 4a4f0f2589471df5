//! Boundary data, mass aspect, Wang mass, gauge normalization and the
//! Chrusciel-Herzlich flux mass.

mod ch;

pub use ch::{ch_mass_grid, ch_mass_series, ch_flux, richardson, ChFlux, ChMass, ChSample};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    build_expansion_metric, build_geon_series, curvature_series, rho_series, ConformalWeight, RadialChart,
    SeriesMetric,
};
use crate::scalar::{PiRational, Rational, Scalar};
use crate::series::LaurentSeries;
use crate::tensor::KappaTensor;

/// The order-`n` coefficient tensor, constant or sampled on a uniform
/// periodic grid over the boundary torus.
#[derive(Clone, Debug, PartialEq)]
pub enum KappaField<S: Scalar> {
    Constant(KappaTensor<S>),
    /// `shape[a]` samples along boundary direction `a`, row-major.
    Sampled {
        shape: Vec<usize>,
        samples: Vec<KappaTensor<S>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData<S: Scalar> {
    chart: RadialChart,
    kappa: KappaField<S>,
    order: usize,
}

impl<S: Scalar> BoundaryData<S> {
    pub fn new(chart: RadialChart, kappa: KappaField<S>, order: usize) -> Result<Self> {
        let n = chart.n();
        let dims_ok = |k: &KappaTensor<S>| k.dim() == n;
        match &kappa {
            KappaField::Constant(k) => {
                if !dims_ok(k) {
                    return Err(Error::InvalidParameter(format!(
                        "kappa must be {n}x{n}, got {0}x{0}",
                        k.dim()
                    )));
                }
            }
            KappaField::Sampled { shape, samples } => {
                if chart.k() != 0 {
                    return Err(Error::InvalidParameter(
                        "sampled boundary data needs a torus boundary".into(),
                    ));
                }
                if shape.len() != n - 1 || shape.iter().any(|&s| s == 0) {
                    return Err(Error::InvalidParameter(format!(
                        "sample grid must have {} positive extents, got {shape:?}",
                        n - 1
                    )));
                }
                if shape.iter().product::<usize>() != samples.len() {
                    return Err(Error::InvalidParameter(
                        "sample count does not match the grid shape".into(),
                    ));
                }
                if !samples.iter().all(dims_ok) {
                    return Err(Error::InvalidParameter(format!("kappa samples must be {n}x{n}")));
                }
            }
        }
        Ok(Self { chart, kappa, order })
    }

    /// Constant data at the mass-defining order `n`.
    pub fn constant(chart: RadialChart, kappa: KappaTensor<S>) -> Result<Self> {
        let n = chart.n();
        Self::new(chart, KappaField::Constant(kappa), n)
    }

    pub fn chart(&self) -> &RadialChart {
        &self.chart
    }

    pub fn kappa(&self) -> &KappaField<S> {
        &self.kappa
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// The constant tensor, if the data is constant.
    pub fn constant_kappa(&self) -> Option<&KappaTensor<S>> {
        match &self.kappa {
            KappaField::Constant(k) => Some(k),
            KappaField::Sampled { .. } => None,
        }
    }

    fn require_mass_order(&self) -> Result<()> {
        if self.order != self.chart.n() {
            return Err(Error::OrderMismatch {
                n: self.chart.n(),
                order: self.order,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SigmaField<S> {
    Constant(S),
    Sampled(Vec<S>),
}

fn sigma_of<S: Scalar>(n: usize, k: &KappaTensor<S>) -> S {
    k.boundary_trace() + S::from_ratio(n as i64 - 1, n as i64) * k.radial().clone()
}

/// `sigma = g_(k)^AB kappa_AB + ((n-1)/n) kappa_11`, pointwise.
pub fn mass_aspect<S: Scalar>(bd: &BoundaryData<S>) -> Result<SigmaField<S>> {
    bd.require_mass_order()?;
    let n = bd.chart.n();
    Ok(match &bd.kappa {
        KappaField::Constant(k) => SigmaField::Constant(sigma_of(n, k)),
        KappaField::Sampled { samples, .. } => {
            SigmaField::Sampled(samples.iter().map(|k| sigma_of(n, k)).collect())
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WangMass {
    pub value: f64,
    /// Exact `q pi^p` form when the data is exact.
    #[serde(serialize_with = "serialize_opt_display")]
    pub exact: Option<PiRational>,
    pub quadrature: &'static str,
}

fn serialize_opt_display<T: std::fmt::Display, Se: serde::Serializer>(
    v: &Option<T>,
    s: Se,
) -> std::result::Result<Se::Ok, Se::Error> {
    match v {
        Some(v) => s.serialize_str(&v.to_string()),
        None => s.serialize_none(),
    }
}

/// `m = int sigma dmu_(k)`: exact for constant data, periodic trapezoid for
/// sampled data (the mean of the samples times the volume).
pub fn wang_mass<S: Scalar>(bd: &BoundaryData<S>) -> Result<WangMass> {
    let vol = bd.chart.boundary_volume();
    let (mean, quadrature) = match mass_aspect(bd)? {
        SigmaField::Constant(s) => (s, "constant integrand"),
        SigmaField::Sampled(v) => {
            let len = S::from_int(v.len() as i64);
            let total = v.into_iter().fold(S::zero(), |a, b| a + b);
            (total / len, "periodic trapezoid")
        }
    };
    let exact = mean.to_rational().map(|q| vol.scale(&q));
    Ok(WangMass {
        value: mean.as_f64() * vol.to_f64(),
        exact,
        quadrature,
    })
}

/// Reads `kappa_ij = n [x^n](g~_ij - g_(k)ij)` off a compactified metric and
/// checks that no lower-order terms are present.
pub fn extract_kappa<S: Scalar>(g: &SeriesMetric<S>) -> Result<KappaTensor<S>> {
    if g.weight() != ConformalWeight::Compactified {
        return Err(Error::InvalidParameter(
            "kappa is read from a compactified metric".into(),
        ));
    }
    let n = g.n();
    let mut kappa = KappaTensor::zeros(n);
    for i in 0..n {
        for j in i..n {
            let c = g.get(i, j);
            for e in 1..n as i32 {
                if !c.coeff(e)?.is_zero() {
                    return Err(Error::InvalidParameter(format!(
                        "component ({i},{j}) has a term at x^{e} below the mass order {n}"
                    )));
                }
            }
            kappa.set(i, j, c.coeff(n as i32)? * S::from_int(n as i64));
        }
    }
    Ok(kappa)
}

/// Removes `kappa_1A` by a shift of the boundary coordinates and `kappa_11`
/// by the substitution `x = x'(1 + kappa_11 x'^n / (2n^2))`, both carried out
/// as series transformations of the metric.
pub fn normalize_gauge<S: Scalar>(bd: &BoundaryData<S>) -> Result<BoundaryData<S>> {
    bd.require_mass_order()?;
    let normalize = |k: &KappaTensor<S>| normalize_constant(&bd.chart, k);
    let kappa = match &bd.kappa {
        KappaField::Constant(k) => KappaField::Constant(normalize(k)?),
        KappaField::Sampled { shape, samples } => KappaField::Sampled {
            shape: shape.clone(),
            samples: samples.iter().map(normalize).collect::<Result<_>>()?,
        },
    };
    BoundaryData::new(bd.chart.clone(), kappa, bd.order)
}

fn normalize_constant<S: Scalar>(chart: &RadialChart, kappa: &KappaTensor<S>) -> Result<KappaTensor<S>> {
    let n = chart.n();
    let ni = n as i32;
    let g = build_expansion_metric(chart, kappa, n, ni)?;
    let get = |i: usize, j: usize| g.get(i, j).clone();

    // Boundary shift: old z^A = y^A - x^(n+1) kappa_1A / (n(n+1)), so
    // dz^A = dy^A + J_A dx with J_A = -x^n kappa_1A / n.
    let inv_n = S::from_ratio(1, n as i64);
    let jac: Vec<LaurentSeries<S>> = (1..n)
        .map(|a| LaurentSeries::monomial(-(kappa.get(0, a).mul_ref(&inv_n)), ni, ni))
        .collect();
    let mut g00 = get(0, 0);
    for a in 1..n {
        g00 = g00.add(&get(0, a).mul(&jac[a - 1]).scale(&S::from_int(2)));
        for b in 1..n {
            g00 = g00.add(&jac[a - 1].mul(&jac[b - 1]).mul(&get(a, b)));
        }
    }
    let g0a: Vec<LaurentSeries<S>> = (1..n)
        .map(|a| {
            (1..n).fold(get(0, a), |acc, b| acc.add(&jac[b - 1].mul(&get(b, a))))
        })
        .collect();

    // Defining-function change x' = s(x), inverse of x = x'(1 + c x'^n).
    let c = kappa.radial().mul_ref(&S::from_ratio(1, 2 * (n * n) as i64));
    let phi = LaurentSeries::from_terms(&[(1, S::one()), (ni + 1, c)], ni + 1);
    let s = phi.compositional_inverse()?;
    let ds = s.derivative();
    let rho = rho_series::<S>(chart.k(), ni + 2);
    let ratio = rho.truncate(ni + 2).div(&rho.substitute(&s)?)?;
    let w = ratio.mul(&ratio);
    let pull = |c: &LaurentSeries<S>| c.substitute(&s).map(|v| v.mul(&w));

    let mut out = KappaTensor::zeros(n);
    let read = |series: LaurentSeries<S>, diag: bool| -> Result<S> {
        let series = if diag {
            series.sub(&LaurentSeries::one(ni))
        } else {
            series
        };
        for e in 0..ni {
            if !series.coeff(e)?.is_zero() {
                return Err(Error::InvalidParameter(format!(
                    "gauge normalization left a term at x^{e}"
                )));
            }
        }
        Ok(series.coeff(ni)? * S::from_int(n as i64))
    };
    out.set(0, 0, read(pull(&g00)?.mul(&ds).mul(&ds), true)?);
    for a in 1..n {
        out.set(0, a, read(pull(&g0a[a - 1])?.mul(&ds), false)?);
        for b in a..n {
            out.set(a, b, read(pull(&get(a, b))?, a == b)?);
        }
    }
    Ok(out)
}

/// The leading coefficient of the radial Einstein component for constant
/// data, computed from the curvature of the expansion metric. It equals
/// `-(n-2) sigma / 2`, so vanishing `E` forces a vanishing mass aspect.
pub fn einstein_radial_leading<S: Scalar>(bd: &BoundaryData<S>) -> Result<S> {
    bd.require_mass_order()?;
    let kappa = bd.constant_kappa().ok_or_else(|| {
        Error::InvalidParameter("the Einstein coefficient needs constant data".into())
    })?;
    let n = bd.chart.n();
    let g = build_expansion_metric(&bd.chart, kappa, n, n as i32)?.physical()?;
    curvature_series(&g)?.einstein.get(0, 0).coeff(n as i32 - 2)
}

/// Boundary data of the geon, read off its exact series in the special
/// defining function.
pub fn geon_boundary_data(chart: &RadialChart) -> Result<BoundaryData<Rational>> {
    let n = chart.n();
    let g = build_geon_series(chart, n as i32)?;
    BoundaryData::constant(chart.clone(), extract_kappa(&g)?)
}

/// Everything the mass module reports for one metric.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassReport {
    pub wang_mass: Option<WangMass>,
    pub mass_aspect: Option<f64>,
    /// `(R, m_CH(R))` pairs.
    pub ch_samples: Vec<(f64, f64)>,
    pub ch_extrapolated: Option<f64>,
    pub ch_error: Option<f64>,
}

impl MassReport {
    pub fn from_parts<S: Scalar>(bd: Option<&BoundaryData<S>>, ch: Option<&ChMass>) -> Result<Self> {
        let (wang_mass, mass_aspect) = match bd {
            Some(bd) => {
                let sigma = match mass_aspect(bd)? {
                    SigmaField::Constant(s) => Some(s.as_f64()),
                    SigmaField::Sampled(_) => None,
                };
                (Some(wang_mass(bd)?), sigma)
            }
            None => (None, None),
        };
        Ok(Self {
            wang_mass,
            mass_aspect,
            ch_samples: ch
                .map(|c| c.samples.iter().map(|s| (s.radius, s.mass)).collect())
                .unwrap_or_default(),
            ch_extrapolated: ch.map(|c| c.extrapolated),
            ch_error: ch.map(|c| c.error),
        })
    }

    /// `|m_CH - m_Wang| <= error` when both are present.
    pub fn consistent(&self) -> Option<bool> {
        let w = self.wang_mass.as_ref()?.value;
        let (m, e) = (self.ch_extrapolated?, self.ch_error?);
        Some((m - w).abs() <= e)
    }
}
