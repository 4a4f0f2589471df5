//! The DeTurck field `X^k = g^ij (Gamma^k_ij - Gamma0^k_ij)` against a fixed
//! reference `h`, its Lie derivative term, and exact checks of their leading
//! boundary coefficients.

use crate::error::{Error, Result};
use crate::geometry::{
    build_expansion_metric, curvature_series, ConformalWeight, IdentityResidual,
    RadialChart, SeriesMatrix, SeriesMetric,
};
use crate::scalar::{rat, Rational, Scalar};
use crate::series::LaurentSeries;
use crate::tensor::{KappaTensor, SymTensor};

use super::kappa::KappaSystem;

/// Upper components `X^k` of the DeTurck field of `g` relative to `h`.
pub fn deturck_field_series<S: Scalar>(
    g: &SeriesMetric<S>,
    h: &SeriesMetric<S>,
) -> Result<Vec<LaurentSeries<S>>> {
    if g.chart() != h.chart() {
        return Err(Error::InvalidParameter("metric and reference charts differ".into()));
    }
    let (g, h) = (g.physical()?, h.physical()?);
    let cg = curvature_series(&g)?;
    let ch = curvature_series(&h)?;
    let n = g.n();
    Ok((0..n)
        .map(|k| {
            let mut x = LaurentSeries::zero(i32::MAX / 2);
            for i in 0..n {
                for j in 0..n {
                    let diff = cg.christoffel(k, i, j).sub(ch.christoffel(k, i, j));
                    x = x.add(&cg.inverse.get(i, j).mul(&diff));
                }
            }
            x
        })
        .collect())
}

/// `(L_X g)_ij` for a field depending on the defining function only.
pub fn lie_derivative_series<S: Scalar>(
    g: &SeriesMetric<S>,
    x: &[LaurentSeries<S>],
) -> Result<SeriesMatrix<S>> {
    let g = g.physical()?;
    let n = g.n();
    if x.len() != n {
        return Err(Error::InvalidParameter("field has the wrong number of components".into()));
    }
    let dx: Vec<LaurentSeries<S>> = x.iter().map(|c| c.derivative()).collect();
    Ok(SeriesMatrix::symmetric_from_fn(n, |i, j| {
        let mut out = x[0].mul(&g.get(i, j).derivative());
        for k in 0..n {
            if i == 0 {
                out = out.add(&g.get(k, j).mul(&dx[k]));
            }
            if j == 0 {
                out = out.add(&g.get(i, k).mul(&dx[k]));
            }
        }
        out
    }))
}

/// Lowers an index with `g`.
pub fn lower<S: Scalar>(g: &SeriesMetric<S>, x: &[LaurentSeries<S>]) -> Result<Vec<LaurentSeries<S>>> {
    let g = g.physical()?;
    let n = g.n();
    Ok((0..n)
        .map(|i| {
            (0..n).fold(LaurentSeries::zero(i32::MAX / 2), |acc, j| {
                acc.add(&g.get(i, j).mul(&x[j]))
            })
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeturckReport {
    pub n: usize,
    pub m: usize,
    pub k: u8,
    /// Lowered field at `x^(m-1)` and Lie derivative at `x^(m-2)`.
    pub entries: Vec<IdentityResidual<Rational>>,
    /// `((n-1)/n)(L_X g)_11 + tr (L_X g)_AB` at `x^(n-2)`, only for `m = n`.
    pub mass_combination: Option<Rational>,
    /// Lowest power present in each upper component `X^k` (None if zero).
    pub field_valuations: Vec<Option<i32>>,
}

impl DeturckReport {
    pub fn all_zero(&self) -> bool {
        self.entries.iter().all(|e| e.residual == rat(0, 1))
            && self.mass_combination.as_ref().map_or(true, |c| c == &rat(0, 1))
    }
}

fn reference_and_perturbed(
    chart: &RadialChart,
    m: usize,
    w: &KappaTensor<Rational>,
    kappa: &KappaTensor<Rational>,
) -> Result<(SeriesMetric<Rational>, SeriesMetric<Rational>)> {
    let n = chart.n();
    let order = (m.max(n) + 4) as i32;
    let h = build_expansion_metric(chart, kappa, n, order)?;
    let v = build_expansion_metric(chart, w, m, order)?;
    // g~ = h~ + x^m w / m: the identity of the second build is removed.
    let comps = SeriesMatrix::symmetric_from_fn(n, |i, j| {
        let mut c = h.get(i, j).add(v.get(i, j));
        if i == j {
            c = c.sub(&LaurentSeries::one(order));
        }
        c
    });
    let g = SeriesMetric::new(chart.clone(), comps, ConformalWeight::Compactified)?;
    Ok((g, h))
}

fn label(kind: &str, i: usize, j: Option<usize>) -> String {
    let name = |c: usize| if c == 0 { "1".to_string() } else { format!("y{c}") };
    match j {
        Some(j) => format!("{kind}[{},{}]", name(i), name(j)),
        None => format!("{kind}[{}]", name(i)),
    }
}

/// Builds `h` (order-`n` data `kappa`) and `g = h + x^(m-2) w / m`, then
/// compares the lowered DeTurck field at `x^(m-1)` and `L_X g` at `x^(m-2)`
/// with their closed forms, exactly.
pub fn deturck_expansion_check(
    chart: &RadialChart,
    m: usize,
    w: &KappaTensor<Rational>,
    kappa: &KappaTensor<Rational>,
) -> Result<DeturckReport> {
    let n = chart.n();
    if m < 1 || m > n {
        return Err(Error::InvalidParameter(format!("expansion order m = {m} outside 1..={n}")));
    }
    let (g, h) = reference_and_perturbed(chart, m, w, kappa)?;
    let x_up = deturck_field_series(&g, &h)?;
    let x_low = lower(&g, &x_up)?;
    let lie = lie_derivative_series(&g, &x_up)?;
    let (ni, mi) = (n as i64, m as i64);
    let w11 = w.radial().clone();
    let diff = &w11 - w.boundary_trace();
    let mut entries = Vec::new();
    let mut push = |label: String, exponent: i32, engine: Rational, formula: Rational| {
        entries.push(IdentityResidual {
            label,
            exponent,
            residual: &engine - &formula,
            engine,
            formula,
        });
    };
    let e_field = mi as i32 - 1;
    let e_lie = mi as i32 - 2;
    let x1 = -rat(ni - 2, mi) * &w11 + rat(mi - 2, 2 * mi) * &diff;
    push(label("X", 0, None), e_field, x_low[0].coeff(e_field)?, x1.clone());
    for a in 1..n {
        push(
            label("X", a, None),
            e_field,
            x_low[a].coeff(e_field)?,
            rat(mi - ni, mi) * w.get(0, a),
        );
    }
    let l11 = -rat(2 * (ni - 2), 1) * &w11 + rat(mi - 2, 1) * &diff;
    push(label("LXg", 0, Some(0)), e_lie, lie.get(0, 0).coeff(e_lie)?, l11);
    for a in 1..n {
        push(
            label("LXg", 0, Some(a)),
            e_lie,
            lie.get(0, a).coeff(e_lie)?,
            rat((mi - ni) * (mi + 1), mi) * w.get(0, a),
        );
    }
    let lab = rat(2 * (ni - 2), mi) * &w11 - rat(mi - 2, mi) * &diff;
    for a in 1..n {
        for b in a..n {
            let f = if a == b { lab.clone() } else { rat(0, 1) };
            push(label("LXg", a, Some(b)), e_lie, lie.get(a, b).coeff(e_lie)?, f);
        }
    }
    let mass_combination = if m == n {
        let e = ni as i32 - 2;
        let mut c = rat(ni - 1, ni) * lie.get(0, 0).coeff(e)?;
        for a in 1..n {
            c += lie.get(a, a).coeff(e)?;
        }
        Some(c)
    } else {
        None
    };
    Ok(DeturckReport {
        n,
        m,
        k: chart.k(),
        entries,
        mass_combination,
        field_valuations: x_up.iter().map(|c| c.valuation()).collect(),
    })
}

/// The DeTurck-modified system `dw/dt = -2m x^(2-m) (E - L_X g / 2)` at
/// leading order, assembled column by column from the curvature engine.
pub fn deturck_system_engine(chart: &RadialChart, m: usize) -> Result<Vec<Vec<Rational>>> {
    let n = chart.n();
    if chart.k() != 0 {
        return Err(Error::InvalidParameter(
            "the full DeTurck system is assembled on a torus boundary".into(),
        ));
    }
    let pairs = SymTensor::<Rational>::index_pairs(n);
    let zero = SymTensor::<Rational>::zeros(n);
    let e = m as i32 - 2;
    let mut cols = Vec::new();
    for &(p, q) in &pairs {
        let mut w = zero.clone();
        w.set(p, q, rat(1, 1));
        let (g, h) = reference_and_perturbed(chart, m, &w, &zero)?;
        let ein = curvature_series(&g.physical()?)?.einstein;
        let lie = lie_derivative_series(&g, &deturck_field_series(&g, &h)?)?;
        let col = pairs
            .iter()
            .map(|&(i, j)| {
                let eps = ein.get(i, j).coeff(e)? - lie.get(i, j).coeff(e)? / rat(2, 1);
                Ok(-rat(2 * m as i64, 1) * eps)
            })
            .collect::<Result<Vec<_>>>()?;
        cols.push(col);
    }
    let d = pairs.len();
    Ok((0..d).map(|r| (0..d).map(|c| cols[c][r].clone()).collect()).collect())
}

/// The same system from the closed forms: the Einstein part of the plain
/// system plus `m` times the Lie-derivative coefficients.
pub fn deturck_system_closed_form(n: usize, m: usize) -> Result<Vec<Vec<Rational>>> {
    let base = KappaSystem::new(n, m)?;
    let pairs = base.pairs.clone();
    let (ni, mi) = (n as i64, m as i64);
    let col = |i: usize, j: usize| pairs.iter().position(|&p| p == (i, j)).expect("pair");
    let mut out = base.matrix.clone();
    for (row, &(i, j)) in pairs.iter().enumerate() {
        let r = &mut out[row];
        match (i, j) {
            (0, 0) => {
                // m [-2(n-2) w11 + (m-2)(w11 - tr w)]
                r[col(0, 0)] += rat(mi * (-2 * (ni - 2) + mi - 2), 1);
                for c in 1..n {
                    r[col(c, c)] -= rat(mi * (mi - 2), 1);
                }
            }
            (0, a) => r[col(0, a)] += rat((mi - ni) * (mi + 1), 1),
            (a, b) if a == b => {
                r[col(0, 0)] += rat(2 * (ni - 2) - (mi - 2), 1);
                for c in 1..n {
                    r[col(c, c)] += rat(mi - 2, 1);
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{random_kappa, random_symmetric_kappa};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_metrics_have_no_field() {
        let chart = RadialChart::unit_torus(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = random_kappa(3, &mut rng);
        let h = build_expansion_metric(&chart, &k, 3, 7).unwrap();
        let x = deturck_field_series(&h, &h).unwrap();
        assert!(x.iter().all(|c| c.is_known_zero()));
    }

    #[test]
    fn zero_perturbation_gives_zero_residuals() {
        let chart = RadialChart::unit_torus(4).unwrap();
        let z = SymTensor::<Rational>::zeros(4);
        for m in 1..=4 {
            let r = deturck_expansion_check(&chart, m, &z, &z).unwrap();
            assert!(r.all_zero());
            assert!(r.entries.iter().all(|e| e.engine == rat(0, 1)));
        }
    }

    #[test]
    fn leading_coefficients_match_for_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 3..=5 {
            let chart = RadialChart::unit_torus(n).unwrap();
            for m in 1..=n {
                for _ in 0..3 {
                    let w = random_kappa(n, &mut rng);
                    let k = random_kappa(n, &mut rng);
                    let r = deturck_expansion_check(&chart, m, &w, &k).unwrap();
                    assert!(r.all_zero(), "n={n} m={m}: {:?}", r.entries);
                }
            }
        }
    }

    #[test]
    fn sphere_leading_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 3..=4 {
            let chart = RadialChart::sphere(n).unwrap();
            for m in 1..=n {
                let w = random_symmetric_kappa(n, &mut rng);
                let k = random_symmetric_kappa(n, &mut rng);
                let r = deturck_expansion_check(&chart, m, &w, &k).unwrap();
                assert!(r.all_zero(), "n={n} m={m}: {:?}", r.entries);
            }
        }
    }

    #[test]
    fn field_starts_above_mass_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 3..=5 {
            let chart = RadialChart::unit_torus(n).unwrap();
            let w = random_kappa(n, &mut rng);
            let r = deturck_expansion_check(&chart, n, &w, &random_kappa(n, &mut rng)).unwrap();
            assert_eq!(r.mass_combination, Some(rat(0, 1)));
            for v in r.field_valuations.iter().flatten() {
                assert!(*v >= n as i32 + 1, "valuation {v}");
            }
        }
    }

    #[test]
    fn modified_system_engine_matches_closed_form() {
        for n in 3..=4 {
            let chart = RadialChart::unit_torus(n).unwrap();
            for m in 1..=n {
                assert_eq!(
                    deturck_system_engine(&chart, m).unwrap(),
                    deturck_system_closed_form(n, m).unwrap(),
                    "n={n} m={m}"
                );
            }
        }
    }
}
