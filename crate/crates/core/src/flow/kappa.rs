//! The linear system `d kappa / dt = A kappa` for the leading boundary
//! coefficient under the normalized flow, with `A = -2m x^(2-m) E` read off
//! the closed-form Einstein coefficients.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{rat, Rational, Scalar};
use crate::tensor::{KappaTensor, SymTensor};

#[derive(Clone, Debug, PartialEq)]
pub struct KappaState<S: Scalar> {
    pub n: usize,
    pub m: usize,
    pub kappa: KappaTensor<S>,
    pub t: S,
}

impl<S: Scalar> KappaState<S> {
    pub fn new(m: usize, kappa: KappaTensor<S>) -> Result<Self> {
        let n = kappa.dim();
        check_order(n, m)?;
        Ok(Self {
            n,
            m,
            kappa,
            t: S::zero(),
        })
    }

    /// `sigma = tr kappa_AB + ((n-1)/n) kappa_11`.
    pub fn sigma(&self) -> S {
        self.kappa.boundary_trace()
            + S::from_ratio(self.n as i64 - 1, self.n as i64) * self.kappa.radial().clone()
    }
}

fn check_order(n: usize, m: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("dimension n = {n} must be at least 3")));
    }
    if m < 1 || m > n {
        return Err(Error::InvalidParameter(format!(
            "expansion order m = {m} outside 1..={n}"
        )));
    }
    Ok(())
}

/// `A` on the independent components `(i <= j)` of `kappa`, in the order of
/// [`SymTensor::index_pairs`]. The mixed `1A` rows vanish.
#[derive(Clone, Debug, PartialEq)]
pub struct KappaSystem {
    pub n: usize,
    pub m: usize,
    pub pairs: Vec<(usize, usize)>,
    pub matrix: Vec<Vec<Rational>>,
}

impl KappaSystem {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        check_order(n, m)?;
        let pairs = SymTensor::<Rational>::index_pairs(n);
        let (ni, mi) = (n as i64, m as i64);
        let col = |i: usize, j: usize| pairs.iter().position(|&p| p == (i, j)).expect("pair");
        let mut matrix = vec![vec![rat(0, 1); pairs.len()]; pairs.len()];
        for (row, &(i, j)) in pairs.iter().enumerate() {
            let r = &mut matrix[row];
            match (i, j) {
                (0, 0) => {
                    r[col(0, 0)] = rat((mi - 2) * (ni - 1), 1);
                    for c in 1..n {
                        r[col(c, c)] = rat(mi * (mi - 2), 1);
                    }
                }
                (0, _) => {}
                (a, b) => {
                    if a == b {
                        // -m((2n-2)/m - 1) = m - 2n + 2
                        r[col(0, 0)] = rat(mi - 2 * ni + 2, 1);
                        for c in 1..n {
                            r[col(c, c)] -= rat(mi, 1);
                        }
                    }
                    r[col(a, b)] -= rat(mi * (ni - mi - 1), 1);
                }
            }
        }
        Ok(Self { n, m, pairs, matrix })
    }

    pub fn apply<S: Scalar>(&self, kappa: &KappaTensor<S>) -> KappaTensor<S> {
        let v = kappa.to_vec();
        let out: Vec<S> = self
            .matrix
            .iter()
            .map(|row| {
                row.iter().zip(&v).fold(S::zero(), |acc, (a, x)| {
                    if a == &rat(0, 1) {
                        acc
                    } else {
                        acc + S::from_rational(a) * x.clone()
                    }
                })
            })
            .collect();
        KappaTensor::from_vec(self.n, &out)
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        let d = self.pairs.len();
        DMatrix::from_fn(d, d, |i, j| self.matrix[i][j].as_f64())
    }

    /// Coefficients of `sigma` on the independent components.
    pub fn sigma_functional(&self) -> Vec<Rational> {
        self.pairs
            .iter()
            .map(|&(i, j)| match (i, j) {
                (0, 0) => rat(self.n as i64 - 1, self.n as i64),
                (a, b) if a == b => rat(1, 1),
                _ => rat(0, 1),
            })
            .collect()
    }

    /// `sigma^T A + (n-2) sigma^T`, which vanishes exactly when `sigma` decays
    /// at the rate `n-2`. Only meaningful for `m = n`.
    pub fn sigma_eigen_residual(&self) -> Vec<Rational> {
        let s = self.sigma_functional();
        let decay = rat(self.n as i64 - 2, 1);
        (0..self.pairs.len())
            .map(|c| {
                let contracted = s
                    .iter()
                    .zip(&self.matrix)
                    .fold(rat(0, 1), |acc, (si, row)| acc + si * &row[c]);
                contracted + &decay * &s[c]
            })
            .collect()
    }
}

/// `d kappa / dt`.
pub fn kappa_rhs<S: Scalar>(state: &KappaState<S>) -> Result<KappaTensor<S>> {
    Ok(KappaSystem::new(state.n, state.m)?.apply(&state.kappa))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum KappaMethod {
    Rk4 { steps: usize },
    /// Matrix exponential by scaling and squaring.
    Exponential,
}

/// Classical Runge-Kutta in the scalar type of the state, for the flow with
/// curvature radius `ell` (`d kappa / dt = A kappa / ell^2`).
pub fn kappa_rk4<S: Scalar>(
    state: &KappaState<S>,
    t_end: S,
    steps: usize,
    inv_ell_sq: S,
) -> Result<KappaState<S>> {
    if steps == 0 {
        return Err(Error::InvalidParameter("rk4 needs at least one step".into()));
    }
    let sys = KappaSystem::new(state.n, state.m)?;
    let dt = (t_end.clone() - state.t.clone()) / S::from_int(steps as i64);
    let half = S::from_ratio(1, 2);
    let f = |k: &KappaTensor<S>| sys.apply(k).scale(&inv_ell_sq);
    let mut k = state.kappa.clone();
    for _ in 0..steps {
        let k1 = f(&k);
        let k2 = f(&k.add(&k1.scale(&(dt.clone() * half.clone()))));
        let k3 = f(&k.add(&k2.scale(&(dt.clone() * half.clone()))));
        let k4 = f(&k.add(&k3.scale(&dt)));
        let incr = k1
            .add(&k2.scale(&S::from_int(2)))
            .add(&k3.scale(&S::from_int(2)))
            .add(&k4)
            .scale(&(dt.clone() / S::from_int(6)));
        k = k.add(&incr);
    }
    Ok(KappaState {
        n: state.n,
        m: state.m,
        kappa: k,
        t: t_end,
    })
}

/// Integrates to `t_end` with curvature radius `ell`.
pub fn kappa_evolve(
    state: &KappaState<f64>,
    t_end: f64,
    method: KappaMethod,
    ell: f64,
) -> Result<KappaState<f64>> {
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(Error::InvalidParameter(format!("ell = {ell} must be positive")));
    }
    let inv = 1.0 / (ell * ell);
    match method {
        KappaMethod::Rk4 { steps } => kappa_rk4(state, t_end, steps, inv),
        KappaMethod::Exponential => {
            let sys = KappaSystem::new(state.n, state.m)?;
            let a = sys.to_f64() * ((t_end - state.t) * inv);
            let v = nalgebra::DVector::from_vec(state.kappa.to_vec());
            let out = a.exp() * v;
            Ok(KappaState {
                n: state.n,
                m: state.m,
                kappa: KappaTensor::from_vec(state.n, out.as_slice()),
                t: t_end,
            })
        }
    }
}
