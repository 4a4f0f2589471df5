//! Small symmetric coefficient tensors such as the boundary coefficient `kappa`.
//!
//! Index 0 is the radial direction; indices `1..n` run over the boundary. The
//! boundary metric is the identity in these components (flat torus in
//! Cartesian coordinates, or an orthonormal frame of the round sphere at a
//! point).

use rand::Rng;

use crate::scalar::{rat, Rational, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct SymTensor<S> {
    n: usize,
    data: Vec<S>,
}

pub type KappaTensor<S> = SymTensor<S>;

impl<S: Scalar> SymTensor<S> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![S::zero(); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                t.set(i, j, f(i, j));
            }
        }
        t
    }

    /// Radial component `kappa_11` plus a diagonal boundary block.
    pub fn from_blocks(radial: S, boundary_diag: &[S]) -> Self {
        let n = boundary_diag.len() + 1;
        let mut t = Self::zeros(n);
        t.set(0, 0, radial);
        for (a, v) in boundary_diag.iter().enumerate() {
            t.set(a + 1, a + 1, v.clone());
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.n + j] = v.clone();
        self.data[j * self.n + i] = v;
    }

    pub fn radial(&self) -> &S {
        self.get(0, 0)
    }

    /// Boundary trace `g_(k)^{AB} kappa_AB`.
    pub fn boundary_trace(&self) -> S {
        (1..self.n).fold(S::zero(), |acc, a| acc + self.get(a, a).clone())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    /// Off-radial mixed block `kappa_1A` vanishes.
    pub fn has_zero_mixed_block(&self) -> bool {
        (1..self.n).all(|a| self.get(0, a).is_zero())
    }

    /// `kappa_AB = phi delta_AB` and `kappa_1A = 0`.
    pub fn is_rotationally_symmetric(&self) -> bool {
        if !self.has_zero_mixed_block() {
            return false;
        }
        for a in 1..self.n {
            for b in 1..self.n {
                if a != b && !self.get(a, b).is_zero() {
                    return false;
                }
            }
            if self.get(a, a) != self.get(1, 1) {
                return false;
            }
        }
        true
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> SymTensor<T> {
        SymTensor {
            n: self.n,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn to_float(&self) -> SymTensor<f64> {
        self.map(|v| v.as_f64())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        SymTensor {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.add_ref(b))
                .collect(),
        }
    }

    pub fn scale(&self, c: &S) -> Self {
        self.map(|v| v.mul_ref(c))
    }

    /// Independent components `(i, j)` with `i <= j`, row by row.
    pub fn index_pairs(n: usize) -> Vec<(usize, usize)> {
        (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
    }

    pub fn to_vec(&self) -> Vec<S> {
        Self::index_pairs(self.n)
            .into_iter()
            .map(|(i, j)| self.get(i, j).clone())
            .collect()
    }

    pub fn from_vec(n: usize, v: &[S]) -> Self {
        let mut t = Self::zeros(n);
        for ((i, j), val) in Self::index_pairs(n).into_iter().zip(v) {
            t.set(i, j, val.clone());
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .map(|v| v.as_f64().abs())
            .fold(0.0, f64::max)
    }
}

/// A random rational with numerator in `[-9, 9]` and denominator in `[1, 9]`.
pub fn random_small_rational(rng: &mut impl Rng) -> Rational {
    rat(rng.gen_range(-9..=9), rng.gen_range(1..=9))
}

/// Seeded random symmetric tensor with small rational entries.
pub fn random_kappa(n: usize, rng: &mut impl Rng) -> KappaTensor<Rational> {
    SymTensor::from_fn(n, |_, _| random_small_rational(rng))
}

/// Random member of the rotationally symmetric subclass `diag(psi, phi, ..., phi)`.
pub fn random_symmetric_kappa(n: usize, rng: &mut impl Rng) -> KappaTensor<Rational> {
    let psi = random_small_rational(rng);
    let phi = random_small_rational(rng);
    SymTensor::from_blocks(psi, &vec![phi; n - 1])
}
