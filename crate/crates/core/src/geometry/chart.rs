use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{rat, PiRational};

/// Whether radial positions are given by a defining function `x` near the
/// boundary or by the global radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordinateKind {
    DefiningFunction,
    Radius,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryModuli {
    /// Flat torus. `periods[0]` is the xi-period `4 pi / n`, followed by the
    /// sorted theta periods `a_3 <= ... <= a_n`.
    Torus { periods: Vec<PiRational> },
    /// Round unit sphere.
    Sphere,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialChart {
    n: usize,
    moduli: BoundaryModuli,
    coordinate: CoordinateKind,
}

impl RadialChart {
    /// Flat torus boundary (`k = 0`) with theta periods `a_3, ..., a_n`.
    pub fn torus(n: usize, theta_periods: Vec<PiRational>) -> Result<Self> {
        check_dimension(n)?;
        if theta_periods.len() != n - 2 {
            return Err(Error::InvalidParameter(format!(
                "a torus boundary in dimension {n} needs {} theta periods, got {}",
                n - 2,
                theta_periods.len()
            )));
        }
        if let Some(p) = theta_periods.iter().find(|p| !p.is_positive()) {
            return Err(Error::InvalidParameter(format!(
                "torus periods must be positive, got {p}"
            )));
        }
        if theta_periods
            .windows(2)
            .any(|w| w[0].to_f64() > w[1].to_f64())
        {
            return Err(Error::InvalidParameter(
                "theta periods must be sorted increasingly".into(),
            ));
        }
        let mut periods = vec![PiRational::new(rat(4, n as i64), 1)];
        periods.extend(theta_periods);
        Ok(Self {
            n,
            moduli: BoundaryModuli::Torus { periods },
            coordinate: CoordinateKind::DefiningFunction,
        })
    }

    /// Torus with every theta period equal to one; convenient when only the
    /// local geometry matters.
    pub fn unit_torus(n: usize) -> Result<Self> {
        Self::torus(n, vec![PiRational::one(); n.saturating_sub(2)])
    }

    /// Round unit sphere boundary (`k = 1`).
    pub fn sphere(n: usize) -> Result<Self> {
        check_dimension(n)?;
        Ok(Self {
            n,
            moduli: BoundaryModuli::Sphere,
            coordinate: CoordinateKind::DefiningFunction,
        })
    }

    /// Chart for boundary curvature `k` with unit torus periods when `k = 0`.
    pub fn for_curvature(n: usize, k: u8) -> Result<Self> {
        match k {
            0 => Self::unit_torus(n),
            1 => Self::sphere(n),
            _ => Err(Error::InvalidParameter(format!(
                "boundary curvature must be 0 or 1, got {k}"
            ))),
        }
    }

    pub fn with_coordinate(mut self, coordinate: CoordinateKind) -> Self {
        self.coordinate = coordinate;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> u8 {
        match self.moduli {
            BoundaryModuli::Torus { .. } => 0,
            BoundaryModuli::Sphere => 1,
        }
    }

    pub fn moduli(&self) -> &BoundaryModuli {
        &self.moduli
    }

    pub fn coordinate(&self) -> CoordinateKind {
        self.coordinate
    }

    /// `c` in `Ric[g_(k)] = c g_(k)`.
    pub fn boundary_ricci_factor(&self) -> i64 {
        (self.n as i64 - 2) * self.k() as i64
    }

    /// Volume of the boundary with respect to `g_(k)`.
    pub fn boundary_volume(&self) -> PiRational {
        match &self.moduli {
            BoundaryModuli::Torus { periods } => periods
                .iter()
                .fold(PiRational::one(), |acc, p| acc.mul(p)),
            BoundaryModuli::Sphere => unit_sphere_volume(self.n - 1),
        }
    }
}

fn check_dimension(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "manifold dimension must be at least 3, got {n}"
        )));
    }
    Ok(())
}

/// Volume of the unit sphere `S^d`: `2 pi^((d+1)/2) / Gamma((d+1)/2)`.
fn unit_sphere_volume(d: usize) -> PiRational {
    // Recursion vol(S^d) = 2 pi vol(S^(d-2)) / (d - 1).
    let mut vol = if d % 2 == 0 {
        PiRational::rational(rat(2, 1))
    } else {
        PiRational::new(rat(2, 1), 1)
    };
    let mut dim = if d % 2 == 0 { 0 } else { 1 };
    while dim < d {
        dim += 2;
        vol = vol
            .mul(&PiRational::new(rat(2, 1), 1))
            .scale(&rat(1, (dim - 1) as i64));
    }
    vol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_volumes() {
        let pi = std::f64::consts::PI;
        let cases = [(1, 2.0 * pi), (2, 4.0 * pi), (3, 2.0 * pi * pi), (4, 8.0 * pi * pi / 3.0)];
        for (d, v) in cases {
            assert!((unit_sphere_volume(d).to_f64() - v).abs() < 1e-12, "S^{d}");
        }
    }

    #[test]
    fn torus_volume_includes_xi_period() {
        let c = RadialChart::torus(3, vec![PiRational::new(rat(2, 1), 1)]).unwrap();
        assert_eq!(c.boundary_volume(), PiRational::new(rat(8, 3), 2));
        assert_eq!(c.k(), 0);
        assert_eq!(c.boundary_ricci_factor(), 0);
        assert_eq!(RadialChart::sphere(5).unwrap().boundary_ricci_factor(), 3);
    }

    #[test]
    fn rejects_bad_moduli() {
        assert!(RadialChart::torus(2, vec![]).is_err());
        assert!(RadialChart::torus(3, vec![PiRational::rational(rat(-1, 1))]).is_err());
        let unsorted = vec![PiRational::rational(rat(2, 1)), PiRational::one()];
        assert!(RadialChart::torus(4, unsorted).is_err());
        assert!(RadialChart::torus(4, vec![PiRational::one()]).is_err());
    }
}
