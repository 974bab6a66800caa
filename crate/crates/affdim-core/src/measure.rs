//! Weighted atomic measures over the plane, the projective line, or the
//! affine group.

use crate::affine::{AffineMap2, ProjectivePoint, Vec2};
use crate::rng::{cumulative_weights, search_cumulative, substream};
use crate::{Error, Result};
use rand::Rng;

/// A finite weighted point cloud standing in for a probability measure.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure<T> {
    atoms: Vec<(T, f64)>,
    uniform: bool,
}

pub type PointCloud = EmpiricalMeasure<Vec2>;
pub type ProjectiveCloud = EmpiricalMeasure<ProjectivePoint>;
pub type AffineAtomMeasure = EmpiricalMeasure<AffineMap2>;

impl<T: Clone> EmpiricalMeasure<T> {
    /// Builds a measure from weighted atoms, normalizing the total mass to 1.
    pub fn new(atoms: Vec<(T, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let total: f64 = atoms.iter().map(|&(_, w)| w).sum();
        if !(total > 0.0) || atoms.iter().any(|&(_, w)| w < 0.0) {
            return Err(Error::InvalidProbabilityVector {
                reason: "atom weights must be nonnegative with positive total".into(),
            });
        }
        let atoms: Vec<(T, f64)> = atoms
            .into_iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|(t, w)| (t, w / total))
            .collect();
        let first = atoms[0].1;
        let uniform = atoms.iter().all(|&(_, w)| w == first);
        Ok(EmpiricalMeasure { atoms, uniform })
    }

    /// Equal-weight measure on the given support points.
    pub fn uniform(points: Vec<T>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let w = 1.0 / points.len() as f64;
        Ok(EmpiricalMeasure {
            atoms: points.into_iter().map(|p| (p, w)).collect(),
            uniform: true,
        })
    }

    pub fn atoms(&self) -> &[(T, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum()
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> EmpiricalMeasure<U> {
        EmpiricalMeasure {
            atoms: self.atoms.iter().map(|(t, w)| (f(t), *w)).collect(),
            uniform: self.uniform,
        }
    }

    /// Weight-proportional resampling (with replacement) down to `target`
    /// equally weighted atoms. Deterministic in `seed`.
    pub fn resample(&self, target: usize, seed: u64) -> Self {
        let weights: Vec<f64> = self.atoms.iter().map(|&(_, w)| w).collect();
        let cum = cumulative_weights(&weights);
        let total = *cum.last().unwrap();
        let mut rng = substream(seed, 0);
        let w = 1.0 / target as f64;
        let atoms = (0..target)
            .map(|_| {
                let u = rng.gen_range(0.0..total);
                (self.atoms[search_cumulative(&cum, u)].0.clone(), w)
            })
            .collect();
        EmpiricalMeasure {
            atoms,
            uniform: true,
        }
    }

    /// Draws one atom index proportionally to weight.
    pub fn draw_index(&self, rng: &mut impl Rng) -> usize {
        if self.uniform {
            return rng.gen_range(0..self.atoms.len());
        }
        let weights: Vec<f64> = self.atoms.iter().map(|&(_, w)| w).collect();
        let cum = cumulative_weights(&weights);
        let total = *cum.last().unwrap();
        search_cumulative(&cum, rng.gen_range(0.0..total))
    }
}

impl PointCloud {
    pub fn from_points(points: Vec<Vec2>) -> Result<Self> {
        Self::uniform(points)
    }

    /// Pushforward by an affine map.
    pub fn push_affine(&self, phi: &AffineMap2) -> PointCloud {
        self.map(|x| phi.apply(*x))
    }

    /// Axis-aligned bounding box (min, max).
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(p, _) in &self.atoms {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_weights() {
        let m = EmpiricalMeasure::new(vec![(0u8, 2.0), (1u8, 6.0)]).unwrap();
        assert!((m.atoms()[0].1 - 0.25).abs() < 1e-15);
        assert!((m.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_and_negative() {
        assert!(EmpiricalMeasure::<u8>::new(vec![]).is_err());
        assert!(EmpiricalMeasure::new(vec![(0u8, -1.0), (1u8, 2.0)]).is_err());
    }

    #[test]
    fn resample_is_deterministic() {
        let m = EmpiricalMeasure::new(vec![(0u8, 0.2), (1u8, 0.8)]).unwrap();
        let a = m.resample(100, 5);
        let b = m.resample(100, 5);
        assert_eq!(
            a.atoms().iter().map(|&(t, _)| t).collect::<Vec<_>>(),
            b.atoms().iter().map(|&(t, _)| t).collect::<Vec<_>>()
        );
        let ones = a.atoms().iter().filter(|&&(t, _)| t == 1).count();
        assert!(ones > 60 && ones < 95);
    }
}
