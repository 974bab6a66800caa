//! Dyadic partition frames: the standard grids of the line and the plane, a
//! rotated grid adapted to an orthogonal splitting, a non-conformal grid made
//! of images of squares under the singular-value part of an affine map, and a
//! six-coordinate grid on the affine group.

use crate::affine::{svd2, AffineMap2, Matrix2, ProjectivePoint, Vec2};
use crate::{Error, Result};

/// Identifier of one partition cell. Unused coordinates stay zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(pub [i64; 6]);

impl CellId {
    pub fn one(k: i64) -> Self {
        CellId([k, 0, 0, 0, 0, 0])
    }

    pub fn two(i: i64, j: i64) -> Self {
        CellId([i, j, 0, 0, 0, 0])
    }
}

/// Half-open dyadic index: the unique k with x in [k/2^n, (k+1)/2^n).
/// Boundary points go up/right by the floor convention.
pub fn dyadic_index(x: f64, level: i32) -> i64 {
    let scaled = x * f64::exp2(level as f64);
    debug_assert!(
        scaled.abs() < 9.0e18,
        "dyadic index overflow at level {level}"
    );
    scaled.floor() as i64
}

#[derive(Debug, Clone, Copy)]
pub enum FrameKind {
    /// Cells [k/2^n, (k+1)/2^n) of the line; points are read through x.
    Standard1D,
    /// Product cells of the plane.
    Standard2D,
    /// Dyadic cells in the coordinate system W + W_perp.
    Rotated(ProjectivePoint),
    /// Images of standard cells under B = V D, the rotation and stretch of
    /// an affine map with a strict singular gap; indexes by B^{-1}(point).
    NonConformal { inv: Matrix2 },
}

/// A partition specification: a frame kind at a dyadic level.
#[derive(Debug, Clone, Copy)]
pub struct DyadicFrame {
    pub kind: FrameKind,
    pub level: i32,
}

impl DyadicFrame {
    pub fn standard_1d(level: i32) -> Self {
        DyadicFrame {
            kind: FrameKind::Standard1D,
            level,
        }
    }

    pub fn standard_2d(level: i32) -> Self {
        DyadicFrame {
            kind: FrameKind::Standard2D,
            level,
        }
    }

    pub fn rotated(w: ProjectivePoint, level: i32) -> Self {
        DyadicFrame {
            kind: FrameKind::Rotated(w),
            level,
        }
    }

    /// Frame whose level-n cells are VD(standard level-n cells) for the
    /// singular value decomposition A_g = VDU. Requires alpha1 > alpha2.
    pub fn non_conformal(g: &AffineMap2, level: i32) -> Result<Self> {
        let s = svd2(&g.linear)?;
        if !(s.alpha1 > s.alpha2) {
            return Err(Error::EqualSingularValues { gap: 0.0 });
        }
        let b = s.v.mul(&Matrix2::diagonal(s.alpha1, s.alpha2));
        Ok(DyadicFrame {
            kind: FrameKind::NonConformal { inv: b.inverse()? },
            level,
        })
    }

    /// Cell of a planar point.
    pub fn cell(&self, p: Vec2) -> CellId {
        match &self.kind {
            FrameKind::Standard1D => CellId::one(dyadic_index(p.x, self.level)),
            FrameKind::Standard2D => CellId::two(
                dyadic_index(p.x, self.level),
                dyadic_index(p.y, self.level),
            ),
            FrameKind::Rotated(w) => {
                let u = w.unit();
                let v = u.perp();
                CellId::two(
                    dyadic_index(p.dot(u), self.level),
                    dyadic_index(p.dot(v), self.level),
                )
            }
            FrameKind::NonConformal { inv } => {
                let q = inv.apply(p);
                CellId::two(
                    dyadic_index(q.x, self.level),
                    dyadic_index(q.y, self.level),
                )
            }
        }
    }
}

/// Cell of an affine map in the six-coordinate grid of side 2^-level over
/// the 3x3 embedding coordinates (four linear entries, two translations).
pub fn affine_grid_cell(phi: &AffineMap2, level: i32) -> CellId {
    CellId([
        dyadic_index(phi.linear.a11, level),
        dyadic_index(phi.linear.a12, level),
        dyadic_index(phi.linear.a21, level),
        dyadic_index(phi.linear.a22, level),
        dyadic_index(phi.translation.x, level),
        dyadic_index(phi.translation.y, level),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_cells_and_boundary_rule() {
        let f = DyadicFrame::standard_2d(1);
        assert_eq!(f.cell(Vec2::new(0.3, 0.7)), CellId::two(0, 1));
        // A point exactly on the boundary belongs to the upper/right cell.
        assert_eq!(f.cell(Vec2::new(0.5, 0.5)), CellId::two(1, 1));
        let f0 = DyadicFrame::standard_1d(0);
        assert_eq!(f0.cell(Vec2::new(-0.25, 0.0)), CellId::one(-1));
    }

    #[test]
    fn non_conformal_cell_applies_inverse_stretch() {
        // g linear = diag(1, 2^-4): index of (x, y) is the standard cell of
        // (x, 16 y).
        let g = AffineMap2::new(Matrix2::diagonal(1.0, 2f64.powi(-4)), Vec2::ZERO);
        let f = DyadicFrame::non_conformal(&g, 0).unwrap();
        assert_eq!(f.cell(Vec2::new(0.3, 0.05)), CellId::two(0, 0));
        assert_eq!(f.cell(Vec2::new(0.3, 0.07)), CellId::two(0, 1));
    }

    #[test]
    fn rotated_cells_use_frame_coordinates() {
        let w = ProjectivePoint::from_angle(std::f64::consts::FRAC_PI_2);
        let f = DyadicFrame::rotated(w, 1);
        // In the (e2, -e1) coordinate system the point (0.3, 0.7) reads
        // (0.7, -0.3).
        assert_eq!(f.cell(Vec2::new(0.3, 0.7)), CellId::two(1, -1));
    }

    #[test]
    fn affine_grid_separates_translations() {
        let a = AffineMap2::IDENTITY;
        let b = AffineMap2::translation_by(Vec2::new(0.26, 0.0));
        assert_ne!(affine_grid_cell(&a, 2), affine_grid_cell(&b, 2));
        assert_eq!(affine_grid_cell(&a, 1), affine_grid_cell(&b, 1));
    }
}
