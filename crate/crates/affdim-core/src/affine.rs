//! Exact 2x2 and affine linear algebra: closed-form singular values, major
//! directions, the projective metric, and computable distances on the group
//! of invertible affine maps of the plane.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative gap below which the two singular values are treated as equal.
pub const EQUAL_SV_TOL: f64 = 1e-12;
/// A matrix is rejected as singular when |det| < this multiple of its
/// squared Frobenius norm.
pub const SINGULAR_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, c: f64) -> Vec2 {
        Vec2::new(c * self.x, c * self.y)
    }

    /// Rotation by +90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }
}

/// 2x2 real matrix, row-major: [[a11, a12], [a21, a22]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Matrix2 {
    pub const IDENTITY: Matrix2 = Matrix2 {
        a11: 1.0,
        a12: 0.0,
        a21: 0.0,
        a22: 1.0,
    };

    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Matrix2 { a11, a12, a21, a22 }
    }

    pub fn diagonal(d1: f64, d2: f64) -> Self {
        Matrix2::new(d1, 0.0, 0.0, d2)
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn transpose(&self) -> Matrix2 {
        Matrix2::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn mul(&self, o: &Matrix2) -> Matrix2 {
        Matrix2::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.a11 * v.x + self.a12 * v.y,
            self.a21 * v.x + self.a22 * v.y,
        )
    }

    pub fn scaled(&self, c: f64) -> Matrix2 {
        Matrix2::new(c * self.a11, c * self.a12, c * self.a21, c * self.a22)
    }

    pub fn add(&self, o: &Matrix2) -> Matrix2 {
        Matrix2::new(
            self.a11 + o.a11,
            self.a12 + o.a12,
            self.a21 + o.a21,
            self.a22 + o.a22,
        )
    }

    pub fn sub(&self, o: &Matrix2) -> Matrix2 {
        Matrix2::new(
            self.a11 - o.a11,
            self.a12 - o.a12,
            self.a21 - o.a21,
            self.a22 - o.a22,
        )
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.a11 * self.a11 + self.a12 * self.a12 + self.a21 * self.a21 + self.a22 * self.a22
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn is_invertible(&self) -> bool {
        self.det().abs() >= SINGULAR_TOL * self.frobenius_sq()
    }

    pub fn inverse(&self) -> Result<Matrix2> {
        let det = self.det();
        if !self.is_invertible() {
            return Err(Error::SingularMatrix { det });
        }
        Ok(Matrix2::new(
            self.a22 / det,
            -self.a12 / det,
            -self.a21 / det,
            self.a11 / det,
        ))
    }

    /// Singular values (alpha1 >= alpha2 >= 0) by the stable closed form:
    /// alpha1 from the large eigenvalue of A*A^T, alpha2 from |det|/alpha1.
    pub fn singular_values(&self) -> (f64, f64) {
        let s11 = self.a11 * self.a11 + self.a12 * self.a12;
        let s22 = self.a21 * self.a21 + self.a22 * self.a22;
        let s12 = self.a11 * self.a21 + self.a12 * self.a22;
        let tr = s11 + s22;
        let disc = ((s11 - s22) * (s11 - s22) + 4.0 * s12 * s12).max(0.0).sqrt();
        let lam1 = 0.5 * (tr + disc);
        let alpha1 = lam1.max(0.0).sqrt();
        let alpha2 = if alpha1 > 0.0 {
            (self.det().abs() / alpha1).min(alpha1)
        } else {
            0.0
        };
        (alpha1, alpha2)
    }

    /// Operator norm, i.e. the largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.singular_values().0
    }
}

/// A line through the origin, as an angle in [0, pi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectivePoint {
    angle: f64,
}

impl ProjectivePoint {
    pub const E1: ProjectivePoint = ProjectivePoint { angle: 0.0 };

    pub fn from_angle(theta: f64) -> Self {
        let mut a = theta.rem_euclid(std::f64::consts::PI);
        if a >= std::f64::consts::PI {
            a = 0.0;
        }
        ProjectivePoint { angle: a }
    }

    pub fn from_vector(v: Vec2) -> Self {
        Self::from_angle(v.y.atan2(v.x))
    }

    pub fn e2() -> Self {
        Self::from_angle(std::f64::consts::FRAC_PI_2)
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Canonical unit representative, reproducible bit-exactly from the angle.
    pub fn unit(&self) -> Vec2 {
        Vec2::new(self.angle.cos(), self.angle.sin())
    }

    /// The perpendicular line.
    pub fn perp(&self) -> ProjectivePoint {
        Self::from_angle(self.angle + std::f64::consts::FRAC_PI_2)
    }

    /// Image line under an invertible matrix.
    pub fn map_by(&self, m: &Matrix2) -> ProjectivePoint {
        Self::from_vector(m.apply(self.unit()))
    }
}

/// Metric on the projective line: operator norm of the difference of the
/// orthogonal projections onto the two lines.
pub fn rp1_distance(v: ProjectivePoint, w: ProjectivePoint) -> f64 {
    let a = v.unit();
    let b = w.unit();
    // P = a a^T - b b^T is symmetric; op norm = max |eigenvalue|.
    let p11 = a.x * a.x - b.x * b.x;
    let p22 = a.y * a.y - b.y * b.y;
    let p12 = a.x * a.y - b.x * b.y;
    let tr = p11 + p22;
    let disc = ((p11 - p22) * (p11 - p22) + 4.0 * p12 * p12).max(0.0).sqrt();
    let l1 = 0.5 * (tr + disc);
    let l2 = 0.5 * (tr - disc);
    l1.abs().max(l2.abs()).min(1.0)
}

/// Singular value decomposition A = V * diag(alpha1, alpha2) * U with V a
/// proper rotation whose first column lies in the closed upper half-plane
/// (ties at angle zero resolve toward +x), and U orthogonal.
#[derive(Debug, Clone, Copy)]
pub struct Svd2 {
    pub v: Matrix2,
    pub alpha1: f64,
    pub alpha2: f64,
    pub u: Matrix2,
}

impl Svd2 {
    pub fn d(&self) -> Matrix2 {
        Matrix2::diagonal(self.alpha1, self.alpha2)
    }

    pub fn reconstruct(&self) -> Matrix2 {
        self.v.mul(&self.d()).mul(&self.u)
    }

    /// Direction of the major axis, the line of V e1.
    pub fn major_axis(&self) -> ProjectivePoint {
        ProjectivePoint::from_vector(Vec2::new(self.v.a11, self.v.a21))
    }
}

/// Closed-form SVD of an invertible 2x2 matrix.
pub fn svd2(a: &Matrix2) -> Result<Svd2> {
    let det = a.det();
    if !a.is_invertible() {
        return Err(Error::SingularMatrix { det });
    }
    let (alpha1, alpha2) = a.singular_values();

    // Top eigenvector of A A^T: pick the more stable of the two candidate
    // expressions for the eigenvector of the larger eigenvalue.
    let s11 = a.a11 * a.a11 + a.a12 * a.a12;
    let s22 = a.a21 * a.a21 + a.a22 * a.a22;
    let s12 = a.a11 * a.a21 + a.a12 * a.a22;
    let lam1 = alpha1 * alpha1;
    let cand1 = Vec2::new(s12, lam1 - s11);
    let cand2 = Vec2::new(lam1 - s22, s12);
    let mut v1 = if cand1.norm_sq() >= cand2.norm_sq() {
        cand1
    } else {
        cand2
    };
    if v1.norm_sq() == 0.0 {
        // Isotropic case alpha1 == alpha2: any direction works, pick +x.
        v1 = Vec2::new(1.0, 0.0);
    }
    v1 = v1.normalized();
    if v1.y < 0.0 || (v1.y == 0.0 && v1.x < 0.0) {
        v1 = v1.scale(-1.0);
    }
    let v2 = v1.perp();
    let v = Matrix2::new(v1.x, v2.x, v1.y, v2.y);
    // U = D^{-1} V^T A, orthogonal in exact arithmetic.
    let dinv = Matrix2::diagonal(1.0 / alpha1, 1.0 / alpha2);
    let u = dinv.mul(&v.transpose()).mul(a);
    Ok(Svd2 {
        v,
        alpha1,
        alpha2,
        u,
    })
}

/// Major-axis direction of a possibly singular matrix: the top eigendirection
/// of A A^T. Needs a strict relative gap between the eigenvalues but not
/// invertibility, so it stays defined for numerically rank-one products.
pub fn top_direction(a: &Matrix2) -> Result<ProjectivePoint> {
    let s11 = a.a11 * a.a11 + a.a12 * a.a12;
    let s22 = a.a21 * a.a21 + a.a22 * a.a22;
    let s12 = a.a11 * a.a21 + a.a12 * a.a22;
    let tr = s11 + s22;
    let disc = ((s11 - s22) * (s11 - s22) + 4.0 * s12 * s12).max(0.0).sqrt();
    let lam1 = 0.5 * (tr + disc);
    if !(lam1 > 0.0) {
        return Err(Error::SingularMatrix { det: 0.0 });
    }
    let gap = disc / lam1;
    if gap <= EQUAL_SV_TOL {
        return Err(Error::EqualSingularValues { gap });
    }
    let cand1 = Vec2::new(s12, lam1 - s11);
    let cand2 = Vec2::new(lam1 - s22, s12);
    let v = if cand1.norm_sq() >= cand2.norm_sq() {
        cand1
    } else {
        cand2
    };
    Ok(ProjectivePoint::from_vector(v))
}

/// Direction of the major axis of A(unit ball). Requires a strict singular
/// gap; invariant under A -> cA for c > 0.
pub fn major_direction(a: &Matrix2) -> Result<ProjectivePoint> {
    let s = svd2(a)?;
    let gap = (s.alpha1 - s.alpha2) / s.alpha1;
    if gap <= EQUAL_SV_TOL {
        return Err(Error::EqualSingularValues { gap });
    }
    Ok(s.major_axis())
}

/// Invertible affine map x -> Ax + b of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap2 {
    pub linear: Matrix2,
    pub translation: Vec2,
}

impl AffineMap2 {
    pub const IDENTITY: AffineMap2 = AffineMap2 {
        linear: Matrix2::IDENTITY,
        translation: Vec2::ZERO,
    };

    pub fn new(linear: Matrix2, translation: Vec2) -> Self {
        AffineMap2 {
            linear,
            translation,
        }
    }

    pub fn translation_by(v: Vec2) -> Self {
        AffineMap2::new(Matrix2::IDENTITY, v)
    }

    pub fn apply(&self, x: Vec2) -> Vec2 {
        self.linear.apply(x).add(self.translation)
    }

    /// f.compose(g) = f after g, i.e. x -> f(g(x)).
    pub fn compose(&self, g: &AffineMap2) -> AffineMap2 {
        AffineMap2::new(
            self.linear.mul(&g.linear),
            self.linear.apply(g.translation).add(self.translation),
        )
    }

    pub fn inverse(&self) -> Result<AffineMap2> {
        let ainv = self.linear.inverse()?;
        Ok(AffineMap2::new(
            ainv,
            ainv.apply(self.translation).scale(-1.0),
        ))
    }

    /// Fixed point of a contraction, by the closed-form 2x2 solve of
    /// (I - A)x = b. Contraction guarantees I - A is invertible.
    pub fn fixed_point(&self) -> Result<Vec2> {
        let m = Matrix2::IDENTITY.sub(&self.linear);
        Ok(m.inverse()?.apply(self.translation))
    }

    /// Frobenius distance of the 3x3 embedding [[A, b], [0, 1]] from the
    /// identity embedding.
    fn frobenius_from_identity(&self) -> f64 {
        (self.linear.sub(&Matrix2::IDENTITY).frobenius_sq() + self.translation.norm_sq()).sqrt()
    }
}

/// Frobenius distance between the standard 3x3 embeddings of two affine maps.
pub fn norm_distance(f: &AffineMap2, g: &AffineMap2) -> f64 {
    (f.linear.sub(&g.linear).frobenius_sq() + f.translation.sub(g.translation).norm_sq()).sqrt()
}

/// Left-invariant distance rho(g^{-1} f) with
/// rho(h) = ||M(h) - I||_F + ||M(h)^{-1} - I||_F on the 3x3 embedding M.
/// Zero iff f = g; exactly left-invariant in exact arithmetic.
pub fn invariant_distance(f: &AffineMap2, g: &AffineMap2) -> Result<f64> {
    let h = g.inverse()?.compose(f);
    let hinv = h.inverse()?;
    Ok(h.frobenius_from_identity() + hinv.frobenius_from_identity())
}

/// Decomposition of pi_W after an affine map phi: the composition equals
/// (+-scale) * pi_direction + offset as a functional, where direction is the
/// line of A^T w.
#[derive(Debug, Clone, Copy)]
pub struct ProjectedComposition {
    /// ||pi_W compose A||, the operator norm of the composed functional.
    pub scale: f64,
    /// The pullback line spanned by A^T w.
    pub direction: ProjectivePoint,
    /// pi_W(b), the translation seen through the projection.
    pub offset: f64,
}

/// Writes pi_W after phi in the canonical form above.
pub fn projection_of_composition(
    w: ProjectivePoint,
    phi: &AffineMap2,
) -> Result<ProjectedComposition> {
    if !phi.linear.is_invertible() {
        return Err(Error::SingularMatrix {
            det: phi.linear.det(),
        });
    }
    let wu = w.unit();
    let atw = phi.linear.transpose().apply(wu);
    Ok(ProjectedComposition {
        scale: atw.norm(),
        direction: ProjectivePoint::from_vector(atw),
        offset: phi.translation.dot(wu),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn random_matrix(rng: &mut impl Rng) -> Matrix2 {
        Matrix2::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        )
    }

    fn random_invertible(rng: &mut impl Rng) -> Matrix2 {
        loop {
            let m = random_matrix(rng);
            if m.is_invertible() && m.det().abs() > 1e-3 {
                return m;
            }
        }
    }

    #[test]
    fn svd_of_diagonal_power() {
        let a = Matrix2::diagonal(1.0, 2f64.powi(-4));
        let s = svd2(&a).unwrap();
        assert_close(s.alpha1, 1.0, 1e-15);
        assert_close(s.alpha2, 0.0625, 1e-15);
    }

    #[test]
    fn svd_of_rotation_is_isometry() {
        let a = Matrix2::rotation(0.7);
        let s = svd2(&a).unwrap();
        assert_close(s.alpha1, 1.0, 1e-14);
        assert_close(s.alpha2, 1.0, 1e-14);
    }

    #[test]
    fn svd_of_shear_is_golden_ratio() {
        let a = Matrix2::new(1.0, 1.0, 0.0, 1.0);
        let s = svd2(&a).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert_close(s.alpha1, phi, 1e-12);
        assert_close(s.alpha2, 1.0 / phi, 1e-12);
    }

    #[test]
    fn svd_reconstructs_and_matches_det() {
        let mut rng = substream(11, 0);
        for _ in 0..2000 {
            let a = random_invertible(&mut rng);
            let s = svd2(&a).unwrap();
            let r = s.reconstruct();
            let scale = a.frobenius();
            assert!(r.sub(&a).frobenius() <= 1e-12 * scale.max(1.0) * 10.0);
            assert_close(s.alpha1 * s.alpha2, a.det().abs(), 1e-12 * scale * scale);
            // Orthonormality of V and U columns.
            for m in [s.v, s.u] {
                let g = m.transpose().mul(&m);
                assert!(g.sub(&Matrix2::IDENTITY).frobenius() < 1e-12);
            }
        }
    }

    #[test]
    fn operator_norm_matches_brute_force() {
        let mut rng = substream(12, 0);
        for _ in 0..50 {
            let a = random_invertible(&mut rng);
            let mut best: f64 = 0.0;
            for k in 0..1000 {
                let t = k as f64 * std::f64::consts::PI / 1000.0;
                let u = Vec2::new(t.cos(), t.sin());
                best = best.max(a.apply(u).norm());
            }
            assert_close(a.operator_norm(), best, 1e-5 * a.operator_norm());
        }
    }

    #[test]
    fn major_direction_examples() {
        assert_close(
            major_direction(&Matrix2::diagonal(2.0, 1.0)).unwrap().angle(),
            0.0,
            1e-15,
        );
        assert_close(
            major_direction(&Matrix2::diagonal(1.0, 2.0)).unwrap().angle(),
            std::f64::consts::FRAC_PI_2,
            1e-15,
        );
        let a = Matrix2::new(1.0, 1.0, 0.0, 1.0);
        let expected = ((5f64.sqrt() - 1.0) / 2.0).atan();
        assert_close(major_direction(&a).unwrap().angle(), expected, 1e-12);
    }

    #[test]
    fn major_direction_rejects_isometries() {
        let err = major_direction(&Matrix2::rotation(0.3)).unwrap_err();
        assert!(matches!(err, Error::EqualSingularValues { .. }));
    }

    #[test]
    fn major_direction_scale_invariant() {
        let mut rng = substream(13, 0);
        for _ in 0..500 {
            let a = random_invertible(&mut rng);
            if let Ok(d) = major_direction(&a) {
                let d2 = major_direction(&a.scaled(3.7)).unwrap();
                assert!(rp1_distance(d, d2) < 1e-10);
            }
        }
    }

    #[test]
    fn rp1_distance_examples() {
        let e1 = ProjectivePoint::E1;
        let e2 = ProjectivePoint::e2();
        let diag = ProjectivePoint::from_angle(std::f64::consts::FRAC_PI_4);
        assert_eq!(rp1_distance(e1, e1), 0.0);
        assert_close(rp1_distance(e1, e2), 1.0, 1e-15);
        assert_close(rp1_distance(e1, diag), std::f64::consts::SQRT_2 / 2.0, 1e-12);
    }

    #[test]
    fn rp1_distance_equals_sine_of_angle() {
        let mut rng = substream(14, 0);
        for _ in 0..2000 {
            let a = ProjectivePoint::from_angle(rng.gen_range(0.0..std::f64::consts::PI));
            let b = ProjectivePoint::from_angle(rng.gen_range(0.0..std::f64::consts::PI));
            let sine = (a.angle() - b.angle()).sin().abs();
            assert_close(rp1_distance(a, b), sine, 1e-10);
        }
    }

    #[test]
    fn projection_of_composition_examples() {
        let e1 = ProjectivePoint::E1;
        let id = AffineMap2::IDENTITY;
        let p = projection_of_composition(e1, &id).unwrap();
        assert_close(p.scale, 1.0, 1e-15);
        assert_close(p.offset, 0.0, 1e-15);
        assert!(rp1_distance(p.direction, e1) < 1e-15);

        let phi = AffineMap2::new(Matrix2::diagonal(2.0, 3.0), Vec2::ZERO);
        let p = projection_of_composition(e1, &phi).unwrap();
        assert_close(p.scale, 2.0, 1e-15);
        assert!(rp1_distance(p.direction, e1) < 1e-15);
        assert_close(p.offset, 0.0, 1e-15);
    }

    // The composed functional must agree with brute force maximization of
    // |pi_W(A u)| over the unit circle, and reconstruct pi_W(phi(x)).
    #[test]
    fn projection_of_composition_matches_brute_force() {
        let w = ProjectivePoint::E1;
        let phi = AffineMap2::new(Matrix2::new(1.0, 1.0, 0.0, 1.0), Vec2::new(0.0, 1.0));
        let p = projection_of_composition(w, &phi).unwrap();
        let wu = w.unit();
        let mut best: f64 = 0.0;
        for k in 0..10_000 {
            let t = k as f64 * std::f64::consts::PI / 10_000.0;
            let u = Vec2::new(t.cos(), t.sin());
            best = best.max(phi.linear.apply(u).dot(wu).abs());
        }
        assert_close(p.scale, best, 1e-7);
        assert_close(p.scale, std::f64::consts::SQRT_2, 1e-12);
        assert_close(p.offset, 0.0, 1e-15);
        // Direction is the line of A^T w = (1, 1).
        assert!(rp1_distance(p.direction, ProjectivePoint::from_vector(Vec2::new(1.0, 1.0))) < 1e-12);

        // Functional identity on sample points: the sign depends on how the
        // canonical representative of the pullback line is oriented.
        let atw = phi.linear.transpose().apply(wu);
        let sign = atw.dot(p.direction.unit()).signum();
        let mut rng = substream(15, 0);
        for _ in 0..100 {
            let x = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let lhs = phi.apply(x).dot(wu);
            let rhs = sign * p.scale * x.dot(p.direction.unit()) + p.offset;
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    // Norm bound of the projected composition whenever L(A) is defined.
    #[test]
    fn projection_norm_sandwich() {
        let mut rng = substream(16, 0);
        for _ in 0..500 {
            let a = random_invertible(&mut rng);
            let l = match major_direction(&a) {
                Ok(l) => l,
                Err(_) => continue,
            };
            let w = ProjectivePoint::from_angle(rng.gen_range(0.0..std::f64::consts::PI));
            let phi = AffineMap2::new(a, Vec2::ZERO);
            let p = projection_of_composition(w, &phi).unwrap();
            let norm = a.operator_norm();
            let sine = (l.angle() - w.perp().angle()).sin().abs();
            assert!(p.scale <= norm * (1.0 + 1e-12));
            assert!(p.scale >= norm * sine - 1e-12);
        }
    }

    #[test]
    fn compose_and_invert() {
        let f = AffineMap2::translation_by(Vec2::new(1.0, 2.0));
        let g = AffineMap2::translation_by(Vec2::new(3.0, 4.0));
        let fg = f.compose(&g);
        assert_eq!(fg.translation, Vec2::new(4.0, 6.0));

        let mut rng = substream(17, 0);
        for _ in 0..200 {
            let f = AffineMap2::new(random_invertible(&mut rng), Vec2::new(rng.gen(), rng.gen()));
            let finv = f.inverse().unwrap();
            let id = f.compose(&finv);
            assert!(norm_distance(&id, &AffineMap2::IDENTITY) < 1e-12);
            let x = Vec2::new(rng.gen(), rng.gen());
            let y = f.compose(&finv).apply(x);
            assert!(y.sub(x).norm() < 1e-12);
        }
    }

    #[test]
    fn norm_distance_examples() {
        let id = AffineMap2::IDENTITY;
        assert_eq!(norm_distance(&id, &id), 0.0);
        let t = AffineMap2::translation_by(Vec2::new(3.0, 4.0));
        assert_close(norm_distance(&id, &t), 5.0, 1e-15);
        let d = AffineMap2::new(Matrix2::diagonal(2.0, 1.0), Vec2::ZERO);
        assert_close(norm_distance(&id, &d), 1.0, 1e-15);
    }

    #[test]
    fn invariant_distance_examples() {
        let id = AffineMap2::IDENTITY;
        assert_eq!(invariant_distance(&id, &id).unwrap(), 0.0);
        let f = AffineMap2::new(Matrix2::diagonal(2.0, 2.0), Vec2::ZERO);
        let expected = 2f64.sqrt() + 2f64.sqrt() / 2.0;
        assert_close(invariant_distance(&f, &id).unwrap(), expected, 1e-12);
    }

    fn random_near_identity(rng: &mut impl Rng) -> AffineMap2 {
        let a = Matrix2::new(
            1.0 + rng.gen_range(-0.2..0.2),
            rng.gen_range(-0.2..0.2),
            rng.gen_range(-0.2..0.2),
            1.0 + rng.gen_range(-0.2..0.2),
        );
        AffineMap2::new(a, Vec2::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)))
    }

    #[test]
    fn invariant_distance_left_invariance() {
        let mut rng = substream(18, 0);
        for _ in 0..2000 {
            let q = AffineMap2::new(random_invertible(&mut rng), Vec2::new(rng.gen(), rng.gen()));
            let f = random_near_identity(&mut rng);
            let g = random_near_identity(&mut rng);
            let d1 = invariant_distance(&q.compose(&f), &q.compose(&g)).unwrap();
            let d2 = invariant_distance(&f, &g).unwrap();
            assert!((d1 - d2).abs() < 1e-9, "{d1} vs {d2}");
        }
    }

    // Bounded-set quasi-triangle inequality with C <= 4 near the identity.
    #[test]
    fn invariant_distance_quasi_triangle() {
        let mut rng = substream(19, 0);
        let mut checked = 0;
        while checked < 10_000 {
            let f = random_near_identity(&mut rng);
            let g = random_near_identity(&mut rng);
            let h = random_near_identity(&mut rng);
            let id = AffineMap2::IDENTITY;
            if invariant_distance(&f, &id).unwrap() > 2.0
                || invariant_distance(&g, &id).unwrap() > 2.0
                || invariant_distance(&h, &id).unwrap() > 2.0
            {
                continue;
            }
            let dfh = invariant_distance(&f, &h).unwrap();
            let dfg = invariant_distance(&f, &g).unwrap();
            let dgh = invariant_distance(&g, &h).unwrap();
            assert!(dfh <= 4.0 * (dfg + dgh) + 1e-12);
            checked += 1;
        }
    }
}
