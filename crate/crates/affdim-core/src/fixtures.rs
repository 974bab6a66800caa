//! Built-in example systems used throughout the test suites and the CLI.

use crate::affine::{AffineMap2, Matrix2, Vec2};
use crate::ifs::IfsSystem;

/// An affine map preserving the parabola y = x^2:
/// (x, y) -> (s x + t, 2 s t x + s^2 y + t^2).
pub fn parabola_map(s: f64, t: f64) -> AffineMap2 {
    AffineMap2::new(
        Matrix2::new(s, 0.0, 2.0 * s * t, s * s),
        Vec2::new(t, t * t),
    )
}

fn rotated_contraction(theta: f64, b: Vec2) -> AffineMap2 {
    AffineMap2::new(
        Matrix2::rotation(theta).mul(&Matrix2::diagonal(0.3, 0.2)),
        b,
    )
}

/// F1: non-conformal, totally irreducible, strongly separated pair.
pub fn f1() -> IfsSystem {
    IfsSystem::new(
        vec![
            rotated_contraction(0.7, Vec2::ZERO),
            rotated_contraction(2.1, Vec2::new(0.6, 0.1)),
        ],
        vec![0.5, 0.5],
        Some("F1".into()),
    )
    .expect("F1 is well formed")
}

/// F2: triangular parabola-preserving triple with s = 1/2 and
/// t in {0, 0.53, 1}; the attractor lies on y = x^2.
pub fn f2() -> IfsSystem {
    IfsSystem::new(
        vec![
            parabola_map(0.5, 0.0),
            parabola_map(0.5, 0.53),
            parabola_map(0.5, 1.0),
        ],
        vec![1.0 / 3.0; 3],
        Some("F2".into()),
    )
    .expect("F2 is well formed")
}

/// F3: diagonal carpet control; fails total irreducibility.
pub fn f3() -> IfsSystem {
    let linear = Matrix2::diagonal(0.5, 0.25);
    IfsSystem::new(
        vec![
            AffineMap2::new(linear, Vec2::ZERO),
            AffineMap2::new(linear, Vec2::new(0.5, 0.0)),
            AffineMap2::new(linear, Vec2::new(0.0, 0.75)),
            AffineMap2::new(linear, Vec2::new(0.5, 0.75)),
        ],
        vec![0.25; 4],
        Some("F3".into()),
    )
    .expect("F3 is well formed")
}

/// F4: overlapping irreducible control. F1's linear parts with translations
/// (0, 0) and (0.35, 0.05), extended by the composition of the two maps as a
/// third generator. The semigroup relation phi2 = phi0 phi1 makes every
/// point of the third cylinder doubly coded, so the coding map is far from
/// injective while the system stays totally irreducible and non-conformal.
pub fn f4() -> IfsSystem {
    let m0 = rotated_contraction(0.7, Vec2::ZERO);
    let m1 = rotated_contraction(2.1, Vec2::new(0.35, 0.05));
    let m2 = m0.compose(&m1);
    IfsSystem::new(vec![m0, m1, m2], vec![1.0 / 3.0; 3], Some("F4".into()))
        .expect("F4 is well formed")
}

pub const FIXTURE_NAMES: [&str; 4] = ["F1", "F2", "F3", "F4"];

pub fn by_name(name: &str) -> Option<IfsSystem> {
    match name.to_ascii_uppercase().as_str() {
        "F1" => Some(f1()),
        "F2" => Some(f2()),
        "F3" => Some(f3()),
        "F4" => Some(f4()),
        _ => None,
    }
}
