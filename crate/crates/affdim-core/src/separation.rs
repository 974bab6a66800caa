//! Exponential-separation diagnostics: exact minimum pairwise distance among
//! level-n cylinder maps via grid-hash closest-pair search, coincidence
//! detection with deduplication, and slope fitting of the decay rate.

use crate::affine::AffineMap2;
use crate::ifs::{CylinderWord, IfsSystem};
use crate::rng::substream;
use crate::{Error, Result};
use rand::Rng;
use serde::Serialize;
use std::collections::HashMap;

/// Distance below which two cylinder maps count as the same atom
/// (absolute, after normalization to a unit-diameter attractor box).
pub const COINCIDENCE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeparationMode {
    AllPairs,
    DistinctMaps,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationRecord {
    pub n: u32,
    pub word_count: u64,
    /// Number of distinct cylinder maps after merging coincidences.
    pub distinct_count: u64,
    /// Minimum over all pairs of distinct words (None for single words).
    pub min_distance: Option<f64>,
    pub argmin: Option<(CylinderWord, CylinderWord)>,
    /// Minimum over pairs of distinct map classes, when coincidences exist.
    pub min_distance_distinct: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub mode: SeparationMode,
    pub coincidence: bool,
    pub records: Vec<SeparationRecord>,
    /// Least-squares slope of log2(min distance) over n >= 3, in the
    /// effective mode.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Metric used for all distances.
    pub metric: &'static str,
}

fn map_coords(phi: &AffineMap2) -> [f64; 6] {
    [
        phi.linear.a11,
        phi.linear.a12,
        phi.linear.a21,
        phi.linear.a22,
        phi.translation.x,
        phi.translation.y,
    ]
}

fn coord_distance(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    let mut acc = 0.0;
    for i in 0..6 {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc.sqrt()
}

/// Conjugates the system so that the attractor bounding box is centered at
/// the origin with unit diameter; coincidences and relative geometry are
/// preserved.
pub fn normalize_system(system: &IfsSystem) -> Result<IfsSystem> {
    let (lo, hi) = system.attractor_bounding_box()?;
    let center = lo.add(hi).scale(0.5);
    let diam = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
    let scale = 1.0 / diam;
    let maps = system
        .maps()
        .iter()
        .map(|m| {
            // T phi T^{-1} with T(x) = (x - center) / diam.
            let b = m
                .linear
                .apply(center)
                .add(m.translation)
                .sub(center)
                .scale(scale);
            AffineMap2::new(m.linear, b)
        })
        .collect();
    IfsSystem::new(maps, system.probs().to_vec(), None)
}

/// All cylinder maps of length n as 6-vectors, in lexicographic word order.
pub fn cylinder_map_coordinates(system: &IfsSystem, n: u32, cap: u64) -> Result<Vec<[f64; 6]>> {
    let k = system.alphabet_len() as u64;
    let count = k
        .checked_pow(n)
        .filter(|&c| c <= cap)
        .ok_or(Error::BudgetExceeded {
            needed: k.saturating_pow(n),
            cap,
        })?;
    if count > cap {
        return Err(Error::BudgetExceeded { needed: count, cap });
    }
    let mut maps: Vec<AffineMap2> = vec![AffineMap2::IDENTITY];
    for _ in 0..n {
        let mut next = Vec::with_capacity(maps.len() * system.alphabet_len());
        for phi in &maps {
            for m in system.maps() {
                next.push(phi.compose(m));
            }
        }
        maps = next;
    }
    Ok(maps.iter().map(map_coords).collect())
}

fn word_of_index(mut idx: u64, n: u32, k: u64) -> CylinderWord {
    let mut word = vec![0u8; n as usize];
    for slot in word.iter_mut().rev() {
        *slot = (idx % k) as u8;
        idx /= k;
    }
    word
}

fn grid_key(coords: &[f64; 6], cell: f64) -> [i64; 6] {
    let mut key = [0i64; 6];
    for i in 0..6 {
        key[i] = (coords[i] / cell).floor() as i64;
    }
    key
}

/// Exact closest pair over the 6-vectors by grid hashing: any pair at
/// distance <= cell size lies in adjacent cells, and the cell size is always
/// an upper bound for the true minimum, so one scan is exact. The cell is
/// shrunk and the scan repeated while that speeds the search up.
pub fn closest_pair(points: &[[f64; 6]]) -> Option<(f64, usize, usize)> {
    if points.len() < 2 {
        return None;
    }
    // Initial upper bound: consecutive pairs plus a random sample.
    let mut best = (f64::INFINITY, 0usize, 1usize);
    let consider = |d: f64, i: usize, j: usize, best: &mut (f64, usize, usize)| {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        if d < best.0 || (d == best.0 && (lo, hi) < (best.1, best.2)) {
            *best = (d, lo, hi);
        }
    };
    for i in 0..points.len() - 1 {
        consider(
            coord_distance(&points[i], &points[i + 1]),
            i,
            i + 1,
            &mut best,
        );
    }
    let mut rng = substream(0x5eed_c1052e57, 0);
    for _ in 0..1024 {
        let i = rng.gen_range(0..points.len());
        let j = rng.gen_range(0..points.len());
        if i != j {
            consider(coord_distance(&points[i], &points[j]), i, j, &mut best);
        }
    }
    if best.0 == 0.0 {
        return Some(best);
    }
    let mut cell = best.0;
    loop {
        let mut grid: HashMap<[i64; 6], Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            grid.entry(grid_key(p, cell)).or_default().push(i as u32);
        }
        let before = best.0;
        for (i, p) in points.iter().enumerate() {
            let base = grid_key(p, cell);
            // 3^6 neighborhood.
            let mut offsets = [0i64; 6];
            'outer: loop {
                let mut key = base;
                for d in 0..6 {
                    key[d] += offsets[d];
                }
                if let Some(bucket) = grid.get(&key) {
                    for &j in bucket {
                        let j = j as usize;
                        if j > i {
                            consider(coord_distance(p, &points[j]), i, j, &mut best);
                        }
                    }
                }
                for d in 0..6 {
                    offsets[d] += 1;
                    if offsets[d] <= 1 {
                        continue 'outer;
                    }
                    offsets[d] = -1;
                }
                break;
            }
        }
        if best.0 == 0.0 || best.0 >= cell / 2.0 || best.0 >= before {
            return Some(best);
        }
        cell = best.0;
    }
}

/// O(k^2) reference used to cross-check the grid search.
pub fn brute_force_min_pair(points: &[[f64; 6]]) -> Option<(f64, usize, usize)> {
    if points.len() < 2 {
        return None;
    }
    let mut best = (f64::INFINITY, 0usize, 1usize);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = coord_distance(&points[i], &points[j]);
            if d < best.0 {
                best = (d, i, j);
            }
        }
    }
    Some(best)
}

/// Exact minimum norm distance between distinct length-n cylinder maps of
/// the normalized system, with the achieving word pair.
pub fn min_pair_distance(
    system: &IfsSystem,
    n: u32,
    cap: u64,
) -> Result<Option<(f64, CylinderWord, CylinderWord)>> {
    let normalized = normalize_system(system)?;
    let points = cylinder_map_coordinates(&normalized, n, cap)?;
    let k = system.alphabet_len() as u64;
    Ok(closest_pair(&points).map(|(d, i, j)| {
        (
            d,
            word_of_index(i as u64, n, k),
            word_of_index(j as u64, n, k),
        )
    }))
}

/// Greedy clustering of coincident maps; returns one representative index
/// per class, in index order.
fn distinct_classes(points: &[[f64; 6]], tol: f64) -> Vec<u32> {
    let mut grid: HashMap<[i64; 6], Vec<u32>> = HashMap::new();
    let mut reps: Vec<u32> = Vec::new();
    let cell = tol.max(1e-300);
    for (i, p) in points.iter().enumerate() {
        let base = grid_key(p, cell);
        let mut found = false;
        let mut offsets = [0i64; 6];
        'outer: loop {
            let mut key = base;
            for d in 0..6 {
                key[d] += offsets[d];
            }
            if let Some(bucket) = grid.get(&key) {
                for &r in bucket {
                    if coord_distance(p, &points[r as usize]) < tol {
                        found = true;
                        break;
                    }
                }
            }
            if found {
                break;
            }
            for d in 0..6 {
                offsets[d] += 1;
                if offsets[d] <= 1 {
                    continue 'outer;
                }
                offsets[d] = -1;
            }
            break;
        }
        if !found {
            grid.entry(base).or_default().push(i as u32);
            reps.push(i as u32);
        }
    }
    reps
}

/// Records for n = 1..=n_max with a least-squares fit of the decay slope.
/// When coincidences are detected the report switches to distinct-map mode:
/// exact overlaps are merged before measuring the minimum.
pub fn separation_report(system: &IfsSystem, n_max: u32, cap: u64) -> Result<SeparationReport> {
    let normalized = normalize_system(system)?;
    let k = system.alphabet_len() as u64;
    let mut records = Vec::new();
    let mut coincidence = false;
    for n in 1..=n_max {
        let points = cylinder_map_coordinates(&normalized, n, cap)?;
        let all = closest_pair(&points);
        let (min_distance, argmin) = match all {
            Some((d, i, j)) => (
                Some(d),
                Some((
                    word_of_index(i as u64, n, k),
                    word_of_index(j as u64, n, k),
                )),
            ),
            None => (None, None),
        };
        let mut distinct_count = points.len() as u64;
        let mut min_distinct = min_distance;
        if let Some(d) = min_distance {
            if d < COINCIDENCE_TOL {
                coincidence = true;
            }
        }
        if coincidence {
            let reps = distinct_classes(&points, COINCIDENCE_TOL);
            distinct_count = reps.len() as u64;
            let rep_points: Vec<[f64; 6]> = reps.iter().map(|&r| points[r as usize]).collect();
            min_distinct = closest_pair(&rep_points).map(|(d, _, _)| d);
        }
        records.push(SeparationRecord {
            n,
            word_count: points.len() as u64,
            distinct_count,
            min_distance,
            argmin,
            min_distance_distinct: min_distinct,
        });
    }
    let mode = if coincidence {
        SeparationMode::DistinctMaps
    } else {
        SeparationMode::AllPairs
    };
    // Slope of log2(min) over n >= 3 in the effective mode.
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.n >= 3)
        .filter_map(|r| {
            let d = if coincidence {
                r.min_distance_distinct
            } else {
                r.min_distance
            };
            d.filter(|&d| d > 0.0).map(|d| (r.n as f64, d.log2()))
        })
        .collect();
    let (slope, intercept) = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        (Some(sxy / sxx), Some(my - sxy / sxx * mx))
    } else {
        (None, None)
    };
    Ok(SeparationReport {
        mode,
        coincidence,
        records,
        slope,
        intercept,
        metric: "frobenius-3x3-embedding",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::{norm_distance, Matrix2, Vec2};
    use crate::fixtures;

    fn dyadic_pair() -> IfsSystem {
        // Two 1D-like homotheties of ratio 1/2 with offsets 0 and 1/2,
        // embedded with second-coordinate ratio 1/3.
        IfsSystem::new(
            vec![
                AffineMap2::new(Matrix2::diagonal(0.5, 1.0 / 3.0), Vec2::ZERO),
                AffineMap2::new(Matrix2::diagonal(0.5, 1.0 / 3.0), Vec2::new(0.5, 0.0)),
            ],
            vec![0.5, 0.5],
            None,
        )
        .unwrap()
    }

    #[test]
    fn level_one_distance_is_direct() {
        let system = dyadic_pair();
        let normalized = normalize_system(&system).unwrap();
        let expected = norm_distance(&normalized.maps()[0], &normalized.maps()[1]);
        let (d, a, b) = min_pair_distance(&system, 1, 1 << 20).unwrap().unwrap();
        assert!((d - expected).abs() < 1e-15);
        assert_eq!((a, b), (vec![0], vec![1]));
    }

    #[test]
    fn single_map_has_no_pairs() {
        let system = IfsSystem::new(
            vec![AffineMap2::new(
                Matrix2::diagonal(0.5, 0.25),
                Vec2::new(0.1, 0.1),
            )],
            vec![1.0],
            None,
        )
        .unwrap();
        assert!(min_pair_distance(&system, 3, 1 << 20).unwrap().is_none());
        let report = separation_report(&system, 4, 1 << 20).unwrap();
        assert!(report.records.iter().all(|r| r.min_distance.is_none()));
        assert!(report.slope.is_none());
    }

    #[test]
    fn grid_matches_brute_force() {
        for (system, n_levels) in [
            (fixtures::f1(), 9u32),
            (fixtures::f2(), 6),
            (fixtures::f3(), 5),
            (dyadic_pair(), 10),
        ] {
            let normalized = normalize_system(&system).unwrap();
            for n in 1..=n_levels {
                let points = cylinder_map_coordinates(&normalized, n, 1 << 14).unwrap();
                if points.len() > (1 << 12) {
                    break;
                }
                let grid = closest_pair(&points).unwrap();
                let brute = brute_force_min_pair(&points).unwrap();
                assert_eq!(
                    grid.0, brute.0,
                    "n = {n}: grid {} vs brute {}",
                    grid.0, brute.0
                );
            }
        }
    }

    #[test]
    fn dyadic_fixture_has_slope_minus_one() {
        let report = separation_report(&dyadic_pair(), 9, 1 << 20).unwrap();
        assert!(!report.coincidence);
        let slope = report.slope.unwrap();
        assert!((slope + 1.0).abs() <= 0.3, "slope {slope}");
        // The minimum at each level is exactly 2^-n of the normalized scale.
        for r in &report.records {
            let d = r.min_distance.unwrap();
            let expected = f64::exp2(-(r.n as f64));
            assert!(
                (d / expected - 1.0).abs() < 1e-9,
                "level {}: {} vs {}",
                r.n,
                d,
                expected
            );
        }
    }

    #[test]
    fn f1_separates_with_finite_slope() {
        let report = separation_report(&fixtures::f1(), 9, 1 << 20).unwrap();
        assert!(!report.coincidence);
        assert_eq!(report.mode, SeparationMode::AllPairs);
        let slope = report.slope.unwrap();
        assert!(slope > -5.0 && slope < 0.0, "slope {slope}");
    }

    #[test]
    fn commuting_pair_triggers_mode_switch() {
        // Parameters chosen so that the two parabola-preserving maps
        // commute (t0 (1 - s1) = t1 (1 - s0)), verified by the parameter
        // law: both orders compose to (1/8, 7/12).
        let (s0, t0) = (0.5, 1.0 / 3.0);
        let (s1, t1) = (0.25, 0.5);
        let composed = fixtures::parabola_map(s0, t0).compose(&fixtures::parabola_map(s1, t1));
        let reversed = fixtures::parabola_map(s1, t1).compose(&fixtures::parabola_map(s0, t0));
        assert!(norm_distance(&composed, &reversed) < 1e-15);
        assert!(norm_distance(&composed, &fixtures::parabola_map(s0 * s1, s0 * t1 + t0)) < 1e-15);

        let system = IfsSystem::new(
            vec![fixtures::parabola_map(s0, t0), fixtures::parabola_map(s1, t1)],
            vec![0.5, 0.5],
            None,
        )
        .unwrap();
        let report = separation_report(&system, 5, 1 << 20).unwrap();
        assert!(report.coincidence);
        assert_eq!(report.mode, SeparationMode::DistinctMaps);
        let level2 = &report.records[1];
        assert_eq!(level2.n, 2);
        assert!(level2.min_distance.unwrap() < COINCIDENCE_TOL);
        assert_eq!(level2.distinct_count, 3);
        assert!(level2.min_distance_distinct.unwrap() > COINCIDENCE_TOL);
        // The distinct-mode slope is still finite.
        assert!(report.slope.is_some());
    }

    #[test]
    fn budget_cap_is_enforced() {
        let err = separation_report(&fixtures::f3(), 12, 1 << 10).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

}
