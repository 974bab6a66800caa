//! The self-affine system: validation of the standing assumptions, cylinder
//! words, the diameter/width stopping-time partitions, random-word samplers,
//! and coding-map sampling of the invariant measure.

use crate::affine::{AffineMap2, Vec2};
use crate::measure::PointCloud;
use crate::rng::{cumulative_weights, kahan_sum, par_map_indexed, search_cumulative, substream};
use crate::{Error, Result};
use rand::Rng;
use serde::Serialize;

/// A finite word over the alphabet of map indices.
pub type CylinderWord = Vec<u8>;

/// Which stopping rule (if any) drives a random word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordKind {
    /// Fixed length n, each symbol independent with law p.
    U,
    /// Stop when the largest singular value of the composed linear part
    /// first drops to 2^-n.
    I,
    /// Stop when the smallest singular value first drops to 2^-n.
    K,
}

/// A system of invertible affine contractions with weights.
///
/// Construction enforces what every downstream routine needs to terminate:
/// at least one map, invertible linear parts, strict contraction, strictly
/// positive finite weights. The remaining standing assumptions (two or more
/// maps, weights summing to one, no common fixed point) are reported by
/// [`IfsSystem::validate`] so that degenerate single-map systems remain
/// usable for diagnostics.
#[derive(Debug, Clone)]
pub struct IfsSystem {
    maps: Vec<AffineMap2>,
    probs: Vec<f64>,
    name: Option<String>,
    contraction: ContractionCertificate,
}

/// Witness that all sufficiently long compositions contract: every product
/// of `length` maps has largest singular value `worst_alpha1` < 1. Single
/// maps may expand (operator norm above one) as long as products settle
/// down, which is what the coding map needs to converge.
#[derive(Debug, Clone, Copy)]
pub struct ContractionCertificate {
    pub length: u32,
    pub worst_alpha1: f64,
}

fn certify_contraction(maps: &[AffineMap2]) -> Result<ContractionCertificate> {
    let mut products: Vec<Matrix2x2Holder> = vec![Matrix2x2Holder(crate::affine::Matrix2::IDENTITY)];
    for length in 1..=10u32 {
        if products.len().saturating_mul(maps.len()) > (1 << 18) {
            return Err(Error::DegenerateSystem {
                reason: format!(
                    "could not certify eventual contraction within the product budget (length {length})"
                ),
            });
        }
        let mut next = Vec::with_capacity(products.len() * maps.len());
        for p in &products {
            for m in maps {
                next.push(Matrix2x2Holder(p.0.mul(&m.linear)));
            }
        }
        products = next;
        let worst = products
            .iter()
            .map(|p| p.0.operator_norm())
            .fold(0.0f64, f64::max);
        if worst < 1.0 {
            return Ok(ContractionCertificate {
                length,
                worst_alpha1: worst,
            });
        }
    }
    Err(Error::DegenerateSystem {
        reason: "products of length up to 10 never contract; system is not an IFS".into(),
    })
}

struct Matrix2x2Holder(crate::affine::Matrix2);

#[derive(Debug, Clone, Serialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    pub all_passed: bool,
}

/// One sampled point of the attractor together with the coding prefix that
/// produced it.
#[derive(Debug, Clone)]
pub struct CodedSample {
    pub point: Vec2,
    pub word: CylinderWord,
}

impl IfsSystem {
    pub fn new(maps: Vec<AffineMap2>, probs: Vec<f64>, name: Option<String>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::DegenerateSystem {
                reason: "system needs at least one map".into(),
            });
        }
        if maps.len() > 256 {
            return Err(Error::DegenerateSystem {
                reason: "alphabet larger than 256 symbols is unsupported".into(),
            });
        }
        if probs.len() != maps.len() {
            return Err(Error::InvalidProbabilityVector {
                reason: format!("{} weights for {} maps", probs.len(), maps.len()),
            });
        }
        if probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidProbabilityVector {
                reason: "weights must be strictly positive and finite".into(),
            });
        }
        for (i, m) in maps.iter().enumerate() {
            if !m.linear.is_invertible() {
                return Err(Error::DegenerateSystem {
                    reason: format!("map {i} has a singular linear part"),
                });
            }
        }
        let contraction = certify_contraction(&maps)?;
        Ok(IfsSystem {
            maps,
            probs,
            name,
            contraction,
        })
    }

    pub fn maps(&self) -> &[AffineMap2] {
        &self.maps
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn alphabet_len(&self) -> usize {
        self.maps.len()
    }

    pub fn contraction_certificate(&self) -> ContractionCertificate {
        self.contraction
    }

    /// Weights normalized to sum exactly to one.
    pub fn normalized_probs(&self) -> Vec<f64> {
        let total = kahan_sum(self.probs.iter().copied());
        self.probs.iter().map(|&p| p / total).collect()
    }

    /// Report-style check of the standing assumptions.
    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();
        let k = self.maps.len();
        checks.push(ValidationCheck {
            name: "alphabet_size".into(),
            passed: k >= 2,
            detail: format!("{k} maps"),
        });
        let sum: f64 = kahan_sum(self.probs.iter().copied());
        checks.push(ValidationCheck {
            name: "probability_sum".into(),
            passed: (sum - 1.0).abs() <= 1e-12,
            detail: format!("sum = {sum}"),
        });
        checks.push(ValidationCheck {
            name: "probabilities_positive".into(),
            passed: self.probs.iter().all(|&p| p > 0.0),
            detail: format!("min = {:e}", self.probs.iter().cloned().fold(f64::INFINITY, f64::min)),
        });
        let worst_alpha = self
            .maps
            .iter()
            .map(|m| m.linear.operator_norm())
            .fold(0.0f64, f64::max);
        checks.push(ValidationCheck {
            name: "contraction".into(),
            passed: self.contraction.worst_alpha1 < 1.0,
            detail: format!(
                "products of length {} have max alpha1 = {:.6}; max per-map alpha1 = {worst_alpha:.6}",
                self.contraction.length, self.contraction.worst_alpha1
            ),
        });
        let worst_det = self
            .maps
            .iter()
            .map(|m| m.linear.det().abs())
            .fold(f64::INFINITY, f64::min);
        checks.push(ValidationCheck {
            name: "invertibility".into(),
            passed: self.maps.iter().all(|m| m.linear.is_invertible()),
            detail: format!("min |det| = {worst_det:e}"),
        });
        // Common fixed point: the fixed point of map 0 must be moved by some
        // other map.
        let fixed0 = self.maps[0].fixed_point();
        let (passed, detail) = match fixed0 {
            Ok(x0) => {
                if k == 1 {
                    (false, "single-map system fixes its own fixed point".into())
                } else {
                    let max_move = self
                        .maps
                        .iter()
                        .map(|m| m.apply(x0).sub(x0).norm())
                        .fold(0.0f64, f64::max);
                    (
                        max_move > 1e-10,
                        format!("fixed point of map 0 = ({}, {}), max displacement {max_move:e}", x0.x, x0.y),
                    )
                }
            }
            Err(e) => (false, format!("fixed point solve failed: {e}")),
        };
        checks.push(ValidationCheck {
            name: "no_common_fixed_point".into(),
            passed,
            detail,
        });
        let all_passed = checks.iter().all(|c| c.passed);
        ValidationReport { checks, all_passed }
    }

    /// Left-to-right composition of the maps named by the word.
    pub fn compose_word(&self, word: &[u8]) -> Result<AffineMap2> {
        let mut phi = AffineMap2::IDENTITY;
        for &s in word {
            let s = s as usize;
            if s >= self.maps.len() {
                return Err(Error::IndexOutOfRange {
                    symbol: s,
                    alphabet: self.maps.len(),
                });
            }
            phi = phi.compose(&self.maps[s]);
        }
        Ok(phi)
    }

    /// Product of the (normalized) weights along the word.
    pub fn word_weight(&self, word: &[u8]) -> f64 {
        let probs = self.normalized_probs();
        word.iter().map(|&s| probs[s as usize]).product()
    }

    fn enumerate_stopping(
        &self,
        level: u32,
        cap: u64,
        width: bool,
    ) -> Result<Vec<CylinderWord>> {
        let threshold = f64::exp2(-(level as f64));
        let mut out: Vec<CylinderWord> = Vec::new();
        // Depth-first in lexicographic symbol order.
        let mut stack: Vec<(CylinderWord, AffineMap2)> = vec![(Vec::new(), AffineMap2::IDENTITY)];
        while let Some((word, phi)) = stack.pop() {
            for s in (0..self.maps.len() as u8).rev() {
                let child = phi.compose(&self.maps[s as usize]);
                let (a1, a2) = child.linear.singular_values();
                let value = if width { a2 } else { a1 };
                let mut w = word.clone();
                w.push(s);
                if value <= threshold {
                    out.push(w);
                    if out.len() as u64 > cap {
                        return Err(Error::BudgetExceeded {
                            needed: out.len() as u64,
                            cap,
                        });
                    }
                } else {
                    stack.push((w, child));
                }
            }
        }
        // The DFS above emits in reverse stack order within a node; restore
        // lexicographic order deterministically.
        out.sort_unstable();
        Ok(out)
    }

    /// The partition of words stopped when the cylinder diameter alpha1
    /// first drops to 2^-n.
    pub fn enumerate_psi(&self, n: u32, cap: u64) -> Result<Vec<CylinderWord>> {
        self.enumerate_stopping(n, cap, false)
    }

    /// The partition of words stopped when the cylinder width alpha2 first
    /// drops to 2^-n.
    pub fn enumerate_upsilon(&self, n: u32, cap: u64) -> Result<Vec<CylinderWord>> {
        self.enumerate_stopping(n, cap, true)
    }

    /// Draws one random word without enumerating the partition: the p-random
    /// walk is followed until the requested stopping rule fires.
    pub fn sample_word(&self, kind: WordKind, n: u32, seed: u64) -> CylinderWord {
        let mut rng = substream(seed, 0);
        self.sample_word_with(&mut rng, kind, n)
    }

    /// As [`IfsSystem::sample_word`] with a caller-provided stream.
    pub fn sample_word_with(&self, rng: &mut impl Rng, kind: WordKind, n: u32) -> CylinderWord {
        let probs = self.normalized_probs();
        let cum = cumulative_weights(&probs);
        let threshold = f64::exp2(-(n as f64));
        let mut word = Vec::new();
        let mut phi = AffineMap2::IDENTITY;
        loop {
            let s = search_cumulative(&cum, rng.gen_range(0.0..1.0));
            word.push(s as u8);
            phi = phi.compose(&self.maps[s]);
            match kind {
                WordKind::U => {
                    if word.len() as u32 >= n {
                        return word;
                    }
                }
                WordKind::I => {
                    if phi.linear.singular_values().0 <= threshold {
                        return word;
                    }
                }
                WordKind::K => {
                    if phi.linear.singular_values().1 <= threshold {
                        return word;
                    }
                }
            }
        }
    }

    /// Seeded sampling of the coding map: each sample follows an independent
    /// p-random sequence until the composed contraction is below
    /// 2^-depth_target, then evaluates at the fixed point of map 0.
    pub fn sample_attractor(
        &self,
        n_samples: usize,
        depth_target: u32,
        seed: u64,
    ) -> Result<Vec<CodedSample>> {
        let x0 = self.maps[0].fixed_point()?;
        let probs = self.normalized_probs();
        let cum = cumulative_weights(&probs);
        let threshold = f64::exp2(-(depth_target as f64));
        Ok(par_map_indexed(n_samples, |i| {
            let mut rng = substream(seed, i as u64);
            let mut phi = AffineMap2::IDENTITY;
            let mut word = Vec::new();
            loop {
                let s = search_cumulative(&cum, rng.gen_range(0.0..1.0));
                word.push(s as u8);
                phi = phi.compose(&self.maps[s]);
                if phi.linear.singular_values().0 < threshold {
                    break;
                }
            }
            CodedSample {
                point: phi.apply(x0),
                word,
            }
        }))
    }

    /// Equal-weight point cloud of attractor samples.
    pub fn attractor_cloud(&self, n_samples: usize, depth_target: u32, seed: u64) -> Result<PointCloud> {
        let samples = self.sample_attractor(n_samples, depth_target, seed)?;
        PointCloud::from_points(samples.into_iter().map(|s| s.point).collect())
    }

    /// A deterministic bounding box containing the attractor, obtained by
    /// shrinking the a-priori ball bound through the system images.
    pub fn attractor_bounding_box(&self) -> Result<(Vec2, Vec2)> {
        let max_alpha = self
            .maps
            .iter()
            .map(|m| m.linear.operator_norm())
            .fold(0.0f64, f64::max);
        let max_b = self
            .maps
            .iter()
            .map(|m| m.translation.norm())
            .fold(0.0f64, f64::max);
        // Coding-map bound through the contraction certificate: orbits gain
        // at most max(1, max_alpha)^m per block of m steps, and blocks decay
        // geometrically at rate worst_alpha1.
        let m = self.contraction.length as f64;
        let q = self.contraction.worst_alpha1;
        let burst = max_alpha.max(1.0).powf(m);
        let radius = (max_b * m * burst / (1.0 - q)).max(1e-9);
        let mut lo = Vec2::new(-radius, -radius);
        let mut hi = Vec2::new(radius, radius);
        for _ in 0..60 {
            let mut nlo = Vec2::new(f64::INFINITY, f64::INFINITY);
            let mut nhi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
            for m in &self.maps {
                for corner in [
                    Vec2::new(lo.x, lo.y),
                    Vec2::new(lo.x, hi.y),
                    Vec2::new(hi.x, lo.y),
                    Vec2::new(hi.x, hi.y),
                ] {
                    let p = m.apply(corner);
                    nlo.x = nlo.x.min(p.x);
                    nlo.y = nlo.y.min(p.y);
                    nhi.x = nhi.x.max(p.x);
                    nhi.y = nhi.y.max(p.y);
                }
            }
            lo = nlo;
            hi = nhi;
        }
        Ok((lo, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::Matrix2;
    use crate::fixtures;

    fn single_map() -> IfsSystem {
        IfsSystem::new(
            vec![AffineMap2::new(
                Matrix2::diagonal(0.5, 1.0 / 3.0),
                Vec2::new(0.25, 0.25),
            )],
            vec![1.0],
            None,
        )
        .unwrap()
    }

    fn two_halves() -> IfsSystem {
        // x/2 and x/2 + 1/2 embedded diagonally.
        IfsSystem::new(
            vec![
                AffineMap2::new(Matrix2::diagonal(0.5, 0.5), Vec2::ZERO),
                AffineMap2::new(Matrix2::diagonal(0.5, 0.5), Vec2::new(0.5, 0.5)),
            ],
            vec![0.5, 0.5],
            None,
        )
        .unwrap()
    }

    #[test]
    fn validation_on_fixture_passes() {
        let report = fixtures::f1().validate();
        assert!(report.all_passed, "{report:?}");
    }

    #[test]
    fn validation_flags_common_fixed_point() {
        let system = IfsSystem::new(
            vec![
                AffineMap2::new(Matrix2::diagonal(0.5, 0.3), Vec2::ZERO),
                AffineMap2::new(Matrix2::diagonal(0.4, 0.6), Vec2::ZERO),
            ],
            vec![0.5, 0.5],
            None,
        )
        .unwrap();
        let report = system.validate();
        let check = report
            .checks
            .iter()
            .find(|c| c.name == "no_common_fixed_point")
            .unwrap();
        assert!(!check.passed);
    }

    #[test]
    fn validation_flags_bad_probability_sum() {
        let system = IfsSystem::new(
            vec![
                AffineMap2::new(Matrix2::diagonal(0.5, 0.3), Vec2::ZERO),
                AffineMap2::new(Matrix2::diagonal(0.4, 0.6), Vec2::new(0.5, 0.0)),
            ],
            vec![0.5, 0.6],
            None,
        )
        .unwrap();
        let report = system.validate();
        let check = report
            .checks
            .iter()
            .find(|c| c.name == "probability_sum")
            .unwrap();
        assert!(!check.passed);
        assert!(report.checks.iter().any(|c| c.name == "alphabet_size" && c.passed));
    }

    #[test]
    fn compose_word_basics() {
        let system = single_map();
        let phi = system.compose_word(&[0]).unwrap();
        assert_eq!(phi, system.maps()[0]);
        let phi3 = system.compose_word(&[0, 0, 0]).unwrap();
        assert!((phi3.linear.a11 - 0.125).abs() < 1e-15);
        assert!((phi3.linear.a22 - 1.0 / 27.0).abs() < 1e-15);
        assert!(system.compose_word(&[3]).is_err());
    }

    #[test]
    fn f2_composition_follows_parameter_law() {
        // Parabola-preserving maps compose by (s1, t1) . (s2, t2) =
        // (s1 s2, s1 t2 + t1).
        let f2 = fixtures::f2();
        let phi = f2.compose_word(&[0, 1]).unwrap();
        let (s1, t1) = (0.5, 0.0);
        let (s2, t2) = (0.5, 0.53);
        let (s, t) = (s1 * s2, s1 * t2 + t1);
        let expected = fixtures::parabola_map(s, t);
        assert!(crate::affine::norm_distance(&phi, &expected) < 1e-12);
        assert!((s - 0.25).abs() < 1e-15);
    }

    #[test]
    fn psi_on_single_map_is_one_word() {
        let system = single_map();
        let words = system.enumerate_psi(5, 1 << 20).unwrap();
        assert_eq!(words, vec![vec![0, 0, 0, 0, 0]]);
        // alpha2 = 3^-k crosses 2^-5 at k = 4.
        let words = system.enumerate_upsilon(5, 1 << 20).unwrap();
        assert_eq!(words, vec![vec![0, 0, 0, 0]]);
    }

    #[test]
    fn psi_on_conformal_pair_is_full_level() {
        let system = two_halves();
        let psi = system.enumerate_psi(3, 1 << 20).unwrap();
        assert_eq!(psi.len(), 8);
        assert!(psi.iter().all(|w| w.len() == 3));
        // Conformal maps: both stopping rules agree.
        let ups = system.enumerate_upsilon(3, 1 << 20).unwrap();
        assert_eq!(psi, ups);
    }

    #[test]
    fn f2_upsilon_level_6_is_length_3() {
        let words = fixtures::f2().enumerate_upsilon(6, 1 << 20).unwrap();
        assert_eq!(words.len(), 27);
        assert!(words.iter().all(|w| w.len() == 3));
    }

    fn assert_partition(system: &IfsSystem, words: &[CylinderWord]) {
        // Prefix-freeness and total weight one.
        for (i, a) in words.iter().enumerate() {
            for (j, b) in words.iter().enumerate() {
                if i != j && b.len() >= a.len() {
                    assert_ne!(&b[..a.len()], &a[..], "prefix violation");
                }
            }
        }
        let total: f64 = words.iter().map(|w| system.word_weight(w)).sum();
        assert!((total - 1.0).abs() < 1e-12, "weights sum to {total}");
    }

    #[test]
    fn psi_is_partition_with_stopping_band() {
        let system = fixtures::f1();
        let words = system.enumerate_psi(6, 1 << 20).unwrap();
        assert_partition(&system, &words);
        let c0 = system
            .maps()
            .iter()
            .map(|m| m.linear.singular_values().1)
            .fold(f64::INFINITY, f64::min);
        let bound = f64::exp2(-6.0);
        for w in &words {
            let a1 = system.compose_word(w).unwrap().linear.singular_values().0;
            assert!(a1 <= bound + 1e-15);
            assert!(a1 >= c0 * bound - 1e-15, "a1 = {a1}");
            // Parent violates the rule.
            let parent = system
                .compose_word(&w[..w.len() - 1])
                .unwrap()
                .linear
                .singular_values()
                .0;
            assert!(parent > bound);
        }
        // Word lengths live in the predicted band.
        let a1max: f64 = 0.3;
        let a1min: f64 = 0.2;
        let lo = (6.0 / a1min.recip().log2()).floor() as usize;
        let hi = (6.0 / a1max.recip().log2()).ceil() as usize;
        for w in &words {
            assert!(w.len() >= lo && w.len() <= hi, "length {}", w.len());
        }
    }

    #[test]
    fn sampled_psi_words_match_enumeration_frequencies() {
        let system = fixtures::f1();
        let words = system.enumerate_psi(6, 1 << 20).unwrap();
        let mut counts = std::collections::HashMap::new();
        let draws = 100_000;
        for i in 0..draws {
            let mut rng = substream(99, i);
            let w = system.sample_word_with(&mut rng, WordKind::I, 6);
            *counts.entry(w).or_insert(0usize) += 1;
        }
        // Every sampled word is a member of the partition, and frequencies
        // match the weights within 3 sigma multinomial bounds.
        for (w, c) in &counts {
            assert!(words.contains(w), "sampled word outside the partition");
            let p = system.word_weight(w);
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            let freq = *c as f64 / draws as f64;
            assert!(
                (freq - p).abs() <= 3.0 * sigma + 1e-4,
                "word {w:?}: freq {freq} vs weight {p}"
            );
        }
    }

    #[test]
    fn single_map_sampling_is_deterministic() {
        let system = single_map();
        let w = system.sample_word(WordKind::I, 5, 7);
        assert_eq!(w, vec![0, 0, 0, 0, 0]);
        let samples = system.sample_attractor(50, 20, 3).unwrap();
        let fix = system.maps()[0].fixed_point().unwrap();
        for s in &samples {
            assert!(s.point.sub(fix).norm() < 1e-5);
        }
    }

    #[test]
    fn attractor_samples_stay_below_depth_target() {
        let system = fixtures::f1();
        let depth = 18;
        for s in system.sample_attractor(200, depth, 11).unwrap() {
            let a1 = system
                .compose_word(&s.word)
                .unwrap()
                .linear
                .singular_values()
                .0;
            assert!(a1 < f64::exp2(-(depth as f64)));
        }
    }

    #[test]
    fn diagonal_embedding_first_coordinate_is_uniform() {
        let system = two_halves();
        let samples = system.sample_attractor(100_000, 25, 17).unwrap();
        let bins = 32;
        let mut counts = vec![0usize; bins];
        for s in &samples {
            let b = ((s.point.x * bins as f64).floor() as isize).clamp(0, bins as isize - 1);
            counts[b as usize] += 1;
        }
        let expected = samples.len() as f64 / bins as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 99th percentile of chi-square with 31 degrees of freedom.
        assert!(chi2 < 52.19, "chi2 = {chi2}");
    }

    #[test]
    fn f2_samples_lie_on_parabola() {
        let system = fixtures::f2();
        for s in system.sample_attractor(2000, 30, 23).unwrap() {
            assert!((s.point.y - s.point.x * s.point.x).abs() < 1e-8);
        }
    }

    #[test]
    fn self_affinity_resampling_identity() {
        let system = fixtures::f1();
        let n = 200_000;
        let cloud = system.attractor_cloud(n, 18, 29).unwrap();
        let probs = system.normalized_probs();
        let cum = cumulative_weights(&probs);
        let pushed: Vec<Vec2> = (0..n)
            .map(|i| {
                let mut rng = substream(31, i as u64);
                let s = search_cumulative(&cum, rng.gen_range(0.0..1.0));
                system.maps()[s].apply(cloud.atoms()[i].0)
            })
            .collect();
        let pushed = PointCloud::from_points(pushed).unwrap();
        let tv = crate::entropy::histogram_tv(&cloud, &pushed, 8);
        assert!(tv < 0.05, "tv = {tv}");
    }

    #[test]
    fn bounding_box_contains_samples() {
        let system = fixtures::f1();
        let (lo, hi) = system.attractor_bounding_box().unwrap();
        for s in system.sample_attractor(500, 15, 37).unwrap() {
            assert!(s.point.x >= lo.x - 1e-9 && s.point.x <= hi.x + 1e-9);
            assert!(s.point.y >= lo.y - 1e-9 && s.point.y <= hi.y + 1e-9);
        }
    }

    #[test]
    fn enumeration_respects_cap() {
        let system = two_halves();
        let err = system.enumerate_psi(12, 100).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }
}
