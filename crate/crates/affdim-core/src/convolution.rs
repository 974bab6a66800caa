//! Measures on the affine group, action convolutions, fiber decompositions
//! of the n-fold self-convolution, and the entropy-growth experiments.

use crate::affine::{invariant_distance, norm_distance, AffineMap2, Vec2};
use crate::entropy::{conditional_entropy, entropy, EntropyValue};
use crate::frames::{affine_grid_cell, CellId, DyadicFrame};
use crate::ifs::IfsSystem;
use crate::measure::{AffineAtomMeasure, EmpiricalMeasure, PointCloud};
use crate::rng::{
    cumulative_weights, kahan_sum, par_map_indexed, search_cumulative, substream, KahanSum,
};
use crate::{Error, Result};
use rand::Rng;
use serde::Serialize;
use std::collections::HashMap;

/// Default atom budget for convolution clouds.
pub const DEFAULT_CONV_TARGET: usize = 1_000_000;

/// Action convolution theta.nu: the distribution of phi(x) for phi ~ theta
/// and x ~ nu. Exact when the product cloud fits in `target` atoms,
/// otherwise weight-proportional resampling down to `target` draws.
pub fn act_convolve(
    theta: &AffineAtomMeasure,
    nu: &PointCloud,
    target: usize,
    seed: u64,
) -> PointCloud {
    if theta.len().saturating_mul(nu.len()) <= target {
        let mut atoms = Vec::with_capacity(theta.len() * nu.len());
        for &(phi, wp) in theta.atoms() {
            for &(x, wx) in nu.atoms() {
                atoms.push((phi.apply(x), wp * wx));
            }
        }
        return PointCloud::new(atoms).expect("product cloud is nonempty");
    }
    let theta_cum = cumulative_weights(&theta.atoms().iter().map(|&(_, w)| w).collect::<Vec<_>>());
    let nu_cum = cumulative_weights(&nu.atoms().iter().map(|&(_, w)| w).collect::<Vec<_>>());
    let theta_total = *theta_cum.last().unwrap();
    let nu_total = *nu_cum.last().unwrap();
    let points = par_map_indexed(target, |i| {
        let mut rng = substream(seed, i as u64);
        let pi = search_cumulative(&theta_cum, rng.gen_range(0.0..theta_total));
        let xi = search_cumulative(&nu_cum, rng.gen_range(0.0..nu_total));
        theta.atoms()[pi].0.apply(nu.atoms()[xi].0)
    });
    PointCloud::from_points(points).expect("resampled cloud is nonempty")
}

/// Euclidean convolution of two planar clouds (distribution of x + y),
/// with the same thinning rule as [`act_convolve`].
pub fn euclidean_convolve(a: &PointCloud, b: &PointCloud, target: usize, seed: u64) -> PointCloud {
    if a.len().saturating_mul(b.len()) <= target {
        let mut atoms = Vec::with_capacity(a.len() * b.len());
        for &(x, wx) in a.atoms() {
            for &(y, wy) in b.atoms() {
                atoms.push((x.add(y), wx * wy));
            }
        }
        return PointCloud::new(atoms).expect("product cloud is nonempty");
    }
    let a_cum = cumulative_weights(&a.atoms().iter().map(|&(_, w)| w).collect::<Vec<_>>());
    let b_cum = cumulative_weights(&b.atoms().iter().map(|&(_, w)| w).collect::<Vec<_>>());
    let a_total = *a_cum.last().unwrap();
    let b_total = *b_cum.last().unwrap();
    let points = par_map_indexed(target, |i| {
        let mut rng = substream(seed, i as u64);
        let xi = search_cumulative(&a_cum, rng.gen_range(0.0..a_total));
        let yi = search_cumulative(&b_cum, rng.gen_range(0.0..b_total));
        a.atoms()[xi].0.add(b.atoms()[yi].0)
    });
    PointCloud::from_points(points).expect("resampled cloud is nonempty")
}

/// The system as a measure on the affine group: atoms (phi_i, p_i).
pub fn system_measure(system: &IfsSystem) -> AffineAtomMeasure {
    EmpiricalMeasure::new(
        system
            .maps()
            .iter()
            .copied()
            .zip(system.normalized_probs())
            .collect(),
    )
    .expect("systems are nonempty")
}

/// n-fold self-convolution: atoms (phi_w, p_w) over all words of length n.
pub fn pstar(system: &IfsSystem, n: u32, cap: u64) -> Result<AffineAtomMeasure> {
    let k = system.alphabet_len() as u64;
    let count = k.checked_pow(n).unwrap_or(u64::MAX);
    if count > cap {
        return Err(Error::BudgetExceeded { needed: count, cap });
    }
    let probs = system.normalized_probs();
    let mut atoms: Vec<(AffineMap2, f64)> = vec![(AffineMap2::IDENTITY, 1.0)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(atoms.len() * system.alphabet_len());
        for &(phi, w) in &atoms {
            for (i, m) in system.maps().iter().enumerate() {
                next.push((phi.compose(m), w * probs[i]));
            }
        }
        atoms = next;
    }
    EmpiricalMeasure::new(atoms)
}

/// Merges atoms closer than `tol` in the norm metric. Exact overlaps
/// collapse into one atom carrying the combined weight.
pub fn dedup_atoms(measure: &AffineAtomMeasure, tol: f64) -> AffineAtomMeasure {
    let mut reps: Vec<(AffineMap2, f64)> = Vec::new();
    for &(phi, w) in measure.atoms() {
        match reps
            .iter_mut()
            .find(|(rep, _)| norm_distance(rep, &phi) < tol)
        {
            Some((_, rw)) => *rw += w,
            None => reps.push((phi, w)),
        }
    }
    EmpiricalMeasure::new(reps).expect("dedup keeps at least one atom")
}

/// Discrete Shannon entropy of the atom weights (bits), after merging
/// coincident atoms.
pub fn discrete_entropy(measure: &AffineAtomMeasure, tol: f64) -> f64 {
    let dedup = dedup_atoms(measure, tol);
    let total = dedup.total_weight();
    let mut acc = KahanSum::new();
    for &(_, w) in dedup.atoms() {
        let p = w / total;
        acc.add(-p * p.log2());
    }
    acc.value()
}

/// Entropy of an affine-group measure in the six-coordinate grid.
pub fn grid_entropy(measure: &AffineAtomMeasure, level: i32) -> EntropyValue {
    let mut cells: HashMap<CellId, f64> = HashMap::new();
    for &(phi, w) in measure.atoms() {
        *cells.entry(affine_grid_cell(&phi, level)).or_insert(0.0) += w;
    }
    let mut entries: Vec<(CellId, f64)> = cells.into_iter().collect();
    entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let total = kahan_sum(entries.iter().map(|&(_, w)| w));
    let mut acc = KahanSum::new();
    for &(_, w) in &entries {
        let p = w / total;
        if p > 0.0 {
            acc.add(-p * p.log2());
        }
    }
    let occupied = entries.len();
    EntropyValue {
        bits: acc.value().max(0.0),
        atoms_used: measure.len(),
        occupied_cells: occupied,
        correction: occupied.saturating_sub(1) as f64
            / (2.0 * measure.len() as f64 * std::f64::consts::LN_2),
    }
}

/// Approximate fiber measure of the self-convolution: weights each length-n
/// word by p_w times the mass its cylinder sends into the dyadic cell of x,
/// estimated with an inner attractor sample.
pub fn fiber_decomposition(
    system: &IfsSystem,
    x: Vec2,
    n: u32,
    cell_level: i32,
    inner_samples: usize,
    seed: u64,
) -> Result<AffineAtomMeasure> {
    let depth = (cell_level.unsigned_abs()).max(8) + 10;
    let inner = system.attractor_cloud(inner_samples, depth, seed)?;
    let frame = DyadicFrame::standard_2d(cell_level);
    let target = frame.cell(x);
    let probs = system.normalized_probs();
    let k = system.alphabet_len();
    let words = k.checked_pow(n).ok_or(Error::BudgetExceeded {
        needed: u64::MAX,
        cap: u64::MAX,
    })?;
    let atoms: Vec<(AffineMap2, f64)> = par_map_indexed(words, |idx| {
        let mut word = Vec::with_capacity(n as usize);
        let mut rem = idx;
        for _ in 0..n {
            word.push((rem % k) as u8);
            rem /= k;
        }
        word.reverse();
        let phi = system.compose_word(&word).expect("word is in range");
        let p_w: f64 = word.iter().map(|&s| probs[s as usize]).product();
        let mut hit = 0usize;
        for &(y, _) in inner.atoms() {
            if frame.cell(phi.apply(y)) == target {
                hit += 1;
            }
        }
        (phi, p_w * hit as f64 / inner.len() as f64)
    })
    .into_iter()
    .filter(|&(_, w)| w > 0.0)
    .collect();
    if atoms.is_empty() {
        return Err(Error::EmptyFiber);
    }
    EmpiricalMeasure::new(atoms)
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthRecord {
    pub n: i32,
    pub frame: String,
    /// (1/n) H(mu, D_n).
    pub h_mu: f64,
    /// (1/n) H(theta.mu, D_n) in the stated frame.
    pub h_conv: f64,
    pub gain: f64,
    /// (1/n) H(theta, affine grid at level n).
    pub theta_entropy: f64,
    /// Soft non-decrease: gain >= -2/n.
    pub nondecrease_ok: bool,
}

/// Entropy growth of theta.mu against mu in the standard frame at level n,
/// for theta supported near the identity.
pub fn entropy_growth_experiment(
    mu: &PointCloud,
    theta: &AffineAtomMeasure,
    n: i32,
    target: usize,
    seed: u64,
) -> GrowthRecord {
    let conv = act_convolve(theta, mu, target, seed);
    let frame = DyadicFrame::standard_2d(n);
    let h_mu = entropy(mu, &frame).bits / n as f64;
    let h_conv = entropy(&conv, &frame).bits / n as f64;
    let gain = h_conv - h_mu;
    GrowthRecord {
        n,
        frame: "standard".into(),
        h_mu,
        h_conv,
        gain,
        theta_entropy: grid_entropy(theta, n).bits / n as f64,
        nondecrease_ok: gain >= -2.0 / n as f64,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NonConformalGrowthRecord {
    pub n: i32,
    pub m_factor: i32,
    /// a_i = (1/n) log2 alpha_i(A_g).
    pub a1: f64,
    pub a2: f64,
    /// (1/n) H(mu, D_n) in the standard frame.
    pub h_mu: f64,
    /// (1/(Mn)) H(theta.mu, D^g_{Mn}): the adapted-frame reading.
    pub h_conv_g_frame: f64,
    /// (1/(Mn)) H(theta.mu, D_{(M+|a2|)n} | D_{|a2|n}): the conditional
    /// reading that the interpolation identity equates with the g-frame one.
    pub h_conv_conditional: f64,
    /// (1/(Mn)) H(theta.mu, D_{Mn}) in the standard frame (the wrong-frame
    /// reading).
    pub h_conv_standard: f64,
    pub gain_g_frame: f64,
    pub interpolation_gap: f64,
    pub nondecrease_ok: bool,
}

/// Entropy growth for theta supported near a strongly non-conformal
/// contraction g, measured in the frame adapted to g, together with the
/// conditional-entropy reading and the interpolation gap between them.
pub fn nonconformal_growth_experiment(
    mu: &PointCloud,
    theta: &AffineAtomMeasure,
    g: &AffineMap2,
    n: i32,
    m_factor: i32,
    target: usize,
    seed: u64,
) -> Result<NonConformalGrowthRecord> {
    let (alpha1, alpha2) = g.linear.singular_values();
    let a1 = alpha1.log2() / n as f64;
    let a2 = alpha2.log2() / n as f64;
    if !(a1 > a2) {
        return Err(Error::InvalidEccentricity { a1, a2 });
    }
    let mn = m_factor * n;
    let conv = act_convolve(theta, mu, target, seed);
    let g_frame = DyadicFrame::non_conformal(g, mn)?;
    let h_conv_g_frame = entropy(&conv, &g_frame).bits / mn as f64;
    let c2_level = (a2.abs() * n as f64).round() as i32;
    let fine = DyadicFrame::standard_2d(mn + c2_level);
    let coarse = DyadicFrame::standard_2d(c2_level);
    let h_conv_conditional = conditional_entropy(&conv, &fine, &coarse).bits / mn as f64;
    let h_conv_standard = entropy(&conv, &DyadicFrame::standard_2d(mn)).bits / mn as f64;
    let h_mu = entropy(mu, &DyadicFrame::standard_2d(mn)).bits / mn as f64;
    let gain = h_conv_g_frame - h_mu;
    Ok(NonConformalGrowthRecord {
        n,
        m_factor,
        a1,
        a2,
        h_mu,
        h_conv_g_frame,
        h_conv_conditional,
        h_conv_standard,
        gain_g_frame: gain,
        interpolation_gap: (h_conv_g_frame - h_conv_conditional).abs(),
        nondecrease_ok: gain >= -2.0 / mn as f64,
    })
}

/// Linearization discrepancy: compares the action convolution theta.nu with
/// the Euclidean surrogate (theta.x0) * (psi0 nu) at scale k - log2(delta).
pub fn linearization_check(
    theta: &AffineAtomMeasure,
    nu: &PointCloud,
    psi0: &AffineMap2,
    x0: Vec2,
    k: i32,
    delta: f64,
    target: usize,
    seed: u64,
) -> Result<f64> {
    for &(phi, _) in theta.atoms() {
        let d = invariant_distance(&phi, psi0)?;
        if d > 3.0 * delta {
            return Err(Error::PreconditionViolated {
                reason: format!("theta atom at invariant distance {d} from psi0 (delta = {delta})"),
            });
        }
    }
    for &(x, _) in nu.atoms() {
        if x.sub(x0).norm() > 3.0 * delta {
            return Err(Error::PreconditionViolated {
                reason: "nu support leaves the delta ball at x0".into(),
            });
        }
    }
    let level = k + (-delta.log2()).round() as i32;
    let frame = DyadicFrame::standard_2d(level);
    let action = act_convolve(theta, nu, target, seed);
    let h_action = entropy(&action, &frame).bits / k as f64;
    let theta_x0 = PointCloud::new(
        theta
            .atoms()
            .iter()
            .map(|&(phi, w)| (phi.apply(x0), w))
            .collect(),
    )?;
    let psi_nu = nu.push_affine(psi0);
    // Center the Euclidean convolution so both sides live at the same spot:
    // phi(x) ~ phi(x0) + psi0(x) - psi0(x0).
    let shifted = PointCloud::new(
        psi_nu
            .atoms()
            .iter()
            .map(|&(y, w)| (y.sub(psi0.apply(x0)), w))
            .collect(),
    )?;
    let surrogate = euclidean_convolve(&theta_x0, &shifted, target, seed ^ 0x9e3779b97f4a7c15);
    let h_surrogate = entropy(&surrogate, &frame).bits / k as f64;
    Ok((h_action - h_surrogate).abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberSummary {
    pub x: (f64, f64),
    pub total_words: usize,
    pub distinct_atoms: usize,
    pub discrete_bits: f64,
    /// (1/(Mn)) H of the identity-normalized fiber measure in the affine
    /// grid at level Mn.
    pub grid_bits_per_level: f64,
    /// max_i max_{g in supp} |chi_i - (1/n) log2 alpha_i(A_g)|.
    pub exponent_band_dev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurplusReport {
    pub n: u32,
    pub m_factor: i32,
    pub epsilon: f64,
    pub fibers: Vec<FiberSummary>,
    /// Fraction of sampled fibers with normalized grid entropy above
    /// epsilon.
    pub high_entropy_fraction: f64,
    /// Fraction of fiber mass within the exponent band |chi_i - a_i| < 0.2.
    pub exponent_band_fraction: f64,
}

/// Draws fiber measures at sampled attractor points, normalizes each by a
/// support atom, and measures their entropy at grid level Mn; reports the
/// fraction exceeding epsilon per level and the Oseledets exponent-band
/// check over the fiber support.
#[allow(clippy::too_many_arguments)]
pub fn surplus_experiment(
    system: &IfsSystem,
    n: u32,
    m_factor: i32,
    n_fibers: usize,
    cell_level: i32,
    inner_samples: usize,
    epsilon: f64,
    chi: (f64, f64),
    seed: u64,
) -> Result<SurplusReport> {
    let anchors = system.attractor_cloud(n_fibers, cell_level as u32 + 10, seed)?;
    let mn = m_factor * n as i32;
    let mut fibers = Vec::new();
    let mut high = 0usize;
    let mut band_ok = 0.0f64;
    let mut band_total = 0.0f64;
    for (i, &(x, _)) in anchors.atoms().iter().enumerate() {
        let fiber = match fiber_decomposition(system, x, n, cell_level, inner_samples, seed ^ (i as u64 + 1)) {
            Ok(f) => f,
            Err(Error::EmptyFiber) => continue,
            Err(e) => return Err(e),
        };
        // Normalize by the heaviest support atom so the grid is used near
        // the identity.
        let anchor = fiber
            .atoms()
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|&(phi, _)| phi)
            .expect("fiber is nonempty");
        let anchor_inv = anchor.inverse()?;
        let normalized = fiber.map(|phi| anchor_inv.compose(phi));
        let grid_bits = grid_entropy(&normalized, mn).bits / mn as f64;
        let dedup = dedup_atoms(&fiber, 1e-13);
        let discrete_bits = discrete_entropy(&fiber, 1e-13);
        let mut band_dev = 0.0f64;
        for &(phi, w) in fiber.atoms() {
            let (s1, s2) = phi.linear.singular_values();
            let d1 = (chi.0 - s1.log2() / n as f64).abs();
            let d2 = (chi.1 - s2.log2() / n as f64).abs();
            band_dev = band_dev.max(d1.max(d2));
            band_total += w;
            if d1 < 0.2 && d2 < 0.2 {
                band_ok += w;
            }
        }
        if grid_bits > epsilon {
            high += 1;
        }
        fibers.push(FiberSummary {
            x: (x.x, x.y),
            total_words: fiber.len(),
            distinct_atoms: dedup.len(),
            discrete_bits,
            grid_bits_per_level: grid_bits,
            exponent_band_dev: band_dev,
        });
    }
    let count = fibers.len().max(1);
    Ok(SurplusReport {
        n,
        m_factor,
        epsilon,
        high_entropy_fraction: high as f64 / count as f64,
        exponent_band_fraction: if band_total > 0.0 {
            band_ok / band_total
        } else {
            0.0
        },
        fibers,
    })
}

/// Uniform atoms at `count` random translations within a ball of the given
/// radius, a standard positive-entropy input for the growth experiments.
pub fn random_translation_cloud(count: usize, radius: f64, seed: u64) -> AffineAtomMeasure {
    let atoms = (0..count)
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            loop {
                let v = Vec2::new(
                    rng.gen_range(-radius..radius),
                    rng.gen_range(-radius..radius),
                );
                if v.norm() <= radius {
                    return (AffineMap2::translation_by(v), 1.0 / count as f64);
                }
            }
        })
        .collect();
    EmpiricalMeasure::new(atoms).expect("translation cloud is nonempty")
}
