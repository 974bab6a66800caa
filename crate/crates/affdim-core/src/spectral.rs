//! Random matrix products: Lyapunov exponents, Furstenberg measures on the
//! projective line, the cylinder direction function, and the structural
//! hypothesis checks (non-conformality, total irreducibility, triangular
//! structure).

use crate::affine::{major_direction, rp1_distance, top_direction, Matrix2, ProjectivePoint, Vec2};
use crate::frames::DyadicFrame;
use crate::ifs::IfsSystem;
use crate::linalg::{jacobi_eigen_sym, real_eigendirections};
use crate::measure::{EmpiricalMeasure, ProjectiveCloud};
use crate::rng::{cumulative_weights, kahan_sum, par_map_indexed, search_cumulative, substream};
use crate::{Error, Result};
use rand::Rng;
use serde::Serialize;

/// Monte Carlo estimate of the Lyapunov exponents, base-2 logs per step.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovEstimate {
    pub chi1: f64,
    pub chi2: f64,
    /// Standard error of the chi1 estimate over trials.
    pub stderr1: f64,
    /// chi1 + chi2 in closed form: sum of p_i log2 |det A_i|.
    pub sum_exact: f64,
    pub trials: usize,
    pub length: usize,
}

/// Number of un-scored steps used to let the tracked direction reach the
/// attracting cone before accumulation starts.
const LYAPUNOV_WARMUP: usize = 200;

/// Estimates chi1 as the trial-mean of (1/length) sum of log2 ||A v_k|| with
/// v_k renormalized each step, after a warmup; chi2 comes from the exact
/// determinant identity chi1 + chi2 = sum p_i log2 |det A_i|.
pub fn lyapunov_exponents(
    system: &IfsSystem,
    trials: usize,
    length: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    lyapunov_exponents_with(system, trials, length, seed, false)
}

/// As [`lyapunov_exponents`], optionally multiplying transposed matrices
/// (the reversed-order product has the same exponents).
pub fn lyapunov_exponents_with(
    system: &IfsSystem,
    trials: usize,
    length: usize,
    seed: u64,
    transpose: bool,
) -> Result<LyapunovEstimate> {
    if length < 100 {
        return Err(Error::PreconditionViolated {
            reason: format!("product length {length} below the minimum of 100"),
        });
    }
    for (i, m) in system.maps().iter().enumerate() {
        if m.linear.det() == 0.0 {
            return Err(Error::DegenerateSystem {
                reason: format!("map {i} has zero determinant"),
            });
        }
    }
    let probs = system.normalized_probs();
    let cum = cumulative_weights(&probs);
    let mats: Vec<Matrix2> = system
        .maps()
        .iter()
        .map(|m| if transpose { m.linear.transpose() } else { m.linear })
        .collect();
    let per_trial: Vec<f64> = par_map_indexed(trials, |t| {
        let mut rng = substream(seed, t as u64);
        let mut v = Vec2::new(std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2);
        for _ in 0..LYAPUNOV_WARMUP {
            let s = search_cumulative(&cum, rng.gen_range(0.0..1.0));
            v = mats[s].apply(v).normalized();
        }
        let mut acc = crate::rng::KahanSum::new();
        for _ in 0..length {
            let s = search_cumulative(&cum, rng.gen_range(0.0..1.0));
            let image = mats[s].apply(v);
            let norm = image.norm();
            acc.add(norm.log2());
            v = image.scale(1.0 / norm);
        }
        acc.value() / length as f64
    });
    let chi1 = kahan_sum(per_trial.iter().copied()) / trials as f64;
    let var = if trials > 1 {
        kahan_sum(per_trial.iter().map(|x| (x - chi1) * (x - chi1))) / (trials - 1) as f64
    } else {
        0.0
    };
    let stderr1 = (var / trials as f64).sqrt();
    let sum_exact = kahan_sum(
        probs
            .iter()
            .zip(system.maps())
            .map(|(&p, m)| p * m.linear.det().abs().log2()),
    );
    Ok(LyapunovEstimate {
        chi1,
        chi2: sum_exact - chi1,
        stderr1,
        sum_exact,
        trials,
        length,
    })
}

/// Empirical Furstenberg measure: each atom is the image of a start line
/// (cycling through 16 equally spaced angles) under a length-`burnin`
/// p-random product of the linear parts (or their transposes).
pub fn furstenberg_measure(
    system: &IfsSystem,
    transpose: bool,
    samples: usize,
    burnin: usize,
    seed: u64,
) -> Result<ProjectiveCloud> {
    if samples == 0 {
        return Err(Error::EmptyMeasure);
    }
    let probs = system.normalized_probs();
    let cum = cumulative_weights(&probs);
    let mats: Vec<Matrix2> = system
        .maps()
        .iter()
        .map(|m| if transpose { m.linear.transpose() } else { m.linear })
        .collect();
    let atoms = par_map_indexed(samples, |i| {
        let mut rng = substream(seed, i as u64);
        let start = (i % 16) as f64 * std::f64::consts::PI / 16.0;
        let mut v = Vec2::new(start.cos(), start.sin());
        for _ in 0..burnin {
            let s = search_cumulative(&cum, rng.gen_range(0.0..1.0));
            v = mats[s].apply(v).normalized();
        }
        (ProjectivePoint::from_vector(v), 1.0 / samples as f64)
    });
    EmpiricalMeasure::new(atoms)
}

const WASSERSTEIN_BINS: usize = 1 << 10;

/// 1-Wasserstein distance between two measures on the circle R/(pi Z),
/// computed exactly on a 2^10-bin circular histogram by quantile alignment.
pub fn circular_wasserstein(a: &ProjectiveCloud, b: &ProjectiveCloud) -> f64 {
    let bin = |m: &ProjectiveCloud| {
        let mut h = vec![0.0f64; WASSERSTEIN_BINS];
        let total: f64 = m.atoms().iter().map(|&(_, w)| w).sum();
        for &(p, w) in m.atoms() {
            let idx = ((p.angle() / std::f64::consts::PI) * WASSERSTEIN_BINS as f64).floor()
                as usize;
            h[idx.min(WASSERSTEIN_BINS - 1)] += w / total;
        }
        h
    };
    let ha = bin(a);
    let hb = bin(b);
    // Prefix differences; the optimal circular shift is their weighted
    // median, and the cost is the L1 deviation from it.
    let mut d = Vec::with_capacity(WASSERSTEIN_BINS);
    let mut acc = 0.0;
    for i in 0..WASSERSTEIN_BINS {
        acc += ha[i] - hb[i];
        d.push(acc);
    }
    let mut sorted = d.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[WASSERSTEIN_BINS / 2];
    let width = std::f64::consts::PI / WASSERSTEIN_BINS as f64;
    width * kahan_sum(d.iter().map(|x| (x - median).abs()))
}

/// Residual of the stationarity equation: the circular Wasserstein distance
/// between m and the mixture sum p_i (A_i m) (or transposes).
pub fn stationarity_residual(system: &IfsSystem, m: &ProjectiveCloud, transpose: bool) -> f64 {
    let probs = system.normalized_probs();
    let mut atoms: Vec<(ProjectivePoint, f64)> = Vec::with_capacity(m.len() * probs.len());
    for (i, mat) in system.maps().iter().enumerate() {
        let b = if transpose {
            mat.linear.transpose()
        } else {
            mat.linear
        };
        for &(p, w) in m.atoms() {
            atoms.push((p.map_by(&b), w * probs[i]));
        }
    }
    let pushed = EmpiricalMeasure::new(atoms).expect("mixture is nonempty");
    circular_wasserstein(m, &pushed)
}

/// Direction of the cylinder map of a word: L(A_w).
pub fn direction_function(system: &IfsSystem, word: &[u8]) -> Result<ProjectivePoint> {
    let phi = system.compose_word(word)?;
    major_direction(&phi.linear)
}

#[derive(Debug, Clone, Serialize)]
pub struct LDescendsReport {
    pub cluster_level: i32,
    pub dispersion_tolerance: f64,
    pub cells: usize,
    /// Mass-weighted fraction of cells whose direction values have axial
    /// dispersion below the tolerance.
    pub low_dispersion_fraction: f64,
    pub mean_dispersion: f64,
}

/// Checks empirically that the cylinder direction is a function of the
/// point: samples coded points, groups them by dyadic cell, and measures the
/// circular dispersion of the direction values within each cell.
///
/// Directions are read off long coding prefixes (a few hundred symbols, far
/// beyond the positional depth) through a renormalized matrix product, since
/// the direction converges only at the Lyapunov-gap rate.
pub fn l_descends_test(
    system: &IfsSystem,
    n_samples: usize,
    cluster_level: i32,
    dispersion_tolerance: f64,
    seed: u64,
) -> Result<LDescendsReport> {
    let depth = (cluster_level as u32 + 10).max(300);
    let samples = system.sample_attractor(n_samples, depth, seed)?;
    let frame = DyadicFrame::standard_2d(cluster_level);
    let mut groups: std::collections::HashMap<crate::frames::CellId, Vec<f64>> =
        std::collections::HashMap::new();
    for s in &samples {
        // L(A_w) via a Frobenius-renormalized left-to-right product; the
        // renormalization keeps deep products away from underflow without
        // moving the major axis.
        let mut b = Matrix2::IDENTITY;
        for &sym in &s.word {
            b = b.mul(&system.maps()[sym as usize].linear);
            b = b.scaled(1.0 / b.frobenius());
        }
        if let Ok(dir) = top_direction(&b) {
            groups.entry(frame.cell(s.point)).or_default().push(dir.angle());
        }
    }
    let mut keys: Vec<_> = groups.keys().copied().collect();
    keys.sort_unstable();
    let total: f64 = keys.iter().map(|k| groups[k].len() as f64).sum();
    let mut low_mass = 0.0;
    let mut mean_disp = 0.0;
    for k in &keys {
        let angles = &groups[k];
        // Axial statistics: double the angles so lines at 0 and pi agree.
        let (mut cs, mut sn) = (0.0f64, 0.0f64);
        for &a in angles {
            cs += (2.0 * a).cos();
            sn += (2.0 * a).sin();
        }
        let r = (cs * cs + sn * sn).sqrt() / angles.len() as f64;
        let dispersion = 1.0 - r;
        let mass = angles.len() as f64 / total;
        mean_disp += mass * dispersion;
        if dispersion < dispersion_tolerance {
            low_mass += mass;
        }
    }
    Ok(LDescendsReport {
        cluster_level,
        dispersion_tolerance,
        cells: keys.len(),
        low_dispersion_fraction: low_mass,
        mean_dispersion: mean_disp,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformalityVerdict {
    pub conformal: bool,
    /// Common invariant positive-definite form, when one exists.
    pub witness: Option<[f64; 3]>,
    /// Smallest joint-invariance residual among definite candidates.
    pub residual: f64,
}

fn sym_apply(a: &Matrix2, q: [f64; 3]) -> [f64; 3] {
    // A^T Q A for Q = [[q0, q1], [q1, q2]].
    let qm = Matrix2::new(q[0], q[1], q[1], q[2]);
    let r = a.transpose().mul(&qm).mul(a);
    [r.a11, 0.5 * (r.a12 + r.a21), r.a22]
}

fn is_definite(q: [f64; 3]) -> Option<[f64; 3]> {
    let det = q[0] * q[2] - q[1] * q[1];
    if det <= 0.0 {
        return None;
    }
    if q[0] > 0.0 {
        Some(q)
    } else {
        Some([-q[0], -q[1], -q[2]])
    }
}

/// Decides whether all linear parts are similarities in a common coordinate
/// system, i.e. whether a positive-definite Q with A_i^T Q A_i proportional
/// to Q exists. The proportionality constants are forced to |det A_i|, so
/// the problem reduces to the joint kernel of the normalized operators on
/// the 3-dimensional space of symmetric forms.
pub fn check_nonconformality(system: &IfsSystem) -> ConformalityVerdict {
    let basis = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    // M = sum_i (S_i - I)^T (S_i - I) over the normalized operators S_i.
    let mut m = vec![vec![0.0f64; 3]; 3];
    for map in system.maps() {
        let d = map.linear.det().abs();
        let mut s = [[0.0f64; 3]; 3];
        for (j, b) in basis.iter().enumerate() {
            let col = sym_apply(&map.linear, *b);
            for i in 0..3 {
                s[i][j] = col[i] / d - if i == j { 1.0 } else { 0.0 };
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += s[k][i] * s[k][j];
                }
                m[i][j] += acc;
            }
        }
    }
    let (vals, vecs) = jacobi_eigen_sym(&m);
    let scale = vals[2].max(1.0);
    // Candidate forms: kernel vectors, their combinations, and the identity
    // projected onto the kernel.
    let mut candidates: Vec<[f64; 3]> = Vec::new();
    let kernel: Vec<&Vec<f64>> = vals
        .iter()
        .zip(&vecs)
        .filter(|(v, _)| **v < 1e-10 * scale)
        .map(|(_, e)| e)
        .collect();
    for e in &kernel {
        candidates.push([e[0], e[1], e[2]]);
    }
    for i in 0..kernel.len() {
        for j in (i + 1)..kernel.len() {
            for sign in [1.0, -1.0] {
                candidates.push([
                    kernel[i][0] + sign * kernel[j][0],
                    kernel[i][1] + sign * kernel[j][1],
                    kernel[i][2] + sign * kernel[j][2],
                ]);
            }
        }
    }
    if !kernel.is_empty() {
        // Projection of the identity form onto the kernel span.
        let id = [1.0, 0.0, 1.0];
        let mut proj = [0.0f64; 3];
        for e in &kernel {
            let dot = id[0] * e[0] + id[1] * e[1] + id[2] * e[2];
            for k in 0..3 {
                proj[k] += dot * e[k];
            }
        }
        candidates.push(proj);
    }
    let mut best_residual = f64::INFINITY;
    for cand in candidates {
        let q = match is_definite(cand) {
            Some(q) => q,
            None => continue,
        };
        let qnorm = (q[0] * q[0] + 2.0 * q[1] * q[1] + q[2] * q[2]).sqrt();
        let mut worst: f64 = 0.0;
        for map in system.maps() {
            let img = sym_apply(&map.linear, q);
            let c = map.linear.det().abs();
            let r = [
                img[0] - c * q[0],
                img[1] - c * q[1],
                img[2] - c * q[2],
            ];
            let rnorm = (r[0] * r[0] + 2.0 * r[1] * r[1] + r[2] * r[2]).sqrt();
            worst = worst.max(rnorm / (c * qnorm));
        }
        if worst < best_residual {
            best_residual = worst;
        }
        if worst < 1e-8 {
            let inv_norm = 1.0 / qnorm;
            return ConformalityVerdict {
                conformal: true,
                witness: Some([q[0] * inv_norm, q[1] * inv_norm, q[2] * inv_norm]),
                residual: worst,
            };
        }
    }
    ConformalityVerdict {
        conformal: false,
        witness: None,
        residual: best_residual,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IrreducibilityStatus {
    TotallyIrreducible,
    Reducible,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct IrreducibilityVerdict {
    pub status: IrreducibilityStatus,
    pub witness: Option<Vec<f64>>,
    /// Best invariance residual among candidate sets (rp1 distance).
    pub residual: f64,
}

const INVARIANCE_TOL: f64 = 1e-9;
const INCONCLUSIVE_TOL: f64 = 1e-6;

fn set_invariance_residual(system: &IfsSystem, set: &[ProjectivePoint]) -> f64 {
    let mut worst: f64 = 0.0;
    for m in system.maps() {
        for &line in set {
            let image = line.map_by(&m.linear);
            let nearest = set
                .iter()
                .map(|&other| rp1_distance(image, other))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(nearest);
        }
    }
    worst
}

/// Searches for a finite invariant set of lines. Candidates are assembled
/// from the real eigendirections of the generators and of their pairwise
/// products (sizes 1 and 2, which is complete for invariant sets of at most
/// two lines up to the scalar-square edge case); a projective random-walk
/// collapse test backs the algebraic search. The `TotallyIrreducible`
/// verdict is heuristic; `Reducible` verdicts carry an exact witness.
pub fn check_total_irreducibility(system: &IfsSystem) -> IrreducibilityVerdict {
    let mut candidates: Vec<ProjectivePoint> = Vec::new();
    let mut push_dirs = |m: &Matrix2| {
        for (_, v) in real_eigendirections(m) {
            candidates.push(ProjectivePoint::from_vector(v));
        }
    };
    for m in system.maps() {
        push_dirs(&m.linear);
    }
    for a in system.maps() {
        for b in system.maps() {
            push_dirs(&a.linear.mul(&b.linear));
        }
    }
    candidates.sort_by(|a, b| a.angle().total_cmp(&b.angle()));
    candidates.dedup_by(|a, b| rp1_distance(*a, *b) < 1e-12);

    let mut best_residual = f64::INFINITY;
    // Invariant singletons; report all of them together when any exist.
    let mut invariant_singletons: Vec<ProjectivePoint> = Vec::new();
    for &line in &candidates {
        let r = set_invariance_residual(system, &[line]);
        best_residual = best_residual.min(r);
        if r < INVARIANCE_TOL {
            invariant_singletons.push(line);
        }
    }
    if !invariant_singletons.is_empty() {
        return IrreducibilityVerdict {
            status: IrreducibilityStatus::Reducible,
            witness: Some(invariant_singletons.iter().map(|p| p.angle()).collect()),
            residual: best_residual,
        };
    }
    for i in 0..candidates.len() {
        for j in (i + 1)..candidates.len() {
            let pair = [candidates[i], candidates[j]];
            let r = set_invariance_residual(system, &pair);
            best_residual = best_residual.min(r);
            if r < INVARIANCE_TOL {
                return IrreducibilityVerdict {
                    status: IrreducibilityStatus::Reducible,
                    witness: Some(pair.iter().map(|p| p.angle()).collect()),
                    residual: r,
                };
            }
        }
    }
    if best_residual < INCONCLUSIVE_TOL {
        return IrreducibilityVerdict {
            status: IrreducibilityStatus::Inconclusive,
            witness: None,
            residual: best_residual,
        };
    }
    // Random-walk collapse diagnostic: if the projective walk from all
    // starts lands on at most two atoms, the system is (numerically)
    // reducible even though the algebraic search missed it.
    let probs = system.normalized_probs();
    let cum = cumulative_weights(&probs);
    let mut finals: Vec<ProjectivePoint> = Vec::new();
    for start in 0..16usize {
        let mut rng = substream(0x1f2e3d4c, start as u64);
        let angle = start as f64 * std::f64::consts::PI / 16.0;
        let mut v = Vec2::new(angle.cos(), angle.sin());
        for _ in 0..300 {
            let s = search_cumulative(&cum, rng.gen_range(0.0..1.0));
            v = system.maps()[s].linear.apply(v).normalized();
        }
        finals.push(ProjectivePoint::from_vector(v));
    }
    let mut clusters: Vec<ProjectivePoint> = Vec::new();
    for f in finals {
        if !clusters.iter().any(|&c| rp1_distance(c, f) < 1e-6) {
            clusters.push(f);
        }
    }
    if clusters.len() <= 2 {
        return IrreducibilityVerdict {
            status: IrreducibilityStatus::Reducible,
            witness: Some(clusters.iter().map(|p| p.angle()).collect()),
            residual: best_residual,
        };
    }
    IrreducibilityVerdict {
        status: IrreducibilityStatus::TotallyIrreducible,
        witness: None,
        residual: best_residual,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TriangularReport {
    /// Angle of the common eigendirection.
    pub common_direction: f64,
    /// Rotation bringing the common direction to the vertical axis, which
    /// makes every linear part lower triangular.
    pub conjugating_rotation: f64,
    /// Per-map eigenvalue along the invariant line.
    pub invariant_eigenvalues: Vec<f64>,
    /// Weighted contraction rate on the invariant line,
    /// sum p_i log2 |c_i|.
    pub invariant_rate: f64,
    pub chi1: f64,
    pub chi2: f64,
    /// Whether the invariant line is contracted at the slow rate 2^chi2.
    pub contracted_at_chi2: bool,
    pub jointly_diagonalizable: bool,
    /// Induced 1D system (a_i, t_i) acting by x -> a_i x + t_i on the
    /// quotient coordinate.
    pub induced: Vec<(f64, f64)>,
}

/// Detects a common real eigendirection and reports the triangular-structure
/// diagnostics used by the reducible-case pipeline.
pub fn triangular_diagnostics(
    system: &IfsSystem,
    trials: usize,
    length: usize,
    seed: u64,
) -> Result<TriangularReport> {
    // Candidate common eigendirections from map 0.
    let dirs0 = real_eigendirections(&system.maps()[0].linear);
    let mut common: Option<ProjectivePoint> = None;
    let mut second: Option<ProjectivePoint> = None;
    for (_, v) in &dirs0 {
        let line = ProjectivePoint::from_vector(*v);
        let invariant = system
            .maps()
            .iter()
            .all(|m| rp1_distance(line.map_by(&m.linear), line) < 1e-9);
        if invariant {
            if common.is_none() {
                common = Some(line);
            } else if rp1_distance(common.unwrap(), line) > 1e-9 {
                second = Some(line);
            }
        }
    }
    let common = common.ok_or(Error::NotTriangular)?;
    let jointly_diagonalizable = second.is_some();

    // Rotate the common eigendirection onto the vertical axis.
    let rot_angle = std::f64::consts::FRAC_PI_2 - common.angle();
    let rot = Matrix2::rotation(rot_angle);
    let rot_inv = Matrix2::rotation(-rot_angle);
    let mut invariant_eigenvalues = Vec::new();
    let mut induced = Vec::new();
    let u = common.unit();
    for m in system.maps() {
        let image = m.linear.apply(u);
        // A u = c u exactly on the invariant line; read c off the larger
        // component.
        let c = if u.x.abs() > u.y.abs() {
            image.x / u.x
        } else {
            image.y / u.y
        };
        invariant_eigenvalues.push(c);
        let b = rot.mul(&m.linear).mul(&rot_inv);
        let t = rot.apply(m.translation);
        induced.push((b.a11, t.x));
    }
    let probs = system.normalized_probs();
    let invariant_rate = kahan_sum(
        probs
            .iter()
            .zip(&invariant_eigenvalues)
            .map(|(&p, &c)| p * c.abs().log2()),
    );
    let lyap = lyapunov_exponents(system, trials, length, seed)?;
    let contracted_at_chi2 =
        (invariant_rate - lyap.chi2).abs() < (invariant_rate - lyap.chi1).abs();
    Ok(TriangularReport {
        common_direction: common.angle(),
        conjugating_rotation: rot_angle,
        invariant_eigenvalues,
        invariant_rate,
        chi1: lyap.chi1,
        chi2: lyap.chi2,
        contracted_at_chi2,
        jointly_diagonalizable,
        induced,
    })
}
