//! Scale entropy calculus for empirical measures: plug-in Shannon entropy
//! over dyadic frames, conditional entropy, dyadic components, entropy
//! dimension fits, projection and thickened-slice entropies, and the
//! concentration / saturation predicates.

use crate::affine::{ProjectivePoint, Vec2};
use crate::frames::{dyadic_index, CellId, DyadicFrame};
use crate::measure::PointCloud;
use crate::rng::{kahan_sum, par_map_indexed, substream, KahanSum};
use crate::{Error, Result};
use rand::Rng;
use std::collections::HashMap;

const LN_2: f64 = std::f64::consts::LN_2;

/// A plug-in entropy reading, in bits, together with the Miller-Madow bias
/// correction (reported separately, never folded in).
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EntropyValue {
    pub bits: f64,
    pub atoms_used: usize,
    pub occupied_cells: usize,
    /// Additive Miller-Madow correction (occupied - 1) / (2 N ln 2).
    pub correction: f64,
}

impl EntropyValue {
    pub fn corrected(&self) -> f64 {
        self.bits + self.correction
    }
}

/// Plug-in entropy of cell masses. Masses are normalized by their total and
/// summed in sorted cell order with compensation, so results are reproducible
/// bit-for-bit.
fn entropy_of_cells(cells: HashMap<CellId, f64>, atoms_used: usize) -> EntropyValue {
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
        atoms_used,
        occupied_cells: occupied,
        correction: (occupied.saturating_sub(1)) as f64 / (2.0 * atoms_used as f64 * LN_2),
    }
}

fn bin_cloud(cloud: &PointCloud, frame: &DyadicFrame) -> HashMap<CellId, f64> {
    let mut cells: HashMap<CellId, f64> = HashMap::with_capacity(1024);
    for &(p, w) in cloud.atoms() {
        *cells.entry(frame.cell(p)).or_insert(0.0) += w;
    }
    cells
}

/// Scale entropy H(nu, frame) in bits.
pub fn entropy(cloud: &PointCloud, frame: &DyadicFrame) -> EntropyValue {
    entropy_of_cells(bin_cloud(cloud, frame), cloud.len())
}

/// Conditional entropy H(nu, fine | coarse) = H(nu, fine v coarse) - H(nu, coarse).
pub fn conditional_entropy(
    cloud: &PointCloud,
    fine: &DyadicFrame,
    coarse: &DyadicFrame,
) -> EntropyValue {
    let mut join: HashMap<(CellId, CellId), f64> = HashMap::with_capacity(1024);
    let mut coarse_cells: HashMap<CellId, f64> = HashMap::with_capacity(1024);
    for &(p, w) in cloud.atoms() {
        let cf = fine.cell(p);
        let cc = coarse.cell(p);
        *join.entry((cf, cc)).or_insert(0.0) += w;
        *coarse_cells.entry(cc).or_insert(0.0) += w;
    }
    // Reuse the sorted compensated path by packing the join key.
    let mut entries: Vec<((CellId, CellId), f64)> = join.into_iter().collect();
    entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let total = kahan_sum(entries.iter().map(|&(_, w)| w));
    let mut acc = KahanSum::new();
    for &(_, w) in &entries {
        let p = w / total;
        if p > 0.0 {
            acc.add(-p * p.log2());
        }
    }
    let joint_bits = acc.value();
    let coarse_h = entropy_of_cells(coarse_cells, cloud.len());
    let occupied = entries.len();
    EntropyValue {
        bits: joint_bits - coarse_h.bits,
        atoms_used: cloud.len(),
        occupied_cells: occupied,
        correction: (occupied.saturating_sub(1)) as f64 / (2.0 * cloud.len() as f64 * LN_2),
    }
}

/// Entropy of a weighted 1D sample at a dyadic level.
pub fn entropy_1d(values: &[(f64, f64)], level: i32) -> EntropyValue {
    let mut cells: HashMap<CellId, f64> = HashMap::with_capacity(1024);
    for &(x, w) in values {
        *cells.entry(CellId::one(dyadic_index(x, level))).or_insert(0.0) += w;
    }
    entropy_of_cells(cells, values.len())
}

/// Pushforward of a planar cloud by the orthogonal projection onto W.
pub fn project_cloud(cloud: &PointCloud, w: ProjectivePoint) -> Vec<(f64, f64)> {
    let u = w.unit();
    cloud.atoms().iter().map(|&(p, wt)| (p.dot(u), wt)).collect()
}

/// Entropy of pi_W(nu) at a dyadic level.
pub fn projection_entropy(cloud: &PointCloud, w: ProjectivePoint, level: i32) -> EntropyValue {
    entropy_1d(&project_cloud(cloud, w), level)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ProjectionSweep {
    pub level: i32,
    /// (angle, bits) per direction of the sweep grid.
    pub readings: Vec<(f64, f64)>,
    pub min_bits: f64,
    pub argmin_angle: f64,
}

/// Sweeps `grid_size` equally spaced directions and returns all readings plus
/// the minimizing direction.
pub fn projection_entropy_sweep(
    cloud: &PointCloud,
    level: i32,
    grid_size: usize,
) -> ProjectionSweep {
    let readings = par_map_indexed(grid_size, |k| {
        let angle = k as f64 * std::f64::consts::PI / grid_size as f64;
        let h = projection_entropy(cloud, ProjectivePoint::from_angle(angle), level);
        (angle, h.bits)
    });
    let (argmin_angle, min_bits) = readings
        .iter()
        .copied()
        .fold((0.0, f64::INFINITY), |best, (a, h)| {
            if h < best.1 {
                (a, h)
            } else {
                best
            }
        });
    ProjectionSweep {
        level,
        readings,
        min_bits,
        argmin_angle,
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SliceReport {
    pub strip_level: i32,
    pub fine_level: i32,
    /// (strip index, strip mass, entropy bits of the conditional measure in
    /// the perpendicular coordinate).
    pub strips: Vec<(i64, f64, f64)>,
    pub weighted_mean_bits: f64,
    pub quantile_25: f64,
    pub quantile_50: f64,
    pub quantile_75: f64,
}

/// Conditions nu on dyadic strips of the pi_W coordinate at `strip_level` and
/// measures the entropy of each conditional measure at `fine_level` in the
/// perpendicular coordinate. Strips below `mass_threshold` are skipped.
pub fn thickened_slice_entropy(
    cloud: &PointCloud,
    w: ProjectivePoint,
    strip_level: i32,
    fine_level: i32,
    mass_threshold: f64,
) -> SliceReport {
    let u = w.unit();
    let v = u.perp();
    let mut strips: HashMap<i64, Vec<(f64, f64)>> = HashMap::new();
    for &(p, wt) in cloud.atoms() {
        let idx = dyadic_index(p.dot(u), strip_level);
        strips.entry(idx).or_default().push((p.dot(v), wt));
    }
    let mut rows: Vec<(i64, f64, f64)> = Vec::new();
    let mut keys: Vec<i64> = strips.keys().copied().collect();
    keys.sort_unstable();
    for k in keys {
        let vals = &strips[&k];
        let mass = kahan_sum(vals.iter().map(|&(_, wt)| wt));
        if mass < mass_threshold {
            continue;
        }
        let h = entropy_1d(vals, fine_level);
        rows.push((k, mass, h.bits));
    }
    let total_mass = kahan_sum(rows.iter().map(|r| r.1)).max(f64::MIN_POSITIVE);
    let weighted_mean_bits = kahan_sum(rows.iter().map(|r| r.1 * r.2)) / total_mass;
    let mut by_bits: Vec<(f64, f64)> = rows.iter().map(|r| (r.2, r.1)).collect();
    by_bits.sort_by(|a, b| a.0.total_cmp(&b.0));
    let quantile = |q: f64| -> f64 {
        let mut acc = 0.0;
        for &(bits, mass) in &by_bits {
            acc += mass / total_mass;
            if acc >= q {
                return bits;
            }
        }
        by_bits.last().map_or(0.0, |r| r.0)
    };
    SliceReport {
        strip_level,
        fine_level,
        weighted_mean_bits,
        quantile_25: quantile(0.25),
        quantile_50: quantile(0.50),
        quantile_75: quantile(0.75),
        strips: rows,
    }
}

/// Maximum mass carried by a window of half-width `delta` over weighted 1D
/// coordinates, with atoms at `removed` indices skipped. Exact two-pointer
/// sweep over the sorted coordinates.
fn max_window_mass(sorted: &[(f64, f64)], delta: f64, removed: &[bool]) -> (f64, usize, usize) {
    let mut best = (0.0, 0usize, 0usize);
    let mut lo = 0usize;
    let mut mass = 0.0;
    for hi in 0..sorted.len() {
        if removed[hi] {
            continue;
        }
        mass += sorted[hi].1;
        while sorted[hi].0 - sorted[lo].0 > 2.0 * delta {
            if !removed[lo] {
                mass -= sorted[lo].1;
            }
            lo += 1;
        }
        if mass > best.0 {
            best = (mass, lo, hi);
        }
    }
    best
}

/// Whether 1 - delta of the mass lies within distance delta of some translate
/// of the line W. Decided exactly on the sorted perpendicular coordinates.
pub fn is_concentrated(cloud: &PointCloud, w: ProjectivePoint, delta: f64) -> bool {
    let v = w.unit().perp();
    let mut coords: Vec<(f64, f64)> = cloud.atoms().iter().map(|&(p, wt)| (p.dot(v), wt)).collect();
    coords.sort_by(|a, b| a.0.total_cmp(&b.0));
    let removed = vec![false; coords.len()];
    let total = kahan_sum(coords.iter().map(|&(_, wt)| wt));
    max_window_mass(&coords, delta, &removed).0 >= (1.0 - delta) * total
}

/// Multi-line version: greedily removes `m` windows of half-width delta and
/// asks whether they jointly carry 1 - delta of the mass.
pub fn is_concentrated_multi(
    cloud: &PointCloud,
    w: ProjectivePoint,
    delta: f64,
    m: usize,
) -> bool {
    let v = w.unit().perp();
    let mut coords: Vec<(f64, f64)> =
        cloud.atoms().iter().map(|&(p, wt)| (p.dot(v), wt)).collect();
    coords.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = kahan_sum(coords.iter().map(|&(_, wt)| wt));
    let mut removed = vec![false; coords.len()];
    let mut captured = 0.0;
    for _ in 0..m {
        let (mass, lo, hi) = max_window_mass(&coords, delta, &removed);
        if mass <= 0.0 {
            break;
        }
        captured += mass;
        let anchor = coords[hi].0;
        for (i, flag) in removed.iter_mut().enumerate().take(hi + 1).skip(lo) {
            if coords[i].0 >= anchor - 2.0 * delta {
                *flag = true;
            }
        }
        if captured >= (1.0 - delta) * total {
            return true;
        }
    }
    captured >= (1.0 - delta) * total
}

/// Point version: whether 1 - delta of the mass lies in a disc of radius
/// delta. Decided over atom-centered discs with a grid accelerator.
pub fn is_point_concentrated(cloud: &PointCloud, delta: f64) -> bool {
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let key = |p: Vec2| ((p.x / delta).floor() as i64, (p.y / delta).floor() as i64);
    for (i, &(p, _)) in cloud.atoms().iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    let total = cloud.total_weight();
    for &(center, _) in cloud.atoms() {
        let (cx, cy) = key(center);
        let mut mass = 0.0;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = grid.get(&(cx + dx, cy + dy)) {
                    for &i in ids {
                        let (p, wt) = cloud.atoms()[i];
                        if p.sub(center).norm() <= delta {
                            mass += wt;
                        }
                    }
                }
            }
        }
        if mass >= (1.0 - delta) * total {
            return true;
        }
    }
    false
}

/// Whether nu is saturated in direction V at scale m: the full scale-m
/// entropy in the V + V_perp frame is within epsilon of one full coordinate
/// plus the entropy of the projection to V_perp. The cloud is expected in
/// rescaled component coordinates (unit square).
pub fn is_saturated(cloud: &PointCloud, v: ProjectivePoint, epsilon: f64, m: i32) -> bool {
    let frame = DyadicFrame::rotated(v, m);
    let h_full = entropy(cloud, &frame).bits / m as f64;
    let h_proj = projection_entropy(cloud, v.perp(), m).bits / m as f64;
    h_full >= 1.0 + h_proj - epsilon
}

/// One sampled dyadic component: the cell, the conditional measure, and its
/// rescaled copy on the unit square.
#[derive(Debug, Clone)]
pub struct ComponentDraw {
    pub cell: CellId,
    pub mass: f64,
    pub conditional: PointCloud,
    pub rescaled: PointCloud,
}

fn rescale_to_unit(points: &PointCloud, cell: CellId, level: i32) -> PointCloud {
    let scale = f64::exp2(level as f64);
    let corner = Vec2::new(cell.0[0] as f64, cell.0[1] as f64);
    PointCloud::new(
        points
            .atoms()
            .iter()
            .map(|&(p, w)| (p.scale(scale).sub(corner), w))
            .collect(),
    )
    .expect("component is nonempty")
}

/// Draws a level-n component of nu: the cell is chosen with probability
/// nu(cell).
pub fn draw_component(cloud: &PointCloud, level: i32, seed: u64) -> Result<ComponentDraw> {
    let mut rng = substream(seed, 0);
    let idx = cloud.draw_index(&mut rng);
    component_at(cloud, level, cloud.atoms()[idx].0)
}

/// The level-n component containing the given point.
pub fn component_at(cloud: &PointCloud, level: i32, at: Vec2) -> Result<ComponentDraw> {
    let frame = DyadicFrame::standard_2d(level);
    let cell = frame.cell(at);
    let atoms: Vec<(Vec2, f64)> = cloud
        .atoms()
        .iter()
        .copied()
        .filter(|&(p, _)| frame.cell(p) == cell)
        .collect();
    if atoms.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let mass = kahan_sum(atoms.iter().map(|&(_, w)| w));
    let conditional = PointCloud::new(atoms)?;
    let rescaled = rescale_to_unit(&conditional, cell, level);
    Ok(ComponentDraw {
        cell,
        mass,
        conditional,
        rescaled,
    })
}

/// Gap |E(H(nu_{x,n}, D_{n+m})) - H(nu, D_{n+m} | D_n)| with the expectation
/// evaluated by full enumeration of occupied level-n cells.
pub fn component_entropy_identity_gap(cloud: &PointCloud, n: i32, m: i32) -> f64 {
    let coarse = DyadicFrame::standard_2d(n);
    let fine = DyadicFrame::standard_2d(n + m);
    let mut groups: HashMap<CellId, Vec<(Vec2, f64)>> = HashMap::new();
    for &(p, w) in cloud.atoms() {
        groups.entry(coarse.cell(p)).or_default().push((p, w));
    }
    let mut keys: Vec<CellId> = groups.keys().copied().collect();
    keys.sort_unstable();
    let mut expectation = KahanSum::new();
    for k in keys {
        let atoms = &groups[&k];
        let mass = kahan_sum(atoms.iter().map(|&(_, w)| w));
        let component = PointCloud::new(atoms.clone()).expect("nonempty group");
        expectation.add(mass * entropy(&component, &fine).bits);
    }
    let conditional = conditional_entropy(cloud, &fine, &coarse).bits;
    (expectation.value() - conditional).abs()
}

/// Deviation of the multiscale identity: |(1/n) H(theta, D_{k+n}) -
/// E_{k<=i<=k+n} ((1/m) H(theta_{x,i}, D_{i+m}))|, both sides by full
/// enumeration.
pub fn multiscale_check(cloud: &PointCloud, k: i32, n: i32, m: i32) -> f64 {
    let lhs = entropy(cloud, &DyadicFrame::standard_2d(k + n)).bits / n as f64;
    let mut acc = KahanSum::new();
    for i in k..=(k + n) {
        let cond = conditional_entropy(
            cloud,
            &DyadicFrame::standard_2d(i + m),
            &DyadicFrame::standard_2d(i),
        );
        acc.add(cond.bits / m as f64);
    }
    let rhs = acc.value() / (n + 1) as f64;
    (lhs - rhs).abs()
}

/// Least-squares fit of H(nu, D_n) against n over a window of levels.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EntropyDimFit {
    pub window: (i32, i32),
    pub per_level: Vec<(i32, f64, f64)>,
    /// Slope of the plug-in entropies: the entropy-dimension estimate.
    pub alpha_hat: f64,
    pub intercept: f64,
    /// Slope using Miller-Madow corrected entropies.
    pub alpha_hat_corrected: f64,
    /// Root-mean-square residual of the fit.
    pub rms_residual: f64,
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Entropy-dimension estimate: slope of scale entropy over the window.
/// Errors with `WindowTooWide` when the plug-in bias rule
/// N >= 50 * (occupied cells at the top level) fails.
pub fn entropy_dimension(cloud: &PointCloud, window: (i32, i32)) -> Result<EntropyDimFit> {
    let (n0, n1) = window;
    if n1 <= n0 {
        return Err(Error::PreconditionViolated {
            reason: format!("window [{n0}, {n1}] must contain at least two levels"),
        });
    }
    let per_level: Vec<(i32, f64, f64)> = (n0..=n1)
        .map(|n| {
            let h = entropy(cloud, &DyadicFrame::standard_2d(n));
            (n, h.bits, h.corrected())
        })
        .collect();
    let top = entropy(cloud, &DyadicFrame::standard_2d(n1));
    let required = 50 * top.occupied_cells;
    if cloud.len() < required {
        return Err(Error::WindowTooWide {
            occupied: top.occupied_cells,
            required,
            available: cloud.len(),
        });
    }
    let pts: Vec<(f64, f64)> = per_level.iter().map(|&(n, h, _)| (n as f64, h)).collect();
    let (alpha_hat, intercept) = least_squares(&pts);
    let pts_c: Vec<(f64, f64)> = per_level.iter().map(|&(n, _, h)| (n as f64, h)).collect();
    let (alpha_hat_corrected, _) = least_squares(&pts_c);
    let rms = (pts
        .iter()
        .map(|&(x, y)| {
            let r = y - (alpha_hat * x + intercept);
            r * r
        })
        .sum::<f64>()
        / pts.len() as f64)
        .sqrt();
    Ok(EntropyDimFit {
        window,
        per_level,
        alpha_hat,
        intercept,
        alpha_hat_corrected,
        rms_residual: rms,
    })
}

/// 1D variant of the entropy-dimension fit, for projected measures.
pub fn entropy_dimension_1d(values: &[(f64, f64)], window: (i32, i32)) -> Result<EntropyDimFit> {
    let (n0, n1) = window;
    if n1 <= n0 {
        return Err(Error::PreconditionViolated {
            reason: format!("window [{n0}, {n1}] must contain at least two levels"),
        });
    }
    let per_level: Vec<(i32, f64, f64)> = (n0..=n1)
        .map(|n| {
            let h = entropy_1d(values, n);
            (n, h.bits, h.corrected())
        })
        .collect();
    let top = entropy_1d(values, n1);
    let required = 50 * top.occupied_cells;
    if values.len() < required {
        return Err(Error::WindowTooWide {
            occupied: top.occupied_cells,
            required,
            available: values.len(),
        });
    }
    let pts: Vec<(f64, f64)> = per_level.iter().map(|&(n, h, _)| (n as f64, h)).collect();
    let (alpha_hat, intercept) = least_squares(&pts);
    let pts_c: Vec<(f64, f64)> = per_level.iter().map(|&(n, _, h)| (n as f64, h)).collect();
    let (alpha_hat_corrected, _) = least_squares(&pts_c);
    let rms = (pts
        .iter()
        .map(|&(x, y)| {
            let r = y - (alpha_hat * x + intercept);
            r * r
        })
        .sum::<f64>()
        / pts.len() as f64)
        .sqrt();
    Ok(EntropyDimFit {
        window,
        per_level,
        alpha_hat,
        intercept,
        alpha_hat_corrected,
        rms_residual: rms,
    })
}

/// Empirical check of uniform entropy dimension: the fraction of sampled
/// components nu^{x,i}, i uniform in 0..=n, whose normalized scale-m entropy
/// lies within epsilon of alpha_hat.
pub fn uniform_entropy_dimension_test(
    cloud: &PointCloud,
    alpha_hat: f64,
    epsilon: f64,
    m: i32,
    n: i32,
    draws: usize,
    seed: u64,
) -> f64 {
    let hits = par_map_indexed(draws, |j| {
        let mut rng = substream(seed, j as u64);
        let i = rng.gen_range(0..=n);
        let idx = cloud.draw_index(&mut rng);
        let at = cloud.atoms()[idx].0;
        match component_at(cloud, i, at) {
            Ok(c) => {
                let h = entropy(&c.rescaled, &DyadicFrame::standard_2d(m)).bits / m as f64;
                u32::from((h - alpha_hat).abs() < epsilon)
            }
            Err(_) => 0,
        }
    });
    hits.iter().map(|&h| h as f64).sum::<f64>() / draws as f64
}

/// Total variation distance between the level-n dyadic histograms of two
/// planar clouds.
pub fn histogram_tv(a: &PointCloud, b: &PointCloud, level: i32) -> f64 {
    let frame = DyadicFrame::standard_2d(level);
    let ca = bin_cloud(a, &frame);
    let cb = bin_cloud(b, &frame);
    let mut keys: Vec<CellId> = ca.keys().chain(cb.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let ta = kahan_sum(ca.values().copied());
    let tb = kahan_sum(cb.values().copied());
    let mut acc = KahanSum::new();
    for k in keys {
        let pa = ca.get(&k).copied().unwrap_or(0.0) / ta;
        let pb = cb.get(&k).copied().unwrap_or(0.0) / tb;
        acc.add((pa - pb).abs());
    }
    0.5 * acc.value()
}

/// Exact total-variation distance of the component-of-components identity on
/// a 1D atomic measure with exactly dyadic atom positions.
///
/// Atoms sit at `nums[i] / 2^depth`; `P_n` draws a component nu_{x,i} with i
/// uniform in 0..=n, while `Q_{n,m}` first draws nu_{x,i} and then a
/// component of it at level j uniform in i..=i+m. Both distributions live on
/// pairs (level, cell); the TV distance is evaluated exactly.
pub fn component_resampling_tv(nums: &[u64], weights: &[f64], depth: u32, n: u32, m: u32) -> f64 {
    assert_eq!(nums.len(), weights.len());
    let total: f64 = weights.iter().sum();
    // Group atoms by cell at level j: key = num >> (depth - j) for j < depth,
    // the full num beyond the resolution depth.
    let cell_key = |num: u64, j: u32| -> u64 {
        if j >= depth {
            num
        } else {
            num >> (depth - j)
        }
    };
    let cell_mass = |j: u32| -> HashMap<u64, f64> {
        let mut map = HashMap::new();
        for (i, &num) in nums.iter().enumerate() {
            *map.entry(cell_key(num, j)).or_insert(0.0) += weights[i] / total;
        }
        map
    };
    // P(level j, cell C) = nu(C) / (n + 1) for 0 <= j <= n.
    // Q(level j, cell C) = nu(C) * #{i in [max(0, j - m), min(n, j)]} / ((n+1)(m+1)).
    let mut tv = KahanSum::new();
    for j in 0..=(n + m) {
        let masses = cell_mass(j.min(depth));
        // Beyond `depth` the partition into cells is stable, but the level
        // label still distinguishes outcomes, so each j is its own row.
        let p_factor = if j <= n { 1.0 / (n as f64 + 1.0) } else { 0.0 };
        let lo = j.saturating_sub(m);
        let hi = j.min(n);
        let count = if hi >= lo { (hi - lo + 1) as f64 } else { 0.0 };
        let q_factor = count / ((n as f64 + 1.0) * (m as f64 + 1.0));
        let mut level_masses: Vec<f64> = masses.values().copied().collect();
        level_masses.sort_by(f64::total_cmp);
        for mass in level_masses {
            tv.add((mass * p_factor - mass * q_factor).abs());
        }
    }
    0.5 * tv.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::EmpiricalMeasure;

    fn grid_cloud(k: usize) -> PointCloud {
        // k x k equally weighted grid points strictly inside [0,1)^2.
        let mut pts = Vec::new();
        for i in 0..k {
            for j in 0..k {
                pts.push(Vec2::new(
                    (i as f64 + 0.5) / k as f64,
                    (j as f64 + 0.5) / k as f64,
                ));
            }
        }
        PointCloud::from_points(pts).unwrap()
    }

    #[test]
    fn point_mass_has_zero_entropy() {
        let cloud = PointCloud::from_points(vec![Vec2::new(0.3, 0.3); 5]).unwrap();
        let h = entropy(&cloud, &DyadicFrame::standard_2d(4));
        assert_eq!(h.bits, 0.0);
    }

    #[test]
    fn four_corners_give_two_bits() {
        let cloud = PointCloud::from_points(vec![
            Vec2::new(0.1, 0.1),
            Vec2::new(0.9, 0.1),
            Vec2::new(0.1, 0.9),
            Vec2::new(0.9, 0.9),
        ])
        .unwrap();
        let h = entropy(&cloud, &DyadicFrame::standard_2d(1));
        assert!((h.bits - 2.0).abs() < 1e-12);
    }

    #[test]
    fn chain_rule_is_exact() {
        let cloud = grid_cloud(16);
        let fine = DyadicFrame::standard_2d(4);
        let coarse = DyadicFrame::standard_2d(2);
        let h_fine = entropy(&cloud, &fine).bits;
        let h_coarse = entropy(&cloud, &coarse).bits;
        let h_cond = conditional_entropy(&cloud, &fine, &coarse).bits;
        // Fine refines coarse here, so H(join) = H(fine).
        assert!((h_fine - (h_coarse + h_cond)).abs() < 1e-12);
    }

    #[test]
    fn concavity_sandwich_on_mixtures() {
        let mut rng = substream(31, 0);
        for _ in 0..50 {
            let a = PointCloud::from_points(
                (0..64)
                    .map(|_| Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
                    .collect(),
            )
            .unwrap();
            let b = PointCloud::from_points(
                (0..64)
                    .map(|_| Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
                    .collect(),
            )
            .unwrap();
            let q: f64 = rng.gen_range(0.05..0.95);
            let mut atoms: Vec<(Vec2, f64)> =
                a.atoms().iter().map(|&(p, w)| (p, q * w)).collect();
            atoms.extend(b.atoms().iter().map(|&(p, w)| (p, (1.0 - q) * w)));
            let mix = EmpiricalMeasure::new(atoms).unwrap();
            let frame = DyadicFrame::standard_2d(3);
            let hm = entropy(&mix, &frame).bits;
            let ha = entropy(&a, &frame).bits;
            let hb = entropy(&b, &frame).bits;
            let hq = -(q * q.log2() + (1.0 - q) * (1.0 - q).log2());
            let lower = q * ha + (1.0 - q) * hb;
            assert!(hm >= lower - 1e-10, "concavity failed: {hm} < {lower}");
            assert!(
                hm <= lower + hq + 1e-10,
                "almost-convexity failed: {hm} > {} + {hq}",
                lower
            );
        }
    }

    #[test]
    fn component_identity_exact_on_discrete_measures() {
        let mut rng = substream(32, 0);
        let cloud = EmpiricalMeasure::new(
            (0..300)
                .map(|_| {
                    (
                        Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)),
                        rng.gen_range(0.1..1.0),
                    )
                })
                .collect(),
        )
        .unwrap();
        assert!(component_entropy_identity_gap(&cloud, 2, 3) < 1e-12);
    }

    #[test]
    fn component_in_single_cell_is_whole_measure() {
        let cloud = PointCloud::from_points(vec![Vec2::new(0.1, 0.1), Vec2::new(0.2, 0.2)]).unwrap();
        let c = draw_component(&cloud, 1, 3).unwrap();
        assert!((c.mass - 1.0).abs() < 1e-12);
        assert_eq!(c.conditional.len(), 2);
        // Rescaled support lands in the unit square.
        for &(p, _) in c.rescaled.atoms() {
            assert!((0.0..1.0).contains(&p.x) && (0.0..1.0).contains(&p.y));
        }
    }

    #[test]
    fn resampling_tv_bound_at_depth() {
        // Atoms at k/16 with uneven weights; exact TV obeys the O(m/n) bound
        // with constant at most 4.
        let nums: Vec<u64> = (0..16).collect();
        let weights: Vec<f64> = (0..16).map(|k| 1.0 + (k % 5) as f64).collect();
        let (n, m) = (512u32, 16u32);
        let tv = component_resampling_tv(&nums, &weights, 4, n, m);
        assert!(tv <= 4.0 * m as f64 / n as f64, "tv = {tv}");
        assert!(tv > 0.0);
    }

    #[test]
    fn multiscale_identity_on_uniform_square() {
        let cloud = grid_cloud(64);
        let dev = multiscale_check(&cloud, 0, 6, 2);
        assert!(dev <= 8.0 * 2.0 / 6.0, "deviation {dev}");
    }

    #[test]
    fn projection_entropy_of_segment() {
        let cloud = PointCloud::from_points(
            (0..4096)
                .map(|i| Vec2::new((i as f64 + 0.5) / 4096.0, 0.25))
                .collect(),
        )
        .unwrap();
        let n = 5;
        let along = projection_entropy(&cloud, ProjectivePoint::E1, n).bits;
        let across = projection_entropy(&cloud, ProjectivePoint::e2(), n).bits;
        assert!((along - n as f64).abs() < 1e-9);
        assert_eq!(across, 0.0);
        let sweep = projection_entropy_sweep(&cloud, n, 64);
        assert!(sweep.min_bits < 1e-12);
        assert!((sweep.argmin_angle - std::f64::consts::FRAC_PI_2).abs() < 0.05);
    }

    #[test]
    fn thickened_slices_of_product_measure() {
        let cloud = grid_cloud(64);
        let report = thickened_slice_entropy(&cloud, ProjectivePoint::E1, 2, 5, 1e-6);
        // Conditional on a vertical strip, the y coordinate is uniform:
        // fine_level bits per strip.
        assert_eq!(report.strips.len(), 4);
        for &(_, mass, bits) in &report.strips {
            assert!((mass - 0.25).abs() < 1e-12);
            assert!((bits - 5.0).abs() < 0.05, "bits {bits}");
        }
    }

    #[test]
    fn concentration_examples() {
        let segment = PointCloud::from_points(
            (0..512).map(|i| Vec2::new(i as f64 / 512.0, 0.0)).collect(),
        )
        .unwrap();
        assert!(is_concentrated(&segment, ProjectivePoint::E1, 0.01));
        let square = grid_cloud(32);
        assert!(!is_concentrated(&square, ProjectivePoint::E1, 0.1));
        assert!(!is_point_concentrated(&square, 0.1));
        assert!(is_point_concentrated(
            &PointCloud::from_points(vec![Vec2::new(0.5, 0.5); 3]).unwrap(),
            0.01
        ));

        // Two parallel segments 0.5 apart: multi with m = 2 sees them, a
        // single window does not.
        let two: Vec<Vec2> = (0..256)
            .map(|i| Vec2::new(i as f64 / 256.0, 0.0))
            .chain((0..256).map(|i| Vec2::new(i as f64 / 256.0, 0.5)))
            .collect();
        let two = PointCloud::from_points(two).unwrap();
        assert!(!is_concentrated(&two, ProjectivePoint::E1, 0.01));
        assert!(is_concentrated_multi(&two, ProjectivePoint::E1, 0.01, 2));
    }

    #[test]
    fn concentration_monotone_in_delta() {
        let mut rng = substream(33, 0);
        let cloud = PointCloud::from_points(
            (0..256)
                .map(|_| Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.2)))
                .collect(),
        )
        .unwrap();
        let mut prev = false;
        for delta in [0.01, 0.05, 0.1, 0.2, 0.5] {
            let cur = is_concentrated(&cloud, ProjectivePoint::E1, delta);
            assert!(!prev || cur, "concentration not monotone at delta {delta}");
            prev = cur;
        }
    }

    #[test]
    fn saturation_examples() {
        let square = grid_cloud(128);
        assert!(is_saturated(&square, ProjectivePoint::e2(), 0.2, 6));
        let segment = PointCloud::from_points(
            (0..4096)
                .map(|i| Vec2::new((i as f64 + 0.5) / 4096.0, 0.5))
                .collect(),
        )
        .unwrap();
        assert!(!is_saturated(&segment, ProjectivePoint::e2(), 0.2, 6));
        // Monotone in epsilon: once saturated, stays saturated for larger eps.
        let mut prev = false;
        for eps in [0.01, 0.1, 0.5, 1.0, 2.0] {
            let cur = is_saturated(&segment, ProjectivePoint::e2(), eps, 6);
            assert!(!prev || cur);
            prev = cur;
        }
    }

    #[test]
    fn entropy_dimension_of_uniform_square() {
        let cloud = grid_cloud(256);
        let fit = entropy_dimension(&cloud, (2, 5)).unwrap();
        assert!((fit.alpha_hat - 2.0).abs() < 0.02, "{}", fit.alpha_hat);
    }

    #[test]
    fn entropy_dimension_window_guard() {
        let cloud = grid_cloud(64);
        // 4096 atoms cannot support level 6 under the 50x rule.
        let err = entropy_dimension(&cloud, (2, 6)).unwrap_err();
        assert!(matches!(err, Error::WindowTooWide { .. }));
    }

    #[test]
    fn uniform_entropy_dimension_on_square() {
        let cloud = grid_cloud(128);
        let frac = uniform_entropy_dimension_test(&cloud, 2.0, 0.3, 4, 2, 200, 9);
        assert!(frac >= 0.95, "fraction {frac}");
        let point = PointCloud::from_points(vec![Vec2::new(0.5, 0.5); 4]).unwrap();
        let frac = uniform_entropy_dimension_test(&point, 0.0, 0.1, 4, 4, 50, 9);
        assert!((frac - 1.0).abs() < 1e-12);
    }

    #[test]
    fn translation_changes_entropy_by_at_most_two_bits() {
        let mut rng = substream(34, 0);
        for _ in 0..20 {
            let cloud = PointCloud::from_points(
                (0..512)
                    .map(|_| Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
                    .collect(),
            )
            .unwrap();
            let shift = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let shifted = PointCloud::new(
                cloud.atoms().iter().map(|&(p, w)| (p.add(shift), w)).collect(),
            )
            .unwrap();
            let frame = DyadicFrame::standard_2d(4);
            let d = (entropy(&cloud, &frame).bits - entropy(&shifted, &frame).bits).abs();
            assert!(d <= 2.0, "translation moved entropy by {d}");
        }
    }

    #[test]
    fn commensurability_of_rotated_frames() {
        let mut rng = substream(35, 0);
        for trial in 0..100 {
            let cloud = PointCloud::from_points(
                (0..256)
                    .map(|_| Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
                    .collect(),
            )
            .unwrap();
            let w = ProjectivePoint::from_angle(rng.gen_range(0.0..std::f64::consts::PI));
            let n = 3 + (trial % 3) as i32;
            let hs = entropy(&cloud, &DyadicFrame::standard_2d(n)).bits;
            let hr = entropy(&cloud, &DyadicFrame::rotated(w, n)).bits;
            assert!((hs - hr).abs() <= 9f64.log2() + 1e-9, "{hs} vs {hr}");
        }
    }

    #[test]
    fn histogram_tv_of_identical_clouds_is_zero() {
        let cloud = grid_cloud(32);
        assert_eq!(histogram_tv(&cloud, &cloud, 5), 0.0);
        let other = PointCloud::from_points(vec![Vec2::new(3.0, 3.0)]).unwrap();
        assert!((histogram_tv(&cloud, &other, 5) - 1.0).abs() < 1e-12);
    }
}
