//! Orientation distribution functions, fibre-mode extraction and the
//! reconstruction quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{CoefficientField, SignalField, VectorField};
use crate::linalg::Matrix;
use crate::sphere::{Tessellation, UnitDirection};

/// Default relative height a maximum must reach to count as a fibre.
pub const DEFAULT_REL_THRESHOLD: f64 = 0.4;
/// Default angle below which two maxima are treated as one fibre.
pub const DEFAULT_MERGE_ANGLE_DEG: f64 = 15.0;
/// Angle charged for a true fibre with no estimated counterpart.
pub const UNMATCHED_PENALTY_DEG: f64 = 90.0;

/// Per-voxel ODF samples at the vertices of a tessellation.
#[derive(Clone, Debug, PartialEq)]
pub struct OdfField {
    /// One channel per tessellation vertex.
    pub values: VectorField,
    /// Voxels whose raw ODF was identically zero (replaced by a uniform ODF).
    pub degenerate: Vec<usize>,
}

impl OdfField {
    pub fn dims(&self) -> [usize; 3] {
        self.values.dims()
    }

    pub fn voxel(&self, r: usize) -> &[f64] {
        self.values.voxel(r)
    }
}

/// `Q c(r)` per voxel, negatives clamped to zero, normalised to unit sum.
pub fn odf_from_coefficients(c: &CoefficientField, q: &Matrix, tess: &Tessellation) -> Result<OdfField> {
    if q.cols() != c.channels() {
        return Err(Error::DimensionMismatch(format!(
            "ODF kernel has {} columns, coefficient field has {} channels",
            q.cols(),
            c.channels()
        )));
    }
    if q.rows() != tess.len() {
        return Err(Error::DimensionMismatch(format!(
            "ODF kernel has {} rows for {} tessellation vertices",
            q.rows(),
            tess.len()
        )));
    }
    let n = tess.len();
    let values = VectorField::from_voxels(c.dims(), n, |r, out| {
        q.matvec_into(c.voxel(r), out);
        normalize_odf(out);
    });
    let degenerate: Vec<usize> = (0..values.n_voxels())
        .filter(|&r| {
            let v = values.voxel(r);
            // `normalize_odf` writes exact uniform values for zero input
            let u = 1.0 / n as f64;
            v.iter().all(|&x| x == u) && {
                let mut raw = vec![0.0; n];
                q.matvec_into(c.voxel(r), &mut raw);
                raw.iter().all(|&x| x <= 0.0)
            }
        })
        .collect();
    if !degenerate.is_empty() {
        log::warn!(
            "{} voxel(s) have an all-zero ODF; replaced by the uniform ODF",
            degenerate.len()
        );
    }
    Ok(OdfField { values, degenerate })
}

/// Clamps negatives and scales to unit sum; all-zero input becomes uniform.
/// Returns `false` in the degenerate case.
pub fn normalize_odf(values: &mut [f64]) -> bool {
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    let total: f64 = values.iter().sum();
    if total > 0.0 && total.is_finite() {
        values.iter_mut().for_each(|v| *v /= total);
        true
    } else {
        let u = 1.0 / values.len() as f64;
        values.iter_mut().for_each(|v| *v = u);
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub direction: UnitDirection,
    pub value: f64,
    pub vertex: usize,
}

/// Fibre directions found in every voxel.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub rel_threshold: f64,
    pub merge_angle_deg: f64,
    pub voxels: Vec<Vec<Mode>>,
}

impl ModeSet {
    pub fn counts(&self) -> Vec<usize> {
        self.voxels.iter().map(Vec::len).collect()
    }

    pub fn directions(&self) -> Vec<Vec<UnitDirection>> {
        self.voxels
            .iter()
            .map(|v| v.iter().map(|m| m.direction).collect())
            .collect()
    }
}

/// Local maxima of a spherical function sampled on `tess`.
///
/// Every vertex climbs to its highest neighbour until no neighbour is
/// strictly higher. The distinct end points are kept when their height above
/// the global minimum is at least `rel_threshold` times the value range, then
/// visited from highest to lowest, dropping any within `merge_angle_deg`
/// (axially) of one already kept. That merges antipodal copies.
pub fn find_modes(odf: &[f64], tess: &Tessellation, rel_threshold: f64, merge_angle_deg: f64) -> Result<Vec<Mode>> {
    if !(rel_threshold > 0.0 && rel_threshold < 1.0) {
        return Err(invalid(format!("rel_threshold {rel_threshold} must lie in (0, 1)")));
    }
    if !(merge_angle_deg >= 0.0) {
        return Err(invalid("merge angle must be non-negative"));
    }
    if odf.len() != tess.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} ODF values for {} vertices",
            odf.len(),
            tess.len()
        )));
    }
    let (lo, hi) = odf
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    if !(range > 1e-12 * hi.abs().max(f64::MIN_POSITIVE)) {
        return Ok(Vec::new());
    }

    let mut is_peak = vec![false; odf.len()];
    let mut summit = vec![usize::MAX; odf.len()];
    for start in 0..odf.len() {
        let mut path = Vec::new();
        let mut v = start;
        let top = loop {
            if summit[v] != usize::MAX {
                break summit[v];
            }
            path.push(v);
            let best = tess.neighbors[v]
                .iter()
                .copied()
                .fold(v, |b, w| if odf[w] > odf[b] { w } else { b });
            if best == v {
                break v;
            }
            v = best;
        };
        for p in path {
            summit[p] = top;
        }
        is_peak[top] = true;
    }

    let cutoff = rel_threshold * range;
    let mut peaks: Vec<usize> = (0..odf.len())
        .filter(|&i| is_peak[i] && odf[i] - lo >= cutoff)
        .collect();
    peaks.sort_by(|&a, &b| odf[b].total_cmp(&odf[a]).then(a.cmp(&b)));

    let mut modes: Vec<Mode> = Vec::new();
    for i in peaks {
        let d = tess.vertices[i];
        if modes
            .iter()
            .all(|m| angular_error(&m.direction, &d) > merge_angle_deg)
        {
            modes.push(Mode {
                direction: d,
                value: odf[i],
                vertex: i,
            });
        }
    }
    Ok(modes)
}

/// [`find_modes`] on every voxel of an ODF field.
pub fn find_modes_field(odf: &OdfField, tess: &Tessellation, rel_threshold: f64, merge_angle_deg: f64) -> Result<ModeSet> {
    use rayon::prelude::*;
    let voxels = (0..odf.values.n_voxels())
        .into_par_iter()
        .map(|r| find_modes(odf.voxel(r), tess, rel_threshold, merge_angle_deg))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModeSet {
        rel_threshold,
        merge_angle_deg,
        voxels,
    })
}

/// Axial angle in degrees, `acos |a . b|`.
pub fn angular_error(a: &UnitDirection, b: &UnitDirection) -> f64 {
    a.dot(b).abs().min(1.0).acos().to_degrees()
}

/// Mean angular error over all true fibres.
///
/// In each voxel, (true, estimated) pairs are taken in increasing order of
/// angle, each direction used at most once; true fibres left without a
/// partner count as [`UNMATCHED_PENALTY_DEG`].
pub fn match_and_average_error(truth: &[Vec<UnitDirection>], estimates: &[Vec<UnitDirection>]) -> Result<f64> {
    if truth.len() != estimates.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} truth voxels vs {} estimated voxels",
            truth.len(),
            estimates.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (t, e) in truth.iter().zip(estimates) {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(t.len() * e.len());
        for (i, ti) in t.iter().enumerate() {
            for (j, ej) in e.iter().enumerate() {
                pairs.push((angular_error(ti, ej), i, j));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut used_t = vec![false; t.len()];
        let mut used_e = vec![false; e.len()];
        let mut matched = 0;
        for (delta, i, j) in pairs {
            if !used_t[i] && !used_e[j] {
                used_t[i] = true;
                used_e[j] = true;
                total += delta;
                matched += 1;
            }
        }
        total += (t.len() - matched) as f64 * UNMATCHED_PENALTY_DEG;
        count += t.len();
    }
    if count == 0 {
        return Err(invalid("no true fibres to compare against"));
    }
    Ok(total / count as f64)
}

/// Voxel-averaged `|s - s_hat|^2 / |s|^2`. Voxels with a zero reference are
/// skipped (with a warning) and excluded from the average.
pub fn nmse(reference: &SignalField, estimate: &SignalField) -> Result<f64> {
    if !reference.same_shape(estimate) {
        return Err(Error::DimensionMismatch(format!(
            "reference {:?}x{} vs estimate {:?}x{}",
            reference.dims(),
            reference.channels(),
            estimate.dims(),
            estimate.channels()
        )));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for (s, e) in reference.voxels().zip(estimate.voxels()) {
        let den: f64 = s.iter().map(|v| v * v).sum();
        if den == 0.0 {
            continue;
        }
        let num: f64 = s.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum();
        sum += num / den;
        used += 1;
    }
    let skipped = reference.n_voxels() - used;
    if skipped > 0 {
        log::warn!("nmse: skipped {skipped} voxel(s) with a zero reference signal");
    }
    if used == 0 {
        return Err(invalid("every reference voxel is zero"));
    }
    Ok(sum / used as f64)
}

/// `100 * mean |M - M_hat| / M` in percent.
pub fn false_detection_rate(truth_counts: &[usize], estimated_counts: &[usize]) -> Result<f64> {
    if truth_counts.len() != estimated_counts.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} truth counts vs {} estimated counts",
            truth_counts.len(),
            estimated_counts.len()
        )));
    }
    if truth_counts.is_empty() {
        return Err(invalid("no voxels"));
    }
    if truth_counts.contains(&0) {
        return Err(invalid("every voxel must contain at least one true fibre"));
    }
    let sum: f64 = truth_counts
        .iter()
        .zip(estimated_counts)
        .map(|(&m, &e)| (m as f64 - e as f64).abs() / m as f64)
        .sum();
    Ok(100.0 * sum / truth_counts.len() as f64)
}
