//! Synthetic multi-tensor diffusion phantoms and Rician noise.
//!
//! Each voxel holds up to a few "fibres", each an axially symmetric
//! diffusion tensor, and the noise-free signal along direction `u` is
//! `s0 * sum_i a_i * exp(-b u^T D_i u)`.
//!
//! Layout conventions for the two built-in phantoms (0-indexed voxel
//! coordinates, `y` is the row):
//!
//! * `phantom1`: 12x12x1. Horizontal band in rows 5-6 running along `x`,
//!   vertical band in columns 5-6 running along `y`, and a through-plane
//!   fibre along `z` in every voxel.
//! * `phantom2`: 16x16x1. The same bands moved to rows/columns 7-8, plus a
//!   ring of radius 6 around the grid centre whose fibre follows the local
//!   tangent. A voxel belongs to the ring when its centre lies within half a
//!   voxel of the circle.
//!
//! All fibres in a voxel share its weight equally.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{l2_norm, voxel_index, SignalField, VectorField};
use crate::sphere::UnitDirection;

/// Parallel diffusivity of the phantom fibres, mm^2/s.
pub const FIBER_PARALLEL_DIFFUSIVITY: f64 = 1700e-6;
/// Perpendicular diffusivity of the phantom fibres, mm^2/s.
pub const FIBER_PERPENDICULAR_DIFFUSIVITY: f64 = 300e-6;

/// Symmetric 3x3 diffusion tensor in mm^2/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor(pub [[f64; 3]; 3]);

impl Tensor {
    /// Validates symmetry and positive definiteness.
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        let t = Tensor(m);
        let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..3 {
            for j in 0..i {
                if (m[i][j] - m[j][i]).abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                    return Err(invalid("tensor is not symmetric"));
                }
            }
        }
        if !t.is_positive_definite() {
            return Err(invalid("tensor is not positive definite"));
        }
        Ok(t)
    }

    pub fn diagonal(a: f64, b: f64, c: f64) -> Self {
        Tensor([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    /// `perpendicular * I + (parallel - perpendicular) * v v^T`
    pub fn axially_symmetric(principal: UnitDirection, parallel: f64, perpendicular: f64) -> Self {
        let v = principal.as_array();
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (parallel - perpendicular) * v[i] * v[j];
            }
            m[i][i] += perpendicular;
        }
        Tensor(m)
    }

    /// The default fibre tensor oriented along `principal`.
    pub fn fiber(principal: UnitDirection) -> Self {
        Self::axially_symmetric(
            principal,
            FIBER_PARALLEL_DIFFUSIVITY,
            FIBER_PERPENDICULAR_DIFFUSIVITY,
        )
    }

    /// Builds `sum_i values[i] * axes[i] axes[i]^T`.
    pub fn from_eigen(values: [f64; 3], axes: [[f64; 3]; 3]) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (lam, a) in values.iter().zip(axes.iter()) {
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] += lam * a[i] * a[j];
                }
            }
        }
        Tensor(m)
    }

    pub fn quadratic_form(&self, u: &UnitDirection) -> f64 {
        let u = u.as_array();
        let m = &self.0;
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += u[i] * m[i][j] * u[j];
            }
        }
        acc
    }

    /// Sylvester's criterion on the leading principal minors.
    pub fn is_positive_definite(&self) -> bool {
        let m = &self.0;
        let d1 = m[0][0];
        let d2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let d3 = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        d1 > 0.0 && d2 > 0.0 && d3 > 0.0
    }

    /// Eigenvalues in descending order with matching unit eigenvectors,
    /// by cyclic Jacobi rotations.
    pub fn eigen(&self) -> ([f64; 3], [[f64; 3]; 3]) {
        let mut a = self.0;
        let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for _ in 0..50 {
            let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
            if off < 1e-40 {
                break;
            }
            for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
        let values = [a[order[0]][order[0]], a[order[1]][order[1]], a[order[2]][order[2]]];
        let mut vectors = [[0.0; 3]; 3];
        for (slot, &i) in order.iter().enumerate() {
            vectors[slot] = [v[0][i], v[1][i], v[2][i]];
        }
        (values, vectors)
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        self.eigen().0
    }

    pub fn mean_diffusivity(&self) -> f64 {
        (self.0[0][0] + self.0[1][1] + self.0[2][2]) / 3.0
    }

    pub fn fractional_anisotropy(&self) -> f64 {
        let ev = self.eigenvalues();
        let md = ev.iter().sum::<f64>() / 3.0;
        let num: f64 = ev.iter().map(|l| (l - md).powi(2)).sum();
        let den: f64 = ev.iter().map(|l| l * l).sum();
        (1.5 * num / den).sqrt()
    }
}

/// One fibre compartment of a voxel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberComponent {
    pub weight: f64,
    pub tensor: Tensor,
    pub principal_direction: UnitDirection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoxelModel {
    pub components: Vec<FiberComponent>,
    pub s0: f64,
}

impl VoxelModel {
    /// Equal-weight mixture of default fibres along `directions`.
    pub fn equal_weights(directions: &[UnitDirection]) -> Self {
        let w = 1.0 / directions.len() as f64;
        Self {
            components: directions
                .iter()
                .map(|&d| FiberComponent {
                    weight: w,
                    tensor: Tensor::fiber(d),
                    principal_direction: d,
                })
                .collect(),
            s0: 1.0,
        }
    }

    pub fn fiber_count(&self) -> usize {
        self.components.len()
    }

    pub fn fiber_directions(&self) -> Vec<UnitDirection> {
        self.components.iter().map(|c| c.principal_direction).collect()
    }
}

/// Multi-tensor signal `s0 * sum_i a_i exp(-b u^T D_i u)`.
pub fn synth_signal(model: &VoxelModel, b: f64, u: &UnitDirection) -> f64 {
    model.s0
        * model
            .components
            .iter()
            .map(|c| c.weight * (-b * c.tensor.quadratic_form(u)).exp())
            .sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomLayout {
    /// Rows (y index) of the horizontal band, fibres along x.
    pub horizontal_band_rows: Vec<usize>,
    /// Columns (x index) of the vertical band, fibres along y.
    pub vertical_band_columns: Vec<usize>,
    /// Ring centre (x, y) and radius in voxel units, if any.
    pub ring: Option<([f64; 2], f64)>,
    pub through_plane: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    pub name: String,
    pub dims: [usize; 3],
    pub voxels: Vec<VoxelModel>,
    pub layout: PhantomLayout,
}

impl Phantom {
    pub fn n_voxels(&self) -> usize {
        self.voxels.len()
    }

    pub fn fiber_counts(&self) -> Vec<usize> {
        self.voxels.iter().map(VoxelModel::fiber_count).collect()
    }

    pub fn fiber_directions(&self) -> Vec<Vec<UnitDirection>> {
        self.voxels.iter().map(VoxelModel::fiber_directions).collect()
    }

    pub fn voxel(&self, ix: usize, iy: usize, iz: usize) -> &VoxelModel {
        &self.voxels[voxel_index(self.dims, ix, iy, iz)]
    }

    pub fn ground_truth(&self) -> GroundTruth {
        let [_, ny, nz] = self.dims;
        GroundTruth {
            name: self.name.clone(),
            dims: self.dims,
            layout: self.layout.clone(),
            voxels: self
                .voxels
                .iter()
                .enumerate()
                .map(|(r, v)| VoxelTruth {
                    index: [r / (ny * nz), (r / nz) % ny, r % nz],
                    s0: v.s0,
                    fibers: v
                        .components
                        .iter()
                        .map(|c| FiberTruth {
                            direction: c.principal_direction,
                            weight: c.weight,
                            eigenvalues: c.tensor.eigenvalues(),
                            tensor: c.tensor,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// JSON-serializable ground truth of a phantom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub name: String,
    pub dims: [usize; 3],
    pub layout: PhantomLayout,
    pub voxels: Vec<VoxelTruth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoxelTruth {
    pub index: [usize; 3],
    pub s0: f64,
    pub fibers: Vec<FiberTruth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberTruth {
    pub direction: UnitDirection,
    pub weight: f64,
    /// Descending eigenvalues of `tensor`, for reference.
    pub eigenvalues: [f64; 3],
    pub tensor: Tensor,
}

impl GroundTruth {
    pub fn fiber_counts(&self) -> Vec<usize> {
        self.voxels.iter().map(|v| v.fibers.len()).collect()
    }

    pub fn fiber_directions(&self) -> Vec<Vec<UnitDirection>> {
        self.voxels
            .iter()
            .map(|v| v.fibers.iter().map(|f| f.direction).collect())
            .collect()
    }

    /// Rebuilds the voxel models (axially symmetric tensors from the stored
    /// eigenvalues).
    pub fn to_phantom(&self) -> Phantom {
        Phantom {
            name: self.name.clone(),
            dims: self.dims,
            layout: self.layout.clone(),
            voxels: self
                .voxels
                .iter()
                .map(|v| VoxelModel {
                    s0: v.s0,
                    components: v
                        .fibers
                        .iter()
                        .map(|f| FiberComponent {
                            weight: f.weight,
                            tensor: f.tensor,
                            principal_direction: f.direction,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

fn build_phantom(name: &str, n: usize, layout: PhantomLayout) -> Phantom {
    let dims = [n, n, 1];
    let mut voxels = Vec::with_capacity(n * n);
    for ix in 0..n {
        for iy in 0..n {
            let mut dirs = Vec::new();
            if layout.horizontal_band_rows.contains(&iy) {
                dirs.push(UnitDirection::X);
            }
            if layout.vertical_band_columns.contains(&ix) {
                dirs.push(UnitDirection::Y);
            }
            if let Some(([cx, cy], radius)) = layout.ring {
                let dx = ix as f64 - cx;
                let dy = iy as f64 - cy;
                let dist = (dx * dx + dy * dy).sqrt();
                if (dist - radius).abs() <= 0.5 {
                    // tangent is the radius vector turned by 90 degrees
                    dirs.push(UnitDirection::new(-dy, dx, 0.0).expect("off-centre voxel"));
                }
            }
            if layout.through_plane {
                dirs.push(UnitDirection::Z);
            }
            voxels.push(VoxelModel::equal_weights(&dirs));
        }
    }
    Phantom {
        name: name.to_string(),
        dims,
        voxels,
        layout,
    }
}

/// Two orthogonal in-plane fibre bands plus a through-plane fibre everywhere.
pub fn make_phantom1() -> Phantom {
    build_phantom(
        "phantom1",
        12,
        PhantomLayout {
            horizontal_band_rows: vec![5, 6],
            vertical_band_columns: vec![5, 6],
            ring: None,
            through_plane: true,
        },
    )
}

/// The crossing bands of [`make_phantom1`] on a 16x16 grid plus a circular fibre.
pub fn make_phantom2() -> Phantom {
    build_phantom(
        "phantom2",
        16,
        PhantomLayout {
            horizontal_band_rows: vec![7, 8],
            vertical_band_columns: vec![7, 8],
            ring: Some(([7.5, 7.5], 6.0)),
            through_plane: true,
        },
    )
}

pub fn phantom_by_name(name: &str) -> Result<Phantom> {
    match name {
        "phantom1" => Ok(make_phantom1()),
        "phantom2" => Ok(make_phantom2()),
        other => Err(invalid(format!(
            "unknown phantom '{other}' (expected phantom1 or phantom2)"
        ))),
    }
}

/// Noise-free measurements of every voxel along `directions`.
pub fn sample_field(phantom: &Phantom, directions: &[UnitDirection], b: f64) -> Result<SignalField> {
    if directions.is_empty() {
        return Err(invalid("no sampling directions"));
    }
    if !(b >= 0.0) {
        return Err(invalid(format!("b-value {b} must be non-negative")));
    }
    Ok(VectorField::from_voxels(
        phantom.dims,
        directions.len(),
        |r, out| {
            for (o, u) in out.iter_mut().zip(directions) {
                *o = synth_signal(&phantom.voxels[r], b, u);
            }
        },
    ))
}

/// `20 log10(||s|| / ||s - s_noisy||)`; `+inf` when the fields are identical.
pub fn measure_snr(clean: &SignalField, noisy: &SignalField) -> Result<f64> {
    let diff = clean.sub(noisy)?;
    let noise = l2_norm(&diff);
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (l2_norm(clean) / noise).log10())
}

const SNR_BISECTION_STEPS: usize = 12;

/// Replaces each sample `s` by `|s + n1 + i n2|` with `n1, n2 ~ N(0, sigma^2)`
/// and `sigma` tuned so the measured SNR lands on `target_snr_db`.
///
/// Every voxel draws from its own ChaCha stream keyed by `(seed, voxel)`, so
/// results do not depend on evaluation order. A target of `+inf` returns the
/// field unchanged.
pub fn add_rician_noise(
    field: &SignalField,
    target_snr_db: f64,
    seed: u64,
) -> Result<(SignalField, f64)> {
    if target_snr_db == f64::INFINITY {
        return Ok((field.clone(), f64::INFINITY));
    }
    if !target_snr_db.is_finite() {
        return Err(invalid(format!("target SNR {target_snr_db} dB is not finite")));
    }
    let k = field.channels();
    let unit = VectorField::from_voxels(field.dims(), 2 * k, |r, out| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        for o in out.iter_mut() {
            *o = StandardNormal.sample(&mut rng);
        }
    });

    let contaminate = |sigma: f64| -> SignalField {
        VectorField::from_voxels(field.dims(), k, |r, out| {
            let s = field.voxel(r);
            let n = unit.voxel(r);
            for (i, o) in out.iter_mut().enumerate() {
                let re = s[i] + sigma * n[2 * i];
                let im = sigma * n[2 * i + 1];
                *o = re.hypot(im);
            }
        })
    };
    let snr_at = |sigma: f64| -> Result<f64> { measure_snr(field, &contaminate(sigma)) };

    let rms = l2_norm(field) / (field.data().len() as f64).sqrt();
    if rms == 0.0 {
        return Err(invalid("cannot calibrate noise against an all-zero field"));
    }
    let mut hi = rms * 10f64.powf(-target_snr_db / 20.0);
    let mut grow = 0;
    while snr_at(hi)? > target_snr_db {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::InvalidArgument(format!(
                "could not bracket noise level for {target_snr_db} dB"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..SNR_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if snr_at(mid)? > target_snr_db {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let noisy = contaminate(0.5 * (lo + hi));
    let achieved = measure_snr(field, &noisy)?;
    Ok((noisy, achieved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{icosphere, spiral_hemisphere};

    fn single(dir: UnitDirection) -> VoxelModel {
        VoxelModel::equal_weights(&[dir])
    }

    #[test]
    fn signal_hand_values() {
        let m = single(UnitDirection::X);
        assert_eq!(synth_signal(&m, 0.0, &UnitDirection::Y), 1.0);
        assert!((synth_signal(&m, 1000.0, &UnitDirection::X) - (-1.7f64).exp()).abs() < 1e-12);
        assert!((synth_signal(&m, 1000.0, &UnitDirection::Y) - (-0.3f64).exp()).abs() < 1e-12);
        assert!((synth_signal(&m, 1000.0, &UnitDirection::X) - 0.1827).abs() < 1e-4);
        assert!((synth_signal(&m, 1000.0, &UnitDirection::Z) - 0.7408).abs() < 1e-4);
        let two = VoxelModel::equal_weights(&[UnitDirection::X, UnitDirection::Y]);
        let expect = 0.5 * ((-1.7f64).exp() + (-0.3f64).exp());
        assert!((synth_signal(&two, 1000.0, &UnitDirection::X) - expect).abs() < 1e-12);
        assert!((expect - 0.4617).abs() < 1e-4);
    }

    #[test]
    fn signal_is_antipodally_symmetric() {
        let m = VoxelModel::equal_weights(&[
            UnitDirection::new(1.0, 2.0, 0.5).unwrap(),
            UnitDirection::Z,
        ]);
        for u in spiral_hemisphere(40).unwrap() {
            assert_eq!(synth_signal(&m, 3000.0, &u), synth_signal(&m, 3000.0, &u.neg()));
        }
    }

    #[test]
    fn tensor_eigen_and_fa() {
        let d0 = Tensor::diagonal(1700e-6, 300e-6, 300e-6);
        assert!((d0.fractional_anisotropy() - 0.80).abs() < 0.005);
        let rotated = Tensor::fiber(UnitDirection::new(1.0, -2.0, 0.3).unwrap());
        let ev = rotated.eigenvalues();
        assert!((ev[0] - 1700e-6).abs() < 1e-15);
        assert!((ev[1] - 300e-6).abs() < 1e-15);
        assert!((ev[2] - 300e-6).abs() < 1e-15);
        let (_, vecs) = rotated.eigen();
        let p = UnitDirection::new(1.0, -2.0, 0.3).unwrap().as_array();
        let d = vecs[0][0] * p[0] + vecs[0][1] * p[1] + vecs[0][2] * p[2];
        assert!((d.abs() - 1.0).abs() < 1e-12);
        assert!(Tensor::new([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
        assert!(Tensor::new([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
    }

    #[test]
    fn phantom1_layout() {
        let p = make_phantom1();
        assert_eq!(p.dims, [12, 12, 1]);
        let counts = p.fiber_counts();
        assert!(counts.iter().all(|&c| (1..=3).contains(&c)));
        assert_eq!(counts.iter().filter(|&&c| c == 3).count(), 4);
        assert_eq!(counts.iter().filter(|&&c| c == 2).count(), 40);
        let centre = p.voxel(5, 6, 0);
        assert_eq!(centre.fiber_count(), 3);
        let d = centre.fiber_directions();
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert!(d[i].dot(&d[j]).abs() < 1e-12);
            }
        }
        for v in &p.voxels {
            let wsum: f64 = v.components.iter().map(|c| c.weight).sum();
            assert!((wsum - 1.0).abs() < 1e-12);
            for c in &v.components {
                let ev = c.tensor.eigenvalues();
                assert!((ev[0] - 1700e-6).abs() < 1e-15);
                assert!((ev[1] - 300e-6).abs() < 1e-15 && (ev[2] - 300e-6).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn phantom2_layout() {
        let p = make_phantom2();
        assert_eq!(p.dims, [16, 16, 1]);
        let max = *p.fiber_counts().iter().max().unwrap();
        assert!(max <= 4);
        let ([cx, cy], _) = p.layout.ring.unwrap();
        let mut ring_voxels = 0;
        for ix in 0..16 {
            for iy in 0..16 {
                let (dx, dy) = (ix as f64 - cx, iy as f64 - cy);
                let dist = (dx * dx + dy * dy).sqrt();
                if (dist - 6.0).abs() <= 0.5 {
                    ring_voxels += 1;
                    // the centre sits between voxels, so the tangent is never axis-aligned
                    let tangent = p
                        .voxel(ix, iy, 0)
                        .fiber_directions()
                        .into_iter()
                        .find(|d| d.z() == 0.0 && d.x() != 0.0 && d.y() != 0.0)
                        .unwrap();
                    assert!((tangent.x() * dx + tangent.y() * dy).abs() < 1e-9);
                }
            }
        }
        assert!(ring_voxels > 20);
    }

    #[test]
    fn phantom_lookup_by_name() {
        assert_eq!(phantom_by_name("phantom2").unwrap().dims, [16, 16, 1]);
        assert!(phantom_by_name("phantom3").is_err());
    }

    #[test]
    fn sampled_field_shape_and_range() {
        let p = make_phantom1();
        let dirs = spiral_hemisphere(16).unwrap();
        let s1 = sample_field(&p, &dirs, 1000.0).unwrap();
        let s3 = sample_field(&p, &dirs, 3000.0).unwrap();
        assert_eq!(s1.dims(), [12, 12, 1]);
        assert_eq!(s1.channels(), 16);
        for (a, b) in s1.data().iter().zip(s3.data()) {
            assert!(*b <= *a);
            assert!(*a > 0.0 && *a <= 1.0);
            assert!(*b > 0.0);
        }
    }

    #[test]
    fn snr_arithmetic() {
        let clean = VectorField::new([1, 1, 1], 2, vec![3.0, 4.0]).unwrap();
        let ten_pct = VectorField::new([1, 1, 1], 2, vec![3.3, 4.4]).unwrap();
        assert!((measure_snr(&clean, &ten_pct).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(measure_snr(&clean, &clean).unwrap(), f64::INFINITY);
        let zero = VectorField::zeros([1, 1, 1], 2);
        assert!(measure_snr(&clean, &zero).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rician_noise_hits_target_and_is_reproducible() {
        let p = make_phantom1();
        let s = sample_field(&p, &spiral_hemisphere(16).unwrap(), 3000.0).unwrap();
        for target in [24.0, 18.0, 12.0] {
            let (noisy, snr) = add_rician_noise(&s, target, 7).unwrap();
            assert!((snr - target).abs() <= 0.5, "{target} -> {snr}");
            assert!(noisy.data().iter().all(|&v| v >= 0.0));
            let (again, _) = add_rician_noise(&s, target, 7).unwrap();
            assert_eq!(noisy, again);
        }
        let (a, _) = add_rician_noise(&s, 18.0, 1).unwrap();
        let (b, _) = add_rician_noise(&s, 18.0, 2).unwrap();
        assert_ne!(a, b);
        let (same, inf) = add_rician_noise(&s, f64::INFINITY, 1).unwrap();
        assert_eq!(same, s);
        assert_eq!(inf, f64::INFINITY);
        assert!(add_rician_noise(&s, f64::NAN, 1).is_err());
    }

    #[test]
    fn ground_truth_round_trips_through_json() {
        let p = make_phantom2();
        let gt = p.ground_truth();
        let json = serde_json::to_string(&gt).unwrap();
        let back: GroundTruth = serde_json::from_str(&json).unwrap();
        assert_eq!(back.fiber_counts(), p.fiber_counts());
        let rebuilt = back.to_phantom();
        let dirs = icosphere(1).unwrap().vertices;
        let a = sample_field(&p, &dirs, 3000.0).unwrap();
        let b = sample_field(&rebuilt, &dirs, 3000.0).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
