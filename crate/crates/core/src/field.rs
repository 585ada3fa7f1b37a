//! Vector fields over a rectangular voxel lattice, the linear map that takes
//! coefficient fields to signal fields, and the norms used by the solvers.
//!
//! Voxels are stored in row-major `(x, y, z)` order with the channel index
//! running fastest, so the vector at one voxel is a contiguous slice.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, Matrix};

/// A grid of `channels`-vectors over `dims = (N_x, N_y, N_z)` voxels.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    dims: [usize; 3],
    channels: usize,
    data: Vec<f64>,
}

/// Diffusion measurements: one K-vector per voxel.
pub type SignalField = VectorField;
/// Representation coefficients: one M-vector per voxel.
pub type CoefficientField = VectorField;

impl VectorField {
    pub fn new(dims: [usize; 3], channels: usize, data: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) || channels == 0 {
            return Err(invalid(format!(
                "field dims {dims:?} x {channels} must all be positive"
            )));
        }
        let expected = dims.iter().product::<usize>() * channels;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "field {dims:?} x {channels} needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("field contains non-finite value {v}")));
        }
        Ok(Self {
            dims,
            channels,
            data,
        })
    }

    pub fn zeros(dims: [usize; 3], channels: usize) -> Self {
        assert!(dims.iter().all(|&d| d > 0) && channels > 0);
        Self {
            dims,
            channels,
            data: vec![0.0; dims.iter().product::<usize>() * channels],
        }
    }

    /// Builds a field voxel by voxel; `f(voxel, out)` fills one vector.
    pub fn from_voxels(
        dims: [usize; 3],
        channels: usize,
        f: impl Fn(usize, &mut [f64]) + Sync,
    ) -> Self {
        let mut field = Self::zeros(dims, channels);
        field
            .data
            .par_chunks_mut(channels)
            .enumerate()
            .for_each(|(r, out)| f(r, out));
        field
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn n_voxels(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn voxel_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        voxel_index(self.dims, ix, iy, iz)
    }

    pub fn voxel(&self, r: usize) -> &[f64] {
        &self.data[r * self.channels..(r + 1) * self.channels]
    }

    pub fn voxel_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.channels..(r + 1) * self.channels]
    }

    pub fn voxels(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.channels)
    }

    pub fn same_shape(&self, other: &VectorField) -> bool {
        self.dims == other.dims && self.channels == other.channels
    }

    fn check_shape(&self, other: &VectorField) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "fields {:?}x{} and {:?}x{}",
                self.dims, self.channels, other.dims, other.channels
            )))
        }
    }

    /// Channel `k` as a scalar 3-D image.
    pub fn channel_image(&self, k: usize) -> Image3 {
        Image3 {
            dims: self.dims,
            data: self.voxels().map(|v| v[k]).collect(),
        }
    }

    pub fn set_channel_image(&mut self, k: usize, image: &Image3) {
        assert_eq!(image.dims, self.dims);
        let ch = self.channels;
        for (r, &v) in image.data.iter().enumerate() {
            self.data[r * ch + k] = v;
        }
    }

    /// Reassembles a field from per-channel images.
    pub fn from_channel_images(images: &[Image3]) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| invalid("no channel images supplied"))?;
        let dims = first.dims;
        if images.iter().any(|im| im.dims != dims) {
            return Err(Error::DimensionMismatch("channel images differ in shape".into()));
        }
        let mut field = Self::zeros(dims, images.len());
        for (k, im) in images.iter().enumerate() {
            field.set_channel_image(k, im);
        }
        Ok(field)
    }

    pub fn inner(&self, other: &VectorField) -> Result<f64> {
        self.check_shape(other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, factor: f64) -> VectorField {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> VectorField {
        VectorField {
            dims: self.dims,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &VectorField, f: impl Fn(f64, f64) -> f64) -> Result<VectorField> {
        self.check_shape(other)?;
        Ok(VectorField {
            dims: self.dims,
            channels: self.channels,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Fraction of entries that are exactly zero.
    pub fn zero_fraction(&self) -> f64 {
        self.data.iter().filter(|&&v| v == 0.0).count() as f64 / self.data.len() as f64
    }
}

pub(crate) fn voxel_index(dims: [usize; 3], ix: usize, iy: usize, iz: usize) -> usize {
    (ix * dims[1] + iy) * dims[2] + iz
}

/// A scalar image over the voxel lattice (one diffusion-encoded image).
#[derive(Clone, Debug, PartialEq)]
pub struct Image3 {
    pub dims: [usize; 3],
    pub data: Vec<f64>,
}

impl Image3 {
    pub fn new(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::DimensionMismatch(format!(
                "image {dims:?} needs {} values, got {}",
                dims.iter().product::<usize>(),
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Linear strides for the x, y and z axes.
    pub fn strides(&self) -> [usize; 3] {
        [self.dims[1] * self.dims[2], self.dims[2], 1]
    }

    pub fn coords(&self, r: usize) -> [usize; 3] {
        let iz = r % self.dims[2];
        let iy = (r / self.dims[2]) % self.dims[1];
        let ix = r / (self.dims[1] * self.dims[2]);
        [ix, iy, iz]
    }
}

/// `s(r) = A c(r)` at every voxel.
pub fn apply_a(a: &Matrix, c: &CoefficientField) -> Result<SignalField> {
    if c.channels() != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "coefficient field has {} channels, matrix has {} columns",
            c.channels(),
            a.cols()
        )));
    }
    let mut out = VectorField::zeros(c.dims(), a.rows());
    out.data
        .par_chunks_mut(a.rows())
        .zip(c.data.par_chunks(a.cols()))
        .for_each(|(s, cv)| a.matvec_into(cv, s));
    Ok(out)
}

/// `c(r) = A^T s(r)` at every voxel.
pub fn apply_a_transpose(a: &Matrix, s: &SignalField) -> Result<CoefficientField> {
    if s.channels() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "signal field has {} channels, matrix has {} rows",
            s.channels(),
            a.rows()
        )));
    }
    let mut out = VectorField::zeros(s.dims(), a.cols());
    out.data
        .par_chunks_mut(a.cols())
        .zip(s.data.par_chunks(a.rows()))
        .for_each(|(c, sv)| a.matvec_t_into(sv, c));
    Ok(out)
}

/// Euclidean norm over every entry of the field.
pub fn l2_norm(field: &VectorField) -> f64 {
    dot(&field.data, &field.data).sqrt()
}

/// Sum of absolute values over every entry of the field.
pub fn l1_norm(field: &VectorField) -> f64 {
    field.data.iter().map(|v| v.abs()).sum()
}

/// Isotropic total variation with the causal clique: at each voxel, the
/// Euclidean norm of the differences to its left, front and lower neighbours.
/// Neighbours outside the grid are left out of the sum.
pub fn tv_image(image: &Image3) -> f64 {
    let [nx, ny, nz] = image.dims;
    let [sx, sy, sz] = image.strides();
    let mut total = 0.0;
    for ix in 0..nx {
        for iy in 0..ny {
            for iz in 0..nz {
                let r = ix * sx + iy * sy + iz * sz;
                let v = image.data[r];
                let mut sq = 0.0;
                if ix > 0 {
                    sq += (v - image.data[r - sx]).powi(2);
                }
                if iy > 0 {
                    sq += (v - image.data[r - sy]).powi(2);
                }
                if iz > 0 {
                    sq += (v - image.data[r - sz]).powi(2);
                }
                total += sq.sqrt();
            }
        }
    }
    total
}

/// Sum of the channel-wise total variations.
pub fn tv_field(field: &VectorField) -> f64 {
    (0..field.channels())
        .map(|k| tv_image(&field.channel_image(k)))
        .sum()
}

/// Coefficient fields stored as per-voxel `(index, value)` lists.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseField {
    pub dims: [usize; 3],
    pub channels: usize,
    pub entries: Vec<Vec<(u32, f64)>>,
}

impl SparseField {
    pub fn from_dense(field: &VectorField) -> Self {
        Self {
            dims: field.dims,
            channels: field.channels,
            entries: field
                .voxels()
                .map(|v| {
                    v.iter()
                        .enumerate()
                        .filter(|(_, &x)| x != 0.0)
                        .map(|(i, &x)| (i as u32, x))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_dense(&self) -> VectorField {
        let mut out = VectorField::zeros(self.dims, self.channels);
        for (r, list) in self.entries.iter().enumerate() {
            let v = out.voxel_mut(r);
            for &(i, x) in list {
                v[i as usize] = x;
            }
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }
}

/// Storage for coefficient fields: sparse once thresholding has zeroed more
/// than [`SPARSE_THRESHOLD`] of the entries, dense otherwise.
#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientStorage {
    Dense(VectorField),
    Sparse(SparseField),
}

pub const SPARSE_THRESHOLD: f64 = 0.8;

impl CoefficientStorage {
    pub fn auto(field: VectorField) -> Self {
        if field.zero_fraction() > SPARSE_THRESHOLD {
            CoefficientStorage::Sparse(SparseField::from_dense(&field))
        } else {
            CoefficientStorage::Dense(field)
        }
    }

    pub fn to_dense(&self) -> VectorField {
        match self {
            CoefficientStorage::Dense(f) => f.clone(),
            CoefficientStorage::Sparse(s) => s.to_dense(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, CoefficientStorage::Sparse(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(rng: &mut ChaCha8Rng, dims: [usize; 3], ch: usize) -> VectorField {
        let n = dims.iter().product::<usize>() * ch;
        VectorField::new(dims, ch, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_coefficients_give_zero_signal() {
        let a = Matrix::from_fn(4, 7, |i, j| (i * 7 + j) as f64);
        let s = apply_a(&a, &VectorField::zeros([2, 3, 1], 7)).unwrap();
        assert_eq!(s.channels(), 4);
        assert!(s.data().iter().all(|&v| v == 0.0));
        let c = apply_a_transpose(&a, &VectorField::zeros([2, 3, 1], 4)).unwrap();
        assert!(c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_voxel_is_plain_matvec() {
        let a = Matrix::from_fn(3, 5, |i, j| (i as f64 + 1.0) * (j as f64 - 2.0));
        let cv = vec![0.5, -1.0, 2.0, 0.0, 3.0];
        let c = VectorField::new([1, 1, 1], 5, cv.clone()).unwrap();
        assert_eq!(apply_a(&a, &c).unwrap().data(), a.matvec(&cv).as_slice());
    }

    #[test]
    fn identity_transpose_copies() {
        let a = Matrix::identity(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_field(&mut rng, [2, 2, 2], 4);
        assert_eq!(apply_a_transpose(&a, &s).unwrap(), s);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = Matrix::zeros(3, 5);
        assert!(apply_a(&a, &VectorField::zeros([1, 1, 1], 4)).is_err());
        assert!(apply_a_transpose(&a, &VectorField::zeros([1, 1, 1], 5)).is_err());
    }

    #[test]
    fn adjoint_identity_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let k = rng.random_range(1..12);
            let m = rng.random_range(1..30);
            let dims = [rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..3)];
            let a = Matrix::from_fn(k, m, |_, _| rng.random_range(-1.0..1.0));
            let c = random_field(&mut rng, dims, m);
            let s = random_field(&mut rng, dims, k);
            let lhs = apply_a(&a, &c).unwrap().inner(&s).unwrap();
            let rhs = c.inner(&apply_a_transpose(&a, &s).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn norms_on_small_fields() {
        let z = VectorField::zeros([2, 2, 1], 3);
        assert_eq!(l2_norm(&z), 0.0);
        assert_eq!(l1_norm(&z), 0.0);
        let mut one = VectorField::zeros([1, 1, 1], 1);
        one.data_mut()[0] = 3.0;
        assert_eq!(l2_norm(&one), 3.0);
        assert_eq!(l1_norm(&one), 3.0);
    }

    #[test]
    fn l2_squared_splits_over_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_field(&mut rng, [3, 4, 2], 6);
        let per_channel: f64 = (0..6)
            .map(|k| f.channel_image(k).data.iter().map(|v| v * v).sum::<f64>())
            .sum();
        assert!((l2_norm(&f).powi(2) - per_channel).abs() < 1e-12);
    }

    #[test]
    fn tv_hand_values() {
        let constant = Image3::new([3, 2, 2], vec![1.5; 12]).unwrap();
        assert_eq!(tv_image(&constant), 0.0);
        let step = Image3::new([2, 1, 1], vec![0.0, 1.0]).unwrap();
        assert_eq!(tv_image(&step), 1.0);
        // rows are x: x=0 -> [0, 0], x=1 -> [1, 1]
        let two = Image3::new([2, 2, 1], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(tv_image(&two), 2.0);
        // one voxel with both x and y differences
        let corner = Image3::new([2, 2, 1], vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((tv_image(&corner) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn tv_field_sums_channels() {
        assert_eq!(tv_field(&VectorField::zeros([2, 2, 2], 3)), 0.0);
        let mut f = VectorField::zeros([2, 2, 1], 3);
        let im = Image3::new([2, 2, 1], vec![0.0, 2.0, -1.0, 4.0]).unwrap();
        f.set_channel_image(1, &im);
        assert_eq!(tv_field(&f), tv_image(&im));
    }

    #[test]
    fn sparse_storage_kicks_in_above_threshold() {
        let mut f = VectorField::zeros([2, 1, 1], 10);
        f.voxel_mut(0)[3] = 1.5;
        f.voxel_mut(1)[9] = -2.0;
        let st = CoefficientStorage::auto(f.clone());
        assert!(st.is_sparse());
        assert_eq!(st.to_dense(), f);
        if let CoefficientStorage::Sparse(s) = &st {
            assert_eq!(s.nnz(), 2);
        }
        let dense = VectorField::new([1, 1, 1], 2, vec![1.0, 2.0]).unwrap();
        assert!(!CoefficientStorage::auto(dense).is_sparse());
    }

    #[test]
    fn new_rejects_bad_input() {
        assert!(VectorField::new([0, 1, 1], 1, vec![]).is_err());
        assert!(VectorField::new([1, 1, 1], 2, vec![1.0]).is_err());
        assert!(VectorField::new([1, 1, 1], 1, vec![f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn tv_is_subadditive_and_homogeneous(
            a in proptest::collection::vec(-5.0f64..5.0, 18),
            b in proptest::collection::vec(-5.0f64..5.0, 18),
            t in 0.0f64..4.0,
        ) {
            let fa = VectorField::new([3, 3, 1], 2, a).unwrap();
            let fb = VectorField::new([3, 3, 1], 2, b).unwrap();
            let sum = fa.add(&fb).unwrap();
            prop_assert!(tv_field(&sum) <= tv_field(&fa) + tv_field(&fb) + 1e-9);
            prop_assert!((tv_field(&fa.scale(t)) - t * tv_field(&fa)).abs() < 1e-9);
            prop_assert!(l1_norm(&fa) + 1e-12 >= l2_norm(&fa));
        }
    }
}
