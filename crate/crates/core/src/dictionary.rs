//! Atom families on the sphere and the matrices built from them.
//!
//! Three families are provided:
//!
//! * spherical ridgelets, zonal functions `sum_n c_n P_n(u . v)` whose
//!   Legendre profile is the Funk–Radon transform of a difference of two
//!   Gauss–Weierstrass kernels at consecutive dyadic scales;
//! * the real, antipodally symmetric spherical harmonic basis;
//! * rotated copies of a Gaussian diffusion kernel `exp(-b u^T D u)`.
//!
//! Evaluating a dictionary at `K` directions gives the `K x M` sensing
//! matrix. The Funk–Radon transform of an atom with a known Legendre profile
//! is obtained by scaling each degree-`n` term by [`funk_radon_multiplier`].

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::phantom::Tensor;
use crate::sphere::{legendre_series, spiral_hemisphere, Tessellation, UnitDirection};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionaryKind {
    Ridgelet,
    SphericalHarmonic,
    Gaussian,
}

impl DictionaryKind {
    pub fn code(self) -> u32 {
        match self {
            DictionaryKind::Ridgelet => 0,
            DictionaryKind::SphericalHarmonic => 1,
            DictionaryKind::Gaussian => 2,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(DictionaryKind::Ridgelet),
            1 => Ok(DictionaryKind::SphericalHarmonic),
            2 => Ok(DictionaryKind::Gaussian),
            other => Err(Error::Format(format!("unknown dictionary kind code {other}"))),
        }
    }
}

/// Parameters of the ridgelet frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeletSpec {
    /// Gaussian scaling parameter of the generating kernel.
    pub rho: f64,
    /// Finest resolution level; levels run `-1..=max_level`.
    pub max_level: i32,
    /// Orientation base order; level `j` gets `(2^(j+1) m0 + 1)^2` atoms.
    pub m0: usize,
    /// Bandwidth cutoff used by [`RidgeletSpec::bandwidth_order`].
    pub epsilon: f64,
    /// Legendre series are cut once their terms fall below this magnitude.
    pub summand_tol: f64,
}

/// Finest supported level; level 6 alone already holds 148 225 atoms.
pub const MAX_RIDGELET_LEVEL: i32 = 6;

impl Default for RidgeletSpec {
    fn default() -> Self {
        Self {
            rho: 0.5,
            max_level: 1,
            m0: 3,
            epsilon: 1e-6,
            summand_tol: 1e-9,
        }
    }
}

impl RidgeletSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid(format!("rho = {} must be positive", self.rho)));
        }
        if !(-1..=MAX_RIDGELET_LEVEL).contains(&self.max_level) {
            return Err(invalid(format!(
                "max level {} outside -1..={MAX_RIDGELET_LEVEL}",
                self.max_level
            )));
        }
        if self.m0 == 0 {
            return Err(invalid("m0 must be positive"));
        }
        if !(self.summand_tol > 0.0) || !(self.epsilon > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        Ok(())
    }

    /// Smallest order `n` with `kappa_0(n) <= epsilon`. This is only a
    /// suggestion for `m0`; the dictionary always uses the explicit `m0`.
    pub fn bandwidth_order(&self) -> usize {
        (0..).find(|&n| kappa(self, 0, n as f64) <= self.epsilon).unwrap()
    }

    /// Number of orientations at level `j`.
    pub fn level_size(&self, j: i32) -> usize {
        let side = (1usize << (j + 1) as u32) * self.m0 + 1;
        side * side
    }

    pub fn levels(&self) -> impl Iterator<Item = i32> {
        -1..=self.max_level
    }
}

/// Dyadically scaled Gaussian `exp(-rho (x/2^j)(x/2^j + 1))`, identically
/// zero at level `-1`.
pub fn kappa(spec: &RidgeletSpec, j: i32, x: f64) -> f64 {
    if j < 0 {
        return 0.0;
    }
    let y = x / 2f64.powi(j);
    (-spec.rho * y * (y + 1.0)).exp()
}

/// Eigenvalue of the Funk–Radon transform on degree-`n` harmonics:
/// `2 pi (-1)^(n/2) (1*3*...*(n-1)) / (2*4*...*n)` for even `n`, zero for odd.
pub fn funk_radon_multiplier(n: usize) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    let mut ratio = 1.0;
    for k in (2..=n).step_by(2) {
        ratio *= (k - 1) as f64 / k as f64;
    }
    let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
    2.0 * PI * sign * ratio
}

/// Legendre coefficients of the level-`j` ridgelet,
/// `c_n = (2n+1)/(8 pi^2) lambda_n (kappa_{j+1}(n) - kappa_j(n))`.
///
/// The sequence runs up to the first even degree after which every term
/// stays below `summand_tol`.
pub fn ridgelet_degree_profile(spec: &RidgeletSpec, j: i32) -> Result<Vec<f64>> {
    spec.validate()?;
    if j < -1 || j > spec.max_level {
        return Err(invalid(format!(
            "level {j} outside -1..={}",
            spec.max_level
        )));
    }
    let coeff = |n: usize| {
        let nf = n as f64;
        (2.0 * nf + 1.0) / (8.0 * PI * PI)
            * funk_radon_multiplier(n)
            * (kappa(spec, j + 1, nf) - kappa(spec, j, nf))
    };
    // |c_n| <= (2n+1)/(4 pi) kappa_{j+1}(n), which decays monotonically past
    // the kernel's effective bandwidth
    let bound = |n: usize| (2.0 * n as f64 + 1.0) / (4.0 * PI) * kappa(spec, j + 1, n as f64);
    let knee = 1usize << (j + 2) as u32;
    let mut last_significant = 0;
    let mut n = 0;
    loop {
        if coeff(n).abs() >= spec.summand_tol {
            last_significant = n;
        }
        if n > knee && bound(n) < spec.summand_tol {
            break;
        }
        n += 2;
    }
    let n_max = last_significant + 2;
    Ok((0..=n_max)
        .map(|n| if n % 2 == 0 { coeff(n) } else { 0.0 })
        .collect())
}

/// One dictionary element.
#[derive(Clone, Debug, PartialEq)]
pub enum Atom {
    /// Zonal ridgelet `sum_n profile[n] P_n(u . orientation)`.
    Ridgelet {
        level: i32,
        orientation: UnitDirection,
        profile: Arc<Vec<f64>>,
    },
    /// Real spherical harmonic of the given degree and order.
    Harmonic { degree: usize, order: i64 },
    /// `exp(-b u^T tensor u)`.
    Gaussian {
        axis: UnitDirection,
        tensor: Tensor,
        b: f64,
    },
}

impl Atom {
    pub fn evaluate(&self, u: &UnitDirection) -> f64 {
        match self {
            Atom::Ridgelet {
                orientation,
                profile,
                ..
            } => legendre_series(profile, u.dot(orientation)),
            Atom::Harmonic { degree, order } => real_sh(*degree, *order, u),
            Atom::Gaussian { tensor, b, .. } => (-b * tensor.quadratic_form(u)).exp(),
        }
    }

    /// Legendre coefficients for zonal atoms.
    pub fn degree_profile(&self) -> Option<&[f64]> {
        match self {
            Atom::Ridgelet { profile, .. } => Some(profile),
            _ => None,
        }
    }

    /// Funk–Radon transform of the atom evaluated at `v`.
    pub fn funk_radon(&self, v: &UnitDirection) -> Result<f64> {
        match self {
            Atom::Ridgelet {
                orientation,
                profile,
                ..
            } => {
                let scaled: Vec<f64> = profile
                    .iter()
                    .enumerate()
                    .map(|(n, c)| c * funk_radon_multiplier(n))
                    .collect();
                Ok(legendre_series(&scaled, v.dot(orientation)))
            }
            Atom::Harmonic { degree, order } => {
                Ok(funk_radon_multiplier(*degree) * real_sh(*degree, *order, v))
            }
            Atom::Gaussian { .. } => Err(Error::Unsupported(
                "Gaussian atoms have no closed-form Funk-Radon transform".into(),
            )),
        }
    }
}

/// Orthonormal real spherical harmonic: `sqrt2 N P_l^m cos(m phi)` for
/// `m > 0`, `N P_l` for `m = 0` and `sqrt2 N P_l^|m| sin(|m| phi)` for `m < 0`.
pub fn real_sh(l: usize, m: i64, u: &UnitDirection) -> f64 {
    let am = m.unsigned_abs() as usize;
    assert!(am <= l, "order {m} exceeds degree {l}");
    let (theta, phi) = u.to_spherical();
    let x = theta.cos();
    let plm = assoc_legendre(l, am, x);
    let mut ratio = 1.0;
    for k in (l - am + 1)..=(l + am) {
        ratio /= k as f64;
    }
    let norm = ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt();
    match m.signum() {
        0 => norm * plm,
        1 => 2f64.sqrt() * norm * plm * (am as f64 * phi).cos(),
        _ => 2f64.sqrt() * norm * plm * (am as f64 * phi).sin(),
    }
}

/// Associated Legendre function `P_l^m(x)` without the Condon–Shortley phase.
fn assoc_legendre(l: usize, m: usize, x: f64) -> f64 {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= (2 * k - 1) as f64 * s;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut p = 0.0;
    for ll in (m + 2)..=l {
        p = ((2 * ll - 1) as f64 * x * pm1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pm1;
        pm1 = p;
    }
    p
}

#[derive(Clone, Debug)]
pub struct Dictionary {
    pub kind: DictionaryKind,
    pub atoms: Vec<Atom>,
    /// Atom count per ridgelet level, `(level, count)`; empty for other kinds.
    pub level_counts: Vec<(i32, usize)>,
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn degree_profile(&self, m: usize) -> Option<&[f64]> {
        self.atoms[m].degree_profile()
    }

    /// Short machine-readable description for provenance records.
    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "atoms": self.len(),
            "level_counts": self.level_counts,
        })
    }
}

pub fn build_ridgelet_dictionary(spec: &RidgeletSpec) -> Result<Dictionary> {
    spec.validate()?;
    let mut atoms = Vec::new();
    let mut level_counts = Vec::new();
    for j in spec.levels() {
        let profile = Arc::new(ridgelet_degree_profile(spec, j)?);
        let count = spec.level_size(j);
        for orientation in spiral_hemisphere(count)? {
            atoms.push(Atom::Ridgelet {
                level: j,
                orientation,
                profile: Arc::clone(&profile),
            });
        }
        level_counts.push((j, count));
    }
    Ok(Dictionary {
        kind: DictionaryKind::Ridgelet,
        atoms,
        level_counts,
    })
}

/// Real symmetric harmonic basis of all even degrees up to `max_degree`.
pub fn build_sh_dictionary(max_degree: usize) -> Result<Dictionary> {
    if max_degree % 2 != 0 {
        return Err(invalid(format!(
            "spherical harmonic degree {max_degree} must be even"
        )));
    }
    let mut atoms = Vec::new();
    for l in (0..=max_degree).step_by(2) {
        for m in -(l as i64)..=(l as i64) {
            atoms.push(Atom::Harmonic { degree: l, order: m });
        }
    }
    Ok(Dictionary {
        kind: DictionaryKind::SphericalHarmonic,
        atoms,
        level_counts: Vec::new(),
    })
}

pub const DEFAULT_GAUSSIAN_ROTATIONS: usize = 253;

/// Default Gaussian kernel tensor, `diag(1700, 300, 300) x 1e-6 mm^2/s`.
pub fn default_gaussian_kernel() -> Tensor {
    Tensor::diagonal(1700e-6, 300e-6, 300e-6)
}

/// Copies of `exp(-b u^T d0 u)` with the principal axis of `d0` rotated onto
/// each of `n_rotations` spiral directions.
pub fn build_gaussian_dictionary(n_rotations: usize, b: f64, d0: &Tensor) -> Result<Dictionary> {
    if n_rotations == 0 {
        return Err(invalid("need at least one rotation"));
    }
    if !(b >= 0.0) {
        return Err(invalid(format!("b-value {b} must be non-negative")));
    }
    let d0 = Tensor::new(d0.0)?;
    let (values, _) = d0.eigen();
    let atoms = spiral_hemisphere(n_rotations)?
        .into_iter()
        .map(|axis| {
            let (e1, e2) = axis.orthonormal_frame();
            Atom::Gaussian {
                axis,
                tensor: Tensor::from_eigen(values, [axis.as_array(), e1, e2]),
                b,
            }
        })
        .collect();
    Ok(Dictionary {
        kind: DictionaryKind::Gaussian,
        atoms,
        level_counts: Vec::new(),
    })
}

/// `A[k][m] = atom_m(u_k)` together with the directions it was sampled at.
#[derive(Clone, Debug)]
pub struct SensingMatrix {
    pub kind: DictionaryKind,
    pub directions: Vec<UnitDirection>,
    matrix: Matrix,
}

impl SensingMatrix {
    pub fn new(kind: DictionaryKind, directions: Vec<UnitDirection>, matrix: Matrix) -> Result<Self> {
        if !directions.is_empty() && directions.len() != matrix.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} directions for {} rows",
                directions.len(),
                matrix.rows()
            )));
        }
        Ok(Self {
            kind,
            directions,
            matrix,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }
}

impl std::ops::Deref for SensingMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.matrix
    }
}

pub fn assemble_sensing_matrix(dict: &Dictionary, directions: &[UnitDirection]) -> Result<SensingMatrix> {
    if directions.is_empty() {
        return Err(invalid("no sampling directions"));
    }
    let matrix = Matrix::from_fn(directions.len(), dict.len(), |k, m| {
        dict.atoms[m].evaluate(&directions[k])
    });
    SensingMatrix::new(dict.kind, directions.to_vec(), matrix)
}

/// `Q[i][m]`: Funk–Radon transform of atom `m` at tessellation vertex `i`.
pub fn frt_kernel_matrix(dict: &Dictionary, tess: &Tessellation) -> Result<Matrix> {
    if dict.kind == DictionaryKind::Gaussian {
        return Err(Error::Unsupported(
            "Funk-Radon kernel needs atoms with a Legendre profile".into(),
        ));
    }
    let mut data = Vec::with_capacity(tess.len() * dict.len());
    for v in &tess.vertices {
        for atom in &dict.atoms {
            data.push(atom.funk_radon(v)?);
        }
    }
    Matrix::new(tess.len(), dict.len(), data)
}

/// Funk–Radon transform of `f` at `v` by the trapezoid rule with `n_points`
/// nodes on the great circle perpendicular to `v` (arc-length measure).
pub fn great_circle_integral(f: impl Fn(&UnitDirection) -> f64, v: &UnitDirection, n_points: usize) -> f64 {
    let (e1, e2) = v.orthonormal_frame();
    let h = 2.0 * PI / n_points as f64;
    let mut acc = 0.0;
    for i in 0..n_points {
        let (s, c) = (i as f64 * h).sin_cos();
        let u = [c * e1[0] + s * e2[0], c * e1[1] + s * e2[1], c * e1[2] + s * e2[2]];
        acc += f(&UnitDirection::new(u[0], u[1], u[2]).expect("unit circle point"));
    }
    acc * h
}

/// Funk–Radon kernel by great-circle quadrature. Works for every atom kind,
/// including Gaussians, at the cost of `V * M * n_points` atom evaluations.
pub fn frt_quadrature_matrix(dict: &Dictionary, tess: &Tessellation, n_points: usize) -> Result<Matrix> {
    if n_points < 3 {
        return Err(invalid("quadrature needs at least 3 nodes"));
    }
    let h = 2.0 * PI / n_points as f64;
    let mut data = Vec::with_capacity(tess.len() * dict.len());
    for v in &tess.vertices {
        let (e1, e2) = v.orthonormal_frame();
        let nodes: Vec<UnitDirection> = (0..n_points)
            .map(|i| {
                let (s, c) = (i as f64 * h).sin_cos();
                UnitDirection::new(
                    c * e1[0] + s * e2[0],
                    c * e1[1] + s * e2[1],
                    c * e1[2] + s * e2[2],
                )
                .expect("unit circle point")
            })
            .collect();
        for atom in &dict.atoms {
            data.push(nodes.iter().map(|u| atom.evaluate(u)).sum::<f64>() * h);
        }
    }
    Matrix::new(tess.len(), dict.len(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{icosphere, legendre};

    #[test]
    fn kappa_values() {
        let spec = RidgeletSpec::default();
        assert_eq!(kappa(&spec, 0, 0.0), 1.0);
        assert!((kappa(&spec, 0, 4.0) - (-10f64).exp()).abs() < 1e-18);
        assert!((kappa(&spec, 0, 4.0) - 4.54e-5).abs() < 1e-7);
        assert_eq!(kappa(&spec, -1, 7.0), 0.0);
        assert!((kappa(&spec, 1, 4.0) - (-3f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn funk_radon_multiplier_values() {
        assert!((funk_radon_multiplier(0) - 2.0 * PI).abs() < 1e-15);
        assert_eq!(funk_radon_multiplier(3), 0.0);
        assert!((funk_radon_multiplier(2) + PI).abs() < 1e-15);
        assert!((funk_radon_multiplier(4) - 2.0 * PI * 3.0 / 8.0).abs() < 1e-15);
        assert!((funk_radon_multiplier(4) - 2.3562).abs() < 1e-4);
    }

    #[test]
    fn funk_radon_multiplier_is_two_pi_p_n_of_zero() {
        for n in 0..=40 {
            let expect = 2.0 * PI * legendre(n, 0.0).unwrap();
            assert!((funk_radon_multiplier(n) - expect).abs() <= 1e-10, "n = {n}");
        }
    }

    #[test]
    fn profile_of_coarsest_level() {
        let spec = RidgeletSpec::default();
        let p = ridgelet_degree_profile(&spec, -1).unwrap();
        assert!((p[0] - 1.0 / (4.0 * PI)).abs() < 1e-15);
        for j in -1..=1 {
            let p = ridgelet_degree_profile(&spec, j).unwrap();
            assert!(p.iter().skip(1).step_by(2).all(|&c| c == 0.0));
            assert!(p.len() - 1 <= 50, "level {j}: n_max = {}", p.len() - 1);
            assert_eq!((p.len() - 1) % 2, 0);
            assert!(p.last().unwrap().abs() < spec.summand_tol);
        }
        assert!(ridgelet_degree_profile(&spec, 2).is_err());
    }

    #[test]
    fn truncation_drops_only_negligible_terms() {
        let spec = RidgeletSpec::default();
        let p = ridgelet_degree_profile(&spec, 1).unwrap();
        for n in p.len()..400 {
            let nf = n as f64;
            let c = (2.0 * nf + 1.0) / (8.0 * PI * PI)
                * funk_radon_multiplier(n)
                * (kappa(&spec, 2, nf) - kappa(&spec, 1, nf));
            assert!(c.abs() < spec.summand_tol);
        }
    }

    #[test]
    fn ridgelet_atom_counts() {
        let d = build_ridgelet_dictionary(&RidgeletSpec::default()).unwrap();
        assert_eq!(d.level_counts, vec![(-1, 16), (0, 49), (1, 169)]);
        assert_eq!(d.len(), 234);
        let coarse = RidgeletSpec {
            max_level: -1,
            ..Default::default()
        };
        assert_eq!(build_ridgelet_dictionary(&coarse).unwrap().len(), 16);
        let small = RidgeletSpec {
            max_level: 0,
            m0: 1,
            ..Default::default()
        };
        assert_eq!(build_ridgelet_dictionary(&small).unwrap().len(), 13);
    }

    #[test]
    fn bandwidth_rule_gives_five_for_defaults() {
        assert_eq!(RidgeletSpec::default().bandwidth_order(), 5);
    }

    #[test]
    fn sh_atom_counts() {
        assert_eq!(build_sh_dictionary(8).unwrap().len(), 45);
        assert_eq!(build_sh_dictionary(4).unwrap().len(), 15);
        let d0 = build_sh_dictionary(0).unwrap();
        assert_eq!(d0.len(), 1);
        let c = 1.0 / (4.0 * PI).sqrt();
        for u in icosphere(1).unwrap().vertices {
            assert!((d0.atoms[0].evaluate(&u) - c).abs() < 1e-15);
        }
        assert!(build_sh_dictionary(3).is_err());
    }

    #[test]
    fn real_sh_is_orthonormal() {
        // product rule: Gauss-free midpoint in theta, uniform in phi
        let (nt, np) = (400, 80);
        let atoms = build_sh_dictionary(4).unwrap().atoms;
        let mut gram = vec![0.0; atoms.len() * atoms.len()];
        for i in 0..nt {
            let theta = (i as f64 + 0.5) * PI / nt as f64;
            let w = theta.sin() * (PI / nt as f64) * (2.0 * PI / np as f64);
            for j in 0..np {
                let phi = j as f64 * 2.0 * PI / np as f64;
                let u = UnitDirection::from_spherical(theta, phi);
                let vals: Vec<f64> = atoms.iter().map(|a| a.evaluate(&u)).collect();
                for a in 0..atoms.len() {
                    for b in 0..atoms.len() {
                        gram[a * atoms.len() + b] += w * vals[a] * vals[b];
                    }
                }
            }
        }
        for a in 0..atoms.len() {
            for b in 0..atoms.len() {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a * atoms.len() + b] - expect).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn gaussian_dictionary_defaults() {
        let d0 = default_gaussian_kernel();
        let d = build_gaussian_dictionary(DEFAULT_GAUSSIAN_ROTATIONS, 1000.0, &d0).unwrap();
        assert_eq!(d.len(), 253);
        assert!((d0.fractional_anisotropy() - 0.80).abs() < 0.005);
        if let Atom::Gaussian { axis, .. } = &d.atoms[5] {
            let v = d.atoms[5].evaluate(axis);
            assert!((v - (-1.7f64).exp()).abs() < 1e-12);
            assert!((v - 0.1827).abs() < 1e-4);
        } else {
            panic!("expected Gaussian atom");
        }
        let bad = Tensor([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(build_gaussian_dictionary(10, 1000.0, &bad).is_err());
    }

    #[test]
    fn sensing_matrix_shape_and_symmetry() {
        let d = build_ridgelet_dictionary(&RidgeletSpec::default()).unwrap();
        let dirs = spiral_hemisphere(16).unwrap();
        let a = assemble_sensing_matrix(&d, &dirs).unwrap();
        assert_eq!((a.rows(), a.cols()), (16, 234));
        let flipped: Vec<UnitDirection> = dirs.iter().map(|u| u.neg()).collect();
        let b = assemble_sensing_matrix(&d, &flipped).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(assemble_sensing_matrix(&d, &[]).is_err());
    }

    #[test]
    fn fine_ridgelets_peak_on_their_great_circle() {
        let d = build_ridgelet_dictionary(&RidgeletSpec::default()).unwrap();
        let grid = icosphere(5).unwrap();
        for atom in d.atoms.iter().filter(|a| matches!(a, Atom::Ridgelet { level: 1, .. })).step_by(17) {
            let Atom::Ridgelet { orientation, .. } = atom else { unreachable!() };
            let (best, _) = grid
                .vertices
                .iter()
                .map(|u| (u, atom.evaluate(u)))
                .fold((&grid.vertices[0], f64::NEG_INFINITY), |acc, (u, v)| {
                    if v > acc.1 {
                        (u, v)
                    } else {
                        acc
                    }
                });
            // max lies on the circle u . v = 0, within the grid spacing
            assert!(best.dot(orientation).abs() < 0.06, "{}", best.dot(orientation));
        }
    }

    #[test]
    fn frt_of_constant_is_two_pi_times() {
        let d = build_sh_dictionary(0).unwrap();
        let tess = icosphere(1).unwrap();
        let q = frt_kernel_matrix(&d, &tess).unwrap();
        let c = 1.0 / (4.0 * PI).sqrt();
        for i in 0..tess.len() {
            assert!((q.get(i, 0) - 2.0 * PI * c).abs() < 1e-14);
        }
    }

    #[test]
    fn frt_of_odd_harmonic_vanishes() {
        let atom = Atom::Harmonic { degree: 3, order: 2 };
        for v in icosphere(1).unwrap().vertices {
            assert_eq!(atom.funk_radon(&v).unwrap(), 0.0);
            assert!(great_circle_integral(|u| atom.evaluate(u), &v, 512).abs() < 1e-12);
        }
    }

    #[test]
    fn frt_rejects_gaussian_dictionary() {
        let d = build_gaussian_dictionary(5, 1000.0, &default_gaussian_kernel()).unwrap();
        assert!(matches!(
            frt_kernel_matrix(&d, &icosphere(0).unwrap()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn quadrature_kernel_matches_closed_form() {
        let d = build_sh_dictionary(8).unwrap();
        let tess = icosphere(1).unwrap();
        let exact = frt_kernel_matrix(&d, &tess).unwrap();
        let quad = frt_quadrature_matrix(&d, &tess, 128).unwrap();
        for (a, b) in exact.data().iter().zip(quad.data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn dictionary_kind_codes_round_trip() {
        for k in [
            DictionaryKind::Ridgelet,
            DictionaryKind::SphericalHarmonic,
            DictionaryKind::Gaussian,
        ] {
            assert_eq!(DictionaryKind::from_code(k.code()).unwrap(), k);
        }
        assert!(DictionaryKind::from_code(9).is_err());
    }
}
