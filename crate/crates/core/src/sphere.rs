//! Points on the unit sphere: quasi-uniform hemisphere sampling, icosphere
//! tessellations with vertex adjacency, and Legendre polynomials.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A point on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct UnitDirection([f64; 3]);

impl UnitDirection {
    pub const X: UnitDirection = UnitDirection([1.0, 0.0, 0.0]);
    pub const Y: UnitDirection = UnitDirection([0.0, 1.0, 0.0]);
    pub const Z: UnitDirection = UnitDirection([0.0, 0.0, 1.0]);

    /// Normalizes `(x, y, z)` onto the sphere. Fails on the zero vector or
    /// non-finite input. Vectors already of unit length up to rounding are
    /// kept bit-for-bit, so normalization is idempotent and serialized
    /// directions read back unchanged.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(invalid(format!("cannot normalize ({x}, {y}, {z})")));
        }
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(Self([x, y, z]));
        }
        Ok(Self([x / norm, y / norm, z / norm]))
    }

    /// Direction with polar angle `theta` (from +z) and azimuth `phi`.
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self([st * cp, st * sp, ct])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn dot(&self, other: &UnitDirection) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn neg(&self) -> Self {
        Self([-self.0[0], -self.0[1], -self.0[2]])
    }

    /// Angle in radians between the two directions, ignoring sign (axial).
    pub fn axial_angle(&self, other: &UnitDirection) -> f64 {
        self.dot(other).abs().min(1.0).acos()
    }

    /// Polar angle and azimuth `(theta, phi)`.
    pub fn to_spherical(&self) -> (f64, f64) {
        let theta = self.0[2].clamp(-1.0, 1.0).acos();
        let phi = self.0[1].atan2(self.0[0]);
        (theta, phi)
    }

    /// Two unit vectors completing `self` to a right-handed orthonormal frame.
    pub fn orthonormal_frame(&self) -> ([f64; 3], [f64; 3]) {
        let v = self.0;
        // pick the coordinate axis least aligned with v
        let helper = if v[0].abs() <= v[1].abs() && v[0].abs() <= v[2].abs() {
            [1.0, 0.0, 0.0]
        } else if v[1].abs() <= v[2].abs() {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        };
        let e1 = normalize(cross(v, helper));
        let e2 = cross(v, e1);
        (e1, e2)
    }
}

impl TryFrom<[f64; 3]> for UnitDirection {
    type Error = crate::Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        UnitDirection::new(v[0], v[1], v[2])
    }
}

impl From<UnitDirection> for [f64; 3] {
    fn from(d: UnitDirection) -> Self {
        d.0
    }
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// `K` quasi-uniform directions on the northern hemisphere (`z >= 0`).
///
/// This is the northern half of the Rakhmanov–Saff–Zhou generalized spiral
/// on `2K` points: heights step uniformly from the pole down towards the
/// equator, and each azimuth increment is chosen so that the arc length along
/// the spiral matches the spacing between its coils. The first point sits
/// exactly on the pole.
pub fn spiral_hemisphere(k: usize) -> Result<Vec<UnitDirection>> {
    if k == 0 {
        return Err(invalid("spiral_hemisphere needs at least one point"));
    }
    let n_full = 2 * k;
    let step = 3.6 / (n_full as f64).sqrt();
    let mut phi: f64 = 0.0;
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let h = 1.0 - 2.0 * i as f64 / (n_full - 1) as f64;
        let r = (1.0 - h * h).max(0.0).sqrt();
        if i > 0 {
            phi = (phi + step / r).rem_euclid(2.0 * PI);
        }
        out.push(UnitDirection([r * phi.cos(), r * phi.sin(), h]));
    }
    Ok(out)
}

/// Greedily picks `k` directions out of `pool` so that the smallest axial
/// angle between any two picks is as large as possible. The first pick is
/// the pool entry closest to the pole; ties resolve to the lowest index.
pub fn select_subset(pool: &[UnitDirection], k: usize) -> Result<Vec<UnitDirection>> {
    if k == 0 || k > pool.len() {
        return Err(invalid(format!(
            "cannot select {k} directions out of {}",
            pool.len()
        )));
    }
    let first = (0..pool.len())
        .max_by(|&a, &b| {
            pool[a]
                .z()
                .abs()
                .partial_cmp(&pool[b].z().abs())
                .unwrap()
                .then(b.cmp(&a))
        })
        .unwrap();
    let mut chosen = vec![first];
    let mut min_angle: Vec<f64> = pool.iter().map(|d| d.axial_angle(&pool[first])).collect();
    while chosen.len() < k {
        let mut best = usize::MAX;
        let mut best_angle = -1.0;
        for (i, &a) in min_angle.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            if a > best_angle {
                best_angle = a;
                best = i;
            }
        }
        chosen.push(best);
        for (i, a) in min_angle.iter_mut().enumerate() {
            *a = a.min(pool[i].axial_angle(&pool[best]));
        }
    }
    Ok(chosen.into_iter().map(|i| pool[i]).collect())
}

/// Vertices of a subdivided icosahedron together with their edge adjacency.
#[derive(Clone, Debug)]
pub struct Tessellation {
    pub vertices: Vec<UnitDirection>,
    pub neighbors: Vec<Vec<usize>>,
    pub order: usize,
}

impl Tessellation {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

pub const MAX_ICOSPHERE_ORDER: usize = 6;

/// Icosahedron subdivided `order` times, each triangle split in four with the
/// new vertices projected onto the sphere. Yields `10 * 4^order + 2` vertices.
pub fn icosphere(order: usize) -> Result<Tessellation> {
    if order > MAX_ICOSPHERE_ORDER {
        return Err(invalid(format!(
            "icosphere order {order} exceeds the cap of {MAX_ICOSPHERE_ORDER}"
        )));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let base: [[f64; 3]; 12] = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut verts: Vec<[f64; 3]> = base.iter().map(|&v| normalize(v)).collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..order {
        // midpoints are keyed by their (sorted) parent edge so shared
        // vertices are created exactly once
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut split = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let (pa, pb) = (verts[a], verts[b]);
                verts.push(normalize([pa[0] + pb[0], pa[1] + pb[1], pa[2] + pb[2]]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = split(a, b, &mut verts);
            let bc = split(b, c, &mut verts);
            let ca = split(c, a, &mut verts);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }

    let mut neighbors = vec![Vec::new(); verts.len()];
    for &[a, b, c] in &faces {
        for (p, q) in [(a, b), (b, c), (c, a)] {
            if !neighbors[p].contains(&q) {
                neighbors[p].push(q);
            }
            if !neighbors[q].contains(&p) {
                neighbors[q].push(p);
            }
        }
    }
    for n in &mut neighbors {
        n.sort_unstable();
    }

    Ok(Tessellation {
        vertices: verts.into_iter().map(UnitDirection).collect(),
        neighbors,
        order,
    })
}

/// Legendre polynomial `P_n(t)` for `|t| <= 1`.
pub fn legendre(n: usize, t: f64) -> Result<f64> {
    if !(t.abs() <= 1.0) {
        return Err(invalid(format!("legendre argument {t} outside [-1, 1]")));
    }
    Ok(legendre_unchecked(n, t))
}

pub(crate) fn legendre_unchecked(n: usize, t: f64) -> f64 {
    let mut p_prev = 1.0;
    if n == 0 {
        return p_prev;
    }
    let mut p = t;
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * t * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    p
}

/// Evaluates `sum_n coeffs[n] * P_n(t)` with a single upward recurrence.
/// `t` is clamped to `[-1, 1]` to absorb rounding in dot products.
pub fn legendre_series(coeffs: &[f64], t: f64) -> f64 {
    let t = t.clamp(-1.0, 1.0);
    let mut sum = 0.0;
    let mut p_prev = 0.0;
    let mut p = 1.0;
    for (n, &c) in coeffs.iter().enumerate() {
        sum += c * p;
        let nf = n as f64;
        let p_next = ((2.0 * nf + 1.0) * t * p - nf * p_prev) / (nf + 1.0);
        p_prev = p;
        p = p_next;
    }
    sum
}
