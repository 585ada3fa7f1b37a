//! Dictionary checks against product Gauss–Legendre × trapezoid quadrature
//! (nodes from the Golub–Welsch eigenproblem) and direct atom evaluation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use hardi_recon::dictionary::{
    assemble_sensing_matrix, build_gaussian_dictionary, build_ridgelet_dictionary, build_sh_dictionary,
    default_gaussian_kernel, frt_kernel_matrix, frt_quadrature_matrix, funk_radon_multiplier, Atom, RidgeletSpec,
    DEFAULT_GAUSSIAN_ROTATIONS,
};
use hardi_recon::sphere::{icosphere, spiral_hemisphere, UnitDirection};

/// Gauss–Legendre nodes and weights on [-1, 1] from the Jacobi matrix.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], 2.0 * v0 * v0)
        })
        .collect()
}

/// Product rule exact for spherical polynomials of degree < 2 * `n`.
fn sphere_rule(n: usize) -> Vec<(UnitDirection, f64)> {
    let mut out = Vec::new();
    let n_phi = 2 * n;
    for (t, w) in gauss_legendre(n) {
        for k in 0..n_phi {
            let phi = 2.0 * PI * k as f64 / n_phi as f64;
            let r = (1.0 - t * t).sqrt();
            let u = UnitDirection::new(r * phi.cos(), r * phi.sin(), t).unwrap();
            out.push((u, w * 2.0 * PI / n_phi as f64));
        }
    }
    out
}

#[test]
fn quadrature_rule_integrates_constants_and_quadratics() {
    let rule = sphere_rule(12);
    let area: f64 = rule.iter().map(|(_, w)| w).sum();
    assert!((area - 4.0 * PI).abs() < 1e-12);
    let zz: f64 = rule.iter().map(|(u, w)| w * u.z() * u.z()).sum();
    assert!((zz - 4.0 * PI / 3.0).abs() < 1e-12);
}

#[test]
fn spherical_harmonics_are_orthonormal() {
    let dict = build_sh_dictionary(8).unwrap();
    assert_eq!(dict.len(), 45);
    let rule = sphere_rule(12);
    for i in 0..dict.len() {
        for j in 0..=i {
            let g: f64 = rule
                .iter()
                .map(|(u, w)| w * dict.atoms[i].evaluate(u) * dict.atoms[j].evaluate(u))
                .sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((g - expected).abs() < 1e-10, "<{i},{j}> = {g}");
        }
    }
}

#[test]
fn harmonic_atoms_are_even() {
    let dict = build_sh_dictionary(8).unwrap();
    for u in spiral_hemisphere(20).unwrap() {
        for atom in &dict.atoms {
            assert!((atom.evaluate(&u) - atom.evaluate(&u.neg())).abs() < 1e-12);
        }
    }
}

#[test]
fn ridgelet_atoms_integrate_to_their_mean_term() {
    // integral of sum_n c_n P_n(u . v) over the sphere is 4 pi c_0
    let dict = build_ridgelet_dictionary(&RidgeletSpec::default()).unwrap();
    let rule = sphere_rule(40);
    for m in [0, 7, 20, 100, 233] {
        let atom = &dict.atoms[m];
        let c0 = atom.degree_profile().unwrap()[0];
        let integral: f64 = rule.iter().map(|(u, w)| w * atom.evaluate(u)).sum();
        assert!((integral - 4.0 * PI * c0).abs() < 1e-9, "atom {m}: {integral} vs {}", 4.0 * PI * c0);
    }
}

#[test]
fn ridgelet_profiles_are_even_and_zonal() {
    let dict = build_ridgelet_dictionary(&RidgeletSpec::default()).unwrap();
    for atom in &dict.atoms {
        let profile = atom.degree_profile().unwrap();
        for (n, c) in profile.iter().enumerate() {
            if n % 2 == 1 {
                assert_eq!(*c, 0.0, "odd degree {n} present");
            }
        }
        if let Atom::Ridgelet { orientation, .. } = atom {
            // rotating the evaluation point about the orientation leaves the value unchanged
            let (e1, e2) = orientation.orthonormal_frame();
            let o = orientation.as_array();
            let at = |phi: f64| {
                let (s, c) = phi.sin_cos();
                let t = 0.3f64;
                let r = (1.0 - t * t).sqrt();
                UnitDirection::new(
                    t * o[0] + r * (c * e1[0] + s * e2[0]),
                    t * o[1] + r * (c * e1[1] + s * e2[1]),
                    t * o[2] + r * (c * e1[2] + s * e2[2]),
                )
                .unwrap()
            };
            assert!((atom.evaluate(&at(0.0)) - atom.evaluate(&at(2.0))).abs() < 1e-10);
        }
    }
}

#[test]
fn sensing_matrix_entries_are_atom_values() {
    let dict = build_ridgelet_dictionary(&RidgeletSpec::default()).unwrap();
    let dirs = spiral_hemisphere(16).unwrap();
    let a = assemble_sensing_matrix(&dict, &dirs).unwrap();
    assert_eq!((a.matrix().rows(), a.matrix().cols()), (16, 234));
    for k in [0, 5, 15] {
        for m in [0, 16, 64, 65, 233] {
            assert_eq!(a.matrix().get(k, m), dict.atoms[m].evaluate(&dirs[k]));
        }
    }
}

#[test]
fn funk_radon_of_harmonics_matches_quadrature() {
    let dict = build_sh_dictionary(8).unwrap();
    let tess = icosphere(1).unwrap();
    let closed = frt_kernel_matrix(&dict, &tess).unwrap();
    let quad = frt_quadrature_matrix(&dict, &tess, 256).unwrap();
    for i in 0..tess.len() {
        for m in 0..dict.len() {
            assert!((closed.get(i, m) - quad.get(i, m)).abs() < 1e-10);
        }
    }
}

#[test]
fn funk_radon_multiplier_vanishes_for_odd_degrees() {
    for n in (1..40).step_by(2) {
        assert_eq!(funk_radon_multiplier(n), 0.0);
    }
    assert!((funk_radon_multiplier(0) - 2.0 * PI).abs() < 1e-15);
    assert!((funk_radon_multiplier(2) + PI).abs() < 1e-14);
}

#[test]
fn gaussian_atoms_follow_their_tensor() {
    let b = 3000.0;
    let kernel = default_gaussian_kernel();
    let dict = build_gaussian_dictionary(DEFAULT_GAUSSIAN_ROTATIONS, b, &kernel).unwrap();
    assert_eq!(dict.len(), 253);
    assert!(frt_kernel_matrix(&dict, &icosphere(0).unwrap()).is_err());
    let (values, _) = kernel.eigen();
    for atom in &dict.atoms {
        let Atom::Gaussian { axis, .. } = atom else {
            panic!("non-Gaussian atom")
        };
        // along its axis the atom decays with the largest eigenvalue
        assert!((atom.evaluate(axis) - (-b * values[0]).exp()).abs() < 1e-12);
        assert!((atom.evaluate(axis) - atom.evaluate(&axis.neg())).abs() < 1e-15);
    }
}
