//! Randomized invariants of the geometry and the quotient.

use proptest::prelude::*;

use fraceig::eigensolve::{first_eigenpair, SolveOpts};
use fraceig::geometry::{
    build_mesh, fattened_annulus, inf_distance, sup_distance, DomainSpec, Mesh, Params,
    RegionRef, SetMask,
};
use fraceig::kernel::assemble_kernel;

fn mesh_1d(h: f64, r: f64, s: f64, p: f64) -> Mesh {
    let params = Params { n: 1, s, p, alpha: 0.5, r };
    build_mesh(&DomainSpec::Interval { a: 0.0, b: 1.0 }, &params, h).unwrap()
}

fn mask_from_bits(mesh: &Mesh, bits: u64) -> SetMask {
    let cells: Vec<usize> = mesh
        .candidate_cells()
        .enumerate()
        .filter(|(i, _)| bits >> (i % 64) & 1 == 1)
        .map(|(_, c)| c)
        .collect();
    SetMask::from_cells(mesh, cells).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mask_measure_is_exact(bits in 1u64..u64::MAX) {
        let mesh = mesh_1d(0.25, 2.0, 0.5, 2.0);
        let mask = mask_from_bits(&mesh, bits);
        prop_assert_eq!(mask.measure(), mask.count() as f64 * mesh.cell_volume());
    }

    #[test]
    fn distances_are_symmetric(bits_a in 1u64..u64::MAX, bits_b in 1u64..u64::MAX) {
        let mesh = mesh_1d(0.25, 2.0, 0.5, 2.0);
        let a = mask_from_bits(&mesh, bits_a);
        let b = mask_from_bits(&mesh, bits_b);
        prop_assume!(!a.is_empty() && !b.is_empty());
        let (ra, rb) = (RegionRef::Mask(&a), RegionRef::Mask(&b));
        prop_assert_eq!(
            sup_distance(&mesh, ra, rb).unwrap(),
            sup_distance(&mesh, rb, ra).unwrap()
        );
        prop_assert_eq!(
            inf_distance(&mesh, ra, rb).unwrap(),
            inf_distance(&mesh, rb, ra).unwrap()
        );
        prop_assert_eq!(inf_distance(&mesh, ra, ra).unwrap(), 0.0);
    }

    #[test]
    fn fattening_is_monotone(a in 0.1f64..1.0, extra in 0.1f64..1.5) {
        let mesh = mesh_1d(0.1, 2.0, 0.5, 2.0);
        let small = fattened_annulus(&mesh, a).unwrap();
        let big = fattened_annulus(&mesh, a + extra).unwrap();
        prop_assert!(small.is_subset_of(&big));
    }

    #[test]
    fn seminorm_is_p_homogeneous(scale in -3.0f64..3.0, seed in 0u64..1000) {
        prop_assume!(scale.abs() > 1e-3);
        let (s, p) = (0.5, 2.5);
        let mesh = mesh_1d(0.25, 1.5, s, p);
        let op = assemble_kernel(&mesh, &SetMask::empty(&mesh), s, p).unwrap();
        let u: Vec<f64> = (0..op.ndofs())
            .map(|d| ((d as u64 + seed) as f64 * 0.7).sin())
            .collect();
        let cu: Vec<f64> = u.iter().map(|&x| scale * x).collect();
        let base = op.seminorm(&u).unwrap();
        prop_assume!(base > 1e-12);
        let scaled = op.seminorm(&cu).unwrap();
        prop_assert!((scaled - scale.abs().powf(p) * base).abs() / scaled < 1e-10);
    }

    #[test]
    fn rayleigh_is_scale_invariant(scale in 0.01f64..100.0, seed in 0u64..1000) {
        let (s, p) = (0.5, 2.0);
        let mesh = mesh_1d(0.25, 2.0, s, p);
        let op = assemble_kernel(&mesh, &SetMask::empty(&mesh), s, p).unwrap();
        let u: Vec<f64> = (0..op.ndofs())
            .map(|d| 1.0 + 0.5 * ((d as u64 + seed) as f64 * 0.9).cos())
            .collect();
        let cu: Vec<f64> = u.iter().map(|&x| scale * x).collect();
        let a = op.rayleigh(&u, None).unwrap();
        let b = op.rayleigh(&cu, None).unwrap();
        prop_assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0));
    }

    #[test]
    fn eigenvalue_monotone_under_nesting(bits in 1u64..u64::MAX, extra in 1u64..u64::MAX) {
        let (s, p) = (0.5, 2.0);
        let mesh = mesh_1d(0.25, 2.0, s, p);
        let small = mask_from_bits(&mesh, bits);
        let big = mask_from_bits(&mesh, bits | extra);
        prop_assume!(small.is_subset_of(&big) && big.count() > small.count());
        let opts = SolveOpts::default();
        let l1 = first_eigenpair(&assemble_kernel(&mesh, &small, s, p).unwrap(), None, &opts)
            .unwrap()
            .lambda;
        let l2 = first_eigenpair(&assemble_kernel(&mesh, &big, s, p).unwrap(), None, &opts)
            .unwrap()
            .lambda;
        prop_assert!(l1 <= l2 + 1e-9, "{} vs {}", l1, l2);
    }
}
