use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use quadrica_core::backlund::{bpt_rotation, dmat, involution_point, leaf_point, BTParams};
use quadrica_core::confocal::{random_admissible_z, random_cvector, random_quadric, QuadricKind};
use quadrica_core::linalg::{c, max_abs, max_abs_vec, r};
use quadrica_core::lmap::build_lmap;
use quadrica_core::netgrid::{FrameModel, GridSpec};
use quadrica_core::netgrid::grid::Field;
use quadrica_core::sjcalc::{csqrt, isotropic_vector, random_rotation, sj_block, sj_sqrt, SJBlock, SJSpec};
use quadrica_core::{CMatrix, C64};

fn spec_from(seed: u64) -> SJSpec {
    SJSpec::random(&mut ChaCha8Rng::seed_from_u64(seed), 8, 6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sqrt_squares_back(seed in any::<u64>()) {
        let m = spec_from(seed);
        let s = sj_sqrt(&m).unwrap();
        prop_assert!(max_abs(&(&s * &s - m.assemble())) < 1e-12);
    }

    #[test]
    fn same_type_commutes(seed in any::<u64>(), a in prop::collection::vec((0.5f64..2.0, -3.0f64..3.0), 8)) {
        let m = spec_from(seed);
        let other = SJSpec::new(
            m.blocks.iter().zip(&a).map(|(b, &(rho, th))| SJBlock::new(C64::from_polar(rho, th), b.p)).collect(),
        );
        let (x, y) = (m.assemble(), other.assemble());
        prop_assert!(max_abs(&(&x * &y - &y * &x)) < 1e-12);
        let (sx, iy) = (m.sqrt().unwrap(), other.inverse().unwrap());
        prop_assert!(max_abs(&(&sx * &iy - &iy * &sx)) < 1e-12);
    }

    #[test]
    fn csqrt_branch(re in -10.0f64..10.0, im in -10.0f64..10.0) {
        prop_assume!(re != 0.0 || im != 0.0);
        let a = c(re, im);
        let s = csqrt(a).unwrap();
        prop_assert!((s * s - a).norm() < 1e-12 * (1.0 + a.norm()));
        prop_assert!(s.re >= 0.0);
        if s.re == 0.0 {
            prop_assert!(s.im < 0.0);
        }
    }

    #[test]
    fn involution_and_prime_integral(seed in any::<u64>(), iqwc in any::<bool>(), n in 2usize..4, flip in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = if iqwc { QuadricKind::IQWC } else { QuadricKind::QWC };
        let q = random_quadric(&mut rng, kind, n).unwrap();
        let m = FrameModel::new(&q, &build_lmap(&q).unwrap());
        let z = random_admissible_z(&mut rng, &q);
        let bt = BTParams::for_quadric(&q, &m, z, if flip { -1 } else { 1 }).unwrap();
        let v0 = random_cvector(&mut rng, n, 1.0);
        let l0 = random_cvector(&mut rng, n, 1.0);
        let (r0, r1) = (random_rotation(n, seed), random_rotation(n, seed ^ 0x5a5a));
        let (v1, l1) = leaf_point(&m, &bt, &v0, &l0, &r0, &r1);
        let (v2, l2) = involution_point(&m, &bt, &v1, &l1, &r0, &r1);
        let scale = 1.0 + max_abs_vec(&v1) + max_abs_vec(&l1);
        prop_assert!(max_abs_vec(&(v2 - &v0)) + max_abs_vec(&(l2 - &l0)) < 1e-10 * scale);
        let (p0, p1) = (m.prime_integral(&v0, &l0), m.prime_integral(&v1, &l1));
        prop_assert!((p0 - p1).norm() < 1e-10 * scale * scale);
    }

    #[test]
    fn bpt_identity_and_symmetry(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_quadric(&mut rng, QuadricKind::QWC, n).unwrap();
        let m = FrameModel::new(&q, &build_lmap(&q).unwrap());
        let (z1, z2) = (random_admissible_z(&mut rng, &q), random_admissible_z(&mut rng, &q));
        prop_assume!((z1 - z2).norm() > 1e-2);
        let (b1, b2) = (dmat(&m.a_prime, z1, 1).unwrap(), dmat(&m.a_prime, z2, 1).unwrap());
        let g = GridSpec::new(1, 0, 0.1, vec![3]).unwrap();
        let field = |s: u64| Field::constant(&g, &random_rotation(n, s));
        let (f0, f1, f2) = (field(seed), field(seed + 1), field(seed + 2));
        let (r3, mask) = bpt_rotation(&f0, &f1, &f2, &b1, &b2).unwrap();
        prop_assume!(!mask[0]);
        let (r3s, _) = bpt_rotation(&f0, &f2, &f1, &b2, &b1).unwrap();
        let (r0, r1, r2, r3) = (&f0.data[0], &f1.data[0], &f2.data[0], &r3.data[0]);
        let id = CMatrix::identity(n, n);
        let lhs = (&b2.d * r3 * r0.transpose() + &b1.d) * (&b2.d * r2 * r1.transpose() - &b1.d);
        let scale = 1.0 + max_abs(r3);
        prop_assert!(max_abs(&(lhs - &id * (1.0 / z2 - 1.0 / z1))) < 1e-10 * scale * scale);
        prop_assert!(max_abs(&(r3 * r3.transpose() - &id)) < 1e-10 * scale * scale);
        prop_assert!(max_abs(&(r3 - &r3s.data[0])) < 1e-10 * scale);
    }

    #[test]
    fn c_vector_identities(seed in any::<u64>(), kind in 0usize..3, n in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = [QuadricKind::QC, QuadricKind::QWC, QuadricKind::IQWC][kind];
        let q = random_quadric(&mut rng, kind, n).unwrap();
        let z = random_admissible_z(&mut rng, &q);
        let s = q.sqrt_rz(z).unwrap();
        let cz = q.c_vector(z).unwrap();
        let id = CMatrix::identity(n + 1, n + 1);
        prop_assert!(max_abs_vec(&(&q.a * &cz + (&id - &s) * &q.b)) < 1e-12);
        prop_assert!(max_abs_vec(&((&id + &s) * &cz + &q.b * z)) < 1e-12);
    }

    #[test]
    fn lmap_invariants(seed in any::<u64>(), iqwc in any::<bool>(), n in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = if iqwc { QuadricKind::IQWC } else { QuadricKind::QWC };
        let q = random_quadric(&mut rng, kind, n).unwrap();
        let lm = build_lmap(&q).unwrap();
        prop_assert!(lm.invariants(&q) < 1e-10);
        if !iqwc {
            prop_assert_eq!(&lm.a_prime, &q.a);
        }
        for k in &lm.kernel {
            prop_assert!(max_abs_vec(&(&lm.a_prime * k)) < 1e-10);
        }
    }

    #[test]
    fn elliptic_roots_move_continuously(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_quadric(&mut rng, QuadricKind::QC, 2).unwrap();
        let x = random_cvector(&mut rng, 3, 1.0);
        let dx = random_cvector(&mut rng, 3, 1e-7);
        let (Ok(a), Ok(b)) = (q.elliptic_coords(&x), q.elliptic_coords(&(&x + &dx))) else { return Ok(()) };
        // match each root to its nearest perturbed root
        let spread = a.iter().map(|za| b.iter().map(|zb| (za - zb).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
        let sep = (0..3).flat_map(|i| (i + 1..3).map(move |j| (i, j))).map(|(i, j)| (a[i] - a[j]).norm()).fold(f64::INFINITY, f64::min);
        prop_assume!(sep > 1e-2);
        prop_assert!(spread < 1e-4 / sep, "spread {spread:e}, separation {sep:e}");
    }
}

#[test]
fn highest_power_picks_the_corner() {
    for p in 2..=6 {
        let fb = isotropic_vector(1, p).unwrap().map(|z| z.conj());
        let j = sj_block(p);
        let mut pk = CMatrix::identity(p, p);
        for k in 0..p {
            let v = (fb.transpose() * &pk * &fb)[0];
            assert!((v - r(if k == p - 1 { 1.0 } else { 0.0 })).norm() < 1e-14, "p={p} k={k}");
            pk = &pk * &j;
        }
    }
}
