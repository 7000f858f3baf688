use quadrica_core::backlund::{
    bianchi_quad, closed_form_run_n2, dmat, leaf, leaf_frames, leaf_space, transform, BTParams, BacklundConfig,
};
use quadrica_core::confocal::diagonal_qwc;
use quadrica_core::linalg::{c, max_abs, r};
use quadrica_core::lmap::build_lmap;
use quadrica_core::netgrid::{
    fundamental_system, read_field, realize_surface, seed_diagonal, write_field, Field, FrameModel, GridSpec,
    SeedConstants, SweepOptions,
};
use quadrica_core::{CMatrix, CVector, Error};

fn model() -> (quadrica_core::confocal::Quadric, quadrica_core::lmap::LMap, FrameModel) {
    let q = diagonal_qwc(&[r(1.0), r(2.0)]).unwrap();
    let lm = build_lmap(&q).unwrap();
    let m = FrameModel::new(&q, &lm);
    (q, lm, m)
}

#[test]
fn leaf_in_space_tends_to_the_seed() {
    let (q, lm, m) = model();
    let k = SeedConstants::standard(&m).unwrap();
    let g = GridSpec::square(2, 0, 9, 0.32).unwrap();
    let s = seed_diagonal(&m, &g, &k).unwrap().state();
    let fs = fundamental_system(&s.frames, &m, &lm, &s.v_at(0), &s.lam_at(0), SweepOptions::default()).unwrap();
    let x0 = realize_surface(&fs, &s.frames, &m, &s.v, &s.lam).unwrap().x;
    // With diagonal D the identity rotation solves the Ricatti system for every z.
    let gap = |z: f64| {
        let bt = BTParams::for_quadric(&q, &m, r(z), 1).unwrap();
        let (v1, _) = leaf(&s, &s.frames.r, &bt, &m);
        let x1 = leaf_space(&x0, &fs, &s.v, &v1, &bt);
        x1.data.iter().zip(&x0.data).map(|(a, b)| max_abs(&(a - b))).fold(0.0, f64::max)
    };
    let (a, b) = (gap(1e-4), gap(1e-6));
    assert!(a < 1e-1 && b > 0.0);
    let ratio = a / b;
    assert!((8.0..12.5).contains(&ratio), "gap ratio {ratio}");
}

#[test]
fn leaf_is_not_congruent_to_the_seed() {
    let (q, lm, m) = model();
    let k = SeedConstants::standard(&m).unwrap();
    let g = GridSpec::square(2, 0, 17, 0.64).unwrap();
    let s = seed_diagonal(&m, &g, &k).unwrap().state();
    let bt = BTParams::for_quadric(&q, &m, r(0.3), 1).unwrap();
    let lf = transform(&s, &closed_form_run_n2(&s.frames, &bt, c(0.7, 0.2), r(0.0)), &bt, &m, "seed").unwrap();
    let fs = fundamental_system(&s.frames, &m, &lm, &s.v_at(0), &s.lam_at(0), SweepOptions::default()).unwrap();
    let x0 = realize_surface(&fs, &s.frames, &m, &s.v, &s.lam).unwrap().x;
    let x1 = leaf_space(&x0, &fs, &s.v, &lf.state.v, &bt);
    // Complex rigid motions preserve all bilinear distances |x_i - x_j|^2.
    let sample = [0, 40, 144, 200, 288];
    let mut worst = 0.0f64;
    for &i in &sample {
        for &j in &sample {
            let d0: CVector = (&x0.data[i] - &x0.data[j]).column(0).into_owned();
            let d1: CVector = (&x1.data[i] - &x1.data[j]).column(0).into_owned();
            worst = worst.max((d0.dot(&d0) - d1.dot(&d1)).norm());
        }
    }
    assert!(worst > 1e-3, "leaf distances match the seed ({worst:e})");
}

#[test]
fn leaf_frames_of_a_flat_extension_vanish() {
    let (q, _, m) = model();
    let k = SeedConstants::standard(&m).unwrap();
    let g = GridSpec::new(2, 1, 0.05, vec![5, 5, 5]).unwrap();
    let s = seed_diagonal(&m, &g, &k).unwrap().state();
    assert!(s.frames.m_or_zero().max_abs() == 0.0);
    let bt = BTParams::for_quadric(&q, &m, r(0.3), 1).unwrap();
    let run = closed_form_run_n2(&s.frames, &bt, c(0.7, 0.2), r(0.0));
    let (m1, n1, leak) = leaf_frames(&s.frames, &run.r, &bt, &m.a_prime).unwrap();
    assert_eq!(m1.max_abs(), 0.0);
    assert_eq!(n1.max_abs(), 0.0);
    assert!(leak.iter().all(|&x| x == 0.0));
}

#[test]
fn leaf_frames_need_an_invariant_last_axis() {
    let (q, _, m) = model();
    let k = SeedConstants::standard(&m).unwrap();
    let g = GridSpec::new(2, 1, 0.05, vec![3, 3, 3]).unwrap();
    let s = seed_diagonal(&m, &g, &k).unwrap().state();
    let bt = BTParams::for_quadric(&q, &m, r(0.3), 1).unwrap();
    let ap = CMatrix::from_row_slice(2, 2, &[r(1.0), r(0.3), r(0.3), r(0.5)]);
    assert!(matches!(leaf_frames(&s.frames, &s.frames.r, &bt, &ap), Err(Error::Precondition(_))));
}

#[test]
fn equal_parameters_are_rejected() {
    let (q, _, m) = model();
    let k = SeedConstants::standard(&m).unwrap();
    let g = GridSpec::square(2, 0, 3, 0.1).unwrap();
    let s = seed_diagonal(&m, &g, &k).unwrap().state();
    let bt = BTParams::for_quadric(&q, &m, r(0.3), 1).unwrap();
    let id = CMatrix::identity(2, 2);
    let res = bianchi_quad(&s, &m, &bt, &bt, &id, &id, SweepOptions::default());
    assert!(matches!(res, Err(Error::Precondition(_))));
}

#[test]
fn resonant_parameter_is_rejected() {
    let (_, _, m) = model();
    let z = r(1.0) / m.a_prime[(1, 1)];
    assert!(matches!(dmat(&m.a_prime, z, 1), Err(Error::Resonance { .. })));
}

#[test]
fn leaf_state_dumps_roundtrip() {
    let (q, _, m) = model();
    let k = SeedConstants::standard(&m).unwrap();
    let g = GridSpec::square(2, 0, 5, 0.2).unwrap();
    let s = seed_diagonal(&m, &g, &k).unwrap().state();
    let cfg: BacklundConfig = serde_json::from_str(r#"{"z": [0.3, 0.0], "branch": 1, "R1_init": "identity"}"#).unwrap();
    let bt = BTParams::for_quadric(&q, &m, cfg.z(), cfg.branch).unwrap();
    let run = closed_form_run_n2(&s.frames, &bt, c(0.2, 0.0), r(0.0));
    let lf = transform(&s, &run, &bt, &m, "seed").unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_field(dir.path(), "V1", &lf.state.v).unwrap();
    write_field(dir.path(), "R1", &lf.state.frames.r).unwrap();
    let back: Field = read_field(dir.path(), "R1").unwrap();
    assert_eq!(back.data, lf.state.frames.r.data);
    assert_eq!(read_field(dir.path(), "V1").unwrap().data, lf.state.v.data);
}
