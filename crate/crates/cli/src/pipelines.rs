//! The seven pipelines. Each returns its reports and writes dumps and
//! exports under the output directory.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quadrica_core::backlund::{
    bianchi_quad, integrate_ricatti, involution_residual, leaf_space, leaf_space_report, transform, BTParams,
    BacklundConfig,
};
use quadrica_core::confocal::{random_admissible_z, random_cvector, Quadric, QuadricKind};
use quadrica_core::linalg::{max_abs, max_abs_vec};
use quadrica_core::lmap::{build_lmap, lmap_identity_suite, LMap};
use quadrica_core::netgrid::frame::{residual_defqwc, residual_extended};
use quadrica_core::netgrid::{
    christoffel_check, extend_multiconjugate, fundamental_system, integrate_moving_frame, read_field,
    realize_surface, seed_diagonal, write_field, Field, FrameField, FrameModel, FrameState, FundamentalSystem,
    MultiOptions, SeedConstants, SweepOptions,
};
use quadrica_core::sjcalc::{sj_sqrt, SJBlock, SJSpec};
use quadrica_core::{CMatrix, ResidualReport, C64};

use crate::config::RunConfig;
use crate::export::{export_geometry, parse_projection, Format};
use crate::CliError;

type Reports = Vec<ResidualReport>;

/// Independent random stream `k` of the run seed.
fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

fn z_values(cfg: &RunConfig, q: &Quadric) -> Result<Vec<C64>, CliError> {
    let zs = match cfg.fixed_z() {
        Some(zs) => zs,
        None => {
            let mut rng = stream(cfg.seed(), 1);
            (0..cfg.z_count.unwrap_or(10)).map(|_| random_admissible_z(&mut rng, q)).collect()
        }
    };
    for &z in &zs {
        q.admissible(z)?;
    }
    Ok(zs)
}

pub fn sjcheck(cfg: &RunConfig) -> Result<Reports, CliError> {
    let mut rng = stream(cfg.seed(), 2);
    let mut rep = ResidualReport::new("sj");
    let (mut sq, mut comm) = (Vec::new(), Vec::new());
    for _ in 0..cfg.samples(200) {
        let m = SJSpec::random(&mut rng, 8, 6);
        let s = sj_sqrt(&m)?;
        let a = m.assemble();
        sq.push(max_abs(&(&s * &s - &a)));
        let other = SJSpec::new(
            m.blocks
                .iter()
                .map(|b| SJBlock::new(C64::from_polar(rng.random_range(0.5..2.0), rng.random_range(-3.0..3.0)), b.p))
                .collect(),
        );
        let (b, ib) = (other.assemble(), other.inverse()?);
        comm.push(max_abs(&(&a * &b - &b * &a)).max(max_abs(&(&s * &ib - &ib * &s))));
    }
    rep.push("sqrt", &sq);
    rep.push("commutation", &comm);
    if let Some(blocks) = cfg.quadric.as_ref().and_then(|q| q.blocks.clone()) {
        let m = SJSpec::new(blocks);
        if m.blocks.iter().all(|b| b.eigenvalue().norm() > 0.0) {
            let s = sj_sqrt(&m)?;
            rep.push("quadric_sqrt", &[max_abs(&(&s * &s - m.assemble()))]);
        } else {
            rep.note("the configured quadric has a zero eigenvalue; its square root is not checked");
        }
    }
    Ok(vec![rep])
}

pub fn confocal_verify(cfg: &RunConfig) -> Result<Reports, CliError> {
    let q = cfg.quadric()?;
    let id = CMatrix::identity(q.dim(), q.dim());
    let mut rep = ResidualReport::new("confocal");
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    for z in z_values(cfg, &q)? {
        let s = q.sqrt_rz(z)?;
        let cz = q.c_vector(z)?;
        ca.push(max_abs_vec(&(&q.a * &cz + (&id - &s) * &q.b)));
        cb.push(max_abs_vec(&((&id + &s) * &cz + &q.b * z)));
    }
    rep.push("c_identity_a", &ca);
    rep.push("c_identity_b", &cb);
    if q.kind == QuadricKind::QC {
        q.check_general()?;
        let mut rng = stream(cfg.seed(), 3);
        let (mut on, mut orth, mut skipped) = (Vec::new(), Vec::new(), 0);
        let want = cfg.samples(100);
        while on.len() < want {
            let x = random_cvector(&mut rng, q.dim(), 1.0);
            let zs = match q.elliptic_coords(&x) {
                Ok(zs) => zs,
                Err(quadrica_core::Error::MultipleRoots(_)) if skipped < 10 * want => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let nz = zs.iter().map(|&z| q.q_eval_normal(&x, z)).collect::<Result<Vec<_>, _>>()?;
            on.push(nz.iter().map(|(v, _)| v.norm()).fold(0.0, f64::max));
            let mut o = 0.0f64;
            for (i, (_, ni)) in nz.iter().enumerate() {
                for (_, nj) in &nz[i + 1..] {
                    o = o.max(ni.dot(nj).norm());
                }
            }
            orth.push(o);
        }
        rep.push("on_quadric", &on);
        rep.push("normal_orthogonality", &orth);
        if skipped > 0 {
            rep.note(format!("{skipped} sample points on the isotropic-normal locus were skipped"));
        }
    } else {
        rep.note("elliptic coordinates are checked for QC only");
    }
    Ok(vec![rep])
}

pub fn ivory_verify(cfg: &RunConfig) -> Result<Reports, CliError> {
    let q = cfg.quadric()?;
    let mut rng = stream(cfg.seed(), 4);
    z_values(cfg, &q)?
        .into_iter()
        .map(|z| {
            let mut rep = quadrica_core::confocal::ivory_identity_suite(&q, z, cfg.samples(100), rng.random())?;
            rep.note(format!("z = {z}"));
            Ok(rep)
        })
        .collect()
}

pub fn lmap_verify(cfg: &RunConfig) -> Result<Reports, CliError> {
    let q = cfg.quadric()?;
    let lm = build_lmap(&q)?;
    let mut inv = ResidualReport::new("lmap");
    inv.push("invariants", &[lm.invariants(&q)]);
    let mut out = vec![inv];
    let mut rng = stream(cfg.seed(), 5);
    for z in z_values(cfg, &q)? {
        let mut rep = lmap_identity_suite(&q, &lm, z, cfg.samples(20), rng.random())?;
        rep.note(format!("z = {z}"));
        out.push(rep);
    }
    Ok(out)
}

fn sweep(cfg: &RunConfig) -> SweepOptions {
    let mut o = SweepOptions::default();
    if let Some(s) = cfg.substeps {
        o.substeps = s;
    }
    o
}

struct Setup {
    q: Quadric,
    lm: LMap,
    model: FrameModel,
}

fn setup(cfg: &RunConfig) -> Result<Setup, CliError> {
    let q = cfg.quadric()?;
    let lm = build_lmap(&q)?;
    let model = FrameModel::new(&q, &lm);
    Ok(Setup { q, lm, model })
}

/// Seed fields together with the optional realization in space.
struct Base {
    state: FrameState,
    fs: Option<FundamentalSystem>,
    x: Option<Field>,
    id: String,
}

fn seed_base(cfg: &RunConfig, s: &Setup, reports: &mut Reports) -> Result<Base, CliError> {
    let grid = cfg.grid()?;
    let k = match &cfg.seed_constants {
        Some(k) => k.clone(),
        None => SeedConstants::standard(&s.model)?.with_rates(cfg.rates()),
    };
    let state = seed_diagonal(&s.model, &grid, &k)?.state();
    let pi: Vec<f64> = (0..grid.npoints()).map(|i| s.model.prime_integral(&state.v_at(i), &state.lam_at(i)).norm()).collect();
    let mut rep = ResidualReport::new("seed");
    rep.push("prime_integral", &pi);
    reports.push(rep);
    let fs = fundamental_system(&state.frames, &s.model, &s.lm, &state.v_at(0), &state.lam_at(0), sweep(cfg))?;
    reports.push(fs.report.clone());
    let x = if s.q.kind == QuadricKind::QWC {
        let re = realize_surface(&fs, &state.frames, &s.model, &state.v, &state.lam)?;
        reports.push(re.report);
        Some(re.x)
    } else {
        None
    };
    Ok(Base { state, fs: Some(fs), x, id: "seed".into() })
}

fn exists(dir: &Path, name: &str) -> bool {
    dir.join(format!("{name}.json")).exists()
}

fn load_base(dir: &Path, s: &Setup) -> Result<Base, CliError> {
    let r = read_field(dir, "R")?;
    let nd = r.grid.ndim();
    let mut frames = if (0..nd).all(|a| exists(dir, &format!("dR_{a}"))) {
        let dr = (0..nd).map(|a| read_field(dir, &format!("dR_{a}"))).collect::<Result<Vec<_>, _>>()?;
        FrameField::with_derivatives(r, dr)
    } else {
        FrameField::from_r(r)
    };
    if exists(dir, "M") && exists(dir, "N") {
        frames = frames.with_mn(read_field(dir, "M")?, read_field(dir, "N")?);
    }
    let v = read_field(dir, "V")?;
    let lam = read_field(dir, "Lambda")?;
    if v.shape() != (s.model.n, 1) || frames.n() != s.model.n {
        return Err(CliError::Usage(format!("dumps in {} do not match the quadric (n = {})", dir.display(), s.model.n)));
    }
    let fs = if exists(dir, "Y") { Some(FundamentalSystem { kind: s.q.kind, y: read_field(dir, "Y")?, report: ResidualReport::new("fundamental_system") }) } else { None };
    let x = if exists(dir, "x") { Some(read_field(dir, "x")?) } else { None };
    Ok(Base { state: FrameState { frames, v, lam }, fs, x, id: dir.display().to_string() })
}

fn base(cfg: &RunConfig, s: &Setup, reports: &mut Reports) -> Result<Base, CliError> {
    match &cfg.input {
        Some(dir) => load_base(dir, s),
        None => seed_base(cfg, s, reports),
    }
}

fn dump(cfg: &RunConfig, out: &Path, fields: &[(&str, &Field)]) -> Result<(), CliError> {
    if !cfg.dump_fields {
        return Ok(());
    }
    let dir = out.join("fields");
    for (name, f) in fields {
        write_field(&dir, name, f)?;
    }
    Ok(())
}

fn dump_frames(cfg: &RunConfig, out: &Path, suffix: &str, st: &FrameState) -> Result<(), CliError> {
    let f = &st.frames;
    let names: Vec<String> = (0..f.dr.len()).map(|a| format!("dR{suffix}_{a}")).collect();
    let mut fields: Vec<(String, &Field)> = vec![
        (format!("R{suffix}"), &f.r),
        (format!("V{suffix}"), &st.v),
        (format!("Lambda{suffix}"), &st.lam),
    ];
    fields.extend(names.into_iter().zip(&f.dr));
    if let (Some(m), Some(nm)) = (&f.m, &f.nmat) {
        fields.push((format!("M{suffix}"), m));
        fields.push((format!("N{suffix}"), nm));
    }
    let refs: Vec<(&str, &Field)> = fields.iter().map(|(n, f)| (n.as_str(), *f)).collect();
    dump(cfg, out, &refs)
}

fn export(cfg: &RunConfig, out: &Path, stem: &str, x: &Field, mask: Option<&[bool]>) -> Result<(), CliError> {
    let proj = parse_projection(cfg.projection.as_ref())?;
    for f in &cfg.export {
        let format: Format = f.parse()?;
        std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
        export_geometry(x, mask, format, &proj, &out.join(format!("{stem}.{}", format.extension())))?;
    }
    Ok(())
}

pub fn deform(cfg: &RunConfig, out: &Path) -> Result<Reports, CliError> {
    let s = setup(cfg)?;
    let mut reports = Vec::new();
    let b = seed_base(cfg, &s, &mut reports)?;
    let st = &b.state;
    let opts = sweep(cfg);
    reports.insert(1, residual_defqwc(&st.frames, &s.model.a_prime));
    let grid = st.v.grid.clone();
    if grid.extra > 0 {
        reports.push(residual_extended(&st.frames, &s.model));
    }
    reports.push(integrate_moving_frame(&st.frames, &s.model, &st.v_at(0), &st.lam_at(0), opts)?.report);
    if s.q.kind == QuadricKind::QWC {
        reports.push(christoffel_check(&st.frames, &s.model, &st.v, &st.lam)?);
    }
    dump_frames(cfg, out, "", st)?;
    let fs = b.fs.as_ref().expect("seed has a fundamental system");
    dump(cfg, out, &[("Y", &fs.y)])?;
    if let Some(x) = &b.x {
        dump(cfg, out, &[("x", x)])?;
        export(cfg, out, "x", x, None)?;
    }
    if grid.extra > 0 && grid.extra + 1 == s.model.n {
        let [a, c] = cfg.multiconjugate.unwrap_or([[0.2, 0.0], [0.0, 0.1]]);
        let (a, c) = (C64::new(a[0], a[1]), C64::new(c[0], c[1]));
        let g = move |_: usize, t: f64| a * t + c;
        let mc = extend_multiconjugate(fs, &st.frames, &s.model, &st.v, &st.lam, &g, &MultiOptions::default())?;
        dump(cfg, out, &[("x_multi", &mc.x)])?;
        export(cfg, out, "x_multi", &mc.x, Some(&mc.mask))?;
        reports.push(mc.report);
    }
    Ok(reports)
}

fn bt_params(s: &Setup, bc: &BacklundConfig) -> Result<BTParams, CliError> {
    Ok(BTParams::for_quadric(&s.q, &s.model, bc.z(), bc.branch)?)
}

pub fn backlund(cfg: &RunConfig, out: &Path) -> Result<Reports, CliError> {
    let bc = cfg.backlund.as_ref().ok_or_else(|| CliError::Usage("backlund needs a backlund section".into()))?;
    let s = setup(cfg)?;
    let mut reports = Vec::new();
    let b = base(cfg, &s, &mut reports)?;
    let bt = bt_params(&s, bc)?;
    let run = integrate_ricatti(&b.state.frames, &bt, &bc.initial_rotation(s.model.n)?, sweep(cfg))?;
    reports.push(run.report.clone());
    let lf = transform(&b.state, &run, &bt, &s.model, &b.id)?;
    reports.push(lf.report.clone());
    let mut inv = ResidualReport::new("involution");
    inv.push("involution", &involution_residual(&b.state, &lf, &s.model));
    reports.push(inv);
    dump_frames(cfg, out, "1", &lf.state)?;
    match (&b.x, &b.fs) {
        (Some(x0), Some(fs)) => {
            let x1 = leaf_space(x0, fs, &b.state.v, &lf.state.v, &bt);
            reports.push(leaf_space_report(x0, &x1, &lf, &b.state, &bt, &s.model));
            dump(cfg, out, &[("x1", &x1)])?;
            export(cfg, out, "x1", &x1, None)?;
        }
        _ => {
            let mut r = ResidualReport::new("leaf_space");
            r.note("no realized seed available; the leaf is not realized in space");
            reports.push(r);
        }
    }
    Ok(reports)
}

pub fn bpt(cfg: &RunConfig, out: &Path) -> Result<Reports, CliError> {
    let sec = cfg.bpt.as_ref().ok_or_else(|| CliError::Usage("bpt needs a bpt section with first and second".into()))?;
    let s = setup(cfg)?;
    let mut reports = Vec::new();
    let b = base(cfg, &s, &mut reports)?;
    let (b1, b2) = (bt_params(&s, &sec.first)?, bt_params(&s, &sec.second)?);
    let n = s.model.n;
    let quad = bianchi_quad(
        &b.state,
        &s.model,
        &b1,
        &b2,
        &sec.first.initial_rotation(n)?,
        &sec.second.initial_rotation(n)?,
        sweep(cfg),
    )?;
    dump_frames(cfg, out, "1", &quad.leaf1.state)?;
    dump_frames(cfg, out, "2", &quad.leaf2.state)?;
    dump_frames(cfg, out, "3", &quad.leaf3.state)?;
    reports.push(quad.report);
    Ok(reports)
}
