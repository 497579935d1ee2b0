use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use desing::actions::models::*;
use desing::actions::{fixed_subspace, stratum_dimension};
use desing::blowup::{blow_up, desingularize, exceptional_leaf_check, BlowupCenter, BlownUpManifold, DesingularizeOptions};
use desing::linalg;
use desing::metrics::*;
use desing::quotient::*;
use desing::strata::{self, check_frontier, check_no_codim_one, stratify, Sample};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit, format!("runtime {:.2}s exceeds {limit}s", elapsed.as_secs_f64()))
}

fn euclid(n: usize) -> Field {
    Arc::new(Euclidean(n))
}

fn stratification() -> Outcome {
    let t = Instant::now();
    let a = build(&circle_about_z());
    let s = stratify(&a, 1.0, 20).map_err(|e| e.to_string())?;
    let frontier = check_frontier(&s);
    let codim_one = check_no_codim_one(&s);
    let elapsed = t.elapsed();
    ensure(s.grid_spec.points_per_axis == 21, format!("{} points per axis", s.grid_spec.points_per_axis))?;
    let classes: Vec<usize> = s.codim_classes().into_iter().collect();
    ensure(classes == vec![2, 3], format!("codim classes {classes:?}"))?;
    let axis: Vec<_> = s.strata.iter().filter(|st| st.leaf_codim == 3).collect();
    ensure(axis.len() == 1 && axis[0].estimated_dim == 1, "axis component")?;
    for w in &axis[0].witness_points {
        let d = stratum_dimension(&a, &w.point).map_err(|e| e.to_string())?;
        ensure(d == axis[0].estimated_dim, format!("witness {:?} has stratum dimension {d}", w.point))?;
    }
    ensure(frontier.pass, format!("frontier violations {:?}", frontier.violations))?;
    ensure(codim_one.pass, "codimension-one stratum")?;
    within(elapsed, 5.0)?;
    Ok(format!("codims {classes:?}, {} axis witnesses, {:.2}s", axis[0].witness_count, elapsed.as_secs_f64()))
}

fn desingularization() -> Outcome {
    let t = Instant::now();
    let cases = [("Z2 on R", reflection_line(), 0, 0), ("S1 on R3", circle_about_z(), 1, 1), ("SO3 on R3", so3(), 1, 2), ("T2 on R4", torus_r4(), 2, 2)];
    let mut summary = Vec::new();
    for (name, spec, stages, dim) in cases {
        let grid = if spec.ambient_dim >= 4 { 8 } else { 16 };
        let opts = DesingularizeOptions { grid, regularity_samples: 10_000, ..Default::default() };
        let r = desingularize(&build(&spec), &opts).map_err(|e| format!("{name}: {e}"))?;
        ensure(r.stage_count() == stages, format!("{name}: {} stages", r.stage_count()))?;
        ensure(r.final_check.samples == 10_000, format!("{name}: {} samples", r.final_check.samples))?;
        ensure(r.orbit_dim() == Some(dim), format!("{name}: orbit dims {:?}", r.final_check.histogram))?;
        summary.push(format!("{name} {stages}/{dim}"));
    }
    within(t.elapsed(), 60.0)?;
    Ok(format!("{}, {:.2}s", summary.join(", "), t.elapsed().as_secs_f64()))
}

fn exceptional_leaves() -> Outcome {
    let opts = DesingularizeOptions { grid: 8, regularity_samples: 1000, ..Default::default() };
    let mut summary = Vec::new();
    for (name, spec) in [("S1 on R3", circle_about_z()), ("SO3 on R3", so3()), ("T2 on R4", torus_r4()), ("weighted S1 on R4", weighted_circle_r4())] {
        let r = desingularize(&build(&spec), &opts).map_err(|e| format!("{name}: {e}"))?;
        let rep = exceptional_leaf_check(r.manifold(), 500, 7, 1e-9).map_err(|e| format!("{name}: {e}"))?;
        ensure(rep.samples > 0, format!("{name}: no samples"))?;
        ensure(rep.pass && rep.min_dim_gap >= 1, format!("{name}: {:?}", rep.failures))?;
        summary.push(format!("{name} gap {} defect {:.1e}", rep.min_dim_gap, rep.max_projection_defect));
    }
    Ok(summary.join(", "))
}

fn blowup_metrics() -> Outcome {
    let t = Instant::now();
    let disk = {
        let a = build(&circle_plane());
        let m = blow_up(&a, 1.0, BlowupCenter::new(0, DMatrix::zeros(2, 0)), 0.5).map_err(|e| e.to_string())?;
        base_blowup_metric(Arc::new(m), euclid(2)).map_err(|e| e.to_string())?
    };
    let len = exceptional_fiber_length(&disk, &[]).map_err(|e| e.to_string())?;
    ensure((len - PI).abs() < 1e-6, format!("fiber length {len}"))?;

    let a = build(&circle_about_z());
    let center = BlowupCenter::new(0, fixed_subspace(&a, None).map_err(|e| e.to_string())?);
    let m = blow_up(&a, 1.0, center, 0.5).map_err(|e| e.to_string())?;
    let axis = base_blowup_metric(Arc::new(m), euclid(3)).map_err(|e| e.to_string())?;
    let samples = strata::random_samples(&axis.space, 1000, 11);
    let sub = check_riemannian_submersion(&exceptional_submersion_samples(&axis, &samples).map_err(|e| e.to_string())?, 1e-9)
        .map_err(|e| e.to_string())?;
    ensure(sub.pass && sub.max_defect < 1e-9, format!("divisor submersion defect {:e}", sub.max_defect))?;

    let wide = strata::random_samples(&axis.space, 2000, 12);
    let (iso, excluded) = check_isometry_outside(&axis.space, &axis, axis.base.as_ref(), axis.rho, &wide).map_err(|e| e.to_string())?;
    ensure(iso.pass && iso.max_defect == 0.0, format!("isometry defect {:e}", iso.max_defect))?;
    ensure(iso.samples >= 1000, format!("only {} outer samples", iso.samples))?;

    let c = axis.space.stages[0].charts[0];
    let inside = Sample { chart: c, point: vec![0.1, 0.2, 0.3], index: vec![] };
    let neg = check_riemannian_submersion(&blow_down_samples(&axis, &[inside]).map_err(|e| e.to_string())?, 1e-9).map_err(|e| e.to_string())?;
    ensure(!neg.pass, "negative control reported as a submersion")?;
    within(t.elapsed(), 10.0)?;
    Ok(format!(
        "length {len:.9}, divisor defect {:.1e}, isometry on {} outer samples ({excluded} inside), control defect {:.2}, {:.2}s",
        sub.max_defect,
        iso.samples,
        neg.max_defect,
        t.elapsed().as_secs_f64()
    ))
}

fn averaging() -> Outcome {
    let a = build(&circle_plane());
    ensure(a.group.haar_nodes.len() == 64, format!("{} nodes", a.group.haar_nodes.len()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<[f64; 2]> = (0..50).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();

    let c: Field = Arc::new(Constant(DMatrix::from_diagonal(&nalgebra::dvector![1.0, 4.0])));
    let avg = average_metric(&a, c, None);
    let mut mean_err = 0.0_f64;
    for x in &pts {
        mean_err = mean_err.max(linalg::max_abs(&(avg.eval(0, x).map_err(|e| e.to_string())? - DMatrix::identity(2, 2) * 1.6)));
    }
    ensure(mean_err < 1e-10, format!("constant average error {mean_err:e}"))?;

    let inv: Field = Arc::new(FnField::new(|x| DMatrix::identity(2, 2) * (1.0 + x[0] * x[0] + x[1] * x[1])));
    let avg = average_metric(&a, inv.clone(), None);
    let mut fixed_err = 0.0_f64;
    for x in &pts {
        fixed_err = fixed_err.max(linalg::max_abs(&(avg.eval(0, x).map_err(|e| e.to_string())? - inv.eval(0, x).map_err(|e| e.to_string())?)));
    }
    ensure(fixed_err < 1e-12, format!("fixed point error {fixed_err:e}"))?;

    let f: Field = Arc::new(FnField::new(|x| DMatrix::from_row_slice(2, 2, &[1.0 + x[1] * x[1], 0.3 * x[0], 0.3 * x[0], 2.0 + x[0].sin()])));
    let once: Field = Arc::new(average_metric(&a, f, None));
    let twice = average_metric(&a, once.clone(), None);
    let mut idem_err = 0.0_f64;
    for x in &pts {
        idem_err = idem_err.max(linalg::max_abs(&(twice.eval(0, x).map_err(|e| e.to_string())? - once.eval(0, x).map_err(|e| e.to_string())?)));
    }
    ensure(idem_err < 1e-10, format!("idempotence error {idem_err:e}"))?;
    Ok(format!("mean {mean_err:.1e}, fixed point {fixed_err:.1e}, idempotence {idem_err:.1e}"))
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> Field {
    let base: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let slope: Vec<f64> = (0..n * n * n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    Arc::new(FnField::new(move |x| {
        let l = DMatrix::from_fn(n, n, |i, j| base[i * n + j] + (0..n).map(|k| slope[(i * n + j) * n + k] * x[k]).sum::<f64>());
        &l * l.transpose() + DMatrix::identity(n, n) * 0.5
    }))
}

fn pullback() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let pts: Vec<Vec<f64>> = (0..1000).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();

    let eta = random_field(&mut rng, 2);
    let eta_p = random_field(&mut rng, 2);
    let id: FiberedMap = Arc::new(|m: &[f64]| (m.to_vec(), DMatrix::identity(2, 2)));
    let diag: FiberedParam = Arc::new(|q: &[f64]| {
        let mut jac = DMatrix::zeros(4, 2);
        for (r, c) in [(0, 0), (1, 1), (2, 0), (3, 1)] {
            jac[(r, c)] = 1.0;
        }
        (q.to_vec(), q.to_vec(), jac)
    });
    let pts2: Vec<Vec<f64>> = pts.iter().map(|p| p[..2].to_vec()).collect();
    let prod = pullback_fibered_metric(eta.clone(), eta_p.clone(), eta, id, diag, &pts2, 1e-9).map_err(|e| e.to_string())?;
    for q in &pts2 {
        ensure(prod.eval(0, q).map_err(|e| e.to_string())? == eta_p.eval(0, q).map_err(|e| e.to_string())?, format!("identity case differs at {q:?}"))?;
    }

    // point-dependent metric on R^2 whose dual has a (0,0) entry depending on m_0 only,
    // so that m -> m_0 is a Riemannian submersion onto (R, 1/s)
    let (al, be, ga, de) = (rng.gen_range(0.1..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0));
    let s = move |m0: f64| 1.0 + al * m0 * m0;
    let eta: Field = Arc::new(FnField::new(move |m| {
        let u = be * m[1] + ga * m[0];
        let dual = DMatrix::from_row_slice(2, 2, &[s(m[0]), u, u, u * u / s(m[0]) + 0.5 + de * m[1] * m[1]]);
        linalg::spd_inverse(&dual).unwrap()
    }));
    let eta_n: Field = Arc::new(FnField::new(move |n| DMatrix::from_element(1, 1, 1.0 / s(n[0]))));
    let eta_p = random_field(&mut rng, 2);
    let f: FiberedMap = Arc::new(|m: &[f64]| (vec![m[0]], DMatrix::from_row_slice(1, 2, &[1.0, 0.0])));
    let param: FiberedParam = Arc::new(|q: &[f64]| {
        let jac = DMatrix::from_row_slice(4, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        (vec![q[0], q[1]], vec![q[0], q[2]], jac)
    });
    let prod = pullback_fibered_metric(eta, eta_p, eta_n, f, param, &pts2, 1e-9).map_err(|e| e.to_string())?;
    for q in &pts {
        eval_metric(&prod, 0, q).map_err(|e| format!("{q:?}: {e}"))?;
    }
    let report = prod.check_p_prime(&pts, 1e-9).map_err(|e| e.to_string())?;
    ensure(report.pass, format!("p' defect {:e}", report.max_defect))?;
    Ok(format!("identity exact, SPD on {} samples, p' defect {:.1e}", pts.len(), report.max_defect))
}

fn nerve() -> Outcome {
    let a = build(&reflection_line());
    let space = Arc::new(BlownUpManifold::base(&a, 1.0));
    let samples = strata::random_samples(&space, 200, 1);
    let z2 = nerve_metric_check(space, euclid(1), 2, &samples, 0, 1e-12).map_err(|e| e.to_string())?;
    ensure(z2.pass && z2.max_defect == 0.0, format!("Z2 defect {:e}", z2.max_defect))?;

    let opts = DesingularizeOptions { grid: 16, regularity_samples: 2000, ..Default::default() };
    let r = desingularize(&build(&circle_plane()), &opts).map_err(|e| e.to_string())?;
    ensure(r.stage_count() == 1, format!("{} stages", r.stage_count()))?;
    let metric = base_blowup_metric(Arc::new(r.manifold().clone()), euclid(2)).map_err(|e| e.to_string())?;
    let space = metric.space.clone();
    let samples = strata::random_samples(&space, 200, 3);
    let disk = nerve_metric_check(space, Arc::new(metric), 2, &samples, 0, 1e-6).map_err(|e| e.to_string())?;
    ensure(disk.pass && disk.max_defect < 1e-6, format!("disk defect {:e}", disk.max_defect))?;
    Ok(format!("Z2 defect {:e}, S1 on R2 defect {:.1e}", z2.max_defect, disk.max_defect))
}

fn quotients() -> Outcome {
    let t = Instant::now();
    let a = build(&circle_plane());
    let opts = SamplingOptions { samples: 200, anchors: vec![vec![0.2, 0.0], vec![0.7, 0.0]], ..Default::default() };
    let x = sample_orbit_space(&a, &Euclidean(2), &opts).map_err(|e| e.to_string())?;
    let d = x.d(0, 1);
    ensure((d - 0.5).abs() <= 0.02, format!("d_X = {d}"))?;

    let one = FiniteMetricSpace::from_distances(vec![vec![0.0]]);
    let two = FiniteMetricSpace::from_distances(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    let gh = gh_distance(&one, &two, GhMode::Exact, None).map_err(|e| e.to_string())?;
    ensure(gh.lower == 0.5 && gh.upper == 0.5, format!("calibration [{}, {}]", gh.lower, gh.upper))?;

    let copts = CompareOptions { sampling: SamplingOptions { samples: 200, ..Default::default() }, ..Default::default() };
    let cmp = compare_quotients(&a, euclid(2), &[0.2, 0.1, 0.05], &copts).map_err(|e| e.to_string())?;
    let uppers: Vec<f64> = cmp.rows.iter().map(|r| r.gh_upper).collect();
    ensure(cmp.pass && cmp.monotone, format!("compare uppers {uppers:?}"))?;
    within(t.elapsed(), 120.0)?;
    Ok(format!("d_X {d:.4}, calibration 0.5, uppers {uppers:?}, {:.2}s", t.elapsed().as_secs_f64()))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let actions = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/actions");
    let s1r3 = actions.join("s1_r3.json");
    let s1r2 = actions.join("s1_r2.json");
    let mut runs = Vec::new();
    for threads in ["1", "4", "1"] {
        let out = dir.path().join(format!("t{threads}-{}", runs.len()));
        std::fs::create_dir(&out).map_err(|e| e.to_string())?;
        let p = |name: &str| out.join(name).to_string_lossy().into_owned();
        let a3 = s1r3.to_string_lossy().into_owned();
        let a2 = s1r2.to_string_lossy().into_owned();
        let steps: Vec<Vec<String>> = vec![
            vec!["stratify".into(), "--action".into(), a3.clone(), "--grid".into(), "12".into(), "--out".into(), p("strata.json")],
            vec!["desingularize".into(), "--action".into(), a3.clone(), "--grid".into(), "12".into(), "--samples".into(), "2000".into(), "--out".into(), p("desing.json")],
            vec!["metric-check".into(), "--action".into(), a3, "--grid".into(), "8".into(), "--kind".into(), "nerve".into(), "--samples".into(), "100".into(), "--out".into(), p("nerve.json")],
            vec!["quotient".into(), "--action".into(), a2.clone(), "--samples".into(), "80".into(), "--seed".into(), "3".into(), "--out".into(), p("x.csv")],
            vec!["gh".into(), "--a".into(), p("x.csv"), "--b".into(), p("x.csv"), "--mode".into(), "bounds".into(), "--out".into(), p("gh.json")],
            vec!["compare".into(), "--action".into(), a2, "--eps".into(), "0.2,0.1".into(), "--samples".into(), "60".into(), "--out".into(), p("compare.json")],
        ];
        for args in &steps {
            let status = Command::new(env!("CARGO_BIN_EXE_desing"))
                .args(args)
                .env("DESING_THREADS", threads)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.success(), format!("{} failed: {}", args[0], String::from_utf8_lossy(&status.stderr)))?;
        }
        let mut files = Vec::new();
        for name in ["strata.json", "desing.json", "nerve.json", "x.csv", "gh.json", "compare.json"] {
            files.push((name, std::fs::read(out.join(name)).map_err(|e| e.to_string())?));
        }
        runs.push(files);
    }
    for run in &runs[1..] {
        for ((name, a), (_, b)) in runs[0].iter().zip(run) {
            ensure(a == b, format!("{name} differs between runs"))?;
        }
    }
    Ok(format!("{} artifacts identical over threads 1, 4, 1", runs[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("stratification", stratification),
        ("desingularization", desingularization),
        ("exceptional leaves", exceptional_leaves),
        ("blow-up metric", blowup_metrics),
        ("averaging", averaging),
        ("pull-back metric", pullback),
        ("nerve", nerve),
        ("quotient and GH", quotients),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail}) [{secs:.2}s]", i + 1),
            Err(why) => {
                println!("criterion {}: FAIL {name} ({why}) [{secs:.2}s]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria {failed:?}");
        std::process::exit(1);
    }
}
