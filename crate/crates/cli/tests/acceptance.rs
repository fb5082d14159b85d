//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use toruscover::analytic::{nu_asymptotic, nu_exact, solve_xi, solve_xi0};
use toruscover::bodies::{ball_overlap_volume, cube_overlap_volume, overlap_volume_mc};
use toruscover::coverage::{certify_coverage, certify_coverage_adaptive, AdaptiveLimits};
use toruscover::experiments::{
    pilot_grid, run_coverage_scan, run_multiplicity_profile, run_second_moment, threshold_gap, ExperimentConfig,
    ScanTable,
};
use toruscover::sampling::sample_ppp;
use toruscover::torus::build_probe_net;
use toruscover::{Body, PointSet, SeedSpec, Torus, VerdictStatus};

fn report(id: u32, pass: bool, elapsed: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id} {verdict} ({:.1} s): {detail}", elapsed.as_secs_f64());
}

#[test]
fn criterion_1_constants() {
    let mut best = Duration::MAX;
    let (mut xi, mut xi0) = (solve_xi(1e-12).unwrap(), solve_xi0(1e-12).unwrap());
    for _ in 0..20 {
        let start = Instant::now();
        xi = solve_xi(1e-12).unwrap();
        xi0 = solve_xi0(1e-12).unwrap();
        best = best.min(start.elapsed());
    }
    let gap = (xi0.value - (2.0 * xi.value - 1.0)).abs();
    let pass = (xi.value - 1.79556).abs() <= 5e-6
        && gap <= 1e-9
        && xi.residual.abs() <= 1e-12
        && xi0.residual.abs() <= 1e-12
        && best < Duration::from_millis(10);
    let detail = format!(
        "xi = {:.8}, xi0 = {:.8}, |xi0 - (2 xi - 1)| = {gap:.1e}, residuals {:.1e} / {:.1e}, solve time {:.3} ms",
        xi.value,
        xi0.value,
        xi.residual,
        xi0.residual,
        best.as_secs_f64() * 1e3
    );
    report(1, pass, best, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_2_ball_volumes() {
    let start = Instant::now();
    let pi = std::f64::consts::PI;
    let mut pass = (nu_exact(2).unwrap() - pi).abs() <= 1e-12 && (nu_exact(3).unwrap() - 4.0 * pi / 3.0).abs() <= 1e-12;
    let mut previous = f64::INFINITY;
    let mut ratios = Vec::new();
    for n in [10, 50, 100] {
        let ratio = nu_asymptotic(n).unwrap() / nu_exact(n).unwrap();
        pass &= (0.95..=1.05).contains(&ratio) && (ratio - 1.0).abs() < previous;
        previous = (ratio - 1.0).abs();
        ratios.push(format!("n={n}: {ratio:.6}"));
    }
    let detail = format!("nu_2 = pi, nu_3 = 4 pi / 3; asymptotic / exact {}", ratios.join(", "));
    report(2, pass, start.elapsed(), &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_3_overlap_oracles() {
    let start = Instant::now();
    let mut rng = SeedSpec::new(3, 0).stream(0);
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let n = 2 + (k % 7) as usize;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-0.6..0.6)).collect();
        let body = Body::cube(n, 1.0).unwrap();
        let mc = overlap_volume_mc(&body, &x, 1_000_000, 100 + k).unwrap();
        let z = z_score(cube_overlap_volume(1.0, &x), mc.estimate, mc.std_error);
        worst = worst.max(z);
    }
    let cube_worst = worst;
    let ball = Body::ball(4, 1.0).unwrap();
    for (k, d) in [0.0, 0.5, 1.0, 1.5].into_iter().enumerate() {
        let mut x = vec![0.0; 4];
        x[0] = d;
        let mc = overlap_volume_mc(&ball, &x, 1_000_000, 900 + k as u64).unwrap();
        worst = worst.max(z_score(ball_overlap_volume(4, 1.0, d).unwrap(), mc.estimate, mc.std_error));
    }
    let elapsed = start.elapsed();
    let pass = worst <= 4.0 && elapsed < Duration::from_secs(60);
    let detail = format!("max |z| cube {cube_worst:.2}, overall {worst:.2} (limit 4)");
    report(3, pass, elapsed, &detail);
    assert!(pass, "{detail}");
}

fn z_score(exact: f64, estimate: f64, se: f64) -> f64 {
    let diff = (exact - estimate).abs();
    if se > 0.0 {
        diff / se
    } else if diff <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[test]
fn criterion_4_lemma_ledger() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_toruscover"))
        .args(["verify-lemmas", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    let ledger = std::fs::read_to_string(dir.path().join("lemmas.txt")).unwrap_or_default();
    let rows: Vec<Vec<&str>> = ledger.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    let required = [
        "poisson_upper_tail",
        "poisson_lower_tail",
        "ball_symmetric_difference",
        "cube_small_overlap",
        "slab_markov_quarter",
        "slab_borell_tail",
        "cube_amgm_product",
        "cube_amgm_mean",
        "cube_amgm_floor",
    ];
    let present = required.iter().all(|name| rows.iter().any(|r| r[0] == *name));
    let failed: Vec<&str> = rows.iter().filter(|r| r[3] != "PASS").map(|r| r[0]).collect();
    let pass = out.status.code() == Some(0) && present && failed.is_empty();
    let detail = format!(
        "exit {:?}, {} ledger rows, failing: [{}]",
        out.status.code(),
        rows.len(),
        failed.join(", ")
    );
    report(4, pass, start.elapsed(), &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_5_fixed_point_law() {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::new(Body::cube(3, 1.0).unwrap(), Torus::cubic(3, 3.0).unwrap(), vec![5.0], 20_000);
    cfg.multiplicity_trials = 0;
    let r = run_multiplicity_profile(&cfg).unwrap();
    let elapsed = start.elapsed();
    let pass = r.total_variation <= 0.02 && r.density_z.abs() <= 3.0 && elapsed < Duration::from_secs(120);
    let detail = format!(
        "TV = {:.4} (limit 0.02), mean density {:.4} vs {:.4}, z = {:.2}",
        r.total_variation, r.mean_density, r.expected_density, r.density_z
    );
    report(5, pass, elapsed, &detail);
    assert!(pass, "{detail}");
}

fn covered_at(x: &PointSet, body: &Body, y: &[f64]) -> bool {
    let mut hit = false;
    x.for_each_near(y, body.max_half_extent(), |_, d| hit |= body.contains(d).unwrap());
    hit
}

/// Exact on the circle; a grid of spacing `h / 4` in the plane.
fn ground_truth_uncovered(x: &PointSet, body: &Body, h: f64) -> bool {
    let torus = x.torus();
    if torus.dim() == 1 {
        let side = torus.sides()[0];
        let e = body.half_extent(0);
        let mut starts: Vec<f64> = x.iter().map(|p| (p[0] - e).rem_euclid(side)).collect();
        if starts.is_empty() {
            return true;
        }
        starts.sort_by(f64::total_cmp);
        let mut reach = starts[0] + 2.0 * e;
        for &s in &starts[1..] {
            if s > reach {
                return true;
            }
            reach = reach.max(s + 2.0 * e);
        }
        return reach < starts[0] + side;
    }
    let counts: Vec<usize> = torus.sides().iter().map(|c| (4.0 * c / h).ceil() as usize).collect();
    let mut y = [0.0; 2];
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            y[0] = i as f64 * torus.sides()[0] / counts[0] as f64;
            y[1] = j as f64 * torus.sides()[1] / counts[1] as f64;
            if !covered_at(x, body, &y) {
                return true;
            }
        }
    }
    false
}

#[test]
fn criterion_6_coverage_soundness() {
    let start = Instant::now();
    let mut rng = SeedSpec::new(6, 0).stream(0);
    let (mut contradictions, mut undetermined, mut covered, mut uncovered) = (0, [0usize; 2], 0, 0);
    let instances = 200;
    for t in 0..instances as u64 {
        let dim = 1 + (t % 2) as usize;
        let body = match rng.random_range(0..3) {
            0 => Body::ball(dim, rng.random_range(0.3..1.0)).unwrap(),
            1 => Body::cube(dim, rng.random_range(0.5..1.5)).unwrap(),
            _ => Body::cross_polytope(dim, rng.random_range(0.4..1.0)).unwrap(),
        };
        let sides: Vec<f64> = (0..dim).map(|_| rng.random_range(2.2..4.0) * body.circumradius() + 0.1).collect();
        let torus = Torus::new(sides).unwrap();
        let rho = rng.random_range(0.5..2.5) * torus.volume().ln().max(1.0) / body.volume();
        let x = sample_ppp(&torus, rho, &SeedSpec::new(6, t)).unwrap().with_query_radius(body.max_half_extent());
        let h = ExperimentConfig::default_net_radius(&body);
        let net = build_probe_net(&torus, h, body.net_norm()).unwrap();
        let flat = certify_coverage(&x, &body, &net).unwrap();
        let cells = certify_coverage_adaptive(&x, &body, &AdaptiveLimits::new(1e-3 * body.circumradius())).unwrap();
        let truth = ground_truth_uncovered(&x, &body, h);
        for (k, v) in [&flat, &cells].into_iter().enumerate() {
            match v.status {
                VerdictStatus::Covered => {
                    covered += 1;
                    contradictions += truth as usize;
                }
                VerdictStatus::Uncovered => {
                    uncovered += 1;
                    let w = v.witness.as_ref().unwrap();
                    // The witness is checked exactly; the planar grid may miss thin gaps.
                    contradictions += (covered_at(&x, &body, w) || (dim == 1 && !truth)) as usize;
                }
                VerdictStatus::Undetermined => undetermined[k] += 1,
            }
        }
    }
    let rate = |u: usize| u as f64 / instances as f64;
    let pass = contradictions == 0 && rate(undetermined[0]) < 0.05 && rate(undetermined[1]) < 0.05;
    let detail = format!(
        "{instances} instances x 2 certifiers: {covered} covered, {uncovered} uncovered, {contradictions} contradicted; \
         undetermined rate net {:.3}, cells {:.3}",
        rate(undetermined[0]),
        rate(undetermined[1])
    );
    report(6, pass, start.elapsed(), &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_7_second_moment() {
    let start = Instant::now();
    let cfg = ExperimentConfig::new(Body::cube(3, 1.0).unwrap(), Torus::cubic(3, 6.0).unwrap(), vec![2.0], 5000);
    let r = run_second_moment(&cfg).unwrap();
    let elapsed = start.elapsed();
    let z_mean = (r.empirical_mean.value - r.expectation) / r.empirical_mean.std_error;
    let z_var = (r.empirical_variance.value - r.variance) / r.empirical_variance.std_error;
    let bound = r.variance / (r.expectation * r.expectation);
    let zero_ok = r.empirical_zero.value <= bound + 3.0 * r.empirical_zero.std_error;
    let pass = z_mean.abs() <= 3.0
        && z_var.abs() <= 3.0
        && zero_ok
        && r.partition_residual <= 1e-10
        && r.variance_identity_residual <= 1e-10
        && elapsed < Duration::from_secs(180);
    let detail = format!(
        "|P| = {}, E[B] = {:.4} (z {:.2}), Var[B] = {:.4} (z {:.2}), P[B=0] = {:.4} <= Var/E^2 = {:.4}, \
         partition residual {:.1e}",
        r.targets, r.expectation, z_mean, r.variance, z_var, r.empirical_zero.value, bound, r.partition_residual
    );
    report(7, pass, elapsed, &detail);
    assert!(pass, "{detail}");
}

const SCAN_SIDES: [(usize, f64); 4] = [(2, 4.0), (3, 3.0), (4, 3.0), (5, 3.0)];

fn threshold_scan(n: usize, side: f64, body: Body) -> ScanTable {
    let coarse: Vec<f64> = (1..=20).map(|k| 2.0 * k as f64).collect();
    let mut cfg = ExperimentConfig::new(body, Torus::cubic(n, side).unwrap(), coarse, 400);
    cfg.master_seed = 2024;
    cfg.multiplicity_trials = 0;
    cfg.intensities = pilot_grid(&cfg, 20, 10).unwrap();
    run_coverage_scan(&cfg).unwrap()
}

#[test]
fn criterion_8_threshold_scans() {
    let start = Instant::now();
    let mut pass = true;
    let mut lines = Vec::new();
    let mut at_five = Vec::new();
    for (n, side) in SCAN_SIDES {
        for kind in ["ball", "cube"] {
            let body = match kind {
                "ball" => Body::ball(n, 1.0).unwrap().with_unit_volume(),
                _ => Body::cube(n, 1.0).unwrap(),
            };
            let table = threshold_scan(n, side, body);
            let isotonic = table.rows.windows(2).all(|w| w[0].smoothed_fraction <= w[1].smoothed_fraction);
            let sized = table.rows.len() >= 8 && table.rows.iter().all(|r| r.trials >= 400);
            let ok = match (table.threshold, table.threshold_ci) {
                (Some(t), Some((lo, hi))) => {
                    lines.push(format!(
                        "n={n} {kind}: threshold {t:.3} [{lo:.3}, {hi:.3}] width {:.1}%, normalized {:.3}",
                        100.0 * (hi - lo) / t,
                        table.normalized_threshold.unwrap()
                    ));
                    table.bracketed && (hi - lo) <= 0.2 * t
                }
                _ => {
                    lines.push(format!("n={n} {kind}: no bracketed threshold"));
                    false
                }
            };
            pass &= ok && isotonic && sized;
            if n == 5 {
                at_five.push(table);
            }
        }
    }
    let elapsed = start.elapsed();
    if let Some(gap) = threshold_gap(&at_five[0], &at_five[1], 1000, &SeedSpec::new(2024, u64::MAX)) {
        lines.push(format!(
            "n=5 cube - ball threshold gap {:.3} [{:.3}, {:.3}] (informational)",
            gap.estimate, gap.ci.0, gap.ci.1
        ));
    }
    // Trials are independent tasks; budget is stated for 8 workers.
    let workers = rayon::current_num_threads();
    let projected = elapsed.as_secs_f64() * workers.min(8) as f64 / 8.0;
    pass &= projected < 480.0;
    for line in &lines {
        println!("  {line}");
    }
    let detail = format!(
        "8 scans x 10 intensities x 400 trials; wall {:.1} s on {workers} worker(s), {:.1} s projected on 8 (limit 480 s)",
        elapsed.as_secs_f64(),
        projected
    );
    report(8, pass, elapsed, &detail);
    assert!(pass, "{detail}\n{}", lines.join("\n"));
}

fn run_cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_toruscover")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn same_outputs(a: &Path, b: &Path) -> Result<usize, String> {
    let manifest = |p: &Path| -> serde_json::Value {
        let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("manifest.json")).unwrap()).unwrap();
        let obj = m.as_object_mut().unwrap();
        obj.remove("started_unix");
        obj.remove("finished_unix");
        m
    };
    let ma = manifest(a);
    if ma != manifest(b) {
        return Err(format!("manifests differ: {} vs {}", a.display(), b.display()));
    }
    let files = ma["outputs"].as_array().unwrap();
    for f in files {
        let name = f.as_str().unwrap();
        if std::fs::read(a.join(name)).unwrap() != std::fs::read(b.join(name)).unwrap() {
            return Err(format!("{name} differs"));
        }
    }
    Ok(files.len())
}

#[test]
fn criterion_9_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let runs: [(&str, Vec<&str>); 7] = [
        ("scan", vec!["--trials", "60", "--intensities", "[1, 30]", "--pilot_trials", "10", "--multiplicity_trials", "5"]),
        ("scan", vec!["--trials", "40", "--intensities", "[2, 4, 6]", "--coupling", "independent"]),
        ("multiplicity", vec!["--body", "cube", "--dim", "3", "--torus_side", "3", "--intensity", "5", "--trials", "500"]),
        ("second-moment", vec!["--body", "cube", "--dim", "3", "--torus_side", "6", "--intensity", "3", "--trials", "300"]),
        ("e123", vec!["--dim", "3", "--torus_side", "4.5", "--intensities", "[4, 8]", "--trials", "20"]),
        ("sample", vec!["--intensity", "3", "--trial", "4"]),
        ("verify-lemmas", vec!["--mc_samples", "100000"]),
    ];
    let mut failures = Vec::new();
    let mut compared = 0;
    for (k, (sub, extra)) in runs.iter().enumerate() {
        let first = dir.path().join(format!("{k}-a"));
        let second = dir.path().join(format!("{k}-b"));
        let mut args = vec![*sub, "--threads", "1", "--out", first.to_str().unwrap()];
        args.extend(extra.iter().copied());
        run_cli(&args);
        let manifest = first.join("manifest.json");
        run_cli(&[sub, "--threads", "3", "--manifest", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
        match same_outputs(&first, &second) {
            Ok(files) => compared += files,
            Err(e) => failures.push(format!("{sub}: {e}")),
        }
    }
    let pass = failures.is_empty();
    let detail = format!(
        "{} runs re-executed from their manifests with 3 threads instead of 1: {compared} output files byte-identical{}",
        runs.len(),
        if pass { String::new() } else { format!("; {}", failures.join("; ")) }
    );
    report(9, pass, start.elapsed(), &detail);
    assert!(pass, "{detail}");
}
