//! Acceptance criteria. Each check prints one PASS/FAIL line with its
//! measurements and wall time; the test fails if any check fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regrade::gridmap::{compute_metrics, diff_to_design, load_heightmap, save_heightmap, HeightMap, MapFormat, MetricSpec};
use regrade::kinem::{
    generate_primitives, plan_path, straight_ascent, trajectory_ascent, PlannerConfig, PrimitiveSet, DEFAULT_ARC_LENGTH,
    DEFAULT_HEADINGS, DEFAULT_MIN_RADIUS,
};
use regrade::lp::{self, verify_bruteforce};
use regrade::nodes::{angle_diff, assign_headings, decimate_sources, extract_nodes, Node, NodeSet};
use regrade::sim::{crater_heights, make_crater_site, run_episode, Crater, SimConfig};
use regrade::transport::{
    assemble_bigm_milp, assemble_case_lp, distance_matrix, select_case, solve_transport, CaseKind, SolverChoice,
    TransportOptions, TransportPlan,
};
use regrade::triplets::Pose;

const TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> NodeSet {
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(1..=max_m);
    let mut node = |source: bool| {
        let (x, y) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let v = rng.gen_range(0.1..1.0);
        if source {
            Node::source(x, y, v)
        } else {
            Node::sink(x, y, v)
        }
    };
    let sources = (0..n).map(|_| node(true)).collect();
    let sinks = (0..m).map(|_| node(false)).collect();
    NodeSet::new(sources, sinks)
}

fn dense() -> TransportOptions {
    TransportOptions {
        solver: SolverChoice::Dense,
        ..TransportOptions::default()
    }
}

fn worked_instance() -> NodeSet {
    NodeSet::new(
        vec![Node::source(-1.0, -0.5, 0.2), Node::source(0.5, -1.0, 0.6)],
        vec![Node::sink(-2.0, 1.0, 0.3), Node::sink(2.0, 1.0, 0.4)],
    )
}

fn pi_at(plan: &TransportPlan, i: usize, j: usize) -> f64 {
    plan.matrix()[i * plan.m + j]
}

fn worked_example() -> Outcome {
    let set = worked_instance();
    let start = Instant::now();
    let plan = solve_transport(&set, &TransportOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let d = distance_matrix(&set);
    let lp = assemble_case_lp(&set, &d, &select_case(&set)).unwrap();
    let oracle = verify_bruteforce(&lp, 0).unwrap();
    let excess = set.source_volume() - plan.moved_volume();
    let checks = [
        plan.case.kind == CaseKind::SourceExcess,
        (pi_at(&plan, 0, 0) - 0.2).abs() < TOL,
        (pi_at(&plan, 1, 0) - 0.1).abs() < TOL,
        (pi_at(&plan, 1, 1) - 0.4).abs() < TOL,
        pi_at(&plan, 0, 1).abs() < TOL,
        (excess - 0.1).abs() < TOL,
        (plan.objective - oracle.objective).abs() < 1e-6,
        (plan.objective - 1.680712).abs() < 1e-6,
        elapsed < Duration::from_millis(10),
    ];
    outcome(
        checks.iter().all(|&c| c),
        format!(
            "case {:?}, Π = {:?}, excess {excess:.3}, objective {:.7} (oracle {:.7}), solve {:.3} ms",
            plan.case.kind,
            plan.matrix(),
            plan.objective,
            oracle.objective,
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let set = random_instance(&mut rng, 3, 3);
        let d = distance_matrix(&set);
        let lp = assemble_case_lp(&set, &d, &select_case(&set)).unwrap();
        let sol = lp::solve(&lp, lp::DEFAULT_TOL).unwrap();
        let oracle = verify_bruteforce(&lp, 0).unwrap();
        worst = worst.max((sol.objective - oracle.objective).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && elapsed < Duration::from_secs(30),
        format!("200 instances, max |simplex − oracle| = {worst:.2e}"),
    )
}

fn three_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let set = random_instance(&mut rng, 4, 4);
        let d = distance_matrix(&set);
        let case_lp = solve_transport(
            &set,
            &TransportOptions {
                solver: SolverChoice::Network,
                ..TransportOptions::default()
            },
        )
        .unwrap()
        .objective;
        let (_, bigm) = assemble_bigm_milp(&set, &d)
            .unwrap()
            .solve_exhaustive(lp::DEFAULT_TOL)
            .unwrap()
            .expect("one branch is feasible");
        let standard = lp::solve(&assemble_case_lp(&set, &d, &select_case(&set)).unwrap(), lp::DEFAULT_TOL)
            .unwrap()
            .objective;
        worst = worst
            .max((case_lp - bigm.objective).abs())
            .max((case_lp - standard).abs())
            .max((bigm.objective - standard).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && elapsed < Duration::from_secs(60),
        format!("50 instances, max pairwise gap {worst:.2e}"),
    )
}

fn conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_eq: f64 = 0.0;
    let mut worst_ineq: f64 = 0.0;
    let mut min_pi = f64::INFINITY;
    let mut cases = [0usize; 2];
    for k in 0..500 {
        let (max_n, max_m) = if k % 2 == 0 { (3, 3) } else { (4, 4) };
        let set = random_instance(&mut rng, max_n, max_m);
        for options in [dense(), TransportOptions { solver: SolverChoice::Network, ..dense() }] {
            let plan = solve_transport(&set, &options).unwrap();
            let pi = plan.matrix();
            let (n, m) = (plan.n, plan.m);
            let rows: Vec<f64> = (0..n).map(|i| pi[i * m..(i + 1) * m].iter().sum()).collect();
            let cols: Vec<f64> = (0..m).map(|j| (0..n).map(|i| pi[i * m + j]).sum()).collect();
            let (exact, bounded, exact_v, bounded_v) = match plan.case.kind {
                CaseKind::SinkExcess => (&rows, &cols, set.source_volumes(), set.sink_volumes()),
                CaseKind::SourceExcess => (&cols, &rows, set.sink_volumes(), set.source_volumes()),
            };
            cases[usize::from(plan.case.kind == CaseKind::SourceExcess)] += 1;
            for (s, v) in exact.iter().zip(&exact_v) {
                worst_eq = worst_eq.max((s - v).abs());
            }
            for (s, v) in bounded.iter().zip(&bounded_v) {
                worst_ineq = worst_ineq.max(s - v);
            }
            min_pi = pi.iter().copied().fold(min_pi, f64::min);
        }
    }
    outcome(
        worst_eq <= 1e-9 && worst_ineq <= 1e-9 && min_pi >= -1e-12 && cases[0] > 0 && cases[1] > 0,
        format!(
            "500 instances × 2 solvers ({} case1, {} case2): max equality residual {worst_eq:.1e}, max bound excess {worst_ineq:.1e}, min Π {min_pi:.1e}",
            cases[0], cases[1]
        ),
    )
}

fn runtime_scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut nodes = |source: bool| -> Vec<Node> {
        (0..1000)
            .map(|_| {
                let (x, y, v) = (rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0), rng.gen_range(0.1..1.0));
                if source {
                    Node::source(x, y, v)
                } else {
                    Node::sink(x, y, v)
                }
            })
            .collect()
    };
    let set = NodeSet::new(nodes(true), nodes(false));
    let start = Instant::now();
    let plan = solve_transport(&set, &TransportOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let target = set.source_volume().min(set.sink_volume());
    let moved_ok = (plan.moved_volume() - target).abs() <= 1e-6 * target;
    outcome(
        elapsed < Duration::from_secs(120) && moved_ok,
        format!(
            "1000×1000 solved in {:.3} s, {} moves, objective {:.4}",
            elapsed.as_secs_f64(),
            plan.moves.len(),
            plan.objective
        ),
    )
}

fn closed_loop() -> Outcome {
    let config = SimConfig::default();
    assert_eq!(config.triplet_budget, 40);
    let crater = Crater { cx: 2.5, cy: 2.5, diameter: 1.0 };
    let start = Instant::now();
    let site = make_crater_site(5.0, 5.0, 0.05, &[crater], 1, &config).unwrap();
    let min = site.truth.heights().fold(f64::INFINITY, f64::min);
    let (r, _) = run_episode(site, &config, &MetricSpec::default()).unwrap();
    let elapsed = start.elapsed();
    outcome(
        r.area_oos_reduction >= 0.6
            && r.after.smoothness < r.before.smoothness
            && r.after.grade.abs() <= 1.0
            && (min + 0.2).abs() < 0.01
            && elapsed < Duration::from_secs(300),
        format!(
            "seed 1: area out-of-spec {:.3} → {:.3} m² ({:.1} % reduction), smoothness {:.4} → {:.4} m, grade {:.4}°, {} triplets",
            r.before.area_oos,
            r.after.area_oos,
            100.0 * r.area_oos_reduction,
            r.before.smoothness,
            r.after.smoothness,
            r.after.grade,
            r.triplets_executed
        ),
    )
}

fn metric_identities() -> Outcome {
    let n = 40;
    let res = 0.05;
    let grid = |f: &dyn Fn(f64, f64) -> f64| {
        let heights = (0..n * n).map(|i| f((i % n) as f64 * res, (i / n) as f64 * res)).collect();
        HeightMap::from_heights(n, n, res, (0.0, 0.0), heights).unwrap()
    };
    let flat = compute_metrics(&grid(&|_, _| 0.3), 1.0, 0.01, 5).unwrap();
    let flat_ok = flat.grade == 0.0 && flat.smoothness == 0.0 && flat.area_oos == 0.0;

    let t = 1f64.to_radians().tan();
    let (dx, dy) = (t * 0.6, t * 0.8);
    let ramp = compute_metrics(&grid(&|x, y| dx * x + dy * y), 2.0, 0.01, 5).unwrap();
    let ramp_err = (ramp.grade - 1.0).abs();

    let bumps = |x: f64, y: f64| 0.01 * (7.0 * x).sin() * (5.0 * y).cos();
    let base = compute_metrics(&grid(&bumps), 1.0, 0.01, 5).unwrap();
    let tilted = compute_metrics(&grid(&|x, y| bumps(x, y) + 0.3 * x - 0.2 * y + 1.5), 1.0, 0.01, 5).unwrap();
    let smooth_err = (base.smoothness - tilted.smoothness).abs();
    outcome(
        flat_ok && ramp_err <= 1e-6 && smooth_err <= 1e-9,
        format!("flat {flat:?}; ramp grade error {ramp_err:.1e}°; smoothness change under added plane {smooth_err:.1e} m"),
    )
}

fn mass_conservation() -> Outcome {
    let config = SimConfig {
        triplet_budget: 20,
        ..SimConfig::default()
    };
    let layouts: [(f64, f64, Vec<Crater>); 3] = [
        (5.0, 5.0, vec![Crater { cx: 2.5, cy: 2.5, diameter: 1.0 }]),
        (
            7.0,
            4.0,
            vec![Crater { cx: 2.0, cy: 2.0, diameter: 0.8 }, Crater { cx: 5.0, cy: 2.0, diameter: 1.0 }],
        ),
        (5.0, 5.0, vec![Crater { cx: 2.0, cy: 3.0, diameter: 0.6 }]),
    ];
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for (k, (w, h, craters)) in layouts.iter().enumerate() {
        for seed in 0..2 {
            let site = make_crater_site(*w, *h, 0.05, craters, 10 * k as u64 + seed, &config).unwrap();
            let (r, end) = run_episode(site, &config, &MetricSpec::default()).unwrap();
            assert_eq!(end.robot.carried, 0.0);
            worst = worst.max((r.volume_end - r.volume_start).abs() / r.material_scale);
            runs += 1;
        }
    }
    outcome(
        worst <= 1e-6,
        format!("{runs} episodes, max |ΔV| / Σ|h|·A = {worst:.1e}"),
    )
}

fn primitives() -> PrimitiveSet {
    generate_primitives(
        &[DEFAULT_MIN_RADIUS, 2.0 * DEFAULT_MIN_RADIUS, f64::INFINITY],
        DEFAULT_ARC_LENGTH,
        DEFAULT_HEADINGS,
        DEFAULT_MIN_RADIUS,
    )
    .unwrap()
}

fn kinematic_planner() -> Outcome {
    let prims = primitives();
    let config = PlannerConfig::default();
    let flat = HeightMap::flat(100, 100, 0.05, (0.025, 0.025), 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut misses = 0;
    let pose = |rng: &mut ChaCha8Rng| Pose {
        x: rng.gen_range(0.5..4.5),
        y: rng.gen_range(0.5..4.5),
        heading: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    };
    for _ in 0..100 {
        let (start, goal) = (pose(&mut rng), pose(&mut rng));
        match plan_path(&flat, &prims, &start, &goal, &config) {
            Ok(t) => {
                let end = t.waypoints.last().unwrap();
                let ok = (end.x - goal.x).hypot(end.y - goal.y) <= config.pos_threshold
                    && angle_diff(end.heading, goal.heading) <= config.heading_threshold;
                misses += usize::from(!ok);
            }
            Err(_) => misses += 1,
        }
    }

    let crater = crater_heights(5.0, 5.0, 0.05, &[Crater { cx: 2.5, cy: 2.5, diameter: 1.0 }]).unwrap();
    let steep = PlannerConfig {
        w_topo: 1000.0,
        ..PlannerConfig::default()
    };
    let (mut feasible, mut better) = (0, 0);
    for _ in 0..40 {
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        let b = a + std::f64::consts::PI + rng.gen_range(-0.3..0.3);
        let start = Pose {
            x: 2.5 + 1.9 * a.cos(),
            y: 2.5 + 1.9 * a.sin(),
            heading: b,
        };
        let goal = Pose {
            x: 2.5 + 1.9 * b.cos(),
            y: 2.5 + 1.9 * b.sin(),
            heading: b + rng.gen_range(-1.0..1.0),
        };
        if let Ok(t) = plan_path(&crater, &prims, &start, &goal, &steep) {
            feasible += 1;
            let straight = straight_ascent(&crater, (start.x, start.y), (goal.x, goal.y));
            better += usize::from(trajectory_ascent(&crater, &t) < straight);
        }
    }
    let rate = better as f64 / feasible.max(1) as f64;
    outcome(
        misses == 0 && feasible > 0 && rate >= 0.95,
        format!("flat: {misses}/100 terminal misses; crater: {better}/{feasible} feasible plans climb less than the straight line"),
    )
}

/// 8-bit grayscale "landing site": craters of several sizes on a gentle
/// swell, with seeded sensor noise, quantized to 256 levels.
fn landing_site_pgm(path: &std::path::Path) -> f64 {
    let craters = [
        Crater { cx: 1.6, cy: 1.7, diameter: 0.9 },
        Crater { cx: 4.6, cy: 1.4, diameter: 0.6 },
        Crater { cx: 3.2, cy: 4.4, diameter: 1.2 },
        Crater { cx: 5.3, cy: 5.2, diameter: 0.5 },
        Crater { cx: 1.2, cy: 5.3, diameter: 0.4 },
    ];
    let base = crater_heights(6.4, 6.4, 0.05, &craters).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let raw: Vec<f64> = (0..base.len())
        .map(|i| {
            let (x, y) = base.center(i);
            base.cells()[i].height + 0.02 * (0.9 * x).sin() * (0.7 * y).cos() + rng.gen_range(-0.002..0.002)
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = (hi - lo) / 255.0;
    let pixels: Vec<f64> = raw.iter().map(|h| ((h - lo) / scale).round() * scale).collect();
    let img = HeightMap::from_heights(base.width(), base.height(), 0.05, base.origin(), pixels).unwrap();
    save_heightmap(&img, path, MapFormat::Pgm, scale).unwrap();
    scale
}

fn landing_site() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("site.pgm");
    let scale = landing_site_pgm(&path);
    let live = load_heightmap(&path, MapFormat::Pgm, scale, Some(0.05)).unwrap();
    let mean = live.heights().sum::<f64>() / live.len() as f64;
    let design = HeightMap::flat(live.width(), live.height(), 0.05, live.origin(), mean).unwrap();
    let diff = diff_to_design(&live, &design).unwrap().coarsen(5);
    let mut nodes = extract_nodes(&diff, 0.01);
    assign_headings(&mut nodes, &diff);
    let nodes = decimate_sources(&nodes, 0.5, 15f64.to_radians());
    let plan = solve_transport(&nodes, &TransportOptions::default()).unwrap();
    let at = |p: (f64, f64)| diff.values[diff.locate(p.0, p.1).unwrap()].unwrap();
    let downhill = plan.moves.iter().filter(|mv| at(mv.from) > at(mv.to)).count();
    outcome(
        !plan.moves.is_empty() && downhill == plan.moves.len(),
        format!(
            "{}×{} PGM, {} sources, {} sinks: {downhill}/{} moves go from higher to lower diff",
            live.width(),
            live.height(),
            nodes.sources.len(),
            nodes.sinks.len(),
            plan.moves.len()
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("worked transport instance", worked_example),
        ("simplex vs vertex oracle", oracle_equivalence),
        ("three formulations agree", three_forms),
        ("case conservation", conservation),
        ("1000x1000 runtime", runtime_scaling),
        ("closed-loop grading", closed_loop),
        ("metric identities", metric_identities),
        ("simulator mass conservation", mass_conservation),
        ("kinematic planner", kinematic_planner),
        ("landing-site plan direction", landing_site),
    ];
    println!();
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {:>2} {name}: {} [{:.2} s]",
            k + 1,
            result.detail,
            start.elapsed().as_secs_f64()
        );
        if !result.pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
