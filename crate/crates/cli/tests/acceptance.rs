//! Acceptance run: one PASS/FAIL line per criterion.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use hcut::alpha::{bad_mass_decay, AlphaSampler};
use hcut::cayley::{generate_ball, sub_ball_indices};
use hcut::collapse::{
    center_collapse, half_space_family, horizontal_control, moving_char_check, scale_comparison, slices_near,
    CollapseOptions, ScaleOptions,
};
use hcut::cuts::{coarea_check, cut_measure_from_map, cut_metric, total_variation_identity, Cut, CutMeasure};
use hcut::distortion::{
    enforce_nested_monotonicity, min_distortion_colgen, min_distortion_exact, ColgenOptions, DistortionResult,
};
use hcut::levels::{slice_function, TestFunction};
use hcut::metric::{graph_metric, named_graph};
use hcut::perimeter::half_space_ratio;
use hcut::{CayleySpec, DistanceMatrix, FiniteMetricSpace, GridGeometry, GridSet, GroupElement, HalfSpace, L1Map};

/// `∫₀¹ √(1 − u⁴) du`, 30-digit quadrature.
const A1: f64 = 0.874_019_184_764_04;
/// `c₁(L¹, K_{2,3})`.
const K23_DISTORTION: f64 = 4.0 / 3.0;
/// Column-generation iteration budgets for `W_1 … W_4`.
const CAYLEY_BUDGETS: [usize; 4] = [50, 50, 25, 4];

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);
type Experiment = (&'static str, Value, Vec<(&'static str, &'static str)>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("cut-metric exactness", Duration::from_secs(5), cut_metric_exactness),
        ("moving characteristic function", Duration::from_secs(1), moving_characteristic),
        ("discrete coarea and total variation", Duration::from_secs(10), coarea_and_total_variation),
        ("distortion solver", Duration::from_secs(120), distortion_solver),
        ("Cayley balls", Duration::from_secs(600), cayley_balls),
        ("half-space perimeter bound", Duration::from_secs(300), half_space_perimeter),
        ("bad-mass decay", Duration::from_secs(600), bad_mass),
        ("center collapse", Duration::from_secs(300), center_collapse_rates),
        ("scale comparison", Duration::from_secs(1200), scale_comparison_decay),
        ("determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed <= limit {
                Ok(detail)
            } else {
                Err(format!("{detail}; runtime {elapsed:.1?} exceeds {limit:?}"))
            }
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({elapsed:.2?}) {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({elapsed:.2?}) {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn brute_l1(f: &L1Map, i: usize, k: usize) -> f64 {
    (0..f.num_coords()).map(|j| f.target_weights[j] * (f.value(i, j) - f.value(k, j)).abs()).sum()
}

fn cut_metric_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut metric_err, mut mass_err) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.gen_range(2..=20);
        let m = rng.gen_range(1..=8);
        let values = (0..n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pw = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let tw = (0..m).map(|_| rng.gen_range(0.5..2.0)).collect();
        let f = L1Map::new(values, pw, tw).map_err(|e| e.to_string())?;
        let sigma = cut_measure_from_map(&f).map_err(|e| e.to_string())?;
        let d = cut_metric(&sigma);
        for i in 0..n {
            for k in 0..n {
                metric_err = metric_err.max((d.get(i, k) - brute_l1(&f, i, k)).abs());
            }
        }
        let norm: f64 = (0..n)
            .map(|i| f.point_weights[i] * (0..m).map(|j| f.target_weights[j] * f.value(i, j).abs()).sum::<f64>())
            .sum();
        mass_err = mass_err.max((sigma.mass(&f.point_weights) - norm).abs());
    }
    ensure(metric_err <= 1e-12, || format!("metric error {metric_err:e}"))?;
    ensure(mass_err <= 1e-12, || format!("mass error {mass_err:e}"))?;
    Ok(format!("max metric error {metric_err:.1e}, max mass error {mass_err:.1e}"))
}

fn moving_characteristic() -> Outcome {
    let err = moving_char_check(100).map_err(|e| e.to_string())?;
    ensure(err < 1e-12, || format!("max error {err:e}"))?;
    Ok(format!("max error {err:.1e}"))
}

fn coarea_and_total_variation() -> Outcome {
    let g = GridGeometry::cube(1.0, [8, 8, 16]).map_err(|e| e.to_string())?;
    let lines = g.lines();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut coarea_err, mut tv_err) = (0.0f64, 0.0f64);
    for trial in 0..100 {
        let h: Vec<f64> = if trial % 2 == 0 {
            (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()
        } else {
            (0..g.len()).map(|_| rng.gen_range(0..6) as f64).collect()
        };
        let (lhs, rhs) = coarea_check(&h, &lines);
        coarea_err = coarea_err.max((lhs - rhs).abs());
        let f = L1Map::new(h, vec![1.0; g.len()], vec![rng.gen_range(0.5..2.0)]).map_err(|e| e.to_string())?;
        let (per, tv) = total_variation_identity(&f, &lines).map_err(|e| e.to_string())?;
        tv_err = tv_err.max((per - tv).abs());
    }
    ensure(coarea_err <= 1e-10, || format!("coarea error {coarea_err:e}"))?;
    ensure(tv_err <= 1e-10, || format!("total variation error {tv_err:e}"))?;
    Ok(format!("max coarea error {coarea_err:.1e}, max perimeter/variation error {tv_err:.1e}"))
}

fn space(d: DistanceMatrix) -> FiniteMetricSpace {
    FiniteMetricSpace::new(d).expect("valid metric")
}

fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> FiniteMetricSpace {
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    space(graph_metric(n, &edges).expect("tree is connected"))
}

/// Shortest-path closure of random edge lengths in `[1, 2]`.
fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> FiniteMetricSpace {
    let mut d = DistanceMatrix::from_fn(n, |_, _| 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            d.set(i, j, rng.gen_range(1.0..2.0));
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d.get(i, k) + d.get(k, j);
                if i != j && via < d.get(i, j) {
                    d.set(i, j, via);
                }
            }
        }
    }
    space(d)
}

/// Best ratio `max(d_Σ/d) / min(d_Σ/d)` of a cut measure, recomputed here.
fn embedding_distortion(space: &FiniteMetricSpace, sigma: &CutMeasure) -> f64 {
    let n = space.len();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let ds: f64 =
                sigma.atoms().iter().filter(|a| a.cut.contains(i) != a.cut.contains(j)).map(|a| a.weight).sum();
            let r = ds / space.dist.get(i, j);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    hi / lo
}

/// Lower bound from the cut inequality `Σ_same δ_E ≤ Σ_cross δ_E` on `K_{2,3}`,
/// checked over every cut.
fn k23_dual_bound(space: &FiniteMetricSpace) -> f64 {
    let side = |i: usize| i < 2;
    let n = space.len();
    let mut worst = 0.0f64;
    for mask in 1u64..(1 << (n - 1)) {
        let cut = Cut::from_mask(n, mask);
        let (mut same, mut cross) = (0.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if cut.contains(i) != cut.contains(j) {
                    if side(i) == side(j) {
                        same += 1.0;
                    } else {
                        cross += 1.0;
                    }
                }
            }
        }
        worst = worst.max(same / cross);
    }
    let (mut ds, mut dc) = (0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if side(i) == side(j) {
                ds += space.dist.get(i, j);
            } else {
                dc += space.dist.get(i, j);
            }
        }
    }
    ds / dc / worst
}

fn distortion_solver() -> Outcome {
    let one = |s: &FiniteMetricSpace, what: &str| -> Result<(), String> {
        let r = min_distortion_exact(s).map_err(|e| e.to_string())?;
        ensure((r.distortion - 1.0).abs() <= 1e-6, || format!("{what}: distortion {}", r.distortion))
    };
    for n in 2..=12 {
        one(&named_graph(&format!("path{n}")).map_err(|e| e.to_string())?, &format!("path{n}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for t in 0..20 {
        let n = rng.gen_range(2..=12);
        one(&random_tree(&mut rng, n), &format!("tree {t} (n = {n})"))?;
    }
    for n in 3..=8 {
        one(&named_graph(&format!("cycle{n}")).map_err(|e| e.to_string())?, &format!("cycle{n}"))?;
    }
    let mut worst = 0.0f64;
    for t in 0..100 {
        let n = rng.gen_range(3..=10);
        let s = random_metric(&mut rng, n);
        let exact = min_distortion_exact(&s).map_err(|e| e.to_string())?;
        let opts = ColgenOptions { seed: t, ..ColgenOptions::default() };
        let cg = min_distortion_colgen(&s, &opts).map_err(|e| e.to_string())?;
        worst = worst.max((exact.distortion - cg.distortion).abs());
    }
    ensure(worst <= 1e-6, || format!("colgen differs from enumeration by {worst:e}"))?;

    let k23 = named_graph("k23").map_err(|e| e.to_string())?;
    let lower = k23_dual_bound(&k23);
    let r = min_distortion_exact(&k23).map_err(|e| e.to_string())?;
    let upper = embedding_distortion(&k23, &r.witness);
    ensure((lower - K23_DISTORTION).abs() <= 1e-12, || format!("K23 dual bound {lower}"))?;
    ensure((upper - K23_DISTORTION).abs() <= 1e-6, || format!("K23 witness distortion {upper}"))?;
    ensure((r.distortion - K23_DISTORTION).abs() <= 1e-6, || format!("K23 distortion {}", r.distortion))?;
    Ok(format!("colgen vs exact {worst:.1e}; K23 {:.9} (certified {lower:.9}..{upper:.9})", r.distortion))
}

fn cayley_balls() -> Outcome {
    let spec = CayleySpec::standard(4);
    let w4 = generate_ball(&spec).map_err(|e| e.to_string())?;
    let spaces: Vec<FiniteMetricSpace> = (1..=4).map(|k| w4.restrict(&sub_ball_indices(&w4, k))).collect();
    ensure(spaces[0].len() == 5, || format!("|W_1| = {}", spaces[0].len()))?;
    let len = spec.word_length([0, 0, 1], 8);
    ensure(len == Some(4), || format!("word length of (0,0,1) = {len:?}"))?;
    for k in 1..=3u32 {
        let direct = generate_ball(&CayleySpec::standard(k)).map_err(|e| e.to_string())?;
        ensure(direct.dist.max_abs_diff(&spaces[k as usize - 1].dist) == 0.0, || format!("W_{k} is not a sub-ball"))?;
    }
    let mut results: Vec<DistortionResult> = Vec::new();
    for (s, budget) in spaces.iter().zip(CAYLEY_BUDGETS) {
        let opts = ColgenOptions { budget, ..ColgenOptions::default() };
        results.push(min_distortion_colgen(s, &opts).map_err(|e| e.to_string())?);
    }
    // W_k sits in W_{k+1} at the indices of its points.
    let index_sets: Vec<Vec<usize>> = (1..4).map(|k| sub_ball_indices(&spaces[k], k as u32)).collect();
    enforce_nested_monotonicity(&spaces, &index_sets, &mut results);
    let d: Vec<f64> = results.iter().map(|r| r.distortion).collect();
    ensure(d.windows(2).all(|w| w[1] >= w[0] - 1e-9), || format!("not nondecreasing: {d:?}"))?;
    let sizes: Vec<usize> = spaces.iter().map(|s| s.len()).collect();
    let status: Vec<String> = results.iter().map(|r| format!("{:?}", r.status)).collect();
    Ok(format!("sizes {sizes:?}, distortions {d:.6?}, {status:?}"))
}

/// `∫₀¹ √(1 − u⁴) du` by Simpson's rule after `u = 1 − t²`.
fn a1_quadrature() -> f64 {
    let f = |t: f64| {
        let u: f64 = 1.0 - t * t;
        2.0 * t * (1.0 - u.powi(4)).max(0.0).sqrt()
    };
    let n = 4000;
    let h = 1.0 / n as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn half_space_perimeter() -> Outcome {
    let a1 = a1_quadrature();
    ensure((a1 - A1).abs() < 1e-10, || format!("quadrature {a1} vs frozen {A1}"))?;
    let g = GridGeometry::default();
    let bases = [
        [0.1, -0.2, 0.05],
        [-0.3, 0.25, -0.1],
        [0.4, 0.1, 0.3],
        [-0.15, -0.35, -0.2],
        [0.0, 0.0, 0.0],
        [0.25, 0.3, -0.25],
        [-0.4, -0.05, 0.15],
        [0.2, -0.4, -0.3],
    ];
    let radii = [0.05, 0.1, 0.2, 0.4];
    let mut worst = 0.0f64;
    for k in 0..16 {
        let theta = std::f64::consts::TAU * k as f64 / 16.0 + 0.1;
        let oracle = (theta.cos().abs() + theta.sin().abs()) * A1 / (2.0 * std::f64::consts::PI.powi(2));
        for b in bases {
            let x = GroupElement::new(b[0], b[1], b[2]);
            let set = GridSet::from_membership(g.clone(), &HalfSpace::new(x, theta)).map_err(|e| e.to_string())?;
            for r in radii {
                let c = half_space_ratio(&set, x, r).map_err(|e| e.to_string())?;
                let rel = (c - oracle).abs() / oracle;
                ensure(rel <= 0.2, || format!("θ = {theta:.3}, x = {b:?}, r = {r}: c = {c}, oracle {oracle}"))?;
                worst = worst.max(rel);
            }
        }
    }
    Ok(format!("worst relative deviation {:.1}%", 100.0 * worst))
}

fn bad_mass() -> Outcome {
    let g = GridGeometry::default();
    let sigma = slice_function(&g, TestFunction::Parabolic, 16).map_err(|e| e.to_string())?;
    let radii = [0.4, 0.2, 0.1, 0.05];
    let rep =
        bad_mass_decay(&sigma.measure, 0.15, &radii, &radii, AlphaSampler::new(256)).map_err(|e| e.to_string())?;
    let m = &rep.bad_mass;
    ensure(rep.is_nonincreasing(0.0), || format!("bad mass not nonincreasing: {m:?}"))?;
    let ratio = m[3] / m[0];
    ensure(ratio < 0.25, || format!("final/initial = {ratio}"))?;
    Ok(format!("bad mass {m:.3?} of {:.3}, final/initial {ratio:.3}", rep.total_mass))
}

fn center_collapse_rates() -> Outcome {
    let g = GridGeometry::default();
    let x = GroupElement::new(0.1, -0.2, 0.05);
    let ts = [0.2, 0.1, 0.05, 0.025];
    let opts = CollapseOptions { offsets: 16, neighborhood: g.cell(), resolution_floor: g.cell()[2] };
    let slices = slice_function(&g, TestFunction::C, g.res[2] - 1).map_err(|e| e.to_string())?;
    let rep = center_collapse(&slices.measure, x, &ts, &opts).map_err(|e| e.to_string())?;
    let rho = &rep.ratios;
    ensure(rho.windows(2).all(|w| w[1] < w[0]), || format!("ratios not strictly decreasing: {rho:?}"))?;
    let slope = rep.slope.ok_or("no slope")?;
    ensure((0.35..=0.65).contains(&slope), || format!("slope {slope}"))?;

    let hs = half_space_family(64, 0.02, 1.5).map_err(|e| e.to_string())?;
    let center = center_collapse(&hs, x, &ts, &opts).map_err(|e| e.to_string())?;
    let horiz = horizontal_control(&hs, x, &ts, &opts).map_err(|e| e.to_string())?;
    ensure(center.ratios.iter().all(|r| *r == 0.0), || format!("half-space center ratios {:?}", center.ratios))?;
    let mut sorted = horiz.ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let median = 0.5 * (sorted[1] + sorted[2]);
    ensure(horiz.ratios.iter().all(|r| *r > 0.1 * median), || format!("horizontal ratios {:?}", horiz.ratios))?;
    Ok(format!("ratios {rho:.4?}, slope {slope:.3}; control horizontal {:.3?}", horiz.ratios))
}

fn scale_comparison_decay() -> Outcome {
    let bases = [
        GroupElement::new(0.1, -0.2, 0.05),
        GroupElement::new(-0.3, 0.25, -0.1),
        GroupElement::new(0.4, 0.1, 0.3),
        GroupElement::new(-0.15, -0.35, -0.2),
    ];
    let domain = ([-2.0; 3], [2.0; 3]);
    let radii = [0.4, 0.2, 0.1, 0.05];
    let mut factors = Vec::new();
    for x in bases {
        let rep = scale_comparison(
            |r| slices_near(TestFunction::Generic, x, r, 64, domain),
            x,
            &radii,
            &ScaleOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        for e in &rep.entries {
            ensure(e.skipped.is_none(), || format!("x = {x:?}, r = {}: skipped {:?}", e.r, e.skipped))?;
            ensure(e.triangle_holds(), || format!("x = {x:?}, r = {}: triangle fails {e:?}", e.r))?;
        }
        let f = rep.entries[0].discrepancy / rep.entries[3].discrepancy;
        ensure(f >= 2.0, || format!("x = {x:?}: D(0.4)/D(0.05) = {f}"))?;
        factors.push(f);
    }
    Ok(format!("D(0.4)/D(0.05) = {factors:.2?}"))
}

fn run_cli(config: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hcut"))
        .args(["run", "--config"])
        .arg(config)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("{}: {}", config.display(), String::from_utf8_lossy(&out.stderr)))
}

fn without_timestamp(bytes: &[u8]) -> Result<Value, String> {
    let mut v: Value = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    v.as_object_mut().ok_or("result is not an object")?.remove("timestamp").ok_or("no timestamp")?;
    Ok(v)
}

/// Small versions of every command.
fn experiment_configs() -> Vec<Experiment> {
    let small = json!([16, 16, 32]);
    vec![
        ("cayley-ball", json!({ "k": 2 }), vec![]),
        ("distortion", json!({ "graph": "k23", "method": "exact" }), vec![]),
        ("distortion", json!({ "method": "colgen", "budget": 50 }), vec![("space", "ball.json")]),
        ("slice", json!({ "n": 10, "m": 3 }), vec![]),
        ("coarea", json!({ "trials": 3 }), vec![]),
        ("tv-identity", json!({ "trials": 2 }), vec![]),
        ("perimeter", json!({ "res": small, "shape": "half_space", "angle": 0.3, "radii": [0.4, 0.2] }), vec![]),
        ("alpha", json!({ "x": [0.1, 0.0, 0.0], "radii": [0.2, 0.1] }), vec![("set", "set.hgrd")]),
        ("bad-mass", json!({ "res": small, "levels": 4, "samples": 32 }), vec![]),
        ("straighten", json!({ "levels": 8, "samples": 64 }), vec![]),
        ("collapse", json!({ "res": small }), vec![]),
        ("collapse", json!({ "res": small, "sigma": "half_spaces", "angles": 8, "spacing": 0.1 }), vec![]),
        ("scale-compare", json!({ "levels": 8, "pairs": 200, "samples": 64 }), vec![]),
        ("moving-char", json!({ "n": 20 }), vec![]),
    ]
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let shared = root.path().join("shared");
    let mut compared = 0;
    for (step, (command, params, inputs)) in experiment_configs().into_iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let dir = root.path().join(format!("{step}-{rep}"));
            let cfg = json!({
                "format_version": 1,
                "command": command,
                "params": params,
                "seed": 11,
                "output_dir": dir,
                "inputs": inputs.iter().map(|(k, f)| (k.to_string(), json!(shared.join(f)))).collect::<serde_json::Map<_, _>>(),
            });
            let path = root.path().join(format!("{step}-{rep}.json"));
            std::fs::write(&path, serde_json::to_vec(&cfg).unwrap()).map_err(|e| e.to_string())?;
            run_cli(&path)?;
            outputs.push(dir);
        }
        let (a, b) = (&outputs[0], &outputs[1]);
        let mut files: Vec<String> = std::fs::read_dir(a)
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        files.sort();
        for name in &files {
            let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
            let y = std::fs::read(b.join(name)).map_err(|e| format!("{name} missing on rerun: {e}"))?;
            if name == &format!("{command}.json") {
                ensure(without_timestamp(&x)? == without_timestamp(&y)?, || format!("{command}: {name} differs"))?;
                // Only the timestamp line may differ.
                let (xs, ys) = (String::from_utf8_lossy(&x), String::from_utf8_lossy(&y));
                let diff = xs.lines().zip(ys.lines()).filter(|(l, m)| l != m).count();
                ensure(
                    diff == 0
                        || (diff == 1
                            && xs.lines().zip(ys.lines()).any(|(l, m)| l != m && l.contains("\"timestamp\""))),
                    || format!("{command}: {name} differs outside the timestamp"),
                )?;
            } else {
                ensure(x == y, || format!("{command}: {name} differs"))?;
            }
            compared += 1;
            std::fs::create_dir_all(&shared).map_err(|e| e.to_string())?;
            if name.ends_with(".hgrd") || name == "ball.json" {
                std::fs::copy(a.join(name), shared.join(name)).map_err(|e| e.to_string())?;
            }
        }
    }
    Ok(format!("{compared} files identical across reruns"))
}
