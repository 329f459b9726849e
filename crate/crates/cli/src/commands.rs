use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use hcut::alpha::{bad_mass_decay, AlphaSampler, DEFAULT_BALL_SAMPLES};
use hcut::cayley::{generate_ball, sub_ball_indices};
use hcut::collapse::{
    center_collapse, half_space_family, horizontal_control, moving_char_check, scale_comparison, slices_near,
    CollapseOptions, CollapseReport, ScaleOptions,
};
use hcut::cuts::{coarea_check, cut_measure_from_map, cut_metric, total_variation_identity};
use hcut::distortion::{min_distortion_colgen, min_distortion_exact, verify_witness, ColgenOptions};
use hcut::levels::{slice_function, LevelSet, TestFunction};
use hcut::metric::named_graph;
use hcut::perimeter::{half_space_ratio, mollified_perimeter, perimeter_field, perimeter_in_ball};
use hcut::straighten::{straighten, GoodBadParams};
use hcut::{CayleySpec, FiniteMetricSpace, GridGeometry, GridSet, GroupElement, HalfSpace, L1Map, SetMeasure};

use crate::config::{ExperimentConfig, Params};
use crate::error::{CliError, CliResult};

const DEFAULT_RADII: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

/// What a command produced: the result payload, plot data, and extra files.
#[derive(Debug, Default)]
pub struct Outcome {
    pub result: Value,
    pub csv: String,
    pub artifacts: Vec<(String, Vec<u8>)>,
    /// SHA-256 of each input file, by input name.
    pub input_hashes: Vec<(String, String)>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    params: Params<'a>,
    input_hashes: Vec<(String, String)>,
}

impl<'a> Ctx<'a> {
    fn input(&mut self, name: &str) -> CliResult<Option<Vec<u8>>> {
        let Some(path) = self.cfg.inputs.get(name) else { return Ok(None) };
        let bytes = read_input(path)?;
        self.input_hashes.push((name.to_string(), crate::config::sha256_hex(&bytes)));
        Ok(Some(bytes))
    }

    fn point(&self, key: &str, default: [f64; 3]) -> CliResult<GroupElement> {
        let [a, b, c] = self.params.or(key, default)?;
        Ok(GroupElement::new(a, b, c))
    }

    fn geometry(&self) -> CliResult<GridGeometry> {
        self.geometry_or(GridGeometry::default().res)
    }

    fn function(&self, default: TestFunction) -> CliResult<TestFunction> {
        self.params.or("function", default)
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed)
    }
}

fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))
}

fn parse_json(bytes: &[u8], what: &str) -> CliResult<Value> {
    serde_json::from_slice(bytes).map_err(|e| CliError::Schema(format!("{what}: {e}")))
}

fn utf8(bytes: Vec<u8>, what: &str) -> CliResult<String> {
    String::from_utf8(bytes).map_err(|e| CliError::Schema(format!("{what}: {e}")))
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("values serialize");
    out.push(b'\n');
    out
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

pub fn dispatch(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    cfg.validate()?;
    let mut ctx = Ctx { cfg, params: Params::new(&cfg.params), input_hashes: Vec::new() };
    let mut out = match cfg.command.as_str() {
        "cayley-ball" => cayley_ball(&mut ctx),
        "distortion" => distortion(&mut ctx),
        "slice" => slice(&mut ctx),
        "coarea" => coarea(&mut ctx),
        "tv-identity" => tv_identity(&mut ctx),
        "perimeter" => perimeter(&mut ctx),
        "alpha" => alpha(&mut ctx),
        "bad-mass" => bad_mass(&mut ctx),
        "straighten" => straighten_cmd(&mut ctx),
        "collapse" => collapse(&mut ctx),
        "scale-compare" => scale_compare(&mut ctx),
        "moving-char" => moving_char(&mut ctx),
        other => Err(CliError::Schema(format!("unknown command {other:?}"))),
    }?;
    let unknown_inputs: Vec<&String> =
        cfg.inputs.keys().filter(|k| !ctx.input_hashes.iter().any(|(n, _)| n == *k)).collect();
    if !unknown_inputs.is_empty() {
        return Err(CliError::Schema(format!("unknown inputs {unknown_inputs:?}")));
    }
    ctx.params.finish()?;
    out.input_hashes = ctx.input_hashes;
    Ok(out)
}

fn cayley_ball(ctx: &mut Ctx) -> CliResult<Outcome> {
    let k: u32 = ctx.params.or("k", 2)?;
    let cap: u32 = ctx.params.or("radius_cap", hcut::cayley::DEFAULT_RADIUS_CAP)?;
    let spec = CayleySpec::standard(k).with_cap(cap);
    let ball = generate_ball(&spec)?;
    let sizes: Vec<usize> = (0..=k).map(|j| sub_ball_indices(&ball, j).len()).collect();
    let mut csv = String::from("index,a,b,c,word_length\n");
    if let Some(coords) = &ball.coords {
        for (i, g) in coords.iter().enumerate() {
            let _ = writeln!(csv, "{i},{},{},{},{}", g.a, g.b, g.c, ball.dist.get(0, i));
        }
    }
    Ok(Outcome {
        result: json!({
            "k": k,
            "n": ball.len(),
            "sub_ball_sizes": sizes,
            "word_length_center": spec.word_length([0, 0, 1], 8),
            "ball_ref": "ball.json",
        }),
        csv,
        artifacts: vec![("ball.json".into(), pretty(&ball.to_json()))],
        ..Outcome::default()
    })
}

fn distortion(ctx: &mut Ctx) -> CliResult<Outcome> {
    let graph: Option<String> = ctx.params.opt("graph")?;
    let method: String = ctx.params.or("method", "exact".to_string())?;
    let defaults = ColgenOptions::default();
    let opts = ColgenOptions {
        budget: ctx.params.or("budget", defaults.budget)?,
        restarts: ctx.params.or("restarts", defaults.restarts)?,
        max_new_columns: ctx.params.or("max_new_columns", defaults.max_new_columns)?,
        exhaustive_cap: ctx.params.or("exhaustive_cap", defaults.exhaustive_cap)?,
        seed: ctx.cfg.seed,
        ..defaults
    };
    let space = match (ctx.input("space")?, graph) {
        (Some(_), Some(_)) => return Err(CliError::Schema("give either input \"space\" or param \"graph\"".into())),
        (Some(bytes), None) => FiniteMetricSpace::from_json(&parse_json(&bytes, "space")?)?,
        (None, Some(name)) => named_graph(&name)?,
        (None, None) => {
            return Err(CliError::MissingInput("distortion needs input \"space\" or param \"graph\"".into()))
        }
    };
    let result = match method.as_str() {
        "exact" => min_distortion_exact(&space)?,
        "colgen" => min_distortion_colgen(&space, &opts)?,
        other => return Err(CliError::Schema(format!("unknown method {other:?}"))),
    };
    let check = verify_witness(&space, &result);
    let ds = cut_metric(&result.witness);
    let mut csv = String::from("i,j,d,d_sigma\n");
    for i in 0..space.len() {
        for j in (i + 1)..space.len() {
            let _ = writeln!(csv, "{i},{j},{},{}", space.dist.get(i, j), ds.get(i, j));
        }
    }
    let mut payload = result.to_json("witness.json");
    payload["n"] = json!(space.len());
    payload["method"] = json!(method);
    payload["verification"] = json!({
        "max_upper_violation": check.max_upper_violation,
        "max_lower_violation": check.max_lower_violation,
        "achieved_distortion": if check.infinite { Value::Null } else { json!(check.achieved_distortion) },
    });
    Ok(Outcome {
        result: payload,
        csv,
        artifacts: vec![("witness.json".into(), pretty(&result.witness.to_json()))],
        ..Outcome::default()
    })
}

fn random_map(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CliResult<L1Map> {
    let values = (0..n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let pw = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let tw = (0..m).map(|_| rng.gen_range(0.5..2.0)).collect();
    Ok(L1Map::new(values, pw, tw)?)
}

fn slice(ctx: &mut Ctx) -> CliResult<Outcome> {
    let n: usize = ctx.params.or("n", 8)?;
    let m: usize = ctx.params.or("m", 4)?;
    let f = match ctx.input("map")? {
        Some(bytes) => L1Map::from_csv(&utf8(bytes, "map")?)?,
        None => random_map(&mut ctx.rng(), n, m)?,
    };
    let sigma = cut_measure_from_map(&f)?;
    let err = cut_metric(&sigma).max_abs_diff(&f.distance_matrix());
    let mut csv = String::from("atom,weight,size\n");
    for (k, a) in sigma.atoms().iter().enumerate() {
        let _ = writeln!(csv, "{k},{},{}", a.weight, a.cut.count());
    }
    Ok(Outcome {
        result: json!({
            "n": f.num_points(),
            "m": f.num_coords(),
            "atoms": sigma.len(),
            "mass": sigma.mass(&f.point_weights),
            "norm": f.norm(),
            "max_metric_error": err,
            "cut_measure_ref": "cut_measure.json",
        }),
        csv,
        artifacts: vec![("cut_measure.json".into(), pretty(&sigma.to_json()))],
        ..Outcome::default()
    })
}

fn coarea(ctx: &mut Ctx) -> CliResult<Outcome> {
    let geometry = ctx.geometry_or([6, 6, 12])?;
    let trials: usize = ctx.params.or("trials", 10)?;
    let levels: u32 = ctx.params.or("levels", 5)?;
    let lines = geometry.lines();
    let mut rng = ctx.rng();
    let mut csv = String::from("trial,line_variation,coarea_sum\n");
    let mut worst = 0.0f64;
    for t in 0..trials {
        let h: Vec<f64> = (0..geometry.len()).map(|_| rng.gen_range(0..levels.max(1)) as f64 * 0.5).collect();
        let (lhs, rhs) = coarea_check(&h, &lines);
        worst = worst.max((lhs - rhs).abs());
        let _ = writeln!(csv, "{t},{lhs},{rhs}");
    }
    Ok(Outcome {
        result: json!({ "trials": trials, "voxels": geometry.len(), "max_abs_diff": worst }),
        csv,
        ..Outcome::default()
    })
}

fn tv_identity(ctx: &mut Ctx) -> CliResult<Outcome> {
    let geometry = ctx.geometry_or([6, 6, 12])?;
    let trials: usize = ctx.params.or("trials", 5)?;
    let m: usize = ctx.params.or("m", 3)?;
    let lines = geometry.lines();
    let mut rng = ctx.rng();
    let mut csv = String::from("trial,total_perimeter,total_variation\n");
    let mut worst = 0.0f64;
    for t in 0..trials {
        let values = (0..geometry.len() * m).map(|_| rng.gen_range(0..4) as f64).collect();
        let tw = (0..m).map(|_| rng.gen_range(0.5..2.0)).collect();
        let f = L1Map::new(values, vec![1.0; geometry.len()], tw)?;
        let (per, tv) = total_variation_identity(&f, &lines)?;
        worst = worst.max((per - tv).abs());
        let _ = writeln!(csv, "{t},{per},{tv}");
    }
    Ok(Outcome {
        result: json!({ "trials": trials, "voxels": geometry.len(), "coords": m, "max_abs_diff": worst }),
        csv,
        ..Outcome::default()
    })
}

impl Ctx<'_> {
    fn geometry_or(&self, res: [usize; 3]) -> CliResult<GridGeometry> {
        let half: f64 = self.params.or("half", 1.0)?;
        let res: [usize; 3] = self.params.or("res", res)?;
        Ok(GridGeometry::cube(half, res)?)
    }

    /// The set named by `inputs.set` (a `.hgrd` file), or by `shape`:
    /// `half_space` (`angle`, `basepoint`) or `level` (`function`, `threshold`).
    fn described_set(&mut self) -> CliResult<Described> {
        let shape: String = self.params.or("shape", "level".to_string())?;
        if let Some(bytes) = self.input("set")? {
            return Ok(Described::Grid(GridSet::read_from(bytes.as_slice())?));
        }
        match shape.as_str() {
            "half_space" => {
                let base = self.point("basepoint", [0.0; 3])?;
                let angle: f64 = self.params.or("angle", 0.0)?;
                Ok(Described::HalfSpace(HalfSpace::new(base, angle)))
            }
            "level" => {
                let f = self.function(TestFunction::Parabolic)?;
                let t: f64 = self.params.or("threshold", 0.0)?;
                Ok(Described::Level(LevelSet::new(f, t)))
            }
            other => Err(CliError::Schema(format!("unknown shape {other:?}"))),
        }
    }

    fn grid_set(&mut self) -> CliResult<GridSet> {
        let described = self.described_set()?;
        let geometry = self.geometry()?;
        Ok(match described {
            Described::Grid(g) => g,
            Described::HalfSpace(h) => GridSet::from_membership(geometry, &h)?,
            Described::Level(l) => GridSet::from_membership(geometry, &l)?,
        })
    }
}

enum Described {
    Grid(GridSet),
    HalfSpace(HalfSpace),
    Level(LevelSet),
}

fn perimeter(ctx: &mut Ctx) -> CliResult<Outcome> {
    let set = ctx.grid_set()?;
    let x = ctx.point("x", [0.0; 3])?;
    let radii: Vec<f64> = ctx.params.or("radii", DEFAULT_RADII.to_vec())?;
    let field = perimeter_field(&set);
    let mut csv = String::from("r,perimeter,ratio\n");
    let mut balls = Vec::new();
    for &r in &radii {
        let per = perimeter_in_ball(&set, x, r)?;
        let ratio = half_space_ratio(&set, x, r)?;
        let _ = writeln!(csv, "{r},{per},{ratio}");
        balls.push(json!({ "r": r, "perimeter": per, "ratio": ratio }));
    }
    let mut grid = Vec::new();
    set.write_to(&mut grid)?;
    Ok(Outcome {
        result: json!({
            "measure": set.measure(),
            "total_perimeter": field.total(),
            "mollified_perimeter": mollified_perimeter(&set),
            "basepoint": x,
            "balls": balls,
            "set_ref": "set.hgrd",
            "field_ref": "perimeter_field.csv",
        }),
        csv,
        artifacts: vec![("set.hgrd".into(), grid), ("perimeter_field.csv".into(), field.to_csv().into_bytes())],
        ..Outcome::default()
    })
}

fn alpha(ctx: &mut Ctx) -> CliResult<Outcome> {
    let set = ctx.described_set()?;
    let x = ctx.point("x", [0.0; 3])?;
    let radii: Vec<f64> = ctx.params.or("radii", DEFAULT_RADII.to_vec())?;
    let sampler = AlphaSampler::new(ctx.params.or("samples", DEFAULT_BALL_SAMPLES)?);
    let mut csv = String::from("r,alpha,theta\n");
    let mut rows = Vec::new();
    for &r in &radii {
        let a = match &set {
            Described::Grid(g) => sampler.alpha(g, x, r)?,
            Described::HalfSpace(h) => sampler.alpha(h, x, r)?,
            Described::Level(l) => sampler.alpha(l, x, r)?,
        };
        let _ = writeln!(csv, "{r},{},{}", a.value, a.half_space.normal_angle);
        rows.push(json!({ "r": r, "alpha": a.value, "half_space": a.half_space }));
    }
    Ok(Outcome {
        result: json!({ "basepoint": x, "samples": sampler.len(), "alpha": rows }),
        csv,
        ..Outcome::default()
    })
}

fn bad_mass(ctx: &mut Ctx) -> CliResult<Outcome> {
    let geometry = ctx.geometry()?;
    let f = ctx.function(TestFunction::Parabolic)?;
    let levels: usize = ctx.params.or("levels", 16)?;
    let eps: f64 = ctx.params.or("eps", 0.15)?;
    let radii: Vec<f64> = ctx.params.or("radii", DEFAULT_RADII.to_vec())?;
    let scales: Vec<f64> = ctx.params.or("scales", radii.clone())?;
    let sampler = AlphaSampler::new(ctx.params.or("samples", DEFAULT_BALL_SAMPLES)?);
    let sliced = slice_function(&geometry, f, levels)?;
    let report = bad_mass_decay(&sliced.measure, eps, &radii, &scales, sampler)?;
    let mut csv = String::from("R,bad_mass\n");
    for (r, m) in report.radii.iter().zip(&report.bad_mass) {
        let _ = writeln!(csv, "{r},{m}");
    }
    let mut result = to_value(&report);
    result["function"] = json!(f);
    result["levels"] = json!(levels);
    result["nonincreasing"] = json!(report.is_nonincreasing(1e-12));
    Ok(Outcome { result, csv, ..Outcome::default() })
}

fn domain(ctx: &Ctx) -> CliResult<([f64; 3], [f64; 3])> {
    let h: f64 = ctx.params.or("domain_half", 2.0)?;
    Ok(([-h; 3], [h; 3]))
}

fn straighten_cmd(ctx: &mut Ctx) -> CliResult<Outcome> {
    let f = ctx.function(TestFunction::Generic)?;
    let x = ctx.point("x", [0.1, -0.2, 0.05])?;
    let r: f64 = ctx.params.or("r", 0.1)?;
    let delta: f64 = ctx.params.or("delta", 0.1)?;
    let eps: f64 = ctx.params.or("eps", 0.1)?;
    let levels: usize = ctx.params.or("levels", 64)?;
    let with_perimeters: bool = ctx.params.or("perimeters", true)?;
    let sampler = AlphaSampler::new(ctx.params.or("samples", DEFAULT_BALL_SAMPLES)?);
    let sigma = slices_near(f, x, r, levels, domain(ctx)?)?;
    let params = GoodBadParams::new(delta, eps, r);
    let st = straighten(&sigma, x, &params, &sampler, with_perimeters)?;
    let mut csv = String::from("atom,weight,status,alpha_2r,theta\n");
    for (k, (_, w)) in sigma.atoms().iter().enumerate() {
        let status = if st.atoms.iter().any(|a| a.atom == k) {
            "straightened"
        } else if st.demoted.contains(&k) {
            "demoted"
        } else {
            "bad"
        };
        let (a, th) = match st.split.witnesses[k] {
            Some(wit) => (wit.alpha_2r.value.to_string(), wit.alpha_2r.half_space.normal_angle.to_string()),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(csv, "{k},{w},{status},{a},{th}");
    }
    let half_spaces: Vec<Value> =
        st.measure.atoms().iter().map(|(h, w)| json!({ "half_space": h, "weight": w })).collect();
    Ok(Outcome {
        result: json!({
            "function": f,
            "basepoint": x,
            "params": { "delta": delta, "eps": eps, "r": r, "r0": params.r0 },
            "atoms": sigma.len(),
            "good": st.split.good.len(),
            "bad": st.split.bad.len(),
            "demoted": st.demoted.len(),
            "diagnostics": st.split.diagnostics,
            "straightened": half_spaces,
        }),
        csv,
        ..Outcome::default()
    })
}

fn collapse(ctx: &mut Ctx) -> CliResult<Outcome> {
    let family: String = ctx.params.or("sigma", "slices".to_string())?;
    let x = ctx.point("x", [0.1, -0.2, 0.05])?;
    let ts: Vec<f64> = ctx.params.or("t", vec![0.2, 0.1, 0.05, 0.025])?;
    let geometry = ctx.geometry()?;
    let opts = CollapseOptions {
        offsets: ctx.params.or("offsets", 16)?,
        neighborhood: ctx.params.or("neighborhood", geometry.cell())?,
        resolution_floor: ctx.params.or("resolution_floor", geometry.cell()[2])?,
    };
    let (center, horizontal, label) = match family.as_str() {
        "slices" => {
            let f = ctx.function(TestFunction::C)?;
            let levels: usize = ctx.params.or("levels", geometry.res[2] - 1)?;
            let s = slice_function(&geometry, f, levels)?;
            (center_collapse(&s.measure, x, &ts, &opts)?, horizontal_control(&s.measure, x, &ts, &opts)?, json!(f))
        }
        "half_spaces" => {
            let angles: usize = ctx.params.or("angles", 64)?;
            let spacing: f64 = ctx.params.or("spacing", 0.02)?;
            let half_width: f64 = ctx.params.or("half_width", 1.5)?;
            let hs: SetMeasure<HalfSpace> = half_space_family(angles, spacing, half_width)?;
            (center_collapse(&hs, x, &ts, &opts)?, horizontal_control(&hs, x, &ts, &opts)?, json!("half_spaces"))
        }
        other => return Err(CliError::Schema(format!("unknown sigma {other:?}"))),
    };
    let mut csv = String::from("direction,t,numerator,denominator,ratio\n");
    for rep in [&center, &horizontal] {
        for line in rep.to_csv().lines().skip(1) {
            let _ = writeln!(csv, "{},{line}", direction_name(rep));
        }
    }
    Ok(Outcome {
        result: json!({ "sigma": label, "center": center, "horizontal": horizontal }),
        csv,
        ..Outcome::default()
    })
}

fn direction_name(rep: &CollapseReport) -> &'static str {
    match rep.direction {
        hcut::collapse::Direction::Center => "center",
        hcut::collapse::Direction::Horizontal => "horizontal",
    }
}

fn scale_compare(ctx: &mut Ctx) -> CliResult<Outcome> {
    let f = ctx.function(TestFunction::Generic)?;
    let x = ctx.point("x", [0.1, -0.2, 0.05])?;
    let radii: Vec<f64> = ctx.params.or("radii", DEFAULT_RADII.to_vec())?;
    let levels: usize = ctx.params.or("levels", 64)?;
    let defaults = ScaleOptions::default();
    let opts = ScaleOptions {
        delta: ctx.params.or("delta", defaults.delta)?,
        eps: ctx.params.or("eps", defaults.eps)?,
        pairs: ctx.params.or("pairs", defaults.pairs)?,
        ball_samples: ctx.params.or("samples", defaults.ball_samples)?,
    };
    let dom = domain(ctx)?;
    let report = scale_comparison(|r| slices_near(f, x, r, levels, dom), x, &radii, &opts)?;
    let mut result = to_value(&report);
    result["function"] = json!(f);
    result["triangle_holds"] = json!(report.entries.iter().all(|e| e.skipped.is_some() || e.triangle_holds()));
    Ok(Outcome { result, csv: report.to_csv(), ..Outcome::default() })
}

fn moving_char(ctx: &mut Ctx) -> CliResult<Outcome> {
    let n: usize = ctx.params.or("n", 100)?;
    let err = moving_char_check(n)?;
    Ok(Outcome {
        result: json!({ "n": n, "max_error": err }),
        csv: format!("n,max_error\n{n},{err}\n"),
        ..Outcome::default()
    })
}
