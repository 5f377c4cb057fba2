//! Batch experiment runner: parses a scene config, runs the requested
//! schemes and baselines over seed lists and parameter sweeps, and writes
//! figure-ready CSV files. All outputs are pure functions of the config
//! bytes and flags; re-runs are byte-identical.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::bf_noma::{ao_optimize, AoParams, AoReport, BfError};
use crate::channel::ChannelModel;
use crate::cluster_noma::ao_optimize_cluster;
use crate::conic::{bilinear_upper, exp_lower, normsq_lower, taylor_log_recip};
use crate::oracle::{
    grid_search, obp_baseline, oma_baseline, reflect_only_baseline, zf_report, GridSpec,
};
use crate::scene::{dbm_to_watts, load_config, LoadedConfig, Scene, Scheme};

pub const EXIT_OK: i32 = 0;
/// config parse error or I/O failure
pub const EXIT_PARSE_IO: i32 = 1;
/// at least one requested run was infeasible or failed numerically
pub const EXIT_INFEASIBLE: i32 = 2;
/// `--verify` found a failing check
pub const EXIT_VERIFY_FAILED: i32 = 3;

const TRACE_SCHEMA: &str = "# schema: star-noma/trace v1";
const SWEEP_SCHEMA: &str = "# schema: star-noma/sweep v1";
const LOCATION_SCHEMA: &str = "# schema: star-noma/location v1";
const PAF_SCHEMA: &str = "# schema: star-noma/pafs v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CliScheme {
    #[value(name = "bf-noma")]
    BfNoma,
    #[value(name = "cluster-noma")]
    ClusterNoma,
    #[value(name = "oma")]
    Oma,
    #[value(name = "ris")]
    Ris,
    #[value(name = "fixed-location")]
    FixedLocation,
    #[value(name = "zf")]
    Zf,
    #[value(name = "obp")]
    Obp,
}

impl CliScheme {
    fn tag(self) -> &'static str {
        match self {
            CliScheme::BfNoma => "bf-noma",
            CliScheme::ClusterNoma => "cluster-noma",
            CliScheme::Oma => "oma",
            CliScheme::Ris => "ris",
            CliScheme::FixedLocation => "fixed-location",
            CliScheme::Zf => "zf",
            CliScheme::Obp => "obp",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "star-noma",
    about = "STAR-RIS assisted NOMA joint location/beamforming experiments"
)]
struct Args {
    /// scene + optimizer config file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// output directory for CSV files
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// RNG seed; repeat for several runs
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// scheme or baseline to run; repeatable
    #[arg(long = "scheme", value_enum)]
    schemes: Vec<CliScheme>,
    /// sweep a parameter: <param> <start:step:stop> with param in
    /// {p_max_dbm, n_t, m_elements}
    #[arg(long, num_args = 2)]
    sweep: Vec<String>,
    /// override the outer AO iteration cap
    #[arg(long)]
    max_iter: Option<usize>,
    /// override the outer AO convergence tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// run the self-verification suite instead of experiments
    #[arg(long)]
    verify: bool,
}

pub fn run() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init()
        .ok();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return EXIT_PARSE_IO;
        }
    };
    match run_with(&args) {
        Ok(code) => code,
        Err(RunError::ParseIo(msg)) => {
            log::error!("{msg}");
            eprintln!("error: {msg}");
            EXIT_PARSE_IO
        }
    }
}

#[derive(Debug)]
enum RunError {
    ParseIo(String),
}

fn params_from(cfg: &LoadedConfig, args: &Args) -> AoParams {
    let o = &cfg.optimizer;
    AoParams {
        tol: args.tol.unwrap_or(o.tol),
        max_ao_iter: args.max_iter.unwrap_or(o.max_ao_iter),
        max_inner_iter: o.max_inner_iter,
        trust_radius: o.trust_radius,
        probe_grid: o.probe_grid,
        optimize_location: o.optimize_location,
        ..AoParams::default()
    }
}

/// Adapt the configured scene to one scheme (the baselines reinterpret the
/// same geometry under their own signal model).
fn scene_for(scene: &Scene, scheme: CliScheme) -> Scene {
    let mut s = scene.clone();
    match scheme {
        CliScheme::ClusterNoma | CliScheme::Obp => {
            s.scheme = Scheme::ClusterNoma;
            if s.clusters.is_none() {
                s.clusters = Some((0..s.users.len()).map(|i| vec![i]).collect());
            }
        }
        CliScheme::Zf => {}
        _ => {
            s.scheme = Scheme::BeamformerNoma;
            s.clusters = None;
        }
    }
    s
}

fn dispatch(
    scheme: CliScheme,
    scene: &Scene,
    seed: u64,
    params: &AoParams,
) -> Result<AoReport, BfError> {
    let scene = scene_for(scene, scheme);
    match scheme {
        CliScheme::BfNoma => ao_optimize(&scene, seed, params),
        CliScheme::ClusterNoma => ao_optimize_cluster(&scene, seed, params),
        CliScheme::Oma => oma_baseline(&scene, seed, params),
        CliScheme::Ris => reflect_only_baseline(&scene, seed, params),
        CliScheme::FixedLocation => {
            let frozen = AoParams {
                optimize_location: false,
                ..params.clone()
            };
            ao_optimize(&scene, seed, &frozen)
        }
        CliScheme::Zf => zf_report(&scene, seed, params),
        CliScheme::Obp => obp_baseline(&scene, seed, params),
    }
}

pub fn trace_csv(report: &AoReport) -> String {
    let mut out = String::new();
    out.push_str(TRACE_SCHEMA);
    out.push('\n');
    out.push_str("iteration,wsr,active,passive,location\n");
    out.push_str(&format!("0,{:.12e},-,-,-\n", report.f_trace[0]));
    for rec in &report.iterations {
        out.push_str(&format!(
            "{},{:.12e},{},{},{}\n",
            rec.iteration, rec.wsr, rec.active, rec.passive, rec.location
        ));
    }
    out
}

fn pafs_csv(report: &AoReport) -> Option<String> {
    let pafs = report.solution.pafs.as_ref()?;
    let mut out = String::new();
    out.push_str(PAF_SCHEMA);
    out.push('\n');
    out.push_str("cluster,slot,paf\n");
    for (n, cluster) in pafs.iter().enumerate() {
        for (k, p) in cluster.iter().enumerate() {
            out.push_str(&format!("{n},{k},{p:.12e}\n"));
        }
    }
    Some(out)
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), RunError> {
    let tmp = path.with_extension("csv.tmp");
    std::fs::write(&tmp, contents)
        .and_then(|()| std::fs::rename(&tmp, path))
        .map_err(|e| RunError::ParseIo(format!("writing {}: {e}", path.display())))
}

fn scene_hash(text: &str) -> u64 {
    let mut h = DefaultHasher::new();
    text.hash(&mut h);
    h.finish()
}

fn parse_range(spec: &str) -> Result<Vec<f64>, RunError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(RunError::ParseIo(format!(
            "sweep range must be start:step:stop, got {spec}"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|e| RunError::ParseIo(format!("bad sweep bound {p}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let (start, step, stop) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || stop < start {
        return Err(RunError::ParseIo(format!("empty sweep range {spec}")));
    }
    let mut vals = Vec::new();
    let mut v = start;
    while v <= stop + 1e-9 {
        vals.push(v);
        v += step;
    }
    Ok(vals)
}

fn apply_sweep(scene: &Scene, param: &str, value: f64) -> Result<Scene, RunError> {
    let mut s = scene.clone();
    match param {
        "p_max_dbm" => s.p_max = dbm_to_watts(value),
        "n_t" => s.n_t = value.round() as usize,
        // swept surfaces are laid out as a single row of elements
        "m_elements" => {
            s.m_v = 1;
            s.m_h = value.round() as usize;
        }
        other => {
            return Err(RunError::ParseIo(format!(
                "unknown sweep parameter {other} (expected p_max_dbm, n_t, m_elements)"
            )))
        }
    }
    Ok(s)
}

fn run_with(args: &Args) -> Result<i32, RunError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| RunError::ParseIo(format!("reading {}: {e}", args.config.display())))?;
    let cfg = load_config(&text).map_err(|e| RunError::ParseIo(format!("config: {e}")))?;
    let hash = scene_hash(&text);
    let params = params_from(&cfg, args);

    if args.verify {
        return Ok(verify(&cfg, &params));
    }

    std::fs::create_dir_all(&args.out)
        .map_err(|e| RunError::ParseIo(format!("creating {}: {e}", args.out.display())))?;

    let seeds: Vec<u64> = if args.seeds.is_empty() { vec![1] } else { args.seeds.clone() };
    let schemes: Vec<CliScheme> = if args.schemes.is_empty() {
        vec![match cfg.scene.scheme {
            Scheme::ClusterNoma => CliScheme::ClusterNoma,
            _ => CliScheme::BfNoma,
        }]
    } else {
        args.schemes.clone()
    };

    let mut any_infeasible = false;

    // plain runs: one trace per (scheme, seed) plus a location summary
    for &scheme in &schemes {
        let mut loc_rows = String::new();
        loc_rows.push_str(LOCATION_SCHEMA);
        loc_rows.push('\n');
        loc_rows.push_str("seed,x,y,wsr\n");
        for &seed in &seeds {
            match dispatch(scheme, &cfg.scene, seed, &params) {
                Ok(report) => {
                    let path = args.out.join(format!("trace_{}_{}.csv", scheme.tag(), seed));
                    write_atomic(&path, &trace_csv(&report))?;
                    if let Some(p) = pafs_csv(&report) {
                        let path =
                            args.out.join(format!("pafs_{}_{}.csv", scheme.tag(), seed));
                        write_atomic(&path, &p)?;
                    }
                    let s = report.solution.location;
                    loc_rows.push_str(&format!(
                        "{seed},{:.6},{:.6},{:.12e}\n",
                        s.x,
                        s.y,
                        report.final_wsr()
                    ));
                }
                Err(e) => {
                    log::error!(
                        "run failed (scene {hash:016x}, scheme {}, seed {seed}): {e}",
                        scheme.tag()
                    );
                    any_infeasible = true;
                }
            }
        }
        write_atomic(
            &args.out.join(format!("location_{}.csv", scheme.tag())),
            &loc_rows,
        )?;
    }

    // parameter sweep: mean/stddev WSR per (value, scheme)
    if !args.sweep.is_empty() {
        let param = args.sweep[0].as_str();
        let values = parse_range(&args.sweep[1])?;
        let mut rows = String::new();
        rows.push_str(SWEEP_SCHEMA);
        rows.push('\n');
        rows.push_str("param,value,scheme,mean_wsr,stddev_wsr,n_seeds\n");
        for &value in &values {
            let swept = apply_sweep(&cfg.scene, param, value)?;
            for &scheme in &schemes {
                let mut finals = Vec::new();
                for &seed in &seeds {
                    match dispatch(scheme, &swept, seed, &params) {
                        Ok(report) => finals.push(report.final_wsr()),
                        Err(e) => {
                            log::error!(
                                "sweep run failed (scene {hash:016x}, {param}={value}, \
                                 scheme {}, seed {seed}): {e}",
                                scheme.tag()
                            );
                            any_infeasible = true;
                        }
                    }
                }
                let n = finals.len();
                let (mean, sd) = if n > 0 {
                    let mean = finals.iter().sum::<f64>() / n as f64;
                    let var = finals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                        / n as f64;
                    (mean, var.sqrt())
                } else {
                    (f64::NAN, f64::NAN)
                };
                rows.push_str(&format!(
                    "{param},{value},{},{:.12e},{:.12e},{n}\n",
                    scheme.tag(),
                    mean,
                    sd
                ));
            }
        }
        write_atomic(&args.out.join(format!("sweep_{param}.csv")), &rows)?;
    }

    Ok(if any_infeasible { EXIT_INFEASIBLE } else { EXIT_OK })
}

/// Self-check: linearizer bound certificates plus a tiny-instance
/// grid-oracle comparison. Prints one line per check.
fn verify(cfg: &LoadedConfig, params: &AoParams) -> i32 {
    use rand::{Rng, SeedableRng};
    let mut ok = true;
    let mut check = |name: &str, pass: bool| {
        println!("{}  {name}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    };

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let mut bound_ok = [true; 4];
    for _ in 0..10_000 {
        let p = |rng: &mut rand_chacha::ChaCha8Rng| 10f64.powf(rng.gen_range(-3.0..3.0));
        let (x0, y0, x, y) = (p(&mut rng), p(&mut rng), p(&mut rng), p(&mut rng));
        let b = taylor_log_recip(x0, y0).expect("positive expansion point");
        let truth = (1.0 + 1.0 / (x * y)).log2();
        bound_ok[0] &= b.eval(x, y) <= truth + 1e-9 * truth.abs().max(1.0);
        bound_ok[0] &= (b.eval(x0, y0) - (1.0 + 1.0 / (x0 * y0)).log2()).abs() <= 1e-12;

        let (e0, ev) = (rng.gen_range(-20.0..5.0), rng.gen_range(-20.0..5.0));
        let eb = exp_lower(e0);
        bound_ok[1] &= eb.eval(ev) <= ev.exp() + 1e-12;
        bound_ok[1] &= (eb.eval(e0) - e0.exp()).abs() <= 1e-12;

        let q = |rng: &mut rand_chacha::ChaCha8Rng| rng.gen_range(0.0..50.0);
        let (c0, d0, c, d) = (q(&mut rng), q(&mut rng), q(&mut rng), q(&mut rng));
        let bb = bilinear_upper(c0, d0);
        bound_ok[2] &= bb.eval(c, d) >= c * d - 1e-9;
        bound_ok[2] &= (bb.eval(c0, d0) - c0 * d0).abs() <= 1e-9;

        let v = |rng: &mut rand_chacha::ChaCha8Rng| {
            [
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-20.0..20.0),
            ]
        };
        let (s0, xx, s) = (v(&mut rng), v(&mut rng), v(&mut rng));
        let nb = normsq_lower(s0, xx);
        let truth: f64 = (0..3).map(|k| (s[k] - xx[k]) * (s[k] - xx[k])).sum();
        bound_ok[3] &= nb.eval(s) <= truth + 1e-9;
    }
    check("taylor_log_recip lower bound (1e4 probes)", bound_ok[0]);
    check("exp_lower bound (1e4 probes)", bound_ok[1]);
    check("bilinear_upper bound (1e4 probes)", bound_ok[2]);
    check("normsq_lower bound (1e4 probes)", bound_ok[3]);

    // tiny-instance oracle comparison on a shrunken copy of the scene
    let tiny = {
        let mut s = cfg.scene.clone();
        s.scheme = Scheme::BeamformerNoma;
        s.clusters = None;
        s.n_t = 2;
        s.m_v = 1;
        s.m_h = 2;
        s.users.truncate(2);
        s.r_min = 0.0;
        s
    };
    let spec = GridSpec {
        phase_levels: 8,
        amp_levels: 3,
        location_steps: 2,
        power_levels: 5,
        ..GridSpec::default()
    };
    let model = ChannelModel::new(&tiny, 1);
    let grid = grid_search(&tiny, &model, &spec);
    let ao = ao_optimize(&tiny, 1, params);
    match (grid, ao) {
        (Ok(Some((_, grid_wsr))), Ok(report)) => {
            check(
                "tiny-instance AO vs grid oracle (>= 0.95x)",
                report.final_wsr() >= 0.95 * grid_wsr,
            );
        }
        _ => check("tiny-instance AO vs grid oracle (>= 0.95x)", false),
    }

    if ok {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!(parse_range("15:5:40").unwrap(), vec![15.0, 20.0, 25.0, 30.0, 35.0, 40.0]);
        assert!(parse_range("1:0:5").is_err());
        assert!(parse_range("abc").is_err());
    }

    #[test]
    fn sweep_application() {
        let scene = crate::rates::tests::toy_scene(4, 6);
        let s = apply_sweep(&scene, "n_t", 8.0).unwrap();
        assert_eq!(s.n_t, 8);
        let s = apply_sweep(&scene, "m_elements", 12.0).unwrap();
        assert_eq!(s.m(), 12);
        let s = apply_sweep(&scene, "p_max_dbm", 30.0).unwrap();
        assert!((s.p_max - 1.0).abs() < 1e-12);
        assert!(apply_sweep(&scene, "nope", 1.0).is_err());
    }
}
