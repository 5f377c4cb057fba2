//! Acceptance suite: one pass/fail line per criterion, asserted at the end.
//!
//! The full protocol (20 seeds for the AO/ordering criteria, 5 seeds per
//! sweep point) takes hours on one core; set `STAR_NOMA_FULL_ACCEPTANCE=1`
//! to run it. The default trims seed counts but keeps every scene, scale,
//! and threshold unchanged.

use star_noma::bf_noma::{ao_optimize, AoParams, AoReport};
use star_noma::channel::ChannelModel;
use star_noma::cluster_noma::ao_optimize_cluster;
use star_noma::conic::{bilinear_upper, exp_lower, normsq_lower, taylor_log_recip};
use star_noma::oracle::{grid_search, oma_baseline, reflect_only_baseline, GridSpec};
use star_noma::rates::rate_cluster;
use star_noma::scene::{dbm_to_watts, load_scene, Scene, Scheme};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TABLE1_BF: &str = include_str!("../../../configs/table1_bf.toml");
const TABLE1_CLUSTER: &str = include_str!("../../../configs/table1_cluster.toml");
const MONOTONE_TOL: f64 = 1e-6;

fn full_protocol() -> bool {
    std::env::var("STAR_NOMA_FULL_ACCEPTANCE").map_or(false, |v| v != "0" && !v.is_empty())
}

fn ao_seeds() -> Vec<u64> {
    let n = if full_protocol() { 20 } else { 6 };
    (1..=n).collect()
}

fn sweep_seeds() -> Vec<u64> {
    let n = if full_protocol() { 5 } else { 3 };
    (1..=n).collect()
}

struct Suite {
    failures: Vec<String>,
}

impl Suite {
    fn record(&mut self, criterion: usize, name: &str, pass: bool, detail: String) {
        println!(
            "criterion {criterion:>2} [{}] {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            self.failures.push(format!("criterion {criterion} ({name}): {detail}"));
        }
    }
}

fn bf_params() -> AoParams {
    AoParams::default()
}

fn cluster_params() -> AoParams {
    AoParams {
        max_ao_iter: 10,
        ..AoParams::default()
    }
}

fn monotone_within(trace: &[f64], tol: f64) -> bool {
    trace.windows(2).all(|w| w[1] >= w[0] - tol)
}

fn set_m(scene: &mut Scene, m: usize) {
    // keep a near-square aperture: rows of 5 elements
    assert_eq!(m % 5, 0);
    scene.m_v = m / 5;
    scene.m_h = 5;
}

#[test]
fn acceptance() {
    let mut suite = Suite { failures: Vec::new() };
    let bf_scene = load_scene(TABLE1_BF).expect("bf config");
    let cl_scene = load_scene(TABLE1_CLUSTER).expect("cluster config");
    let seeds = ao_seeds();

    // shared runs: Table-I beamformer scene (30 dBm, N_t = 8, M = 20)
    let bf_runs: Vec<(u64, AoReport)> = seeds
        .iter()
        .map(|&s| (s, ao_optimize(&bf_scene, s, &bf_params()).expect("bf AO run")))
        .collect();

    // criterion 1: monotone + converged <= 8 iterations
    {
        let mut pass = true;
        let mut worst = String::new();
        for (s, r) in &bf_runs {
            let mono = monotone_within(&r.f_trace, MONOTONE_TOL);
            if !(mono && r.converged && r.iterations.len() <= 8) {
                pass = false;
                worst = format!(
                    "seed {s}: monotone={mono} converged={} iters={}",
                    r.converged,
                    r.iterations.len()
                );
            }
        }
        let detail = if pass {
            format!("{} seeds monotone, converged within 8 AO iterations", seeds.len())
        } else {
            worst
        };
        suite.record(1, "monotone AO, beamformer-based", pass, detail);
    }

    // criterion 2: cluster scheme monotone + converged <= 10, Remark-4 SIC
    {
        let mut pass = true;
        let mut worst = String::new();
        for &s in &seeds {
            let r = ao_optimize_cluster(&cl_scene, s, &cluster_params()).expect("cluster AO");
            let mono = monotone_within(&r.f_trace, MONOTONE_TOL);
            // Remark-4: every user decoded after i can decode i's signal
            let chan = ChannelModel::new(&cl_scene, s)
                .realize_at(r.solution.location)
                .expect("realize");
            let mut sic = 0.0f64;
            for (n, seq) in r.solution.order.sequences.iter().enumerate() {
                for (a, &i) in seq.iter().enumerate() {
                    let own = rate_cluster(n, i, i, &r.solution, &chan, &cl_scene);
                    for &k in &seq[a + 1..] {
                        let at_k = rate_cluster(n, k, i, &r.solution, &chan, &cl_scene);
                        sic = sic.max(own - at_k);
                    }
                }
            }
            if !(mono && r.converged && r.iterations.len() <= 10 && sic <= 1e-6) {
                pass = false;
                worst = format!(
                    "seed {s}: monotone={mono} converged={} iters={} sic_violation={sic:.2e}",
                    r.converged,
                    r.iterations.len()
                );
            }
        }
        let detail = if pass {
            format!(
                "{} seeds monotone, converged within 10 AO iterations, SIC holds",
                seeds.len()
            )
        } else {
            worst
        };
        suite.record(2, "monotone AO, cluster-based", pass, detail);
    }

    // criterion 3: rank-one ratios of the active SDR
    {
        let min_ratio = bf_runs
            .iter()
            .flat_map(|(_, r)| r.rank_one_ratios.iter().cloned())
            .fold(f64::INFINITY, f64::min);
        suite.record(
            3,
            "rank-one of active SDR",
            min_ratio >= 0.999,
            format!("min lambda_max/trace = {min_ratio:.6}"),
        );
    }

    // criterion 4: scheme ordering vs OMA, reflect-only, fixed location
    {
        let fixed_params = AoParams {
            optimize_location: false,
            ..bf_params()
        };
        let mut wins = [0usize; 3];
        let mut means = [0.0f64; 4];
        for (s, r) in &bf_runs {
            let star = r.final_wsr();
            let oma = oma_baseline(&bf_scene, *s, &bf_params()).expect("oma").final_wsr();
            let ris = reflect_only_baseline(&bf_scene, *s, &bf_params())
                .expect("ris")
                .final_wsr();
            let fixed = ao_optimize(&bf_scene, *s, &fixed_params)
                .expect("fixed")
                .final_wsr();
            for (k, b) in [oma, ris, fixed].into_iter().enumerate() {
                if star > b {
                    wins[k] += 1;
                }
                means[k + 1] += b;
            }
            means[0] += star;
        }
        let n = bf_runs.len();
        for m in &mut means {
            *m /= n as f64;
        }
        let need = (0.9 * n as f64).ceil() as usize;
        let pass = means[0] > means[1]
            && means[0] > means[2]
            && means[0] > means[3]
            && wins.iter().all(|&w| w >= need);
        suite.record(
            4,
            "scheme ordering",
            pass,
            format!(
                "mean WSR star={:.3} oma={:.3} ris={:.3} fixed={:.3}; wins {:?}/{n}",
                means[0], means[1], means[2], means[3], wins
            ),
        );
    }

    // criterion 5: monotone trends along N_t, P_max, M
    {
        let sseeds = sweep_seeds();
        let eval = |scene: &Scene| -> Vec<f64> {
            sseeds
                .iter()
                .map(|&s| ao_optimize(scene, s, &bf_params()).expect("sweep run").final_wsr())
                .collect()
        };
        let trend = |per_value: &[Vec<f64>]| -> (bool, Vec<f64>) {
            let means: Vec<f64> = per_value
                .iter()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64)
                .collect();
            let mut ok = means.windows(2).all(|w| w[1] > w[0]);
            for pair in per_value.windows(2) {
                let wins = pair[0]
                    .iter()
                    .zip(&pair[1])
                    .filter(|(a, b)| b > a)
                    .count();
                ok &= 2 * wins > pair[0].len();
            }
            (ok, means)
        };

        let base_runs: Vec<f64> = sseeds
            .iter()
            .map(|&s| {
                bf_runs
                    .iter()
                    .find(|(bs, _)| bs == &s)
                    .map(|(_, r)| r.final_wsr())
                    .unwrap_or_else(|| {
                        ao_optimize(&bf_scene, s, &bf_params()).expect("base").final_wsr()
                    })
            })
            .collect();

        let nt_vals = [4usize, 6, 8, 10];
        let nt_runs: Vec<Vec<f64>> = nt_vals
            .iter()
            .map(|&nt| {
                if nt == 8 {
                    return base_runs.clone();
                }
                let mut s = bf_scene.clone();
                s.n_t = nt;
                eval(&s)
            })
            .collect();
        let (nt_ok, nt_means) = trend(&nt_runs);

        let p_vals = [20.0f64, 25.0, 30.0, 35.0];
        let p_runs: Vec<Vec<f64>> = p_vals
            .iter()
            .map(|&p| {
                if (p - 30.0).abs() < 1e-9 {
                    return base_runs.clone();
                }
                eval(&bf_scene.with_p_max(dbm_to_watts(p)))
            })
            .collect();
        let (p_ok, p_means) = trend(&p_runs);

        let m_vals = [10usize, 15, 20, 25];
        let m_runs: Vec<Vec<f64>> = m_vals
            .iter()
            .map(|&m| {
                if m == 20 {
                    return base_runs.clone();
                }
                let mut s = bf_scene.clone();
                set_m(&mut s, m);
                eval(&s)
            })
            .collect();
        let (m_ok, m_means) = trend(&m_runs);

        suite.record(
            5,
            "monotone trends",
            nt_ok && p_ok && m_ok,
            format!(
                "N_t means {nt_means:.3?} ({nt_ok}); P means {p_means:.3?} ({p_ok}); \
                 M means {m_means:.3?} ({m_ok})",
            ),
        );
    }

    // criterion 6: AO vs exhaustive grid on the tiny instance, both schemes
    {
        let mut tiny = bf_scene.clone();
        tiny.n_t = 2;
        tiny.m_v = 1;
        tiny.m_h = 2;
        let spec = GridSpec {
            phase_levels: 16,
            amp_levels: 5,
            location_steps: 3,
            power_levels: 9,
            ..GridSpec::default()
        };
        let start = std::time::Instant::now();
        let model = ChannelModel::new(&tiny, 1);
        let bf_grid = grid_search(&tiny, &model, &spec)
            .expect("grid within budget")
            .expect("feasible grid point");

        let mut tiny_cl = tiny.clone();
        tiny_cl.scheme = Scheme::ClusterNoma;
        tiny_cl.clusters = Some(vec![vec![0], vec![1]]);
        let cl_model = ChannelModel::new(&tiny_cl, 1);
        let cl_grid = grid_search(&tiny_cl, &cl_model, &spec)
            .expect("grid within budget")
            .expect("feasible grid point");
        let grid_time = start.elapsed();

        let bf_ao = ao_optimize(&tiny, 1, &bf_params()).expect("tiny bf AO").final_wsr();
        let cl_ao = ao_optimize_cluster(&tiny_cl, 1, &cluster_params())
            .expect("tiny cluster AO")
            .final_wsr();
        let bf_ratio = bf_ao / bf_grid.1;
        let cl_ratio = cl_ao / cl_grid.1;
        let pass =
            bf_ratio >= 0.95 && cl_ratio >= 0.95 && grid_time.as_secs_f64() <= 600.0;
        suite.record(
            6,
            "oracle equivalence",
            pass,
            format!(
                "AO/grid ratios: bf {bf_ratio:.4}, cluster {cl_ratio:.4}; \
                 grids took {grid_time:.1?}"
            ),
        );
    }

    // criterion 7: linearizer bound certificates
    {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut violations = 0usize;
        let mut tight = 0.0f64;
        for _ in 0..10_000 {
            let p = |rng: &mut ChaCha8Rng| 10f64.powf(rng.gen_range(-3.0..3.0));
            let (x0, y0, x, y) = (p(&mut rng), p(&mut rng), p(&mut rng), p(&mut rng));
            let b = taylor_log_recip(x0, y0).expect("positive point");
            if b.eval(x, y) > (1.0 + 1.0 / (x * y)).log2() + 1e-12 {
                violations += 1;
            }
            tight = tight.max((b.eval(x0, y0) - (1.0 + 1.0 / (x0 * y0)).log2()).abs());

            let (e0, ev) = (rng.gen_range(-20.0..5.0), rng.gen_range(-20.0..5.0));
            let eb = exp_lower(e0);
            if eb.eval(ev) > ev.exp() + 1e-12 {
                violations += 1;
            }
            tight = tight.max((eb.eval(e0) - e0.exp()).abs());

            let q = |rng: &mut ChaCha8Rng| rng.gen_range(0.0..50.0);
            let (c0, d0, c, d) = (q(&mut rng), q(&mut rng), q(&mut rng), q(&mut rng));
            let bb = bilinear_upper(c0, d0);
            if bb.eval(c, d) < c * d - 1e-9 {
                violations += 1;
            }
            tight = tight.max((bb.eval(c0, d0) - c0 * d0).abs() / (c0 * d0).abs().max(1.0));

            let v = |rng: &mut ChaCha8Rng| {
                [
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(-20.0..20.0),
                ]
            };
            let (s0, xx, s) = (v(&mut rng), v(&mut rng), v(&mut rng));
            let nb = normsq_lower(s0, xx);
            let truth: f64 = (0..3)
                .map(|k| (s[k] - xx[k]) * (s[k] - xx[k]))
                .sum();
            if nb.eval(s) > truth + 1e-9 {
                violations += 1;
            }
            let at_s0: f64 = (0..3).map(|k| (s0[k] - xx[k]) * (s0[k] - xx[k])).sum();
            tight = tight.max((nb.eval(s0) - at_s0).abs());
        }
        suite.record(
            7,
            "linearizer certificates",
            violations == 0 && tight <= 1e-12,
            format!("{violations} violations over 4x10^4 probes, worst tightness {tight:.2e}"),
        );
    }

    // criterion 8: deployment asymmetry across weight profiles
    {
        let run_with_weights = |w: [f64; 2]| -> AoReport {
            let mut s = bf_scene.clone();
            s.users[0].weight = w[0];
            s.users[1].weight = w[1];
            ao_optimize(&s, 7, &bf_params()).expect("asymmetry run")
        };
        let skewed = run_with_weights([0.8, 0.2]);
        let even = run_with_weights([0.5, 0.5]);
        let d_locs = {
            let (a, b) = (skewed.solution.location, even.solution.location);
            ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
        };
        let nearer_r = |r: &AoReport| {
            let l = r.solution.location;
            let d = |u: usize| {
                let p = bf_scene.users[u].pos;
                ((l.x - p.x).powi(2) + (l.y - p.y).powi(2)).sqrt()
            };
            d(1) < d(0) // user 1 is the reflection-side user
        };

        let mut oma_scene = bf_scene.clone();
        oma_scene.users[0].weight = 0.8;
        oma_scene.users[1].weight = 0.2;
        let oma = oma_baseline(&oma_scene, 7, &bf_params()).expect("oma asymmetry");
        let oma_near_heavy = {
            let l = oma.solution.location;
            let d = |u: usize| {
                let p = oma_scene.users[u].pos;
                ((l.x - p.x).powi(2) + (l.y - p.y).powi(2)).sqrt()
            };
            d(0) < d(1)
        };

        let pass = d_locs <= 1.0 && nearer_r(&skewed) && nearer_r(&even) && oma_near_heavy;
        suite.record(
            8,
            "deployment asymmetry",
            pass,
            format!(
                "NOMA locations {:.2} m apart, nearer R-side: ({}, {}); \
                 OMA nearer heavy user: {oma_near_heavy}",
                d_locs,
                nearer_r(&skewed),
                nearer_r(&even)
            ),
        );
    }

    // criterion 9: singleton-cluster pipeline matches the beamformer pipeline
    {
        let mut single = bf_scene.clone();
        single.scheme = Scheme::ClusterNoma;
        single.clusters = Some(vec![vec![0], vec![1]]);
        let mut worst = 0.0f64;
        for (s, r) in bf_runs.iter().take(5) {
            let cl = ao_optimize_cluster(&single, *s, &cluster_params())
                .expect("singleton cluster AO");
            let rel = (cl.final_wsr() - r.final_wsr()).abs() / r.final_wsr();
            worst = worst.max(rel);
        }
        suite.record(
            9,
            "cross-scheme consistency",
            worst <= 1e-3,
            format!("worst relative WSR gap over 5 seeds: {worst:.2e}"),
        );
    }

    // criterion 10: byte-identical CSV outputs across reruns
    {
        let bin = env!("CARGO_BIN_EXE_star-noma");
        let dir = tempfile::tempdir().expect("tempdir");
        let cfg = dir.path().join("scene.toml");
        std::fs::write(&cfg, TABLE1_BF).expect("write config");
        let run = |out: &std::path::Path| {
            let status = std::process::Command::new(bin)
                .args([
                    "--config",
                    cfg.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                    "--seed",
                    "1",
                    "--scheme",
                    "bf-noma",
                    "--max-iter",
                    "2",
                ])
                .status()
                .expect("spawn CLI");
            assert!(status.success(), "CLI run failed");
            let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out)
                .expect("out dir")
                .map(|e| {
                    let e = e.expect("entry");
                    (
                        e.file_name().to_string_lossy().into_owned(),
                        std::fs::read(e.path()).expect("read output"),
                    )
                })
                .collect();
            files.sort();
            files
        };
        let a = run(&dir.path().join("a"));
        let b = run(&dir.path().join("b"));
        let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
        suite.record(
            10,
            "determinism",
            a == b && !a.is_empty(),
            format!("{} output files byte-identical: {names:?}", a.len()),
        );
    }

    assert!(
        suite.failures.is_empty(),
        "acceptance failures:\n{}",
        suite.failures.join("\n")
    );
}
