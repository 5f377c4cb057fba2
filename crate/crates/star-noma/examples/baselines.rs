//! Compare the STAR-NOMA scheme against the benchmark schemes on the
//! two-user reference scene at one seed: OMA (equal-slot TDMA with MRT),
//! reflect-only conventional RIS, fixed deployment (no location step), and
//! zero-forcing at a random surface.
//!
//! Run with: cargo run --release --example baselines

use star_noma::bf_noma::{ao_optimize, AoParams};
use star_noma::oracle::{oma_baseline, reflect_only_baseline, zf_report};
use star_noma::scene::load_scene;

fn main() {
    let text = std::fs::read_to_string("configs/table1_bf.toml")
        .or_else(|_| std::fs::read_to_string("../../configs/table1_bf.toml"))
        .expect("run from the workspace root");
    let scene = load_scene(&text).expect("valid config");
    let params = AoParams::default();
    let seed = 3;

    let mut rows: Vec<(&str, f64)> = Vec::new();

    let star = ao_optimize(&scene, seed, &params).expect("STAR-NOMA run");
    rows.push(("STAR-NOMA (joint)", star.final_wsr()));

    let fixed_params = AoParams {
        optimize_location: false,
        ..params.clone()
    };
    let fixed = ao_optimize(&scene, seed, &fixed_params).expect("fixed-location run");
    rows.push(("STAR-NOMA, fixed location", fixed.final_wsr()));

    let oma = oma_baseline(&scene, seed, &params).expect("OMA run");
    rows.push(("OMA (equal-slot TDMA)", oma.final_wsr()));

    let ris = reflect_only_baseline(&scene, seed, &params).expect("reflect-only run");
    rows.push(("conventional RIS (pinned sides)", ris.final_wsr()));

    match zf_report(&scene, seed, &params) {
        Ok(zf) => rows.push(("zero-forcing", zf.final_wsr())),
        Err(e) => println!("zero-forcing baseline failed: {e}"),
    }

    println!("{:<34} WSR (bit/s/Hz)", "scheme");
    for (name, wsr) in &rows {
        println!("{name:<34} {wsr:>10.4}");
    }
}
