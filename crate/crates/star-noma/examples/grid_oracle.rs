//! Certify the alternating optimizer against an exhaustive grid search on a
//! desk-scale instance (N_t = 2, two users, M = 2). The grid enumerates
//! per-element phases on both sides, the shared amplitude split, a location
//! lattice, and a simplex of power fractions with MRT-direction beams, then
//! checks that AO lands within 5% of the best grid point.
//!
//! Run with: cargo run --release --example grid_oracle

use star_noma::bf_noma::{ao_optimize, AoParams};
use star_noma::channel::ChannelModel;
use star_noma::oracle::{grid_search, GridSpec};
use star_noma::scene::load_scene;

fn main() {
    let text = std::fs::read_to_string("configs/table1_bf.toml")
        .or_else(|_| std::fs::read_to_string("../../configs/table1_bf.toml"))
        .expect("run from the workspace root");
    let mut scene = load_scene(&text).expect("valid config");
    scene.n_t = 2;
    scene.m_v = 1;
    scene.m_h = 2;
    scene.r_min = 0.0;

    let spec = GridSpec {
        phase_levels: 12,
        amp_levels: 5,
        location_steps: 3,
        power_levels: 7,
        ..GridSpec::default()
    };
    let model = ChannelModel::new(&scene, 1);

    let start = std::time::Instant::now();
    let best = grid_search(&scene, &model, &spec)
        .expect("within budget")
        .expect("feasible grid point exists");
    println!(
        "grid best WSR: {:.6} (search took {:.1?})",
        best.1,
        start.elapsed()
    );
    println!(
        "grid best location: ({:.2}, {:.2})",
        best.0.location.x, best.0.location.y
    );

    let report = ao_optimize(&scene, 1, &AoParams::default()).expect("AO run");
    let ratio = report.final_wsr() / best.1;
    println!(
        "AO final WSR:  {:.6}  (ratio to oracle: {:.4})",
        report.final_wsr(),
        ratio
    );
    assert!(ratio >= 0.95, "AO fell below 95% of the grid oracle");
    println!("AO is within 5% of the exhaustive grid optimum.");
}
