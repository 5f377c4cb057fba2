//! Drive the batch CLI programmatically: run a small transmit-power sweep
//! over two seeds and write the figure-ready CSV files (trace, location,
//! sweep) to a temporary output directory, then print the sweep table.
//! Demonstrates that re-running produces byte-identical outputs.
//!
//! Run with: cargo run --release --example sweep_csv

use std::process::Command;

fn main() {
    let exe = std::env::current_exe().expect("example path");
    // examples live in target/<profile>/examples; the CLI binary sits one up
    let bin = exe
        .parent()
        .and_then(|p| p.parent())
        .map(|p| p.join("star-noma"))
        .filter(|p| p.exists());
    let Some(bin) = bin else {
        eprintln!("build the CLI first: cargo build --release -p star-noma");
        std::process::exit(1);
    };

    let cfg = ["configs/table1_bf.toml", "../../configs/table1_bf.toml"]
        .iter()
        .find(|p| std::path::Path::new(p).exists())
        .expect("run from the workspace root");

    let out = std::env::temp_dir().join("star_noma_sweep_example");
    let run = |tag: &str| {
        let status = Command::new(&bin)
            .args([
                "--config", cfg,
                "--out", out.to_str().unwrap(),
                "--seed", "1",
                "--seed", "2",
                "--scheme", "bf-noma",
                "--sweep", "p_max_dbm", "20:10:30",
                "--max-iter", "3",
            ])
            .status()
            .expect("spawn CLI");
        println!("{tag}: exit code {}", status.code().unwrap_or(-1));
        std::fs::read_to_string(out.join("sweep_p_max_dbm.csv")).expect("sweep CSV written")
    };

    let first = run("first run");
    let second = run("re-run");
    assert_eq!(first, second, "outputs must be byte-identical across runs");

    println!("\nsweep_p_max_dbm.csv:\n{first}");
    println!("files in {}:", out.display());
    for e in std::fs::read_dir(&out).expect("out dir") {
        println!("  {}", e.expect("entry").file_name().to_string_lossy());
    }
}
