//! Timing probe for the extraction hot path.
//!
//! Usage: cargo run --release -p sparselets-core --example bench_extract -- \
//!        data/corpus/camera_0.pgm 256 2048

use sparselets_core::imagecore::{apply_circular_mask, load_image, whiten, WhiteningParams};
use sparselets_core::loggabor::{BankParams, LogGaborBank};
use sparselets_core::pursuit::{extract_with_trace, PursuitParams};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let path = args.get(1).map(String::as_str).unwrap_or("data/corpus/camera_0.pgm");
    let size: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(256);
    let max_edges: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2048);

    let img = load_image(path, size).expect("load");
    let img = whiten(&img, &WhiteningParams::for_size(size)).expect("whiten");
    let img = apply_circular_mask(&img);

    let t0 = std::time::Instant::now();
    let bank = LogGaborBank::build(BankParams::for_image_size(size), size).expect("bank");
    let n_channels = bank.n_channels();
    println!("bank: {n_channels} channels, built in {:.2} s", t0.elapsed().as_secs_f64());

    let t1 = std::time::Instant::now();
    bank.coupling_table();
    println!("coupling table: {:.2} s", t1.elapsed().as_secs_f64());

    let params = PursuitParams {
        alpha: 0.8,
        max_edges,
        energy_threshold: 0.0,
        ..PursuitParams::default()
    };
    let t2 = std::time::Instant::now();
    let (list, energies) = extract_with_trace(&img, &bank, &params).expect("extract");
    let dt = t2.elapsed().as_secs_f64();
    let e_n = energies.last().unwrap() / img.energy();
    println!(
        "extract: {} steps ({} unique edges), {:.2} s ({:.2} ms/step), residual {:.4}",
        list.steps.len(),
        list.edges.len(),
        dt,
        1e3 * dt / list.steps.len() as f64,
        e_n
    );

    // refresh statistics from a raw engine run
    let mut engine = sparselets_core::pursuit::PursuitEngine::new(&img, &bank).expect("engine");
    let t3 = std::time::Instant::now();
    for _ in 0..max_edges {
        if engine.step(params.alpha, params.tie_epsilon).is_none() {
            break;
        }
    }
    let dt = t3.elapsed().as_secs_f64();
    println!(
        "engine: {} refreshes over {} steps ({:.1} per step, {} channels), {:.2} s",
        engine.refreshes,
        engine.steps,
        (engine.refreshes as f64 - n_channels as f64) / engine.steps as f64,
        n_channels,
        dt,
    );
}
