//! Runs the bookstore scenario once and prints a summary line.
//!
//! `cargo run --release --example bookstore -- <seed> <seal|rloc|dr|frontier|perfect> [key=value ...] [out_dir]`

use seal::agent::{run_simulation, ScenarioConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let mode = args.next().unwrap_or_else(|| "seal".into());
    let mut text = format!("seed = {seed}\n");
    text.push_str(match mode.as_str() {
        "rloc" => "localization = rloc\n",
        "dr" => "localization = dead_reckoning\n",
        "frontier" => "localization = dead_reckoning\nnavigation = frontier\n",
        "perfect" => "localization = dead_reckoning\nodometry_sigma_v = 0\nodometry_sigma_w = 0\n",
        _ => "",
    });
    let mut out_dir = None;
    for a in args {
        if a.contains('=') {
            text.push_str(&a);
            text.push('\n');
        } else {
            out_dir = Some(a);
        }
    }
    let config = ScenarioConfig::parse(&text, None).expect("scenario");
    let t = std::time::Instant::now();
    let out = run_simulation(&config).expect("run");
    let r = &out.report;
    if let Some(dir) = out_dir {
        out.simulation.write_outputs(std::path::Path::new(&dir), r).expect("write");
    }
    println!(
        "seed {seed} {mode}: steps {} done {} explored {:.1}% ssim {:.3} ale {:.3} ate {:.3} dist {:.1} in {:.1}s",
        r.steps,
        r.completed,
        r.explored_pct,
        r.map_ssim,
        r.ale_m,
        r.ate_m,
        r.total_distance_m,
        t.elapsed().as_secs_f64()
    );
}
