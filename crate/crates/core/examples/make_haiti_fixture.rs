//! Regenerates the bundled synthetic scenario under `data/haiti_synth/`.
//!
//! cargo run --release --example make_haiti_fixture [-- <dir>]

use std::path::PathBuf;

use eewsim::synthetic::{haiti_like, HaitiEvent, DEPTH_KM};

fn config(event: HaitiEvent) -> String {
    let (lat, lon) = event.epicenter();
    let y = event.slug();
    format!(
        r#"# Synthetic Haiti-like scenario ({y} event). Depth is a placeholder.
master_seed = 1
replicas = 1000
n_grid = {{ start = 300, stop = 3000, step = 100 }}
mmi_bins = ["(7.5,8]", "(8,8.5]", "(8.5,9]"]
output_dir = "out/{y}"

[scenario]
lat = {lat}
lon = {lon}
depth_km = {DEPTH_KM}
magnitude = {mag}
origin_time_s = 0
v_p_km_s = 6.5
v_s_km_s = 3.5

[inputs]
population = "population.asc"
mmi = "mmi_{y}.asc"

[synth]
n_phones = 6202
seed = 2022

[phone]
p_detect = 0.7
delay_lo_s = 0.5
delay_hi_s = 3.5

[detector]
k_min = 5
window_s = 10.0

[alert]
dissemination_latency_s = 0.0
"#,
        mag = event.magnitude()
    )
}

fn main() -> std::io::Result<()> {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/haiti_synth"));
    std::fs::create_dir_all(&dir)?;
    for event in [HaitiEvent::Jan2010, HaitiEvent::Aug2021] {
        let s = haiti_like(event);
        if event == HaitiEvent::Jan2010 {
            std::fs::write(dir.join("population.asc"), s.population.to_ascii())?;
        }
        std::fs::write(dir.join(format!("mmi_{}.asc", event.slug())), s.mmi.to_ascii())?;
        std::fs::write(dir.join(format!("haiti_{}.toml", event.slug())), config(event))?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}
