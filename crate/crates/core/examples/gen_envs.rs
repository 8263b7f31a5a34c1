//! Writes the built-in environments as PGM files with JSON sidecars.
//!
//! Usage: `cargo run -p nbp-core --example gen_envs -- [OUT_DIR]` (default `envs`).

use std::path::PathBuf;

use nbp_core::scenarios;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "envs".into()));
    std::fs::create_dir_all(&out)?;
    for name in scenarios::NAMES {
        let env = scenarios::by_name(name)?;
        let path = out.join(format!("{name}.pgm"));
        env.save_with_start(&path, scenarios::start_pose(name))?;
        println!(
            "{} ({} x {} cells, {})",
            path.display(),
            env.cols(),
            env.rows(),
            env.content_hash()
        );
    }
    Ok(())
}
