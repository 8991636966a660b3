//! Writes a synthetic demo dataset: `cargo run --example demo_data -- <dir>`.

use std::path::PathBuf;

#[path = "../tests/fixture/mod.rs"]
mod fixture;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo".into()));
    std::fs::create_dir_all(&dir)?;
    fixture::write_dataset(&dir, 2021)?;
    println!("{}", dir.join("config.json").display());
    Ok(())
}
