//! Regenerates the bundled synthetic election under `fixtures/`.
//!
//! ```text
//! cargo run -p ppga-core --example make_fixtures
//! ```

use std::path::Path;

use ppga_core::ingest::write_pabulib;
use ppga_core::synthetic::{city_election, CityConfig};

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let raw = city_election(&CityConfig::default());
    std::fs::write(dir.join("synthetic_city.pb"), write_pabulib(&raw))?;
    println!("wrote {} votes over {} projects", raw.votes.len(), raw.projects.len());
    Ok(())
}
