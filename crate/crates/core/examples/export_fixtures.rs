//! Writes every built-in fixture to `data/<stem>.json`.
//!
//! cargo run -p rigidity-core --example export_fixtures [out_dir]

use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    std::fs::create_dir_all(&dir)?;
    for (stem, doc) in rigidity_core::fixtures::all() {
        let text = serde_json::to_string_pretty(&doc).expect("document serializes") + "\n";
        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, text)?;
        println!("{}", path.display());
    }
    Ok(())
}
