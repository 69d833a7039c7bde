//! Drive the command layer from code, as the binary does, and read the
//! summary back.

use wavemap::cli_io::{run, Command, Config, Summary};

fn main() -> wavemap::Result<()> {
    let mut cfg = Config::default();
    for kv in ["ab.n=2", "run.id=demo"] {
        cfg.set_pair(kv)?;
    }
    let dir = std::env::temp_dir().join("wavemap-command-layer");
    let summary = run(Command::AbSolve, &cfg, &dir, 1)?;
    let back = Summary::read(&dir.join("demo_summary.json"))?;
    assert_eq!(back, summary);
    println!("exit {:?}, files {:?}", summary.exit, summary.files);
    println!(
        "{}",
        serde_json::to_string_pretty(&summary.results).unwrap_or_default()
    );
    Ok(())
}
