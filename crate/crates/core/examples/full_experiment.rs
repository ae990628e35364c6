//! The whole protocol through the command-line layer, writing every artifact
//! into a temporary directory and printing the sweep table.
//!
//! Run with `cargo run --release --example full_experiment`.

use prnu_triangle::cli::{self, Cli, Command};

fn main() -> prnu_triangle::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| prnu_triangle::Error::Io {
        path: std::env::temp_dir(),
        source: e,
    })?;
    let config = dir.path().join("config.toml");
    let text = "seed = 1\n\n\
        [dataset]\nrows = 64\ncols = 64\nn_public = 40\nn_line_fit = 40\nn_calibration = 60\n\
        n_reference = 30\nn_flat = 20\nn_attack_source = 8\n\n\
        [attack]\nn_eve = [10, 36]\n\n\
        [setup_a]\nk = 20\nreps = 300\n\n\
        [setup_b]\np_fa = 0.1\n";
    std::fs::write(&config, text).map_err(|e| prnu_triangle::Error::Io {
        path: config.clone(),
        source: e,
    })?;
    let out = dir.path().join("run");
    let args = Cli {
        config: Some(config),
        seed: None,
        workers: None,
        out: out.clone(),
        command: Command::Experiment,
    };
    let outcome = cli::run(&args)?;
    println!("outcome {outcome:?}; artifacts:");
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .into_iter()
        .flatten()
        .flatten()
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    println!("  {}", names.join(" "));
    Ok(())
}
