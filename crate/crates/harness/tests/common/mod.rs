#![allow(dead_code)]

use std::path::{Path, PathBuf};

use hitnet_harness::ExperimentConfig;

pub fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn spec_path(name: &str) -> PathBuf {
    root().join("specs").join(format!("{name}.hit"))
}

pub fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("hitnet-test-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

/// A seconds-long experiment with narrow networks.
pub fn tiny(space: &str, archs: &str) -> ExperimentConfig {
    let text = format!(
        "archs = {archs}\nseeds = 5\nsamples_per_word = 6\nepochs = 3\npatience = 3\nwarmup = 1\ndesk = 1\n\
         test_lengths = 3, 4\ntest_cap = 6\ngen_hidden = 16\nhomotopy_hidden = 8\nwidth = 16\nheads = 2\nlayers = 1\n\
         ff = 16\ncover_hidden = 16\ngru_hidden = 16\nthreads = 1\n"
    );
    let mut c = ExperimentConfig::parse(&text, Path::new(".")).unwrap();
    c.spec = Some(spec_path(space));
    c.inverses = space == "klein";
    c
}
