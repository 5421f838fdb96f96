//! The batch front end driven from a config string, as the `skt` binary does
//! with `--config`.

use skt::cli::{continue_cmd, Exit};
use skt::config::RunConfig;

const CONFIG: &str = "
# d21 beyond the point where the first mode disappears
preset = 1
d21 = 0.045
nodes = 101
param_min = 0.002
param_max = 0.01
max_primary = 2
";

fn main() -> skt::Result<()> {
    let mut cfg = RunConfig::parse(CONFIG, None)?;
    cfg.out = std::env::args().nth(1).unwrap_or_else(|| "out/batch".into()).into();
    println!("defaults used for: {}", cfg.defaulted.join(", "));
    let exit = continue_cmd(&cfg)?;
    println!("exit code {}", exit as i32);
    assert_eq!(exit, Exit::Ok);
    Ok(())
}
