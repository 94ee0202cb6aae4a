//! Running a configuration in memory, as the command-line tool does.

use magreduce::cli::{self, RunConfig};

const CONFIG: &str = r#"{
    "model": "beanie",
    "mode": "reduce-abelian",
    "momentum": { "mu": [1.0], "a": [1.0, 0.0] },
    "initial": { "x": 0.5, "xdot": 0.3 },
    "stepper": { "kind": "rkf45", "h_init": 0.01, "atol": 1e-11, "rtol": 1e-11, "h_min": 1e-8 },
    "t_end": 5.0
}"#;

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::from_json(CONFIG)?;
    println!("config hash {}", cfg.hash());
    let outcome = cli::run_config(cfg)??;
    for check in &outcome.report.checks {
        println!("{} {} <= {:e}: {:?}", if check.pass { "PASS" } else { "FAIL" }, check.metric, check.threshold, check.value);
    }
    let rows = outcome.csv.iter().filter(|&&c| c == b'\n').count();
    println!("csv rows (with header): {rows}");
    println!("overall: {}", if outcome.report.pass { "pass" } else { "fail" });
    Ok(())
}
