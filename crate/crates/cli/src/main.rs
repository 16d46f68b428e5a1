use std::process::ExitCode;

use clap::Parser;
use qsprox_cli::{run, Args, CliError, ExperimentConfig};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match ExperimentConfig::from_args(args).and_then(|cfg| run(&cfg).map(|runs| (cfg, runs))) {
        Ok((cfg, runs)) => {
            for r in &runs {
                let first = r.first_below_target.map_or("-".to_string(), |k| k.to_string());
                println!(
                    "{} setting={} memory={} status={} iterations={} first_below_target={} final={:.3e}{}",
                    r.experiment,
                    r.setting,
                    r.memory,
                    r.status,
                    r.iterations,
                    first,
                    r.final_value,
                    r.oc.map_or(String::new(), |oc| format!(" oc={oc:.2}"))
                );
            }
            println!("wrote {}", cfg.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            report(&e);
            ExitCode::from(if matches!(e, CliError::Config(_)) { 2 } else { 1 })
        }
    }
}

/// One JSON object on stderr: `{"error": <kind>, "message": <text>}`.
fn report(e: &CliError) {
    let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
    eprintln!("{line}");
}
