use std::path::PathBuf;
use std::process::ExitCode;

use cali::commands::{self, COMMANDS};
use cali::config::RunConfig;
use clap::{Arg, ArgAction, Command};

fn cli() -> Command {
    let mut cmd = Command::new("cali")
        .about("Domain-adaptive traversability segmentation and visual planning on synthetic data")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for &(name, about) in COMMANDS {
        let mut sub = Command::new(name).about(about).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key=value file; flags override it"),
        );
        for spec in commands::specs(name).expect("declared command") {
            let mut help = spec.help.to_string();
            if let Some(d) = spec.default {
                help = format!("{help} [default: {d}]").trim_start().to_string();
            }
            sub = sub.arg(Arg::new(spec.key).long(spec.key).value_name("VALUE").help(help).action(ArgAction::Set));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let specs = commands::specs(name).expect("declared command");
    let flags: Vec<(String, String)> = specs
        .iter()
        .filter_map(|s| sub.get_one::<String>(s.key).map(|v| (s.key.to_string(), v.clone())))
        .collect();
    let file = sub.get_one::<String>("config").map(PathBuf::from);
    let result = RunConfig::resolve(name, specs, file.as_deref(), &flags).and_then(|mut cfg| commands::run(&mut cfg));
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
