mod args;
mod commands;
mod error;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use args::{Cli, Command, Format};
use error::{CliError, Context};

fn runtime(workers: Option<usize>) -> Result<tokio::runtime::Runtime, CliError> {
    let mut b = tokio::runtime::Builder::new_multi_thread();
    b.enable_all();
    if let Some(n) = workers {
        b.worker_threads(n);
    }
    b.build().runtime("starting async runtime")
}

fn dispatch(cli: &Cli) -> Result<Option<commands::Outcome>, CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".to_string()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .runtime("worker pool")?;
    }
    let (name, outcome) = match &cli.command {
        Command::Curate(a) => ("curate", commands::curate_cmd(a)?),
        Command::Split(a) => ("split", commands::split_cmd(a)?),
        Command::Prompt(a) => ("prompt", commands::prompt_cmd(a)?),
        Command::Run(a) => ("run", commands::run_cmd(a, &runtime(cli.workers)?)?),
        Command::Eval(a) => ("eval", commands::eval_cmd(a)?),
        Command::MinePairs(a) => ("mine-pairs", commands::mine_pairs_cmd(a)?),
        Command::Report(a) => ("report", commands::report_cmd(a)?),
        Command::TrainJob(a) => ("train-job", commands::train_job_cmd(a)?),
        Command::Ntxent(a) => ("ntxent", commands::ntxent_cmd(a)?),
        Command::MockScript(a) => ("mock-script", commands::mock_script_cmd(a)?),
        Command::MockServe(a) => {
            commands::mock_serve_cmd(a, &runtime(cli.workers)?)?;
            return Ok(None);
        }
    };
    let record = json!({
        "tool": "molbench",
        "version": env!("MOLBENCH_VERSION"),
        "command": name,
        "workers": cli.workers,
        "config": outcome.config,
        "outputs": outcome.outputs,
        "summary": outcome.summary,
    });
    if let Some(dir) = outcome.record.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).runtime(format!("creating {}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(&record).expect("record serializes");
    text.push('\n');
    std::fs::write(&outcome.record, text).runtime(format!("writing {}", outcome.record.display()))?;
    Ok(Some(outcome))
}

fn report_error(e: &CliError, json_errors: bool) {
    if json_errors {
        eprintln!("{}", e.to_json());
    } else {
        eprintln!("error: {}", e.message());
    }
}

fn main() {
    let json_errors = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            if code == 0 || !json_errors {
                let _ = e.print();
            } else {
                report_error(&CliError::Usage(e.to_string().trim().to_string()), true);
            }
            std::process::exit(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match dispatch(&cli) {
        Ok(Some(outcome)) => match cli.format {
            Format::Text => println!("{}", outcome.text.trim_end()),
            Format::Json => println!(
                "{}",
                json!({"outputs": outcome.outputs, "summary": outcome.summary, "record": outcome.record})
            ),
        },
        Ok(None) => {}
        Err(e) => {
            report_error(&e, cli.json_errors);
            std::process::exit(e.code());
        }
    }
}
