mod args;
mod commands;

use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let matches = match args::command().try_get_matches() {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            eprintln!("{}", rendered.lines().next().unwrap_or("error: invalid arguments"));
            return ExitCode::from(2);
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let result = match name {
        "collect-explore" => commands::collect_explore(sub),
        "collect-demo-scripted" => commands::collect_demo_scripted(sub),
        "serve-demo" => commands::serve_demo(sub),
        "train" => commands::train(sub),
        "evaluate" => commands::evaluate(sub),
        "sweep" => commands::sweep(sub),
        "inspect-buffer" => commands::inspect_buffer(sub),
        other => unreachable!("unhandled subcommand {other}"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
