use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPOTAR_LOG", "warn")).init();
    // Unlocked stderr: rayon workers log through it while a command runs.
    let code = spotar::cli::run_with(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr());
    ExitCode::from(code)
}
