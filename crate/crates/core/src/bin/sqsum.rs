use std::process::ExitCode;

fn main() -> ExitCode {
    let env_seed = std::env::var(sqsum::cli::SEED_ENV).ok();
    let code = sqsum::cli::run_cli(
        std::env::args_os(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
        env_seed.as_deref(),
    );
    ExitCode::from(code as u8)
}
