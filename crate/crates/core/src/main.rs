use std::io;
use std::process::ExitCode;

use ota_inverse::cli;

fn main() -> ExitCode {
    let env_seed = std::env::var(cli::SEED_ENV).ok();
    let code = cli::run(std::env::args_os(), env_seed.as_deref(), &mut io::stdout(), &mut io::stderr());
    ExitCode::from(code as u8)
}
