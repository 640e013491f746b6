use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(game_of_coding::cli::main_with_args(std::env::args()) as u8)
}
