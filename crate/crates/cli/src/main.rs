use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod config;

/// Restore the default SIGPIPE disposition so `codemix ... | head` exits
/// quietly instead of panicking on the closed pipe.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() -> ExitCode {
    reset_sigpipe();
    let cli = args::Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // One line, full context chain, suitable for scripts and logs.
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
