//! Binary entry point: parse arguments, run, map errors to exit codes.

fn main() {
    if let Err(e) = tidelock::cli::run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
