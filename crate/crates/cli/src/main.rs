use std::io::Write;
use std::process;

use clap::Parser;
use simplex_kde_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let mut log = stderr.lock();
    let code = match run(&cli, &mut out, &mut log) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(log, "error: {e}");
            e.exit_code()
        }
    };
    let _ = out.flush();
    process::exit(code);
}
