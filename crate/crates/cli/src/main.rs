use clap::Parser;
use replab_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(o) => {
            println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, cli.command.name(), o.summary);
            println!("output: {}", o.run_dir.display());
            o.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
