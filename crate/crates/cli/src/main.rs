use clap::Parser;
use invisible_cli::{run, Cli, EXIT_INVALID};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() && e.kind() != clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            eprintln!("{}", serde_json::json!({"error": "Usage", "message": e.to_string()}));
            std::process::exit(EXIT_INVALID);
        }
        Err(e) => e.exit(),
    };
    std::process::exit(run(&cli));
}
