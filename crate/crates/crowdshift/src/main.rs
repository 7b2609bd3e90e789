use clap::Parser;
use crowdshift::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli, numcore::thread_budget()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
