use clap::Parser;
use learning_egm::cli::{run, Cli, THREADS_ENV};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(n) = std::env::var(THREADS_ENV) {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not set thread count: {e}");
                }
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got {n:?}");
                std::process::exit(2);
            }
        }
    }
    let cli = Cli::parse();
    let mut out = String::new();
    let result = run(&cli, &mut out);
    print!("{out}");
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
