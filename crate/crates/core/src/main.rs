use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(v) = std::env::var("UIPDG_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("cannot size the worker pool: {e}");
                }
            }
            _ => {
                eprintln!("UIPDG_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    ExitCode::from(uipdg::cli::main_with_args(std::env::args_os()) as u8)
}
