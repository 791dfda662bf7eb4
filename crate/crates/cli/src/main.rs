fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ARGON_LOG", "warn")).init();
    std::process::exit(argon_cli::run(std::env::args_os()));
}
