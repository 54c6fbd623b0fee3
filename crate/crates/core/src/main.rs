fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CONFORMA_LOG")).init();
    std::process::exit(conforma::cli::run(std::env::args_os()));
}
