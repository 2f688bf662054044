use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::new().filter_or("DISTCOMP_LOG", "warn")).init();
    std::process::exit(distcomp_cli::main_with(std::env::args_os()));
}
