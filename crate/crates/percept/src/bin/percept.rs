fn main() {
    env_logger::init();
    std::process::exit(percept::cli::run(std::env::args()));
}
