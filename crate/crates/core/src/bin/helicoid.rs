fn main() {
    std::process::exit(helicoid::cli::run(std::env::args_os()));
}
