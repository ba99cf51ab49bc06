fn main() {
    std::process::exit(entropy_conformal::cli::run(std::env::args_os()));
}
