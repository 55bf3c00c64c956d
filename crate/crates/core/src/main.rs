fn main() {
    std::process::exit(eewsim::cli::run(std::env::args_os()));
}
