fn main() {
    std::process::exit(desing::cli::run(std::env::args_os()));
}
