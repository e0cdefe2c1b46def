fn main() {
    std::process::exit(ignorance::cli::run(std::env::args_os()));
}
