fn main() {
    std::process::exit(rapid_diff::cli::run(std::env::args_os()));
}
