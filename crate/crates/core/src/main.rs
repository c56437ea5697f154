fn main() {
    std::process::exit(convcode::cli::run_from_args(std::env::args_os()));
}
