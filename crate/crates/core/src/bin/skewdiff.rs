fn main() {
    std::process::exit(skewdiff::cli::run_from_args(std::env::args_os()));
}
