fn main() {
    std::process::exit(subkalman::cli::run_cli(std::env::args_os()));
}
