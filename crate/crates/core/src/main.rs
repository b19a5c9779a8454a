fn main() {
    std::process::exit(subgoss::cli::run_cli(std::env::args_os()));
}
