fn main() {
    std::process::exit(riskattr_cli::run_cli(std::env::args_os()));
}
