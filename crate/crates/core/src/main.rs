fn main() {
    std::process::exit(muffle::cli::run_cli(std::env::args_os()));
}
