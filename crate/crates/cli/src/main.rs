fn main() {
    std::process::exit(spread_cli::run(std::env::args_os()));
}
