fn main() {
    std::process::exit(stratboost::cli::run(std::env::args_os()));
}
