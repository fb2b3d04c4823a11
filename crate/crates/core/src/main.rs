fn main() {
    std::process::exit(mixsing::cli::main_with_args(std::env::args_os()));
}
