fn main() {
    std::process::exit(robust_frechet::cli::main_with_args(std::env::args_os()));
}
