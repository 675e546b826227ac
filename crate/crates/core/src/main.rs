fn main() {
    std::process::exit(siavqe::cli::main_with_args(std::env::args_os()));
}
