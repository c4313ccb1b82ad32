fn main() {
    std::process::exit(blsmo::cli::main_with_args(std::env::args_os()));
}
