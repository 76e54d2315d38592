fn main() {
    std::process::exit(jetframe::cli::main_with_args(std::env::args_os()));
}
