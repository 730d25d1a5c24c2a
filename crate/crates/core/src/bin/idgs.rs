fn main() {
    std::process::exit(idgs_core::cli::main_with_args(std::env::args_os()));
}
