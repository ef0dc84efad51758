fn main() {
    std::process::exit(aoa_core::cli::main_with_args(std::env::args_os()));
}
