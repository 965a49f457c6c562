fn main() {
    std::process::exit(junction_core::cli::main_with(std::env::args_os()));
}
