fn main() {
    std::process::exit(nmgen::cli::main_with_args(std::env::args_os()));
}
