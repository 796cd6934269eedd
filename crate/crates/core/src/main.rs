fn main() {
    std::process::exit(chromaperc::cli::main_with_args(std::env::args_os()));
}
