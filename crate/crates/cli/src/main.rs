fn main() {
    std::process::exit(cochlea_feast_cli::main_with_args(std::env::args_os()));
}
