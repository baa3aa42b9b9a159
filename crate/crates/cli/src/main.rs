fn main() {
    std::process::exit(pohp_cli::main_with_args(std::env::args_os()));
}
