fn main() {
    std::process::exit(terra_cli::main_with_args(std::env::args_os()));
}
