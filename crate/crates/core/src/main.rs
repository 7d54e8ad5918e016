fn main() {
    std::process::exit(squeezefit::cli::main_with_args(std::env::args_os()));
}
