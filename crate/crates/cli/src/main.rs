fn main() {
    std::process::exit(lookum_cli::main_with_args(std::env::args_os()));
}
