fn main() {
    std::process::exit(vpscene_cli::main_with_args(std::env::args_os()));
}
