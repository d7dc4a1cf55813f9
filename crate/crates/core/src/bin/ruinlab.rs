fn main() {
    std::process::exit(ruinlab::cli::main_with_args(std::env::args_os()));
}
