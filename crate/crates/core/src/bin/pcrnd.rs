fn main() {
    std::process::exit(pcrnd::cli::main_with_args(std::env::args_os()));
}
