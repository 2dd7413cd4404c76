fn main() {
    std::process::exit(lfreparam::cli::main_with_args(std::env::args_os()));
}
