fn main() {
    std::process::exit(opinion_core::cli::main_with_args(std::env::args_os()));
}
