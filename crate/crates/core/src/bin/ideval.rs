fn main() {
    std::process::exit(ideval::cli::main_with_args(std::env::args_os()));
}
