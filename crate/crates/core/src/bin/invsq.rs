fn main() {
    std::process::exit(invsq::cli::main_with_args(std::env::args_os()));
}
