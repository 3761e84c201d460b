fn main() {
    std::process::exit(evpeak::cli::main_with_args(std::env::args_os()));
}
