fn main() {
    std::process::exit(skt_core::cli::main_with_args(std::env::args_os()));
}
