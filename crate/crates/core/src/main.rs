fn main() {
    std::process::exit(softgrip_core::cli::main_with_args(std::env::args_os()));
}
