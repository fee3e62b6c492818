fn main() {
    std::process::exit(osfsu::cli::main_with_args(std::env::args_os()));
}
