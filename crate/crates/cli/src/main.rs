fn main() {
    std::process::exit(sve_hdr_cli::main_with_args(std::env::args_os()));
}
