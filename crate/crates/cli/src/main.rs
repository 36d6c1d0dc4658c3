fn main() {
    std::process::exit(geophase_cli::main_with_args(std::env::args_os()));
}
