fn main() {
    std::process::exit(spinsc_cli::main_with_args(std::env::args_os()));
}
