fn main() {
    std::process::exit(rcs_cli::main_with(std::env::args_os()));
}
