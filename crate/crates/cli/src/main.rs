fn main() {
    std::process::exit(slipwalk_cli::main_with(std::env::args_os()));
}
