fn main() {
    std::process::exit(histograde_cli::main_with(std::env::args_os()));
}
