fn main() {
    std::process::exit(ringheat::cli::main_with(std::env::args_os()));
}
