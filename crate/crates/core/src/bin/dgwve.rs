fn main() {
    std::process::exit(dgwve::cli::main_with(std::env::args_os()));
}
