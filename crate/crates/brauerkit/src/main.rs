fn main() {
    std::process::exit(brauerkit::cli::main_with(std::env::args_os()));
}
