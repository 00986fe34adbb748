fn main() {
    std::process::exit(f0kit::cli::main_with(std::env::args_os()));
}
