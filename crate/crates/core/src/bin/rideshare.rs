fn main() {
    std::process::exit(rideshare::cli::main_with(std::env::args_os()));
}
