fn main() {
    std::process::exit(maskforge::cli::run(std::env::args_os()));
}
