fn main() {
    std::process::exit(corrbench::cli::run(std::env::args_os()));
}
