fn main() {
    std::process::exit(minsum::cli::run(std::env::args_os()));
}
