fn main() {
    std::process::exit(ssregime::cli::run(std::env::args_os()));
}
