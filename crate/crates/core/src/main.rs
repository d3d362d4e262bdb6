fn main() {
    std::process::exit(echopair::cli::run(std::env::args_os()));
}
