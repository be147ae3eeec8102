fn main() {
    std::process::exit(edustory::cli::run(std::env::args_os()));
}
