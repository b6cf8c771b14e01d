fn main() {
    std::process::exit(laml::cli::run(std::env::args_os()));
}
