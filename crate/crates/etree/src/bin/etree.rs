fn main() {
    std::process::exit(etree::cli::run(std::env::args_os()));
}
