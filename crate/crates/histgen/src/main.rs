fn main() {
    std::process::exit(histgen::cli::run());
}
