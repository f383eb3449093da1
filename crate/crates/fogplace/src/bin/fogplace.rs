fn main() {
    std::process::exit(fogplace::cli::run());
}
