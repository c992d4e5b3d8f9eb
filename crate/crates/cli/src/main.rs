fn main() {
    std::process::exit(amiedot::cli::run());
}
