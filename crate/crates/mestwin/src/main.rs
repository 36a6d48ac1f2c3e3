fn main() {
    std::process::exit(mestwin::cli::run());
}
