fn main() {
    std::process::exit(proxskip::cli::main());
}
