fn main() {
    std::process::exit(qcc::cli::main());
}
